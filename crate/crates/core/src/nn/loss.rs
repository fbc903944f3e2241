use alloc::vec;

use crate::{Error, Result, Tensor};

fn check(pred: &Tensor, target: &Tensor, op: &'static str) -> Result<()> {
    if pred.shape() != target.shape() || pred.is_empty() {
        return Err(Error::Shape {
            op,
            left: pred.shape().to_vec(),
            right: target.shape().to_vec(),
        });
    }
    Ok(())
}

/// Mean squared error over all elements, with its gradient w.r.t. `pred`.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    check(pred, target, "mse_loss")?;
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; pred.len()];
    for ((g, &p), &t) in grad.iter_mut().zip(pred.data()).zip(target.data()) {
        let d = p - t;
        loss += d * d;
        *g = 2.0 * d / n;
    }
    Ok((loss / n, Tensor::new(pred.shape().to_vec(), grad)?))
}

/// Mean Huber loss: `½d²` for `|d| ≤ δ`, `δ(|d| − ½δ)` beyond.
pub fn huber_loss(pred: &Tensor, target: &Tensor, delta: f64) -> Result<(f64, Tensor)> {
    check(pred, target, "huber_loss")?;
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; pred.len()];
    for ((g, &p), &t) in grad.iter_mut().zip(pred.data()).zip(target.data()) {
        let d = p - t;
        if d.abs() <= delta {
            loss += 0.5 * d * d;
            *g = d / n;
        } else {
            loss += delta * (d.abs() - 0.5 * delta);
            *g = delta * d.signum() / n;
        }
    }
    Ok((loss / n, Tensor::new(pred.shape().to_vec(), grad)?))
}
