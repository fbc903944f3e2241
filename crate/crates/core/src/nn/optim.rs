use alloc::vec::Vec;

use super::{Network, ParamMut};
use crate::{Error, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
}

impl OptimizerKind {
    pub fn adam(lr: f64) -> Self {
        OptimizerKind::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First-order optimizer bound to one network's parameter layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    kind: OptimizerKind,
    steps: u64,
    /// Adam first and second moments, one pair per parameter tensor.
    moments: Vec<(Tensor, Tensor)>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Self {
        Optimizer {
            kind,
            steps: 0,
            moments: Vec::new(),
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update using the gradients stored by the last backward pass.
    /// Nothing is modified if any gradient is non-finite.
    pub fn step(&mut self, net: &mut Network) -> Result<()> {
        self.apply(net.params_mut())
    }

    /// Updates an explicit parameter list. The list must keep the same layout
    /// across calls for Adam's moment state to line up.
    pub fn apply(&mut self, mut params: Vec<ParamMut<'_>>) -> Result<()> {
        if let Some(bad) = params.iter().find(|p| !p.grad.is_finite()) {
            return Err(Error::NonFiniteGradient { param: bad.label() });
        }
        if let OptimizerKind::Adam { .. } = self.kind {
            if self.moments.is_empty() {
                self.moments = params
                    .iter()
                    .map(|p| {
                        (
                            Tensor::zeros(p.value.shape()),
                            Tensor::zeros(p.value.shape()),
                        )
                    })
                    .collect();
            }
            if self.moments.len() != params.len()
                || self
                    .moments
                    .iter()
                    .zip(&params)
                    .any(|((m, _), p)| m.shape() != p.value.shape())
            {
                return Err(Error::Config(
                    "optimizer state does not match network parameters".into(),
                ));
            }
        }
        self.steps += 1;
        match self.kind {
            OptimizerKind::Sgd { lr } => {
                for p in params.iter_mut() {
                    for (v, g) in p.value.data_mut().iter_mut().zip(p.grad.data()) {
                        *v -= lr * g;
                    }
                }
            }
            OptimizerKind::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => {
                let t = self.steps as f64;
                let c1 = 1.0 - libm::pow(beta1, t);
                let c2 = 1.0 - libm::pow(beta2, t);
                for (p, (m, v)) in params.iter_mut().zip(self.moments.iter_mut()) {
                    let values = p.value.data_mut();
                    for (((w, &g), mi), vi) in values
                        .iter_mut()
                        .zip(p.grad.data())
                        .zip(m.data_mut())
                        .zip(v.data_mut())
                    {
                        *mi = beta1 * *mi + (1.0 - beta1) * g;
                        *vi = beta2 * *vi + (1.0 - beta2) * g * g;
                        let m_hat = *mi / c1;
                        let v_hat = *vi / c2;
                        *w -= lr * m_hat / (libm::sqrt(v_hat) + eps);
                    }
                }
            }
        }
        Ok(())
    }
}
