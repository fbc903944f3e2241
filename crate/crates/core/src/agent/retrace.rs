use alloc::vec;
use alloc::vec::Vec;

use super::EpisodeTrace;
use crate::nn::Network;
use crate::tensor::argmax_masked;
use crate::{Error, Result, Tensor};

/// Anything that maps a batch of observations `[n, d]` to action values `[n, A]`.
pub trait QFunction {
    fn q_values(&self, obs: &Tensor) -> Result<Tensor>;
}

impl QFunction for Network {
    fn q_values(&self, obs: &Tensor) -> Result<Tensor> {
        self.predict(obs)
    }
}

/// `[T + 1, d]`: the observation of every visited state, terminal state last.
pub fn episode_observations(episode: &EpisodeTrace) -> Tensor {
    let tr = episode.transitions();
    let d = tr[0].obs.len();
    let mut data = Vec::with_capacity((tr.len() + 1) * d);
    for t in tr {
        data.extend_from_slice(&t.obs);
    }
    data.extend_from_slice(&tr[tr.len() - 1].next_obs);
    Tensor::new(vec![tr.len() + 1, d], data).expect("rows have equal length")
}

/// Retrace(λ) targets for each transition of `episode`.
///
/// ```text
/// δ_t    = r_t + γ(1 − done_t)·Q_tgt(s_{t+1}, argmax_valid Q_on(s_{t+1}, ·)) − Q_tgt(s_t, a_t)
/// c_s    = λ·min(1, π(a_s|s_s) / μ_s),   π greedy w.r.t. Q_on over valid actions
/// target = Q_tgt(s_t, a_t) + Σ_{u≥t} γ^{u−t} (Π_{s=t+1..u} c_s) δ_u
/// ```
pub fn retrace_targets<A, B>(
    episode: &EpisodeTrace,
    online: &A,
    target: &B,
    gamma: f64,
    lambda: f64,
) -> Result<Vec<f64>>
where
    A: QFunction + ?Sized,
    B: QFunction + ?Sized,
{
    let obs = episode_observations(episode);
    let q_online = online.q_values(&obs)?;
    let q_target = target.q_values(&obs)?;
    retrace_from_q(episode, &q_online, &q_target, gamma, lambda)
}

/// [`retrace_targets`] from precomputed `[T + 1, A]` value tables whose row `t`
/// evaluates state `s_t`.
pub fn retrace_from_q(
    episode: &EpisodeTrace,
    q_online: &Tensor,
    q_target: &Tensor,
    gamma: f64,
    lambda: f64,
) -> Result<Vec<f64>> {
    let len = episode.len();
    for q in [q_online, q_target] {
        if q.shape().len() != 2 || q.rows() != len + 1 {
            return Err(Error::Shape {
                op: "retrace",
                left: q.shape().to_vec(),
                right: vec![len + 1],
            });
        }
    }
    retrace_rows(
        episode,
        q_online.data(),
        q_target.data(),
        q_online.row_len(),
        gamma,
        lambda,
    )
}

/// Backward recursion `G_t = δ_t + γ·c_{t+1}·G_{t+1}` over row-major tables.
pub(crate) fn retrace_rows(
    episode: &EpisodeTrace,
    q_online: &[f64],
    q_target: &[f64],
    num_actions: usize,
    gamma: f64,
    lambda: f64,
) -> Result<Vec<f64>> {
    let tr = episode.transitions();
    fn row(q: &[f64], t: usize, width: usize) -> &[f64] {
        &q[t * width..(t + 1) * width]
    }
    let mut targets = vec![0.0; tr.len()];
    let mut carry = 0.0; // γ·c_{t+1}·G_{t+1}
    for t in (0..tr.len()).rev() {
        let x = &tr[t];
        if x.behavior_prob.is_nan() || x.behavior_prob <= 0.0 {
            return Err(Error::CorruptedTransition {
                step: t,
                reason: "non-positive behaviour probability",
            });
        }
        if x.action >= num_actions {
            return Err(Error::IndexOutOfRange {
                index: x.action,
                len: num_actions,
            });
        }
        let q_sa = q_target[t * num_actions + x.action];
        let bootstrap = if x.done {
            0.0
        } else {
            let best = argmax_masked(row(q_online, t + 1, num_actions), &x.next_valid_mask)?;
            q_target[(t + 1) * num_actions + best]
        };
        // q_sa + δ_t + carry, grouped so that λ = 0 gives exactly r + γ·bootstrap.
        targets[t] = (x.reward + gamma * bootstrap) + carry;
        let g = targets[t] - q_sa;

        let greedy = argmax_masked(row(q_online, t, num_actions), &x.valid_mask)?;
        let pi = if greedy == x.action { 1.0 } else { 0.0 };
        let c = lambda * (pi / x.behavior_prob).min(1.0);
        carry = gamma * c * g;
    }
    Ok(targets)
}
