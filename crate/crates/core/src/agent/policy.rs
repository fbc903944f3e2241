use alloc::vec::Vec;

use super::{EpisodeTrace, QFunction, Transition};
use crate::env::CwcfEnv;
use crate::tensor::argmax_masked;
use crate::{Error, Result, SeededRng, Tensor};

/// Linear ε schedule: `start` at episode 0, `end` from `decay_episodes` on.
pub fn epsilon_at(episode: usize, start: f64, end: f64, decay_episodes: usize) -> f64 {
    if decay_episodes == 0 || episode >= decay_episodes {
        return end;
    }
    start + (end - start) * (episode as f64 / decay_episodes as f64)
}

/// ε-greedy action over `valid` actions.
///
/// Returns the action and its exact behaviour probability
/// `μ(a) = ε/|valid| + (1 − ε)·[a = greedy]`.
pub fn act<Q: QFunction + ?Sized>(
    obs: &[f64],
    valid: &[bool],
    qnet: &Q,
    epsilon: f64,
    rng: &mut SeededRng,
) -> Result<(usize, f64)> {
    let n_valid = valid.iter().filter(|&&v| v).count();
    if n_valid == 0 {
        return Err(Error::EmptyMask);
    }
    let q = qnet.q_values(&Tensor::row_vector(obs.to_vec()))?;
    let greedy = argmax_masked(q.row(0), valid)?;
    let action = if rng.uniform() < epsilon {
        let k = rng.below(n_valid);
        valid
            .iter()
            .enumerate()
            .filter(|(_, &v)| v)
            .nth(k)
            .map(|(i, _)| i)
            .expect("k < n_valid")
    } else {
        greedy
    };
    let mut mu = epsilon / n_valid as f64;
    if action == greedy {
        mu += 1.0 - epsilon;
    }
    Ok((action, mu))
}

/// Runs one ε-greedy episode on `sample_index`.
pub fn collect_episode<Q: QFunction + ?Sized>(
    env: &CwcfEnv<'_>,
    sample_index: usize,
    qnet: &Q,
    epsilon: f64,
    rng: &mut SeededRng,
) -> Result<EpisodeTrace> {
    let mut state = env.reset(sample_index)?;
    let mut obs = state.observation();
    let mut valid = env.valid_actions(&state);
    let mut transitions = Vec::new();
    loop {
        let (action, behavior_prob) = act(&obs, &valid, qnet, epsilon, rng)?;
        let (next, reward, done) = env.step_index(&state, action)?;
        let next_obs = next.observation();
        let next_valid = env.valid_actions(&next);
        transitions.push(Transition {
            obs,
            action,
            reward,
            next_obs: next_obs.clone(),
            done,
            behavior_prob,
            valid_mask: valid,
            next_valid_mask: next_valid.clone(),
        });
        if done {
            break;
        }
        state = next;
        obs = next_obs;
        valid = next_valid;
    }
    EpisodeTrace::new(transitions)
}
