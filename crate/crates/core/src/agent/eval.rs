use alloc::vec::Vec;

use super::QFunction;
use crate::env::{CwcfEnv, EnvState, RewardSpec};
use crate::tensor::argmax_masked;
use crate::{LatentFeatures, Result, Tensor};

/// Aggregate evaluation result over a set of episodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub episodes: usize,
    /// Fraction of episodes ending in a correct classification.
    pub accuracy: f64,
    /// Mean episode return.
    pub avg_reward: f64,
    /// Mean number of acquire actions per episode.
    pub avg_features_used: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeOutcome {
    pub sample_index: usize,
    pub predicted: usize,
    pub correct: bool,
    pub features_used: usize,
    pub episode_return: f64,
}

impl Metrics {
    pub fn from_outcomes(outcomes: &[EpisodeOutcome]) -> Metrics {
        let n = outcomes.len();
        if n == 0 {
            return Metrics {
                episodes: 0,
                accuracy: 0.0,
                avg_reward: 0.0,
                avg_features_used: 0.0,
            };
        }
        let nf = n as f64;
        Metrics {
            episodes: n,
            accuracy: outcomes.iter().filter(|o| o.correct).count() as f64 / nf,
            avg_reward: outcomes.iter().map(|o| o.episode_return).sum::<f64>() / nf,
            avg_features_used: outcomes.iter().map(|o| o.features_used as f64).sum::<f64>() / nf,
        }
    }
}

/// A decision rule that can be evaluated on the environment.
pub trait Policy {
    fn select(&mut self, state: &EnvState, valid: &[bool]) -> Result<usize>;
}

/// Greedy (ε = 0) policy of a Q-function.
pub struct GreedyPolicy<'q, Q: ?Sized>(pub &'q Q);

impl<Q: QFunction + ?Sized> Policy for GreedyPolicy<'_, Q> {
    fn select(&mut self, state: &EnvState, valid: &[bool]) -> Result<usize> {
        let q = self.0.q_values(&Tensor::row_vector(state.observation()))?;
        argmax_masked(q.row(0), valid)
    }
}

fn outcome(
    env: &CwcfEnv<'_>,
    state: &EnvState,
    action: usize,
    episode_return: f64,
) -> EpisodeOutcome {
    let predicted = action - env.num_features();
    EpisodeOutcome {
        sample_index: state.sample_index(),
        predicted,
        correct: predicted == env.features().label(state.sample_index()),
        features_used: state.acquired(),
        episode_return,
    }
}

/// Runs `policy` once on every sample of `env`, in index order.
pub fn evaluate_policy<P: Policy + ?Sized>(env: &CwcfEnv<'_>, policy: &mut P) -> Result<Metrics> {
    let mut outcomes = Vec::with_capacity(env.num_samples());
    for i in 0..env.num_samples() {
        let mut state = env.reset(i)?;
        let mut ret = 0.0;
        loop {
            let valid = env.valid_actions(&state);
            let action = policy.select(&state, &valid)?;
            let (next, reward, done) = env.step_index(&state, action)?;
            ret += reward;
            if done {
                outcomes.push(outcome(env, &state, action, ret));
                break;
            }
            state = next;
        }
    }
    Ok(Metrics::from_outcomes(&outcomes))
}

/// Greedy evaluation of `qnet` with one episode per sample.
///
/// All episodes advance in lockstep so each step is one batched forward pass;
/// the result is identical to running [`GreedyPolicy`] sample by sample.
pub fn evaluate_detailed<Q: QFunction + ?Sized>(
    qnet: &Q,
    features: &LatentFeatures,
    rewards: RewardSpec,
) -> Result<Vec<EpisodeOutcome>> {
    let env = CwcfEnv::new(features, rewards)?;
    let n = env.num_samples();
    let mut states: Vec<EnvState> = (0..n).map(|i| env.reset(i)).collect::<Result<_>>()?;
    let mut returns = alloc::vec![0.0; n];
    let mut outcomes: Vec<Option<EpisodeOutcome>> = alloc::vec![None; n];
    let mut active: Vec<usize> = (0..n).collect();
    while !active.is_empty() {
        let obs: Vec<Vec<f64>> = active.iter().map(|&i| states[i].observation()).collect();
        let q = qnet.q_values(&Tensor::from_rows(&obs)?)?;
        let mut still = Vec::with_capacity(active.len());
        for (row, &i) in active.iter().enumerate() {
            let valid = env.valid_actions(&states[i]);
            let action = argmax_masked(q.row(row), &valid)?;
            let (next, reward, done) = env.step_index(&states[i], action)?;
            returns[i] += reward;
            if done {
                outcomes[i] = Some(outcome(&env, &states[i], action, returns[i]));
            } else {
                still.push(i);
            }
            states[i] = next;
        }
        active = still;
    }
    Ok(outcomes
        .into_iter()
        .map(|o| o.expect("every episode terminates"))
        .collect())
}

pub fn evaluate<Q: QFunction + ?Sized>(
    qnet: &Q,
    features: &LatentFeatures,
    rewards: RewardSpec,
) -> Result<Metrics> {
    Ok(Metrics::from_outcomes(&evaluate_detailed(
        qnet, features, rewards,
    )?))
}
