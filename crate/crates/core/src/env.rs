//! Classification with costly features as an episodic decision process.
//!
//! One sample per episode. Each step the agent either buys one more latent
//! feature at a uniform cost or commits to a class, which ends the episode.
//! Flat action encoding: `[0, m)` acquire feature `f`, `[m, m + K)` classify as
//! class `c`.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, LatentFeatures, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardSpec {
    pub feature_cost: f64,
    pub reward_correct: f64,
    pub reward_wrong: f64,
}

impl Default for RewardSpec {
    fn default() -> Self {
        RewardSpec {
            feature_cost: 0.005,
            reward_correct: 1.0,
            reward_wrong: -1.0,
        }
    }
}

impl RewardSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.feature_cost >= 0.0 && self.feature_cost.is_finite()) {
            return Err(Error::Config(
                "feature_cost must be a finite non-negative number".into(),
            ));
        }
        if !(self.reward_correct > 0.0 && self.reward_correct.is_finite()) {
            return Err(Error::Config("reward_correct must be positive".into()));
        }
        if !(self.reward_wrong < 0.0 && self.reward_wrong.is_finite()) {
            return Err(Error::Config("reward_wrong must be negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Acquire(usize),
    Classify(usize),
}

impl Action {
    pub fn from_index(index: usize, num_features: usize, num_classes: usize) -> Result<Action> {
        if index < num_features {
            Ok(Action::Acquire(index))
        } else if index < num_features + num_classes {
            Ok(Action::Classify(index - num_features))
        } else {
            Err(Error::IndexOutOfRange {
                index,
                len: num_features + num_classes,
            })
        }
    }

    pub fn index(self, num_features: usize) -> usize {
        match self {
            Action::Acquire(f) => f,
            Action::Classify(c) => num_features + c,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    mask: Vec<bool>,
    values: Vec<f64>,
    sample_index: usize,
    done: bool,
}

impl EnvState {
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Feature values where acquired, zero elsewhere.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sample_index(&self) -> usize {
        self.sample_index
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn acquired(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// `[values ‖ mask]`, length `2m`, with the mask as 0/1.
    pub fn observation(&self) -> Vec<f64> {
        let mut obs = Vec::with_capacity(2 * self.values.len());
        obs.extend_from_slice(&self.values);
        obs.extend(self.mask.iter().map(|&m| if m { 1.0 } else { 0.0 }));
        obs
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub reward: f64,
    pub done: bool,
}

/// Read-only view over a feature pool plus the reward structure.
#[derive(Debug, Clone, Copy)]
pub struct CwcfEnv<'a> {
    features: &'a LatentFeatures,
    rewards: RewardSpec,
}

impl<'a> CwcfEnv<'a> {
    pub fn new(features: &'a LatentFeatures, rewards: RewardSpec) -> Result<Self> {
        rewards.validate()?;
        Ok(CwcfEnv { features, rewards })
    }

    pub fn features(&self) -> &'a LatentFeatures {
        self.features
    }

    pub fn rewards(&self) -> RewardSpec {
        self.rewards
    }

    pub fn num_features(&self) -> usize {
        self.features.dim()
    }

    pub fn num_classes(&self) -> usize {
        self.features.num_classes()
    }

    pub fn num_actions(&self) -> usize {
        self.num_features() + self.num_classes()
    }

    pub fn observation_len(&self) -> usize {
        2 * self.num_features()
    }

    pub fn num_samples(&self) -> usize {
        self.features.len()
    }

    pub fn reset(&self, sample_index: usize) -> Result<EnvState> {
        if sample_index >= self.features.len() {
            return Err(Error::IndexOutOfRange {
                index: sample_index,
                len: self.features.len(),
            });
        }
        let m = self.num_features();
        Ok(EnvState {
            mask: vec![false; m],
            values: vec![0.0; m],
            sample_index,
            done: false,
        })
    }

    /// Acquire and classify actions with their validity in `state`.
    pub fn valid_actions(&self, state: &EnvState) -> Vec<bool> {
        let mut valid: Vec<bool> = state.mask.iter().map(|&m| !m).collect();
        valid.extend(core::iter::repeat_n(true, self.num_classes()));
        valid
    }

    /// Applies `action` to `state` in place.
    pub fn apply(&self, state: &mut EnvState, action: Action) -> Result<Step> {
        let m = self.num_features();
        let index = action.index(m);
        if state.done {
            return Err(Error::InvalidAction {
                action: index,
                reason: "episode already finished",
            });
        }
        match action {
            Action::Acquire(f) => {
                if f >= m {
                    return Err(Error::IndexOutOfRange { index: f, len: m });
                }
                if state.mask[f] {
                    return Err(Error::InvalidAction {
                        action: index,
                        reason: "feature already acquired",
                    });
                }
                state.mask[f] = true;
                state.values[f] = self.features.sample(state.sample_index)[f];
                Ok(Step {
                    reward: -self.rewards.feature_cost,
                    done: false,
                })
            }
            Action::Classify(c) => {
                if c >= self.num_classes() {
                    return Err(Error::IndexOutOfRange {
                        index: c,
                        len: self.num_classes(),
                    });
                }
                state.done = true;
                let reward = if c == self.features.label(state.sample_index) {
                    self.rewards.reward_correct
                } else {
                    self.rewards.reward_wrong
                };
                Ok(Step { reward, done: true })
            }
        }
    }

    /// Pure step: returns the successor state, reward and termination flag.
    pub fn step(&self, state: &EnvState, action: Action) -> Result<(EnvState, f64, bool)> {
        let mut next = state.clone();
        let step = self.apply(&mut next, action)?;
        Ok((next, step.reward, step.done))
    }

    /// [`CwcfEnv::step`] on a flat action index.
    pub fn step_index(&self, state: &EnvState, action: usize) -> Result<(EnvState, f64, bool)> {
        self.step(
            state,
            Action::from_index(action, self.num_features(), self.num_classes())?,
        )
    }
}
