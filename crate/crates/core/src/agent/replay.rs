use alloc::vec::Vec;

use crate::{Error, Result, SeededRng};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
    /// μ(a|s) of the acting policy when the action was taken.
    pub behavior_prob: f64,
    pub valid_mask: Vec<bool>,
    pub next_valid_mask: Vec<bool>,
}

/// One complete episode: contiguous transitions, only the last terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    transitions: Vec<Transition>,
}

impl EpisodeTrace {
    pub fn new(transitions: Vec<Transition>) -> Result<Self> {
        let last = transitions
            .len()
            .checked_sub(1)
            .ok_or(Error::CorruptedTransition {
                step: 0,
                reason: "empty episode",
            })?;
        for (t, tr) in transitions.iter().enumerate() {
            if tr.done != (t == last) {
                return Err(Error::CorruptedTransition {
                    step: t,
                    reason: "exactly the final transition must be terminal",
                });
            }
            if !(tr.behavior_prob > 0.0 && tr.behavior_prob <= 1.0) {
                return Err(Error::CorruptedTransition {
                    step: t,
                    reason: "behaviour probability outside (0, 1]",
                });
            }
            if tr.action >= tr.valid_mask.len() || !tr.valid_mask[tr.action] {
                return Err(Error::CorruptedTransition {
                    step: t,
                    reason: "action not valid in its state",
                });
            }
            if let Some(next) = transitions.get(t + 1) {
                if next.obs != tr.next_obs || next.valid_mask != tr.next_valid_mask {
                    return Err(Error::CorruptedTransition {
                        step: t,
                        reason: "next observation does not match the following transition",
                    });
                }
            }
        }
        Ok(EpisodeTrace { transitions })
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum()
    }
}

/// Ring buffer of whole episodes.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    episodes: Vec<EpisodeTrace>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(ReplayBuffer {
            capacity,
            episodes: Vec::new(),
            next: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    /// Inserts an episode, overwriting the oldest once full.
    pub fn push(&mut self, episode: EpisodeTrace) {
        if self.episodes.len() < self.capacity {
            self.episodes.push(episode);
        } else {
            self.episodes[self.next] = episode;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// `count` episodes drawn uniformly with replacement.
    pub fn sample(&self, count: usize, rng: &mut SeededRng) -> Result<Vec<&EpisodeTrace>> {
        if self.episodes.is_empty() {
            return Err(Error::Config(
                "cannot sample from an empty replay buffer".into(),
            ));
        }
        Ok((0..count)
            .map(|_| &self.episodes[rng.below(self.episodes.len())])
            .collect())
    }
}
