//! Double DQN with Retrace(λ) targets over whole-episode replay.
//!
//! Acting is ε-greedy over valid actions and every transition records the
//! exact behaviour probability μ(a|s) of the action taken. Learning samples
//! complete episodes and regresses the online network toward Retrace targets
//! in which the greedy evaluation policy is taken from the online network and
//! bootstrap values from the target network.

mod eval;
mod policy;
mod replay;
mod retrace;
mod train;

pub use eval::{
    evaluate, evaluate_detailed, evaluate_policy, EpisodeOutcome, GreedyPolicy, Metrics, Policy,
};
pub use policy::{act, collect_episode, epsilon_at};
pub use replay::{EpisodeTrace, ReplayBuffer, Transition};
pub use retrace::{episode_observations, retrace_from_q, retrace_targets, QFunction};
pub use train::{build_qnet, sync_target, train, train_step, AgentConfig, MetricsLog, MetricsRow};
