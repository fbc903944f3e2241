use alloc::vec;
use alloc::vec::Vec;

use super::retrace::retrace_rows;
use super::{collect_episode, epsilon_at, evaluate, ReplayBuffer};
use crate::env::{CwcfEnv, RewardSpec};
use crate::nn::{huber_loss, Layer, Network, Optimizer, OptimizerKind};
use crate::{Error, LatentFeatures, Result, SeededRng, Tensor};

/// Hyperparameters of the learner.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Episodes over which ε decays linearly; `None` means half of training.
    pub epsilon_decay: Option<usize>,
    pub learning_rate: f64,
    pub batch_episodes: usize,
    /// Train steps between target-network copies.
    pub target_sync_period: usize,
    pub replay_capacity: usize,
    pub train_episodes: usize,
    pub hidden: Vec<usize>,
    pub huber_delta: f64,
    /// Number of evenly spaced evaluation points during training.
    pub eval_windows: usize,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            gamma: 0.99,
            lambda: 1.0,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay: None,
            learning_rate: 5e-4,
            batch_episodes: 32,
            target_sync_period: 1000,
            replay_capacity: 10_000,
            train_episodes: 20_000,
            hidden: vec![256, 256],
            huber_delta: 1.0,
            eval_windows: 20,
            seed: 0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.gamma) || !unit(self.lambda) {
            return Err(Error::Config("gamma and lambda must lie in [0, 1]".into()));
        }
        if !unit(self.epsilon_start) || !unit(self.epsilon_end) {
            return Err(Error::Config("epsilon bounds must lie in [0, 1]".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.batch_episodes == 0 || self.target_sync_period == 0 || self.replay_capacity == 0 {
            return Err(Error::Config(
                "batch_episodes, target_sync_period and replay_capacity must be positive".into(),
            ));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        if self.huber_delta.is_nan() || self.huber_delta <= 0.0 {
            return Err(Error::Config("huber delta must be positive".into()));
        }
        Ok(())
    }

    pub fn epsilon_decay_episodes(&self) -> usize {
        self.epsilon_decay.unwrap_or(self.train_episodes / 2)
    }

    pub fn epsilon(&self, episode: usize) -> f64 {
        epsilon_at(
            episode,
            self.epsilon_start,
            self.epsilon_end,
            self.epsilon_decay_episodes(),
        )
    }
}

/// `Dense → ReLU` per hidden size, then a linear head over all actions.
pub fn build_qnet(
    obs_len: usize,
    num_actions: usize,
    hidden: &[usize],
    rng: &mut SeededRng,
) -> Result<Network> {
    let mut layers = Vec::new();
    let mut width = obs_len;
    for &h in hidden {
        layers.push(Layer::dense(width, h, rng));
        layers.push(Layer::relu());
        width = h;
    }
    layers.push(Layer::dense(width, num_actions, rng));
    Network::new(layers)
}

/// Copies the online parameters into the target network.
pub fn sync_target(online: &Network, target: &mut Network) -> Result<()> {
    target.copy_params_from(online)
}

/// One gradient step on Huber loss between `Q_online(s_t, a_t)` and Retrace
/// targets over `cfg.batch_episodes` uniformly sampled episodes. Targets are
/// constants: no gradient flows through them.
pub fn train_step(
    buffer: &ReplayBuffer,
    online: &mut Network,
    target: &Network,
    optimizer: &mut Optimizer,
    cfg: &AgentConfig,
    rng: &mut SeededRng,
) -> Result<f64> {
    if buffer.len() < cfg.batch_episodes {
        return Err(Error::Config(
            "replay buffer holds fewer episodes than one batch".into(),
        ));
    }
    let batch = buffer.sample(cfg.batch_episodes, rng)?;

    let obs_len = online.input_len();
    let mut obs = Vec::new();
    let mut offsets = Vec::with_capacity(batch.len());
    let mut rows = 0;
    for ep in &batch {
        offsets.push(rows);
        for t in ep.transitions() {
            obs.extend_from_slice(&t.obs);
        }
        obs.extend_from_slice(&ep.transitions()[ep.len() - 1].next_obs);
        rows += ep.len() + 1;
    }
    let obs = Tensor::new(vec![rows, obs_len], obs)?;
    let q_online = online.forward(&obs)?;
    let q_target = target.predict(&obs)?;
    let actions = online.output_len();

    let mut pred = Vec::new();
    let mut goal = Vec::new();
    let mut slots = Vec::new();
    for (ep, &start) in batch.iter().zip(&offsets) {
        let span = start * actions..(start + ep.len() + 1) * actions;
        let targets = retrace_rows(
            ep,
            &q_online.data()[span.clone()],
            &q_target.data()[span],
            actions,
            cfg.gamma,
            cfg.lambda,
        )?;
        for (t, (tr, y)) in ep.transitions().iter().zip(targets).enumerate() {
            let slot = (start + t) * actions + tr.action;
            pred.push(q_online.data()[slot]);
            goal.push(y);
            slots.push(slot);
        }
    }
    let (loss, grad) = huber_loss(
        &Tensor::row_vector(pred),
        &Tensor::row_vector(goal),
        cfg.huber_delta,
    )?;
    if !loss.is_finite() {
        return Err(Error::Divergence {
            stage: "train step",
            index: optimizer.steps() as usize + 1,
        });
    }
    let mut upstream = Tensor::zeros(&[rows, actions]);
    for (&slot, &g) in slots.iter().zip(grad.data()) {
        upstream.data_mut()[slot] = g;
    }
    online.backward(&upstream)?;
    optimizer.step(online)?;
    Ok(loss)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub episode: usize,
    pub epsilon: f64,
    /// Mean train loss over the window; NaN before learning starts.
    pub loss: f64,
    pub eval_accuracy: f64,
    pub eval_avg_reward: f64,
    pub eval_avg_features: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    pub rows: Vec<MetricsRow>,
}

/// Trains a Q-network on `train` and evaluates it greedily on `eval` at
/// `cfg.eval_windows` evenly spaced points.
///
/// Samples are visited cyclically in a freshly shuffled order each pass. One
/// train step follows every episode once the buffer holds a full batch.
pub fn train(
    train: &LatentFeatures,
    eval: &LatentFeatures,
    rewards: RewardSpec,
    cfg: &AgentConfig,
) -> Result<(Network, MetricsLog)> {
    cfg.validate()?;
    let env = CwcfEnv::new(train, rewards)?;
    if env.num_samples() == 0 {
        return Err(Error::Config("no training samples".into()));
    }
    if eval.dim() != train.dim() || eval.num_classes() != train.num_classes() {
        return Err(Error::Config(
            "train and eval features disagree in shape".into(),
        ));
    }
    let mut init_rng = SeededRng::new(cfg.seed);
    let mut act_rng = SeededRng::new(cfg.seed.wrapping_add(1));
    let mut replay_rng = SeededRng::new(cfg.seed.wrapping_add(2));
    let mut order_rng = SeededRng::new(cfg.seed.wrapping_add(3));

    let mut online = build_qnet(
        env.observation_len(),
        env.num_actions(),
        &cfg.hidden,
        &mut init_rng,
    )?;
    let mut target = online.clone();
    let mut optimizer = Optimizer::new(OptimizerKind::adam(cfg.learning_rate));
    let mut buffer = ReplayBuffer::new(cfg.replay_capacity)?;
    let mut log = MetricsLog::default();
    if cfg.train_episodes == 0 {
        return Ok((online, log));
    }

    let window = cfg.train_episodes.div_ceil(cfg.eval_windows.max(1));
    let mut order = order_rng.permutation(env.num_samples());
    let mut cursor = 0;
    let mut steps = 0usize;
    let mut window_loss = 0.0;
    let mut window_steps = 0usize;

    for episode in 0..cfg.train_episodes {
        if cursor == order.len() {
            order_rng.shuffle(&mut order);
            cursor = 0;
        }
        let sample = order[cursor];
        cursor += 1;

        let epsilon = cfg.epsilon(episode);
        buffer.push(collect_episode(
            &env,
            sample,
            &online,
            epsilon,
            &mut act_rng,
        )?);

        if buffer.len() >= cfg.batch_episodes {
            window_loss += train_step(
                &buffer,
                &mut online,
                &target,
                &mut optimizer,
                cfg,
                &mut replay_rng,
            )?;
            window_steps += 1;
            steps += 1;
            if steps.is_multiple_of(cfg.target_sync_period) {
                sync_target(&online, &mut target)?;
            }
        }

        let done = episode + 1;
        if done % window == 0 || done == cfg.train_episodes {
            let m = evaluate(&online, eval, rewards)?;
            log.rows.push(MetricsRow {
                episode: done,
                epsilon,
                loss: if window_steps > 0 {
                    window_loss / window_steps as f64
                } else {
                    f64::NAN
                },
                eval_accuracy: m.accuracy,
                eval_avg_reward: m.avg_reward,
                eval_avg_features: m.avg_features_used,
            });
            window_loss = 0.0;
            window_steps = 0;
        }
    }
    Ok((online, log))
}
