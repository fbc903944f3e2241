use aeddqn_core::agent::{
    act, build_qnet, collect_episode, evaluate, evaluate_detailed, evaluate_policy, retrace_from_q,
    retrace_targets, sync_target, train, train_step, AgentConfig, EpisodeTrace, GreedyPolicy,
    Policy, QFunction, ReplayBuffer, Transition,
};
use aeddqn_core::env::{CwcfEnv, EnvState, RewardSpec};
use aeddqn_core::nn::{Dense, Layer, Network, Optimizer, OptimizerKind};
use aeddqn_core::{Error, LatentFeatures, Result, SeededRng, Tensor};

/// Returns the same action values for every observation.
struct FixedQ(Vec<f64>);

impl QFunction for FixedQ {
    fn q_values(&self, obs: &Tensor) -> Result<Tensor> {
        let rows = vec![self.0.clone(); obs.rows()];
        Tensor::from_rows(&rows)
    }
}

fn pool(n: usize, m: usize, k: usize, seed: u64) -> LatentFeatures {
    let mut rng = SeededRng::new(seed);
    let data = (0..n * m).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
    let labels = (0..n).map(|i| i % k).collect();
    LatentFeatures::new(
        Tensor::new(vec![n, m], data).unwrap(),
        labels,
        k,
        "synthetic",
    )
    .unwrap()
}

fn greedy(q: &[f64], valid: &[bool]) -> usize {
    let mut best = None;
    for (i, (&v, &ok)) in q.iter().zip(valid).enumerate() {
        if ok && best.is_none_or(|b: usize| v > q[b]) {
            best = Some(i);
        }
    }
    best.unwrap()
}

/// A random episode over `actions` actions plus its two `[T + 1, A]` value tables.
fn random_episode(rng: &mut SeededRng, actions: usize) -> (EpisodeTrace, Tensor, Tensor) {
    let len = 1 + rng.below(8);
    let masks: Vec<Vec<bool>> = (0..=len)
        .map(|_| {
            let mut m: Vec<bool> = (0..actions).map(|_| rng.uniform() < 0.7).collect();
            let forced = rng.below(actions);
            m[forced] = true;
            m
        })
        .collect();
    let transitions = (0..len)
        .map(|t| {
            let valid: Vec<usize> = (0..actions).filter(|&a| masks[t][a]).collect();
            Transition {
                obs: vec![t as f64],
                action: valid[rng.below(valid.len())],
                reward: rng.uniform_range(-1.0, 1.0),
                next_obs: vec![(t + 1) as f64],
                done: t + 1 == len,
                behavior_prob: 1.0 - rng.uniform(),
                valid_mask: masks[t].clone(),
                next_valid_mask: masks[t + 1].clone(),
            }
        })
        .collect();
    let table = |rng: &mut SeededRng| {
        Tensor::new(
            vec![len + 1, actions],
            (0..(len + 1) * actions)
                .map(|_| rng.uniform_range(-2.0, 2.0))
                .collect(),
        )
        .unwrap()
    };
    let q_on = table(rng);
    let q_tgt = table(rng);
    (EpisodeTrace::new(transitions).unwrap(), q_on, q_tgt)
}

/// Direct double sum: `Q(s_t,a_t) + Σ_u γ^{u−t} (Π_{s=t+1..u} c_s) δ_u`.
fn retrace_oracle(
    ep: &EpisodeTrace,
    q_on: &Tensor,
    q_tgt: &Tensor,
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let tr = ep.transitions();
    let delta = |u: usize| {
        let x = &tr[u];
        let boot = if x.done {
            0.0
        } else {
            q_tgt.row(u + 1)[greedy(q_on.row(u + 1), &x.next_valid_mask)]
        };
        x.reward + gamma * boot - q_tgt.row(u)[x.action]
    };
    let c = |s: usize| {
        let x = &tr[s];
        let pi = if greedy(q_on.row(s), &x.valid_mask) == x.action {
            1.0
        } else {
            0.0
        };
        lambda * f64::min(1.0, pi / x.behavior_prob)
    };
    (0..tr.len())
        .map(|t| {
            let mut sum = 0.0;
            for u in t..tr.len() {
                let trace: f64 = (t + 1..=u).map(c).product();
                sum += gamma.powi((u - t) as i32) * trace * delta(u);
            }
            q_tgt.row(t)[tr[t].action] + sum
        })
        .collect()
}

#[test]
fn behaviour_probabilities() {
    let q = FixedQ(vec![0.0, 3.0, 1.0, 2.0, -1.0]);
    let mut rng = SeededRng::new(0);
    let valid = vec![true; 5];
    for _ in 0..20 {
        assert_eq!(act(&[0.0], &valid, &q, 0.0, &mut rng).unwrap(), (1, 1.0));
        let (_, mu) = act(&[0.0], &valid, &q, 1.0, &mut rng).unwrap();
        assert!((mu - 0.2).abs() < 1e-15);
    }
    let four = vec![true, true, false, true, true];
    let mut seen_greedy = false;
    let mut seen_other = false;
    for _ in 0..200 {
        let (a, mu) = act(&[0.0], &four, &q, 0.1, &mut rng).unwrap();
        assert!(four[a]);
        if a == 1 {
            assert!((mu - 0.925).abs() < 1e-15);
            seen_greedy = true;
        } else {
            assert!((mu - 0.025).abs() < 1e-15);
            seen_other = true;
        }
    }
    assert!(seen_greedy && seen_other);
    assert!(matches!(
        act(&[0.0], &[false; 5], &q, 0.5, &mut rng),
        Err(Error::EmptyMask)
    ));
}

#[test]
fn retrace_matches_double_sum() {
    let mut rng = SeededRng::new(11);
    for i in 0..300 {
        let (ep, q_on, q_tgt) = random_episode(&mut rng, 2 + i % 5);
        let gamma = rng.uniform();
        let lambda = rng.uniform();
        let fast = retrace_from_q(&ep, &q_on, &q_tgt, gamma, lambda).unwrap();
        let slow = retrace_oracle(&ep, &q_on, &q_tgt, gamma, lambda);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }
}

#[test]
fn lambda_zero_is_one_step_double_dqn() {
    let mut rng = SeededRng::new(12);
    for _ in 0..200 {
        let (ep, q_on, q_tgt) = random_episode(&mut rng, 4);
        let targets = retrace_from_q(&ep, &q_on, &q_tgt, 0.95, 0.0).unwrap();
        for (t, (x, y)) in ep.transitions().iter().zip(&targets).enumerate() {
            let expected = if x.done {
                x.reward
            } else {
                x.reward + 0.95 * q_tgt.row(t + 1)[greedy(q_on.row(t + 1), &x.next_valid_mask)]
            };
            assert_eq!(*y, expected);
        }
        // With one table for both roles the target is the plain DQN max.
        let synced = retrace_from_q(&ep, &q_tgt, &q_tgt, 0.95, 0.0).unwrap();
        for (t, (x, y)) in ep.transitions().iter().zip(&synced).enumerate() {
            let max = if x.done {
                0.0
            } else {
                q_tgt
                    .row(t + 1)
                    .iter()
                    .zip(&x.next_valid_mask)
                    .filter(|(_, &v)| v)
                    .map(|(q, _)| *q)
                    .fold(f64::MIN, f64::max)
            };
            assert_eq!(*y, x.reward + 0.95 * max);
        }
    }
}

fn chain(actions: &[usize], rewards: &[f64], mus: &[f64], width: usize) -> EpisodeTrace {
    let n = actions.len();
    EpisodeTrace::new(
        (0..n)
            .map(|t| Transition {
                obs: vec![t as f64],
                action: actions[t],
                reward: rewards[t],
                next_obs: vec![(t + 1) as f64],
                done: t + 1 == n,
                behavior_prob: mus[t],
                valid_mask: vec![true; width],
                next_valid_mask: vec![true; width],
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn three_step_hand_example() {
    let ep = chain(&[0, 1, 0], &[0.0, 0.0, 1.0], &[0.8, 0.5, 0.5], 2);
    let q = Tensor::from_rows(&[
        vec![1.0, 0.0],
        vec![0.5, 2.0],
        vec![0.0, 0.0],
        vec![9.0, 9.0],
    ])
    .unwrap();
    let targets = retrace_from_q(&ep, &q, &q, 0.9, 0.8).unwrap();
    let expected = [0.8784, 0.72, 1.0];
    for (a, b) in targets.iter().zip(expected) {
        assert!((a - b).abs() < 1e-12, "{targets:?}");
    }
}

#[test]
fn terminal_target_is_reward() {
    let ep = chain(&[1], &[-1.0], &[0.3], 3);
    let q = FixedQ(vec![5.0, 7.0, -2.0]);
    assert_eq!(retrace_targets(&ep, &q, &q, 0.99, 1.0).unwrap(), vec![-1.0]);
}

#[test]
fn malformed_traces_rejected() {
    let ok = chain(&[0, 1], &[0.0, 1.0], &[0.5, 0.5], 2);
    let mut tr = ok.transitions().to_vec();
    tr[1].behavior_prob = 0.0;
    assert!(matches!(
        EpisodeTrace::new(tr),
        Err(Error::CorruptedTransition { step: 1, .. })
    ));
    let mut tr = ok.transitions().to_vec();
    tr[0].done = true;
    assert!(EpisodeTrace::new(tr).is_err());
    let mut tr = ok.transitions().to_vec();
    tr[0].next_obs = vec![7.0];
    assert!(EpisodeTrace::new(tr).is_err());
    assert!(EpisodeTrace::new(Vec::new()).is_err());
    let q = Tensor::zeros(&[2, 2]);
    assert!(matches!(
        retrace_from_q(&ok, &q, &q, 0.9, 1.0),
        Err(Error::Shape { .. })
    ));
}

fn constant_net(values: &[f64]) -> Network {
    let w = Tensor::zeros(&[1, values.len()]);
    let b = Tensor::new(vec![values.len()], values.to_vec()).unwrap();
    Network::new(vec![Layer::Dense(Dense::from_params(w, b).unwrap())]).unwrap()
}

#[test]
fn fixed_point_leaves_parameters() {
    let mut buffer = ReplayBuffer::new(4).unwrap();
    buffer.push(chain(&[1], &[0.25], &[1.0], 2));
    let mut online = constant_net(&[3.0, 0.25]);
    let target = online.clone();
    let before = online.flat_params();
    let cfg = AgentConfig {
        batch_episodes: 1,
        ..AgentConfig::default()
    };
    let mut opt = Optimizer::new(OptimizerKind::Sgd { lr: 0.1 });
    let loss = train_step(
        &buffer,
        &mut online,
        &target,
        &mut opt,
        &cfg,
        &mut SeededRng::new(0),
    )
    .unwrap();
    assert_eq!(loss, 0.0);
    assert_eq!(online.flat_params(), before);
}

#[test]
fn overfits_two_episodes() {
    let mut buffer = ReplayBuffer::new(2).unwrap();
    let one = |x: f64, a: usize, r: f64| {
        EpisodeTrace::new(vec![Transition {
            obs: vec![x, 1.0],
            action: a,
            reward: r,
            next_obs: vec![0.0, 0.0],
            done: true,
            behavior_prob: 0.5,
            valid_mask: vec![true; 2],
            next_valid_mask: vec![true; 2],
        }])
        .unwrap()
    };
    buffer.push(one(1.0, 0, 1.0));
    buffer.push(one(-1.0, 1, -1.0));
    let mut rng = SeededRng::new(3);
    let mut online = build_qnet(2, 2, &[16], &mut rng).unwrap();
    let target = online.clone();
    let cfg = AgentConfig {
        batch_episodes: 2,
        ..AgentConfig::default()
    };
    let mut opt = Optimizer::new(OptimizerKind::adam(1e-2));
    for _ in 0..1500 {
        train_step(&buffer, &mut online, &target, &mut opt, &cfg, &mut rng).unwrap();
    }
    let q = online
        .predict(&Tensor::from_rows(&[vec![1.0, 1.0], vec![-1.0, 1.0]]).unwrap())
        .unwrap();
    let err = (q.row(0)[0] - 1.0).powi(2) + (q.row(1)[1] + 1.0).powi(2);
    assert!(err < 1e-3, "squared error {err}");
}

#[test]
fn train_step_needs_full_batch() {
    let mut buffer = ReplayBuffer::new(4).unwrap();
    buffer.push(chain(&[0], &[1.0], &[1.0], 2));
    let mut online = constant_net(&[0.0, 0.0]);
    let target = online.clone();
    let cfg = AgentConfig {
        batch_episodes: 2,
        ..AgentConfig::default()
    };
    let mut opt = Optimizer::new(OptimizerKind::adam(1e-3));
    assert!(train_step(
        &buffer,
        &mut online,
        &target,
        &mut opt,
        &cfg,
        &mut SeededRng::new(0)
    )
    .is_err());
}

#[test]
fn sync_is_a_deep_copy() {
    let mut rng = SeededRng::new(5);
    let mut online = build_qnet(4, 3, &[8], &mut rng).unwrap();
    let mut target = build_qnet(4, 3, &[8], &mut rng).unwrap();
    assert_ne!(online.flat_params(), target.flat_params());
    sync_target(&online, &mut target).unwrap();
    assert_eq!(online.flat_params(), target.flat_params());
    for p in online.params_mut() {
        p.value.data_mut()[0] += 1.0;
    }
    assert_ne!(online.flat_params(), target.flat_params());
    let other = build_qnet(4, 3, &[9], &mut rng).unwrap();
    assert!(sync_target(&other, &mut target).is_err());
}

#[test]
fn replay_ring_and_sampling() {
    assert!(ReplayBuffer::new(0).is_err());
    let mut buffer = ReplayBuffer::new(2).unwrap();
    assert!(buffer.sample(1, &mut SeededRng::new(0)).is_err());
    for r in [1.0, 2.0, 3.0] {
        buffer.push(chain(&[0], &[r], &[1.0], 1));
    }
    assert_eq!(buffer.len(), 2);
    let drawn = buffer.sample(50, &mut SeededRng::new(1)).unwrap();
    assert_eq!(drawn.len(), 50);
    assert!(drawn.iter().all(|e| e.total_reward() != 1.0));
}

#[test]
fn collected_probabilities_match_policy() {
    let f = pool(5, 6, 3, 7);
    let env = CwcfEnv::new(&f, RewardSpec::default()).unwrap();
    let mut rng = SeededRng::new(8);
    let qnet = build_qnet(env.observation_len(), env.num_actions(), &[8], &mut rng).unwrap();
    for i in 0..20 {
        let eps = 0.3;
        let ep = collect_episode(&env, i % 5, &qnet, eps, &mut rng).unwrap();
        assert!(ep.len() <= 7);
        for x in ep.transitions() {
            let q = qnet.predict(&Tensor::row_vector(x.obs.clone())).unwrap();
            let n_valid = x.valid_mask.iter().filter(|&&v| v).count() as f64;
            let mut mu = eps / n_valid;
            if greedy(q.row(0), &x.valid_mask) == x.action {
                mu += 1.0 - eps;
            }
            assert_eq!(x.behavior_prob, mu);
        }
    }
}

fn small_config() -> AgentConfig {
    AgentConfig {
        train_episodes: 120,
        batch_episodes: 8,
        target_sync_period: 20,
        hidden: vec![16],
        eval_windows: 4,
        seed: 42,
        ..AgentConfig::default()
    }
}

#[test]
fn zero_episodes_returns_untrained_net() {
    let f = pool(10, 4, 2, 1);
    let cfg = AgentConfig {
        train_episodes: 0,
        ..small_config()
    };
    let (net, log) = train(&f, &f, RewardSpec::default(), &cfg).unwrap();
    assert!(log.rows.is_empty());
    let fresh = build_qnet(8, 6, &[16], &mut SeededRng::new(42)).unwrap();
    assert_eq!(net.flat_params(), fresh.flat_params());
}

#[test]
fn training_is_deterministic() {
    let f = pool(30, 5, 3, 2);
    let cfg = small_config();
    let (a, log_a) = train(&f, &f, RewardSpec::default(), &cfg).unwrap();
    let (b, log_b) = train(&f, &f, RewardSpec::default(), &cfg).unwrap();
    assert_eq!(log_a, log_b);
    assert_eq!(a.flat_params(), b.flat_params());
    assert_eq!(log_a.rows.len(), 4);
    assert_eq!(log_a.rows.last().unwrap().episode, 120);
    assert!(log_a.rows.iter().skip(1).all(|r| r.loss.is_finite()));
    let (c, _) = train(
        &f,
        &f,
        RewardSpec::default(),
        &AgentConfig { seed: 43, ..cfg },
    )
    .unwrap();
    assert_ne!(a.flat_params(), c.flat_params());
}

struct Oracle<'a>(&'a LatentFeatures);

impl Policy for Oracle<'_> {
    fn select(&mut self, state: &EnvState, _: &[bool]) -> Result<usize> {
        Ok(state.mask().len() + self.0.label(state.sample_index()))
    }
}

struct GuessClass(SeededRng, usize);

impl Policy for GuessClass {
    fn select(&mut self, state: &EnvState, _: &[bool]) -> Result<usize> {
        Ok(state.mask().len() + self.0.below(self.1))
    }
}

#[test]
fn oracle_and_random_policies() {
    let f = pool(2000, 4, 10, 9);
    let env = CwcfEnv::new(&f, RewardSpec::default()).unwrap();
    let m = evaluate_policy(&env, &mut Oracle(&f)).unwrap();
    assert_eq!(
        (m.accuracy, m.avg_features_used, m.avg_reward),
        (1.0, 0.0, 1.0)
    );
    let m = evaluate_policy(&env, &mut GuessClass(SeededRng::new(1), 10)).unwrap();
    assert!((m.accuracy - 0.1).abs() <= 0.03, "{}", m.accuracy);
}

#[test]
fn lockstep_evaluation_matches_sequential() {
    let f = pool(40, 6, 3, 10);
    let rewards = RewardSpec::default();
    let env = CwcfEnv::new(&f, rewards).unwrap();
    for seed in 0..4 {
        let qnet = build_qnet(12, 9, &[16], &mut SeededRng::new(seed)).unwrap();
        let batched = evaluate(&qnet, &f, rewards).unwrap();
        let sequential = evaluate_policy(&env, &mut GreedyPolicy(&qnet)).unwrap();
        assert_eq!(batched, sequential);
        let acc = batched.accuracy;
        let identity = -rewards.feature_cost * batched.avg_features_used + acc - (1.0 - acc);
        assert!((batched.avg_reward - identity).abs() < 1e-9);
        for o in evaluate_detailed(&qnet, &f, rewards).unwrap() {
            assert_eq!(o.correct, o.predicted == f.label(o.sample_index));
        }
    }
}
