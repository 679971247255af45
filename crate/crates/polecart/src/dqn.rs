//! DQN training: epsilon-greedy acting, replay-driven learning with a
//! weighted squared TD loss, and a periodically synced frozen target
//! network.

use rand::Rng;

use crate::env::CartPole;
use crate::error::{Error, Result};
use crate::metrics::EpisodeRecord;
use crate::mlp::{Gradient, Mlp, OptimizerKind};
use crate::replay::{anneal_beta, ReplayBuffer, ReplayStrategy, SampledBatch, Transition};
use crate::schedules::{select_action, Schedule};

/// Learning-loop knobs beyond the networks and buffer themselves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DqnOptions {
    pub gamma: f64,
    /// Hard-copy the target network every this many global steps.
    pub target_sync_every: u64,
    pub batch_size: usize,
    /// Minimum buffer fill before replay-driven learning starts. Ignored by
    /// the no-replay mode, which is purely online.
    pub warmup: usize,
    pub optimizer: OptimizerKind,
    /// Importance-sampling exponent start value.
    pub beta0: f64,
    /// Global step at which the exponent reaches 1.
    pub beta_horizon: u64,
}

impl Default for DqnOptions {
    fn default() -> Self {
        DqnOptions {
            gamma: 0.99,
            target_sync_every: 100,
            batch_size: 64,
            warmup: 500,
            optimizer: OptimizerKind::Adam,
            beta0: 0.4,
            beta_horizon: 300_000,
        }
    }
}

/// A policy network, its frozen snapshot, and the experience store.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub policy: Mlp,
    pub target: Mlp,
    pub buffer: ReplayBuffer,
    pub schedule: Schedule,
    pub options: DqnOptions,
    pub global_step: u64,
}

impl DqnAgent {
    /// The target starts as an exact copy of the policy.
    pub fn new(policy: Mlp, buffer: ReplayBuffer, schedule: Schedule, options: DqnOptions) -> Self {
        let target = policy.clone();
        DqnAgent {
            policy,
            target,
            buffer,
            schedule,
            options,
            global_step: 0,
        }
    }
}

/// Loss value and the per-sample TD magnitudes that feed priority updates.
#[derive(Debug, Clone)]
pub struct LossReport {
    pub per_sample_td_errors: Vec<f64>,
    pub weighted_loss: f64,
}

/// Bootstrap targets `r + gamma * max_a q_target(s', a)`, with the bootstrap
/// masked on terminal transitions.
pub fn compute_targets(target_net: &Mlp, batch: &SampledBatch, gamma: f64) -> Vec<f64> {
    batch
        .transitions
        .iter()
        .map(|t| {
            if t.terminal {
                t.reward
            } else {
                let q_next = target_net.forward(&t.next_state);
                t.reward + gamma * q_next[0].max(q_next[1])
            }
        })
        .collect()
}

/// Gradient of `(1/N) sum_i w_i * (target_i - q(s_i, a_i))^2` with respect to
/// the policy parameters, treating the targets as constants. Also returns the
/// per-sample |td| and the loss value.
pub fn loss_gradient(
    policy: &Mlp,
    batch: &SampledBatch,
    targets: &[f64],
) -> (Gradient, Vec<f64>, f64) {
    let n = batch.len() as f64;
    let mut grad = Gradient::zeros_like(policy);
    let mut td_magnitudes = Vec::with_capacity(batch.len());
    let mut loss = 0.0;
    for ((transition, &target), &weight) in batch
        .transitions
        .iter()
        .zip(targets)
        .zip(&batch.is_weights)
    {
        let q = policy.forward(&transition.state);
        let td = target - q[transition.action.index()];
        td_magnitudes.push(td.abs());
        loss += weight * td * td;

        // d loss / d q(s, a) = -2 w td / N, all other outputs untouched.
        let mut upstream = [0.0; 2];
        upstream[transition.action.index()] = -2.0 * weight * td / n;
        grad.accumulate(&policy.backward(&transition.state, &upstream));
    }
    (grad, td_magnitudes, loss / n)
}

/// One learning step on a sampled batch: computes frozen targets, applies a
/// single optimizer step, and reports |td| per sample.
pub fn learn_step(agent: &mut DqnAgent, batch: &SampledBatch, lr: f64) -> Result<LossReport> {
    if batch.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let targets = compute_targets(&agent.target, batch, agent.options.gamma);
    let (grad, td_magnitudes, weighted_loss) = loss_gradient(&agent.policy, batch, &targets);
    if !weighted_loss.is_finite() {
        return Err(Error::NonFiniteLoss {
            global_step: agent.global_step,
        });
    }
    agent
        .policy
        .apply_gradient(&grad, lr, agent.options.optimizer)?;
    Ok(LossReport {
        per_sample_td_errors: td_magnitudes,
        weighted_loss,
    })
}

/// Hard-copies the policy into the target network.
pub fn sync_target(agent: &mut DqnAgent) {
    agent.target = agent.policy.clone();
}

/// Carries the episodes completed before a mid-run abort, so callers can
/// flush partial output alongside the error.
#[derive(Debug)]
pub struct TrainAbort {
    pub records: Vec<EpisodeRecord>,
    pub error: Error,
}

/// Runs epsilon-greedy episodes with one learning step per environment step
/// once the buffer is ready. Returns one record per episode.
pub fn train_dqn<R: Rng>(
    env: &mut CartPole,
    agent: &mut DqnAgent,
    episodes: u32,
    lr: f64,
    rng: &mut R,
    record_wall_time: bool,
) -> std::result::Result<Vec<EpisodeRecord>, Box<TrainAbort>> {
    let mut records = Vec::with_capacity(episodes as usize);
    let no_replay = agent.buffer.strategy() == ReplayStrategy::NoReplay;
    let ready_at = agent.options.batch_size.max(agent.options.warmup);

    for episode in 0..episodes {
        let started = std::time::Instant::now();
        let mut observation = env.reset(rng).observe();
        let mut ret = 0.0;
        let mut epsilon;

        loop {
            epsilon = agent.schedule.epsilon_at(agent.global_step);
            let q_values = agent.policy.forward(&observation);
            let decision = select_action(&q_values, epsilon, rng);
            let outcome = env
                .step(decision.chosen_action)
                .expect("training loop never steps a finished episode");
            let next_observation = outcome.next_state.observe();

            agent.buffer.push(Transition {
                state: observation,
                action: decision.chosen_action,
                reward: outcome.reward,
                next_state: next_observation,
                terminal: outcome.episode_over(),
            });

            let ready = if no_replay {
                !agent.buffer.is_empty()
            } else {
                agent.buffer.len() >= ready_at
            };
            if ready {
                let batch_size = if no_replay { 1 } else { agent.options.batch_size };
                let beta = anneal_beta(
                    agent.options.beta0,
                    agent.global_step,
                    agent.options.beta_horizon,
                );
                let batch = agent
                    .buffer
                    .sample(batch_size, beta, rng)
                    .expect("buffer is non-empty once ready");
                match learn_step(agent, &batch, lr) {
                    Ok(report) => {
                        if agent.buffer.strategy() == ReplayStrategy::Prioritized {
                            agent
                                .buffer
                                .update_priorities(&batch.indices, &report.per_sample_td_errors)
                                .expect("strategy checked above");
                        }
                    }
                    Err(error) => {
                        return Err(Box::new(TrainAbort { records, error }));
                    }
                }
            }

            agent.global_step += 1;
            if agent.global_step % agent.options.target_sync_every == 0 {
                sync_target(agent);
            }

            ret += outcome.reward;
            observation = next_observation;
            if outcome.episode_over() {
                break;
            }
        }

        records.push(EpisodeRecord {
            episode,
            ret,
            length: env.steps(),
            epsilon_at_end: epsilon,
            wall_ms: if record_wall_time {
                started.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            },
            global_step_at_end: agent.global_step,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Action, EnvConfig};
    use crate::replay::PerParams;
    use crate::rng::rng_for_seed;
    use crate::schedules::ScheduleKind;

    fn small_agent(strategy: ReplayStrategy, options: DqnOptions) -> DqnAgent {
        let policy = Mlp::init(&[4, 8, 8, 2], &mut rng_for_seed(100)).unwrap();
        let buffer = ReplayBuffer::new(strategy, 1000, PerParams::default());
        let schedule = Schedule::new(ScheduleKind::Exponential { beta: 0.999 });
        DqnAgent::new(policy, buffer, schedule, options)
    }

    fn batch_of(transitions: Vec<Transition>, weights: Vec<f64>) -> SampledBatch {
        let indices = (0..transitions.len()).collect();
        SampledBatch {
            transitions,
            indices,
            is_weights: weights,
        }
    }

    fn transition(state: [f64; 4], action: Action, reward: f64, terminal: bool) -> Transition {
        Transition {
            state,
            action,
            reward,
            next_state: [0.1, 0.2, 0.3, 0.4],
            terminal,
        }
    }

    #[test]
    fn terminal_targets_ignore_the_next_state() {
        let net = Mlp::init(&[4, 8, 2], &mut rng_for_seed(1)).unwrap();
        let batch = batch_of(
            vec![transition([0.0; 4], Action::Left, 0.0, true)],
            vec![1.0],
        );
        assert_eq!(compute_targets(&net, &batch, 0.99), vec![0.0]);
    }

    #[test]
    fn zero_valued_target_net_gives_reward_only_targets() {
        let mut net = Mlp::init(&[4, 8, 2], &mut rng_for_seed(2)).unwrap();
        zero_net(&mut net);
        let batch = batch_of(
            vec![transition([0.0; 4], Action::Left, 1.0, false)],
            vec![1.0],
        );
        let targets = compute_targets(&net, &batch, 0.99);
        assert_eq!(targets, vec![1.0]);
    }

    #[test]
    fn hand_network_target() {
        // A network that always outputs [2, 5]: zero weights, biases [2, 5].
        let net = construct_hand_net(&[2.0, 5.0]);
        let batch = batch_of(
            vec![transition([0.0; 4], Action::Left, 1.0, false)],
            vec![1.0],
        );
        let targets = compute_targets(&net, &batch, 0.9);
        assert!((targets[0] - 5.5).abs() < 1e-15);
    }

    fn construct_hand_net(output_biases: &[f64; 2]) -> Mlp {
        let mut net = Mlp::init(&[4, 2, 2], &mut rng_for_seed(3)).unwrap();
        zero_net(&mut net);
        set_output_biases(&mut net, output_biases);
        net
    }

    fn zero_net(net: &mut Mlp) {
        for layer in net.layers_mut() {
            layer.weights.iter_mut().for_each(|w| *w = 0.0);
            layer.biases.iter_mut().for_each(|b| *b = 0.0);
        }
    }

    fn set_output_biases(net: &mut Mlp, biases: &[f64; 2]) {
        let last = net.layers_mut().len() - 1;
        net.layers_mut()[last].biases = biases.to_vec();
    }

    #[test]
    fn fixed_point_batch_leaves_parameters_unchanged() {
        let mut agent = small_agent(ReplayStrategy::Uniform, DqnOptions::default());
        sync_target(&mut agent);
        // Terminal transitions with reward equal to the policy's own output
        // make every td zero.
        let s = [0.3, -0.2, 0.05, 0.1];
        let q = agent.policy.forward(&s);
        let batch = batch_of(
            vec![
                Transition {
                    state: s,
                    action: Action::Left,
                    reward: q[0],
                    next_state: s,
                    terminal: true,
                },
                Transition {
                    state: s,
                    action: Action::Right,
                    reward: q[1],
                    next_state: s,
                    terminal: true,
                },
            ],
            vec![1.0, 1.0],
        );
        let before = agent.policy.clone();
        let report = learn_step(&mut agent, &batch, 1e-2).unwrap();
        assert_eq!(report.weighted_loss, 0.0);
        assert!(report.per_sample_td_errors.iter().all(|&e| e == 0.0));
        assert_eq!(agent.policy.layers(), before.layers());
    }

    #[test]
    fn single_sample_quadratic_loss() {
        // Zero net, terminal reward 2 on the chosen action: td = 2, w = 1,
        // loss = 4.
        let mut agent = small_agent(ReplayStrategy::Uniform, DqnOptions::default());
        zero_net(&mut agent.policy);
        sync_target(&mut agent);
        let batch = batch_of(
            vec![transition([0.5, 0.0, 0.0, 0.0], Action::Right, 2.0, true)],
            vec![1.0],
        );
        let report = learn_step(&mut agent, &batch, 1e-3).unwrap();
        assert!((report.weighted_loss - 4.0).abs() < 1e-12);
        assert!((report.per_sample_td_errors[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn halving_weights_halves_the_gradient() {
        let agent = small_agent(ReplayStrategy::Uniform, DqnOptions::default());
        let transitions: Vec<Transition> = (0..8)
            .map(|i| {
                transition(
                    [0.1 * i as f64, -0.2, 0.05, 0.3],
                    if i % 2 == 0 { Action::Left } else { Action::Right },
                    1.0,
                    i % 3 == 0,
                )
            })
            .collect();
        let full = batch_of(transitions.clone(), vec![1.0; 8]);
        let half = batch_of(transitions, vec![0.5; 8]);
        let targets = compute_targets(&agent.target, &full, 0.99);

        let (g_full, _, _) = loss_gradient(&agent.policy, &full, &targets);
        let (g_half, _, _) = loss_gradient(&agent.policy, &half, &targets);
        for (a, b) in g_full.layers().iter().zip(g_half.layers()) {
            for (x, y) in a.weights.iter().zip(&b.weights) {
                assert!((x * 0.5 - y).abs() < 1e-15);
            }
            for (x, y) in a.biases.iter().zip(&b.biases) {
                assert!((x * 0.5 - y).abs() < 1e-15);
            }
        }

        // Under plain gradient descent the parameter deltas halve exactly.
        let mut sgd = DqnOptions::default();
        sgd.optimizer = OptimizerKind::Sgd;
        let mut agent_full = small_agent(ReplayStrategy::Uniform, sgd);
        let mut agent_half = agent_full.clone();
        let report_full = learn_step(&mut agent_full, &full, 0.01).unwrap();
        let report_half = learn_step(&mut agent_half, &half, 0.01).unwrap();
        assert!(report_full.weighted_loss > 0.0);
        assert!((report_full.weighted_loss * 0.5 - report_half.weighted_loss).abs() < 1e-12);
        let base = small_agent(ReplayStrategy::Uniform, sgd);
        for ((l_full, l_half), l_base) in agent_full
            .policy
            .layers()
            .iter()
            .zip(agent_half.policy.layers())
            .zip(base.policy.layers())
        {
            for ((wf, wh), wb) in l_full
                .weights
                .iter()
                .zip(&l_half.weights)
                .zip(&l_base.weights)
            {
                let delta_full = wf - wb;
                let delta_half = wh - wb;
                assert!((delta_full * 0.5 - delta_half).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn targets_are_detached_from_the_policy_gradient() {
        let agent = small_agent(ReplayStrategy::Uniform, DqnOptions::default());
        let batch = batch_of(
            vec![transition([0.2, 0.1, -0.1, 0.4], Action::Left, 1.0, false)],
            vec![1.0],
        );
        let targets = compute_targets(&agent.target, &batch, 0.99);

        // Perturbing the target network changes the targets...
        let mut perturbed = agent.clone();
        let head = perturbed.target.layers_mut().last_mut().unwrap();
        head.biases[0] += 1.0;
        head.biases[1] += 1.0;
        let perturbed_targets = compute_targets(&perturbed.target, &batch, 0.99);
        assert_ne!(targets, perturbed_targets);

        // ...but with the targets held fixed the policy gradient is
        // bit-identical no matter what the target parameters are.
        let (g_a, _, _) = loss_gradient(&agent.policy, &batch, &targets);
        let (g_b, _, _) = loss_gradient(&perturbed.policy, &batch, &targets);
        for (a, b) in g_a.layers().iter().zip(g_b.layers()) {
            assert_eq!(a.weights, b.weights);
            assert_eq!(a.biases, b.biases);
        }
    }

    #[test]
    fn sync_copies_and_then_freezes_the_target() {
        let mut agent = small_agent(ReplayStrategy::Uniform, DqnOptions::default());
        let mut rng = rng_for_seed(5);
        // Drift the policy, then sync.
        let grad = agent.policy.backward(&[1.0, 0.5, -0.5, 0.2], &[1.0, -1.0]);
        agent
            .policy
            .apply_gradient(&grad, 0.05, OptimizerKind::Adam)
            .unwrap();
        sync_target(&mut agent);
        for _ in 0..100 {
            let s = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            assert_eq!(agent.policy.forward(&s), agent.target.forward(&s));
        }

        // Further policy steps leave the target bit-unchanged.
        let frozen = agent.target.clone();
        for _ in 0..10 {
            let grad = agent.policy.backward(&[0.3, 0.3, 0.3, 0.3], &[1.0, 1.0]);
            agent
                .policy
                .apply_gradient(&grad, 0.05, OptimizerKind::Adam)
                .unwrap();
        }
        assert_eq!(agent.target, frozen);
        assert_ne!(agent.policy.layers(), agent.target.layers());
    }

    #[test]
    fn sync_cadence_is_every_n_global_steps() {
        let mut options = DqnOptions::default();
        options.target_sync_every = 100;
        options.warmup = 10_000_000; // never learn, isolate the cadence
        let mut agent = small_agent(ReplayStrategy::Uniform, options);
        let mut env = CartPole::new(EnvConfig::default());
        let mut rng = rng_for_seed(6);
        train_dqn(&mut env, &mut agent, 30, 1e-3, &mut rng, false).unwrap();
        assert!(agent.global_step > 200, "need a few sync points");
        // The target equals the policy exactly at multiples of 100 and the
        // policy never learns here, so they are always equal.
        assert_eq!(agent.policy.layers(), agent.target.layers());
    }

    #[test]
    fn no_learning_before_warmup() {
        let mut options = DqnOptions::default();
        options.warmup = 100_000;
        let mut agent = small_agent(ReplayStrategy::Uniform, options);
        let before = agent.policy.clone();
        let mut env = CartPole::new(EnvConfig::default());
        train_dqn(&mut env, &mut agent, 20, 1e-3, &mut rng_for_seed(7), false).unwrap();
        assert!(agent.buffer.len() < 100_000);
        assert_eq!(agent.policy, before, "no optimizer step before warmup");
        assert_eq!(agent.policy.step_count(), 0);
    }

    #[test]
    fn no_replay_runs_are_deterministic() {
        let run = || {
            let mut options = DqnOptions::default();
            options.warmup = 0;
            let policy = Mlp::init(&[4, 8, 8, 2], &mut rng_for_seed(8)).unwrap();
            let buffer = ReplayBuffer::new(ReplayStrategy::NoReplay, 1, PerParams::default());
            let schedule = Schedule::new(ScheduleKind::Exponential { beta: 0.999 });
            let mut agent = DqnAgent::new(policy, buffer, schedule, options);
            let mut env = CartPole::new(EnvConfig::default());
            train_dqn(&mut env, &mut agent, 2, 1e-3, &mut rng_for_seed(9), false).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
    }

    #[test]
    fn always_exploring_matches_the_random_baseline() {
        // beta = 1 keeps epsilon at exactly 1 forever, so the policy is the
        // uniform random policy regardless of what the network learns.
        let mut options = DqnOptions::default();
        options.warmup = 1_000_000;
        let policy = Mlp::init(&[4, 8, 8, 2], &mut rng_for_seed(10)).unwrap();
        let buffer = ReplayBuffer::new(ReplayStrategy::Uniform, 1000, PerParams::default());
        let schedule = Schedule::new(ScheduleKind::Exponential { beta: 1.0 });
        let mut agent = DqnAgent::new(policy, buffer, schedule, options);
        let mut env = CartPole::new(EnvConfig::default());
        let records =
            train_dqn(&mut env, &mut agent, 300, 1e-3, &mut rng_for_seed(11), false).unwrap();
        let mean_len: f64 =
            records.iter().map(|r| r.length as f64).sum::<f64>() / records.len() as f64;
        assert!(
            (10.0..=60.0).contains(&mean_len),
            "mean episode length {mean_len}"
        );
    }

    #[test]
    fn per_priorities_track_the_last_learning_step() {
        let mut options = DqnOptions::default();
        options.warmup = 8;
        options.batch_size = 8;
        let policy = Mlp::init(&[4, 8, 8, 2], &mut rng_for_seed(12)).unwrap();
        let buffer = ReplayBuffer::new(ReplayStrategy::Prioritized, 256, PerParams::default());
        let schedule = Schedule::new(ScheduleKind::Exponential { beta: 0.999 });
        let mut agent = DqnAgent::new(policy, buffer, schedule, options);
        let mut rng = rng_for_seed(13);

        // Fill past warmup.
        let mut env = CartPole::new(EnvConfig::default());
        env.reset(&mut rng);
        for _ in 0..16 {
            let s = env.state().observe();
            let out = env.step(Action::Right).unwrap();
            agent.buffer.push(Transition {
                state: s,
                action: Action::Right,
                reward: out.reward,
                next_state: out.next_state.observe(),
                terminal: out.episode_over(),
            });
            if out.episode_over() {
                env.reset(&mut rng);
            }
        }

        let batch = agent.buffer.sample(8, 0.4, &mut rng).unwrap();
        let report = learn_step(&mut agent, &batch, 1e-3).unwrap();
        agent
            .buffer
            .update_priorities(&batch.indices, &report.per_sample_td_errors)
            .unwrap();
        let per = PerParams::default();
        for (&slot, &td) in batch.indices.iter().zip(&report.per_sample_td_errors) {
            let expected = (td + per.epsilon).powf(per.exponent);
            let got = agent.buffer.raw_priority(slot).unwrap();
            assert!((got - expected).abs() < 1e-15, "slot {slot}");
        }
    }

    #[test]
    fn episode_returns_stay_within_the_reward_budget() {
        let mut options = DqnOptions::default();
        options.warmup = 64;
        let policy = Mlp::init(&[4, 8, 8, 2], &mut rng_for_seed(14)).unwrap();
        let buffer = ReplayBuffer::new(ReplayStrategy::Uniform, 2000, PerParams::default());
        let schedule = Schedule::new(ScheduleKind::Inverse { rate: 0.01 });
        let mut agent = DqnAgent::new(policy, buffer, schedule, options);
        let mut env = CartPole::new(EnvConfig::default());
        let records =
            train_dqn(&mut env, &mut agent, 100, 1e-3, &mut rng_for_seed(15), false).unwrap();
        for r in &records {
            assert!((0.0..=500.0).contains(&r.ret));
            assert!(r.length <= 500);
        }
    }
}
