//! DQN training: target computation for the one-step, n-step, and
//! reward-backpropagation variants, the per-slot minibatch update, and
//! the interleaved execute-then-train loop.
//!
//! The medium-access process never terminates, so this is a continuing
//! task: no episodes, no resets, one environment step and at most one
//! gradient update per basic slot.

use crate::agent::{select_action, AgentAction, AgentHistory, EpsilonSchedule};
use crate::env::Channel;
use crate::metrics::ThroughputSeries;
use crate::nn::{Architecture, NetConfig, QNetwork, RmsProp, StateBatch};
use crate::replay::{AbbreviatedExperience, ExperienceBuffer};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Which DQN update rule the trainer runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DqnVariant {
    OneStep,
    NStep(usize),
    /// One-step targets over rewards rewritten in the buffer.
    RewardBackprop,
}

impl DqnVariant {
    /// Return horizon n; 1 except for the n-step variant.
    pub fn n(&self) -> usize {
        match *self {
            DqnVariant::NStep(n) => n,
            _ => 1,
        }
    }

    pub fn rewrites_rewards(&self) -> bool {
        matches!(self, DqnVariant::RewardBackprop)
    }
}

#[derive(Debug, Clone)]
pub struct TrainerConfig {
    pub variant: DqnVariant,
    pub arch: Architecture,
    pub history_len: usize,
    pub hidden_width: usize,
    pub gamma: f64,
    pub buffer_capacity: usize,
    pub minibatch: usize,
    pub sync_period: u64,
    pub learning_rate: f64,
    pub rho: f64,
    pub rms_eps: f64,
    pub eps_initial: f64,
    pub eps_decay: f64,
    pub eps_floor: f64,
}

impl Default for TrainerConfig {
    fn default() -> TrainerConfig {
        TrainerConfig {
            variant: DqnVariant::RewardBackprop,
            arch: Architecture::Rnn,
            history_len: 40,
            hidden_width: 64,
            gamma: 0.9,
            buffer_capacity: 500,
            minibatch: 32,
            sync_period: 200,
            learning_rate: 1e-3,
            rho: 0.9,
            rms_eps: 1e-6,
            eps_initial: 0.1,
            eps_decay: 0.995,
            eps_floor: 0.005,
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss at training step {step}: training diverged")]
    NonFiniteLoss { step: u64 },
}

/// One-step target `r + gamma * max_a' Q(s', a'; theta-)`.
pub fn compute_target_one_step(reward: f64, max_next_q: f64, gamma: f64) -> f64 {
    reward + gamma * max_next_q
}

/// n-step target `sum_k gamma^k r_{k+1} + gamma^n * max_a' Q(s_{i+n}, a')`.
/// With one reward this is exactly the one-step target.
pub fn compute_target_n_step(rewards: &[f64], max_next_q: f64, gamma: f64) -> f64 {
    let mut target = 0.0;
    let mut factor = 1.0;
    for &r in rewards {
        target += factor * r;
        factor *= gamma;
    }
    target + factor * max_next_q
}

/// Q-network, optimizer, and replay buffer for one run.
pub struct Trainer {
    cfg: TrainerConfig,
    net: QNetwork,
    opt: RmsProp,
    buffer: ExperienceBuffer,
    train_steps: u64,
}

impl Trainer {
    pub fn new(cfg: TrainerConfig, net_seed: u64) -> Trainer {
        let net = QNetwork::new(
            NetConfig {
                arch: cfg.arch,
                history_len: cfg.history_len,
                hidden_width: cfg.hidden_width,
                outputs: 2,
            },
            net_seed,
        );
        let opt = RmsProp::new(net.num_params(), cfg.learning_rate, cfg.rho, cfg.rms_eps);
        let buffer = ExperienceBuffer::new(cfg.buffer_capacity);
        Trainer {
            cfg,
            net,
            opt,
            buffer,
            train_steps: 0,
        }
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.cfg
    }

    pub fn net(&self) -> &QNetwork {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut QNetwork {
        &mut self.net
    }

    pub fn buffer(&self) -> &ExperienceBuffer {
        &self.buffer
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    /// Buffer fill required before sampling is well defined for a whole
    /// minibatch of disjoint-or-overlapping windows.
    pub fn warmup_len(&self) -> usize {
        ExperienceBuffer::window_len(self.cfg.history_len, self.cfg.variant.n()) + self.cfg.minibatch
    }

    /// Store one slot's experience; under RB, rewrite the trailing
    /// rewards when a multi-slot packet just completed.
    pub fn record(&mut self, exp: AbbreviatedExperience) {
        let reward = exp.reward;
        self.buffer.store(exp);
        if self.cfg.variant.rewrites_rewards() {
            self.buffer.backpropagate_reward(reward);
        }
    }

    /// One minibatch update: sample windows, bootstrap targets from the
    /// frozen copy, descend, and sync the copy every `sync_period` steps.
    /// Returns `None` while the buffer is still warming up.
    pub fn train_step(&mut self, rng: &mut ChaCha8Rng) -> Result<Option<f64>, TrainError> {
        if self.buffer.len() < self.warmup_len() {
            return Ok(None);
        }
        let m = self.cfg.history_len;
        let n = self.cfg.variant.n();
        let batch = self.cfg.minibatch;

        let samples: Vec<_> = (0..batch)
            .map(|_| {
                self.buffer
                    .sample_window(m, n, rng)
                    .expect("warm-up guarantees a full window")
            })
            .collect();

        let next_rows: Vec<&[u8]> = samples.iter().map(|s| s.next_state.as_slice()).collect();
        let next_q = self.net.forward_target(&StateBatch::from_rows(&next_rows));
        let targets: Vec<f64> = samples
            .iter()
            .enumerate()
            .map(|(b, s)| {
                let max_q = next_q[[b, 0]].max(next_q[[b, 1]]);
                compute_target_n_step(&s.rewards, max_q, self.cfg.gamma)
            })
            .collect();

        let rows: Vec<&[u8]> = samples.iter().map(|s| s.state.as_slice()).collect();
        let states = StateBatch::from_rows(&rows);
        let actions: Vec<usize> = samples.iter().map(|s| s.action).collect();
        let (loss, grad) = self.net.loss_and_gradient(&states, &actions, &targets);
        if !loss.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                step: self.train_steps,
            });
        }
        self.opt.update(self.net.theta_mut(), &grad);
        self.train_steps += 1;
        if self.train_steps % self.cfg.sync_period == 0 {
            self.net.sync_target();
        }
        Ok(Some(loss))
    }
}

/// Everything a finished run hands back.
pub struct RunOutput {
    pub series: ThroughputSeries,
    /// Loss per training step, in order.
    pub losses: Vec<f64>,
}

/// Execute-then-train: per basic slot the agent acts epsilon-greedily on
/// the online network, the channel resolves the slot, the abbreviated
/// experience is stored (rewritten under RB), and one gradient update
/// runs once the buffer is past warm-up.
pub fn run(
    channel: &mut Channel,
    trainer: &mut Trainer,
    total_slots: u64,
    rng: &mut ChaCha8Rng,
    labels: Vec<String>,
) -> Result<RunOutput, TrainError> {
    let mut history = AgentHistory::new(trainer.cfg.history_len);
    let mut schedule = EpsilonSchedule::new(
        trainer.cfg.eps_initial,
        trainer.cfg.eps_decay,
        trainer.cfg.eps_floor,
    );
    let mut series = ThroughputSeries::new(labels);
    let mut losses = Vec::new();
    let mut slot_rewards = vec![0.0; series.num_streams()];

    for _ in 0..total_slots {
        let q = trainer.net.q_values(&history.indices());
        let action = select_action(q, &mut schedule, rng);

        let report = channel.step(Some(action == AgentAction::Transmit));
        let feedback = report.agent_feedback.expect("agent decision supplied");

        let symbol = history.latest();
        let next_symbol = history.observe(action, feedback);
        trainer.record(AbbreviatedExperience {
            symbol,
            action,
            reward: report.sum_reward,
            next_symbol,
        });

        if let Some(loss) = trainer.train_step(rng)? {
            losses.push(loss);
        }

        slot_rewards[0] = report.agent_reward;
        slot_rewards[1..].copy_from_slice(&report.node_rewards);
        series.push_slot(&slot_rewards);
    }
    Ok(RunOutput { series, losses })
}

/// Step a channel with no learning agent attached (legacy-only mixes and
/// the WiFi-replacement comparison).
pub fn run_legacy_only(channel: &mut Channel, total_slots: u64, labels: Vec<String>) -> ThroughputSeries {
    let mut series = ThroughputSeries::new(labels);
    for _ in 0..total_slots {
        let report = channel.step(None);
        series.push_slot(&report.node_rewards);
    }
    series
}
