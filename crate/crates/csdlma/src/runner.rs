//! Experiment front end: configuration files, seeded multi-run batches,
//! the WiFi-replacement comparison, and result files.
//!
//! A run is fully determined by `(config, run seed)`. Every random stream
//! is derived from the run seed by a fixed stream id - the subject, the
//! network init, and each legacy node get their own streams, so adding a
//! node never perturbs the others. Batches write one
//! `seed_<k>.csv` per run, a `mean.csv` across runs, and a
//! `summary.json`; all output bytes are deterministic.

use crate::env::Channel;
use crate::metrics::{fmt, ThroughputSeries, SHORT_TERM_WINDOW};
use crate::nn::Architecture;
use crate::oracle;
use crate::protocols::{LegacyNode, NodeConfig};
use crate::trainer::{run, run_legacy_only, DqnVariant, Trainer, TrainerConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

/// Default state cap for oracle model construction.
pub const ORACLE_STATE_CAP: usize = 1_000_000;

const STREAM_SUBJECT: u64 = 0;
const STREAM_NET_INIT: u64 = 1;
const STREAM_NODE_BASE: u64 = 10;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error at {path}: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Node(#[from] crate::protocols::NodeConfigError),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Oracle(#[from] oracle::OracleError),
}

fn d_arch() -> String {
    "rnn".into()
}
fn d_hidden_layers() -> usize {
    2
}
fn d_variant() -> String {
    "reward_backprop".into()
}
fn d_n_step() -> usize {
    4
}
fn d_gamma() -> f64 {
    0.9
}
fn d_history_len() -> usize {
    40
}
fn d_hidden_width() -> usize {
    64
}
fn d_buffer() -> usize {
    500
}
fn d_minibatch() -> usize {
    32
}
fn d_sync() -> u64 {
    200
}
fn d_lr() -> f64 {
    1e-3
}
fn d_rho() -> f64 {
    0.9
}
fn d_rms_eps() -> f64 {
    1e-6
}
fn d_eps_initial() -> f64 {
    0.1
}
fn d_eps_decay() -> f64 {
    0.995
}
fn d_eps_floor() -> f64 {
    0.005
}

/// Learning-agent settings; unset fields take the defaults above.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DlmaConfig {
    #[serde(default = "d_arch")]
    pub architecture: String,
    #[serde(default = "d_hidden_layers")]
    pub hidden_layers: usize,
    #[serde(default = "d_variant")]
    pub variant: String,
    #[serde(default = "d_n_step")]
    pub n_step: usize,
    #[serde(default = "d_gamma")]
    pub gamma: f64,
    #[serde(default = "d_history_len")]
    pub history_len: usize,
    #[serde(default = "d_hidden_width")]
    pub hidden_width: usize,
    #[serde(default = "d_buffer")]
    pub buffer_capacity: usize,
    #[serde(default = "d_minibatch")]
    pub minibatch: usize,
    #[serde(default = "d_sync")]
    pub sync_period: u64,
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    #[serde(default = "d_rho")]
    pub rho: f64,
    #[serde(default = "d_rms_eps")]
    pub rms_eps: f64,
    #[serde(default = "d_eps_initial")]
    pub eps_initial: f64,
    #[serde(default = "d_eps_decay")]
    pub eps_decay: f64,
    #[serde(default = "d_eps_floor")]
    pub eps_floor: f64,
}

impl Default for DlmaConfig {
    fn default() -> DlmaConfig {
        serde_json::from_str("{}").expect("all fields defaulted")
    }
}

impl DlmaConfig {
    pub fn architecture(&self) -> Result<Architecture, ConfigError> {
        match self.architecture.as_str() {
            "rnn" => Ok(Architecture::Rnn),
            "fnn" => Ok(Architecture::Fnn {
                hidden_layers: self.hidden_layers,
            }),
            other => Err(ConfigError::Invalid {
                field: "subject.architecture".into(),
                message: format!("unknown architecture {other:?} (expected \"rnn\" or \"fnn\")"),
            }),
        }
    }

    pub fn variant(&self) -> Result<DqnVariant, ConfigError> {
        match self.variant.as_str() {
            "one_step" => Ok(DqnVariant::OneStep),
            "n_step" => Ok(DqnVariant::NStep(self.n_step)),
            "reward_backprop" => Ok(DqnVariant::RewardBackprop),
            other => Err(ConfigError::Invalid {
                field: "subject.variant".into(),
                message: format!(
                    "unknown variant {other:?} (expected \"one_step\", \"n_step\" or \"reward_backprop\")"
                ),
            }),
        }
    }

    pub fn trainer_config(&self) -> Result<TrainerConfig, ConfigError> {
        Ok(TrainerConfig {
            variant: self.variant()?,
            arch: self.architecture()?,
            history_len: self.history_len,
            hidden_width: self.hidden_width,
            gamma: self.gamma,
            buffer_capacity: self.buffer_capacity,
            minibatch: self.minibatch,
            sync_period: self.sync_period,
            learning_rate: self.learning_rate,
            rho: self.rho,
            rms_eps: self.rms_eps,
            eps_initial: self.eps_initial,
            eps_decay: self.eps_decay,
            eps_floor: self.eps_floor,
        })
    }

    fn validate(&self) -> Result<(), ConfigError> {
        self.architecture()?;
        self.variant()?;
        let checks: [(&str, bool, String); 8] = [
            (
                "subject.gamma",
                self.gamma > 0.0 && self.gamma <= 1.0,
                format!("discount {} outside (0, 1]", self.gamma),
            ),
            (
                "subject.history_len",
                self.history_len >= 1,
                "history length must be >= 1".into(),
            ),
            (
                "subject.minibatch",
                self.minibatch >= 1,
                "minibatch must be >= 1".into(),
            ),
            (
                "subject.buffer_capacity",
                self.buffer_capacity
                    >= self.history_len + self.n_step - 1 + self.minibatch,
                "buffer too small for one minibatch of full windows".into(),
            ),
            (
                "subject.sync_period",
                self.sync_period >= 1,
                "sync period must be >= 1".into(),
            ),
            (
                "subject.learning_rate",
                self.learning_rate > 0.0,
                "learning rate must be positive".into(),
            ),
            (
                "subject.n_step",
                self.n_step >= 1,
                "n must be >= 1".into(),
            ),
            (
                "subject.eps",
                (0.0..=1.0).contains(&self.eps_initial)
                    && (0.0..=1.0).contains(&self.eps_decay)
                    && self.eps_floor >= 0.0
                    && self.eps_floor <= self.eps_initial,
                "epsilon schedule outside [0, 1] or floor above initial".into(),
            ),
        ];
        for (field, ok, message) in checks {
            if !ok {
                return Err(ConfigError::Invalid {
                    field: field.into(),
                    message,
                });
            }
        }
        Ok(())
    }
}

/// The node under study: the learning agent, a WiFi replacement, or
/// nothing (legacy mix alone).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubjectConfig {
    Dlma(DlmaConfig),
    Wifi {
        window: u32,
        max_stage: u32,
        packet_len: u32,
    },
    None,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub duration_slots: u64,
    #[serde(default)]
    pub master_seed: u64,
    pub subject: SubjectConfig,
    #[serde(default)]
    pub nodes: Vec<NodeConfig>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.duration_slots == 0 {
            return Err(ConfigError::Invalid {
                field: "duration_slots".into(),
                message: "must be >= 1".into(),
            });
        }
        for (i, node) in self.nodes.iter().enumerate() {
            node.validate(&format!("nodes[{i}]"))?;
        }
        match &self.subject {
            SubjectConfig::Dlma(cfg) => cfg.validate()?,
            SubjectConfig::Wifi {
                window, packet_len, ..
            } => {
                let as_node = NodeConfig::Wifi {
                    window: *window,
                    max_stage: 0,
                    packet_len: *packet_len,
                };
                as_node.validate("subject")?;
            }
            SubjectConfig::None => {}
        }
        Ok(())
    }

    /// Stream labels: the subject first, then legacy nodes; duplicate
    /// kinds get a numeric suffix.
    pub fn labels(&self) -> Vec<String> {
        let mut labels = Vec::new();
        match &self.subject {
            SubjectConfig::Dlma(_) => labels.push("agent".to_string()),
            SubjectConfig::Wifi { .. } => labels.push("wifi".to_string()),
            SubjectConfig::None => {}
        }
        let mut counts: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
        for node in &self.nodes {
            *counts.entry(node.kind_name()).or_default() += 1;
        }
        let mut seen: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
        for node in &self.nodes {
            let kind = node.kind_name();
            let i = seen.entry(kind).or_default();
            *i += 1;
            if counts[kind] > 1 {
                labels.push(format!("{kind}{i}"));
            } else {
                labels.push(kind.to_string());
            }
        }
        labels
    }
}

/// Parse and validate a config file, reporting the JSON path of schema
/// violations.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = fs::read_to_string(path)?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ExperimentConfig =
        serde_path_to_error::deserialize(de).map_err(|e| ConfigError::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    config.validate()?;
    Ok(config)
}

fn stream_rng(run_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    rng.set_stream(stream);
    rng
}

fn build_legacy_nodes(config: &ExperimentConfig, run_seed: u64) -> Vec<LegacyNode> {
    config
        .nodes
        .iter()
        .enumerate()
        .map(|(i, cfg)| LegacyNode::new(cfg.clone(), stream_rng(run_seed, STREAM_NODE_BASE + i as u64)))
        .collect()
}

/// Outcome of one seeded run.
pub struct RunResult {
    pub seed: u64,
    pub series: ThroughputSeries,
    pub error: Option<String>,
}

/// Execute one run of the configured experiment, deterministically in
/// `run_seed`.
pub fn run_single(config: &ExperimentConfig, run_seed: u64) -> RunResult {
    let labels = config.labels();
    match &config.subject {
        SubjectConfig::Dlma(dlma) => {
            let trainer_cfg = dlma.trainer_config().expect("config validated");
            let mut trainer = Trainer::new(trainer_cfg, seed_of(stream_rng(run_seed, STREAM_NET_INIT)));
            let mut channel = Channel::new(build_legacy_nodes(config, run_seed));
            let mut rng = stream_rng(run_seed, STREAM_SUBJECT);
            match run(&mut channel, &mut trainer, config.duration_slots, &mut rng, labels.clone()) {
                Ok(out) => RunResult {
                    seed: run_seed,
                    series: out.series,
                    error: None,
                },
                Err(e) => RunResult {
                    seed: run_seed,
                    series: ThroughputSeries::new(labels),
                    error: Some(e.to_string()),
                },
            }
        }
        SubjectConfig::Wifi {
            window,
            max_stage,
            packet_len,
        } => {
            let wifi = LegacyNode::new(
                NodeConfig::Wifi {
                    window: *window,
                    max_stage: *max_stage,
                    packet_len: *packet_len,
                },
                stream_rng(run_seed, STREAM_SUBJECT),
            );
            let mut nodes = vec![wifi];
            nodes.extend(build_legacy_nodes(config, run_seed));
            let mut channel = Channel::new(nodes);
            RunResult {
                seed: run_seed,
                series: run_legacy_only(&mut channel, config.duration_slots, labels),
                error: None,
            }
        }
        SubjectConfig::None => {
            let mut channel = Channel::new(build_legacy_nodes(config, run_seed));
            RunResult {
                seed: run_seed,
                series: run_legacy_only(&mut channel, config.duration_slots, labels),
                error: None,
            }
        }
    }
}

fn seed_of(mut rng: ChaCha8Rng) -> u64 {
    use rand::Rng;
    rng.gen()
}

#[derive(Debug, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub final_cumulative: Vec<f64>,
    pub final_cumulative_sum: f64,
    /// First slot whose 1000-slot short-term sum throughput reaches 90%
    /// of the oracle gain, when the gain is computable.
    pub slots_to_90pct_of_gain: Option<u64>,
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct ExperimentSummary {
    pub duration_slots: u64,
    pub seeds: u64,
    pub labels: Vec<String>,
    pub oracle_gain: Option<f64>,
    pub oracle_states: Option<usize>,
    pub oracle_note: Option<String>,
    pub per_seed: Vec<SeedSummary>,
    pub mean_final_cumulative: Vec<f64>,
    pub mean_final_cumulative_sum: f64,
    pub mean_slots_to_90pct_of_gain: Option<u64>,
}

/// Per-slot derived curves of one run, used for `mean.csv`.
struct DerivedCurves {
    short_term_sum: Vec<Option<f64>>,
    cumulative_sum: Vec<f64>,
    cumulative_per: Vec<Vec<f64>>,
}

fn derive_curves(series: &ThroughputSeries) -> DerivedCurves {
    let len = series.len();
    let streams = series.num_streams();
    let mut short_term_sum = Vec::with_capacity(len);
    let mut cumulative_sum = Vec::with_capacity(len);
    let mut cumulative_per = vec![Vec::with_capacity(len); streams];
    let mut running = vec![0.0; streams];
    let mut running_sum = 0.0;
    let mut window = 0.0;
    for t in 0..len {
        let slot_sum = series.sum_at(t);
        running_sum += slot_sum;
        window += slot_sum;
        if t >= SHORT_TERM_WINDOW {
            window -= series.sum_at(t - SHORT_TERM_WINDOW);
            short_term_sum.push(Some(window / SHORT_TERM_WINDOW as f64));
        } else {
            short_term_sum.push(None);
        }
        cumulative_sum.push(running_sum / (t + 1) as f64);
        for (i, row) in cumulative_per.iter_mut().enumerate() {
            running[i] += series.stream(i)[t];
            row.push(running[i] / (t + 1) as f64);
        }
    }
    DerivedCurves {
        short_term_sum,
        cumulative_sum,
        cumulative_per,
    }
}

/// Mean of the per-seed derived curves; slots where any seed is undefined
/// stay undefined.
fn mean_curves(all: &[DerivedCurves], len: usize, streams: usize) -> DerivedCurves {
    let k = all.len() as f64;
    let mut short_term_sum = Vec::with_capacity(len);
    let mut cumulative_sum = Vec::with_capacity(len);
    let mut cumulative_per = vec![Vec::with_capacity(len); streams];
    for t in 0..len {
        let st: Option<f64> = all
            .iter()
            .map(|c| c.short_term_sum[t])
            .try_fold(0.0, |acc, v| v.map(|v| acc + v))
            .map(|sum| sum / k);
        short_term_sum.push(st);
        cumulative_sum.push(all.iter().map(|c| c.cumulative_sum[t]).sum::<f64>() / k);
        for (i, row) in cumulative_per.iter_mut().enumerate() {
            row.push(all.iter().map(|c| c.cumulative_per[i][t]).sum::<f64>() / k);
        }
    }
    DerivedCurves {
        short_term_sum,
        cumulative_sum,
        cumulative_per,
    }
}

fn first_crossing(curve: &[Option<f64>], level: f64) -> Option<u64> {
    curve
        .iter()
        .position(|v| v.is_some_and(|v| v >= level))
        .map(|t| t as u64)
}

fn write_mean_csv(
    path: &Path,
    labels: &[String],
    mean: &DerivedCurves,
) -> Result<(), std::io::Error> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    write!(out, "slot,short_term_sum,cumulative_sum")?;
    for label in labels {
        write!(out, ",cumulative_{label}")?;
    }
    writeln!(out)?;
    for t in 0..mean.cumulative_sum.len() {
        write!(out, "{t}")?;
        match mean.short_term_sum[t] {
            Some(v) => write!(out, ",{}", fmt(v))?,
            None => write!(out, ",")?,
        }
        write!(out, ",{}", fmt(mean.cumulative_sum[t]))?;
        for row in &mean.cumulative_per {
            write!(out, ",{}", fmt(row[t]))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Run a multi-seed batch, write `seed_<k>.csv`, `mean.csv` and
/// `summary.json` under `out_dir`, and return the summary.
pub fn run_experiment(
    config: &ExperimentConfig,
    seeds: u64,
    out_dir: &Path,
) -> Result<ExperimentSummary, RunnerError> {
    assert!(seeds >= 1);
    fs::create_dir_all(out_dir)?;

    let results: Vec<RunResult> = (0..seeds)
        .into_par_iter()
        .map(|k| run_single(config, config.master_seed.wrapping_add(k)))
        .collect();

    for result in &results {
        let path = out_dir.join(format!("seed_{}.csv", result.seed));
        let mut out = std::io::BufWriter::new(fs::File::create(path)?);
        result.series.write_csv(&mut out)?;
    }

    let summary = summarize(config, &results)?;
    let ok: Vec<&RunResult> = results.iter().filter(|r| r.error.is_none()).collect();
    if !ok.is_empty() {
        let curves: Vec<DerivedCurves> = ok.iter().map(|r| derive_curves(&r.series)).collect();
        let mean = mean_curves(&curves, ok[0].series.len(), ok[0].series.num_streams());
        write_mean_csv(&out_dir.join("mean.csv"), &config.labels(), &mean)?;
    }
    fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    Ok(summary)
}

fn summarize(
    config: &ExperimentConfig,
    results: &[RunResult],
) -> Result<ExperimentSummary, RunnerError> {
    let labels = config.labels();
    let (oracle_gain, oracle_states, oracle_note) =
        match oracle::solve_mix(&config.nodes, ORACLE_STATE_CAP) {
            Ok((sol, model)) => (Some(sol.gain), Some(model.num_states()), None),
            Err(e) => (None, None, Some(e.to_string())),
        };
    let level = oracle_gain.map(|g| 0.9 * g);

    let mut per_seed = Vec::with_capacity(results.len());
    for r in results {
        let (final_cumulative, final_cumulative_sum) = r.series.final_cumulative();
        let crossing = match (level, r.error.is_none()) {
            (Some(level), true) => {
                first_crossing(&derive_curves(&r.series).short_term_sum, level)
            }
            _ => None,
        };
        per_seed.push(SeedSummary {
            seed: r.seed,
            final_cumulative,
            final_cumulative_sum,
            slots_to_90pct_of_gain: crossing,
            error: r.error.clone(),
        });
    }

    let ok: Vec<&RunResult> = results.iter().filter(|r| r.error.is_none()).collect();
    let (mean_final_cumulative, mean_final_cumulative_sum, mean_crossing) = if ok.is_empty() {
        (vec![0.0; labels.len()], 0.0, None)
    } else {
        let k = ok.len() as f64;
        let mut mean_per = vec![0.0; labels.len()];
        let mut mean_sum = 0.0;
        for r in &ok {
            let (per, sum) = r.series.final_cumulative();
            for (m, v) in mean_per.iter_mut().zip(per) {
                *m += v / k;
            }
            mean_sum += sum / k;
        }
        let curves: Vec<DerivedCurves> = ok.iter().map(|r| derive_curves(&r.series)).collect();
        let mean = mean_curves(&curves, ok[0].series.len(), labels.len());
        let crossing = level.and_then(|level| first_crossing(&mean.short_term_sum, level));
        (mean_per, mean_sum, crossing)
    };

    Ok(ExperimentSummary {
        duration_slots: config.duration_slots,
        seeds: results.len() as u64,
        labels,
        oracle_gain,
        oracle_states,
        oracle_note,
        per_seed,
        mean_final_cumulative,
        mean_final_cumulative_sum,
        mean_slots_to_90pct_of_gain: mean_crossing,
    })
}

#[derive(Debug, Serialize)]
pub struct ComparisonRow {
    pub label_a: String,
    pub label_b: String,
    pub mean_cumulative_a: f64,
    pub mean_cumulative_b: f64,
    pub difference: f64,
}

#[derive(Debug, Serialize)]
pub struct ComparisonSummary {
    pub a: ExperimentSummary,
    pub b: ExperimentSummary,
    pub sum_a: f64,
    pub sum_b: f64,
    pub sum_difference: f64,
    /// Streams paired by position: subject vs subject, then each legacy
    /// node.
    pub per_stream: Vec<ComparisonRow>,
}

/// Run two configs (e.g. the agent and its WiFi replacement) on the same
/// seed count and emit a paired comparison under `out_dir/a` and
/// `out_dir/b` plus `comparison.json`.
pub fn run_comparison(
    config_a: &ExperimentConfig,
    config_b: &ExperimentConfig,
    seeds: u64,
    out_dir: &Path,
) -> Result<ComparisonSummary, RunnerError> {
    let a = run_experiment(config_a, seeds, &out_dir.join("a"))?;
    let b = run_experiment(config_b, seeds, &out_dir.join("b"))?;
    let per_stream = a
        .labels
        .iter()
        .zip(&b.labels)
        .enumerate()
        .map(|(i, (la, lb))| ComparisonRow {
            label_a: la.clone(),
            label_b: lb.clone(),
            mean_cumulative_a: a.mean_final_cumulative[i],
            mean_cumulative_b: b.mean_final_cumulative[i],
            difference: a.mean_final_cumulative[i] - b.mean_final_cumulative[i],
        })
        .collect();
    let summary = ComparisonSummary {
        sum_a: a.mean_final_cumulative_sum,
        sum_b: b.mean_final_cumulative_sum,
        sum_difference: a.mean_final_cumulative_sum - b.mean_final_cumulative_sum,
        a,
        b,
        per_stream,
    };
    fs::write(
        out_dir.join("comparison.json"),
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    Ok(summary)
}

/// Oracle benchmark of the legacy mix: gain, model size, the WAIT-always
/// baseline, and the policy table in CSV.
pub struct OracleBench {
    pub gain: f64,
    pub states: usize,
    pub wait_always_throughput: f64,
    pub policy_csv: String,
}

pub fn bench_oracle(config: &ExperimentConfig) -> Result<OracleBench, RunnerError> {
    let (solution, model) = oracle::solve_mix(&config.nodes, ORACLE_STATE_CAP)?;
    let mut rng = stream_rng(config.master_seed, STREAM_SUBJECT);
    let (wait_mean, _) = oracle::simulate_policy(
        &model,
        &oracle::wait_always_policy(&model),
        1_000_000,
        &mut rng,
    );
    let mut policy_csv = String::from("state,description,action\n");
    for s in 0..model.num_states() {
        policy_csv.push_str(&format!(
            "{},{},{}\n",
            s,
            model.describe_state(s as u32),
            if solution.policy[s] as usize == oracle::ACTION_TRANSMIT {
                "transmit"
            } else {
                "wait"
            }
        ));
    }
    Ok(OracleBench {
        gain: solution.gain,
        states: model.num_states(),
        wait_always_throughput: wait_mean,
        policy_csv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_dlma_json() -> &'static str {
        r#"{
            "duration_slots": 500,
            "master_seed": 7,
            "subject": {"kind": "dlma"},
            "nodes": [{"kind": "q_aloha", "q": 0.4, "slot_ratio": 4}]
        }"#
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config_str(minimal_dlma_json()).unwrap();
        let SubjectConfig::Dlma(dlma) = &cfg.subject else {
            panic!("expected dlma subject");
        };
        assert_eq!(dlma.gamma, 0.9);
        assert_eq!(dlma.history_len, 40);
        assert_eq!(dlma.buffer_capacity, 500);
        assert_eq!(dlma.minibatch, 32);
        assert_eq!(dlma.sync_period, 200);
        assert_eq!(dlma.eps_initial, 0.1);
        assert_eq!(dlma.eps_decay, 0.995);
        assert_eq!(dlma.eps_floor, 0.005);
        assert_eq!(dlma.variant, "reward_backprop");
        assert_eq!(dlma.architecture, "rnn");
    }

    #[test]
    fn out_of_range_probability_is_rejected_with_path() {
        let bad = r#"{
            "duration_slots": 100,
            "subject": {"kind": "none"},
            "nodes": [{"kind": "q_aloha", "q": 1.3, "slot_ratio": 4}]
        }"#;
        let err = parse_config_str(bad).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("nodes[0]"), "{text}");
        assert!(text.contains("1.3"), "{text}");
    }

    #[test]
    fn unknown_node_kind_is_rejected() {
        let bad = r#"{
            "duration_slots": 100,
            "subject": {"kind": "none"},
            "nodes": [{"kind": "csma_cd"}]
        }"#;
        let err = parse_config_str(bad).unwrap_err();
        assert!(err.to_string().contains("csma_cd"), "{err}");
    }

    #[test]
    fn unknown_top_level_field_is_rejected() {
        let bad = r#"{"duration_slots": 100, "subject": {"kind": "none"}, "plot": true}"#;
        assert!(parse_config_str(bad).is_err());
    }

    #[test]
    fn labels_disambiguate_duplicate_kinds() {
        let cfg = parse_config_str(
            r#"{
                "duration_slots": 100,
                "subject": {"kind": "dlma"},
                "nodes": [
                    {"kind": "q_aloha", "q": 0.2, "slot_ratio": 2},
                    {"kind": "q_aloha", "q": 0.4, "slot_ratio": 2},
                    {"kind": "tdma", "frame_len": 5, "pattern": [0], "slot_ratio": 4}
                ]
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.labels(), vec!["agent", "q_aloha1", "q_aloha2", "tdma"]);
    }

    #[test]
    fn wifi_subject_runs_without_training() {
        let cfg = parse_config_str(
            r#"{
                "duration_slots": 2000,
                "subject": {"kind": "wifi", "window": 2, "max_stage": 2, "packet_len": 2},
                "nodes": [{"kind": "tdma", "frame_len": 5, "pattern": [0, 1], "slot_ratio": 4}]
            }"#,
        )
        .unwrap();
        let result = run_single(&cfg, 3);
        assert!(result.error.is_none());
        assert_eq!(result.series.len(), 2000);
        let (per, sum) = result.series.final_cumulative();
        assert!(per[1] > 0.0, "TDMA should get traffic through");
        assert!(sum <= 1.0);
    }

    #[test]
    fn run_single_is_deterministic_per_seed() {
        let cfg = {
            let mut c = parse_config_str(minimal_dlma_json()).unwrap();
            // small net keeps this test quick
            if let SubjectConfig::Dlma(d) = &mut c.subject {
                d.history_len = 6;
                d.hidden_width = 8;
                d.buffer_capacity = 60;
                d.minibatch = 8;
            }
            c
        };
        let a = run_single(&cfg, 11);
        let b = run_single(&cfg, 11);
        let c = run_single(&cfg, 12);
        for t in 0..a.series.len() {
            assert_eq!(a.series.sum_at(t), b.series.sum_at(t));
        }
        let differs = (0..a.series.len()).any(|t| a.series.sum_at(t) != c.series.sum_at(t));
        assert!(differs, "different seeds should differ somewhere");
    }

    #[test]
    fn batch_writes_expected_files_and_byte_identical_reruns() {
        let cfg = {
            let mut c = parse_config_str(minimal_dlma_json()).unwrap();
            if let SubjectConfig::Dlma(d) = &mut c.subject {
                d.history_len = 6;
                d.hidden_width = 8;
                d.buffer_capacity = 60;
                d.minibatch = 8;
            }
            c.duration_slots = 300;
            c
        };
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let s1 = run_experiment(&cfg, 2, dir1.path()).unwrap();
        let _ = run_experiment(&cfg, 2, dir2.path()).unwrap();
        assert_eq!(s1.per_seed.len(), 2);
        for name in ["seed_7.csv", "seed_8.csv", "mean.csv", "summary.json"] {
            let b1 = fs::read(dir1.path().join(name)).unwrap();
            let b2 = fs::read(dir2.path().join(name)).unwrap();
            assert!(!b1.is_empty());
            assert_eq!(b1, b2, "{name} not byte-identical");
        }
        // q-ALOHA(0.4, R=4) alone: oracle gain 0.85
        assert!((s1.oracle_gain.unwrap() - 0.85).abs() < 1e-8);
    }

    #[test]
    fn bench_oracle_reports_gain_and_baseline() {
        let cfg = parse_config_str(
            r#"{
                "duration_slots": 10,
                "subject": {"kind": "none"},
                "nodes": [{"kind": "tdma", "frame_len": 5, "pattern": [0, 1], "slot_ratio": 4}]
            }"#,
        )
        .unwrap();
        let bench = bench_oracle(&cfg).unwrap();
        assert!((bench.gain - 1.0).abs() < 1e-8);
        assert!((bench.wait_always_throughput - 0.4).abs() < 1e-9);
        assert!(bench.policy_csv.lines().count() > bench.states);
    }

    #[test]
    fn comparison_pairs_streams_by_position() {
        let a = parse_config_str(
            r#"{
                "duration_slots": 1500,
                "subject": {"kind": "none"},
                "nodes": [{"kind": "tdma", "frame_len": 5, "pattern": [0, 1], "slot_ratio": 4}]
            }"#,
        )
        .unwrap();
        let b = parse_config_str(
            r#"{
                "duration_slots": 1500,
                "subject": {"kind": "wifi", "window": 2, "max_stage": 2, "packet_len": 2},
                "nodes": [{"kind": "tdma", "frame_len": 5, "pattern": [0, 1], "slot_ratio": 4}]
            }"#,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        // subject-less config a has one stream; wifi config b has two, so
        // pair only by shared positions
        let cmp = run_comparison(&b, &a, 1, dir.path()).unwrap();
        assert_eq!(cmp.per_stream.len(), 1);
        assert!(dir.path().join("comparison.json").exists());
        assert!(dir.path().join("a/mean.csv").exists());
        assert!(dir.path().join("b/summary.json").exists());
    }
}
