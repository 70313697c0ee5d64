//! Model-aware benchmark: the optimal causal sum throughput for a legacy
//! mix, computed by average-reward dynamic programming over the genie's
//! information state.
//!
//! The genie knows every co-existing MAC and its parameters but observes
//! the channel causally, one basic slot at a time, and cannot sense while
//! transmitting. Its information state is finite: TDMA occupancy is a
//! deterministic function of the time phase, and the only uncertainty is
//! the current ALOHA draw, which resolves through carrier-sense or
//! collision feedback unless every basic slot of the ALOHA slot is masked
//! by a TDMA transmission (feedback then carries no information about the
//! ALOHA node). An unresolved draw is modelled as an explicit
//! belief-branching state; TDMA packets overlapped by unresolved draws
//! carry a survival factor of `(1 - q)` per overlapping unknown ALOHA
//! slot, paid as an expected reward at packet completion.
//!
//! Supported mixes: any number of TDMA nodes plus at most one stochastic
//! ALOHA node, where window-based ALOHA (fixed-window or exponential
//! backoff) is supported only without TDMA masking. Window beliefs use
//! counter elimination: after `k` observed idle ALOHA slots the node
//! transmits at the next boundary with probability `1/(W - k)`.

use crate::protocols::{NodeConfig, TdmaConfig};
use rand::Rng;
use std::collections::HashMap;
use thiserror::Error;

/// Genie actions, ordered like the agent's.
pub const ACTION_TRANSMIT: usize = 0;
pub const ACTION_WAIT: usize = 1;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("unsupported legacy mix for the oracle: {0}")]
    UnsupportedMix(String),
    #[error("state space exceeds cap: {found} states enumerated, cap {cap}")]
    StateCapExceeded { found: usize, cap: usize },
    #[error("relative value iteration did not converge within {iterations} iterations (span {span:e})")]
    NoConvergence { iterations: usize, span: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum AlohaBelief {
    /// q-ALOHA, boundary slot: draw not yet observable, packet unhit.
    Fresh,
    /// q-ALOHA, every slot since the boundary was masked: if the node is
    /// active its packet has already been overlapped.
    UnknownHit,
    Active {
        dirty: bool,
    },
    Idle,
    /// Window ALOHA, silent: `eliminated` idle boundaries observed since
    /// the counter was drawn from window `initial << stage`.
    Waiting {
        stage: u8,
        eliminated: u16,
    },
    /// Window ALOHA mid-packet.
    InFlight {
        stage: u8,
        dirty: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct TdmaFlight {
    known_dirty: bool,
    /// Unresolved ALOHA draws overlapping this packet so far.
    unknown_overlaps: u8,
}

/// Genie information state entering a basic slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct OracleState {
    phase: u32,
    tdma: Vec<Option<TdmaFlight>>,
    aloha: Option<AlohaBelief>,
}

#[derive(Debug, Clone, Copy)]
enum AlohaSpec {
    Q { q: f64, ratio: u32 },
    Window { initial: u32, max_stage: u32, ratio: u32 },
}

impl AlohaSpec {
    fn ratio(&self) -> u32 {
        match *self {
            AlohaSpec::Q { ratio, .. } => ratio,
            AlohaSpec::Window { ratio, .. } => ratio,
        }
    }
}

/// One transition branch: probability, successor, expected sum reward.
type Branch = (f64, u32, f64);

/// Finite MDP over the genie's information states.
#[derive(Debug)]
pub struct EnvModel {
    states: Vec<OracleState>,
    /// `transitions[state][action]` lists the probability branches.
    transitions: Vec<[Vec<Branch>; 2]>,
    initial: u32,
    cycle: u32,
}

impl EnvModel {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn cycle_len(&self) -> u32 {
        self.cycle
    }

    pub fn initial_state(&self) -> u32 {
        self.initial
    }

    /// Human-readable state tag for the policy dump.
    pub fn describe_state(&self, s: u32) -> String {
        let st = &self.states[s as usize];
        let mut parts = vec![format!("phase={}", st.phase)];
        for (i, f) in st.tdma.iter().enumerate() {
            match f {
                None => parts.push(format!("tdma{i}=idle")),
                Some(f) => parts.push(format!(
                    "tdma{i}={}:{}",
                    if f.known_dirty { "dirty" } else { "clean" },
                    f.unknown_overlaps
                )),
            }
        }
        if let Some(a) = &st.aloha {
            parts.push(format!("aloha={a:?}"));
        }
        parts.join(" ")
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

struct MixSpec {
    tdma: Vec<TdmaConfig>,
    aloha: Option<AlohaSpec>,
    cycle: u32,
}

fn classify_mix(nodes: &[NodeConfig]) -> Result<MixSpec, OracleError> {
    let mut tdma = Vec::new();
    let mut aloha = None;
    for node in nodes {
        match node {
            NodeConfig::Tdma(cfg) => tdma.push(cfg.clone()),
            NodeConfig::QAloha { q, slot_ratio } => {
                if aloha.is_some() {
                    return Err(OracleError::UnsupportedMix(
                        "more than one random-access node: joint beliefs are not finite".into(),
                    ));
                }
                aloha = Some(AlohaSpec::Q {
                    q: *q,
                    ratio: *slot_ratio,
                });
            }
            NodeConfig::FwAloha { window, slot_ratio } => {
                if aloha.is_some() {
                    return Err(OracleError::UnsupportedMix(
                        "more than one random-access node: joint beliefs are not finite".into(),
                    ));
                }
                aloha = Some(AlohaSpec::Window {
                    initial: *window,
                    max_stage: 0,
                    ratio: *slot_ratio,
                });
            }
            NodeConfig::EbAloha {
                window,
                max_stage,
                slot_ratio,
            } => {
                if aloha.is_some() {
                    return Err(OracleError::UnsupportedMix(
                        "more than one random-access node: joint beliefs are not finite".into(),
                    ));
                }
                aloha = Some(AlohaSpec::Window {
                    initial: *window,
                    max_stage: *max_stage,
                    ratio: *slot_ratio,
                });
            }
            NodeConfig::Wifi { .. } => {
                return Err(OracleError::UnsupportedMix(
                    "WiFi co-existers are evaluated empirically, not via the oracle".into(),
                ));
            }
        }
    }
    if matches!(aloha, Some(AlohaSpec::Window { .. })) && !tdma.is_empty() {
        return Err(OracleError::UnsupportedMix(
            "window ALOHA with TDMA masking requires beliefs over counters".into(),
        ));
    }
    let mut cycle = 1u64;
    for cfg in &tdma {
        cycle = lcm(cycle, cfg.frame_len as u64 * cfg.slot_ratio as u64);
    }
    if let Some(a) = &aloha {
        cycle = lcm(cycle, a.ratio() as u64);
    }
    Ok(MixSpec {
        tdma,
        aloha,
        cycle: cycle as u32,
    })
}

/// How the ALOHA node enters this slot, per branch.
#[derive(Debug, Clone, Copy)]
enum AlohaNow {
    Absent,
    KnownActive { dirty: bool },
    KnownIdle,
    /// Activity unresolved; `hit` tells whether an active packet would
    /// already be overlapped.
    Unknown { hit: bool },
}

/// Exact enumeration of the genie's information-state MDP.
pub fn build_model(nodes: &[NodeConfig], state_cap: usize) -> Result<EnvModel, OracleError> {
    let mix = classify_mix(nodes)?;
    let initial = OracleState {
        phase: 0,
        tdma: vec![None; mix.tdma.len()],
        aloha: mix.aloha.map(|a| match a {
            AlohaSpec::Q { .. } => AlohaBelief::Fresh,
            AlohaSpec::Window { .. } => AlohaBelief::Waiting {
                stage: 0,
                eliminated: 0,
            },
        }),
    };

    let mut index: HashMap<OracleState, u32> = HashMap::new();
    let mut states = vec![initial.clone()];
    index.insert(initial, 0);
    let mut transitions: Vec<[Vec<Branch>; 2]> = Vec::new();
    let mut cursor = 0usize;

    while cursor < states.len() {
        let state = states[cursor].clone();
        let mut per_action: [Vec<Branch>; 2] = [Vec::new(), Vec::new()];
        for (action, slot) in per_action.iter_mut().enumerate() {
            let genie_tx = action == ACTION_TRANSMIT;
            let raw = step_state(&state, &mix, genie_tx);
            for (prob, next, reward) in raw {
                let id = *index.entry(next.clone()).or_insert_with(|| {
                    states.push(next);
                    (states.len() - 1) as u32
                });
                slot.push((prob, id, reward));
            }
            if states.len() > state_cap {
                return Err(OracleError::StateCapExceeded {
                    found: states.len(),
                    cap: state_cap,
                });
            }
        }
        transitions.push(per_action);
        cursor += 1;
    }

    Ok(EnvModel {
        states,
        transitions,
        initial: 0,
        cycle: mix.cycle,
    })
}

/// All probability branches of one slot under the given genie action.
fn step_state(state: &OracleState, mix: &MixSpec, genie_tx: bool) -> Vec<(f64, OracleState, f64)> {
    let p = state.phase as u64;
    let next_phase = ((state.phase + 1) % mix.cycle) as u32;

    // deterministic TDMA facts for this slot
    let occupies: Vec<bool> = mix.tdma.iter().map(|c| c.occupies(p)).collect();
    let starts: Vec<bool> = mix.tdma.iter().map(|c| c.transmits_at(p)).collect();
    let completes: Vec<bool> = mix
        .tdma
        .iter()
        .zip(&occupies)
        .map(|(c, &occ)| occ && (p + 1) % c.slot_ratio as u64 == 0)
        .collect();
    let tdma_count = occupies.iter().filter(|&&b| b).count();
    let masked = tdma_count > 0;

    // flights entering the slot, plus ones starting now
    let mut flights = state.tdma.clone();
    for (i, &s) in starts.iter().enumerate() {
        if s {
            debug_assert!(flights[i].is_none());
            flights[i] = Some(TdmaFlight {
                known_dirty: false,
                unknown_overlaps: 0,
            });
        }
    }

    // per-branch ALOHA presence
    let branches: Vec<(f64, AlohaNow)> = match (mix.aloha, state.aloha) {
        (None, None) => vec![(1.0, AlohaNow::Absent)],
        (Some(AlohaSpec::Q { q, ratio }), Some(belief)) => {
            let offset = p % ratio as u64;
            match belief {
                AlohaBelief::Fresh | AlohaBelief::UnknownHit => {
                    let hit = belief == AlohaBelief::UnknownHit;
                    debug_assert!(offset == 0 || hit);
                    if masked {
                        vec![(1.0, AlohaNow::Unknown { hit })]
                    } else {
                        // feedback reveals the draw whichever action runs
                        let mut v = Vec::new();
                        if q > 0.0 {
                            v.push((q, AlohaNow::KnownActive { dirty: hit }));
                        }
                        if q < 1.0 {
                            v.push((1.0 - q, AlohaNow::KnownIdle));
                        }
                        v
                    }
                }
                AlohaBelief::Active { dirty } => vec![(1.0, AlohaNow::KnownActive { dirty })],
                AlohaBelief::Idle => vec![(1.0, AlohaNow::KnownIdle)],
                _ => unreachable!("window belief under q-ALOHA spec"),
            }
        }
        (
            Some(AlohaSpec::Window {
                initial,
                max_stage: _,
                ratio,
            }),
            Some(belief),
        ) => {
            let offset = p % ratio as u64;
            match belief {
                AlohaBelief::Waiting { stage, eliminated } if offset == 0 => {
                    // counter uniform over [0, W-1]; `eliminated` idle
                    // boundaries already ruled out the smaller values
                    let window = (initial << stage) as f64;
                    let p_tx = 1.0 / (window - eliminated as f64);
                    debug_assert!(p_tx <= 1.0 + 1e-12);
                    let mut v = vec![(p_tx, AlohaNow::KnownActive { dirty: false })];
                    if p_tx < 1.0 {
                        v.push((1.0 - p_tx, AlohaNow::KnownIdle));
                    }
                    v
                }
                AlohaBelief::Waiting { .. } => vec![(1.0, AlohaNow::KnownIdle)],
                AlohaBelief::InFlight { dirty, .. } => {
                    vec![(1.0, AlohaNow::KnownActive { dirty })]
                }
                _ => unreachable!("q-ALOHA belief under window spec"),
            }
        }
        _ => unreachable!("aloha spec/belief mismatch"),
    };

    let mut out = Vec::with_capacity(branches.len());
    for (prob, aloha_now) in branches {
        let aloha_active = matches!(aloha_now, AlohaNow::KnownActive { .. });
        let transmitters = tdma_count + aloha_active as usize + genie_tx as usize;
        let mut reward = 0.0;

        // genie packets are one basic slot long
        if genie_tx && transmitters == 1 {
            reward += 1.0;
        }

        // update TDMA packet cleanliness
        let mut new_flights = flights.clone();
        for (i, flight) in new_flights.iter_mut().enumerate() {
            let Some(f) = flight else { continue };
            let others = transmitters - occupies[i] as usize;
            debug_assert!(occupies[i]);
            if others >= 1 {
                f.known_dirty = true;
            }
            if let AlohaNow::Unknown { .. } = aloha_now {
                // an unresolved draw overlaps this packet from whichever
                // slot the two first intersect
                let ratio = mix.aloha.as_ref().unwrap().ratio() as u64;
                if p % ratio == 0 || starts[i] {
                    f.unknown_overlaps += 1;
                }
            }
        }

        // TDMA completions pay expected reward given the genie's info
        let q_prob = match mix.aloha {
            Some(AlohaSpec::Q { q, .. }) => q,
            _ => 0.0,
        };
        for (i, &done) in completes.iter().enumerate() {
            if !done {
                continue;
            }
            let f = new_flights[i].take().expect("completing packet in flight");
            if !f.known_dirty {
                let survival = (1.0 - q_prob).powi(f.unknown_overlaps as i32);
                reward += mix.tdma[i].slot_ratio as f64 * survival;
            }
        }

        // ALOHA belief transition and completion reward
        let new_aloha = match (mix.aloha, aloha_now) {
            (None, AlohaNow::Absent) => None,
            (Some(spec), now) => {
                let ratio = spec.ratio() as u64;
                let last_slot = (p + 1) % ratio == 0;
                match spec {
                    AlohaSpec::Q { .. } => Some(match now {
                        AlohaNow::KnownActive { dirty } => {
                            let dirty = dirty || transmitters >= 2;
                            if last_slot {
                                if !dirty {
                                    reward += ratio as f64;
                                }
                                AlohaBelief::Fresh
                            } else {
                                AlohaBelief::Active { dirty }
                            }
                        }
                        AlohaNow::KnownIdle => {
                            if last_slot {
                                AlohaBelief::Fresh
                            } else {
                                AlohaBelief::Idle
                            }
                        }
                        AlohaNow::Unknown { .. } => {
                            // masked: an active packet is necessarily hit,
                            // so completion pays nothing either way
                            if last_slot {
                                AlohaBelief::Fresh
                            } else {
                                AlohaBelief::UnknownHit
                            }
                        }
                        AlohaNow::Absent => unreachable!(),
                    }),
                    AlohaSpec::Window {
                        initial, max_stage, ..
                    } => Some(match (state.aloha.unwrap(), now) {
                        (AlohaBelief::Waiting { stage, eliminated }, AlohaNow::KnownIdle) => {
                            let offset = p % ratio;
                            let eliminated = if offset == 0 { eliminated + 1 } else { eliminated };
                            debug_assert!(((initial << stage) as u16) > eliminated);
                            AlohaBelief::Waiting { stage, eliminated }
                        }
                        (
                            AlohaBelief::Waiting { stage, .. } | AlohaBelief::InFlight { stage, .. },
                            AlohaNow::KnownActive { dirty },
                        ) => {
                            let dirty = dirty || transmitters >= 2;
                            if last_slot {
                                if !dirty {
                                    reward += ratio as f64;
                                }
                                let next_stage = if dirty {
                                    (stage + 1).min(max_stage as u8)
                                } else {
                                    0
                                };
                                AlohaBelief::Waiting {
                                    stage: next_stage,
                                    eliminated: 0,
                                }
                            } else {
                                AlohaBelief::InFlight { stage, dirty }
                            }
                        }
                        (belief, now) => unreachable!("window belief {belief:?} with {now:?}"),
                    }),
                }
            }
            _ => unreachable!(),
        };

        out.push((
            prob,
            OracleState {
                phase: next_phase,
                tdma: new_flights,
                aloha: new_aloha,
            },
            reward,
        ));
    }
    out
}

/// Average-reward solution: gain, bias values, deterministic policy.
#[derive(Debug)]
pub struct OracleSolution {
    pub gain: f64,
    pub bias: Vec<f64>,
    pub policy: Vec<u8>,
    pub iterations: usize,
}

/// Relative value iteration with the aperiodicity transform
/// `P <- (1-tau) I + tau P` (the legacy chains are periodic). Stops when
/// the span of the per-iteration gain bounds, rescaled by `tau`, falls
/// below `tol`.
pub fn relative_value_iteration(
    model: &EnvModel,
    tol: f64,
    max_iterations: usize,
) -> Result<OracleSolution, OracleError> {
    let n = model.num_states();
    let tau = 0.5;
    let mut w = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut span = f64::INFINITY;

    for iteration in 0..max_iterations {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in 0..n {
            let best = best_action_value(model, s, &w);
            let transformed = tau * best + (1.0 - tau) * w[s];
            let delta = transformed - w[s];
            lo = lo.min(delta);
            hi = hi.max(delta);
            next[s] = transformed;
        }
        span = (hi - lo) / tau;
        if span < tol {
            let gain = (hi + lo) / 2.0 / tau;
            let reference = next[model.initial as usize];
            let bias: Vec<f64> = next.iter().map(|v| v - reference).collect();
            let policy = (0..n)
                .map(|s| greedy_action(model, s, &next) as u8)
                .collect();
            return Ok(OracleSolution {
                gain,
                bias,
                policy,
                iterations: iteration + 1,
            });
        }
        let reference = next[model.initial as usize];
        for s in 0..n {
            w[s] = next[s] - reference;
        }
    }
    Err(OracleError::NoConvergence {
        iterations: max_iterations,
        span,
    })
}

fn action_value(model: &EnvModel, s: usize, a: usize, w: &[f64]) -> f64 {
    model.transitions[s][a]
        .iter()
        .map(|&(p, next, r)| p * (r + w[next as usize]))
        .sum()
}

fn best_action_value(model: &EnvModel, s: usize, w: &[f64]) -> f64 {
    let tx = action_value(model, s, ACTION_TRANSMIT, w);
    let wait = action_value(model, s, ACTION_WAIT, w);
    tx.max(wait)
}

fn greedy_action(model: &EnvModel, s: usize, w: &[f64]) -> usize {
    let tx = action_value(model, s, ACTION_TRANSMIT, w);
    let wait = action_value(model, s, ACTION_WAIT, w);
    if tx >= wait {
        ACTION_TRANSMIT
    } else {
        ACTION_WAIT
    }
}

/// The policy that never transmits, the no-genie baseline.
pub fn wait_always_policy(model: &EnvModel) -> Vec<u8> {
    vec![ACTION_WAIT as u8; model.num_states()]
}

/// Monte Carlo rollout of a policy on the model chain. Returns the
/// empirical average reward per basic slot and a batch-means standard
/// error (200 blocks).
pub fn simulate_policy<R: Rng>(
    model: &EnvModel,
    policy: &[u8],
    slots: u64,
    rng: &mut R,
) -> (f64, f64) {
    assert_eq!(policy.len(), model.num_states());
    let mut state = model.initial as usize;
    let mut total = 0.0;
    let blocks = 200u64;
    let block_len = (slots / blocks).max(1);
    let mut block_sums = Vec::with_capacity(blocks as usize);
    let mut block_acc = 0.0;
    for step in 0..slots {
        let action = policy[state] as usize;
        let branches = &model.transitions[state][action];
        let (next, reward) = if branches.len() == 1 {
            (branches[0].1, branches[0].2)
        } else {
            let mut draw = rng.gen::<f64>();
            let mut chosen = branches[branches.len() - 1];
            for &(p, next, r) in branches {
                if draw < p {
                    chosen = (p, next, r);
                    break;
                }
                draw -= p;
            }
            (chosen.1, chosen.2)
        };
        total += reward;
        block_acc += reward;
        if (step + 1) % block_len == 0 {
            block_sums.push(block_acc / block_len as f64);
            block_acc = 0.0;
        }
        state = next as usize;
    }
    let mean = total / slots as f64;
    let k = block_sums.len() as f64;
    let var = block_sums
        .iter()
        .map(|b| (b - mean) * (b - mean))
        .sum::<f64>()
        / (k - 1.0).max(1.0);
    (mean, (var / k).sqrt())
}

/// Convenience wrapper: build, solve, and return (solution, model).
pub fn solve_mix(nodes: &[NodeConfig], state_cap: usize) -> Result<(OracleSolution, EnvModel), OracleError> {
    let model = build_model(nodes, state_cap)?;
    let solution = relative_value_iteration(&model, 1e-9, 1_000_000)?;
    Ok((solution, model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tdma_2_of_5_r4() -> NodeConfig {
        NodeConfig::Tdma(TdmaConfig {
            frame_len: 5,
            pattern: vec![0, 1],
            slot_ratio: 4,
        })
    }

    fn q_aloha(q: f64, ratio: u32) -> NodeConfig {
        NodeConfig::QAloha { q, slot_ratio: ratio }
    }

    #[test]
    fn tdma_only_model_is_a_deterministic_cycle() {
        let model = build_model(&[tdma_2_of_5_r4()], 1_000_000).unwrap();
        assert_eq!(model.cycle_len(), 20);
        // 20 phases, flight cleanliness tracked while mid-packet
        assert!(model.num_states() <= 40, "{} states", model.num_states());
        for s in 0..model.num_states() {
            for a in 0..2 {
                assert_eq!(model.transitions[s][a].len(), 1, "deterministic");
            }
        }
    }

    #[test]
    fn q_aloha_only_state_structure() {
        let model = build_model(&[q_aloha(0.4, 4)], 1_000_000).unwrap();
        // offsets x {fresh/active-clean/active-dirty/idle} reachable subset
        assert!(model.num_states() <= 16, "{} states", model.num_states());
    }

    #[test]
    fn tdma_only_gain_is_one() {
        let (sol, _) = solve_mix(&[tdma_2_of_5_r4()], 1_000_000).unwrap();
        assert!((sol.gain - 1.0).abs() < 1e-8, "gain {}", sol.gain);
    }

    #[test]
    fn q1_aloha_only_gain_is_one() {
        let (sol, _) = solve_mix(&[q_aloha(1.0, 4)], 1_000_000).unwrap();
        assert!((sol.gain - 1.0).abs() < 1e-8, "gain {}", sol.gain);
    }

    #[test]
    fn wait_always_under_q_aloha_yields_q() {
        // each ALOHA slot transmits w.p. q and spans R_A basic slots
        let model = build_model(&[q_aloha(0.4, 4)], 1_000_000).unwrap();
        let policy = wait_always_policy(&model);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (mean, se) = simulate_policy(&model, &policy, 1_000_000, &mut rng);
        assert!((mean - 0.4).abs() < 3.0 * se + 1e-3, "mean {mean} se {se}");
    }

    /// Closed forms derived by direct per-slot argument; the q-ALOHA draw
    /// resets every ALOHA slot, so the optimal policy decomposes per slot.
    mod closed_form {
        use super::*;

        /// q-ALOHA(0.4, R=4) alone: sense at the boundary, then either
        /// stay silent under a revealed packet (0.4 * 4) or transmit the
        /// remaining three slots (0.6 * 3); per four basic slots.
        #[test]
        fn q_aloha_alone() {
            let (sol, _) = solve_mix(&[q_aloha(0.4, 4)], 1_000_000).unwrap();
            let expected = (0.4 * 4.0 + 0.6 * 3.0) / 4.0; // 0.85
            assert!((sol.gain - expected).abs() < 1e-8, "gain {}", sol.gain);
        }

        /// The §IV-B style mix, all slots aligned: two TDMA-active ALOHA
        /// slots per frame are write-offs at (1-q) * 4 each; the three
        /// free slots pay 0.4*4 + 0.6*3 as above.
        #[test]
        fn q_aloha_plus_tdma_aligned() {
            let (sol, _) =
                solve_mix(&[q_aloha(0.4, 4), tdma_2_of_5_r4()], 1_000_000).unwrap();
            let expected = (2.0 * 0.6 * 4.0 + 3.0 * (0.4 * 4.0 + 0.6 * 3.0)) / 20.0; // 0.75
            assert!((sol.gain - expected).abs() < 1e-8, "gain {}", sol.gain);
        }

        /// FW-ALOHA(W=2, R=4) alone: boundary belief alternates between
        /// p=1/2 (sense: 4 or 3 in expectation) and p=1 (stay silent: 4);
        /// stationary mix 2/3, 1/3 of the two boundary kinds.
        #[test]
        fn fw_aloha_alone() {
            let (sol, _) = solve_mix(
                &[NodeConfig::FwAloha { window: 2, slot_ratio: 4 }],
                1_000_000,
            )
            .unwrap();
            let expected = (2.0 / 3.0 * 3.5 + 1.0 / 3.0 * 4.0) / 4.0; // 11/12
            assert!((sol.gain - expected).abs() < 1e-8, "gain {}", sol.gain);
        }

        /// EB-ALOHA(W=2, m=2): the optimal policy never collides with the
        /// node, so the backoff stage stays 0 and the chain reduces to
        /// FW-ALOHA(W=2).
        #[test]
        fn eb_aloha_alone() {
            let (sol, _) = solve_mix(
                &[NodeConfig::EbAloha { window: 2, max_stage: 2, slot_ratio: 4 }],
                1_000_000,
            )
            .unwrap();
            assert!((sol.gain - 11.0 / 12.0).abs() < 1e-8, "gain {}", sol.gain);
        }

        /// Mixed ratios (R_A=2, R_T=4): a TDMA packet overlaps two masked
        /// ALOHA draws and survives with probability 0.36; six free ALOHA
        /// slots per frame pay 0.4*2 + 0.6*1 each.
        #[test]
        fn q_aloha_r2_plus_tdma_r4() {
            let (sol, _) =
                solve_mix(&[q_aloha(0.4, 2), tdma_2_of_5_r4()], 1_000_000).unwrap();
            let expected = (2.0 * 0.36 * 4.0 + 6.0 * (0.4 * 2.0 + 0.6 * 1.0)) / 20.0; // 0.564
            assert!((sol.gain - expected).abs() < 1e-8, "gain {}", sol.gain);
        }
    }

    #[test]
    fn gain_invariant_to_node_order_and_pattern_shift() {
        let (a, _) = solve_mix(&[q_aloha(0.4, 4), tdma_2_of_5_r4()], 1_000_000).unwrap();
        let (b, _) = solve_mix(&[tdma_2_of_5_r4(), q_aloha(0.4, 4)], 1_000_000).unwrap();
        assert!((a.gain - b.gain).abs() < 1e-9);
        let shifted = NodeConfig::Tdma(TdmaConfig {
            frame_len: 5,
            pattern: vec![2, 3],
            slot_ratio: 4,
        });
        let (c, _) = solve_mix(&[q_aloha(0.4, 4), shifted], 1_000_000).unwrap();
        assert!((a.gain - c.gain).abs() < 1e-8);
    }

    #[test]
    fn dp_gain_matches_policy_rollout() {
        for nodes in [
            vec![q_aloha(0.4, 4), tdma_2_of_5_r4()],
            vec![NodeConfig::FwAloha { window: 2, slot_ratio: 4 }],
        ] {
            let (sol, model) = solve_mix(&nodes, 1_000_000).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let (mean, se) = simulate_policy(&model, &sol.policy, 2_000_000, &mut rng);
            assert!(
                (mean - sol.gain).abs() < 3.0 * se + 1e-4,
                "gain {} vs rollout {mean} (se {se})",
                sol.gain
            );
        }
    }

    #[test]
    fn deterministic_rollout_equals_gain_exactly() {
        let (sol, model) = solve_mix(&[tdma_2_of_5_r4()], 1_000_000).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // whole number of 20-slot cycles
        let (mean, _) = simulate_policy(&model, &sol.policy, 20_000, &mut rng);
        assert!((mean - sol.gain).abs() < 1e-9);
    }

    #[test]
    fn unsupported_mixes_are_refused() {
        let err = build_model(&[q_aloha(0.4, 4), q_aloha(0.2, 4)], 1_000_000).unwrap_err();
        assert!(matches!(err, OracleError::UnsupportedMix(_)));
        let err = build_model(
            &[NodeConfig::FwAloha { window: 2, slot_ratio: 4 }, tdma_2_of_5_r4()],
            1_000_000,
        )
        .unwrap_err();
        assert!(matches!(err, OracleError::UnsupportedMix(_)));
        let err = build_model(
            &[NodeConfig::Wifi { window: 2, max_stage: 2, packet_len: 2 }],
            1_000_000,
        )
        .unwrap_err();
        assert!(matches!(err, OracleError::UnsupportedMix(_)));
    }

    #[test]
    fn state_cap_is_enforced() {
        let err = build_model(&[q_aloha(0.4, 4), tdma_2_of_5_r4()], 3).unwrap_err();
        assert!(matches!(err, OracleError::StateCapExceeded { .. }));
    }

    #[test]
    fn gain_never_exceeds_channel_capacity() {
        for nodes in [
            vec![q_aloha(0.2, 2)],
            vec![q_aloha(0.9, 3)],
            vec![NodeConfig::EbAloha { window: 4, max_stage: 1, slot_ratio: 2 }],
            vec![tdma_2_of_5_r4(), q_aloha(0.5, 4)],
        ] {
            let (sol, _) = solve_mix(&nodes, 1_000_000).unwrap();
            assert!(sol.gain <= 1.0 + 1e-9, "gain {}", sol.gain);
            assert!(sol.gain >= 0.0);
        }
    }
}
