//! Legacy MAC state machines sharing the channel with the learning node.
//!
//! Five node types: TDMA with a fixed per-frame pattern, q-ALOHA with an
//! i.i.d. transmit probability, fixed-window and exponential-backoff
//! ALOHA with drawn wait counters, and a simplified WiFi-style CSMA/CA
//! node that counts its backoff down only over idle-sensed basic slots.
//!
//! Each node owns its mutable counters and a private RNG stream; the
//! environment polls `wants_to_start` at every basic slot and reports
//! packet fates back through `on_packet_end`. TDMA and ALOHA packet slots
//! are aligned so that slot boundaries fall on basic slot 0.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// TDMA: transmit in the `pattern` TDMA slots of every frame of
/// `frame_len` TDMA slots, each TDMA slot spanning `slot_ratio` basic
/// slots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TdmaConfig {
    pub frame_len: u32,
    pub pattern: Vec<u32>,
    pub slot_ratio: u32,
}

impl TdmaConfig {
    /// True iff a packet starts at basic slot `t`.
    pub fn transmits_at(&self, t: u64) -> bool {
        t % self.slot_ratio as u64 == 0 && self.slot_active(t / self.slot_ratio as u64)
    }

    /// True iff TDMA slot index `slot` (not basic slot) is in the pattern.
    pub fn slot_active(&self, slot: u64) -> bool {
        let in_frame = (slot % self.frame_len as u64) as u32;
        self.pattern.contains(&in_frame)
    }

    /// True iff the node occupies basic slot `t` (any slot of a packet).
    pub fn occupies(&self, t: u64) -> bool {
        self.slot_active(t / self.slot_ratio as u64)
    }
}

/// Configuration of one legacy node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NodeConfig {
    Tdma(TdmaConfig),
    QAloha {
        q: f64,
        slot_ratio: u32,
    },
    FwAloha {
        window: u32,
        slot_ratio: u32,
    },
    EbAloha {
        window: u32,
        max_stage: u32,
        slot_ratio: u32,
    },
    Wifi {
        window: u32,
        max_stage: u32,
        packet_len: u32,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum NodeConfigError {
    #[error("{node}: transmit probability q = {q} outside [0, 1]")]
    ProbabilityOutOfRange { node: String, q: f64 },
    #[error("{node}: slot ratio must be >= 1")]
    ZeroSlotRatio { node: String },
    #[error("{node}: window must be >= 1")]
    ZeroWindow { node: String },
    #[error("{node}: empty TDMA pattern")]
    EmptyPattern { node: String },
    #[error("{node}: pattern slot {slot} outside frame of {frame_len}")]
    PatternOutOfFrame { node: String, slot: u32, frame_len: u32 },
    #[error("{node}: duplicate pattern slot {slot}")]
    DuplicatePatternSlot { node: String, slot: u32 },
}

impl NodeConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            NodeConfig::Tdma(_) => "tdma",
            NodeConfig::QAloha { .. } => "q_aloha",
            NodeConfig::FwAloha { .. } => "fw_aloha",
            NodeConfig::EbAloha { .. } => "eb_aloha",
            NodeConfig::Wifi { .. } => "wifi",
        }
    }

    /// Packet length in basic slots.
    pub fn packet_len(&self) -> u32 {
        match *self {
            NodeConfig::Tdma(ref c) => c.slot_ratio,
            NodeConfig::QAloha { slot_ratio, .. } => slot_ratio,
            NodeConfig::FwAloha { slot_ratio, .. } => slot_ratio,
            NodeConfig::EbAloha { slot_ratio, .. } => slot_ratio,
            NodeConfig::Wifi { packet_len, .. } => packet_len,
        }
    }

    pub fn validate(&self, node: &str) -> Result<(), NodeConfigError> {
        let node = node.to_string();
        match self {
            NodeConfig::Tdma(c) => {
                if c.slot_ratio == 0 {
                    return Err(NodeConfigError::ZeroSlotRatio { node });
                }
                if c.pattern.is_empty() {
                    return Err(NodeConfigError::EmptyPattern { node });
                }
                let mut seen = std::collections::HashSet::new();
                for &s in &c.pattern {
                    if s >= c.frame_len {
                        return Err(NodeConfigError::PatternOutOfFrame {
                            node,
                            slot: s,
                            frame_len: c.frame_len,
                        });
                    }
                    if !seen.insert(s) {
                        return Err(NodeConfigError::DuplicatePatternSlot { node, slot: s });
                    }
                }
                Ok(())
            }
            NodeConfig::QAloha { q, slot_ratio } => {
                if !(0.0..=1.0).contains(q) {
                    return Err(NodeConfigError::ProbabilityOutOfRange { node, q: *q });
                }
                if *slot_ratio == 0 {
                    return Err(NodeConfigError::ZeroSlotRatio { node });
                }
                Ok(())
            }
            NodeConfig::FwAloha { window, slot_ratio } => {
                if *window == 0 {
                    return Err(NodeConfigError::ZeroWindow { node });
                }
                if *slot_ratio == 0 {
                    return Err(NodeConfigError::ZeroSlotRatio { node });
                }
                Ok(())
            }
            NodeConfig::EbAloha {
                window, slot_ratio, ..
            } => {
                if *window == 0 {
                    return Err(NodeConfigError::ZeroWindow { node });
                }
                if *slot_ratio == 0 {
                    return Err(NodeConfigError::ZeroSlotRatio { node });
                }
                Ok(())
            }
            NodeConfig::Wifi {
                window, packet_len, ..
            } => {
                if *window == 0 {
                    return Err(NodeConfigError::ZeroWindow { node });
                }
                if *packet_len == 0 {
                    return Err(NodeConfigError::ZeroSlotRatio { node });
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone)]
enum NodeState {
    Tdma,
    QAloha,
    /// FW/EB-ALOHA: `counter` is the remaining wait in ALOHA slots;
    /// `stage` stays 0 for FW.
    Window { counter: u32, stage: u32 },
    /// WiFi: `counter` counts down over idle-sensed basic slots.
    Wifi { counter: u32, stage: u32 },
}

/// One legacy node: configuration, mutable counters, private RNG stream.
#[derive(Debug, Clone)]
pub struct LegacyNode {
    config: NodeConfig,
    state: NodeState,
    rng: ChaCha8Rng,
}

impl LegacyNode {
    /// Initial wait counters are drawn as if a transmission had just
    /// completed, so the node starts mid-cycle rather than synchronized.
    pub fn new(config: NodeConfig, mut rng: ChaCha8Rng) -> LegacyNode {
        let state = match config {
            NodeConfig::Tdma(_) => NodeState::Tdma,
            NodeConfig::QAloha { .. } => NodeState::QAloha,
            NodeConfig::FwAloha { window, .. } | NodeConfig::EbAloha { window, .. } => {
                NodeState::Window {
                    counter: rng.gen_range(0..window),
                    stage: 0,
                }
            }
            NodeConfig::Wifi { window, .. } => NodeState::Wifi {
                counter: rng.gen_range(0..window),
                stage: 0,
            },
        };
        LegacyNode { config, state, rng }
    }

    pub fn config(&self) -> &NodeConfig {
        &self.config
    }

    /// Decide at the start of basic slot `t` whether a new packet begins,
    /// returning its length in basic slots. Must not be called while the
    /// node is mid-packet.
    pub fn wants_to_start(&mut self, t: u64) -> Option<u32> {
        match (&self.config, &mut self.state) {
            (NodeConfig::Tdma(cfg), NodeState::Tdma) => {
                cfg.transmits_at(t).then_some(cfg.slot_ratio)
            }
            (&NodeConfig::QAloha { q, slot_ratio }, NodeState::QAloha) => {
                if t % slot_ratio as u64 == 0 && self.rng.gen_bool(q) {
                    Some(slot_ratio)
                } else {
                    None
                }
            }
            (
                &NodeConfig::FwAloha { slot_ratio, .. } | &NodeConfig::EbAloha { slot_ratio, .. },
                NodeState::Window { counter, .. },
            ) => {
                if t % slot_ratio as u64 != 0 {
                    return None;
                }
                if *counter == 0 {
                    Some(slot_ratio)
                } else {
                    // counter spends only on waiting slots
                    *counter -= 1;
                    None
                }
            }
            (&NodeConfig::Wifi { packet_len, .. }, NodeState::Wifi { counter, .. }) => {
                (*counter == 0).then_some(packet_len)
            }
            _ => unreachable!("state does not match config"),
        }
    }

    /// Carrier-sense result for basic slot `t`, delivered at slot end.
    /// Only meaningful (and only called) for slots the node did not
    /// transmit in; WiFi freezes its countdown on busy slots.
    pub fn on_slot_end(&mut self, sensed_busy: bool) {
        if let NodeState::Wifi { counter, .. } = &mut self.state {
            if !sensed_busy && *counter > 0 {
                *counter -= 1;
            }
        }
    }

    /// Acknowledgment (or lack of one) at the final basic slot of this
    /// node's packet. Backoff nodes redraw their wait counter here.
    pub fn on_packet_end(&mut self, success: bool) {
        match (&self.config, &mut self.state) {
            (NodeConfig::Tdma(_), NodeState::Tdma) => {}
            (NodeConfig::QAloha { .. }, NodeState::QAloha) => {}
            (&NodeConfig::FwAloha { window, .. }, NodeState::Window { counter, .. }) => {
                *counter = self.rng.gen_range(0..window);
            }
            (
                &NodeConfig::EbAloha {
                    window, max_stage, ..
                },
                NodeState::Window { counter, stage },
            ) => {
                *stage = if success {
                    0
                } else {
                    (*stage + 1).min(max_stage)
                };
                *counter = self.rng.gen_range(0..window << *stage);
            }
            (
                &NodeConfig::Wifi {
                    window, max_stage, ..
                },
                NodeState::Wifi { counter, stage },
            ) => {
                *stage = if success {
                    0
                } else {
                    (*stage + 1).min(max_stage)
                };
                *counter = self.rng.gen_range(0..window << *stage);
            }
            _ => unreachable!("state does not match config"),
        }
    }

    /// Current contention window in packet slots (backoff nodes only).
    pub fn current_window(&self) -> Option<u32> {
        match (&self.config, &self.state) {
            (&NodeConfig::FwAloha { window, .. }, NodeState::Window { .. }) => Some(window),
            (&NodeConfig::EbAloha { window, .. }, NodeState::Window { stage, .. })
            | (&NodeConfig::Wifi { window, .. }, NodeState::Wifi { stage, .. }) => {
                Some(window << stage)
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn tdma_2_of_5_r4() -> TdmaConfig {
        TdmaConfig {
            frame_len: 5,
            pattern: vec![0, 1],
            slot_ratio: 4,
        }
    }

    #[test]
    fn tdma_schedule_repeats_frame_to_frame() {
        let cfg = tdma_2_of_5_r4();
        assert!(cfg.transmits_at(0));
        assert!(!cfg.transmits_at(8)); // TDMA slot 2 not in pattern
        assert!(cfg.transmits_at(20)); // frame wrap, TDMA slot 0
        assert!(!cfg.transmits_at(1)); // mid TDMA slot
        assert!(cfg.transmits_at(4)); // TDMA slot 1
    }

    #[test]
    fn tdma_occupancy_is_exactly_pattern_share() {
        let cfg = tdma_2_of_5_r4();
        let mut node = LegacyNode::new(NodeConfig::Tdma(cfg.clone()), rng(0));
        let frame_basic = (cfg.frame_len * cfg.slot_ratio) as u64;
        let mut busy = 0u64;
        let mut in_flight = 0u32;
        for t in 0..(3 * frame_basic) {
            if in_flight == 0 {
                if let Some(len) = node.wants_to_start(t) {
                    in_flight = len;
                }
            }
            if in_flight > 0 {
                busy += 1;
                in_flight -= 1;
                if in_flight == 0 {
                    node.on_packet_end(true);
                }
            }
        }
        assert_eq!(busy, 3 * 2 * 4); // X * R_T per frame, 3 frames
    }

    #[test]
    fn q_aloha_extremes() {
        let mut silent = LegacyNode::new(
            NodeConfig::QAloha { q: 0.0, slot_ratio: 4 },
            rng(1),
        );
        let mut greedy = LegacyNode::new(
            NodeConfig::QAloha { q: 1.0, slot_ratio: 4 },
            rng(2),
        );
        for slot in 0..100 {
            let t = slot * 4;
            assert_eq!(silent.wants_to_start(t), None);
            assert_eq!(greedy.wants_to_start(t), Some(4));
            greedy.on_packet_end(true);
        }
    }

    #[test]
    fn q_aloha_empirical_rate_matches_q() {
        let mut node = LegacyNode::new(
            NodeConfig::QAloha { q: 0.4, slot_ratio: 1 },
            rng(3),
        );
        let n = 100_000;
        let mut transmitted = 0;
        for t in 0..n {
            if node.wants_to_start(t).is_some() {
                transmitted += 1;
                node.on_packet_end(true);
            }
        }
        let rate = transmitted as f64 / n as f64;
        // binomial 3 sigma ~ 0.005
        assert!((rate - 0.4).abs() < 0.01, "rate {rate}");
    }

    /// Drives a window-ALOHA node through `packets` transmissions with the
    /// given per-packet outcome, returning the gaps (in ALOHA slots)
    /// between consecutive transmissions.
    fn collect_gaps(node: &mut LegacyNode, packets: usize, success: bool) -> Vec<u64> {
        let slot_ratio = node.config().packet_len() as u64;
        let mut gaps = Vec::new();
        let mut last_tx_slot: Option<u64> = None;
        let mut aloha_slot = 0u64;
        while gaps.len() < packets {
            let t = aloha_slot * slot_ratio;
            if node.wants_to_start(t).is_some() {
                if let Some(prev) = last_tx_slot {
                    gaps.push(aloha_slot - prev - 1);
                }
                last_tx_slot = Some(aloha_slot);
                node.on_packet_end(success);
            }
            aloha_slot += 1;
        }
        gaps
    }

    #[test]
    fn fw_aloha_gaps_uniform_over_window() {
        let mut node = LegacyNode::new(
            NodeConfig::FwAloha { window: 2, slot_ratio: 4 },
            rng(4),
        );
        let gaps = collect_gaps(&mut node, 20_000, true);
        for &g in &gaps {
            assert!(g <= 1, "gap {g} outside [0, W-1]");
        }
        let zeros = gaps.iter().filter(|&&g| g == 0).count() as f64;
        let frac = zeros / gaps.len() as f64;
        assert!((frac - 0.5).abs() < 0.02, "P(gap=0) = {frac}");

        // chi-square at desk scale for W=4
        let mut node = LegacyNode::new(
            NodeConfig::FwAloha { window: 4, slot_ratio: 1 },
            rng(5),
        );
        let gaps = collect_gaps(&mut node, 40_000, true);
        let mut counts = [0f64; 4];
        for &g in &gaps {
            counts[g as usize] += 1.0;
        }
        let expected = gaps.len() as f64 / 4.0;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        // 3 dof, p = 0.001 critical value is 16.27
        assert!(chi2 < 16.27, "chi2 {chi2}");
    }

    #[test]
    fn eb_aloha_window_doubles_and_caps() {
        let mut node = LegacyNode::new(
            NodeConfig::EbAloha { window: 2, max_stage: 2, slot_ratio: 4 },
            rng(6),
        );
        assert_eq!(node.current_window(), Some(2));
        node.on_packet_end(false);
        assert_eq!(node.current_window(), Some(4));
        node.on_packet_end(false);
        assert_eq!(node.current_window(), Some(8));
        node.on_packet_end(false);
        assert_eq!(node.current_window(), Some(8)); // capped at 2^m W
        node.on_packet_end(true);
        assert_eq!(node.current_window(), Some(2)); // reverts on success
    }

    #[test]
    fn eb_window_always_in_doubling_ladder() {
        let mut node = LegacyNode::new(
            NodeConfig::EbAloha { window: 2, max_stage: 2, slot_ratio: 1 },
            rng(7),
        );
        let mut r = rng(8);
        for _ in 0..1000 {
            node.on_packet_end(r.gen_bool(0.5));
            let w = node.current_window().unwrap();
            assert!([2, 4, 8].contains(&w), "window {w}");
        }
    }

    #[test]
    fn wifi_counts_down_only_on_idle_slots() {
        let mut node = LegacyNode::new(
            NodeConfig::Wifi { window: 8, max_stage: 2, packet_len: 4 },
            rng(40),
        );
        // force a known counter by redrawing until we get 3
        loop {
            node.on_packet_end(true);
            if let NodeState::Wifi { counter, .. } = node.state {
                if counter == 3 {
                    break;
                }
            }
        }
        let sensed = [false, true, false, false]; // idle, busy, idle, idle
        let mut t = 0;
        for &busy in &sensed {
            assert_eq!(node.wants_to_start(t), None);
            node.on_slot_end(busy);
            t += 1;
        }
        // three idle slots elapsed: counter hit zero, transmits now
        assert_eq!(node.wants_to_start(t), Some(4));
    }

    #[test]
    fn wifi_counter_zero_transmits_immediately() {
        let mut node = LegacyNode::new(
            NodeConfig::Wifi { window: 2, max_stage: 2, packet_len: 2 },
            rng(1),
        );
        loop {
            node.on_packet_end(true);
            if let NodeState::Wifi { counter, .. } = node.state {
                if counter == 0 {
                    break;
                }
            }
        }
        assert_eq!(node.wants_to_start(17), Some(2));
    }

    #[test]
    fn wifi_collision_redraws_from_doubled_window() {
        let mut node = LegacyNode::new(
            NodeConfig::Wifi { window: 2, max_stage: 2, packet_len: 4 },
            rng(9),
        );
        let mut seen_max = 0;
        for _ in 0..200 {
            // reset to stage 0, then one collision -> window 4
            node.on_packet_end(true);
            node.on_packet_end(false);
            assert_eq!(node.current_window(), Some(4));
            if let NodeState::Wifi { counter, .. } = node.state {
                assert!(counter < 4);
                seen_max = seen_max.max(counter);
            }
        }
        assert_eq!(seen_max, 3, "counter should range over [0, 3]");
    }

    #[test]
    fn same_seed_same_trace() {
        for cfg in [
            NodeConfig::QAloha { q: 0.4, slot_ratio: 4 },
            NodeConfig::FwAloha { window: 2, slot_ratio: 4 },
            NodeConfig::EbAloha { window: 2, max_stage: 2, slot_ratio: 4 },
        ] {
            let mut a = LegacyNode::new(cfg.clone(), rng(99));
            let mut b = LegacyNode::new(cfg, rng(99));
            let mut flight_a = 0u32;
            for t in 0..2000 {
                if flight_a == 0 {
                    let da = a.wants_to_start(t);
                    let db = b.wants_to_start(t);
                    assert_eq!(da, db);
                    flight_a = da.unwrap_or(0);
                }
                if flight_a > 0 {
                    flight_a -= 1;
                    if flight_a == 0 {
                        a.on_packet_end(t % 3 == 0);
                        b.on_packet_end(t % 3 == 0);
                    }
                }
            }
        }
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        assert!(matches!(
            NodeConfig::QAloha { q: 1.3, slot_ratio: 4 }.validate("nodes[0]"),
            Err(NodeConfigError::ProbabilityOutOfRange { .. })
        ));
        assert!(matches!(
            NodeConfig::FwAloha { window: 0, slot_ratio: 4 }.validate("nodes[0]"),
            Err(NodeConfigError::ZeroWindow { .. })
        ));
        let bad_pattern = NodeConfig::Tdma(TdmaConfig {
            frame_len: 5,
            pattern: vec![0, 5],
            slot_ratio: 4,
        });
        assert!(matches!(
            bad_pattern.validate("nodes[1]"),
            Err(NodeConfigError::PatternOutOfFrame { .. })
        ));
    }
}
