//! Shared-channel arbitration: advances the simulation one basic slot at
//! a time, resolves collisions across heterogeneous packet lengths, and
//! issues rewards and per-node feedback (the access-point role).
//!
//! Rewards are paid in packet-length units at the final basic slot of a
//! packet that was never overlapped: a single collided basic slot
//! destroys the whole packet, including basic slots that were clean.

use crate::agent::AgentFeedback;
use crate::protocols::LegacyNode;

/// What happened on the channel in one basic slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotOutcome {
    Idle,
    /// Exactly one in-flight packet occupied the slot.
    Success,
    Collision,
}

/// Classify a basic slot by how many transmissions overlap it.
pub fn resolve_slot(transmitting: usize) -> SlotOutcome {
    match transmitting {
        0 => SlotOutcome::Idle,
        1 => SlotOutcome::Success,
        _ => SlotOutcome::Collision,
    }
}

/// Reward for a basic slot: the completing packet's length if it ends
/// here with a clean span, else zero (idle, collision, mid-packet).
pub fn reward_for_slot(outcome: SlotOutcome, completing_len: Option<u32>) -> f64 {
    match (outcome, completing_len) {
        (SlotOutcome::Success, Some(len)) => len as f64,
        _ => 0.0,
    }
}

#[derive(Debug, Clone)]
struct Flight {
    remaining: u32,
    length: u32,
    dirty: bool,
}

/// Everything the run loop needs from one basic slot.
#[derive(Debug, Clone)]
pub struct SlotReport {
    pub t: u64,
    pub outcome: SlotOutcome,
    /// Reward of the packet (if any) that completed cleanly this slot.
    pub sum_reward: f64,
    /// Per legacy node, in construction order.
    pub node_rewards: Vec<f64>,
    pub agent_reward: f64,
    /// Present iff the slot was stepped with an agent decision.
    pub agent_feedback: Option<AgentFeedback>,
}

/// The shared channel plus the legacy nodes attached to it.
///
/// All state is owned by one stepping loop; independent runs use
/// independent `Channel` values.
pub struct Channel {
    nodes: Vec<LegacyNode>,
    flights: Vec<Option<Flight>>,
    t: u64,
}

impl Channel {
    pub fn new(nodes: Vec<LegacyNode>) -> Channel {
        let flights = nodes.iter().map(|_| None).collect();
        Channel {
            nodes,
            flights,
            t: 0,
        }
    }

    pub fn now(&self) -> u64 {
        self.t
    }

    pub fn nodes(&self) -> &[LegacyNode] {
        &self.nodes
    }

    /// Advance one basic slot. `agent_transmits = None` runs the legacy
    /// mix alone; `Some(true)` injects a one-basic-slot agent packet and
    /// `Some(false)` a carrier-sense observation.
    pub fn step(&mut self, agent_transmits: Option<bool>) -> SlotReport {
        let t = self.t;

        // new packets may begin at this slot boundary
        for (node, flight) in self.nodes.iter_mut().zip(self.flights.iter_mut()) {
            if flight.is_none() {
                if let Some(length) = node.wants_to_start(t) {
                    debug_assert!(length >= 1);
                    *flight = Some(Flight {
                        remaining: length,
                        length,
                        dirty: false,
                    });
                }
            }
        }

        let legacy_busy = self.flights.iter().filter(|f| f.is_some()).count();
        let agent_tx = agent_transmits == Some(true);
        let outcome = resolve_slot(legacy_busy + agent_tx as usize);

        // a collision in any basic slot destroys every overlapping packet
        if outcome == SlotOutcome::Collision {
            for flight in self.flights.iter_mut().flatten() {
                flight.dirty = true;
            }
        }

        let mut sum_reward = 0.0;
        let mut node_rewards = vec![0.0; self.nodes.len()];

        // agent packets last exactly one basic slot
        let mut agent_reward = 0.0;
        let agent_feedback = agent_transmits.map(|tx| {
            if tx {
                if outcome == SlotOutcome::Success {
                    agent_reward = reward_for_slot(outcome, Some(1));
                    AgentFeedback::Successful
                } else {
                    AgentFeedback::Collided
                }
            } else if legacy_busy > 0 {
                AgentFeedback::Busy
            } else {
                AgentFeedback::Idle
            }
        });
        sum_reward += agent_reward;

        // advance legacy packets; acknowledgments go out at final slots
        for i in 0..self.nodes.len() {
            let transmitted_now = self.flights[i].is_some();
            if let Some(flight) = &mut self.flights[i] {
                flight.remaining -= 1;
                if flight.remaining == 0 {
                    let success = !flight.dirty;
                    if success {
                        debug_assert_eq!(outcome, SlotOutcome::Success);
                        let r = reward_for_slot(outcome, Some(flight.length));
                        node_rewards[i] = r;
                        sum_reward += r;
                    }
                    self.nodes[i].on_packet_end(success);
                    self.flights[i] = None;
                }
            }
            if !transmitted_now {
                let others_busy = legacy_busy + agent_tx as usize > 0;
                self.nodes[i].on_slot_end(others_busy);
            }
        }

        self.t += 1;
        SlotReport {
            t,
            outcome,
            sum_reward,
            node_rewards,
            agent_reward,
            agent_feedback,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::{NodeConfig, TdmaConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn node(cfg: NodeConfig, seed: u64) -> LegacyNode {
        LegacyNode::new(cfg, ChaCha8Rng::seed_from_u64(seed))
    }

    fn tdma_2_of_5() -> NodeConfig {
        NodeConfig::Tdma(TdmaConfig {
            frame_len: 5,
            pattern: vec![0, 1],
            slot_ratio: 4,
        })
    }

    #[test]
    fn resolve_slot_counts() {
        assert_eq!(resolve_slot(0), SlotOutcome::Idle);
        assert_eq!(resolve_slot(1), SlotOutcome::Success);
        assert_eq!(resolve_slot(2), SlotOutcome::Collision);
        assert_eq!(resolve_slot(5), SlotOutcome::Collision);
    }

    #[test]
    fn reward_is_packet_length_at_clean_completion() {
        assert_eq!(reward_for_slot(SlotOutcome::Success, Some(1)), 1.0);
        assert_eq!(reward_for_slot(SlotOutcome::Success, Some(4)), 4.0);
        assert_eq!(reward_for_slot(SlotOutcome::Success, None), 0.0);
        assert_eq!(reward_for_slot(SlotOutcome::Collision, Some(4)), 0.0);
        assert_eq!(reward_for_slot(SlotOutcome::Idle, None), 0.0);
    }

    #[test]
    fn all_silent_slot_is_idle_with_zero_reward() {
        let mut ch = Channel::new(vec![node(
            NodeConfig::QAloha { q: 0.0, slot_ratio: 4 },
            0,
        )]);
        let report = ch.step(Some(false));
        assert_eq!(report.outcome, SlotOutcome::Idle);
        assert_eq!(report.sum_reward, 0.0);
        assert_eq!(report.agent_feedback, Some(AgentFeedback::Idle));
    }

    #[test]
    fn sense_sees_busy_while_tdma_mid_packet() {
        let mut ch = Channel::new(vec![node(tdma_2_of_5(), 0)]);
        for expect_busy in [true, true, true, true] {
            let report = ch.step(Some(false));
            let fb = report.agent_feedback.unwrap();
            assert_eq!(fb == AgentFeedback::Busy, expect_busy);
        }
    }

    #[test]
    fn tdma_packet_pays_its_length_at_final_slot() {
        let mut ch = Channel::new(vec![node(tdma_2_of_5(), 0)]);
        let rewards: Vec<f64> = (0..20).map(|_| ch.step(None).sum_reward).collect();
        let mut expected = vec![0.0; 20];
        expected[3] = 4.0; // TDMA slot 0 packet completes
        expected[7] = 4.0; // TDMA slot 1 packet completes
        assert_eq!(rewards, expected);
    }

    #[test]
    fn agent_transmit_overlapping_packet_collides_and_kills_it() {
        let mut ch = Channel::new(vec![node(tdma_2_of_5(), 0)]);
        let r0 = ch.step(Some(false));
        assert_eq!(r0.agent_feedback, Some(AgentFeedback::Busy));
        // hit the second basic slot of the 4-slot TDMA packet
        let r1 = ch.step(Some(true));
        assert_eq!(r1.outcome, SlotOutcome::Collision);
        assert_eq!(r1.agent_feedback, Some(AgentFeedback::Collided));
        assert_eq!(r1.agent_reward, 0.0);
        // the packet's remaining slots are clean but it is already lost
        let r2 = ch.step(Some(false));
        let r3 = ch.step(Some(false));
        assert_eq!(r2.sum_reward + r3.sum_reward, 0.0);
        assert_eq!(r3.node_rewards, vec![0.0]);
    }

    #[test]
    fn agent_alone_transmit_succeeds_immediately() {
        let mut ch = Channel::new(vec![]);
        let report = ch.step(Some(true));
        assert_eq!(report.outcome, SlotOutcome::Success);
        assert_eq!(report.agent_feedback, Some(AgentFeedback::Successful));
        assert_eq!(report.agent_reward, 1.0);
        assert_eq!(report.sum_reward, 1.0);
    }

    #[test]
    fn rewards_never_exceed_elapsed_slots() {
        // q=1 ALOHA and TDMA collide heavily; conservation must hold anyway
        let mut ch = Channel::new(vec![
            node(tdma_2_of_5(), 1),
            node(NodeConfig::QAloha { q: 0.7, slot_ratio: 4 }, 2),
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut total = 0.0;
        let horizon = 10_000;
        for _ in 0..horizon {
            use rand::Rng;
            total += ch.step(Some(rng.gen_bool(0.2))).sum_reward;
        }
        assert!(total <= horizon as f64);
    }

    #[test]
    fn packet_rewarded_iff_every_slot_exclusive() {
        // two TDMA nodes overlapping on slot pattern {0} vs {0,1}:
        // the first packet of each frame always collides, the second is clean
        let a = NodeConfig::Tdma(TdmaConfig {
            frame_len: 5,
            pattern: vec![0],
            slot_ratio: 4,
        });
        let mut ch = Channel::new(vec![node(a, 0), node(tdma_2_of_5(), 0)]);
        let mut per_node = vec![0.0; 2];
        for _ in 0..20 {
            let r = ch.step(None);
            per_node[0] += r.node_rewards[0];
            per_node[1] += r.node_rewards[1];
        }
        assert_eq!(per_node, vec![0.0, 4.0]);
    }

    #[test]
    fn identical_decision_streams_reproduce_identical_feedback() {
        let build = || {
            Channel::new(vec![
                node(tdma_2_of_5(), 7),
                node(NodeConfig::QAloha { q: 0.4, slot_ratio: 4 }, 8),
            ])
        };
        let mut a = build();
        let mut b = build();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5000 {
            use rand::Rng;
            let tx = rng.gen_bool(0.3);
            let ra = a.step(Some(tx));
            let rb = b.step(Some(tx));
            assert_eq!(ra.agent_feedback, rb.agent_feedback);
            assert_eq!(ra.sum_reward, rb.sum_reward);
            assert_eq!(ra.node_rewards, rb.node_rewards);
        }
    }
}
