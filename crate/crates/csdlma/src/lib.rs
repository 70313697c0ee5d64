//! Slot-level simulator and learning stack for heterogeneous wireless
//! medium access.
//!
//! A shared channel advances one *basic slot* at a time. Legacy nodes
//! (TDMA, three ALOHA variants, and a simplified WiFi-style CSMA/CA node)
//! transmit packets spanning one or more basic slots; a carrier-sensing
//! deep-Q-learning agent decides each basic slot whether to transmit or
//! sense, and learns model-free to maximise the sum throughput of all
//! nodes. A relative-value-iteration benchmark computes the optimal
//! causal sum throughput for a given legacy mix.
//!
//! Crate layout mirrors the subsystems:
//!
//! - [`env`] — channel arbitration, collisions, rewards, per-node feedback
//! - [`protocols`] — legacy MAC state machines
//! - [`agent`] — channel-state history, one-hot encoding, epsilon-greedy
//! - [`nn`] — from-scratch dense and LSTM Q-networks with exact gradients
//! - [`replay`] — abbreviated-experience ring buffer, reward
//!   backpropagation, continuous experience replay
//! - [`trainer`] — DQN target computation and the execute-then-train loop
//! - [`oracle`] — model-aware average-reward benchmark
//! - [`metrics`] — windowed and cumulative throughput accounting
//! - [`runner`] — experiment configuration, batching, and result files

pub mod agent;
pub mod env;
pub mod metrics;
pub mod nn;
pub mod oracle;
pub mod protocols;
pub mod replay;
pub mod runner;
pub mod trainer;

pub use agent::{AgentAction, AgentFeedback, ChannelStateSymbol};
