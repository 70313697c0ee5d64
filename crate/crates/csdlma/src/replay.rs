//! Abbreviated-experience storage and continuous experience replay.
//!
//! One slot of interaction is stored as the compact record
//! `(c_t, a_t, r_{t+1}, c_{t+1})`; full training experiences are
//! reconstructed by sampling a window of consecutive records, because the
//! state at slot `i + 1` is just a one-symbol shift of the state at `i`.
//! The reward-backpropagation rewrite amortizes a completed packet's
//! length-R reward into 1s over the R slots the packet occupied.

use crate::agent::{AgentAction, ChannelStateSymbol};
use rand::Rng;
use std::collections::VecDeque;
use std::io::{self, Write};

/// The `(c_t, a_t, r_{t+1}, c_{t+1})` record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbbreviatedExperience {
    pub symbol: ChannelStateSymbol,
    pub action: AgentAction,
    pub reward: f64,
    pub next_symbol: ChannelStateSymbol,
}

/// A reconstructed training sample: `(s_i, a_i, r_{i+1}..r_{i+n}, s_{i+n})`
/// with states as symbol-index windows of length M, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledExperience {
    pub state: Vec<u8>,
    pub action: usize,
    pub rewards: Vec<f64>,
    pub next_state: Vec<u8>,
}

/// FIFO ring of the most recent abbreviated experiences.
#[derive(Debug, Clone)]
pub struct ExperienceBuffer {
    entries: VecDeque<AbbreviatedExperience>,
    capacity: usize,
}

impl ExperienceBuffer {
    pub fn new(capacity: usize) -> ExperienceBuffer {
        assert!(capacity > 0);
        ExperienceBuffer {
            entries: VecDeque::with_capacity(capacity + 1),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> &AbbreviatedExperience {
        &self.entries[i]
    }

    pub fn store(&mut self, exp: AbbreviatedExperience) {
        if let Some(last) = self.entries.back() {
            debug_assert_eq!(
                last.next_symbol, exp.symbol,
                "consecutive experiences must chain: c_{{t+1}} of one is c_t of the next"
            );
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(exp);
    }

    /// Reward-backpropagation rewrite, called right after storing the
    /// experience carrying `r_latest`. A completed length-R packet
    /// (`r_latest = R > 1`) overwrites the rewards of the last R stored
    /// experiences with 1; rewards of 0 or 1 change nothing. The rewrite
    /// clips at the oldest surviving entry.
    pub fn backpropagate_reward(&mut self, r_latest: f64) {
        if r_latest <= 1.0 {
            return;
        }
        let r = r_latest.round();
        debug_assert!(
            (r_latest - r).abs() < 1e-9,
            "packet-length rewards are integral, got {r_latest}"
        );
        let span = (r as usize).min(self.entries.len());
        let len = self.entries.len();
        for entry in self.entries.iter_mut().skip(len - span) {
            entry.reward = 1.0;
        }
    }

    /// Number of consecutive entries one sample needs.
    pub fn window_len(history_len: usize, n_step: usize) -> usize {
        history_len + n_step - 1
    }

    /// Draw one continuous-replay sample: a uniform window of
    /// `M + n - 1` consecutive entries, reconstructed into
    /// `(s_i, a_i, r_{i+1}..r_{i+n}, s_{i+n})`. Returns `None` until the
    /// buffer holds a full window.
    pub fn sample_window<R: Rng>(
        &self,
        history_len: usize,
        n_step: usize,
        rng: &mut R,
    ) -> Option<SampledExperience> {
        assert!(history_len >= 1 && n_step >= 1);
        let window = Self::window_len(history_len, n_step);
        if self.entries.len() < window {
            return None;
        }
        let start = rng.gen_range(0..=self.entries.len() - window);
        Some(self.reconstruct(start, history_len, n_step))
    }

    /// Rebuild the full experience whose window begins at `start`.
    pub fn reconstruct(
        &self,
        start: usize,
        history_len: usize,
        n_step: usize,
    ) -> SampledExperience {
        let m = history_len;
        let window = Self::window_len(m, n_step);
        assert!(start + window <= self.entries.len());

        let state: Vec<u8> = (0..m)
            .map(|k| self.entries[start + k].symbol.index() as u8)
            .collect();
        let pivot = &self.entries[start + m - 1];
        let rewards: Vec<f64> = (0..n_step)
            .map(|k| self.entries[start + m - 1 + k].reward)
            .collect();
        let last = &self.entries[start + window - 1];
        let next_state: Vec<u8> = (0..m - 1)
            .map(|k| self.entries[start + n_step + k].symbol.index() as u8)
            .chain(std::iter::once(last.next_symbol.index() as u8))
            .collect();

        SampledExperience {
            state,
            action: pivot.action.index(),
            rewards,
            next_state,
        }
    }

    /// Debug dump: `index,c_t,a_t,r,c_next` per entry.
    pub fn dump_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "index,c_t,a_t,r,c_next")?;
        for (i, e) in self.entries.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{}",
                i,
                e.symbol.index(),
                e.action.index(),
                crate::metrics::fmt(e.reward),
                e.next_symbol.index()
            )?;
        }
        Ok(())
    }
}
