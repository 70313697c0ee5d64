//! Throughput accounting: per-node and sum reward streams with windowed
//! (short-term) and cumulative (long-term) views, plus CSV export.

use std::io::{self, Write};

/// Smoothing window for short-term throughput, in basic slots.
pub const SHORT_TERM_WINDOW: usize = 1000;

/// Per-slot reward streams for every participant of a run.
///
/// Stream 0 is the subject (agent or replacement node) when present;
/// legacy nodes follow in construction order. The sum stream is derived.
#[derive(Debug, Clone)]
pub struct ThroughputSeries {
    labels: Vec<String>,
    /// stream-major: rewards[stream][slot]
    rewards: Vec<Vec<f64>>,
}

impl ThroughputSeries {
    pub fn new(labels: Vec<String>) -> ThroughputSeries {
        let rewards = labels.iter().map(|_| Vec::new()).collect();
        ThroughputSeries { labels, rewards }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn num_streams(&self) -> usize {
        self.labels.len()
    }

    pub fn len(&self) -> usize {
        self.rewards.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push_slot(&mut self, per_stream: &[f64]) {
        assert_eq!(per_stream.len(), self.rewards.len());
        for (stream, &r) in self.rewards.iter_mut().zip(per_stream) {
            debug_assert!(r >= 0.0);
            stream.push(r);
        }
    }

    pub fn stream(&self, i: usize) -> &[f64] {
        &self.rewards[i]
    }

    /// Sum reward per slot across all streams.
    pub fn sum_at(&self, t: usize) -> f64 {
        self.rewards.iter().map(|s| s[t]).sum()
    }

    /// Mean of `stream` over the window of `n` slots ending at `t`
    /// inclusive; `None` when fewer than `n + 1` slots precede it.
    pub fn short_term(&self, stream: usize, t: usize, n: usize) -> Option<f64> {
        if t < n {
            return None;
        }
        windowed_mean(&self.rewards[stream], t, n)
    }

    /// Sum-throughput version of [`short_term`](Self::short_term).
    pub fn short_term_sum(&self, t: usize, n: usize) -> Option<f64> {
        if t < n || t >= self.len() {
            return None;
        }
        let total: f64 = (t + 1 - n..=t).map(|tau| self.sum_at(tau)).sum();
        Some(total / n as f64)
    }

    /// Mean of `stream` over slots `0..t`; `None` for `t = 0`.
    pub fn cumulative(&self, stream: usize, t: usize) -> Option<f64> {
        if t == 0 || t > self.len() {
            return None;
        }
        Some(self.rewards[stream][..t].iter().sum::<f64>() / t as f64)
    }

    pub fn cumulative_sum(&self, t: usize) -> Option<f64> {
        if t == 0 || t > self.len() {
            return None;
        }
        let total: f64 = (0..t).map(|tau| self.sum_at(tau)).sum();
        Some(total / t as f64)
    }

    /// Final cumulative throughput of every stream plus the sum.
    pub fn final_cumulative(&self) -> (Vec<f64>, f64) {
        let t = self.len();
        let per: Vec<f64> = (0..self.num_streams())
            .map(|i| self.cumulative(i, t).unwrap_or(0.0))
            .collect();
        let sum = per.iter().sum();
        (per, sum)
    }

    /// First slot index at which the 1000-slot short-term sum throughput
    /// reaches `level`, if it ever does.
    pub fn first_crossing(&self, level: f64) -> Option<usize> {
        (SHORT_TERM_WINDOW..self.len())
            .find(|&t| self.short_term_sum(t, SHORT_TERM_WINDOW).unwrap() >= level)
    }

    /// Per-slot CSV: slot, each node's reward, short-term and cumulative
    /// sum throughput, each node's cumulative throughput. Short-term is
    /// blank until the window is full.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "slot")?;
        for label in &self.labels {
            write!(w, ",reward_{label}")?;
        }
        write!(w, ",short_term_sum,cumulative_sum")?;
        for label in &self.labels {
            write!(w, ",cumulative_{label}")?;
        }
        writeln!(w)?;

        let mut running: Vec<f64> = vec![0.0; self.num_streams()];
        let mut running_sum = 0.0;
        let mut window_sum = 0.0;
        for t in 0..self.len() {
            write!(w, "{t}")?;
            for (i, stream) in self.rewards.iter().enumerate() {
                running[i] += stream[t];
                write!(w, ",{}", fmt(stream[t]))?;
            }
            let slot_sum = self.sum_at(t);
            running_sum += slot_sum;
            window_sum += slot_sum;
            if t >= SHORT_TERM_WINDOW {
                window_sum -= self.sum_at(t - SHORT_TERM_WINDOW);
                write!(w, ",{}", fmt(window_sum / SHORT_TERM_WINDOW as f64))?;
            } else {
                write!(w, ",")?;
            }
            write!(w, ",{}", fmt(running_sum / (t + 1) as f64))?;
            for r in &running {
                write!(w, ",{}", fmt(r / (t + 1) as f64))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

pub(crate) fn fmt(x: f64) -> String {
    format!("{x:.6}")
}

fn windowed_mean(stream: &[f64], t: usize, n: usize) -> Option<f64> {
    if t + 1 < n || t >= stream.len() {
        return None;
    }
    Some(stream[t + 1 - n..=t].iter().sum::<f64>() / n as f64)
}
