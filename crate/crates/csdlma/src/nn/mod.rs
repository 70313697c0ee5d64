//! From-scratch Q-value approximators with exact analytic gradients.
//!
//! Two architectures share one flat `f64` parameter vector plus a frozen
//! target copy:
//!
//! - a dense feedforward network over the flattened one-hot history, `h`
//!   hidden ReLU layers wide `hidden_width`;
//! - a recurrent network that consumes the history one symbol at a time
//!   through a single LSTM layer, then one dense ReLU layer.
//!
//! Both end in a linear two-output head, one Q value per action. All
//! arithmetic is 64-bit; training uses RMSProp on gradients produced by
//! full backpropagation (through time, for the LSTM).

mod fnn;
mod lstm;
mod rmsprop;

pub use rmsprop::RmsProp;

use crate::agent::SYMBOL_DIM;
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{self, Read, Write};
use thiserror::Error;

/// Q-network architecture selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    /// Plain stacked dense layers.
    Fnn { hidden_layers: usize },
    /// One LSTM layer followed by one dense layer.
    Rnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetConfig {
    pub arch: Architecture,
    /// State history length M (symbols per input).
    pub history_len: usize,
    /// Neurons per hidden layer.
    pub hidden_width: usize,
    /// Number of actions.
    pub outputs: usize,
}

impl NetConfig {
    pub fn input_width(&self) -> usize {
        self.history_len * SYMBOL_DIM
    }
}

/// One named block of the flat parameter vector, stored row-major.
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn view<'a>(&self, params: &'a [f64]) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape(
            (self.rows, self.cols),
            &params[self.offset..self.offset + self.len()],
        )
        .expect("segment shape matches slice")
    }

    pub fn slice<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.offset..self.offset + self.len()]
    }

    pub fn slice_mut<'a>(&self, params: &'a mut [f64]) -> &'a mut [f64] {
        &mut params[self.offset..self.offset + self.len()]
    }
}

fn build_layout(cfg: &NetConfig) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut offset = 0;
    let mut push = |rows: usize, cols: usize| {
        let seg = Segment { rows, cols, offset };
        offset += seg.len();
        segments.push(seg);
    };
    let w = cfg.hidden_width;
    match cfg.arch {
        Architecture::Fnn { hidden_layers } => {
            assert!(hidden_layers >= 1);
            let mut inputs = cfg.input_width();
            for _ in 0..hidden_layers {
                push(inputs, w); // weights
                push(1, w); // bias
                inputs = w;
            }
            push(w, cfg.outputs);
            push(1, cfg.outputs);
        }
        Architecture::Rnn => {
            push(SYMBOL_DIM, 4 * w); // input weights, gate order [i f g o]
            push(w, 4 * w); // recurrent weights
            push(1, 4 * w); // gate biases
            push(w, w); // dense layer
            push(1, w);
            push(w, cfg.outputs);
            push(1, cfg.outputs);
        }
    }
    segments
}

/// A minibatch of encoded states: symbol indices, row-major `batch x M`.
#[derive(Debug, Clone)]
pub struct StateBatch {
    pub batch: usize,
    pub history_len: usize,
    symbols: Vec<u8>,
}

impl StateBatch {
    pub fn from_rows(rows: &[&[u8]]) -> StateBatch {
        assert!(!rows.is_empty());
        let m = rows[0].len();
        let mut symbols = Vec::with_capacity(rows.len() * m);
        for row in rows {
            assert_eq!(row.len(), m);
            symbols.extend_from_slice(row);
        }
        StateBatch {
            batch: rows.len(),
            history_len: m,
            symbols,
        }
    }

    pub fn from_single(window: &[u8]) -> StateBatch {
        StateBatch {
            batch: 1,
            history_len: window.len(),
            symbols: window.to_vec(),
        }
    }

    pub fn symbol(&self, sample: usize, step: usize) -> usize {
        self.symbols[sample * self.history_len + step] as usize
    }

    /// One-hot rows flattened per sample, `batch x 4M`.
    fn one_hot_flat(&self) -> Array2<f64> {
        let mut x = Array2::zeros((self.batch, self.history_len * SYMBOL_DIM));
        for b in 0..self.batch {
            for k in 0..self.history_len {
                x[[b, k * SYMBOL_DIM + self.symbol(b, k)]] = 1.0;
            }
        }
        x
    }
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic: not a Q-network checkpoint")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    BadVersion(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"CSDLMAQ1";
const CHECKPOINT_VERSION: u32 = 1;

/// Online parameters, frozen target copy, and the layout both share.
#[derive(Debug, Clone)]
pub struct QNetwork {
    cfg: NetConfig,
    segments: Vec<Segment>,
    theta: Vec<f64>,
    target: Vec<f64>,
}

impl QNetwork {
    /// Seed-deterministic initialization: weights uniform in
    /// `±1/sqrt(fan_in)`, biases zero except the LSTM forget-gate block,
    /// which starts at 1 so early gradients flow through time.
    pub fn new(cfg: NetConfig, seed: u64) -> QNetwork {
        assert!(cfg.history_len >= 1 && cfg.hidden_width >= 1 && cfg.outputs >= 1);
        let segments = build_layout(&cfg);
        let total = segments.iter().map(Segment::len).sum();
        let mut theta = vec![0.0; total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for seg in &segments {
            if seg.rows == 1 {
                continue; // bias
            }
            let bound = 1.0 / (seg.rows as f64).sqrt();
            for v in seg.slice_mut(&mut theta) {
                *v = rng.gen_range(-bound..bound);
            }
        }
        if cfg.arch == Architecture::Rnn {
            let w = cfg.hidden_width;
            let bias = segments[lstm::SEG_B].slice_mut(&mut theta);
            for v in &mut bias[w..2 * w] {
                *v = 1.0;
            }
        }
        let target = theta.clone();
        QNetwork {
            cfg,
            segments,
            theta,
            target,
        }
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn num_params(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn target_params(&self) -> &[f64] {
        &self.target
    }

    /// Copy the online parameters over the frozen target copy.
    pub fn sync_target(&mut self) {
        self.target.copy_from_slice(&self.theta);
    }

    fn forward_with(&self, params: &[f64], states: &StateBatch) -> Array2<f64> {
        assert_eq!(
            states.history_len, self.cfg.history_len,
            "input shape does not match architecture"
        );
        match self.cfg.arch {
            Architecture::Fnn { .. } => {
                fnn::forward(&self.cfg, &self.segments, params, &states.one_hot_flat()).q
            }
            Architecture::Rnn => lstm::forward(&self.cfg, &self.segments, params, states).q,
        }
    }

    /// Q values from the online network, one row per sample.
    pub fn forward_online(&self, states: &StateBatch) -> Array2<f64> {
        self.forward_with(&self.theta, states)
    }

    /// Q values from the frozen target network.
    pub fn forward_target(&self, states: &StateBatch) -> Array2<f64> {
        self.forward_with(&self.target, states)
    }

    /// Online Q values for a single encoded state.
    pub fn q_values(&self, window: &[u8]) -> [f64; 2] {
        let q = self.forward_online(&StateBatch::from_single(window));
        [q[[0, 0]], q[[0, 1]]]
    }

    /// Mean squared TD error over the minibatch, gradients flowing only
    /// through each sample's taken action.
    pub fn loss(&self, states: &StateBatch, actions: &[usize], targets: &[f64]) -> f64 {
        let q = self.forward_online(states);
        let mut loss = 0.0;
        for b in 0..states.batch {
            let diff = targets[b] - q[[b, actions[b]]];
            loss += diff * diff;
        }
        loss / states.batch as f64
    }

    /// Loss plus its exact gradient w.r.t. the online parameters, as one
    /// flat vector matching the parameter layout.
    pub fn loss_and_gradient(
        &self,
        states: &StateBatch,
        actions: &[usize],
        targets: &[f64],
    ) -> (f64, Vec<f64>) {
        assert_eq!(states.batch, actions.len());
        assert_eq!(states.batch, targets.len());
        let batch = states.batch;

        let (q, mut grad, cache_fnn, cache_lstm) = match self.cfg.arch {
            Architecture::Fnn { .. } => {
                let cache = fnn::forward(&self.cfg, &self.segments, &self.theta, &states.one_hot_flat());
                let q = cache.q.clone();
                (q, vec![0.0; self.theta.len()], Some(cache), None)
            }
            Architecture::Rnn => {
                let cache = lstm::forward(&self.cfg, &self.segments, &self.theta, states);
                let q = cache.q.clone();
                (q, vec![0.0; self.theta.len()], None, Some(cache))
            }
        };

        let mut loss = 0.0;
        let mut dq = Array2::zeros((batch, self.cfg.outputs));
        for b in 0..batch {
            let diff = q[[b, actions[b]]] - targets[b];
            loss += diff * diff;
            dq[[b, actions[b]]] = 2.0 * diff / batch as f64;
        }
        loss /= batch as f64;

        match self.cfg.arch {
            Architecture::Fnn { .. } => fnn::backward(
                &self.cfg,
                &self.segments,
                &self.theta,
                &cache_fnn.unwrap(),
                &dq,
                &mut grad,
            ),
            Architecture::Rnn => lstm::backward(
                &self.cfg,
                &self.segments,
                &self.theta,
                &cache_lstm.unwrap(),
                states,
                &dq,
                &mut grad,
            ),
        }
        (loss, grad)
    }

    /// Serialize shapes and both parameter vectors; bit-exact round trip.
    pub fn save<W: Write>(&self, mut w: W) -> Result<(), CheckpointError> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        let (arch_tag, depth) = match self.cfg.arch {
            Architecture::Fnn { hidden_layers } => (0u8, hidden_layers as u32),
            Architecture::Rnn => (1u8, 0),
        };
        w.write_all(&[arch_tag])?;
        w.write_all(&depth.to_le_bytes())?;
        w.write_all(&(self.cfg.history_len as u32).to_le_bytes())?;
        w.write_all(&(self.cfg.hidden_width as u32).to_le_bytes())?;
        w.write_all(&(self.cfg.outputs as u32).to_le_bytes())?;
        w.write_all(&(self.theta.len() as u64).to_le_bytes())?;
        for vec in [&self.theta, &self.target] {
            for v in vec {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load<R: Read>(mut r: R) -> Result<QNetwork, CheckpointError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = read_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::BadVersion(version));
        }
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        let depth = read_u32(&mut r)? as usize;
        let arch = match tag[0] {
            0 => Architecture::Fnn {
                hidden_layers: depth,
            },
            1 => Architecture::Rnn,
            t => return Err(CheckpointError::Corrupt(format!("unknown arch tag {t}"))),
        };
        let cfg = NetConfig {
            arch,
            history_len: read_u32(&mut r)? as usize,
            hidden_width: read_u32(&mut r)? as usize,
            outputs: read_u32(&mut r)? as usize,
        };
        let segments = build_layout(&cfg);
        let total: usize = segments.iter().map(Segment::len).sum();
        let mut count = [0u8; 8];
        r.read_exact(&mut count)?;
        if u64::from_le_bytes(count) as usize != total {
            return Err(CheckpointError::Corrupt(format!(
                "parameter count mismatch: header {} vs layout {}",
                u64::from_le_bytes(count),
                total
            )));
        }
        let mut read_vec = || -> Result<Vec<f64>, CheckpointError> {
            let mut out = Vec::with_capacity(total);
            let mut buf = [0u8; 8];
            for _ in 0..total {
                r.read_exact(&mut buf)?;
                out.push(f64::from_le_bytes(buf));
            }
            Ok(out)
        };
        let theta = read_vec()?;
        let target = read_vec()?;
        Ok(QNetwork {
            cfg,
            segments,
            theta,
            target,
        })
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, CheckpointError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    /// Central finite differences on the minibatch loss; the independent
    /// oracle for gradient checks.
    pub fn finite_difference_gradient(
        net: &mut QNetwork,
        states: &StateBatch,
        actions: &[usize],
        targets: &[f64],
        delta: f64,
    ) -> Vec<f64> {
        let n = net.num_params();
        let mut grad = vec![0.0; n];
        for k in 0..n {
            let orig = net.theta()[k];
            net.theta_mut()[k] = orig + delta;
            let plus = net.loss(states, actions, targets);
            net.theta_mut()[k] = orig - delta;
            let minus = net.loss(states, actions, targets);
            net.theta_mut()[k] = orig;
            grad[k] = (plus - minus) / (2.0 * delta);
        }
        grad
    }

    /// Max relative error between analytic and numeric gradients, with a
    /// floor on the denominator so near-zero pairs compare absolutely.
    pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
        analytic
            .iter()
            .zip(numeric)
            .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
            .fold(0.0, f64::max)
    }

    pub fn random_problem(
        net: &QNetwork,
        batch: usize,
        seed: u64,
    ) -> (StateBatch, Vec<usize>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = net.config().history_len;
        let rows: Vec<Vec<u8>> = (0..batch)
            .map(|_| (0..m).map(|_| rng.gen_range(0..4u8)).collect())
            .collect();
        let refs: Vec<&[u8]> = rows.iter().map(Vec::as_slice).collect();
        let states = StateBatch::from_rows(&refs);
        let actions: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..2)).collect();
        let targets: Vec<f64> = (0..batch).map(|_| rng.gen_range(-1.0..2.0)).collect();
        (states, actions, targets)
    }
}
