//! Dense feedforward Q-network: `h` ReLU hidden layers over the
//! flattened one-hot history, linear two-output head.

use super::{NetConfig, Segment};
use ndarray::Array2;

pub struct FnnCache {
    /// Layer inputs: `activations[0]` is the one-hot input, then each
    /// post-ReLU hidden activation.
    pub activations: Vec<Array2<f64>>,
    pub q: Array2<f64>,
}

fn depth(cfg: &NetConfig) -> usize {
    match cfg.arch {
        super::Architecture::Fnn { hidden_layers } => hidden_layers,
        _ => unreachable!("fnn path invoked for non-fnn architecture"),
    }
}

pub fn forward(cfg: &NetConfig, segments: &[Segment], params: &[f64], x: &Array2<f64>) -> FnnCache {
    let h = depth(cfg);
    let mut activations = Vec::with_capacity(h + 1);
    activations.push(x.clone());
    for l in 0..h {
        let w = segments[2 * l].view(params);
        let b = segments[2 * l + 1].slice(params);
        let mut z = activations[l].dot(&w);
        for mut row in z.rows_mut() {
            for (v, &bias) in row.iter_mut().zip(b) {
                *v = (*v + bias).max(0.0);
            }
        }
        activations.push(z);
    }
    let w = segments[2 * h].view(params);
    let b = segments[2 * h + 1].slice(params);
    let mut q = activations[h].dot(&w);
    for mut row in q.rows_mut() {
        for (v, &bias) in row.iter_mut().zip(b) {
            *v += bias;
        }
    }
    FnnCache { activations, q }
}

pub fn backward(
    cfg: &NetConfig,
    segments: &[Segment],
    params: &[f64],
    cache: &FnnCache,
    dq: &Array2<f64>,
    grad: &mut [f64],
) {
    let h = depth(cfg);

    let copy_into = |seg: &Segment, m: &Array2<f64>, grad: &mut [f64]| {
        debug_assert_eq!(m.len(), seg.len());
        seg.slice_mut(grad)
            .iter_mut()
            .zip(m.iter())
            .for_each(|(dst, &src)| *dst = src);
    };

    // head
    let dw = cache.activations[h].t().dot(dq);
    copy_into(&segments[2 * h], &dw, grad);
    let db = dq.sum_axis(ndarray::Axis(0));
    segments[2 * h + 1]
        .slice_mut(grad)
        .copy_from_slice(db.as_slice().unwrap());
    let mut delta = dq.dot(&segments[2 * h].view(params).t());

    for l in (0..h).rev() {
        // ReLU gate: activation > 0 passes gradient
        delta.zip_mut_with(&cache.activations[l + 1], |d, &a| {
            if a <= 0.0 {
                *d = 0.0;
            }
        });
        let dw = cache.activations[l].t().dot(&delta);
        copy_into(&segments[2 * l], &dw, grad);
        let db = delta.sum_axis(ndarray::Axis(0));
        segments[2 * l + 1]
            .slice_mut(grad)
            .copy_from_slice(db.as_slice().unwrap());
        if l > 0 {
            delta = delta.dot(&segments[2 * l].view(params).t());
        }
    }
}
