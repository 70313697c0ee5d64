//! Recurrent Q-network: one LSTM layer consuming the M-symbol history
//! sequentially, then one dense ReLU layer and a linear head. Hidden and
//! cell state start at zero on every call; backpropagation runs through
//! all M time steps.
//!
//! Gate preactivations for the whole batch are computed as one
//! `batch x 4W` matrix per step, blocks ordered `[input, forget, cell,
//! output]`. The one-hot input makes the input-weight product a row
//! lookup into `Wx`.

use super::{NetConfig, Segment, StateBatch};
use ndarray::{s, Array1, Array2, Axis, Zip};

pub const SEG_WX: usize = 0;
pub const SEG_WH: usize = 1;
pub const SEG_B: usize = 2;
pub const SEG_DENSE_W: usize = 3;
pub const SEG_DENSE_B: usize = 4;
pub const SEG_HEAD_W: usize = 5;
pub const SEG_HEAD_B: usize = 6;

struct StepCache {
    /// Post-activation gates, `batch x 4W`.
    gates: Array2<f64>,
    cell: Array2<f64>,
    cell_tanh: Array2<f64>,
    hidden: Array2<f64>,
}

pub struct LstmCache {
    steps: Vec<StepCache>,
    dense: Array2<f64>,
    pub q: Array2<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn forward(
    cfg: &NetConfig,
    segments: &[Segment],
    params: &[f64],
    states: &StateBatch,
) -> LstmCache {
    let w = cfg.hidden_width;
    let batch = states.batch;
    let m = states.history_len;
    let wx = segments[SEG_WX].view(params);
    let wh = segments[SEG_WH].view(params);
    let bias = segments[SEG_B].slice(params);

    let mut hidden = Array2::zeros((batch, w));
    let mut cell: Array2<f64> = Array2::zeros((batch, w));
    let mut steps = Vec::with_capacity(m);

    for k in 0..m {
        let mut pre = hidden.dot(&wh);
        for (b, mut row) in pre.rows_mut().into_iter().enumerate() {
            let x_row = wx.row(states.symbol(b, k));
            for ((v, &bias_j), &x_j) in row.iter_mut().zip(bias).zip(x_row) {
                *v += bias_j + x_j;
            }
        }

        // activate in place: [i f g o] blocks
        let mut gates = pre;
        {
            let (mut ifo_part, mut g_part) = gates.view_mut().split_at(Axis(1), 2 * w);
            ifo_part.mapv_inplace(sigmoid);
            let (mut g_block, mut o_block) = g_part.view_mut().split_at(Axis(1), w);
            g_block.mapv_inplace(f64::tanh);
            o_block.mapv_inplace(sigmoid);
        }

        let i_g = gates.slice(s![.., 0..w]);
        let f_g = gates.slice(s![.., w..2 * w]);
        let g_g = gates.slice(s![.., 2 * w..3 * w]);
        let o_g = gates.slice(s![.., 3 * w..4 * w]);

        let mut new_cell = Array2::zeros((batch, w));
        Zip::from(&mut new_cell)
            .and(&f_g)
            .and(&cell)
            .and(&i_g)
            .and(&g_g)
            .for_each(|c, &f, &c_prev, &i, &g| *c = f * c_prev + i * g);
        let cell_tanh = new_cell.mapv(f64::tanh);
        let mut new_hidden = Array2::zeros((batch, w));
        Zip::from(&mut new_hidden)
            .and(&o_g)
            .and(&cell_tanh)
            .for_each(|h, &o, &ct| *h = o * ct);

        cell = new_cell.clone();
        steps.push(StepCache {
            gates,
            cell: new_cell,
            cell_tanh,
            hidden: new_hidden.clone(),
        });
        hidden = new_hidden;
    }

    // dense ReLU layer on the final hidden state
    let dw = segments[SEG_DENSE_W].view(params);
    let db = segments[SEG_DENSE_B].slice(params);
    let mut dense = hidden.dot(&dw);
    for mut row in dense.rows_mut() {
        for (v, &b) in row.iter_mut().zip(db) {
            *v = (*v + b).max(0.0);
        }
    }

    let hw = segments[SEG_HEAD_W].view(params);
    let hb = segments[SEG_HEAD_B].slice(params);
    let mut q = dense.dot(&hw);
    for mut row in q.rows_mut() {
        for (v, &b) in row.iter_mut().zip(hb) {
            *v += b;
        }
    }

    LstmCache { steps, dense, q }
}

pub fn backward(
    cfg: &NetConfig,
    segments: &[Segment],
    params: &[f64],
    cache: &LstmCache,
    states: &StateBatch,
    dq: &Array2<f64>,
    grad: &mut [f64],
) {
    let w = cfg.hidden_width;
    let batch = states.batch;
    let m = states.history_len;

    // head
    let d_head_w = cache.dense.t().dot(dq);
    segments[SEG_HEAD_W]
        .slice_mut(grad)
        .copy_from_slice(d_head_w.as_slice().unwrap());
    let d_head_b = dq.sum_axis(Axis(0));
    segments[SEG_HEAD_B]
        .slice_mut(grad)
        .copy_from_slice(d_head_b.as_slice().unwrap());

    // dense layer
    let mut d_dense = dq.dot(&segments[SEG_HEAD_W].view(params).t());
    d_dense.zip_mut_with(&cache.dense, |d, &a| {
        if a <= 0.0 {
            *d = 0.0;
        }
    });
    let final_hidden = &cache.steps[m - 1].hidden;
    let d_dense_w = final_hidden.t().dot(&d_dense);
    segments[SEG_DENSE_W]
        .slice_mut(grad)
        .copy_from_slice(d_dense_w.as_slice().unwrap());
    let d_dense_b = d_dense.sum_axis(Axis(0));
    segments[SEG_DENSE_B]
        .slice_mut(grad)
        .copy_from_slice(d_dense_b.as_slice().unwrap());

    // backpropagation through time
    let wh = segments[SEG_WH].view(params);
    let mut d_wx = Array2::<f64>::zeros((crate::agent::SYMBOL_DIM, 4 * w));
    let mut d_wh = Array2::<f64>::zeros((w, 4 * w));
    let mut d_b = Array1::<f64>::zeros(4 * w);
    let mut d_hidden = d_dense.dot(&segments[SEG_DENSE_W].view(params).t());
    let mut d_cell = Array2::<f64>::zeros((batch, w));
    let zeros = Array2::<f64>::zeros((batch, w));

    for k in (0..m).rev() {
        let step = &cache.steps[k];
        let gates = &step.gates;
        let i_g = gates.slice(s![.., 0..w]);
        let f_g = gates.slice(s![.., w..2 * w]);
        let g_g = gates.slice(s![.., 2 * w..3 * w]);
        let o_g = gates.slice(s![.., 3 * w..4 * w]);
        let (cell_prev, hidden_prev) = if k == 0 {
            (&zeros, &zeros)
        } else {
            (&cache.steps[k - 1].cell, &cache.steps[k - 1].hidden)
        };

        // h = o * tanh(c)
        Zip::from(&mut d_cell)
            .and(&d_hidden)
            .and(&o_g)
            .and(&step.cell_tanh)
            .for_each(|dc, &dh, &o, &ct| *dc += dh * o * (1.0 - ct * ct));

        // gate preactivation gradients, assembled as one batch x 4W matrix
        let mut d_gates = Array2::<f64>::zeros((batch, 4 * w));
        {
            let (mut di, rest) = d_gates.view_mut().split_at(Axis(1), w);
            let (mut df, rest) = rest.split_at(Axis(1), w);
            let (mut dg, mut d_o) = rest.split_at(Axis(1), w);
            Zip::from(&mut di)
                .and(&d_cell)
                .and(&g_g)
                .and(&i_g)
                .for_each(|d, &dc, &g, &i| *d = dc * g * i * (1.0 - i));
            Zip::from(&mut df)
                .and(&d_cell)
                .and(cell_prev)
                .and(&f_g)
                .for_each(|d, &dc, &cp, &f| *d = dc * cp * f * (1.0 - f));
            Zip::from(&mut dg)
                .and(&d_cell)
                .and(&i_g)
                .and(&g_g)
                .for_each(|d, &dc, &i, &g| *d = dc * i * (1.0 - g * g));
            Zip::from(&mut d_o)
                .and(&d_hidden)
                .and(&step.cell_tanh)
                .and(&o_g)
                .for_each(|d, &dh, &ct, &o| *d = dh * ct * o * (1.0 - o));
        }

        d_wh += &hidden_prev.t().dot(&d_gates);
        d_b += &d_gates.sum_axis(Axis(0));
        for (b, row) in d_gates.rows().into_iter().enumerate() {
            let mut dst = d_wx.row_mut(states.symbol(b, k));
            dst += &row;
        }

        // into the previous step
        d_hidden = d_gates.dot(&wh.t());
        let mut d_cell_prev = Array2::zeros((batch, w));
        Zip::from(&mut d_cell_prev)
            .and(&d_cell)
            .and(&f_g)
            .for_each(|dcp, &dc, &f| *dcp = dc * f);
        d_cell = d_cell_prev;
    }

    segments[SEG_WX]
        .slice_mut(grad)
        .copy_from_slice(d_wx.as_slice().unwrap());
    segments[SEG_WH]
        .slice_mut(grad)
        .copy_from_slice(d_wh.as_slice().unwrap());
    segments[SEG_B]
        .slice_mut(grad)
        .copy_from_slice(d_b.as_slice().unwrap());
}
