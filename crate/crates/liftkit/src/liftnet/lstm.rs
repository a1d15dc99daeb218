//! LSTM recurrence, dense head, and backpropagation through time.
//!
//! The backward pass runs over the full window with no truncation and
//! produces both parameter gradients (for training) and input gradients
//! (for saliency).

use super::{Model, Result};
use crate::windowing::{Label, Window};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// y = W·x computed from a tensor view into the flat parameter vector.
fn matvec(theta: &[f64], t: &super::Tensor, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), t.cols);
    debug_assert_eq!(y.len(), t.rows);
    for (r, out) in y.iter_mut().enumerate() {
        let row = &theta[t.offset + r * t.cols..t.offset + (r + 1) * t.cols];
        let mut acc = 0.0;
        for (a, b) in row.iter().zip(x) {
            acc += a * b;
        }
        *out = acc;
    }
}

/// x += Wᵀ·dy
fn matvec_transpose_add(theta: &[f64], t: &super::Tensor, dy: &[f64], dx: &mut [f64]) {
    for (r, &d) in dy.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let row = &theta[t.offset + r * t.cols..t.offset + (r + 1) * t.cols];
        for (acc, &w) in dx.iter_mut().zip(row) {
            *acc += w * d;
        }
    }
}

/// grad_W += dy ⊗ x
fn outer_add(grad: &mut [f64], t: &super::Tensor, dy: &[f64], x: &[f64]) {
    for (r, &d) in dy.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let row = &mut grad[t.offset + r * t.cols..t.offset + (r + 1) * t.cols];
        for (g, &v) in row.iter_mut().zip(x) {
            *g += d * v;
        }
    }
}

struct Cache {
    /// Post-activation gates per step, 4H each (i, f, g, o).
    gates: Vec<Vec<f64>>,
    /// Cell state per step.
    cells: Vec<Vec<f64>>,
    tanh_cells: Vec<Vec<f64>>,
    /// Hidden states, index 0 is the initial zero state.
    hidden: Vec<Vec<f64>>,
    /// Post-activation outputs of each dense layer (last entry length 1,
    /// pre-sigmoid logit).
    dense: Vec<Vec<f64>>,
    prob: f64,
}

fn forward_cached(model: &Model, window: &[f64]) -> Cache {
    let h = model.config.lstm_hidden;
    let c = model.config.n_channels;
    let t_steps = model.config.window_len;
    let theta = &model.theta;
    let layout = &model.layout;

    let mut gates = Vec::with_capacity(t_steps);
    let mut cells = Vec::with_capacity(t_steps);
    let mut tanh_cells = Vec::with_capacity(t_steps);
    let mut hidden = vec![vec![0.0; h]];
    let mut cell = vec![0.0; h];

    let mut pre = vec![0.0; 4 * h];
    let mut rec = vec![0.0; 4 * h];
    for step in 0..t_steps {
        let x = &window[step * c..(step + 1) * c];
        matvec(theta, &layout.w_ih, x, &mut pre);
        matvec(theta, &layout.w_hh, hidden.last().unwrap(), &mut rec);
        let bias = &theta[layout.b.offset..layout.b.offset + 4 * h];
        let mut gate = vec![0.0; 4 * h];
        for j in 0..4 * h {
            let a = pre[j] + rec[j] + bias[j];
            gate[j] = if (2 * h..3 * h).contains(&j) { a.tanh() } else { sigmoid(a) };
        }
        let mut next_cell = vec![0.0; h];
        let mut tanh_cell = vec![0.0; h];
        let mut next_hidden = vec![0.0; h];
        for j in 0..h {
            next_cell[j] = gate[h + j] * cell[j] + gate[j] * gate[2 * h + j];
            tanh_cell[j] = next_cell[j].tanh();
            next_hidden[j] = gate[3 * h + j] * tanh_cell[j];
        }
        gates.push(gate);
        cells.push(next_cell.clone());
        tanh_cells.push(tanh_cell);
        hidden.push(next_hidden);
        cell = next_cell;
    }

    // dense head: ReLU hidden layers, sigmoid output
    let mut dense = Vec::with_capacity(layout.dense.len());
    let mut act = hidden.last().unwrap().clone();
    for (l, (w, b)) in layout.dense.iter().enumerate() {
        let mut out = vec![0.0; w.rows];
        matvec(theta, w, &act, &mut out);
        for (j, v) in out.iter_mut().enumerate() {
            *v += theta[b.offset + j];
            if l + 1 < layout.dense.len() {
                *v = v.max(0.0);
            }
        }
        dense.push(out.clone());
        act = out;
    }
    let prob = sigmoid(dense.last().unwrap()[0]);
    Cache { gates, cells, tanh_cells, hidden, dense, prob }
}

/// Probability that the window is a lift, strictly inside (0, 1).
pub fn forward(model: &Model, window: &[f64]) -> Result<f64> {
    model.check_window(window)?;
    Ok(forward_cached(model, window).prob)
}

/// Pre-sigmoid output, for saturation-robust saliency.
pub fn forward_logit(model: &Model, window: &[f64]) -> Result<f64> {
    model.check_window(window)?;
    Ok(forward_cached(model, window).dense.last().unwrap()[0])
}

/// Backpropagates `dlogit` (gradient at the pre-sigmoid output) through the
/// whole network, accumulating parameter gradients into `grad` and returning
/// the gradient w.r.t. the input window.
fn backward(model: &Model, window: &[f64], cache: &Cache, dlogit: f64, grad: &mut [f64]) -> Vec<f64> {
    let h = model.config.lstm_hidden;
    let c = model.config.n_channels;
    let t_steps = model.config.window_len;
    let theta = &model.theta;
    let layout = &model.layout;

    // dense head, output layer first
    let n_dense = layout.dense.len();
    let mut delta = vec![dlogit];
    for l in (0..n_dense).rev() {
        let (w, b) = &layout.dense[l];
        let input: &[f64] =
            if l == 0 { cache.hidden.last().unwrap() } else { &cache.dense[l - 1] };
        for (j, &d) in delta.iter().enumerate() {
            grad[b.offset + j] += d;
        }
        outer_add(grad, w, &delta, input);
        let mut d_input = vec![0.0; w.cols];
        matvec_transpose_add(theta, w, &delta, &mut d_input);
        if l > 0 {
            // ReLU mask of the previous layer's output
            for (v, &a) in d_input.iter_mut().zip(&cache.dense[l - 1]) {
                if a <= 0.0 {
                    *v = 0.0;
                }
            }
        }
        delta = d_input;
    }

    // BPTT
    let mut d_hidden = delta; // gradient into h_T
    let mut d_cell = vec![0.0; h];
    let mut d_input = vec![0.0; t_steps * c];
    let mut d_gate = vec![0.0; 4 * h];
    for step in (0..t_steps).rev() {
        let gate = &cache.gates[step];
        let tanh_cell = &cache.tanh_cells[step];
        let cell_prev: &[f64] = if step == 0 { &[] } else { &cache.cells[step - 1] };
        for j in 0..h {
            let (i, f, g, o) = (gate[j], gate[h + j], gate[2 * h + j], gate[3 * h + j]);
            let dh = d_hidden[j];
            let d_o = dh * tanh_cell[j];
            let dc = d_cell[j] + dh * o * (1.0 - tanh_cell[j] * tanh_cell[j]);
            let d_i = dc * g;
            let d_g = dc * i;
            let cp = if step == 0 { 0.0 } else { cell_prev[j] };
            let d_f = dc * cp;
            d_cell[j] = dc * f;
            d_gate[j] = d_i * i * (1.0 - i);
            d_gate[h + j] = d_f * f * (1.0 - f);
            d_gate[2 * h + j] = d_g * (1.0 - g * g);
            d_gate[3 * h + j] = d_o * o * (1.0 - o);
        }
        let x = &window[step * c..(step + 1) * c];
        let h_prev = &cache.hidden[step];
        outer_add(grad, &layout.w_ih, &d_gate, x);
        outer_add(grad, &layout.w_hh, &d_gate, h_prev);
        for (j, &d) in d_gate.iter().enumerate() {
            grad[layout.b.offset + j] += d;
        }
        matvec_transpose_add(theta, &layout.w_ih, &d_gate, &mut d_input[step * c..(step + 1) * c]);
        d_hidden = vec![0.0; h];
        matvec_transpose_add(theta, &layout.w_hh, &d_gate, &mut d_hidden);
    }
    d_input
}

/// Mean loss gradient over a batch w.r.t. every parameter, via BPTT. The
/// gradient at the pre-sigmoid output is the exact `p − y` of binary
/// cross-entropy composed with the sigmoid.
pub fn gradients(model: &Model, batch: &[Window]) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(super::LiftnetError::Input("empty batch".into()));
    }
    let mut grad = vec![0.0; model.n_params()];
    for window in batch {
        model.check_window(&window.data)?;
        let cache = forward_cached(model, &window.data);
        let y = match window.label {
            Label::Lift => 1.0,
            Label::NonLift => 0.0,
        };
        backward(model, &window.data, &cache, cache.prob - y, &mut grad);
    }
    let n = batch.len() as f64;
    for g in &mut grad {
        *g /= n;
    }
    Ok(grad)
}

/// Which output the input gradient is taken at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientTarget {
    /// ∂(sigmoid probability)/∂input.
    Probability,
    /// ∂(pre-sigmoid logit)/∂input; immune to sigmoid saturation.
    Logit,
}

/// Gradient of the model output w.r.t. every input element, row-major
/// time × channel. The backbone of saliency mapping.
pub fn input_gradient(model: &Model, window: &[f64], target: GradientTarget) -> Result<Vec<f64>> {
    model.check_window(window)?;
    let cache = forward_cached(model, window);
    let dlogit = match target {
        GradientTarget::Probability => cache.prob * (1.0 - cache.prob),
        GradientTarget::Logit => 1.0,
    };
    let mut scratch = vec![0.0; model.n_params()];
    Ok(backward(model, window, &cache, dlogit, &mut scratch))
}
