//! The from-scratch neural core: LSTM cell, bidirectional encoder, dropout,
//! sigmoid output and exact backpropagation through time.
//!
//! The classifier encodes a sequence with one forward and one backward LSTM
//! pass (independent parameters), concatenates the two final hidden states,
//! applies inverted dropout to that 2H representation in train mode, and maps
//! it through a sigmoid unit. Everything is double precision; gradients are
//! analytic and verified against finite differences.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};

/// Dense row-major matrix. Serializes as nested arrays (rows of floats).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// All entries drawn uniformly from [-s, s).
    pub fn uniform(rows: usize, cols: usize, s: f64, rng: &mut impl Rng) -> Self {
        Self {
            rows,
            cols,
            data: (0..rows * cols).map(|_| rng.random_range(-s..s)).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// y = M·x.
    fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    /// out += Mᵀ·a.
    fn tr_mul_vec_add(&self, a: &[f64], out: &mut [f64]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (r, &ar) in a.iter().enumerate() {
            for (o, m) in out.iter_mut().zip(self.row(r)) {
                *o += ar * m;
            }
        }
    }

    /// M += a·bᵀ.
    fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        for (r, &ar) in a.iter().enumerate() {
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (m, &bc) in row.iter_mut().zip(b) {
                *m += ar * bc;
            }
        }
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        (0..m.rows).map(|r| m.row(r).to_vec()).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = String;

    fn try_from(rows: Vec<Vec<f64>>) -> std::result::Result<Self, String> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(format!(
                    "ragged matrix: row 0 has {n_cols} columns, row {i} has {}",
                    row.len()
                ));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: n_rows,
            cols: n_cols,
            data,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Parameters of one LSTM direction. The same shape tree doubles as the
/// gradient container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionParams {
    pub w_i: Matrix,
    pub w_f: Matrix,
    pub w_o: Matrix,
    pub w_g: Matrix,
    pub u_i: Matrix,
    pub u_f: Matrix,
    pub u_o: Matrix,
    pub u_g: Matrix,
    pub b_i: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_o: Vec<f64>,
    pub b_g: Vec<f64>,
}

impl DirectionParams {
    fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            w_i: Matrix::zeros(hidden_dim, input_dim),
            w_f: Matrix::zeros(hidden_dim, input_dim),
            w_o: Matrix::zeros(hidden_dim, input_dim),
            w_g: Matrix::zeros(hidden_dim, input_dim),
            u_i: Matrix::zeros(hidden_dim, hidden_dim),
            u_f: Matrix::zeros(hidden_dim, hidden_dim),
            u_o: Matrix::zeros(hidden_dim, hidden_dim),
            u_g: Matrix::zeros(hidden_dim, hidden_dim),
            b_i: vec![0.0; hidden_dim],
            b_f: vec![0.0; hidden_dim],
            b_o: vec![0.0; hidden_dim],
            b_g: vec![0.0; hidden_dim],
        }
    }

    fn init(input_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> Self {
        let s = 1.0 / (hidden_dim as f64).sqrt();
        Self {
            w_i: Matrix::uniform(hidden_dim, input_dim, s, rng),
            w_f: Matrix::uniform(hidden_dim, input_dim, s, rng),
            w_o: Matrix::uniform(hidden_dim, input_dim, s, rng),
            w_g: Matrix::uniform(hidden_dim, input_dim, s, rng),
            u_i: Matrix::uniform(hidden_dim, hidden_dim, s, rng),
            u_f: Matrix::uniform(hidden_dim, hidden_dim, s, rng),
            u_o: Matrix::uniform(hidden_dim, hidden_dim, s, rng),
            u_g: Matrix::uniform(hidden_dim, hidden_dim, s, rng),
            b_i: vec![0.0; hidden_dim],
            // Forget gate starts open so early gradients flow through time.
            b_f: vec![1.0; hidden_dim],
            b_o: vec![0.0; hidden_dim],
            b_g: vec![0.0; hidden_dim],
        }
    }

    fn shapes_ok(&self, input_dim: usize, hidden_dim: usize) -> bool {
        let w = |m: &Matrix| m.rows == hidden_dim && m.cols == input_dim;
        let u = |m: &Matrix| m.rows == hidden_dim && m.cols == hidden_dim;
        let b = |v: &Vec<f64>| v.len() == hidden_dim;
        w(&self.w_i)
            && w(&self.w_f)
            && w(&self.w_o)
            && w(&self.w_g)
            && u(&self.u_i)
            && u(&self.u_f)
            && u(&self.u_o)
            && u(&self.u_g)
            && b(&self.b_i)
            && b(&self.b_f)
            && b(&self.b_o)
            && b(&self.b_g)
    }

    fn tensors(&self) -> [&[f64]; 12] {
        [
            self.w_i.data(),
            self.w_f.data(),
            self.w_o.data(),
            self.w_g.data(),
            self.u_i.data(),
            self.u_f.data(),
            self.u_o.data(),
            self.u_g.data(),
            &self.b_i,
            &self.b_f,
            &self.b_o,
            &self.b_g,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut [f64]; 12] {
        [
            self.w_i.data_mut(),
            self.w_f.data_mut(),
            self.w_o.data_mut(),
            self.w_g.data_mut(),
            self.u_i.data_mut(),
            self.u_f.data_mut(),
            self.u_o.data_mut(),
            self.u_g.data_mut(),
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_o,
            &mut self.b_g,
        ]
    }
}

/// All trainable parameters of the classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub dropout_p: f64,
    pub fwd: DirectionParams,
    pub bwd: DirectionParams,
    /// Output weights over the concatenated [h_fwd; h_bwd] representation.
    pub w_out: Vec<f64>,
    pub b_out: f64,
}

impl ModelParams {
    /// Fresh parameters: weights uniform in [-s, s) with s = 1/√H, biases 0,
    /// forget-gate biases 1.
    pub fn init(input_dim: usize, hidden_dim: usize, dropout_p: f64, rng: &mut impl Rng) -> Self {
        let s = 1.0 / (hidden_dim as f64).sqrt();
        Self {
            input_dim,
            hidden_dim,
            dropout_p,
            fwd: DirectionParams::init(input_dim, hidden_dim, rng),
            bwd: DirectionParams::init(input_dim, hidden_dim, rng),
            w_out: (0..2 * hidden_dim)
                .map(|_| rng.random_range(-s..s))
                .collect(),
            b_out: 0.0,
        }
    }

    /// Checks shape consistency, dropout domain and finiteness.
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::Shape("input_dim and hidden_dim must be ≥ 1".into()));
        }
        if !self.fwd.shapes_ok(self.input_dim, self.hidden_dim)
            || !self.bwd.shapes_ok(self.input_dim, self.hidden_dim)
            || self.w_out.len() != 2 * self.hidden_dim
        {
            return Err(Error::Shape(format!(
                "parameter shapes inconsistent with input_dim={} hidden_dim={}",
                self.input_dim, self.hidden_dim
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::InvalidArgument(format!(
                "dropout_p must be in [0, 1), got {}",
                self.dropout_p
            )));
        }
        let finite = self
            .tensor_list()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::NonFinite("model parameters".into()));
        }
        Ok(())
    }

    /// All parameter tensors as slices, in a fixed canonical order shared with
    /// [`Gradients::tensor_list`].
    pub fn tensor_list(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(26);
        out.extend(self.fwd.tensors());
        out.extend(self.bwd.tensors());
        out.push(&self.w_out);
        out.push(std::slice::from_ref(&self.b_out));
        out
    }

    /// Mutable view of all parameter tensors, same order as [`Self::tensor_list`].
    pub fn tensor_list_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(26);
        out.extend(self.fwd.tensors_mut());
        out.extend(self.bwd.tensors_mut());
        out.push(&mut self.w_out);
        out.push(std::slice::from_mut(&mut self.b_out));
        out
    }

    pub fn n_slots(&self) -> usize {
        self.tensor_list().iter().map(|t| t.len()).sum()
    }
}

/// Gradient of the loss with respect to every parameter in [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub fwd: DirectionParams,
    pub bwd: DirectionParams,
    pub w_out: Vec<f64>,
    pub b_out: f64,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            fwd: DirectionParams::zeros(params.input_dim, params.hidden_dim),
            bwd: DirectionParams::zeros(params.input_dim, params.hidden_dim),
            w_out: vec![0.0; params.w_out.len()],
            b_out: 0.0,
        }
    }

    /// Same canonical tensor order as [`ModelParams::tensor_list`].
    pub fn tensor_list(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(26);
        out.extend(self.fwd.tensors());
        out.extend(self.bwd.tensors());
        out.push(&self.w_out);
        out.push(std::slice::from_ref(&self.b_out));
        out
    }

    pub fn tensor_list_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(26);
        out.extend(self.fwd.tensors_mut());
        out.extend(self.bwd.tensors_mut());
        out.push(&mut self.w_out);
        out.push(std::slice::from_mut(&mut self.b_out));
        out
    }

    /// self += other, slot by slot.
    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensor_list_mut().into_iter().zip(other.tensor_list()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    /// Multiplies every slot by `s` (used for mini-batch averaging).
    pub fn scale(&mut self, s: f64) {
        for t in self.tensor_list_mut() {
            for x in t {
                *x *= s;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensor_list()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Binary cross-entropy with the probability clamped to [ε, 1−ε], ε = 1e-12.
pub fn bce_loss(p: f64, y: u8) -> f64 {
    const EPS: f64 = 1e-12;
    let p = p.clamp(EPS, 1.0 - EPS);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// One LSTM cell update: i=σ(W_i x+U_i h+b_i), f, o analogous, g=tanh(…),
/// c_t = f⊙c_prev + i⊙g, h_t = o⊙tanh(c_t).
pub fn lstm_step(
    dir: &DirectionParams,
    x_t: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let hidden = dir.b_i.len();
    if dir.w_i.cols() != x_t.len() || h_prev.len() != hidden || c_prev.len() != hidden {
        return Err(Error::Shape(format!(
            "lstm_step: x len {} (want {}), h len {} / c len {} (want {hidden})",
            x_t.len(),
            dir.w_i.cols(),
            h_prev.len(),
            c_prev.len(),
        )));
    }
    let step = cell_step(dir, x_t, h_prev, c_prev);
    Ok((step.h, step.c))
}

/// Per-step activations cached for backpropagation.
struct StepTrace {
    i: Vec<f64>,
    f: Vec<f64>,
    o: Vec<f64>,
    g: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

fn cell_step(dir: &DirectionParams, x_t: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepTrace {
    let gate = |w: &Matrix, u: &Matrix, b: &[f64]| -> Vec<f64> {
        let mut a = w.mul_vec(x_t);
        let rec = u.mul_vec(h_prev);
        for ((av, rv), bv) in a.iter_mut().zip(&rec).zip(b) {
            *av += rv + bv;
        }
        a
    };
    let i: Vec<f64> = gate(&dir.w_i, &dir.u_i, &dir.b_i)
        .iter()
        .map(|&z| sigmoid(z))
        .collect();
    let f: Vec<f64> = gate(&dir.w_f, &dir.u_f, &dir.b_f)
        .iter()
        .map(|&z| sigmoid(z))
        .collect();
    let o: Vec<f64> = gate(&dir.w_o, &dir.u_o, &dir.b_o)
        .iter()
        .map(|&z| sigmoid(z))
        .collect();
    let g: Vec<f64> = gate(&dir.w_g, &dir.u_g, &dir.b_g)
        .iter()
        .map(|&z| z.tanh())
        .collect();
    let c: Vec<f64> = f
        .iter()
        .zip(c_prev)
        .zip(i.iter().zip(&g))
        .map(|((fv, cp), (iv, gv))| fv * cp + iv * gv)
        .collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = o.iter().zip(&tanh_c).map(|(ov, tc)| ov * tc).collect();
    StepTrace {
        i,
        f,
        o,
        g,
        c,
        tanh_c,
        h,
    }
}

/// Runs one direction over the rows of `xs` in the given index order,
/// starting from the zero state. Returns all step traces in processing order.
fn run_direction(
    dir: &DirectionParams,
    xs: &[Vec<f64>],
    order: impl Iterator<Item = usize>,
    hidden: usize,
) -> Vec<StepTrace> {
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    let mut traces = Vec::with_capacity(xs.len());
    for idx in order {
        let step = cell_step(dir, &xs[idx], &h, &c);
        h.clone_from(&step.h);
        c.clone_from(&step.c);
        traces.push(step);
    }
    traces
}

fn check_input(params: &ModelParams, x: &[Vec<f64>]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::Shape("cannot encode an empty sequence".into()));
    }
    for (t, row) in x.iter().enumerate() {
        if row.len() != params.input_dim {
            return Err(Error::Shape(format!(
                "input row {t} has width {} but the model expects {}",
                row.len(),
                params.input_dim
            )));
        }
    }
    Ok(())
}

/// Encodes a sequence as the concatenation of the forward direction's final
/// hidden state and the backward direction's final hidden state (which
/// corresponds to the first token).
pub fn bilstm_encode(params: &ModelParams, x: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_input(params, x)?;
    let hidden = params.hidden_dim;
    let fwd = run_direction(&params.fwd, x, 0..x.len(), hidden);
    let bwd = run_direction(&params.bwd, x, (0..x.len()).rev(), hidden);
    let mut r = Vec::with_capacity(2 * hidden);
    r.extend_from_slice(&fwd.last().expect("nonempty").h);
    r.extend_from_slice(&bwd.last().expect("nonempty").h);
    Ok(r)
}

/// Encodes a padded sequence, ignoring rows at index ≥ `len`. Bit-identical
/// to [`bilstm_encode`] on the unpadded prefix.
pub fn bilstm_encode_padded(params: &ModelParams, x: &[Vec<f64>], len: usize) -> Result<Vec<f64>> {
    if len == 0 || len > x.len() {
        return Err(Error::Shape(format!(
            "padded length {len} outside 1..={}",
            x.len()
        )));
    }
    bilstm_encode(params, &x[..len])
}

/// Inverted-dropout mask over the 2H representation: dropped slots read 0,
/// kept slots are scaled by 1/(1−p) so eval needs no rescaling.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    keep: Vec<bool>,
    scale: f64,
}

impl DropoutMask {
    /// The no-op mask used in eval mode and gradient checking.
    pub fn identity(len: usize) -> Self {
        Self {
            keep: vec![true; len],
            scale: 1.0,
        }
    }

    /// Each slot is dropped independently with probability `p`.
    pub fn sample(len: usize, p: f64, rng: &mut impl Rng) -> Self {
        Self {
            keep: (0..len).map(|_| rng.random::<f64>() >= p).collect(),
            scale: 1.0 / (1.0 - p),
        }
    }

    pub fn len(&self) -> usize {
        self.keep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keep.is_empty()
    }

    /// Elementwise mask: v ↦ v·scale on kept slots, 0 on dropped slots.
    fn factor(&self, idx: usize) -> f64 {
        if self.keep[idx] {
            self.scale
        } else {
            0.0
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(idx, x)| x * self.factor(idx))
            .collect()
    }
}

/// Forward/eval mode switch for [`forward`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Full forward pass: encode, (train-mode) dropout, sigmoid output.
pub fn forward(
    params: &ModelParams,
    x: &[Vec<f64>],
    mode: Mode,
    rng: &mut impl Rng,
) -> Result<f64> {
    let mask = match mode {
        Mode::Train => DropoutMask::sample(2 * params.hidden_dim, params.dropout_p, rng),
        Mode::Eval => DropoutMask::identity(2 * params.hidden_dim),
    };
    forward_with_mask(params, x, &mask)
}

/// Forward pass under an explicit dropout mask (identity mask = eval mode).
pub fn forward_with_mask(params: &ModelParams, x: &[Vec<f64>], mask: &DropoutMask) -> Result<f64> {
    if mask.len() != 2 * params.hidden_dim {
        return Err(Error::Shape(format!(
            "dropout mask has {} slots, representation has {}",
            mask.len(),
            2 * params.hidden_dim
        )));
    }
    let r = bilstm_encode(params, x)?;
    let rm = mask.apply(&r);
    let p = sigmoid(dot(&params.w_out, &rm) + params.b_out);
    if !p.is_finite() {
        return Err(Error::NonFinite("forward probability".into()));
    }
    Ok(p)
}

/// Deterministic eval-mode probability (no dropout).
pub fn predict_prob(params: &ModelParams, x: &[Vec<f64>]) -> Result<f64> {
    forward_with_mask(params, x, &DropoutMask::identity(2 * params.hidden_dim))
}

/// Loss and exact gradients for one example, under the same dropout mask that
/// the corresponding train-mode forward pass used.
pub fn backward(
    params: &ModelParams,
    x: &[Vec<f64>],
    y: u8,
    mask: &DropoutMask,
) -> Result<(f64, Gradients)> {
    check_input(params, x)?;
    if mask.len() != 2 * params.hidden_dim {
        return Err(Error::Shape(format!(
            "dropout mask has {} slots, representation has {}",
            mask.len(),
            2 * params.hidden_dim
        )));
    }
    let hidden = params.hidden_dim;
    let l = x.len();
    let fwd_traces = run_direction(&params.fwd, x, 0..l, hidden);
    let bwd_traces = run_direction(&params.bwd, x, (0..l).rev(), hidden);

    let mut r = Vec::with_capacity(2 * hidden);
    r.extend_from_slice(&fwd_traces[l - 1].h);
    r.extend_from_slice(&bwd_traces[l - 1].h);
    let rm = mask.apply(&r);
    let z = dot(&params.w_out, &rm) + params.b_out;
    let p = sigmoid(z);
    let loss = bce_loss(p, y);
    if !loss.is_finite() {
        return Err(Error::NonFinite("training loss".into()));
    }

    let mut grads = Gradients::zeros_like(params);

    // Output layer: d loss / d z = p − y for sigmoid + BCE.
    let dz = p - f64::from(y);
    grads.b_out = dz;
    for (gw, &rv) in grads.w_out.iter_mut().zip(&rm) {
        *gw = dz * rv;
    }
    // Through the dropout mask back to the raw representation.
    let dr: Vec<f64> = (0..2 * hidden)
        .map(|idx| dz * params.w_out[idx] * mask.factor(idx))
        .collect();

    bptt_direction(
        &params.fwd,
        &mut grads.fwd,
        x,
        &fwd_traces,
        &(0..l).collect::<Vec<_>>(),
        &dr[..hidden],
    );
    bptt_direction(
        &params.bwd,
        &mut grads.bwd,
        x,
        &bwd_traces,
        &(0..l).rev().collect::<Vec<_>>(),
        &dr[hidden..],
    );

    if !grads.is_finite() {
        return Err(Error::NonFinite("gradients".into()));
    }
    Ok((loss, grads))
}

/// Backpropagation through time for one direction. `order[s]` is the input row
/// consumed at processing step `s`; `dh_last` is the loss gradient at the final
/// hidden state.
fn bptt_direction(
    dir: &DirectionParams,
    grads: &mut DirectionParams,
    x: &[Vec<f64>],
    traces: &[StepTrace],
    order: &[usize],
    dh_last: &[f64],
) {
    let hidden = dh_last.len();
    let zeros = vec![0.0; hidden];
    let mut dh = dh_last.to_vec();
    let mut dc = vec![0.0; hidden];

    for s in (0..traces.len()).rev() {
        let tr = &traces[s];
        let x_t = &x[order[s]];
        let (h_prev, c_prev) = if s == 0 {
            (&zeros, &zeros)
        } else {
            (&traces[s - 1].h, &traces[s - 1].c)
        };

        // h = o ⊙ tanh(c): split dh into the gate and cell paths.
        let mut da_o = vec![0.0; hidden];
        for k in 0..hidden {
            da_o[k] = dh[k] * tr.tanh_c[k] * tr.o[k] * (1.0 - tr.o[k]);
            dc[k] += dh[k] * tr.o[k] * (1.0 - tr.tanh_c[k] * tr.tanh_c[k]);
        }
        // c = f ⊙ c_prev + i ⊙ g.
        let mut da_i = vec![0.0; hidden];
        let mut da_f = vec![0.0; hidden];
        let mut da_g = vec![0.0; hidden];
        for k in 0..hidden {
            da_i[k] = dc[k] * tr.g[k] * tr.i[k] * (1.0 - tr.i[k]);
            da_f[k] = dc[k] * c_prev[k] * tr.f[k] * (1.0 - tr.f[k]);
            da_g[k] = dc[k] * tr.i[k] * (1.0 - tr.g[k] * tr.g[k]);
        }

        grads.w_i.add_outer(&da_i, x_t);
        grads.w_f.add_outer(&da_f, x_t);
        grads.w_o.add_outer(&da_o, x_t);
        grads.w_g.add_outer(&da_g, x_t);
        grads.u_i.add_outer(&da_i, h_prev);
        grads.u_f.add_outer(&da_f, h_prev);
        grads.u_o.add_outer(&da_o, h_prev);
        grads.u_g.add_outer(&da_g, h_prev);
        for k in 0..hidden {
            grads.b_i[k] += da_i[k];
            grads.b_f[k] += da_f[k];
            grads.b_o[k] += da_o[k];
            grads.b_g[k] += da_g[k];
        }

        // Propagate to the previous step.
        let mut dh_prev = vec![0.0; hidden];
        dir.u_i.tr_mul_vec_add(&da_i, &mut dh_prev);
        dir.u_f.tr_mul_vec_add(&da_f, &mut dh_prev);
        dir.u_o.tr_mul_vec_add(&da_o, &mut dh_prev);
        dir.u_g.tr_mul_vec_add(&da_g, &mut dh_prev);
        let dc_prev: Vec<f64> = dc.iter().zip(&tr.f).map(|(d, f)| d * f).collect();
        dh = dh_prev;
        dc = dc_prev;
    }
}

/// Serialized model: dimensions, all weights, dropout probability and the
/// training seed that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub seed: u64,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let ckpt: Checkpoint = serde_json::from_reader(std::io::BufReader::new(file))?;
        ckpt.params.validate()?;
        Ok(ckpt)
    }
}
