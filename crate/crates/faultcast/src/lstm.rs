//! Two-layer LSTM forecaster with a linear head, trained by mini-batch BPTT.
//!
//! The network maps a window of reduced feature rows (k+1 timesteps) to the
//! reduced feature vector m steps past the window's last row. Everything is
//! written against f64 with explicit gate math so gradients can be verified
//! coordinate-by-coordinate against finite differences.
//!
//! Layout conventions, fixed for both persistence and seeded initialization:
//! gate blocks are concatenated (input, forget, cell, output) along the 4h
//! axis; tensors are initialized in the order given by `TENSOR_NAMES`,
//! row-major within each tensor, all uniform in [-1/sqrt(hidden),
//! +1/sqrt(hidden)].

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, Axis};

use crate::preprocess::WindowSet;
use crate::rng::RngStream;
use crate::telemetry::fmt_f64;
use crate::{Error, Result};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Names of the eight parameter tensors, in initialization and file order.
pub const TENSOR_NAMES: [&str; 8] = [
    "layer1.weight_ih",
    "layer1.weight_hh",
    "layer1.bias",
    "layer2.weight_ih",
    "layer2.weight_hh",
    "layer2.bias",
    "fc.weight",
    "fc.bias",
];

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmConfig {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
}

impl LstmConfig {
    /// Conventional defaults: hidden 32, 50 epochs, batch 64, Adam at 1e-3,
    /// gradient norm clipped to 5.
    pub fn new(input: usize, output: usize) -> Self {
        LstmConfig {
            input,
            hidden: 32,
            output,
            epochs: 50,
            batch_size: 64,
            learning_rate: 1e-3,
            clip_norm: 5.0,
        }
    }
}

/// All learnable parameters. Weight matrices multiply column vectors from the
/// right in math terms; batched code computes `X W^T` row-wise instead.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_ih1: Array2<f64>, // 4h x input
    pub w_hh1: Array2<f64>, // 4h x h
    pub b1: Array1<f64>,    // 4h
    pub w_ih2: Array2<f64>, // 4h x h
    pub w_hh2: Array2<f64>, // 4h x h
    pub b2: Array1<f64>,    // 4h
    pub w_fc: Array2<f64>,  // output x h
    pub b_fc: Array1<f64>,  // output
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        let g = 4 * hidden;
        LstmParams {
            w_ih1: Array2::zeros((g, input)),
            w_hh1: Array2::zeros((g, hidden)),
            b1: Array1::zeros(g),
            w_ih2: Array2::zeros((g, hidden)),
            w_hh2: Array2::zeros((g, hidden)),
            b2: Array1::zeros(g),
            w_fc: Array2::zeros((output, hidden)),
            b_fc: Array1::zeros(output),
        }
    }

    pub fn init(cfg: &LstmConfig, rng: &mut RngStream) -> Self {
        let mut p = Self::zeros(cfg.input, cfg.hidden, cfg.output);
        let bound = 1.0 / libm::sqrt(cfg.hidden as f64);
        for k in 0..TENSOR_NAMES.len() {
            for v in p.slice_mut(k) {
                *v = rng.uniform(-bound, bound);
            }
        }
        p
    }

    pub fn hidden(&self) -> usize {
        self.w_hh1.ncols()
    }

    pub fn input(&self) -> usize {
        self.w_ih1.ncols()
    }

    pub fn output(&self) -> usize {
        self.w_fc.nrows()
    }

    pub fn shape(&self, k: usize) -> (usize, usize) {
        match k {
            0 => self.w_ih1.dim(),
            1 => self.w_hh1.dim(),
            2 => (1, self.b1.len()),
            3 => self.w_ih2.dim(),
            4 => self.w_hh2.dim(),
            5 => (1, self.b2.len()),
            6 => self.w_fc.dim(),
            7 => (1, self.b_fc.len()),
            _ => panic!("tensor index out of range"),
        }
    }

    /// Flat row-major view of tensor number `k` (order of `TENSOR_NAMES`).
    pub fn slice(&self, k: usize) -> &[f64] {
        match k {
            0 => self.w_ih1.as_slice().unwrap(),
            1 => self.w_hh1.as_slice().unwrap(),
            2 => self.b1.as_slice().unwrap(),
            3 => self.w_ih2.as_slice().unwrap(),
            4 => self.w_hh2.as_slice().unwrap(),
            5 => self.b2.as_slice().unwrap(),
            6 => self.w_fc.as_slice().unwrap(),
            7 => self.b_fc.as_slice().unwrap(),
            _ => panic!("tensor index out of range"),
        }
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut [f64] {
        match k {
            0 => self.w_ih1.as_slice_mut().unwrap(),
            1 => self.w_hh1.as_slice_mut().unwrap(),
            2 => self.b1.as_slice_mut().unwrap(),
            3 => self.w_ih2.as_slice_mut().unwrap(),
            4 => self.w_hh2.as_slice_mut().unwrap(),
            5 => self.b2.as_slice_mut().unwrap(),
            6 => self.w_fc.as_slice_mut().unwrap(),
            7 => self.b_fc.as_slice_mut().unwrap(),
            _ => panic!("tensor index out of range"),
        }
    }

    fn global_norm(&self) -> f64 {
        let mut acc = 0.0;
        for k in 0..TENSOR_NAMES.len() {
            for v in self.slice(k) {
                acc += v * v;
            }
        }
        libm::sqrt(acc)
    }

    fn scale(&mut self, factor: f64) {
        for k in 0..TENSOR_NAMES.len() {
            for v in self.slice_mut(k) {
                *v *= factor;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        (0..TENSOR_NAMES.len()).all(|k| self.slice(k).iter().all(|v| v.is_finite()))
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// Per-timestep activations of one layer, kept for the backward pass.
struct LayerCache {
    i: Vec<Array2<f64>>,
    f: Vec<Array2<f64>>,
    g: Vec<Array2<f64>>,
    o: Vec<Array2<f64>>,
    c: Vec<Array2<f64>>,
    h: Vec<Array2<f64>>,
    tanh_c: Vec<Array2<f64>>,
}

impl LayerCache {
    fn with_capacity(t: usize) -> Self {
        LayerCache {
            i: Vec::with_capacity(t),
            f: Vec::with_capacity(t),
            g: Vec::with_capacity(t),
            o: Vec::with_capacity(t),
            c: Vec::with_capacity(t),
            h: Vec::with_capacity(t),
            tanh_c: Vec::with_capacity(t),
        }
    }
}

/// One forward step of one layer for the whole batch. `x` is B x in_dim,
/// returns (h, optionally filled cache entries).
fn layer_step(
    x: &Array2<f64>,
    h_prev: &Array2<f64>,
    c_prev: &Array2<f64>,
    w_ih: &Array2<f64>,
    w_hh: &Array2<f64>,
    bias: &Array1<f64>,
    cache: Option<&mut LayerCache>,
) -> (Array2<f64>, Array2<f64>) {
    let b = x.nrows();
    let hidden = w_hh.ncols();
    let mut pre = bias
        .broadcast((b, 4 * hidden))
        .expect("bias broadcast")
        .to_owned();
    general_mat_mul(1.0, x, &w_ih.t(), 1.0, &mut pre);
    general_mat_mul(1.0, h_prev, &w_hh.t(), 1.0, &mut pre);

    let i = pre.slice(s![.., 0..hidden]).mapv(sigmoid);
    let f = pre.slice(s![.., hidden..2 * hidden]).mapv(sigmoid);
    let g = pre.slice(s![.., 2 * hidden..3 * hidden]).mapv(libm::tanh);
    let o = pre.slice(s![.., 3 * hidden..4 * hidden]).mapv(sigmoid);
    let c = &f * c_prev + &i * &g;
    let tanh_c = c.mapv(libm::tanh);
    let h = &o * &tanh_c;

    if let Some(cache) = cache {
        cache.i.push(i);
        cache.f.push(f);
        cache.g.push(g);
        cache.o.push(o);
        cache.c.push(c.clone());
        cache.tanh_c.push(tanh_c);
        cache.h.push(h.clone());
    }
    (h, c)
}

/// Backward pass through one layer. `dh_inject[t]` carries the loss gradient
/// arriving at h_t from above (the FC head or the upper layer); returns the
/// parameter gradients plus the gradient w.r.t. this layer's inputs.
/// `forget_gate_scale` is 1.0 in real training; the gradient-check mutation
/// hook sets it to 2.0 to prove the checker catches a wrong forget gradient.
#[allow(clippy::too_many_arguments)]
fn layer_backward(
    w_ih: &Array2<f64>,
    w_hh: &Array2<f64>,
    cache: &LayerCache,
    inputs: &[Array2<f64>],
    dh_inject: Vec<Array2<f64>>,
    forget_gate_scale: f64,
) -> (Array2<f64>, Array2<f64>, Array1<f64>, Vec<Array2<f64>>) {
    let steps = inputs.len();
    let b = inputs[0].nrows();
    let hidden = w_hh.ncols();
    let mut gw_ih = Array2::zeros(w_ih.dim());
    let mut gw_hh = Array2::zeros(w_hh.dim());
    let mut gb = Array1::zeros(4 * hidden);
    let mut dx = vec![Array2::zeros((b, inputs[0].ncols())); steps];

    let zeros = Array2::zeros((b, hidden));
    let mut dh_next = Array2::zeros((b, hidden));
    let mut dc_next = Array2::zeros((b, hidden));
    let mut dh_iter = dh_inject;

    for t in (0..steps).rev() {
        let dh = &dh_iter.pop().expect("one inject per step") + &dh_next;
        let o = &cache.o[t];
        let i = &cache.i[t];
        let f = &cache.f[t];
        let g = &cache.g[t];
        let tanh_c = &cache.tanh_c[t];
        let c_prev = if t > 0 { &cache.c[t - 1] } else { &zeros };
        let h_prev = if t > 0 { &cache.h[t - 1] } else { &zeros };

        let dc = &dc_next + &(&dh * o * &tanh_c.mapv(|v| 1.0 - v * v));
        let d_pre_o = &dh * tanh_c * &o.mapv(|v| v * (1.0 - v));
        let d_pre_i = &dc * g * &i.mapv(|v| v * (1.0 - v));
        let d_pre_g = &dc * i * &g.mapv(|v| 1.0 - v * v);
        let mut d_pre_f = &dc * c_prev * &f.mapv(|v| v * (1.0 - v));
        if forget_gate_scale != 1.0 {
            d_pre_f.mapv_inplace(|v| v * forget_gate_scale);
        }
        dc_next = &dc * f;

        let mut d_pre = Array2::zeros((b, 4 * hidden));
        d_pre.slice_mut(s![.., 0..hidden]).assign(&d_pre_i);
        d_pre.slice_mut(s![.., hidden..2 * hidden]).assign(&d_pre_f);
        d_pre
            .slice_mut(s![.., 2 * hidden..3 * hidden])
            .assign(&d_pre_g);
        d_pre.slice_mut(s![.., 3 * hidden..4 * hidden]).assign(&d_pre_o);

        general_mat_mul(1.0, &d_pre.t(), &inputs[t], 1.0, &mut gw_ih);
        if t > 0 {
            general_mat_mul(1.0, &d_pre.t(), h_prev, 1.0, &mut gw_hh);
        }
        gb += &d_pre.sum_axis(Axis(0));

        dx[t] = d_pre.dot(w_ih);
        dh_next = d_pre.dot(w_hh);
    }
    (gw_ih, gw_hh, gb, dx)
}

/// Forecaster: configuration plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub cfg: LstmConfig,
    pub params: LstmParams,
}

impl Lstm {
    /// Seeded initialization; all tensors uniform in [-1/sqrt(h), 1/sqrt(h)].
    pub fn new(cfg: LstmConfig, rng: &mut RngStream) -> Self {
        let params = LstmParams::init(&cfg, rng);
        Lstm { cfg, params }
    }

    /// Forward without caches: returns B x output predictions.
    fn forward_only(&self, xs: &[Array2<f64>]) -> Array2<f64> {
        let b = xs[0].nrows();
        let h = self.cfg.hidden;
        let p = &self.params;
        let mut h1 = Array2::zeros((b, h));
        let mut c1 = Array2::zeros((b, h));
        let mut h2 = Array2::zeros((b, h));
        let mut c2 = Array2::zeros((b, h));
        for x in xs {
            let (nh1, nc1) = layer_step(x, &h1, &c1, &p.w_ih1, &p.w_hh1, &p.b1, None);
            let (nh2, nc2) = layer_step(&nh1, &h2, &c2, &p.w_ih2, &p.w_hh2, &p.b2, None);
            h1 = nh1;
            c1 = nc1;
            h2 = nh2;
            c2 = nc2;
        }
        let mut y = self
            .params
            .b_fc
            .broadcast((b, self.cfg.output))
            .expect("bias broadcast")
            .to_owned();
        general_mat_mul(1.0, &h2, &p.w_fc.t(), 1.0, &mut y);
        y
    }

    /// Forward + backward on one batch. Returns (mean squared error, grads).
    fn loss_and_grads(
        &self,
        xs: &[Array2<f64>],
        targets: &Array2<f64>,
        forget_gate_scale: f64,
    ) -> (f64, LstmParams) {
        let steps = xs.len();
        let b = xs[0].nrows();
        let h = self.cfg.hidden;
        let p = &self.params;

        let mut cache1 = LayerCache::with_capacity(steps);
        let mut cache2 = LayerCache::with_capacity(steps);
        let mut h1 = Array2::zeros((b, h));
        let mut c1 = Array2::zeros((b, h));
        let mut h2 = Array2::zeros((b, h));
        let mut c2 = Array2::zeros((b, h));
        for x in xs {
            let (nh1, nc1) = layer_step(x, &h1, &c1, &p.w_ih1, &p.w_hh1, &p.b1, Some(&mut cache1));
            let (nh2, nc2) =
                layer_step(&nh1, &h2, &c2, &p.w_ih2, &p.w_hh2, &p.b2, Some(&mut cache2));
            h1 = nh1;
            c1 = nc1;
            h2 = nh2;
            c2 = nc2;
        }
        let mut y = p
            .b_fc
            .broadcast((b, self.cfg.output))
            .expect("bias broadcast")
            .to_owned();
        general_mat_mul(1.0, &h2, &p.w_fc.t(), 1.0, &mut y);

        let diff = &y - targets;
        let n_elems = (b * self.cfg.output) as f64;
        let loss = diff.iter().map(|v| v * v).sum::<f64>() / n_elems;
        let dy = diff.mapv(|v| 2.0 * v / n_elems);

        let mut grads = LstmParams::zeros(self.cfg.input, h, self.cfg.output);
        general_mat_mul(1.0, &dy.t(), &h2, 1.0, &mut grads.w_fc);
        grads.b_fc = dy.sum_axis(Axis(0));

        // Only the last top-layer hidden state feeds the head.
        let mut inject2 = vec![Array2::zeros((b, h)); steps];
        inject2[steps - 1] = dy.dot(&p.w_fc);
        let (gw_ih2, gw_hh2, gb2, dx2) = layer_backward(
            &p.w_ih2,
            &p.w_hh2,
            &cache2,
            &cache1.h,
            inject2,
            forget_gate_scale,
        );
        grads.w_ih2 = gw_ih2;
        grads.w_hh2 = gw_hh2;
        grads.b2 = gb2;

        let (gw_ih1, gw_hh1, gb1, _) =
            layer_backward(&p.w_ih1, &p.w_hh1, &cache1, xs, dx2, forget_gate_scale);
        grads.w_ih1 = gw_ih1;
        grads.w_hh1 = gw_hh1;
        grads.b1 = gb1;

        (loss, grads)
    }

    /// Mini-batch training over the given window indices. Batch order is
    /// reshuffled each epoch from the provided stream. Returns the mean
    /// training loss per epoch.
    pub fn train(
        &mut self,
        windows: &WindowSet,
        indices: &[usize],
        rng: &mut RngStream,
    ) -> Result<Vec<f64>> {
        if indices.is_empty() {
            return Err(Error::invalid("indices", "no training windows"));
        }
        let dim = windows.data().ncols();
        if dim != self.cfg.input || self.cfg.input != self.cfg.output {
            return Err(Error::invalid(
                "windows",
                format!(
                    "window dim {dim} incompatible with input {} / output {}",
                    self.cfg.input, self.cfg.output
                ),
            ));
        }

        let mut adam = Adam::new(&self.cfg);
        let mut history = Vec::with_capacity(self.cfg.epochs);
        let mut order: Vec<usize> = indices.to_vec();
        for epoch in 0..self.cfg.epochs {
            rng.shuffle(&mut order);
            let mut epoch_loss = 0.0;
            for batch in order.chunks(self.cfg.batch_size) {
                let (xs, targets) = gather_batch(windows, batch);
                let (loss, mut grads) = self.loss_and_grads(&xs, &targets, 1.0);
                if !loss.is_finite() {
                    return Err(Error::Training(format!(
                        "non-finite loss {loss} at epoch {epoch}"
                    )));
                }
                epoch_loss += loss * batch.len() as f64;
                if self.cfg.clip_norm > 0.0 {
                    let norm = grads.global_norm();
                    if norm > self.cfg.clip_norm {
                        grads.scale(self.cfg.clip_norm / norm);
                    }
                }
                adam.step(&mut self.params, &grads, self.cfg.learning_rate);
            }
            history.push(epoch_loss / order.len() as f64);
        }
        Ok(history)
    }

    /// Order-preserving batched prediction for the given window indices.
    pub fn predict(&self, windows: &WindowSet, indices: &[usize]) -> Array2<f64> {
        let mut out = Array2::zeros((indices.len(), self.cfg.output));
        let mut row = 0;
        for chunk in indices.chunks(self.cfg.batch_size.max(1)) {
            let (xs, _) = gather_batch(windows, chunk);
            let y = self.forward_only(&xs);
            out.slice_mut(s![row..row + chunk.len(), ..]).assign(&y);
            row += chunk.len();
        }
        out
    }

    /// Single-window convenience wrapper around the batched forward.
    pub fn forward(&self, window: &ndarray::ArrayView2<f64>) -> Result<Array1<f64>> {
        if window.ncols() != self.cfg.input {
            return Err(Error::invalid(
                "window",
                format!("{} columns, expected {}", window.ncols(), self.cfg.input),
            ));
        }
        let xs: Vec<Array2<f64>> = window
            .rows()
            .into_iter()
            .map(|r| r.insert_axis(Axis(0)).to_owned())
            .collect();
        let y = self.forward_only(&xs);
        Ok(y.row(0).to_owned())
    }
}

/// Adam optimizer state. Bias-correction powers are accumulated by repeated
/// multiplication so the update is bit-reproducible.
struct Adam {
    m: LstmParams,
    v: LstmParams,
    beta1_t: f64,
    beta2_t: f64,
}

impl Adam {
    fn new(cfg: &LstmConfig) -> Self {
        Adam {
            m: LstmParams::zeros(cfg.input, cfg.hidden, cfg.output),
            v: LstmParams::zeros(cfg.input, cfg.hidden, cfg.output),
            beta1_t: 1.0,
            beta2_t: 1.0,
        }
    }

    fn step(&mut self, params: &mut LstmParams, grads: &LstmParams, lr: f64) {
        self.beta1_t *= ADAM_BETA1;
        self.beta2_t *= ADAM_BETA2;
        let bc1 = 1.0 - self.beta1_t;
        let bc2 = 1.0 - self.beta2_t;
        for k in 0..TENSOR_NAMES.len() {
            let p = params.slice_mut(k);
            let m = self.m.slice_mut(k);
            let v = self.v.slice_mut(k);
            let g = grads.slice(k);
            for j in 0..p.len() {
                m[j] = ADAM_BETA1 * m[j] + (1.0 - ADAM_BETA1) * g[j];
                v[j] = ADAM_BETA2 * v[j] + (1.0 - ADAM_BETA2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p[j] -= lr * m_hat / (libm::sqrt(v_hat) + ADAM_EPS);
            }
        }
    }
}

/// Stack the selected windows into per-timestep B x dim matrices plus the
/// B x dim target matrix.
fn gather_batch(windows: &WindowSet, indices: &[usize]) -> (Vec<Array2<f64>>, Array2<f64>) {
    let steps = windows.k + 1;
    let dim = windows.data().ncols();
    let b = indices.len();
    let mut xs = vec![Array2::zeros((b, dim)); steps];
    let mut targets = Array2::zeros((b, dim));
    for (j, &w) in indices.iter().enumerate() {
        let input = windows.input(w);
        for (t, x) in xs.iter_mut().enumerate() {
            x.row_mut(j).assign(&input.row(t));
        }
        targets.row_mut(j).assign(&windows.target(w));
    }
    (xs, targets)
}

/// Result of a finite-difference gradient audit.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Worst relative error across every sampled coordinate.
    pub max_rel_err: f64,
    /// Worst relative error per tensor, in `TENSOR_NAMES` order.
    pub per_tensor: Vec<(&'static str, f64)>,
}

/// Compare analytic BPTT gradients against central finite differences
/// (step `step`) on up to `coords_per_tensor` random coordinates of every
/// tensor. The relative error uses `|a - n| / max(|a| + |n|, 1e-6)` so
/// near-zero gradients are judged on an absolute scale well above
/// finite-difference noise.
pub fn gradient_check(
    lstm: &mut Lstm,
    windows: &WindowSet,
    indices: &[usize],
    rng: &mut RngStream,
    coords_per_tensor: usize,
    step: f64,
) -> GradCheckReport {
    gradient_check_impl(lstm, windows, indices, rng, coords_per_tensor, step, 1.0)
}

/// Same audit but with the forget-gate gradient deliberately doubled in the
/// backward pass. A sound checker must report a large error here; this is the
/// mutation test that proves the audit has teeth.
pub fn gradient_check_corrupted(
    lstm: &mut Lstm,
    windows: &WindowSet,
    indices: &[usize],
    rng: &mut RngStream,
    coords_per_tensor: usize,
    step: f64,
) -> GradCheckReport {
    gradient_check_impl(lstm, windows, indices, rng, coords_per_tensor, step, 2.0)
}

#[allow(clippy::too_many_arguments)]
fn gradient_check_impl(
    lstm: &mut Lstm,
    windows: &WindowSet,
    indices: &[usize],
    rng: &mut RngStream,
    coords_per_tensor: usize,
    step: f64,
    forget_gate_scale: f64,
) -> GradCheckReport {
    let (xs, targets) = gather_batch(windows, indices);
    let (_, grads) = lstm.loss_and_grads(&xs, &targets, forget_gate_scale);

    let mut per_tensor = Vec::with_capacity(TENSOR_NAMES.len());
    let mut overall = 0.0f64;
    for k in 0..TENSOR_NAMES.len() {
        let len = grads.slice(k).len();
        let n_coords = coords_per_tensor.min(len);
        let coords = rng.distinct_indices(len, n_coords);
        let mut worst = 0.0f64;
        for &j in &coords {
            let analytic = grads.slice(k)[j];
            let saved = lstm.params.slice(k)[j];
            lstm.params.slice_mut(k)[j] = saved + step;
            let plus = mse_of(lstm, &xs, &targets);
            lstm.params.slice_mut(k)[j] = saved - step;
            let minus = mse_of(lstm, &xs, &targets);
            lstm.params.slice_mut(k)[j] = saved;
            let numeric = (plus - minus) / (2.0 * step);
            let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
        per_tensor.push((TENSOR_NAMES[k], worst));
        overall = overall.max(worst);
    }
    GradCheckReport {
        max_rel_err: overall,
        per_tensor,
    }
}

fn mse_of(lstm: &Lstm, xs: &[Array2<f64>], targets: &Array2<f64>) -> f64 {
    let y = lstm.forward_only(xs);
    let diff = &y - targets;
    diff.iter().map(|v| v * v).sum::<f64>() / diff.len() as f64
}

/// Persist parameters: a dims header then one shape-tagged block per tensor,
/// row-major, full precision.
pub fn write_lstm(path: &Path, lstm: &Lstm) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(
        w,
        "lstm,{},{},{}",
        lstm.cfg.input, lstm.cfg.hidden, lstm.cfg.output
    )
    .map_err(|e| Error::io(path, e))?;
    for k in 0..TENSOR_NAMES.len() {
        let (rows, cols) = lstm.params.shape(k);
        writeln!(w, "tensor,{},{rows},{cols}", TENSOR_NAMES[k]).map_err(|e| Error::io(path, e))?;
        let flat = lstm.params.slice(k);
        for r in 0..rows {
            let line = flat[r * cols..(r + 1) * cols]
                .iter()
                .map(|v| fmt_f64(*v))
                .collect::<Vec<_>>()
                .join(",");
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read parameters written by [`write_lstm`]. Training hyperparameters are
/// not stored; the returned config carries defaults for the stored shape.
pub fn read_lstm(path: &Path) -> Result<Lstm> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let mut next_line = |expect: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, Ok(l))) => Ok((i + 1, l)),
            Some((_, Err(e))) => Err(Error::io(path, e)),
            None => Err(Error::Model {
                path: path.into(),
                msg: format!("unexpected end of file, expected {expect}"),
            }),
        }
    };

    let (line_no, header) = next_line("dims header")?;
    let parts: Vec<&str> = header.split(',').collect();
    if parts.len() != 4 || parts[0] != "lstm" {
        return Err(Error::Format {
            path: path.into(),
            line: line_no,
            msg: "expected lstm,<input>,<hidden>,<output>".into(),
        });
    }
    let dims: Vec<usize> = parts[1..]
        .iter()
        .map(|p| p.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Format {
            path: path.into(),
            line: line_no,
            msg: format!("bad dimension: {e}"),
        })?;
    let cfg = LstmConfig::new(dims[0], dims[2]);
    let cfg = LstmConfig {
        hidden: dims[1],
        ..cfg
    };
    let mut params = LstmParams::zeros(cfg.input, cfg.hidden, cfg.output);

    for k in 0..TENSOR_NAMES.len() {
        let (line_no, tag) = next_line("tensor header")?;
        let (rows, cols) = params.shape(k);
        let expected = format!("tensor,{},{rows},{cols}", TENSOR_NAMES[k]);
        if tag != expected {
            return Err(Error::Format {
                path: path.into(),
                line: line_no,
                msg: format!("expected {expected:?}, found {tag:?}"),
            });
        }
        let flat = params.slice_mut(k);
        for r in 0..rows {
            let (line_no, row) = next_line("tensor row")?;
            let values: Vec<f64> = row
                .split(',')
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format {
                    path: path.into(),
                    line: line_no,
                    msg: format!("bad number: {e}"),
                })?;
            if values.len() != cols {
                return Err(Error::Format {
                    path: path.into(),
                    line: line_no,
                    msg: format!("{} values, expected {cols}", values.len()),
                });
            }
            flat[r * cols..(r + 1) * cols].copy_from_slice(&values);
        }
    }
    if lines.next().is_some() {
        return Err(Error::Model {
            path: path.into(),
            msg: "trailing content after final tensor".into(),
        });
    }
    let lstm = Lstm { cfg, params };
    if !lstm.params.all_finite() {
        return Err(Error::Model {
            path: path.into(),
            msg: "non-finite parameter values".into(),
        });
    }
    Ok(lstm)
}
