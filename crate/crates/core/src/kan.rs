//! Kolmogorov-Arnold network regressor.
//!
//! Each edge `(i -> j)` of a layer carries the univariate function
//! `w_ji * silu(x_i) + sum_b c_jib * B_b(x_i)` where `B_b` are B-splines on a
//! uniform grid extended `order` intervals past each end; a node sums its
//! incoming edges. Inputs are mapped by a per-feature min/max affine onto the
//! grid domain `[-1, 1]`, and targets are optionally standardized. Gradients
//! (parameters and inputs) are derived by hand.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsmc::{ContinuationModel, FitDiagnostics};
use crate::optim::{Adam, Affine, TrainConfig, TrainReport};

pub const MAX_ORDER: usize = 7;
const LOCAL: usize = MAX_ORDER + 1;

static NEXT_NETWORK_ID: AtomicU64 = AtomicU64::new(1);

/// Uniform B-spline knot grid over `[lo, hi]`, extended by `order` knots on
/// each side (`n_intervals + 2 * order + 1` knots, `n_intervals + order` basis functions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineGrid {
    pub lo: f64,
    pub hi: f64,
    pub n_intervals: usize,
    pub order: usize,
    pub knots: Vec<f64>,
}

impl SplineGrid {
    pub fn uniform(lo: f64, hi: f64, n_intervals: usize, order: usize) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid("spline grid needs finite lo < hi"));
        }
        if n_intervals == 0 {
            return Err(Error::invalid("spline grid needs at least one interval"));
        }
        if order == 0 || order > MAX_ORDER {
            return Err(Error::invalid(format!("spline order must be in 1..={MAX_ORDER}")));
        }
        let h = (hi - lo) / n_intervals as f64;
        let knots = (0..n_intervals + 2 * order + 1).map(|i| lo + (i as f64 - order as f64) * h).collect();
        Ok(Self { lo, hi, n_intervals, order, knots })
    }

    pub fn n_basis(&self) -> usize {
        self.n_intervals + self.order
    }

    fn step(&self) -> f64 {
        (self.hi - self.lo) / self.n_intervals as f64
    }

    fn knot(&self, i: isize) -> f64 {
        self.lo + (i as f64 - self.order as f64) * self.step()
    }

    /// Non-zero basis values and derivatives at `x`. Returns the basis index of
    /// `vals[0]` (possibly negative near the ends; indices outside
    /// `0..n_basis` carry no coefficient), or `None` outside the knot span.
    fn local_basis(&self, x: f64, vals: &mut [f64; LOCAL], ders: &mut [f64; LOCAL]) -> Option<isize> {
        let k = self.order;
        let last = self.knots.len() - 1;
        if !(x >= self.knots[0] && x < self.knots[last]) {
            return None;
        }
        let h = self.step();
        let t = (x - self.knots[0]) / h;
        let span = (t.floor() as isize).clamp(0, last as isize - 1);
        if k == 3 {
            let u = t - span as f64;
            let (u2, v) = (u * u, 1.0 - u);
            vals[0] = v * v * v / 6.0;
            vals[1] = (3.0 * u2 * u - 6.0 * u2 + 4.0) / 6.0;
            vals[2] = (-3.0 * u2 * u + 3.0 * u2 + 3.0 * u + 1.0) / 6.0;
            vals[3] = u2 * u / 6.0;
            ders[0] = -0.5 * v * v / h;
            ders[1] = (1.5 * u2 - 2.0 * u) / h;
            ders[2] = (-1.5 * u2 + u + 0.5) / h;
            ders[3] = 0.5 * u2 / h;
            return Some(span - 3);
        }
        let mut n = [0.0; LOCAL];
        let mut lower = [0.0; LOCAL];
        let mut left = [0.0; LOCAL];
        let mut right = [0.0; LOCAL];
        n[0] = 1.0;
        for d in 1..=k {
            if d == k {
                lower[..k].copy_from_slice(&n[..k]);
            }
            left[d] = x - self.knot(span + 1 - d as isize);
            right[d] = self.knot(span + d as isize) - x;
            let mut saved = 0.0;
            for r in 0..d {
                let temp = n[r] / (right[r + 1] + left[d - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[d - r] * temp;
            }
            n[d] = saved;
        }
        for r in 0..=k {
            vals[r] = n[r];
            let a = if r >= 1 { lower[r - 1] } else { 0.0 };
            let b = if r < k { lower[r] } else { 0.0 };
            ders[r] = (a - b) / h;
        }
        Some(span - k as isize)
    }

    /// Full basis vector (length `n_basis`) and its derivative at `x`.
    pub fn bspline_basis(&self, x: f64) -> (Vec<f64>, Vec<f64>) {
        let nb = self.n_basis();
        let mut values = vec![0.0; nb];
        let mut derivs = vec![0.0; nb];
        let mut v = [0.0; LOCAL];
        let mut d = [0.0; LOCAL];
        if let Some(first) = self.local_basis(x, &mut v, &mut d) {
            for r in 0..=self.order {
                let b = first + r as isize;
                if b >= 0 && (b as usize) < nb {
                    values[b as usize] = v[r];
                    derivs[b as usize] = d[r];
                }
            }
        }
        (values, derivs)
    }
}

fn silu(x: f64) -> (f64, f64) {
    let s = 1.0 / (1.0 + (-x).exp());
    (x * s, s * (1.0 + x * (1.0 - s)))
}

/// Spline and base-function evaluations for every (sample, input) pair of one layer.
struct EdgeEval {
    in_dim: usize,
    width: usize,
    first: Vec<isize>,
    vals: Vec<f64>,
    ders: Vec<f64>,
    silu: Vec<f64>,
    dsilu: Vec<f64>,
}

const OUTSIDE: isize = isize::MIN;

impl EdgeEval {
    fn new(grid: &SplineGrid, x: &[f64], in_dim: usize) -> Self {
        let mut e = Self::empty();
        e.fill(grid, x, in_dim);
        e
    }

    fn empty() -> Self {
        Self {
            in_dim: 1,
            width: 0,
            first: Vec::new(),
            vals: Vec::new(),
            ders: Vec::new(),
            silu: Vec::new(),
            dsilu: Vec::new(),
        }
    }

    /// Re-evaluates at `x`, reusing the buffers.
    fn fill(&mut self, grid: &SplineGrid, x: &[f64], in_dim: usize) {
        let width = grid.order + 1;
        let m = x.len();
        self.in_dim = in_dim;
        self.width = width;
        self.first.clear();
        self.first.resize(m, OUTSIDE);
        self.vals.clear();
        self.vals.resize(m * width, 0.0);
        self.ders.clear();
        self.ders.resize(m * width, 0.0);
        self.silu.resize(m, 0.0);
        self.dsilu.resize(m, 0.0);
        let mut v = [0.0; LOCAL];
        let mut d = [0.0; LOCAL];
        for (idx, &xi) in x.iter().enumerate() {
            if let Some(f) = grid.local_basis(xi, &mut v, &mut d) {
                self.first[idx] = f;
                self.vals[idx * width..(idx + 1) * width].copy_from_slice(&v[..width]);
                self.ders[idx * width..(idx + 1) * width].copy_from_slice(&d[..width]);
            }
            let (s, ds) = silu(xi);
            self.silu[idx] = s;
            self.dsilu[idx] = ds;
        }
    }

    fn n_samples(&self) -> usize {
        self.first.len() / self.in_dim
    }
}

/// One KAN layer: `out_dim x in_dim` edges sharing a spline grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KanLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub grid: SplineGrid,
    /// `[out][in][basis]`, row-major.
    pub spline_coef: Vec<f64>,
    /// `[out][in]`, row-major.
    pub base_weight: Vec<f64>,
}

impl KanLayer {
    fn n_params(&self) -> usize {
        self.spline_coef.len() + self.base_weight.len()
    }

    /// Valid coefficient window `[lo, hi)` in local offsets for a span starting at `first`.
    #[inline]
    fn window(&self, first: isize, width: usize) -> (usize, usize) {
        let nb = self.grid.n_basis() as isize;
        let lo = (-first).max(0) as usize;
        let hi = ((nb - first).min(width as isize)).max(0) as usize;
        (lo, hi.max(lo))
    }

    fn forward(&self, eval: &EdgeEval, out: &mut Vec<f64>) {
        let n = eval.n_samples();
        let nb = self.grid.n_basis();
        let w = eval.width;
        out.clear();
        out.resize(n * self.out_dim, 0.0);
        for s in 0..n {
            for i in 0..self.in_dim {
                let e = s * self.in_dim + i;
                let first = eval.first[e];
                let sv = eval.silu[e];
                let vals = &eval.vals[e * w..(e + 1) * w];
                let window = if first == OUTSIDE { None } else { Some(self.window(first, w)) };
                for o in 0..self.out_dim {
                    let mut acc = self.base_weight[o * self.in_dim + i] * sv;
                    if let Some((lo, hi)) = window {
                        let base = (o * self.in_dim + i) * nb;
                        let off = base as isize + first;
                        for r in lo..hi {
                            acc += self.spline_coef[(off + r as isize) as usize] * vals[r];
                        }
                    }
                    out[s * self.out_dim + o] += acc;
                }
            }
        }
    }

    /// Accumulates parameter gradients given `dL/d out`, optionally writing `dL/d in`.
    fn backward(
        &self,
        eval: &EdgeEval,
        g_out: &[f64],
        g_coef: &mut [f64],
        g_base: &mut [f64],
        mut g_in: Option<&mut Vec<f64>>,
    ) {
        let n = eval.n_samples();
        let nb = self.grid.n_basis();
        let w = eval.width;
        if let Some(g) = g_in.as_mut() {
            g.clear();
            g.resize(n * self.in_dim, 0.0);
        }
        for s in 0..n {
            for i in 0..self.in_dim {
                let e = s * self.in_dim + i;
                let first = eval.first[e];
                let sv = eval.silu[e];
                let dsv = eval.dsilu[e];
                let vals = &eval.vals[e * w..(e + 1) * w];
                let ders = &eval.ders[e * w..(e + 1) * w];
                let window = if first == OUTSIDE { None } else { Some(self.window(first, w)) };
                let mut gi = 0.0;
                for o in 0..self.out_dim {
                    let g = g_out[s * self.out_dim + o];
                    let wi = o * self.in_dim + i;
                    g_base[wi] += g * sv;
                    gi += g * self.base_weight[wi] * dsv;
                    if let Some((lo, hi)) = window {
                        let off = wi as isize * nb as isize + first;
                        for r in lo..hi {
                            g_coef[(off + r as isize) as usize] += g * vals[r];
                            gi += g * self.spline_coef[(off + r as isize) as usize] * ders[r];
                        }
                    }
                }
                if let Some(g_in) = g_in.as_mut() {
                    g_in[e] = gi;
                }
            }
        }
    }
}

/// Spline grid resolution shared by every layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_intervals: usize,
    pub order: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n_intervals: 5, order: 3 }
    }
}

/// Layered KAN with its input normalization and target scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KanNetwork {
    pub dims: Vec<usize>,
    pub layers: Vec<KanLayer>,
    pub input_affine: Vec<Affine>,
    /// Maps the raw network output to target units.
    pub output_affine: Affine,
    pub trained: bool,
    /// Unique per initialization within a process.
    #[serde(skip)]
    pub id: u64,
    pub epochs_trained: usize,
}

/// Hidden width suggested by the Kolmogorov-Arnold representation: `2n + 1`.
pub fn kart_hidden_width(n_inputs: usize) -> usize {
    2 * n_inputs + 1
}

/// Builds a network with near-zero spline coefficients (gaussian, standard
/// deviation `0.1 / sqrt(n_basis)`) and fan-in scaled base weights
/// (uniform in `+-1/sqrt(in_dim)`). Deterministic per seed.
pub fn kan_init(dims: &[usize], grid: GridConfig, seed: u64) -> Result<KanNetwork> {
    if dims.len() < 2 {
        return Err(Error::invalid("KAN needs at least an input and an output dimension"));
    }
    if dims.contains(&0) {
        return Err(Error::invalid("KAN layer dimensions must be positive"));
    }
    let spline_grid = SplineGrid::uniform(-1.0, 1.0, grid.n_intervals, grid.order)?;
    let nb = spline_grid.n_basis();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coef_dist = Normal::new(0.0, 0.1 / (nb as f64).sqrt()).expect("valid normal");
    let layers = dims
        .windows(2)
        .map(|w| {
            let (in_dim, out_dim) = (w[0], w[1]);
            let bound = 1.0 / (in_dim as f64).sqrt();
            let spline_coef = (0..out_dim * in_dim * nb).map(|_| coef_dist.sample(&mut rng)).collect();
            let base_weight = (0..out_dim * in_dim).map(|_| rng.random_range(-bound..bound)).collect();
            KanLayer { in_dim, out_dim, grid: spline_grid.clone(), spline_coef, base_weight }
        })
        .collect();
    Ok(KanNetwork {
        dims: dims.to_vec(),
        layers,
        input_affine: vec![Affine::IDENTITY; dims[0]],
        output_affine: Affine::IDENTITY,
        trained: false,
        id: NEXT_NETWORK_ID.fetch_add(1, Ordering::Relaxed),
        epochs_trained: 0,
    })
}

/// Buffers reused across training epochs.
struct Workspace {
    /// Edge evaluations for layers `1..` (layer 0 is supplied by the caller).
    evals: Vec<EdgeEval>,
    /// Output of every layer; the last one is the network output.
    outs: Vec<Vec<f64>>,
    g: Vec<f64>,
    g_next: Vec<f64>,
    grads: Vec<f64>,
}

impl Workspace {
    fn new(n_layers: usize) -> Self {
        Self {
            evals: (1..n_layers).map(|_| EdgeEval::empty()).collect(),
            outs: vec![Vec::new(); n_layers],
            g: Vec::new(),
            g_next: Vec::new(),
            grads: Vec::new(),
        }
    }

    fn output(&self) -> &[f64] {
        self.outs.last().expect("at least one layer")
    }
}

impl KanNetwork {
    pub fn n_inputs(&self) -> usize {
        self.dims[0]
    }

    pub fn n_outputs(&self) -> usize {
        *self.dims.last().expect("non-empty dims")
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(KanLayer::n_params).sum()
    }

    /// Flat parameter vector: per layer, spline coefficients then base weights.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            p.extend_from_slice(&l.spline_coef);
            p.extend_from_slice(&l.base_weight);
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.parameter_count());
        let mut at = 0;
        for l in &mut self.layers {
            let nc = l.spline_coef.len();
            l.spline_coef.copy_from_slice(&p[at..at + nc]);
            at += nc;
            let nw = l.base_weight.len();
            l.base_weight.copy_from_slice(&p[at..at + nw]);
            at += nw;
        }
    }

    fn check_width(&self, features: &ArrayView2<f64>) -> Result<()> {
        if features.ncols() != self.n_inputs() {
            return Err(Error::shape(format!("{} feature columns", self.n_inputs()), features.ncols()));
        }
        Ok(())
    }

    fn normalized_inputs(&self, features: &ArrayView2<f64>) -> Vec<f64> {
        let d = self.n_inputs();
        let mut z = Vec::with_capacity(features.len());
        for row in features.rows() {
            for (j, &v) in row.iter().enumerate().take(d) {
                z.push(self.input_affine[j].apply(v));
            }
        }
        z
    }

    fn first_eval(&self, features: &ArrayView2<f64>) -> EdgeEval {
        EdgeEval::new(&self.layers[0].grid, &self.normalized_inputs(features), self.n_inputs())
    }

    fn forward_cached(&self, eval0: &EdgeEval, ws: &mut Workspace) {
        self.layers[0].forward(eval0, &mut ws.outs[0]);
        for (li, layer) in self.layers.iter().enumerate().skip(1) {
            let (prev, rest) = ws.outs.split_at_mut(li);
            ws.evals[li - 1].fill(&layer.grid, &prev[li - 1], layer.in_dim);
            layer.forward(&ws.evals[li - 1], &mut rest[0]);
        }
    }

    /// Backpropagates `ws.g` (`dL/d raw_output`, before `output_affine`) into
    /// `ws.grads`; with `want_input_grad`, `ws.g` ends as `dL/d normalized input`.
    fn backward(&self, eval0: &EdgeEval, ws: &mut Workspace, want_input_grad: bool) {
        ws.grads.clear();
        ws.grads.resize(self.parameter_count(), 0.0);
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut at = 0;
        for l in &self.layers {
            offsets.push(at);
            at += l.n_params();
        }
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let eval = if li == 0 { eval0 } else { &ws.evals[li - 1] };
            let (gc, gb) = ws.grads[offsets[li]..offsets[li] + layer.n_params()].split_at_mut(layer.spline_coef.len());
            let need_in = li > 0 || want_input_grad;
            layer.backward(eval, &ws.g, gc, gb, need_in.then_some(&mut ws.g_next));
            if need_in {
                std::mem::swap(&mut ws.g, &mut ws.g_next);
            }
        }
    }

    /// Predictions in target units, one per row of `features`.
    pub fn forward(&self, features: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.check_width(&features)?;
        if self.n_outputs() != 1 {
            return Err(Error::invalid("regression forward needs a single-output network"));
        }
        let eval0 = self.first_eval(&features);
        let mut ws = Workspace::new(self.layers.len());
        self.forward_cached(&eval0, &mut ws);
        Ok(ws.output().iter().map(|&v| self.output_affine.apply(v)).collect())
    }

    /// `d prediction / d raw feature`, one row per sample.
    pub fn input_gradient(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_width(&features)?;
        let n = features.nrows();
        let eval0 = self.first_eval(&features);
        let mut ws = Workspace::new(self.layers.len());
        self.forward_cached(&eval0, &mut ws);
        ws.g = vec![self.output_affine.scale; n];
        self.backward(&eval0, &mut ws, true);
        let g_in = &ws.g;
        let d = self.n_inputs();
        Ok(Array2::from_shape_fn((n, d), |(s, j)| g_in[s * d + j] * self.input_affine[j].scale))
    }

    /// MSE against `targets` in target units and its gradient w.r.t. [`KanNetwork::params`].
    pub fn loss_and_param_gradient(
        &self,
        features: ArrayView2<f64>,
        targets: ArrayView1<f64>,
    ) -> Result<(f64, Vec<f64>)> {
        self.check_width(&features)?;
        let eval0 = self.first_eval(&features);
        let mut ws = Workspace::new(self.layers.len());
        let loss = self.loss_grad_internal(&eval0, &targets.to_vec(), self.output_affine, &mut ws);
        Ok((loss, ws.grads))
    }

    /// Loss `mean((affine(out) - y)^2)`; its parameter gradient is left in `ws.grads`.
    fn loss_grad_internal(&self, eval0: &EdgeEval, y: &[f64], affine: Affine, ws: &mut Workspace) -> f64 {
        self.forward_cached(eval0, ws);
        let n = y.len() as f64;
        let mut loss = 0.0;
        let out = ws.outs.last().expect("at least one layer");
        ws.g.clear();
        ws.g.extend(out.iter().zip(y).map(|(&o, &t)| {
            let e = affine.apply(o) - t;
            loss += e * e;
            2.0 * e * affine.scale / n
        }));
        self.backward(eval0, ws, false);
        loss / n
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let mut net: KanNetwork = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        net.id = NEXT_NETWORK_ID.fetch_add(1, Ordering::Relaxed);
        Ok(net)
    }
}

/// Full-batch Adam on the MSE. Fits the input normalization (and, when
/// configured, the target standardization) to this data set first, then
/// returns the loss history. The best parameters seen are kept.
pub fn kan_train(
    net: &mut KanNetwork,
    features: ArrayView2<f64>,
    targets: ArrayView1<f64>,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    net.check_width(&features)?;
    if features.nrows() != targets.len() {
        return Err(Error::shape(format!("{} targets", features.nrows()), targets.len()));
    }
    if features.nrows() == 0 {
        return Err(Error::invalid("no training samples"));
    }
    if !features.iter().chain(targets.iter()).all(|v| v.is_finite()) {
        return Err(Error::invalid("non-finite training data"));
    }
    let (lo, hi) = (net.layers[0].grid.lo, net.layers[0].grid.hi);
    net.input_affine =
        (0..net.n_inputs()).map(|j| Affine::min_max(features.column(j).iter().copied(), lo, hi)).collect();
    let y: Vec<f64> = targets.to_vec();
    let target_norm = if cfg.standardize_targets { Affine::standardize(&y) } else { Affine::IDENTITY };
    net.output_affine = target_norm.inverse();
    let y_norm: Vec<f64> = y.iter().map(|&v| target_norm.apply(v)).collect();

    let eval0 = net.first_eval(&features);
    let mut params = net.params();
    let mut opt = Adam::new(params.len(), cfg.learning_rate);
    let mut best = (f64::INFINITY, params.clone(), 0usize);
    let mut curve = Vec::with_capacity(cfg.epochs);
    let unit = Affine::IDENTITY;
    let to_target_units = net.output_affine.scale * net.output_affine.scale;
    let mut ws = Workspace::new(net.layers.len());
    for epoch in 0..cfg.epochs {
        let loss = net.loss_grad_internal(&eval0, &y_norm, unit, &mut ws);
        let grads = &ws.grads;
        if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch, loss });
        }
        curve.push(loss * to_target_units);
        if loss < best.0 {
            best = (loss, params.clone(), epoch);
        } else if cfg.early_stop_patience > 0 && epoch - best.2 >= cfg.early_stop_patience {
            break;
        }
        opt.step(&mut params, grads);
        net.set_params(&params);
        net.epochs_trained += 1;
    }
    let final_loss = net.loss_grad_internal(&eval0, &y_norm, unit, &mut ws);
    if final_loss.is_finite() && final_loss < best.0 {
        best = (final_loss, params, curve.len());
    }
    net.set_params(&best.1);
    net.trained = true;
    Ok(TrainReport { final_mse: best.0 * to_target_units, epochs_run: curve.len(), loss_curve: curve })
}

/// Network shape, grid, and training settings for a KAN continuation model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KanConfig {
    /// Hidden layer widths; the input and output dimensions are implied by the product.
    pub hidden: Vec<usize>,
    pub grid: GridConfig,
    pub train: TrainConfig,
}

impl KanConfig {
    /// Full layer dims for `n_inputs` features; an empty hidden list means one
    /// hidden layer of width `2n + 1`.
    pub fn dims(&self, n_inputs: usize) -> Vec<usize> {
        let mut dims = vec![n_inputs];
        if self.hidden.is_empty() {
            dims.push(kart_hidden_width(n_inputs));
        } else {
            dims.extend_from_slice(&self.hidden);
        }
        dims.push(1);
        dims
    }
}

/// Continuation model that initializes a fresh network on every `fit`.
#[derive(Debug, Clone)]
pub struct KanRegressor {
    pub config: KanConfig,
    pub seed: u64,
    pub network: Option<KanNetwork>,
    pub report: Option<TrainReport>,
}

impl KanRegressor {
    pub fn new(config: KanConfig, seed: u64) -> Self {
        Self { config, seed, network: None, report: None }
    }

    fn net(&self) -> Result<&KanNetwork> {
        self.network.as_ref().ok_or_else(|| Error::invalid("KAN regressor used before fit"))
    }
}

impl ContinuationModel for KanRegressor {
    fn fit(&mut self, features: ArrayView2<f64>, targets: ArrayView1<f64>) -> Result<FitDiagnostics> {
        let dims = self.config.dims(features.ncols());
        let mut net = kan_init(&dims, self.config.grid, self.seed)?;
        let report = kan_train(&mut net, features, targets, &self.config.train)?;
        let diag = FitDiagnostics { mse: report.final_mse, epochs: report.epochs_run, model_id: Some(net.id) };
        self.network = Some(net);
        self.report = Some(report);
        Ok(diag)
    }

    fn predict(&self, features: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.net()?.forward(features)
    }

    fn input_gradient(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.net()?.input_gradient(features)
    }
}
