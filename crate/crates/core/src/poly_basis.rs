//! Polynomial regressors for classic least-squares Monte Carlo.
//!
//! A design row is `[1, B_1(x), ..., B_p(x)]` for one input. For two inputs it
//! is the constant, orders `1..=p` of each input, then (optionally) the cross
//! products `B_i(x_1) B_j(x_2)` with `i, j >= 1` and `i + j <= p`, ordered by
//! `i` then `j`. At `p = 4` that is exactly 15 columns.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsmc::{ContinuationModel, FitDiagnostics};

/// Inputs above this make `e^{-x/2}` subnormal.
pub const WEIGHT_UNDERFLOW_X: f64 = 1400.0;

static UNDERFLOW_WARNINGS: AtomicU64 = AtomicU64::new(0);

/// Number of weighted-Laguerre evaluations that were flushed to zero because
/// the exponential weight underflowed.
pub fn underflow_warnings() -> u64 {
    UNDERFLOW_WARNINGS.load(Ordering::Relaxed)
}

/// `(L_p(x), L_p'(x))` from the three-term recurrence.
pub fn laguerre_eval(p: usize, x: f64) -> (f64, f64) {
    if p == 0 {
        return (1.0, 0.0);
    }
    let (mut l_prev, mut l) = (1.0, 1.0 - x);
    let mut d = -1.0;
    for q in 2..=p {
        let qf = q as f64;
        let next = ((2.0 * qf - 1.0 - x) * l - (qf - 1.0) * l_prev) / qf;
        // L_q' = L_{q-1}' - L_{q-1}
        d -= l;
        l_prev = l;
        l = next;
    }
    (l, d)
}

/// `(H_p(x), H_p'(x))`, physicists' convention.
pub fn hermite_eval(p: usize, x: f64) -> (f64, f64) {
    if p == 0 {
        return (1.0, 0.0);
    }
    let (mut h_prev, mut h) = (1.0, 2.0 * x);
    for q in 2..=p {
        let next = 2.0 * x * h - 2.0 * (q as f64 - 1.0) * h_prev;
        h_prev = h;
        h = next;
    }
    // h_prev is H_{p-1}
    (h, 2.0 * p as f64 * h_prev)
}

/// `(e^{-x/2} L_p(x), d/dx)`. Past [`WEIGHT_UNDERFLOW_X`] returns zeros and
/// bumps [`underflow_warnings`].
pub fn weighted_laguerre_eval(p: usize, x: f64) -> (f64, f64) {
    if x > WEIGHT_UNDERFLOW_X {
        UNDERFLOW_WARNINGS.fetch_add(1, Ordering::Relaxed);
        return (0.0, 0.0);
    }
    let w = (-0.5 * x).exp();
    let (l, dl) = laguerre_eval(p, x);
    (w * l, w * (dl - 0.5 * l))
}

pub fn monomial_eval(p: usize, x: f64) -> (f64, f64) {
    match p {
        0 => (1.0, 0.0),
        _ => (x.powi(p as i32), p as f64 * x.powi(p as i32 - 1)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisFamily {
    Laguerre,
    WeightedLaguerre,
    Hermite,
    Monomial,
}

impl BasisFamily {
    pub fn eval(self, p: usize, x: f64) -> (f64, f64) {
        match self {
            BasisFamily::Laguerre => laguerre_eval(p, x),
            BasisFamily::WeightedLaguerre => weighted_laguerre_eval(p, x),
            BasisFamily::Hermite => hermite_eval(p, x),
            BasisFamily::Monomial => monomial_eval(p, x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    pub family: BasisFamily,
    pub order: usize,
    pub cross_products: bool,
    /// Multiplier applied to every input before the transform. `1 / spot`
    /// when inputs are normalized, 1 otherwise.
    pub input_scale: f64,
}

impl BasisSpec {
    pub fn new(family: BasisFamily, order: usize) -> Self {
        Self { family, order, cross_products: false, input_scale: 1.0 }
    }

    pub fn with_cross_products(mut self) -> Self {
        self.cross_products = true;
        self
    }

    /// Divides inputs by `spot` before the transform.
    pub fn normalized_by(mut self, spot: f64) -> Self {
        self.input_scale = 1.0 / spot;
        self
    }

    pub fn doubled(mut self) -> Self {
        self.order *= 2;
        self
    }

    pub fn validate(&self, n_inputs: usize) -> Result<()> {
        if self.order < 1 {
            return Err(Error::invalid("basis order must be at least 1"));
        }
        if !(1..=2).contains(&n_inputs) {
            return Err(Error::invalid(format!("basis regression supports 1 or 2 inputs, got {n_inputs}")));
        }
        if self.cross_products && n_inputs != 2 {
            return Err(Error::invalid("cross products need exactly two inputs"));
        }
        if !(self.input_scale.is_finite() && self.input_scale > 0.0) {
            return Err(Error::invalid("input scale must be positive and finite"));
        }
        Ok(())
    }

    fn cross_pairs(&self) -> Vec<(usize, usize)> {
        let p = self.order;
        let mut pairs = Vec::new();
        for i in 1..p {
            for j in 1..=(p - i) {
                pairs.push((i, j));
            }
        }
        pairs
    }

    pub fn n_columns(&self, n_inputs: usize) -> usize {
        let base = 1 + n_inputs * self.order;
        if self.cross_products && n_inputs == 2 {
            base + self.order * (self.order - 1) / 2
        } else {
            base
        }
    }

    /// Transforms of every order for one scalar input: `(values, derivatives)`
    /// with index `q` holding order `q`, derivatives taken w.r.t. the raw input.
    fn transforms(&self, x: f64) -> (Vec<f64>, Vec<f64>) {
        let z = x * self.input_scale;
        let mut v = Vec::with_capacity(self.order + 1);
        let mut d = Vec::with_capacity(self.order + 1);
        for q in 0..=self.order {
            let (bv, bd) = self.family.eval(q, z);
            v.push(bv);
            d.push(bd * self.input_scale);
        }
        (v, d)
    }

    fn fill_row(&self, x: &[f64], row: &mut [f64], grads: Option<&mut [Vec<f64>]>) {
        let p = self.order;
        let t: Vec<(Vec<f64>, Vec<f64>)> = x.iter().map(|&xi| self.transforms(xi)).collect();
        row[0] = 1.0;
        let mut col = 1;
        for (vals, _) in &t {
            row[col..col + p].copy_from_slice(&vals[1..=p]);
            col += p;
        }
        let pairs = if self.cross_products { self.cross_pairs() } else { Vec::new() };
        for &(i, j) in &pairs {
            row[col] = t[0].0[i] * t[1].0[j];
            col += 1;
        }
        if let Some(grads) = grads {
            for g in grads.iter_mut() {
                g.iter_mut().for_each(|v| *v = 0.0);
            }
            let mut col = 1;
            for (input, (_, ders)) in t.iter().enumerate() {
                grads[input][col..col + p].copy_from_slice(&ders[1..=p]);
                col += p;
            }
            for &(i, j) in &pairs {
                grads[0][col] = t[0].1[i] * t[1].0[j];
                grads[1][col] = t[0].0[i] * t[1].1[j];
                col += 1;
            }
        }
    }
}

/// Builds the regression design matrix for `features` (one row per observation).
pub fn design_matrix(spec: &BasisSpec, features: ArrayView2<f64>) -> Result<Array2<f64>> {
    let n_inputs = features.ncols();
    spec.validate(n_inputs)?;
    let width = spec.n_columns(n_inputs);
    let mut out = Array2::zeros((features.nrows(), width));
    let mut x = vec![0.0; n_inputs];
    for (frow, mut orow) in features.rows().into_iter().zip(out.rows_mut()) {
        x.iter_mut().zip(frow.iter()).for_each(|(a, &b)| *a = b);
        spec.fill_row(&x, orow.as_slice_mut().expect("row-major"), None);
    }
    Ok(out)
}

/// Least-squares solution of `X beta = y`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstsqSolution {
    pub coefficients: Vec<f64>,
    /// Ratio of extreme singular values of the column-equilibrated design.
    pub condition: f64,
    pub rank: usize,
}

/// Solves the least-squares problem by Householder QR followed by an SVD of
/// the triangular factor. Columns are equilibrated first; singular values
/// below `max(n, m) * eps * s_max` are dropped, which yields the minimum-norm
/// solution when the design is rank deficient.
pub fn ols_fit(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<LstsqSolution> {
    let (n, m) = x.dim();
    if y.len() != n {
        return Err(Error::shape(format!("{n} targets"), y.len()));
    }
    if m == 0 || n < m {
        return Err(Error::invalid(format!("need at least as many observations ({n}) as columns ({m})")));
    }
    if !x.iter().chain(y.iter()).all(|v| v.is_finite()) {
        return Err(Error::invalid("non-finite entry in regression data"));
    }
    let norms: Vec<f64> = (0..m)
        .map(|j| {
            let s = x.column(j).dot(&x.column(j)).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let xs = DMatrix::from_fn(n, m, |i, j| x[[i, j]] / norms[j]);
    let mut rhs = DVector::from_iterator(n, y.iter().copied());
    let qr = xs.qr();
    qr.q_tr_mul(&mut rhs);
    let r = qr.r();
    let qty = rhs.rows(0, m).into_owned();
    let svd = r.svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    let cutoff = (n.max(m) as f64) * f64::EPSILON * s_max;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let beta_scaled =
        svd.solve(&qty, cutoff).map_err(|e| Error::invalid(format!("least-squares solve failed: {e}")))?;
    let coefficients: Vec<f64> = beta_scaled.iter().zip(&norms).map(|(b, s)| b / s).collect();
    if !coefficients.iter().all(|c| c.is_finite()) {
        return Err(Error::invalid("least-squares produced non-finite coefficients"));
    }
    let condition = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    Ok(LstsqSolution { coefficients, condition, rank })
}

/// Polynomial-basis continuation model fitted by ordinary least squares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsModel {
    pub spec: BasisSpec,
    pub coefficients: Vec<f64>,
    pub condition_diagnostic: f64,
    pub rank: usize,
    pub n_obs: usize,
}

impl OlsModel {
    /// An unfitted model; predicting before [`OlsModel::fit`] is an error.
    pub fn new(spec: BasisSpec) -> Self {
        Self { spec, coefficients: Vec::new(), condition_diagnostic: f64::NAN, rank: 0, n_obs: 0 }
    }

    pub fn fit(&mut self, features: ArrayView2<f64>, targets: ArrayView1<f64>) -> Result<()> {
        let x = design_matrix(&self.spec, features)?;
        let sol = ols_fit(x.view(), targets)?;
        self.coefficients = sol.coefficients;
        self.condition_diagnostic = sol.condition;
        self.rank = sol.rank;
        self.n_obs = features.nrows();
        Ok(())
    }

    fn check_fitted(&self, n_inputs: usize) -> Result<()> {
        self.spec.validate(n_inputs)?;
        let width = self.spec.n_columns(n_inputs);
        if self.coefficients.len() != width {
            return Err(Error::shape(format!("{width} coefficients"), self.coefficients.len()));
        }
        Ok(())
    }

    pub fn predict(&self, features: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.check_fitted(features.ncols())?;
        let x = design_matrix(&self.spec, features)?;
        Ok(x.dot(&ArrayView1::from(&self.coefficients[..])))
    }

    /// `d prediction / d input`, one row per observation, one column per input.
    pub fn input_gradient(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        let n_inputs = features.ncols();
        self.check_fitted(n_inputs)?;
        let width = self.coefficients.len();
        let mut row = vec![0.0; width];
        let mut grads = vec![vec![0.0; width]; n_inputs];
        let mut out = Array2::zeros((features.nrows(), n_inputs));
        for (i, frow) in features.rows().into_iter().enumerate() {
            let x: Vec<f64> = frow.to_vec();
            self.spec.fill_row(&x, &mut row, Some(&mut grads));
            for (d, g) in grads.iter().enumerate() {
                out[[i, d]] = g.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum();
            }
        }
        Ok(out)
    }
}

impl ContinuationModel for OlsModel {
    fn fit(&mut self, features: ArrayView2<f64>, targets: ArrayView1<f64>) -> Result<FitDiagnostics> {
        OlsModel::fit(self, features, targets)?;
        let pred = self.predict(features)?;
        let mse = (&pred - &targets).mapv(|e| e * e).mean().unwrap_or(0.0);
        Ok(FitDiagnostics { mse, epochs: 0, model_id: None })
    }

    fn predict(&self, features: ArrayView2<f64>) -> Result<Array1<f64>> {
        OlsModel::predict(self, features)
    }

    fn input_gradient(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        OlsModel::input_gradient(self, features)
    }
}
