//! Fully connected feed-forward regressor trained with the same full-batch
//! Adam loop as the KAN.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsmc::{ContinuationModel, FitDiagnostics};
use crate::optim::{Adam, Affine, TrainConfig, TrainReport};

static NEXT_NETWORK_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative from the pre-activation `z` and the activation `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Dense network; the output layer is linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpNetwork {
    pub dims: Vec<usize>,
    pub activation: Activation,
    /// Per layer: weights `(out, in)` row-major, then biases.
    pub params: Vec<f64>,
    /// Input standardization fitted at training time.
    pub input_affine: Vec<Affine>,
    pub output_affine: Affine,
    pub trained: bool,
    #[serde(skip)]
    pub id: u64,
}

/// Uniform `+-1/sqrt(fan_in)` for weights and biases. Deterministic per seed.
pub fn mlp_init(dims: &[usize], activation: Activation, seed: u64) -> Result<MlpNetwork> {
    if dims.len() < 2 || dims.contains(&0) {
        return Err(Error::invalid("MLP needs at least two positive layer dimensions"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::new();
    for w in dims.windows(2) {
        let bound = 1.0 / (w[0] as f64).sqrt();
        params.extend((0..w[0] * w[1] + w[1]).map(|_| rng.random_range(-bound..bound)));
    }
    Ok(MlpNetwork {
        dims: dims.to_vec(),
        activation,
        params,
        input_affine: vec![Affine::IDENTITY; dims[0]],
        output_affine: Affine::IDENTITY,
        trained: false,
        id: NEXT_NETWORK_ID.fetch_add(1, Ordering::Relaxed),
    })
}

struct Tape {
    /// Layer inputs: `acts[0]` is the normalized input, `acts[l]` the output of hidden layer `l`.
    acts: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    output: Array1<f64>,
}

impl MlpNetwork {
    pub fn n_inputs(&self) -> usize {
        self.dims[0]
    }

    pub fn parameter_count(&self) -> usize {
        self.dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn offsets(&self) -> Vec<usize> {
        let mut at = 0;
        self.dims
            .windows(2)
            .map(|w| {
                let o = at;
                at += w[0] * w[1] + w[1];
                o
            })
            .collect()
    }

    fn layer<'a>(&self, p: &'a [f64], offset: usize, l: usize) -> (ArrayView2<'a, f64>, ArrayView1<'a, f64>) {
        let (i, o) = (self.dims[l], self.dims[l + 1]);
        let w = ArrayView2::from_shape((o, i), &p[offset..offset + o * i]).expect("layer shape");
        let b = ArrayView1::from(&p[offset + o * i..offset + o * i + o]);
        (w, b)
    }

    fn check_width(&self, features: &ArrayView2<f64>) -> Result<()> {
        if features.ncols() != self.n_inputs() {
            return Err(Error::shape(format!("{} feature columns", self.n_inputs()), features.ncols()));
        }
        if *self.dims.last().expect("dims") != 1 {
            return Err(Error::invalid("regression needs a single-output network"));
        }
        Ok(())
    }

    fn normalized(&self, features: &ArrayView2<f64>) -> Array2<f64> {
        let mut z = features.to_owned();
        for (j, mut col) in z.axis_iter_mut(Axis(1)).enumerate() {
            let a = self.input_affine[j];
            col.mapv_inplace(|v| a.apply(v));
        }
        z
    }

    fn run(&self, x: Array2<f64>) -> Tape {
        let offsets = self.offsets();
        let n_layers = offsets.len();
        let mut acts = vec![x];
        let mut pre = Vec::with_capacity(n_layers - 1);
        for l in 0..n_layers {
            let (w, b) = self.layer(&self.params, offsets[l], l);
            let z = acts[l].dot(&w.t()) + b;
            if l + 1 == n_layers {
                return Tape { acts, pre, output: z.column(0).to_owned() };
            }
            acts.push(z.mapv(|v| self.activation.apply(v)));
            pre.push(z);
        }
        unreachable!("at least one layer")
    }

    /// Backpropagates `dL/d raw_output`; returns parameter gradients and, if asked, input gradients.
    fn backward(&self, tape: &Tape, g_out: Array1<f64>, want_input: bool) -> (Vec<f64>, Option<Array2<f64>>) {
        let offsets = self.offsets();
        let mut grads = vec![0.0; self.parameter_count()];
        let n = g_out.len();
        let mut g = g_out.into_shape_with_order((n, 1)).expect("column");
        for l in (0..offsets.len()).rev() {
            let (i, o) = (self.dims[l], self.dims[l + 1]);
            let gw = g.t().dot(&tape.acts[l]);
            let gb = g.sum_axis(Axis(0));
            let off = offsets[l];
            grads[off..off + o * i].copy_from_slice(gw.as_standard_layout().as_slice().expect("contiguous"));
            grads[off + o * i..off + o * i + o].copy_from_slice(gb.as_slice().expect("contiguous"));
            if l == 0 && !want_input {
                break;
            }
            let (w, _) = self.layer(&self.params, off, l);
            let mut g_in = g.dot(&w);
            if l == 0 {
                return (grads, Some(g_in));
            }
            let act = self.activation;
            ndarray::Zip::from(&mut g_in)
                .and(&tape.pre[l - 1])
                .and(&tape.acts[l])
                .for_each(|gv, &z, &a| *gv *= act.derivative(z, a));
            g = g_in;
        }
        (grads, None)
    }

    pub fn forward(&self, features: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.check_width(&features)?;
        let out = self.run(self.normalized(&features)).output;
        Ok(out.mapv(|v| self.output_affine.apply(v)))
    }

    /// `d prediction / d raw feature`, one row per sample.
    pub fn input_gradient(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_width(&features)?;
        let tape = self.run(self.normalized(&features));
        let g_out = Array1::from_elem(features.nrows(), self.output_affine.scale);
        let (_, g_in) = self.backward(&tape, g_out, true);
        let mut g = g_in.expect("input gradient requested");
        for (j, mut col) in g.axis_iter_mut(Axis(1)).enumerate() {
            let s = self.input_affine[j].scale;
            col.mapv_inplace(|v| v * s);
        }
        Ok(g)
    }

    fn loss_grad(&self, x: &Array2<f64>, y: &Array1<f64>, affine: Affine) -> (f64, Vec<f64>) {
        let tape = self.run(x.clone());
        let n = y.len() as f64;
        let err = tape.output.mapv(|o| affine.apply(o)) - y;
        let loss = err.iter().map(|e| e * e).sum::<f64>() / n;
        let g_out = err.mapv(|e| 2.0 * e * affine.scale / n);
        (loss, self.backward(&tape, g_out, false).0)
    }

    /// MSE against `targets` in target units and its gradient w.r.t. `params`.
    pub fn loss_and_param_gradient(
        &self,
        features: ArrayView2<f64>,
        targets: ArrayView1<f64>,
    ) -> Result<(f64, Vec<f64>)> {
        self.check_width(&features)?;
        Ok(self.loss_grad(&self.normalized(&features), &targets.to_owned(), self.output_affine))
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let mut net: MlpNetwork = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        net.id = NEXT_NETWORK_ID.fetch_add(1, Ordering::Relaxed);
        Ok(net)
    }
}

/// Full-batch Adam on the MSE with standardized inputs (and targets, when
/// configured). The best parameters seen are kept.
pub fn mlp_train(
    net: &mut MlpNetwork,
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
    net.input_affine = features.columns().into_iter().map(|c| Affine::standardize(&c.to_vec())).collect();
    let y = targets.to_vec();
    let target_norm = if cfg.standardize_targets { Affine::standardize(&y) } else { Affine::IDENTITY };
    net.output_affine = target_norm.inverse();
    let y_norm: Array1<f64> = y.iter().map(|&v| target_norm.apply(v)).collect();
    let x = net.normalized(&features);

    let to_target_units = net.output_affine.scale * net.output_affine.scale;
    let mut opt = Adam::new(net.params.len(), cfg.learning_rate);
    let mut best = (f64::INFINITY, net.params.clone(), 0usize);
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (loss, grads) = net.loss_grad(&x, &y_norm, Affine::IDENTITY);
        if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch, loss });
        }
        curve.push(loss * to_target_units);
        if loss < best.0 {
            best = (loss, net.params.clone(), epoch);
        } else if cfg.early_stop_patience > 0 && epoch - best.2 >= cfg.early_stop_patience {
            break;
        }
        let mut params = std::mem::take(&mut net.params);
        opt.step(&mut params, &grads);
        net.params = params;
    }
    let (final_loss, _) = net.loss_grad(&x, &y_norm, Affine::IDENTITY);
    if final_loss.is_finite() && final_loss < best.0 {
        best = (final_loss, net.params.clone(), curve.len());
    }
    net.params = best.1;
    net.trained = true;
    Ok(TrainReport { final_mse: best.0 * to_target_units, epochs_run: curve.len(), loss_curve: curve })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub train: TrainConfig,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self { hidden: vec![32, 32], activation: Activation::Relu, train: TrainConfig::default() }
    }
}

impl MlpConfig {
    pub fn dims(&self, n_inputs: usize) -> Vec<usize> {
        let mut dims = vec![n_inputs];
        dims.extend_from_slice(&self.hidden);
        dims.push(1);
        dims
    }
}

/// Continuation model that initializes a fresh network on every `fit`.
#[derive(Debug, Clone)]
pub struct MlpRegressor {
    pub config: MlpConfig,
    pub seed: u64,
    pub network: Option<MlpNetwork>,
    pub report: Option<TrainReport>,
}

impl MlpRegressor {
    pub fn new(config: MlpConfig, seed: u64) -> Self {
        Self { config, seed, network: None, report: None }
    }

    fn net(&self) -> Result<&MlpNetwork> {
        self.network.as_ref().ok_or_else(|| Error::invalid("MLP regressor used before fit"))
    }
}

impl ContinuationModel for MlpRegressor {
    fn fit(&mut self, features: ArrayView2<f64>, targets: ArrayView1<f64>) -> Result<FitDiagnostics> {
        let dims = self.config.dims(features.ncols());
        let mut net = mlp_init(&dims, self.config.activation, self.seed)?;
        let report = mlp_train(&mut net, features, targets, &self.config.train)?;
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

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array;

    fn sample(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0))
    }

    #[test]
    fn parameter_count() {
        let net = mlp_init(&[1, 32, 32, 1], Activation::Relu, 0).unwrap();
        assert_eq!(net.parameter_count(), 1153);
        assert_eq!(net.params.len(), 1153);
        assert!(mlp_init(&[1], Activation::Relu, 0).is_err());
        let again = mlp_init(&[1, 32, 32, 1], Activation::Relu, 0).unwrap();
        assert_eq!(net.params, again.params);
        assert_ne!(net.id, again.id);
    }

    #[test]
    fn parameter_gradient_matches_finite_differences() {
        let mut net = mlp_init(&[2, 5, 4, 1], Activation::Tanh, 3).unwrap();
        net.input_affine = vec![Affine { scale: 0.7, shift: 0.1 }, Affine { scale: 1.3, shift: -0.2 }];
        net.output_affine = Affine { scale: 1.5, shift: 0.3 };
        let x = sample(30, 2, 4);
        let y = x.column(0).mapv(f64::sin);
        let (_, g) = net.loss_and_param_gradient(x.view(), y.view()).unwrap();
        let h = 1e-6;
        for i in 0..net.parameter_count() {
            let mut p = net.clone();
            p.params[i] += h;
            let up = p.loss_and_param_gradient(x.view(), y.view()).unwrap().0;
            p.params[i] -= 2.0 * h;
            let dn = p.loss_and_param_gradient(x.view(), y.view()).unwrap().0;
            let fd = (up - dn) / (2.0 * h);
            let scale = fd.abs().max(g[i].abs()).max(1e-3);
            assert!((fd - g[i]).abs() / scale <= 1e-5, "param {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        for act in [Activation::Tanh, Activation::Relu] {
            let mut net = mlp_init(&[2, 8, 8, 1], act, 5).unwrap();
            net.input_affine = vec![Affine { scale: 0.5, shift: 0.0 }, Affine { scale: 2.0, shift: 1.0 }];
            net.output_affine = Affine { scale: 0.8, shift: 0.0 };
            let x = sample(50, 2, 6);
            let g = net.input_gradient(x.view()).unwrap();
            let h = 1e-6;
            for s in 0..50 {
                for j in 0..2 {
                    let mut up = x.row(s).to_owned().insert_axis(Axis(0));
                    let mut dn = up.clone();
                    up[[0, j]] += h;
                    dn[[0, j]] -= h;
                    let fd = (net.forward(up.view()).unwrap()[0] - net.forward(dn.view()).unwrap()[0]) / (2.0 * h);
                    assert!((fd - g[[s, j]]).abs() <= 1e-4, "{act:?} sample {s} input {j}: {fd} vs {}", g[[s, j]]);
                }
            }
        }
    }

    #[test]
    fn fits_a_smooth_curve() {
        let x = Array::linspace(-1.0, 1.0, 400).insert_axis(Axis(1));
        let y = x.column(0).mapv(|v| v * v);
        let mut net = mlp_init(&[1, 32, 32, 1], Activation::Relu, 1).unwrap();
        let cfg = TrainConfig { epochs: 1000, early_stop_patience: 0, ..Default::default() };
        let report = mlp_train(&mut net, x.view(), y.view(), &cfg).unwrap();
        assert!(report.final_mse < 1e-3, "{}", report.final_mse);
        let pred = net.forward(x.view()).unwrap();
        let mse = (&pred - &y).mapv(|e| e * e).mean().unwrap();
        assert!((mse - report.final_mse).abs() < 1e-12);
    }

    #[test]
    fn training_is_deterministic_and_refits_fresh() {
        let x = sample(200, 1, 9);
        let y = x.column(0).mapv(|v| v.exp());
        let cfg = MlpConfig { train: TrainConfig { epochs: 30, ..Default::default() }, ..Default::default() };
        let mut a = MlpRegressor::new(cfg.clone(), 2);
        let mut b = MlpRegressor::new(cfg, 2);
        let da = a.fit(x.view(), y.view()).unwrap();
        let db = b.fit(x.view(), y.view()).unwrap();
        assert_eq!(da.mse, db.mse);
        assert_eq!(a.predict(x.view()).unwrap(), b.predict(x.view()).unwrap());
        let again = a.fit(x.view(), y.view()).unwrap();
        assert_ne!(again.model_id, da.model_id);
        assert_eq!(again.mse, da.mse);
    }

    #[test]
    fn divergence_is_reported() {
        let x = sample(20, 1, 1);
        let y = x.column(0).mapv(|v| v * 1e300);
        let mut net = mlp_init(&[1, 4, 1], Activation::Relu, 0).unwrap();
        let cfg = TrainConfig { standardize_targets: false, ..Default::default() };
        assert!(matches!(mlp_train(&mut net, x.view(), y.view(), &cfg), Err(Error::NonFiniteLoss { .. })));
    }

    #[test]
    fn json_round_trip() {
        let x = sample(50, 1, 2);
        let y = x.column(0).mapv(f64::cos);
        let mut net = mlp_init(&[1, 6, 1], Activation::Tanh, 0).unwrap();
        mlp_train(&mut net, x.view(), y.view(), &TrainConfig { epochs: 20, ..Default::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("mlp.json");
        net.save_json(&p).unwrap();
        let back = MlpNetwork::load_json(&p).unwrap();
        assert_eq!(back.forward(x.view()).unwrap(), net.forward(x.view()).unwrap());
    }

    #[test]
    fn unfitted_regressor_errors() {
        let r = MlpRegressor::new(MlpConfig::default(), 0);
        assert!(r.predict(sample(3, 1, 0).view()).is_err());
    }
}
