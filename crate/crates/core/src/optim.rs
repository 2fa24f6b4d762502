//! Full-batch training utilities shared by the network regressors.

use serde::{Deserialize, Serialize};

/// Adam with bias correction over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for ((p, &g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Hyperparameters for full-batch MSE training with Adam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Stop after this many epochs without a new best training loss.
    pub early_stop_patience: usize,
    /// Train on standardized targets and undo the scaling at prediction time.
    pub standardize_targets: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-2, epochs: 300, early_stop_patience: 50, standardize_targets: true }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(crate::Error::invalid("learning_rate must be positive"));
        }
        if self.epochs == 0 {
            return Err(crate::Error::invalid("epochs must be at least 1"));
        }
        Ok(())
    }
}

/// Loss history of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub loss_curve: Vec<f64>,
    /// MSE of the returned parameters, in target units.
    pub final_mse: f64,
    pub epochs_run: usize,
}

/// Per-feature affine map `x * scale + shift`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub scale: f64,
    pub shift: f64,
}

impl Affine {
    pub const IDENTITY: Affine = Affine { scale: 1.0, shift: 0.0 };

    pub fn apply(&self, x: f64) -> f64 {
        x * self.scale + self.shift
    }

    /// Maps `[min, max]` of `values` onto `[lo, hi]`. A constant column maps to the midpoint.
    pub fn min_max(values: impl Iterator<Item = f64>, lo: f64, hi: f64) -> Affine {
        let (mn, mx) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !(mx > mn) {
            return Affine { scale: 1.0, shift: 0.5 * (lo + hi) - mn };
        }
        let scale = (hi - lo) / (mx - mn);
        Affine { scale, shift: lo - mn * scale }
    }

    /// Standardizes to zero mean and unit variance. Zero variance gets scale 1.
    pub fn standardize(values: &[f64]) -> Affine {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        let scale = if std > 0.0 && std.is_finite() { 1.0 / std } else { 1.0 };
        Affine { scale, shift: -mean * scale }
    }

    pub fn inverse(&self) -> Affine {
        Affine { scale: 1.0 / self.scale, shift: -self.shift / self.scale }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_minimizes_quadratic() {
        let mut p = vec![3.0, -2.0];
        let mut opt = Adam::new(2, 0.1);
        for _ in 0..500 {
            let g: Vec<f64> = p.iter().map(|x| 2.0 * x).collect();
            opt.step(&mut p, &g);
        }
        assert!(p.iter().all(|x| x.abs() < 1e-3));
    }

    #[test]
    fn affine_maps() {
        let a = Affine::min_max([2.0, 4.0, 3.0].into_iter(), -1.0, 1.0);
        assert_eq!(a.apply(2.0), -1.0);
        assert_eq!(a.apply(4.0), 1.0);
        let c = Affine::min_max([5.0, 5.0].into_iter(), -1.0, 1.0);
        assert_eq!(c.apply(5.0), 0.0);
        let s = Affine::standardize(&[1.0, 3.0]);
        assert_eq!(s.apply(1.0), -1.0);
        assert!((s.inverse().apply(s.apply(7.5)) - 7.5).abs() < 1e-12);
    }
}
