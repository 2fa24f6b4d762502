//! Contracts: signed intrinsic values and per-date regression features.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::PathSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductKind {
    AmericanPut,
    AmericanCall,
    /// Call on the running average, exercisable on the exercise dates.
    AsianAmericanCall,
}

/// An option with a discrete exercise schedule given as step indices into the path grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Product {
    pub kind: ProductKind,
    pub strike: f64,
    /// Sorted, non-empty, excludes `t_0`; the last entry is maturity.
    pub exercise_dates: Vec<usize>,
}

impl Product {
    /// Exercisable every `stride` steps up to and including step `n_steps`.
    pub fn new(kind: ProductKind, strike: f64, n_steps: usize, stride: usize) -> Result<Self> {
        let stride = stride.max(1);
        if n_steps == 0 || !n_steps.is_multiple_of(stride) {
            return Err(Error::invalid(format!("{n_steps} steps is not a multiple of the exercise stride {stride}")));
        }
        let exercise_dates = (1..=n_steps / stride).map(|i| i * stride).collect();
        let p = Self { kind, strike, exercise_dates };
        p.validate()?;
        Ok(p)
    }

    pub fn american_put(strike: f64, n_steps: usize) -> Result<Self> {
        Self::new(ProductKind::AmericanPut, strike, n_steps, 1)
    }

    pub fn american_call(strike: f64, n_steps: usize) -> Result<Self> {
        Self::new(ProductKind::AmericanCall, strike, n_steps, 1)
    }

    pub fn asian_american_call(strike: f64, n_steps: usize, stride: usize) -> Result<Self> {
        Self::new(ProductKind::AsianAmericanCall, strike, n_steps, stride)
    }

    pub fn validate(&self) -> Result<()> {
        if self.exercise_dates.is_empty() {
            return Err(Error::invalid("exercise schedule is empty"));
        }
        if self.exercise_dates[0] == 0 {
            return Err(Error::invalid("exercise at t_0 is not part of the schedule"));
        }
        if !self.exercise_dates.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("exercise dates must be strictly increasing"));
        }
        if !(self.strike.is_finite() && self.strike > 0.0) {
            return Err(Error::invalid("strike must be positive"));
        }
        Ok(())
    }

    pub fn maturity(&self) -> usize {
        *self.exercise_dates.last().expect("validated schedule")
    }

    pub fn needs_twap(&self) -> bool {
        self.kind == ProductKind::AsianAmericanCall
    }

    /// Number of regression features: `[S]` or `[S, TWAP]`.
    pub fn n_features(&self) -> usize {
        if self.needs_twap() {
            2
        } else {
            1
        }
    }

    /// Checks that `paths` cover the whole schedule and carry the channels this product reads.
    pub fn check_paths(&self, paths: &PathSet) -> Result<()> {
        self.validate()?;
        self.check_step(paths, self.maturity())
    }

    fn check_step(&self, paths: &PathSet, step: usize) -> Result<()> {
        if step > paths.n_steps() {
            return Err(Error::invalid(format!("step {step} beyond the simulated grid ({} steps)", paths.n_steps())));
        }
        if self.needs_twap() && paths.twap.is_none() {
            return Err(Error::invalid("asian product needs the TWAP channel on the path set"));
        }
        Ok(())
    }

    /// Signed payoff of exercising at `step`: `K - S` for puts, `S - K` for
    /// calls, `TWAP - K` for the asian call.
    pub fn intrinsic(&self, paths: &PathSet, step: usize) -> Result<Array1<f64>> {
        self.check_step(paths, step)?;
        Ok(match self.kind {
            ProductKind::AmericanPut => paths.prices.column(step).mapv(|s| self.strike - s),
            ProductKind::AmericanCall => paths.prices.column(step).mapv(|s| s - self.strike),
            ProductKind::AsianAmericanCall => {
                paths.twap.as_ref().expect("checked").column(step).mapv(|a| a - self.strike)
            }
        })
    }

    /// `d intrinsic / d feature` for each feature column.
    pub fn intrinsic_gradient(&self) -> Vec<f64> {
        match self.kind {
            ProductKind::AmericanPut => vec![-1.0],
            ProductKind::AmericanCall => vec![1.0],
            ProductKind::AsianAmericanCall => vec![0.0, 1.0],
        }
    }

    /// Regression features at `step`, columns `[S]` or `[S, TWAP]`.
    pub fn features(&self, paths: &PathSet, step: usize) -> Result<Array2<f64>> {
        self.check_step(paths, step)?;
        let n = paths.n_paths;
        let s = paths.prices.column(step);
        Ok(match self.kind {
            ProductKind::AmericanPut | ProductKind::AmericanCall => {
                s.to_owned().into_shape_with_order((n, 1)).expect("column")
            }
            ProductKind::AsianAmericanCall => {
                let a = paths.twap.as_ref().expect("checked").column(step);
                let mut f = Array2::zeros((n, 2));
                f.column_mut(0).assign(&s);
                f.column_mut(1).assign(&a);
                f
            }
        })
    }
}

/// `max(signed, 0)`.
pub fn positive_part(signed: f64) -> f64 {
    signed.max(0.0)
}
