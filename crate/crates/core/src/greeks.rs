//! Pathwise spot delta through the first-date continuation model.
//!
//! Each path is valued at the first exercise date as `max(F, intrinsic)`; the
//! estimator differentiates that value through the fitted model and the GBM
//! map `S_1 = S_0 exp(...)`, whose spot derivative is `S_1 / S_0`.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsmc::{mean_and_std_error, ContinuationModel};
use crate::market::{simulate_gbm, MarketSpec, PathSet, StepUnit};
use crate::products::Product;
use crate::regressor::{BlackScholesContinuation, Regressor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaResult {
    pub delta: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub model: String,
    /// Fraction of paths valued on the intrinsic branch.
    pub exercise_fraction: f64,
}

/// Fits the continuation model at the first exercise date on every path.
/// `targets` are the discounted cashflows left by a completed pricing run.
pub fn fit_t1_model(
    paths: &PathSet,
    product: &Product,
    regressor: &Regressor,
    targets: ArrayView1<f64>,
    seed: u64,
) -> Result<Box<dyn ContinuationModel>> {
    let t1 = product.exercise_dates[0];
    let features = product.features(paths, t1)?;
    if targets.len() != paths.n_paths {
        return Err(Error::shape(format!("{} targets", paths.n_paths), targets.len()));
    }
    let mut model = regressor.for_delta().build(seed.wrapping_add(t1 as u64));
    model.fit(features.view(), targets).map_err(|e| Error::Fit { date: t1, source: Box::new(e) })?;
    Ok(model)
}

/// Mean over paths of `e^{-r t_1} dV/dS_1 S_1/S_0`. The intrinsic branch is
/// used exactly when the pricing rule would exercise; ties continue.
pub fn delta_estimate(
    paths: &PathSet,
    product: &Product,
    model: &dyn ContinuationModel,
    r_y: f64,
    model_name: &str,
) -> Result<DeltaResult> {
    if product.needs_twap() {
        return Err(Error::invalid("delta is only supported for single-asset puts and calls"));
    }
    let t1 = product.exercise_dates[0];
    let features = product.features(paths, t1)?;
    let fitted = model.predict(features.view())?;
    let grad = model.input_gradient(features.view())?;
    let iv = product.intrinsic(paths, t1)?;
    let d_intrinsic = product.intrinsic_gradient()[0];
    let disc = (-r_y * t1 as f64 * paths.dt_years).exp();
    let s0 = paths.spot();

    let mut exercised = 0usize;
    let contributions: Vec<f64> = (0..paths.n_paths)
        .map(|i| {
            let dv = if iv[i] > 0.0 && iv[i] > fitted[i] {
                exercised += 1;
                d_intrinsic
            } else {
                grad[[i, 0]]
            };
            disc * dv * features[[i, 0]] / s0
        })
        .collect();
    if contributions.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFiniteLoss { epoch: 0, loss: f64::NAN });
    }
    let (delta, std_error) = mean_and_std_error(&contributions);
    Ok(DeltaResult {
        delta,
        std_error,
        n_paths: paths.n_paths,
        model: model_name.to_string(),
        exercise_fraction: exercised as f64 / paths.n_paths as f64,
    })
}

/// Market of the European-call self-check: spot 100, strike 102, 30 daily
/// steps, 20% volatility, no rates, on a `periods_per_year` basis.
pub fn perfect_fit_market(periods_per_year: u32) -> MarketSpec {
    MarketSpec::new(100.0, 102.0, 0.2, 0.0, 0.0, 30, StepUnit::Day).with_periods_per_year(periods_per_year)
}

/// Runs [`delta_estimate`] with the closed-form European value of `product`
/// standing in for the fitted first-date model.
pub fn oracle_delta(market: &MarketSpec, product: &Product, n_paths: usize, seed: u64) -> Result<DeltaResult> {
    let t1 = product.exercise_dates[0];
    let oracle = BlackScholesContinuation::at(market, product, t1)?;
    // Only steps up to t1 are read; per-path streams make this grid a prefix of the full one.
    let prefix = MarketSpec { n_steps: t1, ..*market };
    let paths = simulate_gbm(&prefix, n_paths, seed)?;
    let first_date = Product { exercise_dates: vec![t1], ..product.clone() };
    delta_estimate(&paths, &first_date, &oracle, market.r_y, "black_scholes_oracle")
}

/// Oracle delta of the call on `market`. With no rates the call is never
/// exercised early, so the result estimates the European delta.
pub fn perfect_fit_delta_check(market: &MarketSpec, n_paths: usize, seed: u64) -> Result<DeltaResult> {
    let call = Product::american_call(market.strike, market.n_steps)?;
    oracle_delta(market, &call, n_paths, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{bs_delta, BsInputs};
    use crate::lsmc::{lsmc_price, LsmcConfig};
    use crate::poly_basis::{BasisFamily, BasisSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn doubled_basis_for_the_first_date() {
        let spec = MarketSpec::new(4.0, 4.0, 0.2, 0.0, 0.0, 50, StepUnit::Day);
        let paths = simulate_gbm(&spec, 2000, 1).unwrap();
        let put = Product::american_put(4.0, 50).unwrap();
        let reg = Regressor::Ols(BasisSpec::new(BasisFamily::Laguerre, 6));
        let mut factory = reg.factory(0);
        let run = lsmc_price(&paths, &put, &mut factory, &LsmcConfig::default(), None).unwrap();
        let model = fit_t1_model(&paths, &put, &reg, run.first_date_targets.view(), 0).unwrap();
        let g = model.input_gradient(ndarray::array![[4.0]].view()).unwrap();
        assert_eq!(g.dim(), (1, 1));
    }

    #[test]
    fn deterministic_deep_itm_put_has_unit_delta() {
        let spec = MarketSpec::new(1.0, 4.0, 0.0, 0.05, 0.0, 10, StepUnit::Day);
        let paths = simulate_gbm(&spec, 100, 0).unwrap();
        let put = Product::american_put(4.0, 10).unwrap();
        let reg = Regressor::Ols(BasisSpec::new(BasisFamily::Laguerre, 2));
        let mut factory = reg.factory(0);
        let run = lsmc_price(&paths, &put, &mut factory, &LsmcConfig::default(), None).unwrap();
        let model = fit_t1_model(&paths, &put, &reg, run.first_date_targets.view(), 0).unwrap();
        let d = delta_estimate(&paths, &put, model.as_ref(), 0.05, "laguerre").unwrap();
        assert!((d.delta + 1.0).abs() < 1e-12, "{}", d.delta);
        assert_eq!(d.exercise_fraction, 1.0);
    }

    #[test]
    fn deterministic_itm_call_oracle() {
        let market = MarketSpec::new(150.0, 102.0, 1e-9, 0.0, 0.0, 30, StepUnit::Day).with_periods_per_year(250);
        let d = perfect_fit_delta_check(&market, 1000, 3).unwrap();
        assert!((d.delta - 1.0).abs() < 1e-9, "{}", d.delta);
    }

    #[test]
    fn oracle_estimator_is_unbiased() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..10 {
            let spot = rng.random_range(80.0..120.0);
            let strike = rng.random_range(85.0..115.0);
            let sigma = rng.random_range(0.1..0.5);
            let market = MarketSpec::new(spot, strike, sigma, 0.0, 0.0, 30, StepUnit::Day).with_periods_per_year(250);
            let d = perfect_fit_delta_check(&market, 20_000, trial).unwrap();
            let exact = bs_delta(&BsInputs::call(spot, strike, sigma, 0.0, 0.0, 30.0 / 250.0)).unwrap();
            assert!(
                (d.delta - exact).abs() <= 3.0 * d.std_error + 1e-12,
                "trial {trial}: {} vs {exact} (se {})",
                d.delta,
                d.std_error
            );
        }
    }

    #[test]
    fn asian_delta_is_rejected() {
        let spec = MarketSpec::new(100.0, 100.0, 0.2, 0.0, 0.0, 4, StepUnit::Week);
        let paths = simulate_gbm(&spec, 10, 0).unwrap().with_twap(crate::market::TwapConvention::ExcludeT0, 1);
        let asian = Product::asian_american_call(100.0, 4, 1).unwrap();
        let oracle = BlackScholesContinuation {
            kind: crate::analytic::OptionKind::Call,
            strike: 100.0,
            sigma: 0.2,
            r: 0.0,
            q: 0.0,
            ttm_years: 0.1,
        };
        assert!(delta_estimate(&paths, &asian, &oracle, 0.0, "x").is_err());
    }
}
