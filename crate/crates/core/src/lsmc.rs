//! Backward-induction Longstaff-Schwartz pricer with a pluggable continuation model.
//!
//! Each path carries at most one cashflow. Walking the exercise dates
//! backwards, the pricer fits a fresh model of the continuation value on the
//! discounted live cashflows and moves a path's cashflow to the current date
//! whenever intrinsic value is positive and strictly above the fitted value.

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::PathSet;
use crate::products::{positive_part, Product};

/// Regression of discounted future cashflows on the exercise-date features.
pub trait ContinuationModel {
    fn fit(&mut self, features: ArrayView2<f64>, targets: ArrayView1<f64>) -> Result<FitDiagnostics>;
    fn predict(&self, features: ArrayView2<f64>) -> Result<Array1<f64>>;
    /// `d prediction / d feature`, shape `(n_obs, n_features)`.
    fn input_gradient(&self, features: ArrayView2<f64>) -> Result<Array2<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Training MSE in target units.
    pub mse: f64,
    /// Zero for closed-form fits.
    pub epochs: usize,
    /// Identity of the network instance, when the model owns one.
    pub model_id: Option<u64>,
}

/// Builds the continuation model for one exercise date.
pub type ModelFactory<'a> = dyn FnMut(usize) -> Box<dyn ContinuationModel> + 'a;

/// True continuation value at a date, used only to annotate fit-curve dumps.
pub type TrueContinuation<'a> = dyn Fn(ArrayView2<f64>, usize) -> Array1<f64> + 'a;

/// The single live cashflow of every path.
#[derive(Debug, Clone, PartialEq)]
pub struct CashflowState {
    pub amount: Vec<f64>,
    /// Step at which `amount` is paid; `None` when the path never pays.
    pub date: Vec<Option<usize>>,
}

impl CashflowState {
    /// Terminal cashflows: positive intrinsic value at maturity.
    pub fn terminal(product: &Product, paths: &PathSet) -> Result<Self> {
        let maturity = product.maturity();
        let iv = product.intrinsic(paths, maturity)?;
        let amount: Vec<f64> = iv.iter().map(|&v| positive_part(v)).collect();
        let date = amount.iter().map(|&a| (a > 0.0).then_some(maturity)).collect();
        Ok(Self { amount, date })
    }

    pub fn exercise(&mut self, path: usize, amount: f64, step: usize) {
        self.amount[path] = amount;
        self.date[path] = Some(step);
    }

    /// Every paying path pays a positive amount at or after `step`; others pay nothing.
    pub fn is_consistent_after(&self, step: usize) -> bool {
        self.amount.len() == self.date.len()
            && self.amount.iter().zip(&self.date).all(|(&a, d)| match d {
                Some(k) => a > 0.0 && *k >= step,
                None => a == 0.0,
            })
    }

    /// Cashflows discounted to `t_0`.
    pub fn present_values(&self, r_y: f64, dt_years: f64) -> Vec<f64> {
        self.amount
            .iter()
            .zip(&self.date)
            .map(|(&a, d)| d.map_or(0.0, |k| a * (-r_y * k as f64 * dt_years).exp()))
            .collect()
    }
}

/// Live cashflows discounted to `step`.
pub fn regression_targets(state: &CashflowState, step: usize, r_y: f64, dt_years: f64) -> Array1<f64> {
    state
        .amount
        .iter()
        .zip(&state.date)
        .map(|(&a, d)| match d {
            Some(k) => {
                debug_assert!(*k > step);
                a * (-r_y * (*k - step) as f64 * dt_years).exp()
            }
            None => 0.0,
        })
        .collect()
}

/// Compensated sum; the result does not depend on how the input was produced.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + comp
}

/// Sample mean and its standard error (sample standard deviation over `sqrt(n)`).
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = neumaier_sum(values.iter().copied()) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss = neumaier_sum(values.iter().map(|v| (v - mean) * (v - mean)));
    (mean, (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LsmcConfig {
    /// Annualized risk-free rate used for discounting.
    pub r_y: f64,
    /// Fit only on paths with positive intrinsic value.
    pub itm_only: bool,
    /// Exercise dates whose fitted curves are recorded.
    pub dump_dates: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub date: usize,
    /// `None` when every target was zero and the fit was skipped.
    pub fit: Option<FitDiagnostics>,
    pub n_fit_paths: usize,
    pub exercised: usize,
    /// Fraction of all paths exercising at this date.
    pub exercise_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingResult {
    pub price: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// Ordered from the last exercise date before maturity back to the first.
    pub steps: Vec<StepDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitCurveRow {
    pub path_id: usize,
    pub date: usize,
    pub features: Vec<f64>,
    pub fitted: f64,
    pub truth: Option<f64>,
}

/// Per-path fitted continuation values at selected dates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitCurveDump {
    pub rows: Vec<FitCurveRow>,
}

impl FitCurveDump {
    /// CSV with columns `path_id,date,x0[,x1],fitted,truth`; `truth` is empty when unknown.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let n_feat = self.rows.first().map_or(1, |r| r.features.len());
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let xs: Vec<String> = (0..n_feat).map(|i| format!("x{i}")).collect();
        writeln!(out, "path_id,date,{},fitted,truth", xs.join(","))?;
        for r in &self.rows {
            let xs: Vec<String> = r.features.iter().map(|v| v.to_string()).collect();
            let truth = r.truth.map(|v| v.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{},{}", r.path_id, r.date, xs.join(","), r.fitted, truth)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsmcRun {
    pub result: PricingResult,
    pub dump: FitCurveDump,
    /// Regression targets at the first exercise date, over all paths.
    pub first_date_targets: Array1<f64>,
    pub state: CashflowState,
}

fn select_rows(a: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    a.select(Axis(0), rows)
}

/// Prices `product` on `paths`, building one continuation model per exercise
/// date from `factory`.
pub fn lsmc_price(
    paths: &PathSet,
    product: &Product,
    factory: &mut ModelFactory<'_>,
    cfg: &LsmcConfig,
    truth: Option<&TrueContinuation<'_>>,
) -> Result<LsmcRun> {
    product.check_paths(paths)?;
    if !cfg.r_y.is_finite() {
        return Err(Error::invalid("rate must be finite"));
    }
    let n = paths.n_paths;
    let dt = paths.dt_years;
    let dates = &product.exercise_dates;
    let mut state = CashflowState::terminal(product, paths)?;
    let mut steps = Vec::with_capacity(dates.len().saturating_sub(1));
    let mut dump = FitCurveDump::default();
    let mut first_date_targets = regression_targets(&state, 0, cfg.r_y, dt);

    for &k in dates[..dates.len() - 1].iter().rev() {
        let targets = regression_targets(&state, k, cfg.r_y, dt);
        let iv = product.intrinsic(paths, k)?;
        let features = product.features(paths, k)?;
        let population: Vec<usize> =
            if cfg.itm_only { (0..n).filter(|&i| iv[i] > 0.0).collect() } else { (0..n).collect() };

        let any_target = population.iter().any(|&i| targets[i] != 0.0);
        let (fitted, fit) = if any_target {
            let mut model = factory(k);
            let diag = if population.len() == n {
                model.fit(features.view(), targets.view())
            } else {
                let x = select_rows(&features, &population);
                let y = targets.select(Axis(0), &population);
                model.fit(x.view(), y.view())
            }
            .map_err(|e| Error::Fit { date: k, source: Box::new(e) })?;
            let fitted = model.predict(features.view()).map_err(|e| Error::Fit { date: k, source: Box::new(e) })?;
            if fitted.iter().any(|v| !v.is_finite()) {
                return Err(Error::Fit {
                    date: k,
                    source: Box::new(Error::NonFiniteLoss { epoch: diag.epochs, loss: f64::NAN }),
                });
            }
            (fitted, Some(diag))
        } else {
            (Array1::zeros(n), None)
        };

        let mut exercised = 0;
        for i in 0..n {
            if iv[i] > 0.0 && iv[i] > fitted[i] {
                state.exercise(i, iv[i], k);
                exercised += 1;
            }
        }
        debug_assert!(state.is_consistent_after(k));

        if cfg.dump_dates.contains(&k) {
            let true_values = truth.map(|f| f(features.view(), k));
            for i in 0..n {
                dump.rows.push(FitCurveRow {
                    path_id: i,
                    date: k,
                    features: features.row(i).to_vec(),
                    fitted: fitted[i],
                    truth: true_values.as_ref().map(|t| t[i]),
                });
            }
        }
        if k == dates[0] {
            first_date_targets = targets;
        }
        steps.push(StepDiagnostics {
            date: k,
            fit,
            n_fit_paths: population.len(),
            exercised,
            exercise_fraction: exercised as f64 / n as f64,
        });
    }
    if dates.len() == 1 {
        first_date_targets = Array1::zeros(n);
    }

    let pv = state.present_values(cfg.r_y, dt);
    let (price, std_error) = mean_and_std_error(&pv);
    Ok(LsmcRun {
        result: PricingResult { price, std_error, n_paths: n, seed: paths.seed, steps },
        dump,
        first_date_targets,
        state,
    })
}

/// Same contract without early exercise: discounted mean payoff at maturity.
pub fn european_price(paths: &PathSet, product: &Product, r_y: f64) -> Result<PricingResult> {
    let state = CashflowState::terminal(product, paths)?;
    let pv = state.present_values(r_y, paths.dt_years);
    let (price, std_error) = mean_and_std_error(&pv);
    Ok(PricingResult { price, std_error, n_paths: paths.n_paths, seed: paths.seed, steps: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{bs_price, BsInputs};
    use crate::market::{simulate_gbm, MarketSpec, StepUnit};
    use crate::poly_basis::{BasisFamily, BasisSpec, OlsModel};

    /// Predicts a constant; never exercises when the constant is large.
    struct Constant(f64);

    impl ContinuationModel for Constant {
        fn fit(&mut self, _: ArrayView2<f64>, _: ArrayView1<f64>) -> Result<FitDiagnostics> {
            Ok(FitDiagnostics { mse: 0.0, epochs: 0, model_id: None })
        }
        fn predict(&self, f: ArrayView2<f64>) -> Result<Array1<f64>> {
            Ok(Array1::from_elem(f.nrows(), self.0))
        }
        fn input_gradient(&self, f: ArrayView2<f64>) -> Result<Array2<f64>> {
            Ok(Array2::zeros(f.dim()))
        }
    }

    fn put_setup(n: usize, seed: u64) -> (PathSet, Product) {
        let spec = MarketSpec::new(4.0, 4.0, 0.2, 0.0, 0.0, 50, StepUnit::Day);
        (simulate_gbm(&spec, n, seed).unwrap(), Product::american_put(4.0, 50).unwrap())
    }

    #[test]
    fn never_exercising_equals_european() {
        let (paths, put) = put_setup(5000, 3);
        let mut factory = |_: usize| Box::new(Constant(1e9)) as Box<dyn ContinuationModel>;
        let run = lsmc_price(&paths, &put, &mut factory, &LsmcConfig::default(), None).unwrap();
        let eu = european_price(&paths, &put, 0.0).unwrap();
        assert_eq!(run.result.price, eu.price);
        assert!(run.result.steps.iter().all(|s| s.exercised == 0));
        assert_eq!(run.result.steps.len(), 49);
        assert_eq!(run.result.steps.last().unwrap().date, 1);
    }

    #[test]
    fn always_exercising_takes_first_itm_date() {
        let (paths, put) = put_setup(2000, 4);
        let mut factory = |_: usize| Box::new(Constant(-1.0)) as Box<dyn ContinuationModel>;
        let run = lsmc_price(&paths, &put, &mut factory, &LsmcConfig::default(), None).unwrap();
        for i in 0..paths.n_paths {
            let first = (1..=50).find(|&k| paths.prices[[i, k]] < 4.0);
            assert_eq!(run.state.date[i], first);
            if let Some(k) = first {
                assert_eq!(run.state.amount[i], 4.0 - paths.prices[[i, k]]);
            }
        }
        assert!(run.state.is_consistent_after(1));
    }

    #[test]
    fn ties_continue() {
        let spec = MarketSpec::new(4.0, 4.0, 0.0, 0.0, 0.0, 2, StepUnit::Day);
        let paths = PathSet { prices: ndarray::array![[4.0, 3.0, 3.0]], ..simulate_gbm(&spec, 1, 0).unwrap() };
        let put = Product::american_put(4.0, 2).unwrap();
        let mut factory = |_: usize| Box::new(Constant(1.0)) as Box<dyn ContinuationModel>;
        let run = lsmc_price(&paths, &put, &mut factory, &LsmcConfig::default(), None).unwrap();
        assert_eq!(run.state.date[0], Some(2));
    }

    #[test]
    fn zero_targets_skip_the_fit() {
        let (paths, _) = put_setup(200, 5);
        let deep_otm = Product::american_put(0.5, 50).unwrap();
        let mut calls = 0;
        let mut factory = |_: usize| {
            calls += 1;
            Box::new(Constant(0.0)) as Box<dyn ContinuationModel>
        };
        let run = lsmc_price(&paths, &deep_otm, &mut factory, &LsmcConfig::default(), None).unwrap();
        assert_eq!(calls, 0);
        assert_eq!(run.result.price, 0.0);
        assert!(run.result.steps.iter().all(|s| s.fit.is_none()));
    }

    #[test]
    fn targets_are_discounted_to_the_date() {
        let state = CashflowState { amount: vec![1.0, 0.0], date: vec![Some(5), None] };
        let t = regression_targets(&state, 2, 0.05, 0.1);
        assert!((t[0] - (-0.05f64 * 0.3).exp()).abs() < 1e-15);
        assert_eq!(t[1], 0.0);
        let pv = state.present_values(0.05, 0.1);
        assert!((pv[0] - (-0.025f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn invariant_detects_violations() {
        let ok = CashflowState { amount: vec![0.5, 0.0], date: vec![Some(3), None] };
        assert!(ok.is_consistent_after(3));
        assert!(!ok.is_consistent_after(4));
        let bad = CashflowState { amount: vec![0.5], date: vec![None] };
        assert!(!bad.is_consistent_after(0));
    }

    #[test]
    fn ols_lsmc_is_close_to_the_european_value() {
        let (paths, put) = put_setup(20_000, 11);
        let basis = BasisSpec::new(BasisFamily::Laguerre, 3).normalized_by(4.0);
        let mut factory = |_: usize| Box::new(OlsModel::new(basis)) as Box<dyn ContinuationModel>;
        let cfg = LsmcConfig { dump_dates: vec![1, 25], ..Default::default() };
        let truth = |f: ArrayView2<f64>, k: usize| {
            f.column(0).mapv(|s| bs_price(&BsInputs::put(s, 4.0, 0.2, 0.0, 0.0, (50 - k) as f64 / 252.0)))
        };
        let run = lsmc_price(&paths, &put, &mut factory, &cfg, Some(&truth)).unwrap();
        let bs = 0.1421;
        assert!((run.result.price - bs).abs() < 4.0 * run.result.std_error + 0.003, "{:?}", run.result.price);
        assert_eq!(run.dump.rows.len(), 40_000);
        assert!(run.dump.rows.iter().all(|r| r.truth.is_some()));
        assert_eq!(run.first_date_targets.len(), 20_000);
    }

    #[test]
    fn dump_csv_layout() {
        let dump = FitCurveDump {
            rows: vec![FitCurveRow { path_id: 0, date: 3, features: vec![1.0, 2.0], fitted: 0.5, truth: None }],
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("fit.csv");
        dump.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        assert_eq!(text, "path_id,date,x0,x1,fitted,truth\n0,3,1,2,0.5,\n");
    }

    #[test]
    fn summation_is_accurate() {
        let v: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1e16 } else { -1e16 }).chain([1.0]).collect();
        assert_eq!(neumaier_sum(v.iter().copied()), 1.0);
        let (m, se) = mean_and_std_error(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
    }
}
