//! Run configuration, presets, and the commands behind the CLI.
//!
//! A run is described by one TOML document ([`ExperimentConfig`]). Every
//! result file embeds the resolved config, so feeding the emitted
//! `config.toml` back in reproduces the run bit for bit.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analytic::{bs_delta, bs_price, BsInputs, OptionKind};
use crate::error::{Error, Result};
use crate::greeks::{delta_estimate, fit_t1_model, oracle_delta, DeltaResult};
use crate::kan::KanConfig;
use crate::lsmc::{european_price, lsmc_price, FitCurveDump, LsmcConfig, LsmcRun, PricingResult};
use crate::market::{simulate_gbm, MarketSpec, PathSet, StepUnit, TwapConvention};
use crate::mlp::MlpConfig;
use crate::products::{Product, ProductKind};
use crate::regressor::{BasisConfig, BlackScholesContinuation, ModelKind, Regressor};

/// Environment variable that overrides the output directory.
pub const OUT_DIR_ENV: &str = "KAN_LSMC_OUT";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    /// Path simulation seed.
    pub paths: u64,
    /// Network initialization seed; the model for date `k` uses `model + k`.
    pub model: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductConfig {
    pub kind: ProductKind,
    /// Exercise every `exercise_stride` simulation steps.
    #[serde(default = "one")]
    pub exercise_stride: usize,
    #[serde(default = "default_twap")]
    pub twap: TwapConvention,
    /// Average one price every `twap_stride` simulation steps.
    #[serde(default = "one")]
    pub twap_stride: usize,
}

fn one() -> usize {
    1
}

fn default_twap() -> TwapConvention {
    TwapConvention::ExcludeT0
}

fn default_multiplier() -> usize {
    10
}

/// One run: market, contract, model, and Monte Carlo settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: ModelKind,
    pub n_paths: usize,
    /// The MLP trains and prices on this many times `n_paths`; the first
    /// `n_paths` of its set are the shared paths.
    #[serde(default = "default_multiplier")]
    pub mlp_path_multiplier: usize,
    #[serde(default)]
    pub itm_only: bool,
    /// Dates whose fitted curves are written; empty means the first, middle, and last date before maturity.
    #[serde(default)]
    pub dump_dates: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub seeds: Seeds,
    pub market: MarketSpec,
    pub product: ProductConfig,
    #[serde(default)]
    pub basis: BasisConfig,
    #[serde(default)]
    pub kan: KanConfig,
    #[serde(default)]
    pub mlp: MlpConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Table1,
    Table2,
    EuroDelta,
}

impl Preset {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "table1" => Ok(Preset::Table1),
            "table2" => Ok(Preset::Table2),
            "euro-delta" => Ok(Preset::EuroDelta),
            other => Err(Error::Config(format!("unknown preset `{other}` (expected table1, table2, euro-delta)"))),
        }
    }

    /// The preset's runs; `table2` has one per contract column.
    pub fn configs(self) -> Vec<ExperimentConfig> {
        match self {
            Preset::Table1 => vec![table1_config()],
            Preset::Table2 => TABLE2_CONTRACTS.iter().enumerate().map(|(i, c)| table2_config(i, c)).collect(),
            Preset::EuroDelta => vec![euro_delta_config()],
        }
    }
}

fn base_config(name: &str, model: ModelKind, market: MarketSpec, product: ProductConfig) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        model,
        n_paths: 10_000,
        mlp_path_multiplier: 10,
        itm_only: false,
        dump_dates: Vec::new(),
        out_dir: None,
        seeds: Seeds::default(),
        market,
        product,
        basis: BasisConfig::default(),
        kan: KanConfig::default(),
        mlp: MlpConfig::default(),
    }
}

/// American put: spot 4, strike 4, 50 trading days, 20% volatility, no rates.
pub fn table1_config() -> ExperimentConfig {
    let market = MarketSpec::new(4.0, 4.0, 0.2, 0.0, 0.0, 50, StepUnit::Day);
    let product = ProductConfig {
        kind: ProductKind::AmericanPut,
        exercise_stride: 1,
        twap: TwapConvention::ExcludeT0,
        twap_stride: 1,
    };
    base_config("table1", ModelKind::Kan, market, product)
}

/// `(strike, weeks, sigma)` of the four asian-american contracts; spot 100, rate 5%.
pub const TABLE2_CONTRACTS: [(f64, usize, f64); 4] =
    [(100.0, 13, 0.15), (100.0, 13, 0.25), (100.0, 26, 0.25), (105.0, 26, 0.25)];

fn table2_config(column: usize, &(strike, weeks, sigma): &(f64, usize, f64)) -> ExperimentConfig {
    let market = MarketSpec::new(100.0, strike, sigma, 0.05, 0.0, weeks, StepUnit::Week);
    let product = ProductConfig {
        kind: ProductKind::AsianAmericanCall,
        exercise_stride: 1,
        twap: TwapConvention::ExcludeT0,
        twap_stride: 1,
    };
    let mut cfg = base_config(&format!("table2-{}", column + 1), ModelKind::Kan, market, product);
    cfg.basis.normalize_inputs = true;
    cfg
}

/// European-call delta self-check: spot 100, strike 102, 30 days on a 250-day basis.
pub fn euro_delta_config() -> ExperimentConfig {
    let market = MarketSpec::new(100.0, 102.0, 0.2, 0.0, 0.0, 30, StepUnit::Day).with_periods_per_year(250);
    let product = ProductConfig {
        kind: ProductKind::AmericanCall,
        exercise_stride: 1,
        twap: TwapConvention::ExcludeT0,
        twap_stride: 1,
    };
    let mut cfg = base_config("euro-delta", ModelKind::Kan, market, product);
    cfg.n_paths = 500_000;
    cfg
}

/// Command-line overrides applied on top of a config or preset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub model: Option<ModelKind>,
    /// Sets both the path and the model seed.
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub basis_days: Option<u32>,
    pub itm_only: bool,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(m) = o.model {
            self.model = m;
        }
        if let Some(s) = o.seed {
            self.seeds = Seeds { paths: s, model: s };
        }
        if let Some(n) = o.paths {
            self.n_paths = n;
        }
        if let Some(days) = o.basis_days {
            if !matches!(days, 250 | 252) {
                return Err(Error::Config(format!("basis_days must be 250 or 252, got {days}")));
            }
            if self.market.step_unit != StepUnit::Day {
                return Err(Error::Config("basis_days applies to daily-step markets only".into()));
            }
            self.market.periods_per_year = days;
        }
        if o.itm_only {
            self.itm_only = true;
        }
        match (&o.out, std::env::var(OUT_DIR_ENV)) {
            (Some(out), _) => self.out_dir = Some(out.clone()),
            (None, Ok(env)) if !env.is_empty() => self.out_dir = Some(PathBuf::from(env)),
            _ => {}
        }
        self.validate()
    }

    /// Checks every field; errors name the offending key.
    pub fn validate(&self) -> Result<()> {
        let field = |key: &str, e: Error| Error::Config(format!("{key}: {e}"));
        self.market.validate().map_err(|e| field("market", e))?;
        if self.n_paths == 0 {
            return Err(Error::Config("n_paths: must be at least 1".into()));
        }
        if self.mlp_path_multiplier == 0 {
            return Err(Error::Config("mlp_path_multiplier: must be at least 1".into()));
        }
        if self.product.twap_stride == 0 {
            return Err(Error::Config("product.twap_stride: must be at least 1".into()));
        }
        let product = self.product().map_err(|e| field("product", e))?;
        if let Some(&d) =
            self.dump_dates.iter().find(|d| !product.exercise_dates[..product.exercise_dates.len() - 1].contains(d))
        {
            return Err(Error::Config(format!("dump_dates: {d} is not an exercise date before maturity")));
        }
        if self.model == ModelKind::LaguerreCross && product.n_features() != 2 {
            return Err(Error::Config("model: laguerre_cross needs a two-feature (asian) product".into()));
        }
        self.kan.train.validate().map_err(|e| field("kan.train", e))?;
        self.mlp.train.validate().map_err(|e| field("mlp.train", e))?;
        if self.model.is_basis() {
            if let Regressor::Ols(spec) = self.regressor() {
                spec.validate(product.n_features()).map_err(|e| field("basis", e))?;
            }
        }
        Ok(())
    }

    pub fn product(&self) -> Result<Product> {
        Product::new(self.product.kind, self.market.strike, self.market.n_steps, self.product.exercise_stride)
    }

    pub fn regressor(&self) -> Regressor {
        Regressor::resolve(self.model, &self.basis, &self.kan, &self.mlp, self.market.spot)
    }

    pub fn regressor_for(&self, model: ModelKind) -> Regressor {
        Regressor::resolve(model, &self.basis, &self.kan, &self.mlp, self.market.spot)
    }

    /// Dump dates, defaulting to the first, middle, and last date before maturity.
    pub fn resolved_dump_dates(&self) -> Result<Vec<usize>> {
        if !self.dump_dates.is_empty() {
            return Ok(self.dump_dates.clone());
        }
        let dates = self.product()?.exercise_dates;
        let before = &dates[..dates.len() - 1];
        let mut out = Vec::new();
        if let (Some(&first), Some(&last)) = (before.first(), before.last()) {
            out = vec![last, before[before.len() / 2], first];
            out.dedup();
        }
        Ok(out)
    }

    /// Output directory, else `results/<name>`. [`ExperimentConfig::apply`]
    /// fills it from `--out`, then `$KAN_LSMC_OUT`.
    pub fn output_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("results").join(&self.name))
    }

    fn paths_for(&self, multiplier: usize) -> Result<PathSet> {
        let paths = simulate_gbm(&self.market, self.n_paths * multiplier, self.seeds.paths)?;
        Ok(if self.product.kind == ProductKind::AsianAmericanCall {
            paths.with_twap(self.product.twap, self.product.twap_stride)
        } else {
            paths
        })
    }

    /// The shared path set, or the MLP's superset.
    pub fn simulate_for(&self, model: ModelKind) -> Result<PathSet> {
        self.paths_for(if model == ModelKind::Mlp { self.mlp_path_multiplier } else { 1 })
    }

    fn lsmc_config(&self, dump_dates: Vec<usize>) -> LsmcConfig {
        LsmcConfig { r_y: self.market.r_y, itm_only: self.itm_only, dump_dates }
    }

    fn truth(
        &self,
        product: &Product,
    ) -> Option<impl Fn(ndarray::ArrayView2<f64>, usize) -> ndarray::Array1<f64> + '_> {
        if product.needs_twap() {
            return None;
        }
        let product = product.clone();
        Some(move |f: ndarray::ArrayView2<f64>, k: usize| {
            BlackScholesContinuation::at(&self.market, &product, k).expect("date before maturity").values(f.column(0))
        })
    }

    /// Prices with `model` on `paths`, dumping fitted curves at `dump_dates`.
    pub fn run_lsmc(&self, model: ModelKind, paths: &PathSet, dump_dates: Vec<usize>) -> Result<LsmcRun> {
        let product = self.product()?;
        let regressor = self.regressor_for(model);
        let mut factory = regressor.factory(self.seeds.model);
        let truth = self.truth(&product);
        let truth_ref = truth.as_ref().map(|f| f as &crate::lsmc::TrueContinuation<'_>);
        lsmc_price(paths, &product, &mut factory, &self.lsmc_config(dump_dates), truth_ref)
    }

    /// Closed-form European value of the contract at `t_0`, when one exists.
    pub fn closed_form(&self) -> Option<(f64, f64)> {
        let kind = match self.product.kind {
            ProductKind::AmericanPut => OptionKind::Put,
            ProductKind::AmericanCall => OptionKind::Call,
            ProductKind::AsianAmericanCall => return None,
        };
        let m = &self.market;
        let inp = BsInputs {
            s: m.spot,
            k: m.strike,
            sigma: m.sigma_y,
            r: m.r_y,
            q: m.div_y,
            ttm_years: m.maturity_years(),
            kind,
        };
        Some((bs_price(&inp), bs_delta(&inp).ok()?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceReport {
    pub config: ExperimentConfig,
    pub model: ModelKind,
    pub result: PricingResult,
    /// Same contract without early exercise, on the same paths (asian products).
    pub eurasian: Option<PricingResult>,
    /// Closed-form European value (puts and calls).
    pub closed_form_price: Option<f64>,
}

/// Prices the configured contract and returns the fitted-curve dump alongside.
pub fn cmd_price(cfg: &ExperimentConfig) -> Result<(PriceReport, FitCurveDump)> {
    let paths = cfg.simulate_for(cfg.model)?;
    let run = cfg.run_lsmc(cfg.model, &paths, cfg.resolved_dump_dates()?)?;
    let product = cfg.product()?;
    let eurasian = if product.needs_twap() { Some(european_price(&paths, &product, cfg.market.r_y)?) } else { None };
    let report = PriceReport {
        config: cfg.clone(),
        model: cfg.model,
        result: run.result,
        eurasian,
        closed_form_price: cfg.closed_form().map(|c| c.0),
    };
    Ok((report, run.dump))
}

/// Delta stated for the put example alongside its closed-form value.
pub const STATED_PUT_DELTA: f64 = -0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub config: ExperimentConfig,
    pub model: String,
    /// Pricing run that produced the first-date targets; absent in oracle mode.
    pub price: Option<PricingResult>,
    pub delta: DeltaResult,
    pub closed_form_delta: Option<f64>,
    /// The −0.5 reference quoted for the put example, reported side by side.
    pub stated_delta: Option<f64>,
}

/// Pathwise delta. With `oracle_f` the closed-form European value replaces the fitted first-date model.
pub fn cmd_delta(cfg: &ExperimentConfig, oracle_f: bool) -> Result<DeltaReport> {
    let product = cfg.product()?;
    let closed_form_delta = cfg.closed_form().map(|c| c.1);
    let stated_delta = (product.kind == ProductKind::AmericanPut).then_some(STATED_PUT_DELTA);
    if oracle_f {
        let delta = oracle_delta(&cfg.market, &product, cfg.n_paths, cfg.seeds.paths)?;
        return Ok(DeltaReport {
            config: cfg.clone(),
            model: delta.model.clone(),
            price: None,
            delta,
            closed_form_delta,
            stated_delta,
        });
    }
    let (price, delta) = price_and_delta(cfg, cfg.model, &cfg.simulate_for(cfg.model)?)?;
    Ok(DeltaReport {
        config: cfg.clone(),
        model: cfg.model.name().into(),
        price: Some(price),
        delta,
        closed_form_delta,
        stated_delta,
    })
}

fn price_and_delta(cfg: &ExperimentConfig, model: ModelKind, paths: &PathSet) -> Result<(PricingResult, DeltaResult)> {
    let product = cfg.product()?;
    let run = cfg.run_lsmc(model, paths, Vec::new())?;
    let regressor = cfg.regressor_for(model);
    let t1_model = fit_t1_model(paths, &product, &regressor, run.first_date_targets.view(), cfg.seeds.model)?;
    let delta = delta_estimate(paths, &product, t1_model.as_ref(), cfg.market.r_y, model.name())?;
    Ok((run.result, delta))
}

/// One cell of a comparison table: a target value and what this run produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub target: Option<f64>,
    pub value: f64,
    pub std_error: Option<f64>,
}

impl Cell {
    pub fn abs_error(&self) -> Option<f64> {
        self.target.map(|t| (self.value - t).abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
    /// Tolerance bands that were checked and missed.
    pub breaches: Vec<String>,
}

impl ComparisonTable {
    pub fn row(&self, label: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    /// Aligned plain text: per column, target, reproduced value, and absolute error.
    pub fn render(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.title);
        let mut header = format!("{:<20}", "model");
        for c in &self.columns {
            header += &format!(" | {:^28}", c);
        }
        let _ = writeln!(out, "{header}");
        let mut sub = format!("{:<20}", "");
        for _ in &self.columns {
            sub += &format!(" | {:>8} {:>9} {:>9}", "target", "ours", "|err|");
        }
        let _ = writeln!(out, "{sub}");
        let _ = writeln!(out, "{}", "-".repeat(sub.len()));
        for r in &self.rows {
            let mut line = format!("{:<20}", r.label);
            for c in &r.cells {
                line += &format!(" | {:>8} {:>9.4} {:>9}", fmt(c.target), c.value, fmt(c.abs_error()));
            }
            let _ = writeln!(out, "{line}");
        }
        for b in &self.breaches {
            let _ = writeln!(out, "BREACH: {b}");
        }
        out
    }
}

/// Target values of the put example: closed-form price, then `(model, price, delta)`.
pub const TABLE1_CLOSED_FORM_PRICE: f64 = 0.1421;
pub const TABLE1_TARGETS: [(ModelKind, f64, f64); 4] = [
    (ModelKind::WeightedLaguerre, 0.1395, -0.4876),
    (ModelKind::Hermite, 0.1407, -0.4899),
    (ModelKind::Mlp, 0.1384, -0.4976),
    (ModelKind::Kan, 0.1427, -0.4970),
];

/// Asian-american targets per contract column, the matching eurasian values,
/// and per-model reference prices.
pub const TABLE2_TARGETS: [f64; 4] = [2.3210, 3.6500, 5.2660, 2.8580];
pub const TABLE2_EURASIAN: [f64; 4] = [2.1638, 3.3621, 4.7659, 2.6628];
pub const TABLE2_MODEL_VALUES: [(ModelKind, [f64; 4]); 3] = [
    (ModelKind::LaguerreCross, [2.2750, 3.5716, 5.0719, 2.7162]),
    (ModelKind::Mlp, [2.2601, 3.6134, 5.1422, 2.7943]),
    (ModelKind::Kan, [2.3216, 3.6589, 5.2382, 2.8309]),
];

/// Put-example comparison over `models`, all on the paths of `cfg` (the MLP on its superset).
pub fn reproduce_table1(cfg: &ExperimentConfig, models: &[ModelKind]) -> Result<ComparisonTable> {
    let mut rows = Vec::new();
    let (bs_p, bs_d) = cfg.closed_form().ok_or_else(|| Error::Config("table1 needs a put or call".into()))?;
    rows.push(TableRow {
        label: "black_scholes".into(),
        cells: vec![
            Cell { target: Some(TABLE1_CLOSED_FORM_PRICE), value: bs_p, std_error: None },
            Cell { target: Some(STATED_PUT_DELTA), value: bs_d, std_error: None },
        ],
    });
    let shared = cfg.simulate_for(ModelKind::Kan)?;
    let mut breaches = Vec::new();
    for &model in models {
        let superset;
        let paths = if model == ModelKind::Mlp {
            superset = cfg.simulate_for(model)?;
            &superset
        } else {
            &shared
        };
        let (price, delta) = price_and_delta(cfg, model, paths)?;
        let target = TABLE1_TARGETS.iter().find(|t| t.0 == model);
        let band = match model {
            ModelKind::Kan => Some(0.015),
            ModelKind::Hermite | ModelKind::WeightedLaguerre => Some(0.03),
            _ => None,
        };
        if let Some(band) = band {
            let err = (price.price / TABLE1_CLOSED_FORM_PRICE - 1.0).abs();
            if err > band {
                breaches.push(format!(
                    "{} price {:.4} is {:.2}% from {TABLE1_CLOSED_FORM_PRICE} (band {:.1}%)",
                    model.name(),
                    price.price,
                    100.0 * err,
                    100.0 * band
                ));
            }
        }
        rows.push(TableRow {
            label: model.name().into(),
            cells: vec![
                Cell { target: target.map(|t| t.1), value: price.price, std_error: Some(price.std_error) },
                Cell { target: target.map(|t| t.2), value: delta.delta, std_error: Some(delta.std_error) },
            ],
        });
    }
    Ok(ComparisonTable {
        title: format!("American put, {} paths, seed {}", cfg.n_paths, cfg.seeds.paths),
        columns: vec!["price".into(), "delta".into()],
        rows,
        breaches,
    })
}

/// Asian-american comparison over the four contract columns.
pub fn reproduce_table2(cfgs: &[ExperimentConfig], models: &[ModelKind]) -> Result<ComparisonTable> {
    if cfgs.len() != TABLE2_TARGETS.len() {
        return Err(Error::Config(format!("table2 needs {} contract configs", TABLE2_TARGETS.len())));
    }
    let mut eurasian = Vec::new();
    let mut by_model: Vec<Vec<Cell>> = vec![Vec::new(); models.len()];
    let mut breaches = Vec::new();
    for (col, cfg) in cfgs.iter().enumerate() {
        let shared = cfg.simulate_for(ModelKind::Kan)?;
        let eu = european_price(&shared, &cfg.product()?, cfg.market.r_y)?;
        if (eu.price - TABLE2_EURASIAN[col]).abs() > 3.0 * eu.std_error {
            breaches.push(format!(
                "column {}: eurasian {:.4} is more than 3 SE from {}",
                col + 1,
                eu.price,
                TABLE2_EURASIAN[col]
            ));
        }
        eurasian.push(Cell { target: Some(TABLE2_EURASIAN[col]), value: eu.price, std_error: Some(eu.std_error) });
        for (mi, &model) in models.iter().enumerate() {
            let superset;
            let paths = if model == ModelKind::Mlp {
                superset = cfg.simulate_for(model)?;
                &superset
            } else {
                &shared
            };
            let run = cfg.run_lsmc(model, paths, Vec::new())?;
            by_model[mi].push(Cell {
                target: Some(TABLE2_TARGETS[col]),
                value: run.result.price,
                std_error: Some(run.result.std_error),
            });
        }
    }
    if let Some(ki) = models.iter().position(|&m| m == ModelKind::Kan) {
        let within = by_model[ki].iter().filter(|c| c.abs_error().unwrap() <= 0.03 * c.target.unwrap()).count();
        if within < 3 {
            breaches.push(format!("kan within 3% of the target on {within} of 4 columns"));
        }
        if let Some(li) = models.iter().position(|&m| m == ModelKind::LaguerreCross) {
            let wins = (0..4).filter(|&c| by_model[ki][c].abs_error() < by_model[li][c].abs_error()).count();
            if wins < 3 {
                breaches.push(format!("kan beats laguerre_cross on {wins} of 4 columns"));
            }
        }
    }
    let mut rows = vec![TableRow { label: "eurasian".into(), cells: eurasian }];
    rows.extend(models.iter().zip(by_model).map(|(m, cells)| TableRow { label: m.name().into(), cells }));
    let columns = TABLE2_CONTRACTS.iter().map(|(k, w, s)| format!("K={k} T={w}w sigma={s}")).collect();
    Ok(ComparisonTable {
        title: format!("Asian-american call, {} paths, seed {}", cfgs[0].n_paths, cfgs[0].seeds.paths),
        columns,
        rows,
        breaches,
    })
}

/// Writes one CSV per `(model, date)` into `dir`; returns the files written.
pub fn cmd_emit_fit(cfg: &ExperimentConfig, models: &[ModelKind], dates: &[usize], dir: &Path) -> Result<Vec<PathBuf>> {
    if dates.is_empty() {
        return Err(Error::Config("no dates requested".into()));
    }
    let probe = ExperimentConfig { dump_dates: dates.to_vec(), ..cfg.clone() };
    probe.validate()?;
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for &model in models {
        let paths = cfg.simulate_for(model)?;
        let run = cfg.run_lsmc(model, &paths, dates.to_vec())?;
        for &d in dates {
            let part = FitCurveDump { rows: run.dump.rows.iter().filter(|r| r.date == d).cloned().collect() };
            let path = dir.join(format!("fit_{}_t{d}.csv", model.name()));
            write_atomic(&path, |p| part.write_csv(p))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Simulates the configured paths and writes the price matrix as CSV.
pub fn cmd_simulate(cfg: &ExperimentConfig, file: &Path) -> Result<()> {
    let paths = cfg.simulate_for(ModelKind::Kan)?;
    write_atomic(file, |p| paths.write_csv(p))
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let tmp = path.with_extension("tmp");
    write(&tmp)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |p| Ok(std::fs::write(p, serde_json::to_string_pretty(value)?)?))
}

/// Process exit code for an error: 2 for configuration, 3 for numeric failure, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numeric_failure() {
        return 3;
    }
    match err {
        Error::Config(_) | Error::InvalidInput(_) | Error::Shape { .. } => 2,
        _ => 1,
    }
}
