//! Model selection: named regressors, per-date factories, and the closed-form
//! continuation oracle.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::analytic::{bs_delta, bs_price, BsInputs, OptionKind};
use crate::error::{Error, Result};
use crate::kan::{KanConfig, KanRegressor};
use crate::lsmc::{ContinuationModel, FitDiagnostics};
use crate::market::MarketSpec;
use crate::mlp::{MlpConfig, MlpRegressor};
use crate::poly_basis::{BasisFamily, BasisSpec, OlsModel};
use crate::products::{Product, ProductKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    WeightedLaguerre,
    Hermite,
    Laguerre,
    /// Laguerre on `[S, TWAP]` with cross products.
    LaguerreCross,
    Kan,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::WeightedLaguerre,
        ModelKind::Hermite,
        ModelKind::Laguerre,
        ModelKind::LaguerreCross,
        ModelKind::Kan,
        ModelKind::Mlp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::WeightedLaguerre => "weighted_laguerre",
            ModelKind::Hermite => "hermite",
            ModelKind::Laguerre => "laguerre",
            ModelKind::LaguerreCross => "laguerre_cross",
            ModelKind::Kan => "kan",
            ModelKind::Mlp => "mlp",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name).ok_or_else(|| Error::Config(format!("unknown model `{name}`")))
    }

    pub fn is_basis(self) -> bool {
        !matches!(self, ModelKind::Kan | ModelKind::Mlp)
    }
}

/// Basis regression settings shared by the polynomial models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisConfig {
    pub order: usize,
    /// Order used by the cross-product model on two inputs.
    pub cross_order: usize,
    /// Divide price-like inputs by the spot before the transform.
    pub normalize_inputs: bool,
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self { order: 6, cross_order: 4, normalize_inputs: false }
    }
}

/// A fully resolved regressor, ready to build one fresh model per date.
#[derive(Debug, Clone, PartialEq)]
pub enum Regressor {
    Ols(BasisSpec),
    Kan(KanConfig),
    Mlp(MlpConfig),
}

impl Regressor {
    pub fn resolve(kind: ModelKind, basis: &BasisConfig, kan: &KanConfig, mlp: &MlpConfig, spot: f64) -> Self {
        let ols = |family, order| {
            let spec = BasisSpec::new(family, order);
            Regressor::Ols(if basis.normalize_inputs { spec.normalized_by(spot) } else { spec })
        };
        match kind {
            ModelKind::WeightedLaguerre => ols(BasisFamily::WeightedLaguerre, basis.order),
            ModelKind::Hermite => ols(BasisFamily::Hermite, basis.order),
            ModelKind::Laguerre => ols(BasisFamily::Laguerre, basis.order),
            ModelKind::LaguerreCross => match ols(BasisFamily::Laguerre, basis.cross_order) {
                Regressor::Ols(spec) => Regressor::Ols(spec.with_cross_products()),
                _ => unreachable!("basis model"),
            },
            ModelKind::Kan => Regressor::Kan(kan.clone()),
            ModelKind::Mlp => Regressor::Mlp(mlp.clone()),
        }
    }

    /// Model used for the first-date delta fit: basis regressions double their
    /// order, networks keep their architecture.
    pub fn for_delta(&self) -> Self {
        match self {
            Regressor::Ols(spec) => Regressor::Ols(spec.doubled()),
            other => other.clone(),
        }
    }

    /// A fresh, unfitted model. Networks are seeded with `seed`.
    pub fn build(&self, seed: u64) -> Box<dyn ContinuationModel> {
        match self {
            Regressor::Ols(spec) => Box::new(OlsModel::new(*spec)),
            Regressor::Kan(cfg) => Box::new(KanRegressor::new(cfg.clone(), seed)),
            Regressor::Mlp(cfg) => Box::new(MlpRegressor::new(cfg.clone(), seed)),
        }
    }

    /// Per-date factory; the network seed for date `k` is `seed + k`.
    pub fn factory(&self, seed: u64) -> impl FnMut(usize) -> Box<dyn ContinuationModel> + '_ {
        move |date| self.build(seed.wrapping_add(date as u64))
    }
}

/// European value of the same contract with the remaining life, used as the
/// true continuation value of puts and calls. Fitting is a no-op.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlackScholesContinuation {
    pub kind: OptionKind,
    pub strike: f64,
    pub sigma: f64,
    pub r: f64,
    pub q: f64,
    pub ttm_years: f64,
}

impl BlackScholesContinuation {
    /// Continuation at exercise date `date` of `product` under `market`.
    pub fn at(market: &MarketSpec, product: &Product, date: usize) -> Result<Self> {
        let kind = match product.kind {
            ProductKind::AmericanPut => OptionKind::Put,
            ProductKind::AmericanCall => OptionKind::Call,
            ProductKind::AsianAmericanCall => {
                return Err(Error::invalid("no closed-form continuation value for the asian call"));
            }
        };
        let maturity = product.maturity();
        if date >= maturity {
            return Err(Error::invalid(format!("date {date} is not before maturity {maturity}")));
        }
        Ok(Self {
            kind,
            strike: product.strike,
            sigma: market.sigma_y,
            r: market.r_y,
            q: market.div_y,
            ttm_years: (maturity - date) as f64 * market.dt_years(),
        })
    }

    fn inputs(&self, s: f64) -> BsInputs {
        BsInputs {
            s,
            k: self.strike,
            sigma: self.sigma,
            r: self.r,
            q: self.q,
            ttm_years: self.ttm_years,
            kind: self.kind,
        }
    }

    pub fn values(&self, spots: ArrayView1<f64>) -> Array1<f64> {
        spots.mapv(|s| bs_price(&self.inputs(s)))
    }
}

impl ContinuationModel for BlackScholesContinuation {
    fn fit(&mut self, features: ArrayView2<f64>, targets: ArrayView1<f64>) -> Result<FitDiagnostics> {
        let pred = self.predict(features)?;
        let mse = (&pred - &targets).mapv(|e| e * e).mean().unwrap_or(0.0);
        Ok(FitDiagnostics { mse, epochs: 0, model_id: None })
    }

    fn predict(&self, features: ArrayView2<f64>) -> Result<Array1<f64>> {
        if features.ncols() != 1 {
            return Err(Error::shape("1 feature column", features.ncols()));
        }
        Ok(self.values(features.column(0)))
    }

    fn input_gradient(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        if features.ncols() != 1 {
            return Err(Error::shape("1 feature column", features.ncols()));
        }
        let mut g = Array2::zeros((features.nrows(), 1));
        for (i, &s) in features.column(0).iter().enumerate() {
            g[[i, 0]] = bs_delta(&self.inputs(s))?;
        }
        Ok(g)
    }
}

/// Per-date factory returning the closed-form continuation value.
pub fn oracle_factory<'a>(
    market: &'a MarketSpec,
    product: &'a Product,
) -> impl FnMut(usize) -> Box<dyn ContinuationModel> + 'a {
    move |date| Box::new(BlackScholesContinuation::at(market, product, date).expect("date inside the schedule"))
}
