//! Risk-neutral GBM path simulation on a discrete exercise grid.
//!
//! Every path draws from its own ChaCha stream (`stream = path index`) under
//! the run seed, so any partition of the path range into blocks reproduces the
//! single-threaded output bit for bit, and the first `n` paths of a larger
//! simulation are exactly the paths of an `n`-path simulation.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepUnit {
    Day,
    Week,
}

impl StepUnit {
    /// Default day-count basis: 252 trading days or 52 weeks per year.
    pub fn default_periods_per_year(self) -> u32 {
        match self {
            StepUnit::Day => 252,
            StepUnit::Week => 52,
        }
    }
}

/// Contract and market parameters shared by every pricing route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSpec {
    pub spot: f64,
    pub strike: f64,
    /// Annualized volatility.
    pub sigma_y: f64,
    /// Annualized continuously compounded risk-free rate.
    pub r_y: f64,
    /// Annualized dividend yield.
    pub div_y: f64,
    /// Number of simulation steps to maturity.
    pub n_steps: usize,
    pub step_unit: StepUnit,
    pub periods_per_year: u32,
}

impl MarketSpec {
    pub fn new(
        spot: f64,
        strike: f64,
        sigma_y: f64,
        r_y: f64,
        div_y: f64,
        n_steps: usize,
        step_unit: StepUnit,
    ) -> Self {
        Self {
            spot,
            strike,
            sigma_y,
            r_y,
            div_y,
            n_steps,
            step_unit,
            periods_per_year: step_unit.default_periods_per_year(),
        }
    }

    pub fn with_periods_per_year(mut self, periods: u32) -> Self {
        self.periods_per_year = periods;
        self
    }

    pub fn dt_years(&self) -> f64 {
        1.0 / self.periods_per_year as f64
    }

    pub fn maturity_years(&self) -> f64 {
        self.n_steps as f64 * self.dt_years()
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.spot, self.strike, self.sigma_y, self.r_y, self.div_y].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("market parameters must be finite"));
        }
        if self.spot <= 0.0 {
            return Err(Error::invalid("spot must be positive"));
        }
        if self.strike <= 0.0 {
            return Err(Error::invalid("strike must be positive"));
        }
        if self.sigma_y < 0.0 {
            return Err(Error::invalid("sigma_y must be non-negative"));
        }
        if self.n_steps == 0 {
            return Err(Error::invalid("n_steps must be at least 1"));
        }
        if self.periods_per_year == 0 {
            return Err(Error::invalid("periods_per_year must be at least 1"));
        }
        Ok(())
    }
}

/// How the running average treats the initial spot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwapConvention {
    /// Average of `S_0, ..., S_k`.
    IncludeT0,
    /// Average of `S_1, ..., S_k`; the value at `t_0` is the spot.
    ExcludeT0,
}

/// Simulated price matrix, one row per path, column 0 the spot.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub prices: Array2<f64>,
    pub twap: Option<Array2<f64>>,
    pub dt_years: f64,
    pub seed: u64,
    pub n_paths: usize,
}

impl PathSet {
    pub fn n_steps(&self) -> usize {
        self.prices.ncols() - 1
    }

    pub fn spot(&self) -> f64 {
        self.prices[[0, 0]]
    }

    pub fn prices_at(&self, step: usize) -> ArrayView1<'_, f64> {
        self.prices.column(step)
    }

    /// Returns a copy of the path set restricted to its first `n` paths.
    pub fn head(&self, n: usize) -> PathSet {
        let n = n.min(self.n_paths);
        PathSet {
            prices: self.prices.slice(ndarray::s![..n, ..]).to_owned(),
            twap: self.twap.as_ref().map(|t| t.slice(ndarray::s![..n, ..]).to_owned()),
            dt_years: self.dt_years,
            seed: self.seed,
            n_paths: n,
        }
    }

    /// Attaches the running time-weighted average, sampling one price every
    /// `stride` steps (stride 1 samples every simulation step). Between
    /// sampling dates the average carries its last value. Prices are untouched.
    pub fn with_twap(mut self, convention: TwapConvention, stride: usize) -> Self {
        let stride = stride.max(1);
        let (n, cols) = self.prices.dim();
        let mut twap = Array2::zeros((n, cols));
        for (row, mut out) in self.prices.rows().into_iter().zip(twap.rows_mut()) {
            let (mut sum, mut count) = match convention {
                TwapConvention::IncludeT0 => (row[0], 1usize),
                TwapConvention::ExcludeT0 => (0.0, 0usize),
            };
            out[0] = row[0];
            for k in 1..cols {
                if k % stride == 0 {
                    sum += row[k];
                    count += 1;
                }
                out[k] = if count == 0 { row[0] } else { sum / count as f64 };
            }
        }
        self.twap = Some(twap);
        self
    }

    /// Writes the price matrix as CSV: a header of step indices, then one row per path.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let header: Vec<String> = (0..self.prices.ncols()).map(|k| k.to_string()).collect();
        writeln!(out, "{}", header.join(","))?;
        for row in self.prices.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `e^{-r dt}`.
pub fn discount_factor(r_y: f64, dt_years: f64) -> f64 {
    (-r_y * dt_years).exp()
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Fills `rows` (a block of consecutive paths starting at `first_path`) with
/// exact log-Euler GBM steps.
fn simulate_block(spec: &MarketSpec, seed: u64, first_path: usize, mut rows: ndarray::ArrayViewMut2<f64>) {
    let dt = spec.dt_years();
    let drift = (spec.r_y - spec.div_y - 0.5 * spec.sigma_y * spec.sigma_y) * dt;
    let vol = spec.sigma_y * dt.sqrt();
    for (i, mut row) in rows.rows_mut().into_iter().enumerate() {
        let mut rng = path_rng(seed, first_path + i);
        let mut s = spec.spot;
        row[0] = s;
        for k in 1..row.len() {
            let z: f64 = StandardNormal.sample(&mut rng);
            s *= (drift + vol * z).exp();
            row[k] = s;
        }
    }
}

/// Simulates `n_paths` risk-neutral GBM paths on `spec.n_steps` steps.
pub fn simulate_gbm(spec: &MarketSpec, n_paths: usize, seed: u64) -> Result<PathSet> {
    spec.validate()?;
    if n_paths == 0 {
        return Err(Error::invalid("n_paths must be at least 1"));
    }
    let mut prices = Array2::zeros((n_paths, spec.n_steps + 1));
    simulate_block(spec, seed, 0, prices.view_mut());
    Ok(PathSet { prices, twap: None, dt_years: spec.dt_years(), seed, n_paths })
}

/// Same output as [`simulate_gbm`], produced block by block and optionally on
/// scoped threads. The result does not depend on `block_size` or `threads`.
pub fn simulate_gbm_blocked(
    spec: &MarketSpec,
    n_paths: usize,
    seed: u64,
    block_size: usize,
    threads: usize,
) -> Result<PathSet> {
    spec.validate()?;
    if n_paths == 0 {
        return Err(Error::invalid("n_paths must be at least 1"));
    }
    let block_size = block_size.max(1);
    let mut prices = Array2::zeros((n_paths, spec.n_steps + 1));
    let blocks: Vec<(usize, ndarray::ArrayViewMut2<f64>)> = prices
        .axis_chunks_iter_mut(ndarray::Axis(0), block_size)
        .enumerate()
        .map(|(b, view)| (b * block_size, view))
        .collect();
    if threads <= 1 {
        for (start, view) in blocks {
            simulate_block(spec, seed, start, view);
        }
    } else {
        let mut queues: Vec<Vec<(usize, ndarray::ArrayViewMut2<f64>)>> = (0..threads).map(|_| Vec::new()).collect();
        for (i, block) in blocks.into_iter().enumerate() {
            queues[i % threads].push(block);
        }
        std::thread::scope(|scope| {
            for queue in queues {
                scope.spawn(move || {
                    for (start, view) in queue {
                        simulate_block(spec, seed, start, view);
                    }
                });
            }
        });
    }
    Ok(PathSet { prices, twap: None, dt_years: spec.dt_years(), seed, n_paths })
}
