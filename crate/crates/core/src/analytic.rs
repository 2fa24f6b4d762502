//! Closed-form Black-Scholes values and a Cox-Ross-Rubinstein American tree.
//!
//! These are ground truth for tests and for the "true continuation value"
//! column of fit-curve dumps; they never feed the Monte Carlo estimators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionKind {
    Call,
    Put,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsInputs {
    pub s: f64,
    pub k: f64,
    /// Annualized volatility.
    pub sigma: f64,
    /// Annualized rate.
    pub r: f64,
    /// Annualized dividend yield.
    pub q: f64,
    pub ttm_years: f64,
    pub kind: OptionKind,
}

impl BsInputs {
    pub fn put(s: f64, k: f64, sigma: f64, r: f64, q: f64, ttm_years: f64) -> Self {
        Self { s, k, sigma, r, q, ttm_years, kind: OptionKind::Put }
    }

    pub fn call(s: f64, k: f64, sigma: f64, r: f64, q: f64, ttm_years: f64) -> Self {
        Self { s, k, sigma, r, q, ttm_years, kind: OptionKind::Call }
    }

    fn intrinsic(&self) -> f64 {
        match self.kind {
            OptionKind::Call => (self.s - self.k).max(0.0),
            OptionKind::Put => (self.k - self.s).max(0.0),
        }
    }

    fn d1_d2(&self) -> (f64, f64) {
        let vol_sqrt_t = self.sigma * self.ttm_years.sqrt();
        let d1 =
            ((self.s / self.k).ln() + (self.r - self.q + 0.5 * self.sigma * self.sigma) * self.ttm_years) / vol_sqrt_t;
        (d1, d1 - vol_sqrt_t)
    }
}

/// Standard normal CDF via `erfc`, accurate to double precision.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// European price. The put follows the textbook formula with the forward
/// `s e^{-qT}`; the call comes from put-call parity. Zero time to maturity
/// returns intrinsic value; zero total variance returns the discounted
/// deterministic payoff.
pub fn bs_price(inp: &BsInputs) -> f64 {
    if inp.ttm_years <= 0.0 {
        return inp.intrinsic();
    }
    let disc_k = inp.k * (-inp.r * inp.ttm_years).exp();
    let fwd_s = inp.s * (-inp.q * inp.ttm_years).exp();
    let put = if inp.sigma * inp.ttm_years.sqrt() == 0.0 {
        (disc_k - fwd_s).max(0.0)
    } else {
        let (d1, d2) = inp.d1_d2();
        disc_k * std_normal_cdf(-d2) - fwd_s * std_normal_cdf(-d1)
    };
    match inp.kind {
        OptionKind::Put => put,
        OptionKind::Call => put + fwd_s - disc_k,
    }
}

/// Spot delta. Undefined at expiry, where the payoff has a kink.
pub fn bs_delta(inp: &BsInputs) -> Result<f64> {
    if inp.ttm_years <= 0.0 {
        return Err(Error::invalid("delta is undefined at zero time to maturity"));
    }
    let carry = (-inp.q * inp.ttm_years).exp();
    let call_prob = if inp.sigma * inp.ttm_years.sqrt() == 0.0 {
        let fwd_s = inp.s * carry;
        let disc_k = inp.k * (-inp.r * inp.ttm_years).exp();
        if fwd_s > disc_k {
            1.0
        } else {
            0.0
        }
    } else {
        std_normal_cdf(inp.d1_d2().0)
    };
    Ok(match inp.kind {
        OptionKind::Call => carry * call_prob,
        OptionKind::Put => carry * (call_prob - 1.0),
    })
}

/// Cox-Ross-Rubinstein binomial price with early exercise at every node.
pub fn crr_american_price(inp: &BsInputs, n_tree_steps: usize) -> Result<f64> {
    if n_tree_steps == 0 {
        return Err(Error::invalid("tree needs at least one step"));
    }
    if inp.ttm_years <= 0.0 {
        return Ok(inp.intrinsic());
    }
    let payoff = |s: f64| match inp.kind {
        OptionKind::Call => (s - inp.k).max(0.0),
        OptionKind::Put => (inp.k - s).max(0.0),
    };
    let dt = inp.ttm_years / n_tree_steps as f64;
    let u = (inp.sigma * dt.sqrt()).exp();
    if u == 1.0 {
        // Deterministic forward path: exercise now or at the best future node.
        let growth = ((inp.r - inp.q) * dt).exp();
        let disc = (-inp.r * dt).exp();
        let mut best = payoff(inp.s);
        let mut s = inp.s;
        let mut df = 1.0;
        for _ in 0..n_tree_steps {
            s *= growth;
            df *= disc;
            best = best.max(df * payoff(s));
        }
        return Ok(best);
    }
    let d = 1.0 / u;
    let disc = (-inp.r * dt).exp();
    let p = (((inp.r - inp.q) * dt).exp() - d) / (u - d);
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("tree step too coarse: risk-neutral probability outside [0, 1]"));
    }
    let n = n_tree_steps;
    let u2 = u * u;
    let mut s = inp.s * d.powi(n as i32);
    let mut values = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        values.push(payoff(s));
        s *= u2;
    }
    for step in (0..n).rev() {
        let mut s = inp.s * d.powi(step as i32);
        for j in 0..=step {
            let cont = disc * (p * values[j + 1] + (1.0 - p) * values[j]);
            values[j] = cont.max(payoff(s));
            s *= u2;
        }
    }
    Ok(values[0])
}
