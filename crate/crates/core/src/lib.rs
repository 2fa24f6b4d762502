//! Least-squares Monte Carlo pricing of American-style options with a
//! Kolmogorov-Arnold network, polynomial-basis, or MLP continuation model.
//!
//! The building blocks compose bottom-up: simulate paths with
//! [`market::simulate_gbm`], describe a contract with [`products::Product`],
//! pick a [`regressor::Regressor`], and run [`lsmc::lsmc_price`]. The
//! [`experiment`] module wires these together behind TOML configs and presets.

pub mod analytic;
pub mod error;
pub mod experiment;
pub mod greeks;
pub mod kan;
pub mod lsmc;
pub mod market;
pub mod mlp;
pub mod optim;
pub mod poly_basis;
pub mod products;
pub mod regressor;

pub use error::{Error, Result};
pub use lsmc::{ContinuationModel, FitDiagnostics};
