//! Writes fitted continuation values next to the closed-form continuation at a
//! few exercise dates, one CSV per model and date.
//!
//! cargo run --release --example fit_curves -- [out_dir]

use std::path::PathBuf;

use kan_lsmc::experiment::{cmd_emit_fit, table1_config};
use kan_lsmc::regressor::ModelKind;

fn main() -> kan_lsmc::Result<()> {
    let dir = std::env::args().nth(1).map_or_else(|| PathBuf::from("results/fit_curves"), PathBuf::from);
    let cfg = table1_config();
    let models = [ModelKind::WeightedLaguerre, ModelKind::Hermite, ModelKind::Kan];
    for file in cmd_emit_fit(&cfg, &models, &[1, 25, 49], &dir)? {
        println!("{}", file.display());
    }
    Ok(())
}
