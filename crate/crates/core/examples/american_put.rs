//! Prices the one-year-fraction American put with every single-asset model on
//! one shared path set and compares against the closed-form European value.
//!
//! cargo run --release --example american_put -- [seed]

use kan_lsmc::experiment::{table1_config, Overrides};
use kan_lsmc::regressor::ModelKind;

fn main() -> kan_lsmc::Result<()> {
    let seed = std::env::args().nth(1).map_or(0, |s| s.parse().expect("seed must be an integer"));
    let mut cfg = table1_config();
    cfg.apply(&Overrides { seed: Some(seed), ..Default::default() })?;
    let (european, _) = cfg.closed_form().expect("put has a closed form");
    let paths = cfg.simulate_for(ModelKind::Kan)?;
    println!("closed-form european {european:.5}");
    for model in [ModelKind::WeightedLaguerre, ModelKind::Hermite, ModelKind::Laguerre, ModelKind::Kan] {
        let r = cfg.run_lsmc(model, &paths, Vec::new())?.result;
        println!(
            "{:<18} {:.5} (se {:.5}, {:+.2}%)",
            model.name(),
            r.price,
            r.std_error,
            100.0 * (r.price / european - 1.0)
        );
    }
    Ok(())
}
