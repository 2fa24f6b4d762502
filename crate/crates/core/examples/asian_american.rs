//! Asian-american calls on the TWAP: early-exercise prices from the cross
//! Laguerre basis and the KAN next to the maturity-only (eurasian) value.
//!
//! cargo run --release --example asian_american

use kan_lsmc::experiment::{reproduce_table2, Preset};
use kan_lsmc::regressor::ModelKind;

fn main() -> kan_lsmc::Result<()> {
    let table = reproduce_table2(&Preset::Table2.configs(), &[ModelKind::LaguerreCross, ModelKind::Kan])?;
    print!("{}", table.render());
    Ok(())
}
