//! Pathwise delta: the perfect-fit check on a European call, then the KAN
//! estimate for the American put.
//!
//! cargo run --release --example delta_check -- [paths]

use kan_lsmc::analytic::{bs_delta, BsInputs};
use kan_lsmc::experiment::{cmd_delta, table1_config};
use kan_lsmc::greeks::{perfect_fit_delta_check, perfect_fit_market};

fn main() -> kan_lsmc::Result<()> {
    let n = std::env::args().nth(1).map_or(500_000, |s| s.parse().expect("paths must be an integer"));
    let market = perfect_fit_market(250);
    let exact =
        bs_delta(&BsInputs::call(market.spot, market.strike, market.sigma_y, 0.0, 0.0, market.maturity_years()))?;
    let d = perfect_fit_delta_check(&market, n, 0)?;
    println!("call, closed-form first-date model: {:.5} (se {:.5}); exact {exact:.5}", d.delta, d.std_error);

    let report = cmd_delta(&table1_config(), false)?;
    println!(
        "put, kan first-date model: {:.4} (se {:.4}); closed-form european {:.4}",
        report.delta.delta,
        report.delta.std_error,
        report.closed_form_delta.unwrap_or(f64::NAN)
    );
    Ok(())
}
