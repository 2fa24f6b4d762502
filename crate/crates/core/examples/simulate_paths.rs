//! Simulates GBM paths and checks the discounted mean against the spot.
//!
//! cargo run --release --example simulate_paths -- [out.csv]

use kan_lsmc::lsmc::mean_and_std_error;
use kan_lsmc::market::{simulate_gbm, MarketSpec, StepUnit};

fn main() -> kan_lsmc::Result<()> {
    let market = MarketSpec::new(100.0, 100.0, 0.25, 0.05, 0.0, 26, StepUnit::Week);
    let paths = simulate_gbm(&market, 20_000, 7)?;
    let disc = (-market.r_y * market.maturity_years()).exp();
    let terminal: Vec<f64> = paths.prices_at(market.n_steps).iter().map(|s| s * disc).collect();
    let (mean, se) = mean_and_std_error(&terminal);
    println!("discounted terminal mean {mean:.4} (se {se:.4}), spot {}", market.spot);
    if let Some(out) = std::env::args().nth(1) {
        paths.head(100).write_csv(out.as_ref())?;
        println!("first 100 paths written to {out}");
    }
    Ok(())
}
