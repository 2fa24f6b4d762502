//! Fits a small KAN to a put payoff smoothed by a closed-form value and
//! reports the fit error and the input gradient at a few points.
//!
//! cargo run --release --example kan_regression

use kan_lsmc::analytic::{bs_delta, bs_price, BsInputs};
use kan_lsmc::kan::{kan_init, kan_train, GridConfig};
use kan_lsmc::optim::TrainConfig;
use ndarray::{Array1, Array2};

fn main() -> kan_lsmc::Result<()> {
    let put = |s: f64| BsInputs::put(s, 4.0, 0.2, 0.0, 0.0, 0.1);
    let x = Array2::from_shape_fn((2000, 1), |(i, _)| 3.0 + 2.0 * i as f64 / 2000.0);
    let y: Array1<f64> = x.column(0).mapv(|s| bs_price(&put(s)));
    let mut net = kan_init(&[1, 3, 1], GridConfig::default(), 0)?;
    let report = kan_train(&mut net, x.view(), y.view(), &TrainConfig { epochs: 1000, ..Default::default() })?;
    println!("{} epochs, mse {:.2e}, {} parameters", report.epochs_run, report.final_mse, net.parameter_count());
    let probe = Array2::from_shape_vec((3, 1), vec![3.6, 4.0, 4.4]).expect("shape");
    let fitted = net.forward(probe.view())?;
    let grad = net.input_gradient(probe.view())?;
    for (i, &s) in probe.column(0).iter().enumerate() {
        println!(
            "S={s}: value {:.5} vs {:.5}, slope {:.4} vs {:.4}",
            fitted[i],
            bs_price(&put(s)),
            grad[[i, 0]],
            bs_delta(&put(s))?
        );
    }
    Ok(())
}
