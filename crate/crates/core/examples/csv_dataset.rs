//! Bring your own data: a regression CSV with a bias column, the sigmoid
//! bound for it, and a training trace written back out as CSV.
//!
//! Columns named `x*` are inputs and `y*` targets. The bias is just another
//! input column fixed at one.

use std::fmt::Write;

use lipstep::bounds::lipschitz_report;
use lipstep::experiments::xavier_uniform;
use lipstep::net::{Activation, Dataset, NetworkArch};
use lipstep::optim::gd_train;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> lipstep::Result<()> {
    // Five daily changes and the next value of a slowly drifting series.
    let mut csv = String::from("x_1,x_2,x_3,x_4,x_5,x_bias,y\n");
    let series: Vec<f64> = (0..80).map(|t| 1.2 + 0.05 * (t as f64 * 0.3).sin()).collect();
    for w in series.windows(7) {
        let changes: Vec<String> = w.windows(2).take(5).map(|p| (p[1] - p[0]).to_string()).collect();
        writeln!(csv, "{},1,{}", changes.join(","), w[6]).unwrap();
    }
    let data = Dataset::read_csv(csv.as_bytes())?;

    let arch = NetworkArch::one_layer(data.input_dim(), 10, Activation::Sigmoid)?;
    let report = lipschitz_report(&arch, &data, None)?;
    println!("{} samples, alpha = {:.4}, eta = {:.4}", data.len(), report.alpha, report.eta);

    let init = xavier_uniform(&arch, &mut ChaCha8Rng::seed_from_u64(0));
    let (trace, _) = gd_train(&arch, &init, &data, report.eta, 500)?;
    println!("loss {:.6} -> {:.6}, monotone: {}", trace.initial_loss(), trace.final_loss(), trace.monotone);

    let mut out = Vec::new();
    trace.write_csv(&mut out).map_err(|e| lipstep::Error::InvalidArgument(e.to_string()))?;
    let text = String::from_utf8(out).unwrap();
    for line in text.lines().take(4) {
        println!("{line}");
    }
    println!("...");
    Ok(())
}
