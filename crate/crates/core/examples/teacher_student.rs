//! A small batch of teacher-student experiments comparing binary search,
//! random search and Adam, run in parallel.
//!
//! Pass a directory to also write `summary.json`, `table.csv` and the traces:
//!
//! ```text
//! cargo run --release --example teacher_student -- /tmp/run
//! ```

use std::path::PathBuf;

use lipstep::experiments::{run_comparison, ExperimentConfig, Method};
use lipstep::net::{Activation, NetworkArch};
use lipstep::optim::OptimizerConfig;

fn main() -> lipstep::Result<()> {
    let arch = NetworkArch::one_layer(10, 10, Activation::Relu)?;
    let mut config = ExperimentConfig::new(arch, 10, 20, 2024);
    config.methods.push(Method::Optimizer { optimizer: OptimizerConfig::adam(0.01) });

    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let summary = run_comparison(&config, jobs)?;
    print!("{}", summary.render());

    if let Some(dir) = std::env::args().nth(1).map(PathBuf::from) {
        summary.write_run_dir(&dir)?;
        println!("run directory written to {}", dir.display());
    }
    Ok(())
}
