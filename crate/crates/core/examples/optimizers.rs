//! Gradient descent at the derived rate against the adaptive optimizers, all
//! from the same initialization.

use lipstep::bounds::lipschitz_report;
use lipstep::experiments::{auc_trace, generate_teacher_student};
use lipstep::net::{Activation, NetworkArch};
use lipstep::optim::{train, OptimizerConfig};

fn main() -> lipstep::Result<()> {
    let arch = NetworkArch::one_layer(10, 10, Activation::Sigmoid)?;
    let problem = generate_teacher_student(&arch, 100, 3)?;
    let alpha = lipschitz_report(&arch, &problem.data, None)?.alpha;
    let epochs = 100;

    let configs = [
        OptimizerConfig::gd(1.0 / alpha),
        OptimizerConfig::adam(0.01),
        OptimizerConfig::adagrad(0.1),
        OptimizerConfig::adadelta(1.0),
        OptimizerConfig::rmsprop(0.01),
    ];
    println!("alpha = {alpha:.4}, eta = 1/alpha = {:.4}\n", 1.0 / alpha);
    println!("{:<10} {:>10} {:>14} {:>12} {:>9}", "optimizer", "lr", "final loss", "AUC", "monotone");
    for config in &configs {
        let (trace, _) = train(&arch, &problem.init, &problem.data, config, epochs)?;
        println!(
            "{:<10} {:>10.4} {:>14.6e} {:>12.4} {:>9}",
            config.name(),
            config.learning_rate(),
            trace.final_loss(),
            auc_trace(&trace),
            trace.monotone
        );
    }
    Ok(())
}
