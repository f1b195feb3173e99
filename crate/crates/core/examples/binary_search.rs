//! Tuning the GD step by binary search upward from `1/alpha`, and the same
//! budget spent on uniform random draws.

use lipstep::bounds::lipschitz_report;
use lipstep::experiments::generate_teacher_student;
use lipstep::net::{Activation, NetworkArch};
use lipstep::tuner::{binary_search_tune, random_search_tune};

fn main() -> lipstep::Result<()> {
    let arch = NetworkArch::two_layer(5, 3, 2, Activation::Sigmoid)?;
    let problem = generate_teacher_student(&arch, 100, 11)?;
    let beta = 1.05 * problem.init.max_abs();
    let alpha = lipschitz_report(&arch, &problem.data, Some(beta))?.alpha;
    let (evals, epochs) = (10, 100);

    let binary = binary_search_tune(&arch, &problem.init, &problem.data, alpha, evals, epochs)?;
    println!("binary search from 1/alpha = {:.4}\n{}", 1.0 / alpha, binary.table());

    let random =
        random_search_tune(&arch, &problem.init, &problem.data, (1e-4, 1.0), evals + 1, epochs, 5)?;
    println!("random search over [1e-4, 1]\n{}", random.table());
    Ok(())
}
