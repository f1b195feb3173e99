//! Lipschitz constants for every supported architecture, next to the largest
//! Hessian eigenvalue found by sampling weights.
//!
//! ```text
//! cargo run --example bounds
//! ```

use lipstep::bounds::{lipschitz_report, multi_output_sigmoid_bound_safe};
use lipstep::experiments::generate_teacher_student;
use lipstep::net::{max_hessian_eig_sampled, Activation, NetworkArch};

fn main() -> lipstep::Result<()> {
    let archs = [
        NetworkArch::one_layer(4, 3, Activation::Relu)?,
        NetworkArch::one_layer(4, 3, Activation::Sigmoid)?,
        NetworkArch::two_layer(4, 3, 2, Activation::Relu)?,
        NetworkArch::two_layer(4, 3, 2, Activation::Sigmoid)?,
        NetworkArch::multi_output(4, 3, 2, Activation::Sigmoid)?,
    ];
    println!("{:<48} {:>12} {:>12} {:>10}", "architecture", "alpha", "sampled", "eta");
    for (seed, arch) in archs.iter().enumerate() {
        let problem = generate_teacher_student(arch, 50, seed as u64)?;
        let beta = 1.0;
        let report = lipschitz_report(arch, &problem.data, Some(beta))?;
        let sampled = max_hessian_eig_sampled(arch, &problem.data, 100, beta, 7)?;
        println!(
            "{:<48} {:>12.4} {:>12.4} {:>10.4}",
            arch.to_string(),
            report.alpha,
            sampled,
            report.eta
        );
        if arch.output_dim() > 1 {
            // The plain multi-output expression ignores the output-weight
            // block; the safe variant adds it back.
            let safe = multi_output_sigmoid_bound_safe(arch, &problem.data, beta)?;
            println!("{:<48} {:>12.4}", "  with output-weight block", safe.alpha);
        }
    }
    Ok(())
}
