//! The eigenvalue tools behind the one-layer ReLU constant: the stacked Gram
//! matrix, power iteration and the Gershgorin and Brauer bounds.

use lipstep::bounds::{data_gram, one_layer_relu_exact_with, ReluOptions, StackedGram};
use lipstep::eigen::{brauer_cassini_bound, gershgorin_bound, power_iteration_default};
use lipstep::experiments::generate_teacher_student;
use lipstep::net::{Activation, NetworkArch};

fn main() -> lipstep::Result<()> {
    let (d, k) = (5, 4);
    let arch = NetworkArch::one_layer(d, k, Activation::Relu)?;
    let data = generate_teacher_student(&arch, 200, 1)?.data;

    let gram = data_gram(&data);
    let stacked = StackedGram::new(&data, k);
    let m = stacked.matrix();
    println!("data Gram {d}x{d}, stacked Gram {}x{}", m.nrows(), m.ncols());
    println!("  k * lambda_max(gram)  {:.6}", k as f64 * power_iteration_default(&gram)?);
    println!("  lambda_max(stacked)   {:.6}", power_iteration_default(m)?);
    println!("  Brauer                {:.6}", brauer_cassini_bound(m)?);
    println!("  Gershgorin            {:.6}", gershgorin_bound(m));

    let report = one_layer_relu_exact_with(
        &arch,
        &data,
        ReluOptions { stacked_bounds: true, ..Default::default() },
    )?;
    println!("\n{}", report.to_json());
    Ok(())
}
