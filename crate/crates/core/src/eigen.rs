//! Largest-eigenvalue estimates for symmetric matrices.
//!
//! Power iteration gives `lambda_max` of a PSD matrix to a requested relative
//! tolerance. Gershgorin discs and Brauer's ovals of Cassini give cheap upper
//! bounds that need no iteration at all.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const START_VECTOR_SEED: u64 = 0x5eed_1a5c_0ffe_e000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerIterationOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerIterationOptions {
    fn default() -> Self {
        PowerIterationOptions {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix.
///
/// Stops once the residual `||A v - lambda v||` drops below `tol * lambda`,
/// or once the extrapolated remaining change in the Rayleigh quotient is
/// well below `tol * lambda`. The start vector is drawn from a fixed seed, so
/// results are reproducible.
pub fn power_iteration(matrix: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<f64> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(Error::InvalidArgument(format!(
            "power iteration needs a square matrix, got {}x{}",
            n,
            matrix.ncols()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(START_VECTOR_SEED);
    let mut v = DVector::from_fn(n, |_, _| rng.random_range(0.5..1.5) * rng_sign(&mut rng));
    v /= v.norm();

    let mut lambda = 0.0;
    let mut prev_lambda = f64::NAN;
    let mut prev_residual = f64::NAN;
    for iter in 0..max_iter {
        let w = matrix * &v;
        lambda = v.dot(&w);
        let w_norm = w.norm();
        if w_norm == 0.0 {
            return Ok(0.0);
        }
        let residual = (&w - &v * lambda).norm();
        let scale = lambda.abs().max(f64::MIN_POSITIVE);
        if residual <= tol * scale {
            return Ok(lambda);
        }
        if iter > 10 && prev_residual.is_finite() {
            let rate = residual / prev_residual;
            if rate < 1.0 {
                let rate2 = rate * rate;
                let remaining = (lambda - prev_lambda).abs() * rate2 / (1.0 - rate2);
                if remaining <= 0.1 * tol * scale {
                    return Ok(lambda);
                }
            }
        }
        prev_lambda = lambda;
        prev_residual = residual;
        v = w / w_norm;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        last_estimate: lambda,
    })
}

fn rng_sign<R: Rng>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// [`power_iteration`] with default tolerance and iteration cap.
pub fn power_iteration_default(matrix: &DMatrix<f64>) -> Result<f64> {
    let opts = PowerIterationOptions::default();
    power_iteration(matrix, opts.tol, opts.max_iter)
}

fn off_diagonal_row_sums(matrix: &DMatrix<f64>) -> Vec<f64> {
    (0..matrix.nrows())
        .map(|i| {
            matrix
                .row(i)
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, a)| a.abs())
                .sum()
        })
        .collect()
}

/// Gershgorin upper bound `max_i (a_ii + R_i)` with `R_i` the absolute
/// off-diagonal row sum.
pub fn gershgorin_bound(matrix: &DMatrix<f64>) -> f64 {
    assert_eq!(matrix.nrows(), matrix.ncols(), "square matrix required");
    off_diagonal_row_sums(matrix)
        .iter()
        .enumerate()
        .map(|(i, r)| matrix[(i, i)] + r)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Upper bound from Brauer's ovals of Cassini:
/// `max_{i != j} (a_ii + a_jj)/2 + sqrt(((a_ii - a_jj)/2)^2 + R_i R_j)`.
pub fn brauer_cassini_bound(matrix: &DMatrix<f64>) -> Result<f64> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(Error::InvalidArgument("square matrix required".into()));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(
            "ovals of Cassini need a matrix of size at least 2".into(),
        ));
    }
    let r = off_diagonal_row_sums(matrix);
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (matrix[(i, i)], matrix[(j, j)]);
            let half_gap = 0.5 * (a - b);
            let bound = 0.5 * (a + b) + (half_gap * half_gap + r[i] * r[j]).sqrt();
            best = best.max(bound);
        }
    }
    Ok(best)
}

/// Largest eigenvalue of a symmetric (possibly indefinite) matrix via a dense
/// symmetric eigendecomposition.
pub fn symmetric_max_eigenvalue(matrix: &DMatrix<f64>) -> f64 {
    if matrix.is_empty() {
        return 0.0;
    }
    matrix
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}
