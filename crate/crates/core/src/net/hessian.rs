//! Finite-difference Hessian of the quadratic loss.
//!
//! This is the reference against which every closed-form bound is checked:
//! the gradient-Lipschitz constant of a twice differentiable loss is the
//! supremum of the largest Hessian eigenvalue, so sampling parameter points
//! and taking `lambda_max` of the numeric Hessian gives a lower estimate of it.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eigen::symmetric_max_eigenvalue;
use crate::error::{Error, Result};
use crate::net::model::loss_raw;
use crate::net::{Activation, Dataset, NetworkArch, ParamVector, Shape};

/// Largest parameter count [`hessian_numeric`] accepts by default.
pub const DEFAULT_HESSIAN_CAP: usize = 200;

const HESSIAN_STEP: f64 = 1e-4;

fn step(theta_i: f64) -> f64 {
    HESSIAN_STEP * (1.0 + theta_i.abs())
}

/// Unsymmetrized four-point finite-difference Hessian of the loss, every
/// entry computed independently.
pub fn hessian_numeric_raw(
    arch: &NetworkArch,
    params: &ParamVector,
    data: &Dataset,
    cap: usize,
) -> Result<DMatrix<f64>> {
    params.check(arch)?;
    data.check(arch)?;
    let p = arch.param_count();
    if p > cap {
        return Err(Error::HessianCapExceeded { params: p, cap });
    }
    let base = params.as_slice();
    let mut theta = base.to_vec();
    let f = |theta: &mut [f64], i: usize, di: f64, j: usize, dj: f64| {
        theta[i] += di;
        theta[j] += dj;
        let v = loss_raw(arch, theta, data);
        theta[i] = base[i];
        theta[j] = base[j];
        v
    };
    let mut h = DMatrix::zeros(p, p);
    for i in 0..p {
        let hi = step(base[i]);
        for j in 0..p {
            let hj = step(base[j]);
            let fpp = f(&mut theta, i, hi, j, hj);
            let fpm = f(&mut theta, i, hi, j, -hj);
            let fmp = f(&mut theta, i, -hi, j, hj);
            let fmm = f(&mut theta, i, -hi, j, -hj);
            h[(i, j)] = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
        }
    }
    Ok(h)
}

/// Symmetrized finite-difference Hessian `(H + H^T) / 2` of the loss.
///
/// Step `h_i = 1e-4 (1 + |theta_i|)`. Refuses parameter counts above
/// [`DEFAULT_HESSIAN_CAP`]; use [`hessian_numeric_with_cap`] to raise it.
pub fn hessian_numeric(
    arch: &NetworkArch,
    params: &ParamVector,
    data: &Dataset,
) -> Result<DMatrix<f64>> {
    hessian_numeric_with_cap(arch, params, data, DEFAULT_HESSIAN_CAP)
}

pub fn hessian_numeric_with_cap(
    arch: &NetworkArch,
    params: &ParamVector,
    data: &Dataset,
    cap: usize,
) -> Result<DMatrix<f64>> {
    let raw = hessian_numeric_raw(arch, params, data, cap)?;
    Ok((&raw + raw.transpose()) * 0.5)
}

/// Whether no ReLU preactivation can change sign anywhere inside the
/// finite-difference stencil around `params`.
///
/// The ReLU loss has kinks; a stencil straddling one measures a jump, not a
/// curvature. Sigmoid networks are always smooth.
pub fn stencil_is_smooth(arch: &NetworkArch, params: &ParamVector, data: &Dataset) -> bool {
    if arch.activation() == Activation::Sigmoid {
        return true;
    }
    let theta = params.as_slice();
    // The stencil moves at most two coordinates, each by at most `reach`.
    let reach = 2.0 * theta.iter().map(|&t| step(t)).fold(0.0, f64::max);
    let clear = |z: f64, delta: f64| delta == 0.0 || z.abs() > 2.0 * delta;
    let (d, k1) = match arch.shape() {
        Shape::OneLayer { d, k } | Shape::MultiOutput { d, k, .. } => (d, k),
        Shape::TwoLayer { d, k1, .. } => (d, k1),
    };
    for (x, _, norms) in data.samples() {
        let delta1 = 2.0 * reach * norms.linf;
        let z1: Vec<f64> = (0..k1)
            .map(|l| x.iter().zip(&theta[l * d..(l + 1) * d]).map(|(a, b)| a * b).sum())
            .collect();
        if !z1.iter().all(|&z| clear(z, delta1)) {
            return false;
        }
        // With every first-layer unit safely off, the second-layer inputs
        // stay exactly zero throughout the stencil.
        let any_on = z1.iter().any(|&z| z > 0.0);
        if let (Shape::TwoLayer { k2, .. }, true) = (arch.shape(), any_on) {
            let w = &theta[k1 * d..];
            let h1_max = z1.iter().fold(0.0_f64, |m, &z| m.max(z.max(0.0)));
            for a in 0..k2 {
                let col = &w[a * k1..(a + 1) * k1];
                let w_max = col.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                let z2: f64 = z1.iter().zip(col).map(|(z, w)| z.max(0.0) * w).sum();
                let delta2 =
                    2.0 * delta1 * (w_max + reach) + 2.0 * reach * (h1_max + delta1);
                if !clear(z2, delta2) {
                    return false;
                }
            }
        }
    }
    true
}

/// Where sampled parameter points are drawn from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SampleRegion {
    /// Every coordinate uniform in `[-beta, beta]`.
    Box { beta: f64 },
    /// Every coordinate uniform in `[0, beta]`.
    PositiveBox { beta: f64 },
}

impl SampleRegion {
    fn beta(&self) -> f64 {
        match *self {
            SampleRegion::Box { beta } | SampleRegion::PositiveBox { beta } => beta,
        }
    }

    pub fn draw<R: Rng>(&self, arch: &NetworkArch, rng: &mut R) -> ParamVector {
        let values = (0..arch.param_count())
            .map(|_| match *self {
                SampleRegion::Box { beta } => rng.random_range(-beta..=beta),
                SampleRegion::PositiveBox { beta } => rng.random_range(0.0..=beta),
            })
            .collect();
        ParamVector::from_raw(values)
    }
}

/// `lambda_max` of the numeric Hessian at `num_samples` kink-free points drawn
/// from `region`, in draw order. Points whose stencil straddles a ReLU kink
/// are redrawn, up to 100 attempts per requested sample.
pub fn sampled_hessian_eigs(
    arch: &NetworkArch,
    data: &Dataset,
    num_samples: usize,
    region: SampleRegion,
    seed: u64,
) -> Result<Vec<f64>> {
    if num_samples == 0 {
        return Err(Error::InvalidArgument("num_samples must be at least 1".into()));
    }
    let beta = region.beta();
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidBeta(beta));
    }
    data.check(arch)?;
    if arch.param_count() > DEFAULT_HESSIAN_CAP {
        return Err(Error::HessianCapExceeded {
            params: arch.param_count(),
            cap: DEFAULT_HESSIAN_CAP,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eigs = Vec::with_capacity(num_samples);
    let mut attempts = 0;
    while eigs.len() < num_samples && attempts < 100 * num_samples {
        attempts += 1;
        let params = region.draw(arch, &mut rng);
        if !stencil_is_smooth(arch, &params, data) {
            continue;
        }
        let h = hessian_numeric(arch, &params, data)?;
        eigs.push(symmetric_max_eigenvalue(&h));
    }
    if eigs.is_empty() {
        return Err(Error::InvalidArgument(
            "every sampled point lies on a ReLU kink".into(),
        ));
    }
    Ok(eigs)
}

/// Largest sampled Hessian eigenvalue over parameters uniform in
/// `[-beta, beta]`: a lower estimate of the gradient-Lipschitz constant.
pub fn max_hessian_eig_sampled(
    arch: &NetworkArch,
    data: &Dataset,
    num_samples: usize,
    beta: f64,
    seed: u64,
) -> Result<f64> {
    let eigs = sampled_hessian_eigs(arch, data, num_samples, SampleRegion::Box { beta }, seed)?;
    Ok(eigs.into_iter().fold(f64::NEG_INFINITY, f64::max))
}
