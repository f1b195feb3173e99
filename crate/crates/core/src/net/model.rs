use crate::error::{Error, Result};
use crate::net::{Dataset, NetworkArch, ParamVector, Shape};

/// Quadratic loss `1/(2N) sum_i ||f(x_i) - y_i||^2`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct LossValue(pub f64);

impl LossValue {
    pub fn value(self) -> f64 {
        self.0
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Evaluates the network on one input, writing `output_dim` values into `out`.
pub(crate) fn forward_into(arch: &NetworkArch, theta: &[f64], x: &[f64], out: &mut [f64]) {
    let act = arch.activation();
    match arch.shape() {
        Shape::OneLayer { d, k } => {
            out[0] = (0..k).map(|j| act.apply(dot(x, &theta[j * d..(j + 1) * d]))).sum();
        }
        Shape::TwoLayer { d, k1, k2 } => {
            let hidden: Vec<f64> = (0..k1)
                .map(|l| act.apply(dot(x, &theta[l * d..(l + 1) * d])))
                .collect();
            let w = &theta[k1 * d..];
            out[0] = (0..k2)
                .map(|a| act.apply(dot(&hidden, &w[a * k1..(a + 1) * k1])))
                .sum();
        }
        Shape::MultiOutput { d, k, m } => {
            let hidden: Vec<f64> = (0..k)
                .map(|l| act.apply(dot(x, &theta[l * d..(l + 1) * d])))
                .collect();
            let w = &theta[k * d..];
            for (o, col) in out.iter_mut().zip(w.chunks_exact(k)).take(m) {
                *o = dot(&hidden, col);
            }
        }
    }
}

/// Network output for input `x`: a single value for the sum-output
/// architectures, `output_dim` values for the multi-output one.
pub fn forward(arch: &NetworkArch, params: &ParamVector, x: &[f64]) -> Result<Vec<f64>> {
    params.check(arch)?;
    if x.len() != arch.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "forward input",
            expected: arch.input_dim(),
            actual: x.len(),
        });
    }
    let mut out = vec![0.0; arch.output_dim()];
    forward_into(arch, params.as_slice(), x, &mut out);
    Ok(out)
}

pub(crate) fn loss_raw(arch: &NetworkArch, theta: &[f64], data: &Dataset) -> f64 {
    let mut out = vec![0.0; arch.output_dim()];
    let mut total = 0.0;
    for (x, y, _) in data.samples() {
        forward_into(arch, theta, x, &mut out);
        total += out.iter().zip(y).map(|(f, t)| (f - t) * (f - t)).sum::<f64>();
    }
    total / (2.0 * data.len() as f64)
}

pub fn loss(arch: &NetworkArch, params: &ParamVector, data: &Dataset) -> Result<LossValue> {
    params.check(arch)?;
    data.check(arch)?;
    Ok(LossValue(loss_raw(arch, params.as_slice(), data)))
}

/// Writes the averaged gradient into `grad` and returns the loss.
pub(crate) fn loss_and_gradient_raw(
    arch: &NetworkArch,
    theta: &[f64],
    data: &Dataset,
    grad: &mut [f64],
) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let act = arch.activation();
    let mut total = 0.0;
    match arch.shape() {
        Shape::OneLayer { d, k } => {
            let mut pre = vec![0.0; k];
            for (x, y, _) in data.samples() {
                let mut f = 0.0;
                for (j, z) in pre.iter_mut().enumerate() {
                    *z = dot(x, &theta[j * d..(j + 1) * d]);
                    f += act.apply(*z);
                }
                let r = f - y[0];
                total += r * r;
                for (j, &z) in pre.iter().enumerate() {
                    let c = r * act.derivative(z);
                    if c != 0.0 {
                        for (g, xv) in grad[j * d..(j + 1) * d].iter_mut().zip(x) {
                            *g += c * xv;
                        }
                    }
                }
            }
        }
        Shape::TwoLayer { d, k1, k2 } => {
            let (v, w) = theta.split_at(k1 * d);
            let mut z1 = vec![0.0; k1];
            let mut h1 = vec![0.0; k1];
            let mut dz2 = vec![0.0; k2];
            for (x, y, _) in data.samples() {
                for l in 0..k1 {
                    z1[l] = dot(x, &v[l * d..(l + 1) * d]);
                    h1[l] = act.apply(z1[l]);
                }
                let mut f = 0.0;
                for a in 0..k2 {
                    let z2 = dot(&h1, &w[a * k1..(a + 1) * k1]);
                    f += act.apply(z2);
                    dz2[a] = act.derivative(z2);
                }
                let r = f - y[0];
                total += r * r;
                let (gv, gw) = grad.split_at_mut(k1 * d);
                for a in 0..k2 {
                    let c = r * dz2[a];
                    for l in 0..k1 {
                        gw[a * k1 + l] += c * h1[l];
                    }
                }
                for l in 0..k1 {
                    let back: f64 = (0..k2).map(|a| dz2[a] * w[a * k1 + l]).sum();
                    let c = r * back * act.derivative(z1[l]);
                    if c != 0.0 {
                        for (g, xv) in gv[l * d..(l + 1) * d].iter_mut().zip(x) {
                            *g += c * xv;
                        }
                    }
                }
            }
        }
        Shape::MultiOutput { d, k, m } => {
            let (v, w) = theta.split_at(k * d);
            let mut z1 = vec![0.0; k];
            let mut h1 = vec![0.0; k];
            let mut r = vec![0.0; m];
            for (x, y, _) in data.samples() {
                for l in 0..k {
                    z1[l] = dot(x, &v[l * d..(l + 1) * d]);
                    h1[l] = act.apply(z1[l]);
                }
                for o in 0..m {
                    r[o] = dot(&h1, &w[o * k..(o + 1) * k]) - y[o];
                    total += r[o] * r[o];
                }
                let (gv, gw) = grad.split_at_mut(k * d);
                for o in 0..m {
                    for l in 0..k {
                        gw[o * k + l] += r[o] * h1[l];
                    }
                }
                for l in 0..k {
                    let back: f64 = (0..m).map(|o| r[o] * w[o * k + l]).sum();
                    let c = back * act.derivative(z1[l]);
                    if c != 0.0 {
                        for (g, xv) in gv[l * d..(l + 1) * d].iter_mut().zip(x) {
                            *g += c * xv;
                        }
                    }
                }
            }
        }
    }
    let n = data.len() as f64;
    grad.iter_mut().for_each(|g| *g /= n);
    total / (2.0 * n)
}

/// Analytic gradient of [`loss`], averaged over the dataset.
pub fn gradient(arch: &NetworkArch, params: &ParamVector, data: &Dataset) -> Result<ParamVector> {
    params.check(arch)?;
    data.check(arch)?;
    let mut g = vec![0.0; arch.param_count()];
    loss_and_gradient_raw(arch, params.as_slice(), data, &mut g);
    Ok(ParamVector::from_raw(g))
}
