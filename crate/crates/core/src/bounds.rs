//! Closed-form gradient-Lipschitz constants and upper bounds.
//!
//! Every bound method evaluates a per-sample expression and averages it over
//! the dataset, mirroring the `1/N` in the loss. The one-hidden-layer ReLU
//! constant is exact and is instead the largest eigenvalue of the stacked
//! Gram matrix, computed through its block structure.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::eigen::{brauer_cassini_bound, gershgorin_bound, power_iteration, PowerIterationOptions};
use crate::error::{Error, Result};
use crate::net::{Activation, Dataset, NetworkArch, ParamVector, SampleNorms, Shape};

/// Bound on `s/10 + s^2 (1-s)^2` over the sigmoid output `s`.
pub const SIGMOID_NEURON_TERM: f64 = 0.1176;
/// Bound on `sigma sigma'' + (sigma')^2`.
pub const SIGMOID_SELF_TERM: f64 = 0.0770;
/// Bound on `sigma'`.
pub const SIGMOID_D1_MAX: f64 = 0.25;
/// Bound on `|sigma''|`.
pub const SIGMOID_D2_MAX: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundMethod {
    #[serde(rename = "relu1l")]
    Relu1LExact,
    #[serde(rename = "sigmoid1l")]
    Sigmoid1LBound,
    #[serde(rename = "relu2l")]
    Relu2LBound,
    #[serde(rename = "sigmoid2l")]
    Sigmoid2LBound,
    #[serde(rename = "multi_sigmoid")]
    MultiOutputSigmoidBound,
}

impl BoundMethod {
    pub const ALL: [BoundMethod; 5] = [
        BoundMethod::Relu1LExact,
        BoundMethod::Sigmoid1LBound,
        BoundMethod::Relu2LBound,
        BoundMethod::Sigmoid2LBound,
        BoundMethod::MultiOutputSigmoidBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundMethod::Relu1LExact => "relu1l",
            BoundMethod::Sigmoid1LBound => "sigmoid1l",
            BoundMethod::Relu2LBound => "relu2l",
            BoundMethod::Sigmoid2LBound => "sigmoid2l",
            BoundMethod::MultiOutputSigmoidBound => "multi_sigmoid",
        }
    }

    /// The method matching an architecture, if any.
    pub fn for_arch(arch: &NetworkArch) -> Result<Self> {
        match (arch.shape(), arch.activation()) {
            (Shape::OneLayer { .. }, Activation::Relu) => Ok(BoundMethod::Relu1LExact),
            (Shape::OneLayer { .. }, Activation::Sigmoid) => Ok(BoundMethod::Sigmoid1LBound),
            (Shape::TwoLayer { .. }, Activation::Relu) => Ok(BoundMethod::Relu2LBound),
            (Shape::TwoLayer { .. }, Activation::Sigmoid) => Ok(BoundMethod::Sigmoid2LBound),
            (Shape::MultiOutput { .. }, Activation::Sigmoid) => {
                Ok(BoundMethod::MultiOutputSigmoidBound)
            }
            (Shape::MultiOutput { .. }, Activation::Relu) => Err(Error::MethodMismatch {
                method: "any".into(),
                arch: arch.to_string(),
            }),
        }
    }

    pub fn needs_beta(self) -> bool {
        !matches!(self, BoundMethod::Relu1LExact | BoundMethod::Sigmoid1LBound)
    }

    pub fn is_exact(self) -> bool {
        self == BoundMethod::Relu1LExact
    }
}

impl std::fmt::Display for BoundMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for BoundMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundMethod::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown bound method `{s}`")))
    }
}

/// Power-iteration, Gershgorin and Brauer values for the explicit stacked
/// Gram matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StackedEigenBounds {
    pub power: f64,
    pub gershgorin: f64,
    pub brauer: Option<f64>,
}

/// A computed Lipschitz constant or upper bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LipschitzReport {
    pub alpha: f64,
    /// `1/alpha`; `+inf` (serialized as `null`) when `alpha == 0`.
    #[serde(with = "finite_or_null")]
    pub eta: f64,
    pub is_exact: bool,
    pub method: BoundMethod,
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_sample_terms: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stacked: Option<StackedEigenBounds>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl LipschitzReport {
    fn new(alpha: f64, method: BoundMethod, beta: Option<f64>) -> Self {
        let mut warnings = Vec::new();
        let eta = if alpha > 0.0 {
            1.0 / alpha
        } else {
            warnings.push("every input is zero: the loss is flat and any step size is safe".into());
            f64::INFINITY
        };
        LipschitzReport {
            alpha,
            eta,
            is_exact: method.is_exact(),
            method,
            beta,
            per_sample_terms: None,
            stacked: None,
            warnings,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub(crate) mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// `(1/N) sum_i a(x_i) a(x_i)^T` where `a(x)` stacks `x` `k` times.
#[derive(Clone, Debug, PartialEq)]
pub struct StackedGram {
    matrix: DMatrix<f64>,
    k: usize,
}

impl StackedGram {
    pub fn new(data: &Dataset, k: usize) -> Self {
        let gram = data_gram(data);
        let d = data.input_dim();
        let matrix = DMatrix::from_fn(k * d, k * d, |r, c| gram[(r % d, c % d)]);
        StackedGram { matrix, k }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn copies(&self) -> usize {
        self.k
    }
}

/// `(1/N) sum_i x_i x_i^T`.
pub fn data_gram(data: &Dataset) -> DMatrix<f64> {
    let d = data.input_dim();
    let mut g = DMatrix::zeros(d, d);
    for (x, _, _) in data.samples() {
        for r in 0..d {
            if x[r] == 0.0 {
                continue;
            }
            for c in 0..d {
                g[(r, c)] += x[r] * x[c];
            }
        }
    }
    g / data.len() as f64
}

fn check_beta(beta: f64) -> Result<f64> {
    if beta > 0.0 && beta.is_finite() {
        Ok(beta)
    } else {
        Err(Error::InvalidBeta(beta))
    }
}

fn expect_method(arch: &NetworkArch, method: BoundMethod) -> Result<()> {
    match BoundMethod::for_arch(arch) {
        Ok(m) if m == method => Ok(()),
        _ => Err(Error::MethodMismatch {
            method: method.name().into(),
            arch: arch.to_string(),
        }),
    }
}

fn averaged(
    data: &Dataset,
    method: BoundMethod,
    beta: Option<f64>,
    per_sample: impl Fn(&[f64], &[f64], &SampleNorms) -> f64,
) -> LipschitzReport {
    let terms: Vec<f64> = data.samples().map(|(x, y, n)| per_sample(x, y, n)).collect();
    let alpha = terms.iter().sum::<f64>() / terms.len() as f64;
    let mut report = LipschitzReport::new(alpha, method, beta);
    report.per_sample_terms = Some(terms);
    report
}

/// Options for [`one_layer_relu_exact_with`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ReluOptions {
    /// Also assemble the `kd x kd` stacked Gram matrix and report its power
    /// iteration, Gershgorin and Brauer values.
    pub stacked_bounds: bool,
    pub power: PowerIterationOptions,
}

/// Exact constant for one hidden ReLU layer: `k * lambda_max((1/N) sum x x^T)`.
pub fn one_layer_relu_exact(arch: &NetworkArch, data: &Dataset) -> Result<LipschitzReport> {
    one_layer_relu_exact_with(arch, data, ReluOptions::default())
}

pub fn one_layer_relu_exact_with(
    arch: &NetworkArch,
    data: &Dataset,
    opts: ReluOptions,
) -> Result<LipschitzReport> {
    expect_method(arch, BoundMethod::Relu1LExact)?;
    data.check(arch)?;
    let Shape::OneLayer { k, .. } = arch.shape() else {
        unreachable!()
    };
    let gram = data_gram(data);
    let top = power_iteration(&gram, opts.power.tol, opts.power.max_iter)?;
    let mut report = LipschitzReport::new(k as f64 * top, BoundMethod::Relu1LExact, None);
    if opts.stacked_bounds {
        let stacked = StackedGram::new(data, k);
        let m = stacked.matrix();
        report.stacked = Some(StackedEigenBounds {
            power: power_iteration(m, opts.power.tol, opts.power.max_iter)?,
            gershgorin: gershgorin_bound(m),
            brauer: if m.nrows() >= 2 {
                Some(brauer_cassini_bound(m)?)
            } else {
                None
            },
        });
    }
    Ok(report)
}

/// Per-sample one-hidden-layer sigmoid bound, `min(..)` times `||x||^2`.
pub fn sigmoid_1l_sample(k: usize, y: f64, x_norm_sq: f64) -> f64 {
    let k = k as f64;
    let crude = (k - y).abs() / 10.0 + k / 16.0;
    let refined = SIGMOID_NEURON_TERM * (k - 1.0) + y.abs() / 10.0 + SIGMOID_SELF_TERM;
    crude.min(refined) * x_norm_sq
}

pub fn one_layer_sigmoid_bound(arch: &NetworkArch, data: &Dataset) -> Result<LipschitzReport> {
    expect_method(arch, BoundMethod::Sigmoid1LBound)?;
    data.check(arch)?;
    let Shape::OneLayer { k, .. } = arch.shape() else {
        unreachable!()
    };
    Ok(averaged(data, BoundMethod::Sigmoid1LBound, None, |_, y, n| {
        sigmoid_1l_sample(k, y[0], n.l2_squared())
    }))
}

/// Per-sample two-hidden-layer sigmoid bound.
pub fn sigmoid_2l_sample(k1: usize, k2: usize, beta: f64, y: f64, n: &SampleNorms) -> f64 {
    let (k1, k2) = (k1 as f64, k2 as f64);
    let gradient_term = k1 * (k2 * beta * n.l2 / 16.0).powi(2) + k1 * k2 / 16.0;
    let lead = 0.25 + beta / 10.0;
    let via_v_rows = 0.1 + lead * k1 * n.l1 / 4.0;
    let via_w_rows = lead * k2 * n.linf / 4.0 + (beta / 1000.0 + 0.25) * k1 * k2 * beta * n.l1 * n.linf;
    gradient_term + via_v_rows.max(via_w_rows) * (k2 - y).abs()
}

pub fn two_layer_sigmoid_bound(
    arch: &NetworkArch,
    data: &Dataset,
    beta: f64,
) -> Result<LipschitzReport> {
    expect_method(arch, BoundMethod::Sigmoid2LBound)?;
    data.check(arch)?;
    let beta = check_beta(beta)?;
    let Shape::TwoLayer { k1, k2, .. } = arch.shape() else {
        unreachable!()
    };
    Ok(averaged(data, BoundMethod::Sigmoid2LBound, Some(beta), |_, y, n| {
        sigmoid_2l_sample(k1, k2, beta, y[0], n)
    }))
}

/// Per-sample two-hidden-layer ReLU bound. The residual bound `A_max` is
/// clamped at zero.
pub fn relu_2l_sample(d: usize, k1: usize, k2: usize, beta: f64, y: f64, n: &SampleNorms) -> f64 {
    let (d, k1, k2) = (d as f64, k1 as f64, k2 as f64);
    let a_max = (k1 * k2 * beta * beta * n.l2 - y).max(0.0);
    k1 * (d + k2) * beta * beta * n.l2_squared() + (a_max * k2 * n.linf).max(a_max * n.l1)
}

pub fn two_layer_relu_bound(
    arch: &NetworkArch,
    data: &Dataset,
    beta: f64,
) -> Result<LipschitzReport> {
    expect_method(arch, BoundMethod::Relu2LBound)?;
    data.check(arch)?;
    let beta = check_beta(beta)?;
    let Shape::TwoLayer { d, k1, k2 } = arch.shape() else {
        unreachable!()
    };
    Ok(averaged(data, BoundMethod::Relu2LBound, Some(beta), |_, y, n| {
        relu_2l_sample(d, k1, k2, beta, y[0], n)
    }))
}

/// Per-sample bound for one sigmoid hidden layer with a linear multi-output
/// head; `targets` holds the sample's `k2` outputs.
pub fn multi_output_sigmoid_sample(k1: usize, beta: f64, targets: &[f64], n: &SampleNorms) -> f64 {
    let k1 = k1 as f64;
    let k2 = targets.len() as f64;
    let spread = n.linf * n.l1;
    let min_target = targets.iter().copied().fold(f64::INFINITY, f64::min);
    let saturation: f64 = targets.iter().map(|&o| (k1 * beta - o) * beta / 10.0 * spread).sum();
    k1 * k2 / 16.0 * beta * beta * spread
        + saturation
        + k1 * k2 / 4.0 * beta * n.linf
        + k1 / 4.0 * (k1 * beta - min_target) * n.linf
}

pub fn multi_output_sigmoid_bound(
    arch: &NetworkArch,
    data: &Dataset,
    beta: f64,
) -> Result<LipschitzReport> {
    if data.output_dim() != arch.output_dim() {
        return Err(Error::DimensionMismatch {
            context: "dataset output dimension",
            expected: arch.output_dim(),
            actual: data.output_dim(),
        });
    }
    expect_method(arch, BoundMethod::MultiOutputSigmoidBound)?;
    data.check(arch)?;
    let beta = check_beta(beta)?;
    let Shape::MultiOutput { k, .. } = arch.shape() else {
        unreachable!()
    };
    let mut report = averaged(data, BoundMethod::MultiOutputSigmoidBound, Some(beta), |_, y, n| {
        multi_output_sigmoid_sample(k, beta, y, n)
    });
    if report.alpha == 0.0 {
        report.warnings = vec![
            "every input is zero: the expression vanishes but the output-weight curvature does \
             not; use the safe variant for a usable step size"
                .into(),
        ];
    }
    Ok(report)
}

/// [`multi_output_sigmoid_bound`] plus `k1`, the Gershgorin row sum of the
/// output-weight block.
///
/// Every term of the plain expression carries a factor `||x||_inf`, but the
/// curvature in the output weights alone is `(1/N) sum sigma sigma^T`, which
/// does not vanish with the input (at `x = 0` it is `k1/4` per output). On
/// small inputs the plain expression therefore falls below the sampled
/// Hessian eigenvalue; this variant does not.
pub fn multi_output_sigmoid_bound_safe(
    arch: &NetworkArch,
    data: &Dataset,
    beta: f64,
) -> Result<LipschitzReport> {
    let mut report = multi_output_sigmoid_bound(arch, data, beta)?;
    let Shape::MultiOutput { k, .. } = arch.shape() else {
        unreachable!()
    };
    let k = k as f64;
    report.alpha += k;
    report.eta = 1.0 / report.alpha;
    if let Some(terms) = report.per_sample_terms.as_mut() {
        terms.iter_mut().for_each(|t| *t += k);
    }
    report.warnings.clear();
    Ok(report)
}

/// Computes the constant or bound matching `arch`. `beta` is required for the
/// two-layer and multi-output methods and ignored otherwise.
pub fn lipschitz_report(
    arch: &NetworkArch,
    data: &Dataset,
    beta: Option<f64>,
) -> Result<LipschitzReport> {
    report_for_method(BoundMethod::for_arch(arch)?, arch, data, beta)
}

pub fn report_for_method(
    method: BoundMethod,
    arch: &NetworkArch,
    data: &Dataset,
    beta: Option<f64>,
) -> Result<LipschitzReport> {
    let need_beta = || {
        beta.ok_or_else(|| {
            Error::InvalidArgument(format!("method {method} needs a weight cap beta"))
        })
    };
    match method {
        BoundMethod::Relu1LExact => one_layer_relu_exact(arch, data),
        BoundMethod::Sigmoid1LBound => one_layer_sigmoid_bound(arch, data),
        BoundMethod::Relu2LBound => two_layer_relu_bound(arch, data, need_beta()?),
        BoundMethod::Sigmoid2LBound => two_layer_sigmoid_bound(arch, data, need_beta()?),
        BoundMethod::MultiOutputSigmoidBound => {
            multi_output_sigmoid_bound(arch, data, need_beta()?)
        }
    }
}

/// Default weight cap: `1.05 * max |theta_init|`.
pub fn beta_from_init(init: &ParamVector) -> Result<f64> {
    check_beta(1.05 * init.max_abs())
}
