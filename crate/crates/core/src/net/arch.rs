use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden-unit nonlinearity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// First derivative. ReLU uses the indicator of `z >= 0`.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
        }
    }

    /// Second derivative. Zero everywhere for ReLU.
    #[inline]
    pub fn second_derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => 0.0,
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s) * (1.0 - 2.0 * s)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::InvalidArgument(format!("unknown activation `{other}`"))),
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// The three network families the bounds cover.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    /// `f(x) = sum_j act(x . w_j)`.
    OneLayer { d: usize, k: usize },
    /// `f(x) = sum_a act(sum_l act(x . V_l) W_la)`.
    TwoLayer { d: usize, k1: usize, k2: usize },
    /// `f_m(x) = sum_l act(x . V_l) W_lm`, a linear output layer with `m` outputs.
    MultiOutput { d: usize, k: usize, m: usize },
}

/// Architecture of a shallow network.
///
/// Parameter layout (the flattened `theta`):
///
/// * one hidden layer, single output: `w_1 .. w_k`, each of length `d`;
/// * two hidden layers: `V_1 .. V_k1` (each of length `d`) followed by the
///   columns `W_1 .. W_k2` of the `k1 x k2` matrix `W`, so `W_la` sits at
///   `k1*d + a*k1 + l`;
/// * one hidden layer with `m > 1` linear outputs: same as two layers with
///   `W` of shape `k x m`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawArch", into = "RawArch")]
pub struct NetworkArch {
    input_dim: usize,
    hidden_widths: Vec<usize>,
    activation: Activation,
    output_dim: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArch {
    input_dim: usize,
    hidden_widths: Vec<usize>,
    activation: Activation,
    #[serde(default = "one")]
    output_dim: usize,
}

fn one() -> usize {
    1
}

impl TryFrom<RawArch> for NetworkArch {
    type Error = Error;

    fn try_from(raw: RawArch) -> Result<Self> {
        NetworkArch::new(raw.input_dim, raw.hidden_widths, raw.activation, raw.output_dim)
    }
}

impl From<NetworkArch> for RawArch {
    fn from(a: NetworkArch) -> Self {
        RawArch {
            input_dim: a.input_dim,
            hidden_widths: a.hidden_widths,
            activation: a.activation,
            output_dim: a.output_dim,
        }
    }
}

impl NetworkArch {
    pub fn new(
        input_dim: usize,
        hidden_widths: Vec<usize>,
        activation: Activation,
        output_dim: usize,
    ) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidArch("input dimension must be positive".into()));
        }
        if hidden_widths.is_empty() || hidden_widths.len() > 2 {
            return Err(Error::InvalidArch(format!(
                "expected one or two hidden layers, got {}",
                hidden_widths.len()
            )));
        }
        if hidden_widths.contains(&0) {
            return Err(Error::InvalidArch("hidden widths must be positive".into()));
        }
        if output_dim == 0 {
            return Err(Error::InvalidArch("output dimension must be positive".into()));
        }
        if output_dim > 1 && hidden_widths.len() == 2 {
            return Err(Error::InvalidArch(
                "multiple outputs are only supported with one hidden layer".into(),
            ));
        }
        Ok(NetworkArch {
            input_dim,
            hidden_widths,
            activation,
            output_dim,
        })
    }

    pub fn one_layer(d: usize, k: usize, activation: Activation) -> Result<Self> {
        Self::new(d, vec![k], activation, 1)
    }

    pub fn two_layer(d: usize, k1: usize, k2: usize, activation: Activation) -> Result<Self> {
        Self::new(d, vec![k1, k2], activation, 1)
    }

    pub fn multi_output(d: usize, k: usize, outputs: usize, activation: Activation) -> Result<Self> {
        Self::new(d, vec![k], activation, outputs)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_widths(&self) -> &[usize] {
        &self.hidden_widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn depth(&self) -> usize {
        self.hidden_widths.len()
    }

    pub fn shape(&self) -> Shape {
        let d = self.input_dim;
        match (self.hidden_widths.as_slice(), self.output_dim) {
            (&[k], 1) => Shape::OneLayer { d, k },
            (&[k], m) => Shape::MultiOutput { d, k, m },
            (&[k1, k2], _) => Shape::TwoLayer { d, k1, k2 },
            _ => unreachable!("validated in NetworkArch::new"),
        }
    }

    pub fn param_count(&self) -> usize {
        match self.shape() {
            Shape::OneLayer { d, k } => k * d,
            Shape::TwoLayer { d, k1, k2 } => k1 * (d + k2),
            Shape::MultiOutput { d, k, m } => k * (d + m),
        }
    }

    /// `(fan_in, fan_out, count)` for each weight block in parameter order.
    pub fn layer_fans(&self) -> Vec<(usize, usize, usize)> {
        match self.shape() {
            Shape::OneLayer { d, k } => vec![(d, k, k * d)],
            Shape::TwoLayer { d, k1, k2 } => vec![(d, k1, k1 * d), (k1, k2, k1 * k2)],
            Shape::MultiOutput { d, k, m } => vec![(d, k, k * d), (k, m, k * m)],
        }
    }
}

impl fmt::Display for NetworkArch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.shape() {
            Shape::OneLayer { d, k } => write!(f, "1-layer {} (d={d}, k={k})", self.activation),
            Shape::TwoLayer { d, k1, k2 } => {
                write!(f, "2-layer {} (d={d}, k1={k1}, k2={k2})", self.activation)
            }
            Shape::MultiOutput { d, k, m } => {
                write!(f, "1-layer {} with {m} linear outputs (d={d}, k={k})", self.activation)
            }
        }
    }
}

/// Flattened trainable parameters. See [`NetworkArch`] for the layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(arch: &NetworkArch, values: Vec<f64>) -> Result<Self> {
        if values.len() != arch.param_count() {
            return Err(Error::DimensionMismatch {
                context: "parameter vector",
                expected: arch.param_count(),
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter vector"));
        }
        Ok(ParamVector(values))
    }

    pub fn zeros(arch: &NetworkArch) -> Self {
        ParamVector(vec![0.0; arch.param_count()])
    }

    /// Wraps values without checks. Used for iterates that may have left the
    /// finite range during training.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        ParamVector(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub(crate) fn check(&self, arch: &NetworkArch) -> Result<()> {
        if self.0.len() != arch.param_count() {
            return Err(Error::DimensionMismatch {
                context: "parameter vector",
                expected: arch.param_count(),
                actual: self.0.len(),
            });
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}
