//! Full-batch training: plain gradient descent at a fixed step size and the
//! usual adaptive baselines, all recording the same loss trace.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{format_f64, loss_and_gradient_raw, loss_raw, Dataset, NetworkArch, ParamVector};

/// Relative slack allowed between successive losses of a monotone trace.
pub const MONOTONE_RTOL: f64 = 1e-9;
/// A run whose final loss exceeds this multiple of the initial loss diverged.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

/// Loss per epoch of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    /// `epochs + 1` values: the loss at the initial point, then after each
    /// step. Once a loss turns non-finite the run stops and the remaining
    /// entries repeat that value.
    #[serde(with = "nonfinite_as_null")]
    pub losses: Vec<f64>,
    /// Step size (GD) or base learning rate (adaptive methods).
    pub eta: f64,
    pub epochs: usize,
    pub monotone: bool,
    pub diverged: bool,
    /// Largest `|theta_i|` over every iterate, the initial point included.
    pub max_abs_param: f64,
}

impl TrainTrace {
    pub(crate) fn from_losses(losses: Vec<f64>, eta: f64, max_abs_param: f64) -> Self {
        let epochs = losses.len() - 1;
        let (monotone, diverged) = classify(&losses);
        TrainTrace {
            losses,
            eta,
            epochs,
            monotone,
            diverged,
            max_abs_param,
        }
    }

    pub fn initial_loss(&self) -> f64 {
        self.losses[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("trace is never empty")
    }

    /// Writes `epoch,loss` rows with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch,loss")?;
        for (epoch, loss) in self.losses.iter().enumerate() {
            writeln!(w, "{epoch},{}", format_f64(*loss))?;
        }
        Ok(())
    }
}

/// `(monotone, diverged)` for a loss sequence.
pub fn classify(losses: &[f64]) -> (bool, bool) {
    let all_finite = losses.iter().all(|l| l.is_finite());
    let monotone = all_finite
        && losses
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + MONOTONE_RTOL));
    let diverged = !all_finite
        || losses.last().copied().unwrap_or(0.0) > losses[0] * DIVERGENCE_FACTOR;
    (monotone, diverged)
}

mod nonfinite_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|x| x.is_finite().then_some(*x))
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Option<f64>>::deserialize(d)?
            .into_iter()
            .map(|x| x.unwrap_or(f64::INFINITY))
            .collect())
    }
}

/// Optimizer and its constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum OptimizerConfig {
    Gd {
        learning_rate: f64,
    },
    Adam {
        learning_rate: f64,
        #[serde(default = "defaults::beta1")]
        beta1: f64,
        #[serde(default = "defaults::beta2")]
        beta2: f64,
        #[serde(default = "defaults::epsilon")]
        epsilon: f64,
    },
    Adagrad {
        learning_rate: f64,
        #[serde(default = "defaults::epsilon")]
        epsilon: f64,
    },
    /// `learning_rate` scales the unit-free Adadelta step (1.0 is the
    /// original method).
    Adadelta {
        learning_rate: f64,
        #[serde(default = "defaults::adadelta_rho")]
        rho: f64,
        #[serde(default = "defaults::adadelta_epsilon")]
        epsilon: f64,
    },
    #[serde(rename = "rmsprop")]
    RmsProp {
        learning_rate: f64,
        #[serde(default = "defaults::rmsprop_decay")]
        decay: f64,
        #[serde(default = "defaults::epsilon")]
        epsilon: f64,
    },
}

mod defaults {
    pub fn beta1() -> f64 {
        0.9
    }
    pub fn beta2() -> f64 {
        0.999
    }
    pub fn epsilon() -> f64 {
        1e-8
    }
    pub fn adadelta_rho() -> f64 {
        0.95
    }
    pub fn adadelta_epsilon() -> f64 {
        1e-6
    }
    pub fn rmsprop_decay() -> f64 {
        0.9
    }
}

impl OptimizerConfig {
    pub fn gd(learning_rate: f64) -> Self {
        OptimizerConfig::Gd { learning_rate }
    }

    pub fn adam(learning_rate: f64) -> Self {
        OptimizerConfig::Adam {
            learning_rate,
            beta1: defaults::beta1(),
            beta2: defaults::beta2(),
            epsilon: defaults::epsilon(),
        }
    }

    pub fn adagrad(learning_rate: f64) -> Self {
        OptimizerConfig::Adagrad {
            learning_rate,
            epsilon: defaults::epsilon(),
        }
    }

    pub fn adadelta(learning_rate: f64) -> Self {
        OptimizerConfig::Adadelta {
            learning_rate,
            rho: defaults::adadelta_rho(),
            epsilon: defaults::adadelta_epsilon(),
        }
    }

    pub fn rmsprop(learning_rate: f64) -> Self {
        OptimizerConfig::RmsProp {
            learning_rate,
            decay: defaults::rmsprop_decay(),
            epsilon: defaults::epsilon(),
        }
    }

    pub fn learning_rate(&self) -> f64 {
        match *self {
            OptimizerConfig::Gd { learning_rate }
            | OptimizerConfig::Adam { learning_rate, .. }
            | OptimizerConfig::Adagrad { learning_rate, .. }
            | OptimizerConfig::Adadelta { learning_rate, .. }
            | OptimizerConfig::RmsProp { learning_rate, .. } => learning_rate,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerConfig::Gd { .. } => "gd",
            OptimizerConfig::Adam { .. } => "adam",
            OptimizerConfig::Adagrad { .. } => "adagrad",
            OptimizerConfig::Adadelta { .. } => "adadelta",
            OptimizerConfig::RmsProp { .. } => "rmsprop",
        }
    }

    /// Builds the default configuration for an optimizer named `gd`, `adam`,
    /// `adagrad`, `adadelta` or `rmsprop`.
    pub fn from_name(name: &str, learning_rate: f64) -> Result<Self> {
        Ok(match name.to_ascii_lowercase().as_str() {
            "gd" => Self::gd(learning_rate),
            "adam" => Self::adam(learning_rate),
            "adagrad" => Self::adagrad(learning_rate),
            "adadelta" => Self::adadelta(learning_rate),
            "rmsprop" => Self::rmsprop(learning_rate),
            other => return Err(Error::InvalidArgument(format!("unknown optimizer `{other}`"))),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let lr = self.learning_rate();
        if !lr.is_finite() || lr < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be finite and non-negative, got {lr}"
            )));
        }
        let in_unit = |v: f64, what: &str| {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{what} must lie in [0, 1), got {v}")))
            }
        };
        let positive = |v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("epsilon must be positive, got {v}")))
            }
        };
        match *self {
            OptimizerConfig::Gd { .. } => Ok(()),
            OptimizerConfig::Adam {
                beta1,
                beta2,
                epsilon,
                ..
            } => {
                in_unit(beta1, "beta1")?;
                in_unit(beta2, "beta2")?;
                positive(epsilon)
            }
            OptimizerConfig::Adagrad { epsilon, .. } => positive(epsilon),
            OptimizerConfig::Adadelta { rho, epsilon, .. } => {
                in_unit(rho, "rho")?;
                positive(epsilon)
            }
            OptimizerConfig::RmsProp { decay, epsilon, .. } => {
                in_unit(decay, "decay")?;
                positive(epsilon)
            }
        }
    }
}

enum State {
    Gd,
    Adam { m: Vec<f64>, v: Vec<f64>, t: i32 },
    Adagrad { g2: Vec<f64> },
    Adadelta { g2: Vec<f64>, dx2: Vec<f64> },
    RmsProp { g2: Vec<f64> },
}

impl State {
    fn new(config: &OptimizerConfig, p: usize) -> Self {
        match config {
            OptimizerConfig::Gd { .. } => State::Gd,
            OptimizerConfig::Adam { .. } => State::Adam {
                m: vec![0.0; p],
                v: vec![0.0; p],
                t: 0,
            },
            OptimizerConfig::Adagrad { .. } => State::Adagrad { g2: vec![0.0; p] },
            OptimizerConfig::Adadelta { .. } => State::Adadelta {
                g2: vec![0.0; p],
                dx2: vec![0.0; p],
            },
            OptimizerConfig::RmsProp { .. } => State::RmsProp { g2: vec![0.0; p] },
        }
    }

    fn step(&mut self, config: &OptimizerConfig, theta: &mut [f64], grad: &[f64]) {
        match (self, *config) {
            (State::Gd, OptimizerConfig::Gd { learning_rate }) => {
                for (t, g) in theta.iter_mut().zip(grad) {
                    *t -= learning_rate * g;
                }
            }
            (
                State::Adam { m, v, t },
                OptimizerConfig::Adam {
                    learning_rate,
                    beta1,
                    beta2,
                    epsilon,
                },
            ) => {
                *t += 1;
                let c1 = 1.0 - beta1.powi(*t);
                let c2 = 1.0 - beta2.powi(*t);
                for i in 0..theta.len() {
                    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
                    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
                    let m_hat = m[i] / c1;
                    let v_hat = v[i] / c2;
                    theta[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
                }
            }
            (
                State::Adagrad { g2 },
                OptimizerConfig::Adagrad {
                    learning_rate,
                    epsilon,
                },
            ) => {
                for i in 0..theta.len() {
                    g2[i] += grad[i] * grad[i];
                    theta[i] -= learning_rate * grad[i] / (g2[i].sqrt() + epsilon);
                }
            }
            (
                State::Adadelta { g2, dx2 },
                OptimizerConfig::Adadelta {
                    learning_rate,
                    rho,
                    epsilon,
                },
            ) => {
                for i in 0..theta.len() {
                    g2[i] = rho * g2[i] + (1.0 - rho) * grad[i] * grad[i];
                    let dx = -((dx2[i] + epsilon).sqrt() / (g2[i] + epsilon).sqrt()) * grad[i];
                    dx2[i] = rho * dx2[i] + (1.0 - rho) * dx * dx;
                    theta[i] += learning_rate * dx;
                }
            }
            (
                State::RmsProp { g2 },
                OptimizerConfig::RmsProp {
                    learning_rate,
                    decay,
                    epsilon,
                },
            ) => {
                for i in 0..theta.len() {
                    g2[i] = decay * g2[i] + (1.0 - decay) * grad[i] * grad[i];
                    theta[i] -= learning_rate * grad[i] / (g2[i].sqrt() + epsilon);
                }
            }
            _ => unreachable!("state built from the same config"),
        }
    }
}

/// Runs `epochs` full-batch steps of `config` from `init`.
///
/// Returns the trace and the final parameters. A non-finite loss stops the
/// run; the trace is then flagged diverged.
pub fn train(
    arch: &NetworkArch,
    init: &ParamVector,
    data: &Dataset,
    config: &OptimizerConfig,
    epochs: usize,
) -> Result<(TrainTrace, ParamVector)> {
    init.check(arch)?;
    data.check(arch)?;
    config.validate()?;
    if epochs == 0 {
        return Err(Error::InvalidArgument("epochs must be at least 1".into()));
    }
    let mut theta = init.as_slice().to_vec();
    let mut grad = vec![0.0; theta.len()];
    let mut state = State::new(config, theta.len());
    let mut losses = Vec::with_capacity(epochs + 1);
    let mut max_abs = init.max_abs();

    let mut current = loss_and_gradient_raw(arch, &theta, data, &mut grad);
    losses.push(current);
    for epoch in 0..epochs {
        if !current.is_finite() {
            losses.resize(epochs + 1, current);
            break;
        }
        state.step(config, &mut theta, &grad);
        max_abs = theta.iter().fold(max_abs, |m, t| m.max(t.abs()));
        current = if epoch + 1 < epochs {
            loss_and_gradient_raw(arch, &theta, data, &mut grad)
        } else {
            loss_raw(arch, &theta, data)
        };
        losses.push(current);
    }
    let trace = TrainTrace::from_losses(losses, config.learning_rate(), max_abs);
    Ok((trace, ParamVector::from_raw(theta)))
}

/// Fixed-step gradient descent `theta <- theta - eta * grad`.
pub fn gd_train(
    arch: &NetworkArch,
    init: &ParamVector,
    data: &Dataset,
    eta: f64,
    epochs: usize,
) -> Result<(TrainTrace, ParamVector)> {
    train(arch, init, data, &OptimizerConfig::gd(eta), epochs)
}

/// Adaptive-method training; same contract as [`gd_train`].
pub fn adaptive_train(
    arch: &NetworkArch,
    init: &ParamVector,
    data: &Dataset,
    config: &OptimizerConfig,
    epochs: usize,
) -> Result<TrainTrace> {
    train(arch, init, data, config, epochs).map(|(trace, _)| trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{gradient, loss, Activation};

    fn quadratic() -> (NetworkArch, Dataset) {
        let arch = NetworkArch::one_layer(1, 1, Activation::Relu).unwrap();
        let data = Dataset::from_rows(&[vec![1.0]], &[vec![0.0]]).unwrap();
        (arch, data)
    }

    #[test]
    fn zero_step_keeps_loss() {
        let (arch, data) = quadratic();
        let init = ParamVector::new(&arch, vec![0.8]).unwrap();
        let (trace, fin) = gd_train(&arch, &init, &data, 0.0, 5).unwrap();
        assert_eq!(trace.losses.len(), 6);
        assert!(trace.losses.iter().all(|&l| l == trace.losses[0]));
        assert!(trace.monotone && !trace.diverged);
        assert_eq!(fin, init);
    }

    #[test]
    fn unit_step_solves_quadratic() {
        let (arch, data) = quadratic();
        let init = ParamVector::new(&arch, vec![0.8]).unwrap();
        let (trace, _) = gd_train(&arch, &init, &data, 1.0, 1).unwrap();
        assert!((trace.losses[0] - 0.32).abs() < 1e-15);
        assert_eq!(trace.losses[1], 0.0);
    }

    #[test]
    fn trace_starts_at_initial_loss() {
        let arch = NetworkArch::one_layer(2, 2, Activation::Sigmoid).unwrap();
        let data = Dataset::from_rows(&[vec![1.0, -0.5], vec![0.3, 0.2]], &[vec![0.4], vec![1.1]])
            .unwrap();
        let init = ParamVector::new(&arch, vec![0.1, -0.2, 0.3, 0.05]).unwrap();
        let (trace, _) = gd_train(&arch, &init, &data, 0.5, 7).unwrap();
        assert_eq!(trace.losses.len(), 8);
        assert_eq!(trace.losses[0], loss(&arch, &init, &data).unwrap().value());
    }

    #[test]
    fn blowup_is_flagged() {
        let (arch, data) = quadratic();
        let init = ParamVector::new(&arch, vec![1.0]).unwrap();
        // w <- w - 3w = -2w: the unit dies and the loss drops to zero...
        let (trace, _) = gd_train(&arch, &init, &data, 3.0, 3).unwrap();
        assert!(!trace.diverged);
        // ...whereas with a far target the unit stays active and the
        // residual doubles in magnitude every step: 1, -2, 4, -8.
        let data = Dataset::from_rows(&[vec![1.0]], &[vec![1000.0]]).unwrap();
        let init = ParamVector::new(&arch, vec![1001.0]).unwrap();
        let (trace, _) = gd_train(&arch, &init, &data, 3.0, 3).unwrap();
        assert_eq!(trace.losses, vec![0.5, 2.0, 8.0, 32.0]);
        assert!(trace.diverged && !trace.monotone);
    }

    #[test]
    fn classification_rules() {
        assert_eq!(classify(&[1.0, 0.5, 0.5, 0.1]), (true, false));
        assert_eq!(classify(&[1.0, 1.0 + 1e-12, 0.9]), (true, false));
        assert_eq!(classify(&[1.0, 1.1, 0.9]), (false, false));
        assert_eq!(classify(&[1.0, 5.0, 10.5]), (false, true));
        assert_eq!(classify(&[1.0, f64::NAN, f64::NAN]), (false, true));
    }

    #[test]
    fn adam_is_still_at_zero_gradient() {
        let arch = NetworkArch::one_layer(2, 2, Activation::Sigmoid).unwrap();
        let teacher = ParamVector::new(&arch, vec![0.4, -0.1, 0.7, 0.2]).unwrap();
        let xs = vec![vec![1.0, 2.0], vec![-0.3, 0.5]];
        let ys: Vec<Vec<f64>> = xs
            .iter()
            .map(|x| crate::net::forward(&arch, &teacher, x).unwrap())
            .collect();
        let data = Dataset::from_rows(&xs, &ys).unwrap();
        let (trace, fin) = train(&arch, &teacher, &data, &OptimizerConfig::adam(0.01), 10).unwrap();
        assert!(trace.losses.iter().all(|&l| l == 0.0));
        assert_eq!(fin, teacher);
    }

    #[test]
    fn adam_first_step_is_learning_rate() {
        let arch = NetworkArch::one_layer(2, 2, Activation::Sigmoid).unwrap();
        let data = Dataset::from_rows(&[vec![1.0, -2.0], vec![0.5, 0.5]], &[vec![1.5], vec![0.2]])
            .unwrap();
        let init = ParamVector::new(&arch, vec![0.3, -0.2, 0.1, 0.4]).unwrap();
        let g = gradient(&arch, &init, &data).unwrap();
        let lr = 0.01;
        let (_, fin) = train(&arch, &init, &data, &OptimizerConfig::adam(lr), 1).unwrap();
        for i in 0..init.len() {
            let step = (fin[i] - init[i]).abs();
            let expected = lr * g[i].abs() / (g[i].abs() + 1e-8);
            assert!((step - expected).abs() < 1e-15, "{step} vs {expected}");
            if g[i].abs() > 1e-2 {
                assert!((step - lr).abs() < 1e-6 * lr);
            }
        }
    }

    #[test]
    fn rmsprop_matches_scalar_recursion() {
        // Independent scalar recursion for loss 0.5 w^2 (w > 0), gradient w.
        let (arch, data) = quadratic();
        let lr = 0.01;
        let (mut w, mut v) = (1.0_f64, 0.0_f64);
        let mut expected = vec![0.5 * w * w];
        for _ in 0..500 {
            let g = if w >= 0.0 { w } else { 0.0 };
            v = 0.9 * v + 0.1 * g * g;
            w -= lr * g / (v.sqrt() + 1e-8);
            expected.push(0.5 * w.max(0.0).powi(2));
        }
        let init = ParamVector::new(&arch, vec![1.0]).unwrap();
        let trace = adaptive_train(&arch, &init, &data, &OptimizerConfig::rmsprop(lr), 500).unwrap();
        for (a, b) in trace.losses.iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
        assert!(trace.final_loss() < 1e-3);
    }

    #[test]
    fn every_optimizer_reduces_a_simple_loss() {
        let arch = NetworkArch::one_layer(2, 3, Activation::Sigmoid).unwrap();
        let data = Dataset::from_rows(
            &[vec![1.0, 0.5], vec![-1.0, 2.0], vec![0.2, -0.7]],
            &[vec![2.0], vec![1.0], vec![1.6]],
        )
        .unwrap();
        let init = ParamVector::new(&arch, vec![0.1, -0.1, 0.2, 0.0, -0.3, 0.1]).unwrap();
        for cfg in [
            OptimizerConfig::gd(1.0),
            OptimizerConfig::adam(0.01),
            OptimizerConfig::adagrad(0.05),
            OptimizerConfig::adadelta(1.0),
            OptimizerConfig::rmsprop(0.01),
        ] {
            let trace = adaptive_train(&arch, &init, &data, &cfg, 200).unwrap();
            assert!(trace.final_loss() < trace.initial_loss(), "{}", cfg.name());
        }
    }

    #[test]
    fn config_json() {
        let cfg: OptimizerConfig =
            serde_json::from_str(r#"{"kind":"adam","learning_rate":0.001}"#).unwrap();
        assert_eq!(cfg, OptimizerConfig::adam(0.001));
        assert!(serde_json::from_str::<OptimizerConfig>(
            r#"{"kind":"adam","learning_rate":0.001,"momentum":0.5}"#
        )
        .is_err());
        assert!(OptimizerConfig::adam(-1.0).validate().is_err());
        assert!(OptimizerConfig::from_name("sgd", 0.1).is_err());
    }

    #[test]
    fn rejects_zero_epochs() {
        let (arch, data) = quadratic();
        let init = ParamVector::new(&arch, vec![1.0]).unwrap();
        assert!(gd_train(&arch, &init, &data, 0.1, 0).is_err());
        assert!(gd_train(&arch, &init, &data, f64::NAN, 1).is_err());
    }
}
