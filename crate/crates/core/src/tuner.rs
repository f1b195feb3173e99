//! Learning-rate tuners.
//!
//! [`binary_search_tune`] starts from the guaranteed step `1/alpha` and only
//! ever moves upward from it: after a successful trial it doubles the step,
//! after a failed one it moves the inverse step halfway back toward the last
//! successful anchor `l_c`. In inverse-step units `u = 1/eta`,
//!
//! ```text
//! success at u:  l_c <- u,   u <- l_c / 2
//! failure at u:  u <- (u + l_c) / 2
//! ```
//!
//! Since `l_c <= alpha` throughout, every trial satisfies `eta >= 1/alpha`,
//! and the returned rate is always one whose trace was monotone.
//!
//! [`random_search_tune`] draws rates uniformly from an interval; it stands in
//! for black-box tuners in the comparisons.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{Dataset, NetworkArch, ParamVector};
use crate::optim::{gd_train, TrainTrace};

/// One evaluated learning rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub eta: f64,
    /// Loss after `T` epochs; `null` in JSON when it was not finite.
    #[serde(with = "crate::bounds::finite_or_null")]
    pub final_loss: f64,
    pub monotone: bool,
    pub diverged: bool,
    /// Whether this trial was charged against the evaluation budget. The
    /// binary search's baseline run at `1/alpha` is not.
    pub counted: bool,
    /// Binary search only: whether the trial counted as an improvement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success: Option<bool>,
    /// Binary search only: the anchor `l_c` after this trial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TunerKind {
    BinarySearch,
    RandomSearch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TunerResult {
    pub tuner: TunerKind,
    /// `None` only when a random search found no non-divergent rate.
    pub chosen_eta: Option<f64>,
    pub best_loss: Option<f64>,
    /// Budgeted evaluations actually run.
    pub evaluations: usize,
    /// Every trial in evaluation (or draw) order, the uncounted baseline first.
    pub history: Vec<Trial>,
    pub no_valid_rate: bool,
    /// Binary search only: whether the run at `1/alpha` was monotone.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_monotone: Option<bool>,
    /// Trace of the chosen rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_trace: Option<TrainTrace>,
}

impl TunerResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Human-readable per-trial table.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:>5}  {:>12}  {:>14}  {:>8}  {:>8}  {:>7}\n",
            "trial", "eta", "final_loss", "monotone", "diverged", "counted"
        );
        for (i, t) in self.history.iter().enumerate() {
            out.push_str(&format!(
                "{:>5}  {:>12.6}  {:>14.6e}  {:>8}  {:>8}  {:>7}\n",
                i, t.eta, t.final_loss, t.monotone, t.diverged, t.counted
            ));
        }
        match self.chosen_eta {
            Some(eta) => out.push_str(&format!(
                "chosen eta = {eta:.6}, best loss = {:.6e}\n",
                self.best_loss.unwrap_or(f64::NAN)
            )),
            None => out.push_str("no valid learning rate found\n"),
        }
        out
    }
}

/// What an evaluation of one learning rate reports back to the search.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub final_loss: f64,
    pub monotone: bool,
    pub diverged: bool,
    pub trace: Option<TrainTrace>,
}

impl From<TrainTrace> for Evaluation {
    fn from(trace: TrainTrace) -> Self {
        Evaluation {
            final_loss: trace.final_loss(),
            monotone: trace.monotone,
            diverged: trace.diverged,
            trace: Some(trace),
        }
    }
}

/// The binary search over any evaluation function.
///
/// `evaluate` is called once at `1/alpha` (uncounted) and then exactly
/// `evals` more times, unless the baseline already failed, in which case the
/// update rule would keep proposing `1/alpha` and the search stops there.
pub fn binary_search_with<F>(alpha: f64, evals: usize, mut evaluate: F) -> Result<TunerResult>
where
    F: FnMut(f64) -> Result<Evaluation>,
{
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be positive and finite, got {alpha}"
        )));
    }
    // Work with the inverse step u = 1/eta. Both u and l_c only ever move to
    // midpoints of values <= alpha, so u <= alpha, and eta = 1/u >= 1/alpha
    // holds exactly in floating point too.
    let mut u = alpha;
    let mut l_c = alpha;

    let base = evaluate(1.0 / u)?;
    let mut best_loss = base.final_loss;
    let mut best_eta = 1.0 / u;
    let mut best_trace = base.trace;
    let baseline_ok = base.monotone && base.final_loss.is_finite();
    // The loop's first trial would re-run eta = 1/alpha; its cached outcome
    // is a success exactly when the baseline itself was monotone.
    if baseline_ok {
        u = l_c / 2.0;
    }
    let mut history = vec![Trial {
        eta: best_eta,
        final_loss: best_loss,
        monotone: base.monotone,
        diverged: base.diverged,
        counted: false,
        success: Some(baseline_ok),
        anchor: Some(l_c),
    }];

    let budget = if baseline_ok { evals } else { 0 };
    for _ in 0..budget {
        let eta = 1.0 / u;
        let e = evaluate(eta)?;
        let success = e.monotone && e.final_loss < best_loss;
        if success {
            best_loss = e.final_loss;
            best_eta = eta;
            best_trace = e.trace;
            l_c = u;
            u = l_c / 2.0;
        } else {
            u = (u + l_c) / 2.0;
        }
        history.push(Trial {
            eta,
            final_loss: e.final_loss,
            monotone: e.monotone,
            diverged: e.diverged,
            counted: true,
            success: Some(success),
            anchor: Some(l_c),
        });
    }

    Ok(TunerResult {
        tuner: TunerKind::BinarySearch,
        chosen_eta: Some(best_eta),
        best_loss: Some(best_loss),
        evaluations: budget,
        history,
        no_valid_rate: false,
        baseline_monotone: Some(base.monotone),
        best_trace,
    })
}

/// Binary search for a GD learning rate, every trial trained from `init`
/// for `epochs` steps.
pub fn binary_search_tune(
    arch: &NetworkArch,
    init: &ParamVector,
    data: &Dataset,
    alpha: f64,
    evals: usize,
    epochs: usize,
) -> Result<TunerResult> {
    binary_search_with(alpha, evals, |eta| {
        gd_train(arch, init, data, eta, epochs).map(|(trace, _)| trace.into())
    })
}

/// `draws` learning rates uniform in `[lo, hi]`; the lowest final loss among
/// non-divergent runs wins.
pub fn random_search_tune(
    arch: &NetworkArch,
    init: &ParamVector,
    data: &Dataset,
    interval: (f64, f64),
    draws: usize,
    epochs: usize,
    seed: u64,
) -> Result<TunerResult> {
    random_search_with(interval, draws, seed, |eta| {
        gd_train(arch, init, data, eta, epochs).map(|(trace, _)| trace.into())
    })
}

pub fn random_search_with<F>(
    (lo, hi): (f64, f64),
    draws: usize,
    seed: u64,
    mut evaluate: F,
) -> Result<TunerResult>
where
    F: FnMut(f64) -> Result<Evaluation>,
{
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "random-search interval must satisfy 0 < lo <= hi, got [{lo}, {hi}]"
        )));
    }
    if draws == 0 {
        return Err(Error::InvalidArgument("random search needs at least one draw".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut history = Vec::with_capacity(draws);
    let mut best: Option<(f64, f64, Option<TrainTrace>)> = None;
    for _ in 0..draws {
        let eta = if lo == hi { lo } else { rng.random_range(lo..=hi) };
        let e = evaluate(eta)?;
        if !e.diverged && best.as_ref().is_none_or(|(_, l, _)| e.final_loss < *l) {
            best = Some((eta, e.final_loss, e.trace));
        }
        history.push(Trial {
            eta,
            final_loss: e.final_loss,
            monotone: e.monotone,
            diverged: e.diverged,
            counted: true,
            success: None,
            anchor: None,
        });
    }
    let (chosen_eta, best_loss, best_trace) = match best {
        Some((eta, loss, trace)) => (Some(eta), Some(loss), trace),
        None => (None, None, None),
    };
    Ok(TunerResult {
        tuner: TunerKind::RandomSearch,
        chosen_eta,
        best_loss,
        evaluations: draws,
        history,
        no_valid_rate: chosen_eta.is_none(),
        baseline_monotone: None,
        best_trace,
    })
}
