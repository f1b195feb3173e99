//! Teacher-student comparisons between learning-rate tuners and optimizers.
//!
//! Each experiment draws its own dataset and student initialization from a
//! seed derived with [`split_seed`], so experiments can run in any order on
//! any number of threads and still produce identical summaries.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{finite_or_null, lipschitz_report};
use crate::error::{Error, Result};
use crate::net::{forward, Dataset, NetworkArch, ParamVector};
use crate::optim::{gd_train, train, OptimizerConfig, TrainTrace};
use crate::tuner::{binary_search_tune, random_search_tune};

/// Mixes `master` and `index` into an independent 64-bit seed.
///
/// The index is spread by the golden-ratio increment and the sum is passed
/// through the SplitMix64 finalizer, so neighbouring indices give unrelated
/// streams.
pub fn split_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A generated problem: data labelled by a random teacher network, and the
/// initial weights of the student to be trained on it.
#[derive(Clone, Debug, PartialEq)]
pub struct TeacherStudent {
    pub data: Dataset,
    pub teacher: ParamVector,
    pub init: ParamVector,
}

/// Xavier-uniform weights: each block uniform in `+-sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_uniform<R: Rng>(arch: &NetworkArch, rng: &mut R) -> ParamVector {
    let mut values = Vec::with_capacity(arch.param_count());
    for (fan_in, fan_out, count) in arch.layer_fans() {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        values.extend((0..count).map(|_| rng.random_range(-limit..=limit)));
    }
    ParamVector::from_raw(values)
}

/// Inputs `x ~ N(0, I)`, teacher weights `N(0, 1)`, labels from the teacher's
/// forward pass, student init Xavier-uniform.
pub fn generate_teacher_student(arch: &NetworkArch, n: usize, seed: u64) -> Result<TeacherStudent> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = arch.input_dim();
    let inputs: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    let teacher = ParamVector::from_raw(
        (0..arch.param_count())
            .map(|_| rng.sample(StandardNormal))
            .collect(),
    );
    let init = xavier_uniform(arch, &mut rng);
    let mut targets = Vec::with_capacity(n * arch.output_dim());
    for x in inputs.chunks_exact(d) {
        targets.extend(forward(arch, &teacher, x)?);
    }
    let data = Dataset::from_flat(inputs, targets, d, arch.output_dim())?;
    Ok(TeacherStudent {
        data,
        teacher,
        init,
    })
}

/// Trapezoidal area under the loss curve with unit spacing between epochs.
/// Diverged traces get `+inf` so they never rank as best.
pub fn auc_trace(trace: &TrainTrace) -> f64 {
    if trace.diverged {
        return f64::INFINITY;
    }
    auc(&trace.losses)
}

pub fn auc(losses: &[f64]) -> f64 {
    losses.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum()
}

/// Something to run on every experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum Method {
    /// Binary search from `1/alpha` with `E` budgeted evaluations.
    BinarySearch,
    /// Uniform random search over `[lo, hi]`.
    RandomSearch {
        #[serde(default = "default_lo")]
        lo: f64,
        #[serde(default = "default_hi")]
        hi: f64,
    },
    /// Plain gradient descent at `1/alpha`.
    DerivedGd,
    /// A fixed optimizer configuration.
    Optimizer { optimizer: OptimizerConfig },
}

fn default_lo() -> f64 {
    1e-4
}

fn default_hi() -> f64 {
    1.0
}

impl Method {
    pub fn random_search() -> Self {
        Method::RandomSearch {
            lo: default_lo(),
            hi: default_hi(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Method::BinarySearch => "binary_search".into(),
            Method::RandomSearch { .. } => "random_search".into(),
            Method::DerivedGd => "derived_gd".into(),
            Method::Optimizer { optimizer } => optimizer.name().into(),
        }
    }
}

/// How the weight cap for the two-layer bounds is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BetaPolicy {
    /// `factor * max |theta_init|`.
    FromInit {
        #[serde(default = "default_beta_factor")]
        factor: f64,
    },
    Fixed { value: f64 },
}

fn default_beta_factor() -> f64 {
    1.05
}

impl Default for BetaPolicy {
    fn default() -> Self {
        BetaPolicy::FromInit {
            factor: default_beta_factor(),
        }
    }
}

impl BetaPolicy {
    fn resolve(self, init: &ParamVector) -> Result<f64> {
        match self {
            BetaPolicy::FromInit { factor } => checked_beta(factor * init.max_abs()),
            BetaPolicy::Fixed { value } => checked_beta(value),
        }
    }
}

fn checked_beta(beta: f64) -> Result<f64> {
    if beta > 0.0 && beta.is_finite() {
        Ok(beta)
    } else {
        Err(Error::InvalidBeta(beta))
    }
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub arch: NetworkArch,
    /// Samples per dataset.
    pub samples: usize,
    pub epochs: usize,
    /// Budgeted evaluations per tuner.
    pub evals: usize,
    pub num_experiments: usize,
    pub master_seed: u64,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub beta: BetaPolicy,
    /// Grant random search `evals + 1` draws, matching the binary search's
    /// uncounted baseline run. With `false` it gets exactly `evals`.
    #[serde(default = "default_true")]
    pub fair_budget: bool,
}

impl ExperimentConfig {
    /// Binary search against random search on `arch`, 100 samples, 100 epochs.
    pub fn new(arch: NetworkArch, evals: usize, num_experiments: usize, master_seed: u64) -> Self {
        ExperimentConfig {
            arch,
            samples: 100,
            epochs: 100,
            evals,
            num_experiments,
            master_seed,
            methods: vec![Method::BinarySearch, Method::random_search()],
            beta: BetaPolicy::default(),
            fair_budget: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("samples", self.samples),
            ("epochs", self.epochs),
            ("num_experiments", self.num_experiments),
            ("methods", self.methods.len()),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
            }
        }
        let needs_draws = self
            .methods
            .iter()
            .any(|m| matches!(m, Method::RandomSearch { .. }));
        if needs_draws && self.random_search_draws() == 0 {
            return Err(Error::InvalidArgument(
                "random search needs evals >= 1 when the budget is not matched".into(),
            ));
        }
        for m in &self.methods {
            match m {
                Method::RandomSearch { lo, hi } if !(*lo > 0.0 && lo <= hi && hi.is_finite()) => {
                    return Err(Error::InvalidArgument(format!(
                        "random-search interval must satisfy 0 < lo <= hi, got [{lo}, {hi}]"
                    )));
                }
                Method::Optimizer { optimizer } => optimizer.validate()?,
                _ => {}
            }
        }
        let mut labels: Vec<String> = self.methods.iter().map(Method::label).collect();
        labels.sort();
        labels.dedup();
        if labels.len() != self.methods.len() {
            return Err(Error::InvalidArgument("each method may appear only once".into()));
        }
        if let BetaPolicy::Fixed { value } = self.beta {
            checked_beta(value)?;
        }
        Ok(())
    }

    pub fn random_search_draws(&self) -> usize {
        self.evals + usize::from(self.fair_budget)
    }
}

/// Result of one method on one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: String,
    pub chosen_eta: Option<f64>,
    /// Best-found value: the lowest final loss the method reached with a
    /// rate it would return.
    #[serde(with = "finite_or_null")]
    pub final_loss: f64,
    /// Area under the chosen run's loss curve.
    #[serde(with = "finite_or_null")]
    pub auc: f64,
    pub diverged: bool,
    pub monotone: bool,
    /// Budgeted evaluations used (1 for single runs).
    pub evaluations: usize,
    /// Smallest learning rate tried (tuners only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_eta_tried: Option<f64>,
    /// Whether the chosen run's weights left `[-beta, beta]` (two-layer only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_beta: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub trace: Option<TrainTrace>,
}

impl MethodOutcome {
    fn failed(method: String, err: &Error) -> Self {
        MethodOutcome {
            error: Some(err.to_string()),
            ..Self::diverged(method)
        }
    }

    fn diverged(method: String) -> Self {
        MethodOutcome {
            method,
            chosen_eta: None,
            final_loss: f64::INFINITY,
            auc: f64::INFINITY,
            diverged: true,
            monotone: false,
            evaluations: 0,
            min_eta_tried: None,
            left_beta: None,
            error: None,
            trace: None,
        }
    }

    fn from_trace(
        method: String,
        eta: Option<f64>,
        trace: TrainTrace,
        evaluations: usize,
        beta: Option<f64>,
    ) -> Self {
        MethodOutcome {
            method,
            chosen_eta: eta,
            final_loss: trace.final_loss(),
            auc: auc_trace(&trace),
            diverged: trace.diverged,
            monotone: trace.monotone,
            evaluations,
            min_eta_tried: None,
            left_beta: beta.map(|b| trace.max_abs_param >= b),
            error: None,
            trace: Some(trace),
        }
    }

    /// Usable for best-found comparisons: ran, did not diverge.
    pub fn is_valid(&self) -> bool {
        self.error.is_none() && !self.diverged
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub index: usize,
    pub seed: u64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub outcomes: Vec<MethodOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ExperimentRecord {
    pub fn outcome(&self, method: &str) -> Option<&MethodOutcome> {
        self.outcomes.iter().find(|o| o.method == method)
    }
}

/// Summary statistics of the chosen learning rates (population std).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub max: f64,
    pub min: f64,
}

impl EtaStats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(EtaStats {
            count: values.len(),
            mean,
            std: var.sqrt(),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub divergence_fraction: f64,
    /// Over non-divergent runs only; absent when every run diverged.
    pub eta: Option<EtaStats>,
}

/// How often `reference` beat `opponent`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WinFraction {
    pub reference: String,
    pub opponent: String,
    /// Strictly lower best-found loss, among experiments where neither
    /// method diverged. `None` when there is no such experiment.
    pub best_value_exclusive: Option<f64>,
    pub compared_exclusive: usize,
    /// Counting a divergent opponent as a loss for it and a divergent
    /// reference as a loss for the reference, over all experiments that ran.
    pub best_value_inclusive: Option<f64>,
    pub compared_inclusive: usize,
    /// Strictly lower area under the loss curve.
    pub auc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub records: Vec<ExperimentRecord>,
    pub methods: Vec<MethodSummary>,
    /// The first method against each of the others.
    pub comparisons: Vec<WinFraction>,
}

fn run_method(
    config: &ExperimentConfig,
    method: &Method,
    problem: &TeacherStudent,
    alpha: f64,
    beta: Option<f64>,
    seed: u64,
) -> Result<MethodOutcome> {
    let label = method.label();
    let (arch, init, data) = (&config.arch, &problem.init, &problem.data);
    match method {
        Method::BinarySearch | Method::RandomSearch { .. } => {
            let result = match method {
                Method::BinarySearch => {
                    binary_search_tune(arch, init, data, alpha, config.evals, config.epochs)?
                }
                Method::RandomSearch { lo, hi } => random_search_tune(
                    arch,
                    init,
                    data,
                    (*lo, *hi),
                    config.random_search_draws(),
                    config.epochs,
                    split_seed(seed, 1),
                )?,
                _ => unreachable!(),
            };
            let min_eta = result
                .history
                .iter()
                .map(|t| t.eta)
                .fold(f64::INFINITY, f64::min);
            let mut outcome = match result.best_trace {
                Some(trace) => MethodOutcome::from_trace(
                    label,
                    result.chosen_eta,
                    trace,
                    result.evaluations,
                    beta,
                ),
                // Every random draw diverged.
                None => MethodOutcome {
                    evaluations: result.evaluations,
                    ..MethodOutcome::diverged(label)
                },
            };
            outcome.min_eta_tried = Some(min_eta);
            Ok(outcome)
        }
        Method::DerivedGd => {
            let (trace, _) = gd_train(arch, init, data, 1.0 / alpha, config.epochs)?;
            Ok(MethodOutcome::from_trace(label, Some(1.0 / alpha), trace, 1, beta))
        }
        Method::Optimizer { optimizer } => {
            let (trace, _) = train(arch, init, data, optimizer, config.epochs)?;
            let lr = optimizer.learning_rate();
            Ok(MethodOutcome::from_trace(label, Some(lr), trace, 1, beta))
        }
    }
}

/// Runs one experiment of a comparison.
pub fn run_experiment(config: &ExperimentConfig, index: usize) -> ExperimentRecord {
    let seed = split_seed(config.master_seed, index as u64);
    let mut record = ExperimentRecord {
        index,
        seed,
        alpha: None,
        beta: None,
        outcomes: Vec::new(),
        error: None,
    };
    let setup = (|| {
        let problem = generate_teacher_student(&config.arch, config.samples, split_seed(seed, 0))?;
        let beta = if config.arch.depth() == 2 || config.arch.output_dim() > 1 {
            Some(config.beta.resolve(&problem.init)?)
        } else {
            None
        };
        let report = lipschitz_report(&config.arch, &problem.data, beta)?;
        if !(report.alpha > 0.0) {
            return Err(Error::InvalidArgument(
                "Lipschitz constant is zero; the generated data is degenerate".into(),
            ));
        }
        Ok((problem, beta, report.alpha))
    })();
    let (problem, beta, alpha) = match setup {
        Ok(v) => v,
        Err(e) => {
            record.error = Some(e.to_string());
            return record;
        }
    };
    record.alpha = Some(alpha);
    record.beta = beta;
    let beta_check = if config.arch.depth() == 2 { beta } else { None };
    record.outcomes = config
        .methods
        .iter()
        .map(|m| {
            run_method(config, m, &problem, alpha, beta_check, seed)
                .unwrap_or_else(|e| MethodOutcome::failed(m.label(), &e))
        })
        .collect();
    record
}

/// Runs every experiment of `config` on `jobs` threads and aggregates.
///
/// The result does not depend on `jobs`.
pub fn run_comparison(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentSummary> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let records: Vec<ExperimentRecord> = pool.install(|| {
        (0..config.num_experiments)
            .into_par_iter()
            .map(|i| run_experiment(config, i))
            .collect()
    });
    Ok(summarize(config.clone(), records))
}

/// Aggregates finished records.
pub fn summarize(config: ExperimentConfig, records: Vec<ExperimentRecord>) -> ExperimentSummary {
    let labels: Vec<String> = config.methods.iter().map(Method::label).collect();
    let methods = labels
        .iter()
        .map(|label| {
            let outcomes: Vec<&MethodOutcome> =
                records.iter().filter_map(|r| r.outcome(label)).collect();
            let diverged = outcomes.iter().filter(|o| !o.is_valid()).count();
            let etas: Vec<f64> = outcomes
                .iter()
                .filter(|o| o.is_valid())
                .filter_map(|o| o.chosen_eta)
                .collect();
            MethodSummary {
                method: label.clone(),
                divergence_fraction: if outcomes.is_empty() {
                    0.0
                } else {
                    diverged as f64 / outcomes.len() as f64
                },
                eta: EtaStats::of(&etas),
            }
        })
        .collect();
    let comparisons = labels
        .iter()
        .skip(1)
        .map(|opponent| win_fraction(&records, &labels[0], opponent))
        .collect();
    ExperimentSummary {
        config,
        records,
        methods,
        comparisons,
    }
}

fn fraction(wins: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| wins as f64 / total as f64)
}

pub fn win_fraction(records: &[ExperimentRecord], reference: &str, opponent: &str) -> WinFraction {
    let pairs: Vec<(&MethodOutcome, &MethodOutcome)> = records
        .iter()
        .filter_map(|r| Some((r.outcome(reference)?, r.outcome(opponent)?)))
        .collect();
    let exclusive: Vec<_> = pairs
        .iter()
        .filter(|(a, b)| a.is_valid() && b.is_valid())
        .collect();
    let excl_wins = exclusive
        .iter()
        .filter(|(a, b)| a.final_loss < b.final_loss)
        .count();
    let incl_wins = pairs
        .iter()
        .filter(|(a, b)| a.is_valid() && (!b.is_valid() || a.final_loss < b.final_loss))
        .count();
    let auc_wins = pairs.iter().filter(|(a, b)| a.auc < b.auc).count();
    WinFraction {
        reference: reference.into(),
        opponent: opponent.into(),
        best_value_exclusive: fraction(excl_wins, exclusive.len()),
        compared_exclusive: exclusive.len(),
        best_value_inclusive: fraction(incl_wins, pairs.len()),
        compared_inclusive: pairs.len(),
        auc: fraction(auc_wins, pairs.len()),
    }
}

/// Per-method statistics of the chosen rates over non-divergent runs.
pub fn eta_statistics(summary: &ExperimentSummary) -> Vec<(String, Option<EtaStats>)> {
    summary
        .methods
        .iter()
        .map(|m| (m.method.clone(), m.eta))
        .collect()
}

fn arch_label(arch: &NetworkArch) -> String {
    let w = arch.hidden_widths();
    let dims = std::iter::once(arch.input_dim())
        .chain(w.iter().copied())
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("x");
    format!("{}{}l_{}", arch.activation(), w.len(), dims)
}

fn opt(v: Option<f64>) -> String {
    v.map(crate::net::format_f64).unwrap_or_default()
}

impl ExperimentSummary {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per method: divergence fraction, rate statistics and wins of
    /// the reference method.
    pub fn table_csv(&self) -> String {
        let mut out = String::from(
            "arch,evals,method,divergence_fraction,eta_mean,eta_std,eta_max,eta_min,\
             win_exclusive,win_inclusive,win_auc\n",
        );
        let arch = arch_label(&self.config.arch);
        for m in &self.methods {
            let win = self.comparisons.iter().find(|c| c.opponent == m.method);
            let _ = writeln!(
                out,
                "{arch},{},{},{},{},{},{},{},{},{},{}",
                self.config.evals,
                m.method,
                crate::net::format_f64(m.divergence_fraction),
                opt(m.eta.map(|s| s.mean)),
                opt(m.eta.map(|s| s.std)),
                opt(m.eta.map(|s| s.max)),
                opt(m.eta.map(|s| s.min)),
                opt(win.and_then(|w| w.best_value_exclusive)),
                opt(win.and_then(|w| w.best_value_inclusive)),
                opt(win.and_then(|w| w.auc)),
            );
        }
        out
    }

    /// A compact table for terminals.
    pub fn render(&self) -> String {
        let mut out = format!(
            "{} | N={} T={} E={} | {} experiments\n",
            self.config.arch,
            self.config.samples,
            self.config.epochs,
            self.config.evals,
            self.records.len()
        );
        let _ = writeln!(
            out,
            "{:<16} {:>9} {:>9} {:>9} {:>9} {:>9}",
            "method", "diverged", "eta mean", "eta std", "eta max", "eta min"
        );
        for m in &self.methods {
            let cell = |f: fn(&EtaStats) -> f64| {
                m.eta.map(|s| format!("{:.4}", f(&s))).unwrap_or_else(|| "-".into())
            };
            let _ = writeln!(
                out,
                "{:<16} {:>9.3} {:>9} {:>9} {:>9} {:>9}",
                m.method,
                m.divergence_fraction,
                cell(|s| s.mean),
                cell(|s| s.std),
                cell(|s| s.max),
                cell(|s| s.min)
            );
        }
        for c in &self.comparisons {
            let pct = |v: Option<f64>| v.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{} vs {}: best value {} of {} non-divergent ({} of all {}), AUC {}",
                c.reference,
                c.opponent,
                pct(c.best_value_exclusive),
                c.compared_exclusive,
                pct(c.best_value_inclusive),
                c.compared_inclusive,
                pct(c.auc)
            );
        }
        let failed = self.records.iter().filter(|r| r.error.is_some()).count();
        if failed > 0 {
            let _ = writeln!(out, "{failed} experiments failed during setup");
        }
        out
    }

    /// Writes `summary.json`, `table.csv` and one trace CSV per method and
    /// experiment under `dir/traces`.
    pub fn write_run_dir(&self, dir: &Path) -> Result<()> {
        let traces = dir.join("traces");
        fs::create_dir_all(&traces).map_err(|e| Error::io(&traces, e))?;
        let write = |path: &Path, contents: &str| {
            fs::write(path, contents).map_err(|e| Error::io(path, e))
        };
        write(&dir.join("summary.json"), &self.to_json()?)?;
        write(&dir.join("table.csv"), &self.table_csv())?;
        for r in &self.records {
            for o in &r.outcomes {
                if let Some(trace) = &o.trace {
                    let path = traces.join(format!("exp{:04}_{}.csv", r.index, o.method));
                    let mut buf = Vec::new();
                    trace.write_csv(&mut buf).map_err(|e| Error::io(&path, e))?;
                    fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
                }
            }
        }
        Ok(())
    }
}

/// Pivots one win fraction over several summaries into a grid with one row
/// per architecture and one column per evaluation budget.
pub fn win_grid_csv(summaries: &[ExperimentSummary], opponent: &str, inclusive: bool) -> String {
    let mut budgets: Vec<usize> = summaries.iter().map(|s| s.config.evals).collect();
    budgets.sort_unstable();
    budgets.dedup();
    let mut archs: Vec<String> = Vec::new();
    for s in summaries {
        let label = arch_label(&s.config.arch);
        if !archs.contains(&label) {
            archs.push(label);
        }
    }
    let mut out = String::from("arch");
    for e in &budgets {
        let _ = write!(out, ",E={e}");
    }
    out.push('\n');
    for a in &archs {
        out.push_str(a);
        for e in &budgets {
            let cell = summaries
                .iter()
                .filter(|s| arch_label(&s.config.arch) == *a && s.config.evals == *e)
                .flat_map(|s| s.comparisons.iter())
                .find(|c| c.opponent == opponent)
                .and_then(|c| {
                    if inclusive {
                        c.best_value_inclusive
                    } else {
                        c.best_value_exclusive
                    }
                });
            let _ = write!(out, ",{}", opt(cell));
        }
        out.push('\n');
    }
    out
}
