//! The `lipstep` command line.
//!
//! Exit codes: 0 on success, 1 on a numerical failure, 2 on bad usage or
//! configuration (including unreadable files).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{lipschitz_report, report_for_method, BoundMethod, LipschitzReport};
use crate::error::{Error, Result};
use crate::experiments::{
    generate_teacher_student, run_comparison, split_seed, xavier_uniform, BetaPolicy,
    ExperimentConfig, Method,
};
use crate::net::{Activation, Dataset, NetworkArch, ParamVector};
use crate::optim::{train, OptimizerConfig, TrainTrace};
use crate::tuner::{binary_search_tune, random_search_tune, TunerResult};

#[derive(Debug, Parser)]
#[command(
    name = "lipstep",
    version,
    about = "Learning rates for shallow networks from gradient-Lipschitz bounds"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the Lipschitz constant (or bound) of a dataset as JSON.
    Bound(BoundArgs),
    /// Train a network with gradient descent or an adaptive optimizer.
    Train(TrainArgs),
    /// Tune the GD learning rate by binary search or random search.
    Tune(TuneArgs),
    /// Generate a teacher-student dataset and a student initialization.
    Gen(GenArgs),
    /// Run a batch of teacher-student experiments comparing methods.
    Compare(CompareArgs),
}

/// Architecture flags. The input dimension is taken from the dataset when
/// there is one.
#[derive(Debug, Clone, Args)]
pub struct ArchArgs {
    /// Number of hidden layers.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub layers: u8,
    /// Input dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Width of the first hidden layer.
    #[arg(long, alias = "k1", default_value_t = 1)]
    pub k: usize,
    /// Width of the second hidden layer (two layers only).
    #[arg(long)]
    pub k2: Option<usize>,
    /// Number of linear outputs (one hidden layer only).
    #[arg(long, default_value_t = 1)]
    pub outputs: usize,
    #[arg(long, value_enum, default_value_t = ActArg::Relu)]
    pub act: ActArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ActArg {
    Relu,
    Sigmoid,
}

impl From<ActArg> for Activation {
    fn from(a: ActArg) -> Self {
        match a {
            ActArg::Relu => Activation::Relu,
            ActArg::Sigmoid => Activation::Sigmoid,
        }
    }
}

impl ArchArgs {
    /// Builds the architecture, filling the input and output dimensions from
    /// `data` when given and checking any explicit `--d` against it.
    pub fn build(&self, data: Option<&Dataset>) -> Result<NetworkArch> {
        let d = match (self.d, data) {
            (Some(d), Some(data)) if d != data.input_dim() => {
                return Err(Error::DimensionMismatch {
                    context: "--d against the dataset",
                    expected: d,
                    actual: data.input_dim(),
                })
            }
            (_, Some(data)) => data.input_dim(),
            (Some(d), None) => d,
            (None, None) => return Err(Error::InvalidArgument("--d is required".into())),
        };
        let outputs = data.map_or(self.outputs, Dataset::output_dim);
        let act = self.act.into();
        match (self.layers, self.k2) {
            (1, None) => NetworkArch::multi_output(d, self.k, outputs, act),
            (1, Some(_)) => Err(Error::InvalidArgument("--k2 needs --layers 2".into())),
            (_, Some(k2)) => NetworkArch::new(d, vec![self.k, k2], act, outputs),
            (_, None) => Err(Error::InvalidArgument("--layers 2 needs --k2".into())),
        }
    }
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    /// Dataset CSV with x_* input columns followed by y_* target columns.
    pub data: PathBuf,
    #[command(flatten)]
    pub arch: ArchArgs,
    /// Weight cap for the two-layer and multi-output bounds.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Force a bound method instead of picking the one matching the flags.
    #[arg(long)]
    pub method: Option<BoundMethod>,
}

#[derive(Debug, Args)]
pub struct InitArgs {
    /// Initial parameters as a JSON array; Xavier-uniform from the seed if absent.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long, env = "LIPSTEP_SEED", default_value_t = 0)]
    pub seed: u64,
}

impl InitArgs {
    fn load(&self, arch: &NetworkArch) -> Result<ParamVector> {
        match &self.init {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let values: Vec<f64> = serde_json::from_str(&text)?;
                ParamVector::new(arch, values)
            }
            None => Ok(xavier_uniform(
                arch,
                &mut ChaCha8Rng::seed_from_u64(split_seed(self.seed, 0)),
            )),
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub data: PathBuf,
    #[command(flatten)]
    pub arch: ArchArgs,
    #[command(flatten)]
    pub init: InitArgs,
    #[arg(long, default_value = "gd")]
    pub optimizer: String,
    /// Learning rate; for `gd` defaults to `1/alpha` from the matching bound.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Weight cap for the bound (two-layer only); defaults to 1.05 max|init|.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    /// Directory for `trace.csv`, `trace.json` and `params.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TunerArg {
    Binary,
    Random,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    pub data: PathBuf,
    #[command(flatten)]
    pub arch: ArchArgs,
    #[command(flatten)]
    pub init: InitArgs,
    #[arg(long, value_enum, default_value_t = TunerArg::Binary)]
    pub tuner: TunerArg,
    /// Budgeted evaluations (random search: number of draws).
    #[arg(long, default_value_t = 10)]
    pub evals: usize,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Random-search interval.
    #[arg(long, default_value_t = 1e-4)]
    pub lo: f64,
    #[arg(long, default_value_t = 1.0)]
    pub hi: f64,
    /// Directory for `tuner.json` and `best_trace.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub arch: ArchArgs,
    /// Number of samples.
    #[arg(long, short = 'n', default_value_t = 100)]
    pub samples: usize,
    #[arg(long, env = "LIPSTEP_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Directory for `data.csv`, `teacher.json` and `init.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Run configuration JSON; replaces the architecture and budget flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub arch: ArchArgs,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub evals: usize,
    #[arg(long, default_value_t = 100)]
    pub experiments: usize,
    #[arg(long, env = "LIPSTEP_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Fixed weight cap; defaults to 1.05 max|init| per experiment.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Give random search exactly `evals` draws instead of `evals + 1`.
    #[arg(long)]
    pub strict_budget: bool,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Run directory for `summary.json`, `table.csv` and traces.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Configuration file accepted by `lipstep compare --config`: the
/// experiment settings plus where to write and how many threads to use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub arch: NetworkArch,
    #[serde(default = "defaults::hundred")]
    pub samples: usize,
    #[serde(default = "defaults::hundred")]
    pub epochs: usize,
    #[serde(default = "defaults::ten")]
    pub evals: usize,
    #[serde(default = "defaults::hundred")]
    pub num_experiments: usize,
    #[serde(default)]
    pub master_seed: Option<u64>,
    #[serde(default = "defaults::methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub beta: BetaPolicy,
    #[serde(default = "defaults::yes")]
    pub fair_budget: bool,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub jobs: Option<usize>,
}

mod defaults {
    use crate::experiments::Method;

    pub fn hundred() -> usize {
        100
    }
    pub fn ten() -> usize {
        10
    }
    pub fn yes() -> bool {
        true
    }
    pub fn methods() -> Vec<Method> {
        vec![Method::BinarySearch, Method::random_search()]
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// The experiment part; `seed` fills in a missing `master_seed`.
    pub fn experiment(&self, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            arch: self.arch.clone(),
            samples: self.samples,
            epochs: self.epochs,
            evals: self.evals,
            num_experiments: self.num_experiments,
            master_seed: self.master_seed.unwrap_or(seed),
            methods: self.methods.clone(),
            beta: self.beta,
            fair_budget: self.fair_budget,
        }
    }
}

/// Writes to stdout, treating a closed pipe (`lipstep ... | head`) as done.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn trace_csv(trace: &TrainTrace) -> Vec<u8> {
    let mut buf = Vec::new();
    trace.write_csv(&mut buf).expect("writing to memory");
    buf
}

fn matching_report(
    arch: &NetworkArch,
    data: &Dataset,
    beta: Option<f64>,
    init: &ParamVector,
) -> Result<LipschitzReport> {
    let needs_beta = BoundMethod::for_arch(arch)?.needs_beta();
    let beta = match (beta, needs_beta) {
        (Some(b), _) => Some(b),
        (None, true) => Some(crate::bounds::beta_from_init(init)?),
        (None, false) => None,
    };
    lipschitz_report(arch, data, beta)
}

pub fn cmd_bound(args: &BoundArgs) -> Result<LipschitzReport> {
    let data = Dataset::load_csv(&args.data)?;
    let arch = args.arch.build(Some(&data))?;
    match args.method {
        Some(method) => report_for_method(method, &arch, &data, args.beta),
        None => lipschitz_report(&arch, &data, args.beta),
    }
}

#[derive(Serialize)]
struct TraceRecord<'a> {
    optimizer: &'a OptimizerConfig,
    alpha: Option<f64>,
    beta: Option<f64>,
    left_beta: Option<bool>,
    trace: &'a TrainTrace,
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainTrace> {
    let data = Dataset::load_csv(&args.data)?;
    let arch = args.arch.build(Some(&data))?;
    let init = args.init.load(&arch)?;
    let mut report = None;
    let lr = match (args.lr, args.optimizer.as_str()) {
        (Some(lr), _) => lr,
        (None, "gd") => {
            let r = matching_report(&arch, &data, args.beta, &init)?;
            let eta = r.eta;
            report = Some(r);
            if !eta.is_finite() {
                return Err(Error::InvalidArgument(
                    "the loss is flat (alpha = 0); pass --lr explicitly".into(),
                ));
            }
            eta
        }
        (None, _) => 0.001,
    };
    let config = OptimizerConfig::from_name(&args.optimizer, lr)?;
    let (trace, params) = train(&arch, &init, &data, &config, args.epochs)?;
    let beta = report.as_ref().and_then(|r| r.beta);
    if let Some(dir) = &args.out {
        create_dir(dir)?;
        write_file(&dir.join("trace.csv"), trace_csv(&trace))?;
        let record = TraceRecord {
            optimizer: &config,
            alpha: report.as_ref().map(|r| r.alpha),
            beta,
            left_beta: beta.map(|b| trace.max_abs_param >= b),
            trace: &trace,
        };
        write_file(&dir.join("trace.json"), serde_json::to_string_pretty(&record)?)?;
        write_file(&dir.join("params.json"), serde_json::to_string(&params)?)?;
    }
    emit(&format!(
        "{} lr={lr:.6} epochs={} loss {:.6e} -> {:.6e} monotone={} diverged={}\n",
        config.name(),
        trace.epochs,
        trace.initial_loss(),
        trace.final_loss(),
        trace.monotone,
        trace.diverged
    ));
    if let Some(b) = beta {
        if trace.max_abs_param >= b {
            eprintln!(
                "warning: weights reached {:.4}, outside the assumed cap beta = {b:.4}",
                trace.max_abs_param
            );
        }
    }
    Ok(trace)
}

pub fn cmd_tune(args: &TuneArgs) -> Result<TunerResult> {
    let data = Dataset::load_csv(&args.data)?;
    let arch = args.arch.build(Some(&data))?;
    let init = args.init.load(&arch)?;
    let result = match args.tuner {
        TunerArg::Binary => {
            let report = matching_report(&arch, &data, args.beta, &init)?;
            if !(report.alpha > 0.0) {
                return Err(Error::InvalidArgument(
                    "the loss is flat (alpha = 0); there is nothing to tune".into(),
                ));
            }
            binary_search_tune(&arch, &init, &data, report.alpha, args.evals, args.epochs)?
        }
        TunerArg::Random => random_search_tune(
            &arch,
            &init,
            &data,
            (args.lo, args.hi),
            args.evals,
            args.epochs,
            split_seed(args.init.seed, 1),
        )?,
    };
    if let Some(dir) = &args.out {
        create_dir(dir)?;
        write_file(&dir.join("tuner.json"), result.to_json()?)?;
        if let Some(trace) = &result.best_trace {
            write_file(&dir.join("best_trace.csv"), trace_csv(trace))?;
        }
    }
    emit(&result.table());
    Ok(result)
}

pub fn cmd_gen(args: &GenArgs) -> Result<()> {
    let arch = args.arch.build(None)?;
    let problem = generate_teacher_student(&arch, args.samples, args.seed)?;
    create_dir(&args.out)?;
    problem.data.save_csv(&args.out.join("data.csv"))?;
    write_file(&args.out.join("teacher.json"), serde_json::to_string(&problem.teacher)?)?;
    write_file(&args.out.join("init.json"), serde_json::to_string(&problem.init)?)?;
    write_file(&args.out.join("arch.json"), serde_json::to_string_pretty(&arch)?)?;
    emit(&format!(
        "wrote {} samples for {arch} to {}\n",
        args.samples,
        args.out.display()
    ));
    Ok(())
}

pub fn cmd_compare(args: &CompareArgs) -> Result<crate::experiments::ExperimentSummary> {
    let (config, out, jobs) = match &args.config {
        Some(path) => {
            let run = RunConfig::load(path)?;
            let out = args.out.clone().or(run.out.clone());
            let jobs = run.jobs.unwrap_or(args.jobs);
            (run.experiment(args.seed), out, jobs)
        }
        None => {
            let arch = args.arch.build(None)?;
            let mut config = ExperimentConfig::new(arch, args.evals, args.experiments, args.seed);
            config.samples = args.samples;
            config.epochs = args.epochs;
            config.fair_budget = !args.strict_budget;
            if let Some(value) = args.beta {
                config.beta = BetaPolicy::Fixed { value };
            }
            (config, args.out.clone(), args.jobs)
        }
    };
    let summary = run_comparison(&config, jobs)?;
    if let Some(dir) = &out {
        summary.write_run_dir(dir)?;
    }
    emit(&summary.render());
    Ok(summary)
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Bound(a) => {
            let report = cmd_bound(a)?;
            emit(&format!("{}\n", report.to_json()));
        }
        Command::Train(a) => {
            cmd_train(a)?;
        }
        Command::Tune(a) => {
            cmd_tune(a)?;
        }
        Command::Gen(a) => cmd_gen(a)?,
        Command::Compare(a) => {
            cmd_compare(a)?;
        }
    }
    Ok(())
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_usage() {
        2
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn arch_flags() {
        let cli = Cli::try_parse_from([
            "lipstep", "compare", "--layers", "2", "--d", "5", "--k1", "3", "--k2", "2", "--act",
            "sigmoid",
        ])
        .unwrap();
        let Command::Compare(args) = cli.command else {
            panic!()
        };
        let arch = args.arch.build(None).unwrap();
        assert_eq!(arch, NetworkArch::two_layer(5, 3, 2, Activation::Sigmoid).unwrap());
        assert!(Cli::try_parse_from(["lipstep", "compare", "--layers", "3"]).is_err());
    }

    #[test]
    fn run_config_defaults_and_unknown_keys() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"arch":{"input_dim":10,"hidden_widths":[10],"activation":"relu"}}"#,
        )
        .unwrap();
        assert_eq!(cfg.evals, 10);
        assert_eq!(cfg.experiment(9).master_seed, 9);
        assert!(serde_json::from_str::<RunConfig>(
            r#"{"arch":{"input_dim":1,"hidden_widths":[1],"activation":"relu"},"evlas":3}"#
        )
        .is_err());
    }
}
