//! The `msr` command-line pipeline: data generation, training, search,
//! prediction, evaluation and sweeps.
//!
//! Exit codes: 0 success, 2 usage, 3 data/schema, 4 numerical failure.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use thiserror::Error;

use crate::dataset::{
    self, AxisSpec, DatasetError, GridSpec, InputAxis, RegimeThresholds, SplitSpec,
};
use crate::equilibrium::{EquilibriumError, ShiftResidualForm};
use crate::hpo::{self, SearchOutcome};
use crate::kinetics::{KineticParams, KineticsError, OperatingPoint};
use crate::metrics::{self, MetricsError, ReferenceMode};
use crate::neural::{self, NetworkConfig, NeuralError};
use crate::pipeline::{self, CorpusOptions, ExperimentalSource, PipelineError};
use crate::seeds;
use crate::thermo::{SpeciesThermoTable, ThermoError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(err: DatasetError) -> Self {
        match err {
            DatasetError::Kinetics(_) | DatasetError::Equilibrium(_) => CliError::Numeric(err.to_string()),
            DatasetError::InvalidSplitSpec(_) => CliError::Usage(err.to_string()),
            _ => CliError::Data(err.to_string()),
        }
    }
}

impl From<ThermoError> for CliError {
    fn from(err: ThermoError) -> Self {
        match err {
            ThermoError::OutOfRange { .. } | ThermoError::NonPositivePressure(_) => {
                CliError::Numeric(err.to_string())
            }
            _ => CliError::Data(err.to_string()),
        }
    }
}

impl From<NeuralError> for CliError {
    fn from(err: NeuralError) -> Self {
        match err {
            NeuralError::InvalidConfig(_) => CliError::Usage(err.to_string()),
            NeuralError::NonFiniteLoss { .. } => CliError::Numeric(err.to_string()),
            _ => CliError::Data(err.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(err: MetricsError) -> Self {
        match err {
            MetricsError::NonMonotoneGrid | MetricsError::TooFewProbePoints(_) => CliError::Usage(err.to_string()),
            MetricsError::TooFewRecords(_) => CliError::Data(err.to_string()),
            MetricsError::Neural(inner) => inner.into(),
        }
    }
}

impl From<EquilibriumError> for CliError {
    fn from(err: EquilibriumError) -> Self {
        match err {
            EquilibriumError::Thermo(inner) => inner.into(),
            _ => CliError::Numeric(err.to_string()),
        }
    }
}

impl From<KineticsError> for CliError {
    fn from(err: KineticsError) -> Self {
        match err {
            KineticsError::Thermo(inner) => inner.into(),
            KineticsError::Equilibrium(inner) => inner.into(),
            _ => CliError::Numeric(err.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(err: PipelineError) -> Self {
        match err {
            PipelineError::Dataset(inner) => inner.into(),
            PipelineError::Neural(inner) => inner.into(),
            PipelineError::Metrics(inner) => inner.into(),
            PipelineError::Io { .. } => CliError::Data(err.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Data(err.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "msr",
    version,
    about = "Methane steam reforming surrogate toolkit: reference reactor models, dataset builder, neural surrogate training and evaluation"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Root seed; every stochastic stage derives a named substream from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML config file mirroring the flags (flags win).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Shift-equilibrium residual form.
    #[arg(long, global = true, value_parser = ["mass-action", "paper"])]
    pub shift_residual: Option<String>,
    /// Alternative Shomate coefficient table.
    #[arg(long, global = true)]
    pub thermo_table: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate the training corpus (theoretical grid + experimental bundle
    /// + interpolated series) as CSV.
    GenData(GenDataArgs),
    /// Train a network on a corpus CSV and save the model.
    Train(TrainArgs),
    /// Hyperparameter search (random sampling or Bayesian optimization).
    Search(SearchArgs),
    /// Predict compositions from a saved model.
    Predict(PredictArgs),
    /// Evaluate a saved model against a corpus CSV.
    Eval(EvalArgs),
    /// Sweep one operating parameter and compare against reference models.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
pub struct GenDataArgs {
    /// Output CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Experimental measurements CSV (dataset schema); defaults to the
    /// built-in synthetic bundle.
    #[arg(long)]
    pub experimental: Option<PathBuf>,
    /// Skip the experimental slice entirely.
    #[arg(long)]
    pub no_experimental: bool,
    /// Grid override, repeatable: AXIS=FROM:TO:POINTS (axes: T, SC, NC,
    /// f_CH4, m_cat).
    #[arg(long = "grid", value_name = "AXIS=FROM:TO:POINTS")]
    pub grid: Vec<String>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Corpus CSV produced by gen-data.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output model path.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Training-history CSV path (defaults next to the model).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Hidden layer sizes, comma separated.
    #[arg(long, value_name = "N,N,...")]
    pub hidden: Option<String>,
    /// Initial line-search step of the quasi-Newton trainer.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Epoch budget (one epoch = one accepted quasi-Newton update).
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Stop after this many consecutive validation-loss increases.
    #[arg(long)]
    pub patience: Option<usize>,
    /// Split the raw records before augmentation (keeps duplicates of one
    /// record inside one fold).
    #[arg(long)]
    pub split_before_augment: bool,
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    /// Corpus CSV (not needed with --benchmark).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Search strategy.
    #[arg(long, value_parser = ["random", "bayes"])]
    pub strategy: Option<String>,
    /// Random-search trial count.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Bayesian-optimization evaluation budget (includes warmup).
    #[arg(long)]
    pub max_evals: Option<usize>,
    /// Trial-log CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Path to save the best model (retrained deterministically).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Benchmark mode: run both strategies on the analytic objective over
    /// ten seeds and report wins; no training corpus involved.
    #[arg(long)]
    pub benchmark: bool,
    /// Epoch budget cap applied to sampled configs (bounds search cost).
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub split_before_augment: bool,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Saved model path.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Inputs CSV with header T_K,m_cat_g,SC,NC,f_CH4_mol_s.
    #[arg(long)]
    pub inputs: Option<PathBuf>,
    /// Single-point inputs, repeatable: KEY=VALUE with keys T, m_cat, SC,
    /// NC, f_CH4.
    #[arg(long = "fixed", value_name = "KEY=VALUE")]
    pub fixed: Vec<String>,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Metrics CSV path (text report always goes to stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Parameter to vary: T, m_cat, SC, NC or f_CH4.
    #[arg(long)]
    pub vary: Option<String>,
    #[arg(long)]
    pub from: Option<f64>,
    #[arg(long)]
    pub to: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    /// Fixed operating values, repeatable: KEY=VALUE with keys T, m_cat,
    /// SC, NC, f_CH4, CC, P.
    #[arg(long = "fixed", value_name = "KEY=VALUE")]
    pub fixed: Vec<String>,
    /// Reference model column: auto (regime rule with transition gap),
    /// kinetic, equilibrium or none.
    #[arg(long, value_parser = ["auto", "kinetic", "equilibrium", "none"])]
    pub reference: Option<String>,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// TOML config file: every key mirrors a flag; flags win.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub shift_residual: Option<String>,
    pub thermo_table: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub experimental: Option<PathBuf>,
    pub hidden: Option<Vec<usize>>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub patience: Option<usize>,
    pub split_before_augment: Option<bool>,
    pub strategy: Option<String>,
    pub trials: Option<usize>,
    pub max_evals: Option<usize>,
    pub vary: Option<String>,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub points: Option<usize>,
    pub reference: Option<String>,
    pub grid: Option<Vec<String>>,
    pub fixed: Option<std::collections::BTreeMap<String, f64>>,
}

impl FileConfig {
    fn load(path: &Path) -> Result<FileConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }
}

/// Global settings after merging flags over the config file.
pub struct Settings {
    pub seed: u64,
    pub shift_form: ShiftResidualForm,
    pub table: &'static SpeciesThermoTable,
    pub file: FileConfig,
}

fn leak_table(table: SpeciesThermoTable) -> &'static SpeciesThermoTable {
    Box::leak(Box::new(table))
}

fn resolve_settings(global: &GlobalArgs) -> Result<Settings, CliError> {
    let file = match &global.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let seed = global.seed.or(file.seed).unwrap_or(42);
    let shift_text = global
        .shift_residual
        .clone()
        .or_else(|| file.shift_residual.clone())
        .unwrap_or_else(|| "mass-action".to_string());
    let shift_form = ShiftResidualForm::parse(&shift_text)
        .ok_or_else(|| CliError::Usage(format!("unknown shift-residual form {shift_text:?}")))?;
    let table = match global.thermo_table.as_ref().or(file.thermo_table.as_ref()) {
        Some(path) => leak_table(SpeciesThermoTable::from_path(path)?),
        None => SpeciesThermoTable::builtin(),
    };
    Ok(Settings {
        seed,
        shift_form,
        table,
        file,
    })
}

fn parse_key_values(pairs: &[String]) -> Result<Vec<(String, f64)>, CliError> {
    pairs
        .iter()
        .map(|pair| {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("bad KEY=VALUE pair {pair:?}")))?;
            let value: f64 = value
                .parse()
                .map_err(|_| CliError::Usage(format!("bad numeric value in {pair:?}")))?;
            Ok((key.trim().to_string(), value))
        })
        .collect()
}

/// Default operating point for sweeps and single predictions: the diluted
/// kinetic reference condition.
fn default_operating_point() -> OperatingPoint {
    OperatingPoint::new(898.15, 3.0, 3.0, 3.38e-5, 1.48)
}

fn apply_fixed(op: &mut OperatingPoint, pairs: &[(String, f64)]) -> Result<(), CliError> {
    for (key, value) in pairs {
        match key.as_str() {
            "T" | "T_K" => op.temperature = *value,
            "m_cat" | "m_cat_g" => op.catalyst_mass = *value,
            "SC" => op.steam_ratio = *value,
            "NC" => op.nitrogen_ratio = *value,
            "f_CH4" | "f_CH4_mol_s" => op.methane_flow = *value,
            "CC" => op.co2_ratio = *value,
            "P" => op.pressure = *value,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown fixed parameter {other:?} (expected T, m_cat, SC, NC, f_CH4, CC or P)"
                )))
            }
        }
    }
    Ok(())
}

fn parse_grid_overrides(specs: &[String], grid: &mut GridSpec) -> Result<(), CliError> {
    for spec in specs {
        let (axis_text, range) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("bad grid spec {spec:?} (want AXIS=FROM:TO:POINTS)")))?;
        let axis = InputAxis::parse(axis_text.trim())
            .ok_or_else(|| CliError::Usage(format!("unknown grid axis {axis_text:?}")))?;
        let parts: Vec<&str> = range.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::Usage(format!("bad grid range {range:?} (want FROM:TO:POINTS)")));
        }
        let from: f64 = parts[0]
            .parse()
            .map_err(|_| CliError::Usage(format!("bad grid FROM in {spec:?}")))?;
        let to: f64 = parts[1]
            .parse()
            .map_err(|_| CliError::Usage(format!("bad grid TO in {spec:?}")))?;
        let points: usize = parts[2]
            .parse()
            .map_err(|_| CliError::Usage(format!("bad grid POINTS in {spec:?}")))?;
        let target = AxisSpec::new(from, to, points);
        match axis {
            InputAxis::Temperature => grid.temperature = target,
            InputAxis::CatalystMass => grid.catalyst_mass = target,
            InputAxis::SteamRatio => grid.steam_ratio = target,
            InputAxis::NitrogenRatio => grid.nitrogen_ratio = target,
            InputAxis::MethaneFlow => grid.methane_flow = target,
        }
    }
    Ok(())
}

fn parse_hidden(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Usage(format!("bad hidden layer size {part:?}")))
        })
        .collect()
}

fn required_path(flag: &str, cli: Option<PathBuf>, file: Option<PathBuf>) -> Result<PathBuf, CliError> {
    cli.or(file)
        .ok_or_else(|| CliError::Usage(format!("missing required --{flag} (flag or config key)")))
}

fn write_output(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(path) => {
            std::fs::write(path, content)
                .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
        }
        None => {
            print!("{content}");
            std::io::stdout().flush()?;
        }
    }
    Ok(())
}

/// Entry point used by `main`; returns the process exit code.
pub fn run() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let settings = resolve_settings(&cli.global)?;
    match cli.command {
        Command::GenData(args) => cmd_gen_data(&settings, args),
        Command::Train(args) => cmd_train(&settings, args),
        Command::Search(args) => cmd_search(&settings, args),
        Command::Predict(args) => cmd_predict(&settings, args),
        Command::Eval(args) => cmd_eval(&settings, args),
        Command::Sweep(args) => cmd_sweep(&settings, args),
    }
}

fn cmd_gen_data(settings: &Settings, args: GenDataArgs) -> Result<(), CliError> {
    let out = required_path("out", args.out, settings.file.out.clone())?;
    let mut options = CorpusOptions::new(settings.seed);
    options.shift_form = settings.shift_form;
    let file_grid = settings.file.grid.clone().unwrap_or_default();
    parse_grid_overrides(&file_grid, &mut options.grid)?;
    parse_grid_overrides(&args.grid, &mut options.grid)?;
    options.experimental = if args.no_experimental {
        ExperimentalSource::None
    } else {
        match args.experimental.or(settings.file.experimental.clone()) {
            Some(path) => ExperimentalSource::Csv(path),
            None => ExperimentalSource::Synthetic,
        }
    };

    let (records, summary) = pipeline::build_corpus(&options, settings.table)?;
    let mut buf = Vec::new();
    dataset::write_csv(&records, &mut buf)?;
    std::fs::write(&out, &buf).map_err(|e| CliError::Data(format!("cannot write {}: {e}", out.display())))?;

    println!("wrote {} records to {}", records.len(), out.display());
    println!("{summary}");
    for ((source, regime), count) in pipeline::count_by_source_regime(&records) {
        println!("  {:>13} / {:<11} {count}", source.label(), regime.label());
    }
    Ok(())
}

fn resolve_training_config(
    settings: &Settings,
    hidden: Option<&str>,
    lr: Option<f64>,
    epochs: Option<usize>,
    patience: Option<usize>,
) -> Result<NetworkConfig, CliError> {
    let defaults = NetworkConfig::default();
    let hidden_sizes = match hidden {
        Some(text) => parse_hidden(text)?,
        None => settings.file.hidden.clone().unwrap_or(defaults.hidden_sizes),
    };
    Ok(NetworkConfig {
        hidden_sizes,
        learning_rate: lr.or(settings.file.lr).unwrap_or(defaults.learning_rate),
        max_epochs: epochs.or(settings.file.epochs).unwrap_or(defaults.max_epochs),
        seed: settings.seed,
        patience: patience.or(settings.file.patience),
    })
}

fn cmd_train(settings: &Settings, args: TrainArgs) -> Result<(), CliError> {
    let data = required_path("data", args.data, settings.file.data.clone())?;
    let model_path = required_path("model", args.model, settings.file.model.clone())?;
    let config = resolve_training_config(settings, args.hidden.as_deref(), args.lr, args.epochs, args.patience)?;
    config.validate()?;

    let records = pipeline::load_corpus(&data)?;
    let split_spec = SplitSpec::new(seeds::substream(settings.seed, seeds::STREAM_SPLIT));
    let before = args.split_before_augment || settings.file.split_before_augment.unwrap_or(false);
    let prepared = pipeline::prepare(&records, &split_spec, before)?;

    let (net, report, eval) = pipeline::train_network(&prepared, &config)?;
    neural::save_model_to_path(&net, &model_path)?;

    let history_path = args.out.clone().unwrap_or_else(|| model_path.with_extension("history.csv"));
    let mut history = String::from("epoch,train_mse,val_mse\n");
    for (i, train_mse) in report.train_loss.iter().enumerate() {
        let val = report
            .val_loss
            .get(i)
            .map_or(String::new(), |v| format!("{v}"));
        let _ = writeln!(history, "{},{},{}", i + 1, train_mse, val);
    }
    std::fs::write(&history_path, history)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", history_path.display())))?;

    println!("trained {:?} for {} epochs ({:?})", config.hidden_sizes, report.epochs, report.stop);
    println!(
        "final train mse {:.6e}, val mse {}",
        report.train_loss.last().copied().unwrap_or(f64::NAN),
        report
            .val_loss
            .last()
            .map_or("n/a".to_string(), |v| format!("{v:.6e}"))
    );
    println!("held-out test metrics:");
    print!("{}", eval.render());
    println!("model saved to {}", model_path.display());
    println!("history saved to {}", history_path.display());
    Ok(())
}

fn write_trial_log(path: &Path, outcome: &SearchOutcome) -> Result<(), CliError> {
    let mut text = String::from(hpo::TRIAL_CSV_HEADER);
    text.push('\n');
    for trial in &outcome.trials {
        text.push_str(&hpo::trial_csv_row(trial));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

fn cmd_search(settings: &Settings, args: SearchArgs) -> Result<(), CliError> {
    let strategy = args
        .strategy
        .clone()
        .or_else(|| settings.file.strategy.clone())
        .unwrap_or_else(|| "random".to_string());
    let search_seed = seeds::substream(settings.seed, seeds::STREAM_SEARCH);

    if args.benchmark {
        let evals = args.max_evals.or(settings.file.max_evals).unwrap_or(60);
        let mut wins = 0;
        println!("benchmark objective, {evals} evaluations per strategy");
        println!("seed,bayes_best,random_best");
        let mut log_outcome = None;
        for offset in 0..10 {
            let seed = settings.seed + offset;
            let space = hpo::SearchSpace;
            let bayes = hpo::bayes_search(&space, evals, seed, &hpo::BenchmarkObjective);
            let random = hpo::random_search(&space, evals, seed, &hpo::BenchmarkObjective);
            let bayes_best = bayes.best_trial().and_then(hpo::Trial::objective).unwrap_or(f64::INFINITY);
            let random_best = random.best_trial().and_then(hpo::Trial::objective).unwrap_or(f64::INFINITY);
            if bayes_best <= random_best {
                wins += 1;
            }
            println!("{seed},{bayes_best},{random_best}");
            if offset == 0 {
                log_outcome = Some(bayes);
            }
        }
        println!("bayes wins {wins}/10");
        if let Some(out) = args.out.or(settings.file.out.clone()) {
            write_trial_log(&out, &log_outcome.expect("ten seeds ran"))?;
            println!("trial log (first-seed bayes run) saved to {}", out.display());
        }
        return Ok(());
    }

    let data = required_path("data", args.data, settings.file.data.clone())?;
    let records = pipeline::load_corpus(&data)?;
    let split_spec = SplitSpec::new(seeds::substream(settings.seed, seeds::STREAM_SPLIT));
    let before = args.split_before_augment || settings.file.split_before_augment.unwrap_or(false);
    let prepared = pipeline::prepare(&records, &split_spec, before)?;
    let objective = pipeline::TrainingObjective { prepared: &prepared };

    // Cap per-trial epoch budgets so desk-scale searches stay tractable.
    struct CappedObjective<'a> {
        inner: pipeline::TrainingObjective<'a>,
        cap: Option<usize>,
    }
    impl hpo::Objective for CappedObjective<'_> {
        fn evaluate(&self, config: &NetworkConfig, trial_seed: u64) -> Result<hpo::TrialMetrics, String> {
            let mut config = config.clone();
            if let Some(cap) = self.cap {
                config.max_epochs = config.max_epochs.min(cap);
            }
            self.inner.evaluate(&config, trial_seed)
        }
    }
    let capped = CappedObjective {
        inner: objective,
        cap: args.epochs.or(settings.file.epochs),
    };

    let outcome = match strategy.as_str() {
        "random" => {
            let trials = args.trials.or(settings.file.trials).unwrap_or(20);
            hpo::random_search(&hpo::SearchSpace, trials, search_seed, &capped)
        }
        "bayes" => {
            let max_evals = args.max_evals.or(settings.file.max_evals).unwrap_or(30);
            hpo::bayes_search(&hpo::SearchSpace, max_evals, search_seed, &capped)
        }
        other => return Err(CliError::Usage(format!("unknown strategy {other:?}"))),
    };

    if let Some(out) = args.out.or(settings.file.out.clone()) {
        write_trial_log(&out, &outcome)?;
        println!("trial log saved to {}", out.display());
    }

    println!("leaderboard (top 5):");
    for trial in hpo::leaderboard(&outcome.trials).into_iter().take(5) {
        println!(
            "  #{:<3} {:?} lr {:.5} epochs {:>5} -> val mse {}",
            trial.id,
            trial.config.hidden_sizes,
            trial.config.learning_rate,
            trial.config.max_epochs,
            trial
                .objective()
                .map_or("failed".to_string(), |v| format!("{v:.6e}"))
        );
    }

    let Some(best) = outcome.best_trial() else {
        return Err(CliError::Numeric("all trials failed".into()));
    };
    println!(
        "best: #{} {:?} lr {:.5} epochs {} (val mse {:.6e})",
        best.id,
        best.config.hidden_sizes,
        best.config.learning_rate,
        best.config.max_epochs,
        best.objective().unwrap()
    );

    if let Some(model_path) = args.model.or(settings.file.model.clone()) {
        // Deterministic retrain of the winning trial.
        let mut config = best.config.clone();
        if let Some(cap) = capped.cap {
            config.max_epochs = config.max_epochs.min(cap);
        }
        config.seed = best.seed;
        let net = neural::init(&config, prepared.scaler.clone())?;
        let (trained, _) = neural::train_bfgs(net, &prepared.train, &prepared.val, &config)?;
        neural::save_model_to_path(&trained, &model_path)?;
        println!("best model saved to {}", model_path.display());
    }
    Ok(())
}

fn cmd_predict(settings: &Settings, args: PredictArgs) -> Result<(), CliError> {
    let model_path = required_path("model", args.model, settings.file.model.clone())?;
    let net = neural::load_model_from_path(&model_path)?;

    let mut rows: Vec<[f64; 5]> = Vec::new();
    if let Some(inputs) = &args.inputs {
        let text = std::fs::read_to_string(inputs)
            .map_err(|e| CliError::Data(format!("cannot read {}: {e}", inputs.display())))?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "T_K,m_cat_g,SC,NC,f_CH4_mol_s" => {}
            Some((_, header)) => {
                return Err(CliError::Data(format!(
                    "bad inputs header {header:?}, expected T_K,m_cat_g,SC,NC,f_CH4_mol_s"
                )))
            }
            None => return Err(CliError::Data("inputs file is empty".into())),
        }
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(CliError::Data(format!("inputs line {}: expected 5 fields", idx + 1)));
            }
            let mut raw = [0.0; 5];
            for (slot, field) in raw.iter_mut().zip(&fields) {
                *slot = field
                    .parse()
                    .map_err(|_| CliError::Data(format!("inputs line {}: bad number {field:?}", idx + 1)))?;
            }
            rows.push(raw);
        }
    } else {
        let mut op = default_operating_point();
        let mut pairs = parse_key_values(&args.fixed)?;
        if let Some(map) = &settings.file.fixed {
            let mut from_file: Vec<(String, f64)> = map.iter().map(|(k, v)| (k.clone(), *v)).collect();
            from_file.extend(pairs);
            pairs = from_file;
        }
        apply_fixed(&mut op, &pairs)?;
        rows.push([
            op.temperature,
            op.catalyst_mass,
            op.steam_ratio,
            op.nitrogen_ratio,
            op.methane_flow,
        ]);
    }

    let mut out = String::from("T_K,m_cat_g,SC,NC,f_CH4_mol_s,y_H2,y_CH4,y_CO,y_CO2,in_hull\n");
    let mut out_of_hull = 0usize;
    for raw in &rows {
        let (comp, in_hull) = neural::predict_raw(&net, *raw);
        if !in_hull {
            out_of_hull += 1;
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            raw[0], raw[1], raw[2], raw[3], raw[4], comp.h2, comp.ch4, comp.co, comp.co2, in_hull
        );
    }
    if out_of_hull > 0 {
        log::warn!("{out_of_hull} of {} inputs lie outside the training hull; predictions are extrapolations", rows.len());
    }
    write_output(args.out.as_deref(), &out)
}

fn cmd_eval(settings: &Settings, args: EvalArgs) -> Result<(), CliError> {
    let model_path = required_path("model", args.model, settings.file.model.clone())?;
    let data = required_path("data", args.data, settings.file.data.clone())?;
    let net = neural::load_model_from_path(&model_path)?;
    let records = pipeline::load_corpus(&data)?;
    if records.is_empty() {
        return Err(CliError::Data("dataset is empty".into()));
    }
    let report = metrics::evaluate(&net, &records)?;
    print!("{}", report.render());
    if let Some(out) = args.out.or(settings.file.out.clone()) {
        std::fs::write(&out, report.to_csv())
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", out.display())))?;
        println!("metrics csv saved to {}", out.display());
    }
    Ok(())
}

fn cmd_sweep(settings: &Settings, args: SweepArgs) -> Result<(), CliError> {
    let model_path = required_path("model", args.model, settings.file.model.clone())?;
    let net = neural::load_model_from_path(&model_path)?;

    let vary_text = args
        .vary
        .clone()
        .or_else(|| settings.file.vary.clone())
        .ok_or_else(|| CliError::Usage("missing required --vary".into()))?;
    let vary = InputAxis::parse(&vary_text).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown parameter {vary_text:?} (expected T, m_cat, SC, NC or f_CH4)"
        ))
    })?;
    let from = args
        .from
        .or(settings.file.from)
        .ok_or_else(|| CliError::Usage("missing required --from".into()))?;
    let to = args
        .to
        .or(settings.file.to)
        .ok_or_else(|| CliError::Usage("missing required --to".into()))?;
    let points = args.points.or(settings.file.points).unwrap_or(25);
    if points == 0 {
        return Err(CliError::Usage("--points must be at least 1".into()));
    }
    if points > 1 && to <= from {
        return Err(CliError::Usage("--to must exceed --from".into()));
    }

    let mut op = default_operating_point();
    let mut pairs: Vec<(String, f64)> = Vec::new();
    if let Some(map) = &settings.file.fixed {
        pairs.extend(map.iter().map(|(k, v)| (k.clone(), *v)));
    }
    pairs.extend(parse_key_values(&args.fixed)?);
    apply_fixed(&mut op, &pairs)?;

    let reference_text = args
        .reference
        .clone()
        .or_else(|| settings.file.reference.clone())
        .unwrap_or_else(|| "auto".to_string());
    let reference = ReferenceMode::parse(&reference_text)
        .ok_or_else(|| CliError::Usage(format!("unknown reference mode {reference_text:?}")))?;

    let grid = dataset::linspace(from, to, points);
    let table = metrics::sweep(
        Some(&net),
        vary,
        &grid,
        &op,
        reference,
        &KineticParams::default(),
        settings.table,
        settings.shift_form,
        &RegimeThresholds::default(),
    )?;
    let mut buf = Vec::new();
    metrics::write_sweep_csv(&table, &mut buf)?;
    write_output(args.out.as_deref(), &String::from_utf8(buf).expect("csv is utf-8"))
}
