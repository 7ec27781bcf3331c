//! End-to-end pipeline pieces shared by the CLI and the acceptance suite:
//! corpus assembly, augment/scale/split preparation, reference training, and
//! the search objective that trains real networks.

use std::fmt;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dataset::{
    self, augment, DataRecord, DataSource, DatasetError, GenerationSummary, GridSpec, Regime, RegimeThresholds,
    Scaler, SplitSpec,
};
use crate::equilibrium::ShiftResidualForm;
use crate::hpo::{Objective, TrialMetrics};
use crate::kinetics::KineticParams;
use crate::metrics::{self, EvalReport, MetricsError};
use crate::neural::{self, Network, NetworkConfig, NeuralError, Sample, TrainReport};
use crate::seeds;
use crate::thermo::SpeciesThermoTable;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Where the experimental slice of the corpus comes from.
#[derive(Debug, Clone, Default)]
pub enum ExperimentalSource {
    /// Seeded synthetic bundle (reference models + 1% relative noise).
    #[default]
    Synthetic,
    /// User CSV in the dataset schema.
    Csv(PathBuf),
    /// Theoretical records only.
    None,
}

#[derive(Debug, Clone)]
pub struct CorpusOptions {
    pub seed: u64,
    pub grid: GridSpec,
    pub thresholds: RegimeThresholds,
    pub params: KineticParams,
    pub shift_form: ShiftResidualForm,
    pub experimental: ExperimentalSource,
}

impl CorpusOptions {
    pub fn new(seed: u64) -> Self {
        CorpusOptions {
            seed,
            grid: GridSpec::default(),
            thresholds: RegimeThresholds::default(),
            params: KineticParams::default(),
            shift_form: ShiftResidualForm::MassAction,
            experimental: ExperimentalSource::Synthetic,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CorpusSummary {
    pub generation: GenerationSummary,
    pub experimental: usize,
    pub interpolated: usize,
    pub total: usize,
}

impl fmt::Display for CorpusSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "simulated: {}; experimental: {}; interpolated: {}; total: {}",
            self.generation, self.experimental, self.interpolated, self.total
        )
    }
}

/// Count records per (source, regime) for reporting.
pub fn count_by_source_regime(records: &[DataRecord]) -> Vec<((DataSource, Regime), usize)> {
    let mut counts: Vec<((DataSource, Regime), usize)> = Vec::new();
    for record in records {
        let key = (record.source, record.regime);
        match counts.iter_mut().find(|(k, _)| *k == key) {
            Some((_, n)) => *n += 1,
            None => counts.push((key, 1)),
        }
    }
    counts
}

/// Assemble the full corpus: theoretical grid records, the experimental
/// slice, and spline-interpolated experimental series.
pub fn build_corpus(
    options: &CorpusOptions,
    table: &SpeciesThermoTable,
) -> Result<(Vec<DataRecord>, CorpusSummary), PipelineError> {
    let (mut records, generation) = dataset::generate_theoretical(
        &options.grid,
        &options.params,
        table,
        options.shift_form,
        &options.thresholds,
    );

    let experimental: Vec<DataRecord> = match &options.experimental {
        ExperimentalSource::Synthetic => dataset::pseudo_experimental_bundle(
            seeds::substream(options.seed, seeds::STREAM_DATA),
            &options.params,
            table,
            options.shift_form,
        )?,
        ExperimentalSource::Csv(path) => {
            let file = std::fs::File::open(path).map_err(|source| PipelineError::Io {
                path: path.clone(),
                source,
            })?;
            let (records, summary) = dataset::ingest_experimental(std::io::BufReader::new(file))?;
            log::info!(
                "ingested experimental csv: {} accepted, {} renormalized, {} rejected",
                summary.accepted,
                summary.renormalized,
                summary.rejected
            );
            records
        }
        ExperimentalSource::None => Vec::new(),
    };

    let mut interpolated = Vec::new();
    for series in dataset::detect_series(&experimental) {
        let members: Vec<DataRecord> = series.members.iter().map(|&i| experimental[i]).collect();
        let n_points = dataset::default_interpolation_points(members.len());
        interpolated.extend(dataset::interpolate_series(&members, series.axis, n_points)?);
    }

    let summary = CorpusSummary {
        generation,
        experimental: experimental.len(),
        interpolated: interpolated.len(),
        total: records.len() + experimental.len() + interpolated.len(),
    };
    records.extend(experimental);
    records.extend(interpolated);
    Ok((records, summary))
}

/// Load a corpus CSV from disk (strict schema).
pub fn load_corpus(path: &Path) -> Result<Vec<DataRecord>, PipelineError> {
    let file = std::fs::File::open(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(dataset::read_csv(std::io::BufReader::new(file))?)
}

pub fn load_corpus_reader<R: BufRead>(reader: R) -> Result<Vec<DataRecord>, PipelineError> {
    Ok(dataset::read_csv(reader)?)
}

/// Corpus after weighting, scaling and splitting; records kept alongside the
/// normalized samples for evaluation.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub scaler: Scaler,
    pub train_records: Vec<DataRecord>,
    pub val_records: Vec<DataRecord>,
    pub test_records: Vec<DataRecord>,
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// Augment 4/2/1 and split 70/15/15.
///
/// `split_before_augment` splits the raw records first and augments each
/// fold separately, so duplicates of one record never cross folds.
pub fn prepare(
    records: &[DataRecord],
    split_spec: &SplitSpec,
    split_before_augment: bool,
) -> Result<PreparedData, PipelineError> {
    let (train_records, val_records, test_records) = if split_before_augment {
        let (train, val, test) = dataset::split(records, split_spec)?;
        (augment(&train), augment(&val), augment(&test))
    } else {
        let augmented = augment(records);
        dataset::split(&augmented, split_spec)?
    };
    let scaler = Scaler::fit(records)?;
    let train = neural::samples_from_records(&train_records, &scaler);
    let val = neural::samples_from_records(&val_records, &scaler);
    let test = neural::samples_from_records(&test_records, &scaler);
    Ok(PreparedData {
        scaler,
        train_records,
        val_records,
        test_records,
        train,
        val,
        test,
    })
}

/// Train one network on prepared data; the config's `seed` field is treated
/// as the root for the init substream.
pub fn train_network(
    prepared: &PreparedData,
    config: &NetworkConfig,
) -> Result<(Network, TrainReport, EvalReport), PipelineError> {
    let mut init_config = config.clone();
    init_config.seed = seeds::substream(config.seed, seeds::STREAM_INIT);
    let net = neural::init(&init_config, prepared.scaler.clone())?;
    let (trained, report) = neural::train_bfgs(net, &prepared.train, &prepared.val, &init_config)?;
    let eval = metrics::evaluate(&trained, &prepared.test_records)?;
    Ok((trained, report, eval))
}

/// Search objective that trains a real network per trial and scores it on
/// the validation fold.
pub struct TrainingObjective<'a> {
    pub prepared: &'a PreparedData,
}

impl Objective for TrainingObjective<'_> {
    fn evaluate(&self, config: &NetworkConfig, trial_seed: u64) -> Result<TrialMetrics, String> {
        let mut config = config.clone();
        config.seed = trial_seed;
        let net = neural::init(&config, self.prepared.scaler.clone()).map_err(|e| e.to_string())?;
        let (trained, _report) =
            neural::train_bfgs(net, &self.prepared.train, &self.prepared.val, &config).map_err(|e| e.to_string())?;
        let val_mse = if self.prepared.val.is_empty() {
            neural::loss(&trained, &self.prepared.train).map_err(|e| e.to_string())?
        } else {
            neural::loss(&trained, &self.prepared.val).map_err(|e| e.to_string())?
        };
        let eval = metrics::evaluate(&trained, &self.prepared.test_records).map_err(|e| e.to_string())?;
        Ok(TrialMetrics {
            objective: val_mse,
            test_mse: Some(eval.mse),
            pearson: eval.mean_pearson,
            spearman: eval.mean_spearman,
        })
    }
}
