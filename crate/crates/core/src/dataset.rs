//! Training-corpus construction: theoretical model sweeps over an operating
//! grid, experimental CSV ingestion, spline interpolation of experimental
//! series, 4/2/1 source weighting by duplication, min–max input scaling, and
//! the seeded 70/15/15 split.

use std::fmt;
use std::io::{BufRead, Write};

use rand::RngCore;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibrium::{self, EquilibriumError, ShiftResidualForm};
use crate::kinetics::{self, Conversions, GasComposition, KineticParams, KineticsError, OperatingPoint};
use crate::par;
use crate::spline::{NaturalCubicSpline, SplineError};
use crate::thermo::SpeciesThermoTable;

/// Provenance of a record; determines its augmentation weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DataSource {
    Experimental,
    Interpolated,
    Simulated,
}

impl DataSource {
    pub fn label(self) -> &'static str {
        match self {
            DataSource::Experimental => "experimental",
            DataSource::Interpolated => "interpolated",
            DataSource::Simulated => "simulated",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "experimental" => Some(DataSource::Experimental),
            "interpolated" => Some(DataSource::Interpolated),
            "simulated" => Some(DataSource::Simulated),
            _ => None,
        }
    }

    /// Duplication count used by [`augment`].
    pub fn weight(self) -> usize {
        match self {
            DataSource::Experimental => 4,
            DataSource::Interpolated => 2,
            DataSource::Simulated => 1,
        }
    }
}

/// Which closed model (if any) produced or matches a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Kinetic,
    Equilibrium,
    Transition,
    Unknown,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::Kinetic => "kinetic",
            Regime::Equilibrium => "equilibrium",
            Regime::Transition => "transition",
            Regime::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "kinetic" => Some(Regime::Kinetic),
            "equilibrium" => Some(Regime::Equilibrium),
            "transition" => Some(Regime::Transition),
            "unknown" => Some(Regime::Unknown),
            _ => None,
        }
    }
}

/// The five network inputs, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputAxis {
    Temperature,
    CatalystMass,
    SteamRatio,
    NitrogenRatio,
    MethaneFlow,
}

impl InputAxis {
    pub const ALL: [InputAxis; 5] = [
        InputAxis::Temperature,
        InputAxis::CatalystMass,
        InputAxis::SteamRatio,
        InputAxis::NitrogenRatio,
        InputAxis::MethaneFlow,
    ];

    pub fn label(self) -> &'static str {
        match self {
            InputAxis::Temperature => "T",
            InputAxis::CatalystMass => "m_cat",
            InputAxis::SteamRatio => "SC",
            InputAxis::NitrogenRatio => "NC",
            InputAxis::MethaneFlow => "f_CH4",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "T" | "T_K" => Some(InputAxis::Temperature),
            "m_cat" | "m_cat_g" => Some(InputAxis::CatalystMass),
            "SC" => Some(InputAxis::SteamRatio),
            "NC" => Some(InputAxis::NitrogenRatio),
            "f_CH4" | "f_CH4_mol_s" => Some(InputAxis::MethaneFlow),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            InputAxis::Temperature => 0,
            InputAxis::CatalystMass => 1,
            InputAxis::SteamRatio => 2,
            InputAxis::NitrogenRatio => 3,
            InputAxis::MethaneFlow => 4,
        }
    }
}

/// One training atom: raw operating inputs, dry-composition target, and
/// provenance tags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataRecord {
    pub temperature: f64,
    pub catalyst_mass: f64,
    pub steam_ratio: f64,
    pub nitrogen_ratio: f64,
    pub co2_ratio: f64,
    pub methane_flow: f64,
    pub target: GasComposition,
    pub source: DataSource,
    pub regime: Regime,
}

impl DataRecord {
    /// Network inputs in canonical order (T, m_cat, SC, NC, f_CH4).
    pub fn inputs(&self) -> [f64; 5] {
        [
            self.temperature,
            self.catalyst_mass,
            self.steam_ratio,
            self.nitrogen_ratio,
            self.methane_flow,
        ]
    }

    pub fn input(&self, axis: InputAxis) -> f64 {
        self.inputs()[axis.index()]
    }

    pub fn set_input(&mut self, axis: InputAxis, value: f64) {
        match axis {
            InputAxis::Temperature => self.temperature = value,
            InputAxis::CatalystMass => self.catalyst_mass = value,
            InputAxis::SteamRatio => self.steam_ratio = value,
            InputAxis::NitrogenRatio => self.nitrogen_ratio = value,
            InputAxis::MethaneFlow => self.methane_flow = value,
        }
    }

    pub fn operating_point(&self) -> OperatingPoint {
        OperatingPoint {
            temperature: self.temperature,
            pressure: crate::thermo::ATM_PRESSURE,
            steam_ratio: self.steam_ratio,
            nitrogen_ratio: self.nitrogen_ratio,
            co2_ratio: self.co2_ratio,
            methane_flow: self.methane_flow,
            catalyst_mass: self.catalyst_mass,
        }
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("dataset is empty")]
    Empty,
    #[error("degenerate input dimension {0}: min equals max, cannot scale")]
    DegenerateDimension(&'static str),
    #[error("interpolation series invalid: {0}")]
    SeriesInvalid(String),
    #[error("split needs at least 10 records, got {0}")]
    SplitTooSmall(usize),
    #[error("invalid split spec: {0}")]
    InvalidSplitSpec(String),
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// Theoretical generation
// ---------------------------------------------------------------------------

/// Inclusive linear axis specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

impl AxisSpec {
    pub fn new(from: f64, to: f64, points: usize) -> Self {
        AxisSpec { from, to, points }
    }

    pub fn values(&self) -> Vec<f64> {
        linspace(self.from, self.to, self.points)
    }
}

pub fn linspace(from: f64, to: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![from],
        n => (0..n)
            .map(|i| from + (to - from) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Operating grid for theoretical data generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub temperature: AxisSpec,
    pub steam_ratio: AxisSpec,
    pub nitrogen_ratio: AxisSpec,
    pub methane_flow: AxisSpec,
    pub catalyst_mass: AxisSpec,
}

impl Default for GridSpec {
    /// Envelope of the operating ranges covered by the reference models:
    /// 7 × 4 × 4 × 5 × 8 = 4480 grid points.
    fn default() -> Self {
        GridSpec {
            temperature: AxisSpec::new(773.15, 1073.15, 7),
            steam_ratio: AxisSpec::new(1.0, 4.0, 4),
            nitrogen_ratio: AxisSpec::new(0.0, 6.0, 4),
            methane_flow: AxisSpec::new(1e-5, 2e-4, 5),
            catalyst_mass: AxisSpec::new(0.1, 20.0, 8),
        }
    }
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.temperature.points
            * self.steam_ratio.points
            * self.nitrogen_ratio.points
            * self.methane_flow.points
            * self.catalyst_mass.points
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points in fixed nested order (temperature outermost, catalyst
    /// mass innermost); generation output is ordered by this index.
    pub fn points(&self) -> Vec<OperatingPoint> {
        let mut out = Vec::with_capacity(self.len());
        for &t in &self.temperature.values() {
            for &sc in &self.steam_ratio.values() {
                for &nc in &self.nitrogen_ratio.values() {
                    for &f in &self.methane_flow.values() {
                        for &m in &self.catalyst_mass.values() {
                            out.push(OperatingPoint::new(t, sc, nc, f, m));
                        }
                    }
                }
            }
        }
        out
    }
}

/// Regime classification thresholds on `rho = x_kinetic_unclamped / x_eq`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeThresholds {
    /// Kinetic model applies for `rho <= kinetic_max`.
    pub kinetic_max: f64,
    /// Equilibrium model applies for `rho >= equilibrium_min`.
    pub equilibrium_min: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        RegimeThresholds {
            kinetic_max: 0.8,
            equilibrium_min: 1.2,
        }
    }
}

/// Counts reported by [`generate_theoretical`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GenerationSummary {
    pub kinetic: usize,
    pub equilibrium: usize,
    pub transition_skipped: usize,
    pub failed: usize,
}

impl fmt::Display for GenerationSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "kinetic {}, equilibrium {}, transition skipped {}, failed {}",
            self.kinetic, self.equilibrium, self.transition_skipped, self.failed
        )
    }
}

/// Classify one grid point and emit its model record.
///
/// `rho <= kinetic_max` emits a kinetic-model record, `rho >=
/// equilibrium_min` an equilibrium-model record; points inside the
/// transition band emit nothing so the corpus mirrors the gap between the
/// two closed models.
pub fn theoretical_record(
    op: &OperatingPoint,
    params: &KineticParams,
    table: &SpeciesThermoTable,
    form: ShiftResidualForm,
    thresholds: &RegimeThresholds,
) -> Result<Option<DataRecord>, DatasetError> {
    let solution = equilibrium::solve_equilibrium(op, table, form)?;
    let x_eq = solution.conversions.reforming;
    let unclamped = kinetics::reaction_rate(params, op) / op.methane_flow;
    let rho = unclamped / x_eq;

    let (conversions, regime) = if rho <= thresholds.kinetic_max {
        let k_sh = kinetics::shift_constant(op, table)?;
        let shift = kinetics::shift_extent(unclamped, op.steam_ratio, op.co2_ratio, k_sh)?;
        (
            Conversions {
                reforming: unclamped,
                shift,
            },
            Regime::Kinetic,
        )
    } else if rho >= thresholds.equilibrium_min {
        (solution.conversions, Regime::Equilibrium)
    } else {
        return Ok(None);
    };

    let target =
        kinetics::composition_from_conversions(&conversions, op.steam_ratio, op.nitrogen_ratio, op.co2_ratio)?;
    Ok(Some(DataRecord {
        temperature: op.temperature,
        catalyst_mass: op.catalyst_mass,
        steam_ratio: op.steam_ratio,
        nitrogen_ratio: op.nitrogen_ratio,
        co2_ratio: op.co2_ratio,
        methane_flow: op.methane_flow,
        target,
        source: DataSource::Simulated,
        regime,
    }))
}

fn collect_generated(
    results: Vec<Result<Option<DataRecord>, DatasetError>>,
    points: &[OperatingPoint],
) -> (Vec<DataRecord>, GenerationSummary) {
    let mut records = Vec::with_capacity(results.len());
    let mut summary = GenerationSummary::default();
    for (result, op) in results.into_iter().zip(points) {
        match result {
            Ok(Some(record)) => {
                match record.regime {
                    Regime::Kinetic => summary.kinetic += 1,
                    Regime::Equilibrium => summary.equilibrium += 1,
                    _ => {}
                }
                records.push(record);
            }
            Ok(None) => summary.transition_skipped += 1,
            Err(err) => {
                summary.failed += 1;
                log::warn!("skipping grid point {op:?}: {err}");
            }
        }
    }
    (records, summary)
}

/// Generate model records over `grid`; parallel per point under the
/// `parallel` feature with output ordered by grid index.
pub fn generate_theoretical(
    grid: &GridSpec,
    params: &KineticParams,
    table: &SpeciesThermoTable,
    form: ShiftResidualForm,
    thresholds: &RegimeThresholds,
) -> (Vec<DataRecord>, GenerationSummary) {
    let points = grid.points();
    let results = par::map_ordered(&points, |op| theoretical_record(op, params, table, form, thresholds));
    collect_generated(results, &points)
}

/// Sequential twin of [`generate_theoretical`] (identical output).
pub fn generate_theoretical_seq(
    grid: &GridSpec,
    params: &KineticParams,
    table: &SpeciesThermoTable,
    form: ShiftResidualForm,
    thresholds: &RegimeThresholds,
) -> (Vec<DataRecord>, GenerationSummary) {
    let points = grid.points();
    let results = par::map_ordered_seq(&points, |op| theoretical_record(op, params, table, form, thresholds));
    collect_generated(results, &points)
}

// ---------------------------------------------------------------------------
// Synthetic experimental bundle
// ---------------------------------------------------------------------------

/// Synthetic stand-in for measured series: reference-model compositions with
/// seeded 1% relative noise. Clearly synthetic — shipped only because real
/// measurement tables are not redistributable with the repo.
pub fn pseudo_experimental_bundle(
    seed: u64,
    params: &KineticParams,
    table: &SpeciesThermoTable,
    form: ShiftResidualForm,
) -> Result<Vec<DataRecord>, DatasetError> {
    use rand::SeedableRng;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.01).expect("valid normal");

    let mut records = Vec::new();
    let temperatures = linspace(773.15, 1073.15, 9);
    let steam_ratios = linspace(1.0, 4.0, 7);

    // Kinetic temperature series: diluted feed, small catalyst load.
    for &t in &temperatures {
        let op = OperatingPoint::new(t, 3.0, 3.0, 3.38e-5, 1.48);
        records.push(model_record(&op, Regime::Kinetic, params, table, form)?);
    }
    // Equilibrium temperature series: undiluted feed, enough catalyst.
    for &t in &temperatures {
        let op = OperatingPoint::new(t, 2.0, 0.0, 1.01e-4, 5.03);
        records.push(model_record(&op, Regime::Equilibrium, params, table, form)?);
    }
    // Kinetic steam-ratio series at 973.15 K.
    for &sc in &steam_ratios {
        let op = OperatingPoint::new(973.15, sc, 1.0, 3.38e-5, 1.48);
        records.push(model_record(&op, Regime::Kinetic, params, table, form)?);
    }
    // Equilibrium steam-ratio series at 973.15 K.
    for &sc in &steam_ratios {
        let op = OperatingPoint::new(973.15, sc, 1.0, 3.38e-5, 6.50);
        records.push(model_record(&op, Regime::Equilibrium, params, table, form)?);
    }

    for record in &mut records {
        record.source = DataSource::Experimental;
        let mut values = record.target.as_array();
        for v in &mut values {
            *v = (*v * (1.0 + noise.sample(&mut rng))).max(0.0);
        }
        let sum: f64 = values.iter().sum();
        record.target = GasComposition::from_array(values.map(|v| v / sum));
    }
    Ok(records)
}

/// Evaluate the named reference model at `op`.
fn model_record(
    op: &OperatingPoint,
    regime: Regime,
    params: &KineticParams,
    table: &SpeciesThermoTable,
    form: ShiftResidualForm,
) -> Result<DataRecord, DatasetError> {
    let target = match regime {
        Regime::Equilibrium => equilibrium::equilibrium_composition(op, table, form)?,
        _ => {
            let (conversions, _) = kinetics::kinetic_conversions(params, op, table, form)?;
            kinetics::composition_from_conversions(&conversions, op.steam_ratio, op.nitrogen_ratio, op.co2_ratio)?
        }
    };
    Ok(DataRecord {
        temperature: op.temperature,
        catalyst_mass: op.catalyst_mass,
        steam_ratio: op.steam_ratio,
        nitrogen_ratio: op.nitrogen_ratio,
        co2_ratio: op.co2_ratio,
        methane_flow: op.methane_flow,
        target,
        source: DataSource::Simulated,
        regime,
    })
}

// ---------------------------------------------------------------------------
// CSV schema
// ---------------------------------------------------------------------------

/// Mandatory dataset CSV header.
pub const CSV_HEADER: &str = "T_K,m_cat_g,SC,NC,CC,f_CH4_mol_s,y_H2,y_CH4,y_CO,y_CO2,source,regime";

/// Write records in the dataset CSV schema. Floats use shortest
/// round-trip formatting, so identical values produce identical bytes.
pub fn write_csv<W: Write>(records: &[DataRecord], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.temperature,
            r.catalyst_mass,
            r.steam_ratio,
            r.nitrogen_ratio,
            r.co2_ratio,
            r.methane_flow,
            r.target.h2,
            r.target.ch4,
            r.target.co,
            r.target.co2,
            r.source.label(),
            r.regime.label()
        )?;
    }
    Ok(())
}

fn parse_row(line_no: usize, line: &str) -> Result<DataRecord, DatasetError> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 12 {
        return Err(DatasetError::Csv {
            line: line_no,
            message: format!("expected 12 fields, got {}", fields.len()),
        });
    }
    if fields[0] == "T_K" {
        return Err(DatasetError::Csv {
            line: line_no,
            message: "duplicated header".into(),
        });
    }
    let num = |idx: usize| -> Result<f64, DatasetError> {
        fields[idx].parse::<f64>().map_err(|_| DatasetError::Csv {
            line: line_no,
            message: format!("field {} is not a number: {:?}", idx + 1, fields[idx]),
        })
    };
    let source = DataSource::parse(fields[10]).ok_or_else(|| DatasetError::Csv {
        line: line_no,
        message: format!("unknown source {:?}", fields[10]),
    })?;
    let regime = Regime::parse(fields[11]).ok_or_else(|| DatasetError::Csv {
        line: line_no,
        message: format!("unknown regime {:?}", fields[11]),
    })?;
    Ok(DataRecord {
        temperature: num(0)?,
        catalyst_mass: num(1)?,
        steam_ratio: num(2)?,
        nitrogen_ratio: num(3)?,
        co2_ratio: num(4)?,
        methane_flow: num(5)?,
        target: GasComposition {
            h2: num(6)?,
            ch4: num(7)?,
            co: num(8)?,
            co2: num(9)?,
        },
        source,
        regime,
    })
}

/// Strict CSV reader for trusted corpus files: any invariant violation is an
/// error carrying the line number.
pub fn read_csv<R: BufRead>(reader: R) -> Result<Vec<DataRecord>, DatasetError> {
    let mut records = Vec::new();
    let mut lines = reader.lines().enumerate();
    match lines.next() {
        Some((_, Ok(header))) if header.trim() == CSV_HEADER => {}
        Some((_, Ok(other))) => {
            return Err(DatasetError::Csv {
                line: 1,
                message: format!("bad header {other:?}"),
            })
        }
        Some((_, Err(err))) => return Err(err.into()),
        None => return Err(DatasetError::Empty),
    }
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_row(idx + 1, &line)?;
        if !record.target.is_valid() {
            return Err(DatasetError::Csv {
                line: idx + 1,
                message: format!("target composition invalid: {:?}", record.target),
            });
        }
        records.push(record);
    }
    Ok(records)
}

/// Counts reported by [`ingest_experimental`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestSummary {
    pub accepted: usize,
    pub renormalized: usize,
    pub rejected: usize,
}

/// Lenient reader for user-supplied measurement CSV.
///
/// Rows are re-tagged `experimental`; compositions are renormalized to sum
/// one (warned when the drift is measurable); rows with non-physical
/// fractions or sums off by more than 1e-3 are rejected and logged, not
/// fatal. Structural problems (bad header, malformed fields) are errors
/// carrying the line number.
pub fn ingest_experimental<R: BufRead>(reader: R) -> Result<(Vec<DataRecord>, IngestSummary), DatasetError> {
    let mut records = Vec::new();
    let mut summary = IngestSummary::default();
    let mut lines = reader.lines().enumerate();
    match lines.next() {
        Some((_, Ok(header))) if header.trim() == CSV_HEADER => {}
        Some((_, Ok(other))) => {
            return Err(DatasetError::Csv {
                line: 1,
                message: format!("bad header {other:?}"),
            })
        }
        Some((_, Err(err))) => return Err(err.into()),
        None => return Err(DatasetError::Empty),
    }
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut record = parse_row(line_no, &line)?;
        record.source = DataSource::Experimental;
        let values = record.target.as_array();
        let sum: f64 = values.iter().sum();
        let physical = values.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v));
        if !physical || (sum - 1.0).abs() > 1e-3 {
            log::warn!("line {line_no}: rejected non-physical composition {values:?} (sum {sum})");
            summary.rejected += 1;
            continue;
        }
        if (sum - 1.0).abs() > 1e-12 {
            if (sum - 1.0).abs() > 1e-9 {
                log::warn!("line {line_no}: renormalizing composition off by {:.3e}", sum - 1.0);
            }
            record.target = GasComposition::from_array(values.map(|v| v / sum));
            summary.renormalized += 1;
        }
        summary.accepted += 1;
        records.push(record);
    }
    Ok((records, summary))
}

// ---------------------------------------------------------------------------
// Interpolation
// ---------------------------------------------------------------------------

/// Spline-interpolate an experimental series along `axis`.
///
/// All records must share every input except the axis; `n_points` interior
/// samples are placed strictly inside the axis hull (no extrapolation).
/// Interpolated targets are renormalized to sum one.
pub fn interpolate_series(
    records: &[DataRecord],
    axis: InputAxis,
    n_points: usize,
) -> Result<Vec<DataRecord>, DatasetError> {
    if records.len() < 4 {
        return Err(SplineError::TooFewPoints(records.len()).into());
    }
    let key = |r: &DataRecord| {
        let mut inputs = r.inputs().map(f64::to_bits).to_vec();
        inputs.remove(axis.index());
        inputs.push(r.co2_ratio.to_bits());
        inputs
    };
    let base = key(&records[0]);
    if records.iter().any(|r| key(r) != base) {
        return Err(DatasetError::SeriesInvalid(format!(
            "records do not share all inputs except {}",
            axis.label()
        )));
    }

    let mut sorted: Vec<&DataRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.input(axis).total_cmp(&b.input(axis)));
    let xs: Vec<f64> = sorted.iter().map(|r| r.input(axis)).collect();
    for pair in xs.windows(2) {
        if pair[0] == pair[1] {
            return Err(DatasetError::SeriesInvalid(format!(
                "duplicate {} value {}",
                axis.label(),
                pair[0]
            )));
        }
    }

    let component = |f: fn(&GasComposition) -> f64| -> Vec<f64> { sorted.iter().map(|r| f(&r.target)).collect() };
    let splines = [
        NaturalCubicSpline::fit(&xs, &component(|t| t.h2))?,
        NaturalCubicSpline::fit(&xs, &component(|t| t.ch4))?,
        NaturalCubicSpline::fit(&xs, &component(|t| t.co))?,
        NaturalCubicSpline::fit(&xs, &component(|t| t.co2))?,
    ];

    let regime = if sorted.windows(2).all(|w| w[0].regime == w[1].regime) {
        sorted[0].regime
    } else {
        Regime::Unknown
    };

    let (lo, hi) = (xs[0], *xs.last().unwrap());
    let mut out = Vec::with_capacity(n_points);
    for i in 0..n_points {
        let x = lo + (hi - lo) * (i + 1) as f64 / (n_points + 1) as f64;
        let mut values = [0.0f64; 4];
        for (v, s) in values.iter_mut().zip(&splines) {
            *v = s.evaluate(x)?.max(0.0);
        }
        let sum: f64 = values.iter().sum();
        let mut record = *sorted[0];
        record.set_input(axis, x);
        record.target = GasComposition::from_array(values.map(|v| v / sum));
        record.source = DataSource::Interpolated;
        record.regime = regime;
        out.push(record);
    }
    Ok(out)
}

/// Detected experimental series: axis plus member indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Series {
    pub axis: InputAxis,
    pub members: Vec<usize>,
}

/// Group records into interpolation series.
///
/// For each axis (temperature first) records sharing the other four inputs
/// (and CC) with at least four distinct axis values form a series; each
/// record joins at most one.
pub fn detect_series(records: &[DataRecord]) -> Vec<Series> {
    let mut used = vec![false; records.len()];
    let mut series = Vec::new();
    for axis in InputAxis::ALL {
        let mut groups: Vec<(Vec<u64>, Vec<usize>)> = Vec::new();
        for (i, record) in records.iter().enumerate() {
            if used[i] {
                continue;
            }
            let mut key = record.inputs().map(f64::to_bits).to_vec();
            key.remove(axis.index());
            key.push(record.co2_ratio.to_bits());
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, members)) => members.push(i),
                None => groups.push((key, vec![i])),
            }
        }
        for (_, members) in groups {
            let mut values: Vec<f64> = members.iter().map(|&i| records[i].input(axis)).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            if values.len() >= 4 && values.len() == members.len() {
                for &i in &members {
                    used[i] = true;
                }
                series.push(Series { axis, members });
            }
        }
    }
    series
}

/// Default interior sample count for a series of length `n`.
pub fn default_interpolation_points(n: usize) -> usize {
    2 * n
}

// ---------------------------------------------------------------------------
// Augmentation, scaling, splitting
// ---------------------------------------------------------------------------

/// Duplicate records by source weight (experimental ×4, interpolated ×2,
/// simulated ×1); stable input order with duplicates adjacent.
pub fn augment(records: &[DataRecord]) -> Vec<DataRecord> {
    let mut out = Vec::with_capacity(records.iter().map(|r| r.source.weight()).sum());
    for record in records {
        for _ in 0..record.source.weight() {
            out.push(*record);
        }
    }
    out
}

/// Per-dimension min–max scaler over the five inputs. Targets are already
/// fractions in [0,1] and are never scaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: [f64; 5],
    pub max: [f64; 5],
}

impl Scaler {
    pub fn fit(records: &[DataRecord]) -> Result<Scaler, DatasetError> {
        if records.is_empty() {
            return Err(DatasetError::Empty);
        }
        let mut min = [f64::INFINITY; 5];
        let mut max = [f64::NEG_INFINITY; 5];
        for record in records {
            for (i, v) in record.inputs().into_iter().enumerate() {
                min[i] = min[i].min(v);
                max[i] = max[i].max(v);
            }
        }
        for axis in InputAxis::ALL {
            if max[axis.index()] <= min[axis.index()] {
                return Err(DatasetError::DegenerateDimension(axis.label()));
            }
        }
        Ok(Scaler { min, max })
    }

    pub fn apply(&self, raw: [f64; 5]) -> [f64; 5] {
        let mut out = [0.0; 5];
        for i in 0..5 {
            out[i] = (raw[i] - self.min[i]) / (self.max[i] - self.min[i]);
        }
        out
    }

    pub fn invert(&self, normalized: [f64; 5]) -> [f64; 5] {
        let mut out = [0.0; 5];
        for i in 0..5 {
            out[i] = self.min[i] + normalized[i] * (self.max[i] - self.min[i]);
        }
        out
    }

    /// True when every coordinate lies inside the fitted hull (with a small
    /// tolerance for round-trip noise).
    pub fn contains(&self, raw: [f64; 5]) -> bool {
        raw.iter().enumerate().all(|(i, v)| {
            let span = self.max[i] - self.min[i];
            *v >= self.min[i] - 1e-9 * span && *v <= self.max[i] + 1e-9 * span
        })
    }
}

/// Split fractions and shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(seed: u64) -> Self {
        SplitSpec {
            train: 0.70,
            val: 0.15,
            test: 0.15,
            seed,
        }
    }

    fn validate(&self) -> Result<(), DatasetError> {
        let sum = self.train + self.val + self.test;
        if self.train <= 0.0 || self.val <= 0.0 || self.test <= 0.0 || (sum - 1.0).abs() > 1e-9 {
            return Err(DatasetError::InvalidSplitSpec(format!(
                "fractions ({}, {}, {}) must be positive and sum to 1",
                self.train, self.val, self.test
            )));
        }
        Ok(())
    }
}

/// Unbiased bounded sampler (Lemire); keeps the shuffle a pure function of
/// the ChaCha stream rather than of `rand`'s range implementation.
fn bounded(rng: &mut ChaCha12Rng, bound: u64) -> u64 {
    let mut x = rng.next_u64();
    let mut m = (x as u128) * (bound as u128);
    let mut low = m as u64;
    if low < bound {
        let threshold = bound.wrapping_neg() % bound;
        while low < threshold {
            x = rng.next_u64();
            m = (x as u128) * (bound as u128);
            low = m as u64;
        }
    }
    (m >> 64) as u64
}

/// Seeded uniform shuffle then contiguous cut at `⌊train·n⌋` and
/// `⌊(train+val)·n⌋`.
pub fn split(
    records: &[DataRecord],
    spec: &SplitSpec,
) -> Result<(Vec<DataRecord>, Vec<DataRecord>, Vec<DataRecord>), DatasetError> {
    use rand::SeedableRng;
    spec.validate()?;
    let n = records.len();
    if n < 10 {
        return Err(DatasetError::SplitTooSmall(n));
    }
    let mut shuffled: Vec<DataRecord> = records.to_vec();
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    for i in (1..n).rev() {
        let j = bounded(&mut rng, (i + 1) as u64) as usize;
        shuffled.swap(i, j);
    }
    let cut1 = (spec.train * n as f64).floor() as usize;
    let cut2 = ((spec.train + spec.val) * n as f64).floor() as usize;
    let test = shuffled.split_off(cut2);
    let val = shuffled.split_off(cut1);
    Ok((shuffled, val, test))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermo::SpeciesThermoTable;
    use proptest::prelude::*;
    use std::io::BufReader;

    fn table() -> &'static SpeciesThermoTable {
        SpeciesThermoTable::builtin()
    }

    fn record(t: f64, source: DataSource) -> DataRecord {
        DataRecord {
            temperature: t,
            catalyst_mass: 1.48,
            steam_ratio: 3.0,
            nitrogen_ratio: 3.0,
            co2_ratio: 0.0,
            methane_flow: 3.38e-5,
            target: GasComposition {
                h2: 0.4,
                ch4: 0.3,
                co: 0.2,
                co2: 0.1,
            },
            source,
            regime: Regime::Kinetic,
        }
    }

    #[test]
    fn kinetic_reference_point_is_classified_kinetic() {
        let op = OperatingPoint::new(898.15, 3.0, 3.0, 3.38e-5, 1.48);
        let record = theoretical_record(
            &op,
            &KineticParams::default(),
            table(),
            ShiftResidualForm::MassAction,
            &RegimeThresholds::default(),
        )
        .unwrap()
        .expect("record emitted");
        assert_eq!(record.regime, Regime::Kinetic);
        assert_eq!(record.source, DataSource::Simulated);
        assert!(record.target.is_valid());
    }

    #[test]
    fn heavy_catalyst_low_flow_point_is_classified_equilibrium() {
        let op = OperatingPoint::new(898.15, 3.0, 3.0, 1e-5, 15.0);
        let record = theoretical_record(
            &op,
            &KineticParams::default(),
            table(),
            ShiftResidualForm::MassAction,
            &RegimeThresholds::default(),
        )
        .unwrap()
        .expect("record emitted");
        assert_eq!(record.regime, Regime::Equilibrium);
    }

    #[test]
    fn empty_grid_generates_nothing() {
        let mut grid = GridSpec::default();
        grid.temperature.points = 0;
        let (records, summary) = generate_theoretical(
            &grid,
            &KineticParams::default(),
            table(),
            ShiftResidualForm::MassAction,
            &RegimeThresholds::default(),
        );
        assert!(records.is_empty());
        assert_eq!(summary, GenerationSummary::default());
    }

    #[test]
    fn generation_emits_no_transition_band_records() {
        let grid = GridSpec {
            temperature: AxisSpec::new(823.15, 1023.15, 3),
            steam_ratio: AxisSpec::new(2.0, 3.0, 2),
            nitrogen_ratio: AxisSpec::new(0.0, 3.0, 2),
            methane_flow: AxisSpec::new(1e-5, 1e-4, 3),
            catalyst_mass: AxisSpec::new(0.5, 20.0, 6),
        };
        let thresholds = RegimeThresholds::default();
        let params = KineticParams::default();
        let (records, summary) =
            generate_theoretical(&grid, &params, table(), ShiftResidualForm::MassAction, &thresholds);
        assert_eq!(summary.failed, 0);
        assert!(summary.kinetic > 0 && summary.equilibrium > 0);
        for record in &records {
            let op = record.operating_point();
            let x_eq = equilibrium::solve_equilibrium(&op, table(), ShiftResidualForm::MassAction)
                .unwrap()
                .conversions
                .reforming;
            let rho = kinetics::reaction_rate(&params, &op) / op.methane_flow / x_eq;
            assert!(
                rho <= thresholds.kinetic_max || rho >= thresholds.equilibrium_min,
                "transition-band record leaked: rho = {rho}"
            );
        }
    }

    #[test]
    fn parallel_and_sequential_generation_are_bitwise_identical() {
        let grid = GridSpec {
            temperature: AxisSpec::new(823.15, 1023.15, 3),
            steam_ratio: AxisSpec::new(2.0, 3.0, 2),
            nitrogen_ratio: AxisSpec::new(0.0, 3.0, 2),
            methane_flow: AxisSpec::new(1e-5, 1e-4, 2),
            catalyst_mass: AxisSpec::new(0.5, 20.0, 3),
        };
        let params = KineticParams::default();
        let thresholds = RegimeThresholds::default();
        let (a, sa) = generate_theoretical(&grid, &params, table(), ShiftResidualForm::MassAction, &thresholds);
        let (b, sb) = generate_theoretical_seq(&grid, &params, table(), ShiftResidualForm::MassAction, &thresholds);
        assert_eq!(sa, sb);
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        write_csv(&a, &mut buf_a).unwrap();
        write_csv(&b, &mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let op = OperatingPoint::new(898.15, 3.0, 3.0, 3.38e-5, 1.48);
        let rec = theoretical_record(
            &op,
            &KineticParams::default(),
            table(),
            ShiftResidualForm::MassAction,
            &RegimeThresholds::default(),
        )
        .unwrap()
        .unwrap();
        let mut buf = Vec::new();
        write_csv(&[rec], &mut buf).unwrap();
        let back = read_csv(BufReader::new(buf.as_slice())).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].target.h2.to_bits(), rec.target.h2.to_bits());
        assert_eq!(back[0].methane_flow.to_bits(), rec.methane_flow.to_bits());
    }

    #[test]
    fn ingest_accepts_wellformed_rows() {
        let mut csv = String::from(CSV_HEADER);
        for i in 0..10 {
            csv.push_str(&format!(
                "\n{},1.48,3,3,0,3.38e-5,0.4,0.3,0.2,0.1,experimental,kinetic",
                800.0 + i as f64
            ));
        }
        let (records, summary) = ingest_experimental(BufReader::new(csv.as_bytes())).unwrap();
        assert_eq!(records.len(), 10);
        assert_eq!(summary.accepted, 10);
        assert_eq!(summary.rejected, 0);
        assert!(records.iter().all(|r| r.source == DataSource::Experimental));
    }

    #[test]
    fn ingest_rejects_rows_summing_far_from_one() {
        let csv = format!(
            "{CSV_HEADER}\n898,1.48,3,3,0,3.38e-5,0.4,0.3,0.1,0.1,experimental,kinetic"
        );
        let (records, summary) = ingest_experimental(BufReader::new(csv.as_bytes())).unwrap();
        assert!(records.is_empty());
        assert_eq!(summary.rejected, 1);
    }

    #[test]
    fn ingest_renormalizes_small_drift() {
        let csv = format!(
            "{CSV_HEADER}\n898,1.48,3,3,0,3.38e-5,0.4002,0.3,0.2,0.1,experimental,kinetic"
        );
        let (records, summary) = ingest_experimental(BufReader::new(csv.as_bytes())).unwrap();
        assert_eq!(summary.renormalized, 1);
        let sum: f64 = records[0].target.as_array().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_header_is_an_error_naming_line_2() {
        let csv = format!("{CSV_HEADER}\n{CSV_HEADER}");
        let err = ingest_experimental(BufReader::new(csv.as_bytes())).unwrap_err();
        match err {
            DatasetError::Csv { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("header"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_row_error_carries_line_number() {
        let csv = format!("{CSV_HEADER}\n898,oops,3,3,0,3.38e-5,0.4,0.3,0.2,0.1,experimental,kinetic");
        let err = read_csv(BufReader::new(csv.as_bytes())).unwrap_err();
        assert!(matches!(err, DatasetError::Csv { line: 2, .. }), "{err}");
    }

    #[test]
    fn interpolation_reproduces_linear_series() {
        let mut records = Vec::new();
        for i in 0..5 {
            let mut r = record(800.0 + 50.0 * i as f64, DataSource::Experimental);
            let a = 0.2 + 0.02 * i as f64;
            r.target = GasComposition {
                h2: a,
                ch4: 0.5 - a,
                co: 0.3,
                co2: 0.2,
            };
            records.push(r);
        }
        let out = interpolate_series(&records, InputAxis::Temperature, 8).unwrap();
        assert_eq!(out.len(), 8);
        for r in &out {
            let expect = 0.2 + 0.02 * (r.temperature - 800.0) / 50.0;
            assert!((r.target.h2 - expect).abs() < 1e-12, "at {}", r.temperature);
            assert_eq!(r.source, DataSource::Interpolated);
            assert_eq!(r.regime, Regime::Kinetic);
            assert!(r.temperature > 800.0 && r.temperature < 1000.0);
        }
    }

    #[test]
    fn interpolation_requires_four_points_and_distinct_axis_values() {
        let records: Vec<DataRecord> = (0..3).map(|i| record(800.0 + i as f64, DataSource::Experimental)).collect();
        assert!(matches!(
            interpolate_series(&records, InputAxis::Temperature, 4),
            Err(DatasetError::Spline(SplineError::TooFewPoints(3)))
        ));
        let mut records: Vec<DataRecord> =
            (0..4).map(|i| record(800.0 + i as f64, DataSource::Experimental)).collect();
        records[3].temperature = 801.0;
        assert!(matches!(
            interpolate_series(&records, InputAxis::Temperature, 4),
            Err(DatasetError::SeriesInvalid(_))
        ));
    }

    #[test]
    fn interpolation_rejects_mixed_series() {
        let mut records: Vec<DataRecord> =
            (0..4).map(|i| record(800.0 + i as f64 * 10.0, DataSource::Experimental)).collect();
        records[2].steam_ratio = 2.0;
        assert!(matches!(
            interpolate_series(&records, InputAxis::Temperature, 4),
            Err(DatasetError::SeriesInvalid(_))
        ));
    }

    #[test]
    fn augment_weights_4_2_1() {
        let mut records = Vec::new();
        for i in 0..10 {
            records.push(record(800.0 + i as f64, DataSource::Experimental));
        }
        for i in 0..20 {
            records.push(record(810.0 + i as f64, DataSource::Interpolated));
        }
        for i in 0..30 {
            records.push(record(830.0 + i as f64, DataSource::Simulated));
        }
        let out = augment(&records);
        assert_eq!(out.len(), 10 * 4 + 20 * 2 + 30);
        // Duplicates adjacent, original order preserved.
        assert_eq!(out[0].temperature, out[3].temperature);
        assert_eq!(out[4].temperature, 801.0);
    }

    #[test]
    fn augment_identity_for_simulated_and_empty() {
        let records: Vec<DataRecord> = (0..5).map(|i| record(800.0 + i as f64, DataSource::Simulated)).collect();
        assert_eq!(augment(&records), records);
        assert!(augment(&[]).is_empty());
    }

    #[test]
    fn scaler_endpoints_and_midpoint() {
        let records = vec![record(773.15, DataSource::Simulated), record(1073.15, DataSource::Simulated)];
        // Perturb the other dimensions so the scaler is non-degenerate.
        let mut records: Vec<DataRecord> = records;
        records[0].catalyst_mass = 0.1;
        records[1].catalyst_mass = 20.0;
        records[0].steam_ratio = 1.0;
        records[1].steam_ratio = 4.0;
        records[0].nitrogen_ratio = 0.0;
        records[1].nitrogen_ratio = 6.0;
        records[0].methane_flow = 1e-5;
        records[1].methane_flow = 2e-4;
        let scaler = Scaler::fit(&records).unwrap();
        let lo = scaler.apply(records[0].inputs());
        let hi = scaler.apply(records[1].inputs());
        assert_eq!(lo, [0.0; 5]);
        assert_eq!(hi, [1.0; 5]);
        let mid = scaler.apply([923.15, 10.05, 2.5, 3.0, 1.05e-4]);
        assert!((mid[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn scaler_degenerate_dimension_is_named() {
        let records: Vec<DataRecord> = (0..4).map(|i| record(800.0 + i as f64, DataSource::Simulated)).collect();
        // All records share SC, NC, f, m: the first non-temperature axis wins.
        let err = Scaler::fit(&records).unwrap_err();
        assert!(matches!(err, DatasetError::DegenerateDimension("m_cat")));
    }

    proptest! {
        #[test]
        fn scaler_round_trip_is_identity(
            t in 773.15..1073.15f64,
            m in 0.1..20.0f64,
            sc in 1.0..4.0f64,
            nc in 0.0..6.0f64,
            f in 1e-5..2e-4f64,
        ) {
            let mut lo = record(773.15, DataSource::Simulated);
            lo.catalyst_mass = 0.1;
            lo.steam_ratio = 1.0;
            lo.nitrogen_ratio = 0.0;
            lo.methane_flow = 1e-5;
            let mut hi = record(1073.15, DataSource::Simulated);
            hi.catalyst_mass = 20.0;
            hi.steam_ratio = 4.0;
            hi.nitrogen_ratio = 6.0;
            hi.methane_flow = 2e-4;
            let scaler = Scaler::fit(&[lo, hi]).unwrap();
            let raw = [t, m, sc, nc, f];
            let back = scaler.invert(scaler.apply(raw));
            for (a, b) in raw.iter().zip(back) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn split_sizes_and_determinism() {
        let records: Vec<DataRecord> = (0..100).map(|i| record(700.0 + i as f64, DataSource::Simulated)).collect();
        let spec = SplitSpec::new(42);
        let (train, val, test) = split(&records, &spec).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (70, 15, 15));
        let (train2, val2, test2) = split(&records, &spec).unwrap();
        assert_eq!(train, train2);
        assert_eq!(val, val2);
        assert_eq!(test, test2);
        // Different seed shuffles differently.
        let (train3, ..) = split(&records, &SplitSpec::new(43)).unwrap();
        assert_ne!(train, train3);
        // Partition: multiset of temperatures is preserved.
        let mut all: Vec<u64> = train.iter().chain(&val).chain(&test).map(|r| r.temperature.to_bits()).collect();
        all.sort_unstable();
        let mut orig: Vec<u64> = records.iter().map(|r| r.temperature.to_bits()).collect();
        orig.sort_unstable();
        assert_eq!(all, orig);
    }

    #[test]
    fn split_floor_rule_at_n_10() {
        let records: Vec<DataRecord> = (0..10).map(|i| record(700.0 + i as f64, DataSource::Simulated)).collect();
        let (train, val, test) = split(&records, &SplitSpec::new(1)).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (7, 1, 2));
        let records9: Vec<DataRecord> = records[..9].to_vec();
        assert!(matches!(split(&records9, &SplitSpec::new(1)), Err(DatasetError::SplitTooSmall(9))));
    }

    #[test]
    fn pseudo_experimental_bundle_is_deterministic_and_valid() {
        let params = KineticParams::default();
        let a = pseudo_experimental_bundle(7, &params, table(), ShiftResidualForm::MassAction).unwrap();
        let b = pseudo_experimental_bundle(7, &params, table(), ShiftResidualForm::MassAction).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 32);
        assert!(a.iter().all(|r| r.target.is_valid() && r.source == DataSource::Experimental));
        let c = pseudo_experimental_bundle(8, &params, table(), ShiftResidualForm::MassAction).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn series_detection_finds_all_bundle_series() {
        let params = KineticParams::default();
        let bundle = pseudo_experimental_bundle(7, &params, table(), ShiftResidualForm::MassAction).unwrap();
        let series = detect_series(&bundle);
        assert_eq!(series.len(), 4);
        let t_series = series.iter().filter(|s| s.axis == InputAxis::Temperature).count();
        let sc_series = series.iter().filter(|s| s.axis == InputAxis::SteamRatio).count();
        assert_eq!((t_series, sc_series), (2, 2));
        let covered: usize = series.iter().map(|s| s.members.len()).sum();
        assert_eq!(covered, bundle.len());
    }
}
