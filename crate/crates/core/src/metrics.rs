//! Evaluation statistics (MSE, Pearson, Spearman), parameter sweeps against
//! the reference models, and a derivative-smoothness probe.

use std::io::Write;

use thiserror::Error;

use crate::dataset::{DataRecord, InputAxis, Regime, RegimeThresholds};
use crate::equilibrium::{self, EquilibriumError, ShiftResidualForm};
use crate::kinetics::{self, Conversions, GasComposition, KineticParams, KineticsError, OperatingPoint};
use crate::neural::{self, Network};
use crate::par;
use crate::thermo::SpeciesThermoTable;

pub const COMPONENT_NAMES: [&str; 4] = ["H2", "CH4", "CO", "CO2"];

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("evaluation needs at least 3 records, got {0}")]
    TooFewRecords(usize),
    #[error("smoothness probe needs a grid of at least 16 points, got {0}")]
    TooFewProbePoints(usize),
    #[error("sweep grid must be strictly monotone")]
    NonMonotoneGrid,
    #[error(transparent)]
    Neural(#[from] neural::NeuralError),
}

/// Pearson correlation coefficient; `None` when either side has zero
/// variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    // A constant side has zero variance even when the computed mean differs
    // from the common value by rounding.
    if xs.iter().all(|v| *v == xs[0]) || ys.iter().all(|v| *v == ys[0]) {
        return None;
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return None;
    }
    Some(cov / (var_x * var_y).sqrt())
}

/// Average ranks (midranks for ties), 1-based.
fn midranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation using midranks; `None` when a side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    pearson(&midranks(xs), &midranks(ys))
}

/// Evaluation summary over a record set.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub n_records: usize,
    /// Mean squared error over records and components.
    pub mse: f64,
    pub mse_per_component: [f64; 4],
    /// Per-component Pearson r; absent for zero-variance components.
    pub pearson: [Option<f64>; 4],
    pub spearman: [Option<f64>; 4],
    /// Mean over the defined per-component coefficients.
    pub mean_pearson: Option<f64>,
    pub mean_spearman: Option<f64>,
    /// Spearman over all (record, component) pairs pooled, for comparison
    /// with per-component aggregation.
    pub pooled_spearman: Option<f64>,
    /// Zero-variance components excluded from the means.
    pub notes: Vec<String>,
}

fn mean_defined(values: &[Option<f64>]) -> Option<f64> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

/// Evaluate `net` on raw records (inputs normalized via the embedded scaler).
pub fn evaluate(net: &Network, records: &[DataRecord]) -> Result<EvalReport, MetricsError> {
    if records.len() < 3 {
        return Err(MetricsError::TooFewRecords(records.len()));
    }
    let predictions: Vec<[f64; 4]> = par::map_ordered(records, |r| neural::predict_raw(net, r.inputs()).0.as_array());
    let targets: Vec<[f64; 4]> = records.iter().map(|r| r.target.as_array()).collect();
    Ok(report_from_pairs(&predictions, &targets))
}

/// Statistics for explicit (prediction, target) pairs.
pub fn report_from_pairs(predictions: &[[f64; 4]], targets: &[[f64; 4]]) -> EvalReport {
    let n = predictions.len();
    let mut mse_per_component = [0.0; 4];
    let mut pearson_per = [None; 4];
    let mut spearman_per = [None; 4];
    let mut notes = Vec::new();
    for c in 0..4 {
        let pred: Vec<f64> = predictions.iter().map(|p| p[c]).collect();
        let target: Vec<f64> = targets.iter().map(|t| t[c]).collect();
        mse_per_component[c] = pred
            .iter()
            .zip(&target)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n as f64;
        pearson_per[c] = pearson(&pred, &target);
        spearman_per[c] = spearman(&pred, &target);
        if pearson_per[c].is_none() {
            notes.push(format!(
                "component {} has zero variance; correlation undefined and excluded from the mean",
                COMPONENT_NAMES[c]
            ));
        }
    }
    let pooled_pred: Vec<f64> = predictions.iter().flatten().copied().collect();
    let pooled_target: Vec<f64> = targets.iter().flatten().copied().collect();
    EvalReport {
        n_records: n,
        mse: mse_per_component.iter().sum::<f64>() / 4.0,
        mse_per_component,
        pearson: pearson_per,
        spearman: spearman_per,
        mean_pearson: mean_defined(&pearson_per),
        mean_spearman: mean_defined(&spearman_per),
        pooled_spearman: spearman(&pooled_pred, &pooled_target),
        notes,
    }
}

impl EvalReport {
    /// Plain-text rendering used by the CLI.
    pub fn render(&self) -> String {
        let fmt_opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.6}"));
        let mut out = String::new();
        out.push_str(&format!("records: {}\n", self.n_records));
        out.push_str(&format!("mse: {:.6e}\n", self.mse));
        for c in 0..4 {
            out.push_str(&format!(
                "{:>4}: mse {:.6e}  pearson {}  spearman {}\n",
                COMPONENT_NAMES[c],
                self.mse_per_component[c],
                fmt_opt(self.pearson[c]),
                fmt_opt(self.spearman[c]),
            ));
        }
        out.push_str(&format!(
            "mean pearson: {}\nmean spearman: {}\npooled spearman: {}\n",
            fmt_opt(self.mean_pearson),
            fmt_opt(self.mean_spearman),
            fmt_opt(self.pooled_spearman)
        ));
        for note in &self.notes {
            out.push_str(&format!("note: {note}\n"));
        }
        out
    }

    /// One-line CSV (header + row) for machine consumption.
    pub fn to_csv(&self) -> String {
        let fmt_opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
        let mut header = vec!["n".to_string(), "mse".to_string()];
        let mut row = vec![format!("{}", self.n_records), format!("{}", self.mse)];
        for c in 0..4 {
            header.push(format!("mse_{}", COMPONENT_NAMES[c]));
            row.push(format!("{}", self.mse_per_component[c]));
        }
        for c in 0..4 {
            header.push(format!("pearson_{}", COMPONENT_NAMES[c]));
            row.push(fmt_opt(self.pearson[c]));
        }
        for c in 0..4 {
            header.push(format!("spearman_{}", COMPONENT_NAMES[c]));
            row.push(fmt_opt(self.spearman[c]));
        }
        header.extend(["mean_pearson".into(), "mean_spearman".into(), "pooled_spearman".into()]);
        row.push(fmt_opt(self.mean_pearson));
        row.push(fmt_opt(self.mean_spearman));
        row.push(fmt_opt(self.pooled_spearman));
        format!("{}\n{}\n", header.join(","), row.join(","))
    }
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// Which reference model to place next to the surrogate predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReferenceMode {
    /// Classify each point by the kinetic/equilibrium ratio rule; the
    /// transition band gets empty reference cells.
    #[default]
    Auto,
    /// Force the kinetic model.
    Kinetic,
    /// Force the equilibrium model.
    Equilibrium,
    /// No reference columns.
    None,
}

impl ReferenceMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "auto" => Some(ReferenceMode::Auto),
            "kinetic" => Some(ReferenceMode::Kinetic),
            "equilibrium" => Some(ReferenceMode::Equilibrium),
            "none" => Some(ReferenceMode::None),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub value: f64,
    pub ann: Option<GasComposition>,
    pub reference: Option<GasComposition>,
    pub regime: Regime,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub vary: InputAxis,
    pub rows: Vec<SweepRow>,
    /// Grid points outside the surrogate's training hull (prediction still
    /// emitted).
    pub extrapolated: usize,
}

fn reference_at(
    op: &OperatingPoint,
    mode: ReferenceMode,
    params: &KineticParams,
    table: &SpeciesThermoTable,
    form: ShiftResidualForm,
    thresholds: &RegimeThresholds,
) -> (Option<GasComposition>, Regime) {
    let kinetic = |reforming: f64| -> Result<GasComposition, KineticsError> {
        let k_sh = kinetics::shift_constant(op, table)?;
        let shift = kinetics::shift_extent(reforming, op.steam_ratio, op.co2_ratio, k_sh)?;
        kinetics::composition_from_conversions(
            &Conversions { reforming, shift },
            op.steam_ratio,
            op.nitrogen_ratio,
            op.co2_ratio,
        )
    };
    let result: Result<(Option<GasComposition>, Regime), EquilibriumError> = (|| match mode {
        ReferenceMode::None => Ok((None, Regime::Unknown)),
        ReferenceMode::Equilibrium => Ok((
            Some(equilibrium::equilibrium_composition(op, table, form)?),
            Regime::Equilibrium,
        )),
        ReferenceMode::Kinetic => {
            let solution = equilibrium::solve_equilibrium(op, table, form)?;
            let unclamped = kinetics::reaction_rate(params, op) / op.methane_flow;
            let reforming = unclamped.min(solution.conversions.reforming);
            let comp = kinetic(reforming).map_err(|e| EquilibriumError::InvalidState(e.to_string()))?;
            Ok((Some(comp), Regime::Kinetic))
        }
        ReferenceMode::Auto => {
            let solution = equilibrium::solve_equilibrium(op, table, form)?;
            let x_eq = solution.conversions.reforming;
            let rho = kinetics::reaction_rate(params, op) / op.methane_flow / x_eq;
            if rho <= thresholds.kinetic_max {
                let comp = kinetic(rho * x_eq).map_err(|e| EquilibriumError::InvalidState(e.to_string()))?;
                Ok((Some(comp), Regime::Kinetic))
            } else if rho >= thresholds.equilibrium_min {
                let comp = kinetics::composition_from_conversions(
                    &solution.conversions,
                    op.steam_ratio,
                    op.nitrogen_ratio,
                    op.co2_ratio,
                )
                .map_err(|e| EquilibriumError::InvalidState(e.to_string()))?;
                Ok((Some(comp), Regime::Equilibrium))
            } else {
                Ok((None, Regime::Transition))
            }
        }
    })();
    match result {
        Ok(pair) => pair,
        Err(err) => {
            log::warn!("reference model failed at {op:?}: {err}");
            (None, Regime::Unknown)
        }
    }
}

/// Sweep one input axis: surrogate predictions (when a network is given)
/// next to reference-model compositions.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    net: Option<&Network>,
    vary: InputAxis,
    grid: &[f64],
    fixed: &OperatingPoint,
    reference: ReferenceMode,
    params: &KineticParams,
    table: &SpeciesThermoTable,
    form: ShiftResidualForm,
    thresholds: &RegimeThresholds,
) -> Result<SweepTable, MetricsError> {
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MetricsError::NonMonotoneGrid);
    }
    let points: Vec<OperatingPoint> = grid
        .iter()
        .map(|&v| {
            let mut op = *fixed;
            match vary {
                InputAxis::Temperature => op.temperature = v,
                InputAxis::CatalystMass => op.catalyst_mass = v,
                InputAxis::SteamRatio => op.steam_ratio = v,
                InputAxis::NitrogenRatio => op.nitrogen_ratio = v,
                InputAxis::MethaneFlow => op.methane_flow = v,
            }
            op
        })
        .collect();

    let mut extrapolated = 0;
    let rows: Vec<SweepRow> = par::map_ordered(&points, |op| {
        let raw = [
            op.temperature,
            op.catalyst_mass,
            op.steam_ratio,
            op.nitrogen_ratio,
            op.methane_flow,
        ];
        let ann = net.map(|n| neural::predict_raw(n, raw));
        let (reference, regime) = reference_at(op, reference, params, table, form, thresholds);
        (ann, reference, regime)
    })
    .into_iter()
    .zip(grid)
    .map(|((ann, reference, regime), &value)| {
        let ann = ann.map(|(comp, in_hull)| {
            if !in_hull {
                extrapolated += 1;
            }
            comp
        });
        SweepRow {
            value,
            ann,
            reference,
            regime,
        }
    })
    .collect();
    if extrapolated > 0 {
        log::warn!("{extrapolated} sweep points lie outside the training hull; predictions are extrapolations");
    }
    Ok(SweepTable {
        vary,
        rows,
        extrapolated,
    })
}

/// Sweep CSV: surrogate and reference compositions per grid point; reference
/// cells are empty in the transition band.
pub fn write_sweep_csv<W: Write>(table: &SweepTable, out: &mut W) -> std::io::Result<()> {
    writeln!(
        out,
        "vary_name,vary_value,y_H2_ann,y_CH4_ann,y_CO_ann,y_CO2_ann,y_H2_ref,y_CH4_ref,y_CO_ref,y_CO2_ref,regime"
    )?;
    let cells = |comp: Option<GasComposition>| -> String {
        match comp {
            Some(c) => format!("{},{},{},{}", c.h2, c.ch4, c.co, c.co2),
            None => ",,,".to_string(),
        }
    };
    for row in &table.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            table.vary.label(),
            row.value,
            cells(row.ann),
            cells(row.reference),
            row.regime.label()
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Smoothness probe
// ---------------------------------------------------------------------------

/// Maximum jump between adjacent central-difference first derivatives of a
/// predictor along one raw input axis (a discontinuity surrogate: for a C²
/// predictor the report scales linearly with the grid step).
pub fn smoothness_probe_fn(
    predict: impl Fn([f64; 5]) -> [f64; 4],
    axis: InputAxis,
    fixed: [f64; 5],
    from: f64,
    to: f64,
    n_points: usize,
) -> Result<f64, MetricsError> {
    if n_points < 16 {
        return Err(MetricsError::TooFewProbePoints(n_points));
    }
    let grid = crate::dataset::linspace(from, to, n_points);
    let step = grid[1] - grid[0];
    let outputs: Vec<[f64; 4]> = grid
        .iter()
        .map(|&v| {
            let mut raw = fixed;
            raw[axis.index()] = v;
            predict(raw)
        })
        .collect();
    let mut max_jump = 0.0f64;
    for c in 0..4 {
        let derivative: Vec<f64> = (1..n_points - 1)
            .map(|i| (outputs[i + 1][c] - outputs[i - 1][c]) / (2.0 * step))
            .collect();
        for pair in derivative.windows(2) {
            max_jump = max_jump.max((pair[1] - pair[0]).abs());
        }
    }
    Ok(max_jump)
}

/// [`smoothness_probe_fn`] over a trained network (raw-unit axis bounds).
pub fn smoothness_probe(
    net: &Network,
    axis: InputAxis,
    fixed: [f64; 5],
    from: f64,
    to: f64,
    n_points: usize,
) -> Result<f64, MetricsError> {
    smoothness_probe_fn(
        |raw| neural::predict_raw(net, raw).0.as_array(),
        axis,
        fixed,
        from,
        to,
        n_points,
    )
}
