//! Equilibrium-regime reactor model: the coupled reforming/shift mass-action
//! system over conversions `(x, y)`, solved by a damped Newton iteration with
//! an analytic 2×2 Jacobian and multi-start.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinetics::{self, Conversions, GasComposition, OperatingPoint};
use crate::par;
use crate::thermo::{ReactionId, SpeciesThermoTable, ThermoError, ATM_PRESSURE};

/// Which form of the shift residual to use.
///
/// `MassAction` is the thermodynamically consistent law
/// `K_sh·p_CO·p_H2O = p_CO2·p_H2`. `PrintedCh4` replaces `p_CO` with `p_CH4`
/// and is kept selectable for comparison with sources that state the system
/// that way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ShiftResidualForm {
    #[default]
    MassAction,
    PrintedCh4,
}

impl ShiftResidualForm {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mass-action" => Some(ShiftResidualForm::MassAction),
            "paper" => Some(ShiftResidualForm::PrintedCh4),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ShiftResidualForm::MassAction => "mass-action",
            ShiftResidualForm::PrintedCh4 => "paper",
        }
    }
}

/// Partial pressures of the five reacting species plus inert nitrogen, Pa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialPressures {
    pub ch4: f64,
    pub h2o: f64,
    pub h2: f64,
    pub co: f64,
    pub co2: f64,
    pub n2: f64,
}

/// Converged solution of the equilibrium system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumSolution {
    pub conversions: Conversions,
    /// Scaled residual max-norm at the solution.
    pub residual_norm: f64,
    /// Newton iterations spent in the converged start.
    pub iterations: usize,
    /// Index of the initial guess that converged (warm start = 0 when used).
    pub multi_start_index: usize,
}

#[derive(Debug, Error)]
pub enum EquilibriumError {
    #[error("invalid equilibrium state: {0}")]
    InvalidState(String),
    #[error(
        "equilibrium solve did not converge at T={temperature} K, SC={sc}, NC={nc}, CC={cc} (best scaled residual {best_residual:.3e})"
    )]
    NonConvergence {
        temperature: f64,
        sc: f64,
        nc: f64,
        cc: f64,
        best_residual: f64,
    },
    #[error(transparent)]
    Thermo(#[from] ThermoError),
}

/// Scaled-residual convergence target of the Newton solver.
pub const SOLVER_TOLERANCE: f64 = 1e-12;
/// Feasibility margin used by step clipping.
const FEASIBILITY_EPS: f64 = 1e-12;
const MAX_NEWTON_ITERATIONS: usize = 200;

/// Partial pressures for conversions `(x, y)` at the given feed.
///
/// Fractions use the wet-basis denominator `1 + SC + NC + CC + 2x` (total
/// moles per mole of inlet methane after the +2 mole change of reforming).
pub fn partial_pressures(
    conv: &Conversions,
    sc: f64,
    nc: f64,
    cc: f64,
    pressure: f64,
) -> Result<PartialPressures, EquilibriumError> {
    let (x, y) = (conv.reforming, conv.shift);
    let total = 1.0 + sc + nc + cc + 2.0 * x;
    let moles = [
        ("CH4", 1.0 - x),
        ("H2O", sc - x - y),
        ("H2", 3.0 * x + y),
        ("CO", x - y),
        ("CO2", cc + y),
        ("N2", nc),
    ];
    for (name, n) in moles {
        if n < 0.0 {
            return Err(EquilibriumError::InvalidState(format!(
                "negative {name} amount {n} at x={x}, y={y}, SC={sc}, NC={nc}, CC={cc}"
            )));
        }
    }
    let p = |n: f64| n / total * pressure;
    Ok(PartialPressures {
        ch4: p(1.0 - x),
        h2o: p(sc - x - y),
        h2: p(3.0 * x + y),
        co: p(x - y),
        co2: p(cc + y),
        n2: p(nc),
    })
}

/// Equilibrium constants entering the residuals, reduced to mole-fraction
/// form: `kappa_st = K_st/P²` (dimensionless) and `k_sh`.
#[derive(Debug, Clone, Copy)]
struct ReducedConstants {
    kappa_st: f64,
    k_sh: f64,
}

fn reduced_constants(
    temperature: f64,
    pressure: f64,
    table: &SpeciesThermoTable,
) -> Result<ReducedConstants, EquilibriumError> {
    let k_st = table.k_equilibrium(ReactionId::Msrr, temperature, ATM_PRESSURE)?;
    let k_sh = table.k_equilibrium(ReactionId::Wgsr, temperature, ATM_PRESSURE)?;
    Ok(ReducedConstants {
        kappa_st: k_st / (pressure * pressure),
        k_sh,
    })
}

/// Scaled residual pair of the equilibrium system.
///
/// `f1` is the reforming mass-action defect divided by `P⁴·max(1, K_st/P²)`,
/// `f2` the shift defect divided by `P²·max(1, K_sh)`; both are O(1) across
/// the whole temperature range.
pub fn residuals(
    conv: &Conversions,
    temperature: f64,
    sc: f64,
    nc: f64,
    cc: f64,
    pressure: f64,
    table: &SpeciesThermoTable,
    form: ShiftResidualForm,
) -> Result<(f64, f64), EquilibriumError> {
    let constants = reduced_constants(temperature, pressure, table)?;
    // Check feasibility first so callers get the state error, not NaNs.
    partial_pressures(conv, sc, nc, cc, pressure)?;
    Ok(residuals_reduced(conv.reforming, conv.shift, sc, nc, cc, constants, form))
}

/// Residuals in mole-fraction form; this is what the division by pressure
/// powers amounts to, so no actual pressures appear.
fn residuals_reduced(
    x: f64,
    y: f64,
    sc: f64,
    nc: f64,
    cc: f64,
    constants: ReducedConstants,
    form: ShiftResidualForm,
) -> (f64, f64) {
    let total = 1.0 + sc + nc + cc + 2.0 * x;
    let u_ch4 = (1.0 - x) / total;
    let u_h2o = (sc - x - y) / total;
    let u_h2 = (3.0 * x + y) / total;
    let u_co = (x - y) / total;
    let u_co2 = (cc + y) / total;

    let s1 = constants.kappa_st.max(1.0);
    let s2 = constants.k_sh.max(1.0);
    let f1 = (constants.kappa_st * u_ch4 * u_h2o - u_co * u_h2 * u_h2 * u_h2) / s1;
    let shift_lhs = match form {
        ShiftResidualForm::MassAction => u_co,
        ShiftResidualForm::PrintedCh4 => u_ch4,
    };
    let f2 = (constants.k_sh * shift_lhs * u_h2o - u_co2 * u_h2) / s2;
    (f1, f2)
}

/// Analytic Jacobian of [`residuals_reduced`] with respect to `(x, y)`.
fn jacobian_reduced(
    x: f64,
    y: f64,
    sc: f64,
    nc: f64,
    cc: f64,
    constants: ReducedConstants,
    form: ShiftResidualForm,
) -> [[f64; 2]; 2] {
    let total = 1.0 + sc + nc + cc + 2.0 * x;
    let dtotal_dx = 2.0;

    // Mole fractions u_i = n_i/total with n_i linear in (x, y).
    let frac = |n: f64| n / total;
    let du = |n: f64, dn_dx: f64, dn_dy: f64| {
        let ux = (dn_dx * total - n * dtotal_dx) / (total * total);
        let uy = dn_dy / total;
        (ux, uy)
    };

    let u_ch4 = frac(1.0 - x);
    let u_h2o = frac(sc - x - y);
    let u_h2 = frac(3.0 * x + y);
    let u_co = frac(x - y);
    let u_co2 = frac(cc + y);

    let (dch4_dx, dch4_dy) = du(1.0 - x, -1.0, 0.0);
    let (dh2o_dx, dh2o_dy) = du(sc - x - y, -1.0, -1.0);
    let (dh2_dx, dh2_dy) = du(3.0 * x + y, 3.0, 1.0);
    let (dco_dx, dco_dy) = du(x - y, 1.0, -1.0);
    let (dco2_dx, dco2_dy) = du(cc + y, 0.0, 1.0);

    let s1 = constants.kappa_st.max(1.0);
    let s2 = constants.k_sh.max(1.0);

    let h2_sq = u_h2 * u_h2;
    let df1 = |dch4: f64, dh2o: f64, dco: f64, dh2: f64| {
        (constants.kappa_st * (dch4 * u_h2o + u_ch4 * dh2o) - (dco * h2_sq * u_h2 + 3.0 * u_co * h2_sq * dh2)) / s1
    };
    let (sa, dsa_dx, dsa_dy) = match form {
        ShiftResidualForm::MassAction => (u_co, dco_dx, dco_dy),
        ShiftResidualForm::PrintedCh4 => (u_ch4, dch4_dx, dch4_dy),
    };
    let df2 = |dsa: f64, dh2o: f64, dco2: f64, dh2: f64| {
        (constants.k_sh * (dsa * u_h2o + sa * dh2o) - (dco2 * u_h2 + u_co2 * dh2)) / s2
    };

    [
        [
            df1(dch4_dx, dh2o_dx, dco_dx, dh2_dx),
            df1(dch4_dy, dh2o_dy, dco_dy, dh2_dy),
        ],
        [
            df2(dsa_dx, dh2o_dx, dco2_dx, dh2_dx),
            df2(dsa_dy, dh2o_dy, dco2_dy, dh2_dy),
        ],
    ]
}

/// Clip `(x, y)` into the strictly feasible region for the given feed.
fn clip_feasible(x: f64, y: f64, sc: f64, cc: f64) -> (f64, f64) {
    let eps = FEASIBILITY_EPS;
    let x = x.clamp(eps, 1.0 - eps);
    let y_lo = (-cc).max(-3.0 * x) + eps;
    let y_hi = x.min(sc - x) - eps;
    let y = if y_lo <= y_hi { y.clamp(y_lo, y_hi) } else { 0.5 * (y_lo + y_hi) };
    (x, y)
}

/// Solve the equilibrium system for `op`.
///
/// Damped Newton with step clipping into the feasible region; multi-start
/// over fixed initial guesses plus an optional warm start. Converges to a
/// scaled residual max-norm of `1e-12` or reports the best residual seen.
pub fn solve_equilibrium(
    op: &OperatingPoint,
    table: &SpeciesThermoTable,
    form: ShiftResidualForm,
) -> Result<EquilibriumSolution, EquilibriumError> {
    solve_equilibrium_warm(op, table, form, None)
}

/// [`solve_equilibrium`] with a warm-start guess tried first.
pub fn solve_equilibrium_warm(
    op: &OperatingPoint,
    table: &SpeciesThermoTable,
    form: ShiftResidualForm,
    warm: Option<Conversions>,
) -> Result<EquilibriumSolution, EquilibriumError> {
    let (sc, nc, cc) = (op.steam_ratio, op.nitrogen_ratio, op.co2_ratio);
    let constants = reduced_constants(op.temperature, op.pressure, table)?;

    let mut starts: Vec<(f64, f64)> = Vec::with_capacity(4);
    if let Some(w) = warm {
        starts.push((w.reforming, w.shift));
    }
    starts.extend_from_slice(&[(0.1, 0.05), (0.5, 0.1), (0.9, 0.2)]);

    let mut best_residual = f64::INFINITY;
    for (start_index, &(x0, y0)) in starts.iter().enumerate() {
        let (mut x, mut y) = clip_feasible(x0, y0, sc, cc);
        let (mut f1, mut f2) = residuals_reduced(x, y, sc, nc, cc, constants, form);
        let mut norm = f1.abs().max(f2.abs());
        for iteration in 0..MAX_NEWTON_ITERATIONS {
            if norm <= SOLVER_TOLERANCE {
                return Ok(EquilibriumSolution {
                    conversions: Conversions { reforming: x, shift: y },
                    residual_norm: norm,
                    iterations: iteration,
                    multi_start_index: start_index,
                });
            }
            let j = jacobian_reduced(x, y, sc, nc, cc, constants, form);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det.abs() < 1e-300 || !det.is_finite() {
                break;
            }
            let dx = (-f1 * j[1][1] + f2 * j[0][1]) / det;
            let dy = (-f2 * j[0][0] + f1 * j[1][0]) / det;

            // Backtracking damping on the residual norm.
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let (xn, yn) = clip_feasible(x + alpha * dx, y + alpha * dy, sc, cc);
                let (g1, g2) = residuals_reduced(xn, yn, sc, nc, cc, constants, form);
                let new_norm = g1.abs().max(g2.abs());
                if new_norm < norm {
                    x = xn;
                    y = yn;
                    f1 = g1;
                    f2 = g2;
                    norm = new_norm;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if norm <= SOLVER_TOLERANCE {
            return Ok(EquilibriumSolution {
                conversions: Conversions { reforming: x, shift: y },
                residual_norm: norm,
                iterations: MAX_NEWTON_ITERATIONS,
                multi_start_index: start_index,
            });
        }
        best_residual = best_residual.min(norm);
    }
    Err(EquilibriumError::NonConvergence {
        temperature: op.temperature,
        sc,
        nc,
        cc,
        best_residual,
    })
}

/// Dry outlet composition of the equilibrium model at `op`.
pub fn equilibrium_composition(
    op: &OperatingPoint,
    table: &SpeciesThermoTable,
    form: ShiftResidualForm,
) -> Result<GasComposition, EquilibriumError> {
    let solution = solve_equilibrium(op, table, form)?;
    kinetics::composition_from_conversions(&solution.conversions, op.steam_ratio, op.nitrogen_ratio, op.co2_ratio)
        .map_err(|e| EquilibriumError::InvalidState(e.to_string()))
}

/// Solve a batch of operating points; parallel under the `parallel` feature,
/// output order matches input order.
pub fn solve_equilibrium_batch(
    ops: &[OperatingPoint],
    table: &SpeciesThermoTable,
    form: ShiftResidualForm,
) -> Vec<Result<EquilibriumSolution, EquilibriumError>> {
    par::map_ordered(ops, |op| solve_equilibrium(op, table, form))
}

/// Sequential twin of [`solve_equilibrium_batch`] (identical results).
pub fn solve_equilibrium_batch_seq(
    ops: &[OperatingPoint],
    table: &SpeciesThermoTable,
    form: ShiftResidualForm,
) -> Vec<Result<EquilibriumSolution, EquilibriumError>> {
    par::map_ordered_seq(ops, |op| solve_equilibrium(op, table, form))
}
