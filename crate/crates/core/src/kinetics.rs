//! Kinetic-regime reactor model: Arrhenius rate constant, power-law rate over
//! inlet partial pressures, reforming conversion clamped at the equilibrium
//! value, and the closed-form shift-equilibrium closure.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equilibrium::{self, EquilibriumError, ShiftResidualForm};
use crate::thermo::{ReactionId, SpeciesThermoTable, ThermoError, ATM_PRESSURE, GAS_CONSTANT};

/// Power-law kinetic parameters `r = m_cat · A·exp(−E/RT) · p_CH4^a · p_H2O^b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticParams {
    /// Pre-exponential constant, mol/(g·Pa^(a+b)·s).
    pub pre_exponential: f64,
    /// Activation energy, J/mol.
    pub activation_energy: f64,
    /// Methane partial-pressure order.
    pub order_ch4: f64,
    /// Steam partial-pressure order.
    pub order_h2o: f64,
}

impl Default for KineticParams {
    fn default() -> Self {
        KineticParams {
            pre_exponential: 2.582e-4,
            activation_energy: 115_255.0,
            order_ch4: 1.0,
            order_h2o: 0.0,
        }
    }
}

/// One reactor operating condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// Process temperature, K.
    pub temperature: f64,
    /// Total pressure, Pa.
    pub pressure: f64,
    /// Steam-to-methane feed ratio, mol/mol.
    pub steam_ratio: f64,
    /// Nitrogen-to-methane feed ratio, mol/mol.
    pub nitrogen_ratio: f64,
    /// CO2-to-methane feed ratio, mol/mol.
    pub co2_ratio: f64,
    /// Inlet methane flow, mol/s.
    pub methane_flow: f64,
    /// Catalyst mass, g.
    pub catalyst_mass: f64,
}

impl OperatingPoint {
    /// Condition with atmospheric pressure and no CO2 co-feed.
    pub fn new(temperature: f64, steam_ratio: f64, nitrogen_ratio: f64, methane_flow: f64, catalyst_mass: f64) -> Self {
        OperatingPoint {
            temperature,
            pressure: ATM_PRESSURE,
            steam_ratio,
            nitrogen_ratio,
            co2_ratio: 0.0,
            methane_flow,
            catalyst_mass,
        }
    }

    pub fn validate(&self) -> Result<(), KineticsError> {
        let ok = self.temperature > 0.0
            && self.pressure > 0.0
            && self.steam_ratio > 0.0
            && self.nitrogen_ratio >= 0.0
            && self.co2_ratio >= 0.0
            && self.methane_flow > 0.0
            && self.catalyst_mass >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(KineticsError::InvalidOperatingPoint(format!("{self:?}")))
        }
    }

    /// Total inlet moles per mole of methane, 1 + SC + NC + CC.
    pub fn inlet_moles(&self) -> f64 {
        1.0 + self.steam_ratio + self.nitrogen_ratio + self.co2_ratio
    }
}

/// Reaction extents per mole of inlet methane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conversions {
    /// Reforming extent.
    pub reforming: f64,
    /// Shift extent.
    pub shift: f64,
}

/// Dry, nitrogen-free outlet mole fractions; always sums to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasComposition {
    pub h2: f64,
    pub ch4: f64,
    pub co: f64,
    pub co2: f64,
}

impl GasComposition {
    pub fn as_array(&self) -> [f64; 4] {
        [self.h2, self.ch4, self.co, self.co2]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        GasComposition {
            h2: v[0],
            ch4: v[1],
            co: v[2],
            co2: v[3],
        }
    }

    /// Fractions non-negative and summing to one within `1e-9`.
    pub fn is_valid(&self) -> bool {
        let a = self.as_array();
        a.iter().all(|v| v.is_finite() && *v >= 0.0) && (a.iter().sum::<f64>() - 1.0).abs() <= 1e-9
    }
}

/// Outlet moles per mole of inlet methane (wet basis, including N2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutletMoles {
    pub h2o: f64,
    pub ch4: f64,
    pub h2: f64,
    pub co2: f64,
    pub co: f64,
    pub n2: f64,
}

#[derive(Debug, Error)]
pub enum KineticsError {
    #[error("invalid operating point: {0}")]
    InvalidOperatingPoint(String),
    #[error("invalid conversions: {0}")]
    InvalidConversions(String),
    #[error("negative outlet species {species} = {moles} (reforming {reforming}, shift {shift})")]
    NegativeSpecies {
        species: &'static str,
        moles: f64,
        reforming: f64,
        shift: f64,
    },
    #[error(
        "shift closure has no root in [{lo}, {hi}] (x_st={x_st}, SC={sc}, CC={cc}, K_sh={k_sh}); model inconsistency"
    )]
    NoFeasibleShiftRoot {
        lo: f64,
        hi: f64,
        x_st: f64,
        sc: f64,
        cc: f64,
        k_sh: f64,
    },
    #[error(transparent)]
    Thermo(#[from] ThermoError),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
}

/// Arrhenius rate constant `k = A·exp(−E/(R·T))`, mol/(g·Pa^(a+b)·s).
pub fn rate_constant(params: &KineticParams, temperature: f64) -> f64 {
    debug_assert!(temperature > 0.0);
    params.pre_exponential * (-params.activation_energy / (GAS_CONSTANT * temperature)).exp()
}

/// Inlet partial pressures of methane and steam from the feed mole fractions.
pub fn inlet_partial_pressures(op: &OperatingPoint) -> (f64, f64) {
    let total = op.inlet_moles();
    (op.pressure / total, op.pressure * op.steam_ratio / total)
}

/// Reaction rate `r = m_cat·k·p_CH4^a·p_H2O^b`, mol/s.
///
/// Partial pressures are inlet values: the rig holds conversion low enough
/// that the differential-reactor approximation applies.
pub fn reaction_rate(params: &KineticParams, op: &OperatingPoint) -> f64 {
    let k = rate_constant(params, op.temperature);
    let (p_ch4, p_h2o) = inlet_partial_pressures(op);
    op.catalyst_mass * k * p_ch4.powf(params.order_ch4) * p_h2o.powf(params.order_h2o)
}

/// Reforming conversion with an equilibrium clamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticConversion {
    /// Conversion actually used, `min(rate/flow, x_eq)`.
    pub reforming: f64,
    /// Raw kinetic value `rate/flow` before clamping.
    pub unclamped: f64,
    /// Equilibrium reforming conversion at the same operating point.
    pub equilibrium: f64,
    /// Whether the clamp was applied.
    pub clamped: bool,
}

/// Kinetic reforming conversion `x_st = min(r/f_CH4, x_eq)`.
///
/// The raw kinetic expression is unbounded in catalyst mass; clamping at the
/// equilibrium conversion keeps generated data physical on both sides of the
/// regime boundary.
pub fn kinetic_reforming_conversion(
    params: &KineticParams,
    op: &OperatingPoint,
    table: &SpeciesThermoTable,
    shift_form: ShiftResidualForm,
) -> Result<KineticConversion, KineticsError> {
    op.validate()?;
    let unclamped = reaction_rate(params, op) / op.methane_flow;
    let x_eq = equilibrium::solve_equilibrium(op, table, shift_form)?.conversions.reforming;
    let clamped = unclamped > x_eq;
    Ok(KineticConversion {
        reforming: if clamped { x_eq } else { unclamped },
        unclamped,
        equilibrium: x_eq,
        clamped,
    })
}

/// Solve the shift mass-action closure for the shift extent:
///
/// `(CC + x_sh)(3·x_st + x_sh) = K_sh (x_st − x_sh)(SC − x_st − x_sh)`
///
/// Expanded, this is the quadratic
/// `(1 − K_sh)·x² + (3·x_st + CC + K_sh·SC)·x − (K_sh·x_st·(SC − x_st) − 3·CC·x_st) = 0`,
/// whose unique root in `[max(0, −CC), min(x_st, SC − x_st)]` is returned.
pub fn shift_extent(x_st: f64, sc: f64, cc: f64, k_sh: f64) -> Result<f64, KineticsError> {
    if !(0.0..=1.0).contains(&x_st) || sc <= x_st || k_sh <= 0.0 || cc < 0.0 {
        return Err(KineticsError::InvalidConversions(format!(
            "shift closure preconditions violated: x_st={x_st}, SC={sc}, CC={cc}, K_sh={k_sh}"
        )));
    }
    let lo = 0f64.max(-cc);
    let hi = x_st.min(sc - x_st);

    let a = 1.0 - k_sh;
    let b = 3.0 * x_st + cc + k_sh * sc;
    let c = -(k_sh * x_st * (sc - x_st) - 3.0 * cc * x_st);

    const INTERVAL_TOL: f64 = 1e-14;
    let feasible = |x: f64| x >= lo - INTERVAL_TOL && x <= hi + INTERVAL_TOL;

    let root = if a.abs() < 1e-12 {
        // Degenerate near K_sh = 1: the quadratic collapses to b·x + c = 0.
        let x = -c / b;
        feasible(x).then_some(x)
    } else {
        // Numerically stable quadratic roots via the q-form.
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            None
        } else {
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            let roots = [q / a, if q != 0.0 { c / q } else { f64::NAN }];
            roots.into_iter().find(|x| x.is_finite() && feasible(*x))
        }
    };

    match root {
        Some(x) => Ok(x.clamp(lo, hi)),
        None => Err(KineticsError::NoFeasibleShiftRoot {
            lo,
            hi,
            x_st,
            sc,
            cc,
            k_sh,
        }),
    }
}

/// Shift equilibrium constant used by the kinetic closure at `op`.
pub fn shift_constant(op: &OperatingPoint, table: &SpeciesThermoTable) -> Result<f64, KineticsError> {
    Ok(table.k_equilibrium(ReactionId::Wgsr, op.temperature, op.pressure)?)
}

/// Full kinetic-model conversions at `op`: clamped reforming extent plus the
/// shift closure.
pub fn kinetic_conversions(
    params: &KineticParams,
    op: &OperatingPoint,
    table: &SpeciesThermoTable,
    shift_form: ShiftResidualForm,
) -> Result<(Conversions, KineticConversion), KineticsError> {
    let kc = kinetic_reforming_conversion(params, op, table, shift_form)?;
    let k_sh = shift_constant(op, table)?;
    let shift = if kc.reforming == 0.0 && op.co2_ratio == 0.0 {
        0.0
    } else {
        shift_extent(kc.reforming, op.steam_ratio, op.co2_ratio, k_sh)?
    };
    Ok((
        Conversions {
            reforming: kc.reforming,
            shift,
        },
        kc,
    ))
}

/// Outlet moles per mole of inlet methane from the stoichiometric table.
pub fn outlet_moles(conv: &Conversions, sc: f64, nc: f64, cc: f64) -> Result<OutletMoles, KineticsError> {
    let out = OutletMoles {
        h2o: sc - conv.reforming - conv.shift,
        ch4: 1.0 - conv.reforming,
        h2: 3.0 * conv.reforming + conv.shift,
        co2: cc + conv.shift,
        co: conv.reforming - conv.shift,
        n2: nc,
    };
    for (species, moles) in [
        ("H2O", out.h2o),
        ("CH4", out.ch4),
        ("H2", out.h2),
        ("CO2", out.co2),
        ("CO", out.co),
        ("N2", out.n2),
    ] {
        if moles < 0.0 {
            return Err(KineticsError::NegativeSpecies {
                species,
                moles,
                reforming: conv.reforming,
                shift: conv.shift,
            });
        }
    }
    Ok(out)
}

/// Dry, nitrogen-free composition of the outlet stream.
///
/// The denominator is `1 + 3·x_st + x_sh + CC`; the result is renormalized so
/// the four fractions sum to one exactly.
pub fn dry_composition(out: &OutletMoles) -> GasComposition {
    let total = out.h2 + out.ch4 + out.co + out.co2;
    let mut comp = GasComposition {
        h2: out.h2 / total,
        ch4: out.ch4 / total,
        co: out.co / total,
        co2: out.co2 / total,
    };
    let sum = comp.h2 + comp.ch4 + comp.co + comp.co2;
    comp.h2 /= sum;
    comp.ch4 /= sum;
    comp.co /= sum;
    comp.co2 /= sum;
    comp
}

/// Convenience: conversions straight to dry composition.
pub fn composition_from_conversions(
    conv: &Conversions,
    sc: f64,
    nc: f64,
    cc: f64,
) -> Result<GasComposition, KineticsError> {
    Ok(dry_composition(&outlet_moles(conv, sc, nc, cc)?))
}
