//! Shomate thermochemistry for the five reforming species and the derived
//! reaction Gibbs energies / equilibrium constants.
//!
//! Enthalpies are formation-referenced (elements at 298.15 K are zero), so a
//! stoichiometric sum over species gives the reaction enthalpy directly and
//! `ΔG°(T) = Σ ν_i (H_i(T) − T·S_i(T))`.

use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use thiserror::Error;

/// Universal gas constant, J/(mol·K).
pub const GAS_CONSTANT: f64 = 8.314472;

/// Default reference pressure (the rig operates at atmospheric pressure), Pa.
pub const ATM_PRESSURE: f64 = 101_325.0;

/// The five gas species tracked by the reactor models. N2 is inert and
/// handled stoichiometrically outside this module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Species {
    Ch4,
    H2o,
    H2,
    Co,
    Co2,
}

impl Species {
    pub const ALL: [Species; 5] = [Species::Ch4, Species::H2o, Species::H2, Species::Co, Species::Co2];

    pub fn label(self) -> &'static str {
        match self {
            Species::Ch4 => "CH4",
            Species::H2o => "H2O",
            Species::H2 => "H2",
            Species::Co => "CO",
            Species::Co2 => "CO2",
        }
    }

    fn from_label(s: &str) -> Option<Species> {
        Species::ALL.iter().copied().find(|sp| sp.label() == s)
    }

    fn index(self) -> usize {
        match self {
            Species::Ch4 => 0,
            Species::H2o => 1,
            Species::H2 => 2,
            Species::Co => 3,
            Species::Co2 => 4,
        }
    }

    /// (C, H, O) atom counts, used by elemental-balance checks.
    pub fn atoms(self) -> (f64, f64, f64) {
        match self {
            Species::Ch4 => (1.0, 4.0, 0.0),
            Species::H2o => (0.0, 2.0, 1.0),
            Species::H2 => (0.0, 2.0, 0.0),
            Species::Co => (1.0, 0.0, 1.0),
            Species::Co2 => (1.0, 0.0, 2.0),
        }
    }
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Reactions of the reforming system.
///
/// * `Msrr` — methane steam reforming, CH4 + H2O = 3 H2 + CO (Δn = +2)
/// * `Wgsr` — water-gas shift, CO + H2O = H2 + CO2 (Δn = 0)
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReactionId {
    Msrr,
    Wgsr,
}

impl ReactionId {
    /// Stoichiometric coefficients over `[CH4, H2O, H2, CO, CO2]`.
    pub fn stoichiometry(self) -> [f64; 5] {
        match self {
            ReactionId::Msrr => [-1.0, -1.0, 3.0, 1.0, 0.0],
            ReactionId::Wgsr => [0.0, -1.0, 1.0, -1.0, 1.0],
        }
    }

    /// Gas mole change Δn of the reaction.
    pub fn mole_change(self) -> i32 {
        match self {
            ReactionId::Msrr => 2,
            ReactionId::Wgsr => 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum ThermoError {
    #[error("temperature {temperature} K is outside the {species} table range [{t_min}, {t_max}] K")]
    OutOfRange {
        species: &'static str,
        temperature: f64,
        t_min: f64,
        t_max: f64,
    },
    #[error("thermo table line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("thermo table invalid: {0}")]
    Invalid(String),
    #[error("reference pressure must be positive, got {0} Pa")]
    NonPositivePressure(f64),
    #[error("failed to read thermo table {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
struct ShomateRange {
    t_min: f64,
    t_max: f64,
    // A, B, C, D, E, F, G, H in the standard Shomate order.
    coeffs: [f64; 8],
}

impl ShomateRange {
    /// Standard enthalpy, J/mol (formation-referenced).
    fn enthalpy(&self, temperature: f64) -> f64 {
        let [a, b, c, d, e, f, ..] = self.coeffs;
        let t = temperature / 1000.0;
        let kj = a * t + b * t.powi(2) / 2.0 + c * t.powi(3) / 3.0 + d * t.powi(4) / 4.0 - e / t + f;
        kj * 1000.0
    }

    /// Standard entropy, J/(mol·K).
    fn entropy(&self, temperature: f64) -> f64 {
        let [a, b, c, d, e, _, g, _] = self.coeffs;
        let t = temperature / 1000.0;
        a * t.ln() + b * t + c * t.powi(2) / 2.0 + d * t.powi(3) / 3.0 - e / (2.0 * t * t) + g
    }
}

/// Piecewise Shomate coefficient table for the five species.
///
/// Immutable after construction; all evaluation methods are pure, so the
/// table can be shared freely across threads.
#[derive(Debug, Clone)]
pub struct SpeciesThermoTable {
    ranges: [Vec<ShomateRange>; 5],
}

/// Coefficient file shipped with the crate.
const BUILTIN_TABLE: &str = include_str!("../data/shomate.dat");

/// Required minimum coverage per species, K.
const REQUIRED_COVERAGE: (f64, f64) = (500.0, 1500.0);

impl SpeciesThermoTable {
    /// The table embedded in the binary.
    pub fn builtin() -> &'static SpeciesThermoTable {
        static TABLE: OnceLock<SpeciesThermoTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            SpeciesThermoTable::parse(BUILTIN_TABLE).expect("embedded thermo table is valid")
        })
    }

    pub fn from_path(path: &Path) -> Result<SpeciesThermoTable, ThermoError> {
        let text = std::fs::read_to_string(path).map_err(|source| ThermoError::Io {
            path: path.display().to_string(),
            source,
        })?;
        SpeciesThermoTable::parse(&text)
    }

    /// Parse the whitespace-delimited coefficient format (see
    /// `data/shomate.dat` for the header documenting units).
    pub fn parse(text: &str) -> Result<SpeciesThermoTable, ThermoError> {
        let mut ranges: [Vec<ShomateRange>; 5] = Default::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() != 11 {
                return Err(ThermoError::Parse {
                    line,
                    message: format!("expected 11 fields (species, T_min, T_max, 8 coefficients), got {}", fields.len()),
                });
            }
            let species = Species::from_label(fields[0]).ok_or_else(|| ThermoError::Parse {
                line,
                message: format!("unknown species {:?}", fields[0]),
            })?;
            let mut nums = [0.0f64; 10];
            for (i, field) in fields[1..].iter().enumerate() {
                nums[i] = field.parse::<f64>().map_err(|_| ThermoError::Parse {
                    line,
                    message: format!("bad number {:?}", field),
                })?;
            }
            let (t_min, t_max) = (nums[0], nums[1]);
            if !(t_min > 0.0 && t_max > t_min) {
                return Err(ThermoError::Parse {
                    line,
                    message: format!("bad temperature range [{t_min}, {t_max}]"),
                });
            }
            let mut coeffs = [0.0f64; 8];
            coeffs.copy_from_slice(&nums[2..10]);
            ranges[species.index()].push(ShomateRange { t_min, t_max, coeffs });
        }
        let table = SpeciesThermoTable { ranges };
        table.validate()?;
        Ok(table)
    }

    fn validate(&self) -> Result<(), ThermoError> {
        for species in Species::ALL {
            let rs = &self.ranges[species.index()];
            if rs.is_empty() {
                return Err(ThermoError::Invalid(format!("no ranges for species {species}")));
            }
            let mut sorted: Vec<&ShomateRange> = rs.iter().collect();
            sorted.sort_by(|a, b| a.t_min.total_cmp(&b.t_min));
            for pair in sorted.windows(2) {
                if pair[0].t_max != pair[1].t_min {
                    return Err(ThermoError::Invalid(format!(
                        "{species} ranges are not contiguous: [{}, {}] then [{}, {}]",
                        pair[0].t_min, pair[0].t_max, pair[1].t_min, pair[1].t_max
                    )));
                }
            }
            let lo = sorted.first().unwrap().t_min;
            let hi = sorted.last().unwrap().t_max;
            if lo > REQUIRED_COVERAGE.0 || hi < REQUIRED_COVERAGE.1 {
                return Err(ThermoError::Invalid(format!(
                    "{species} covers [{lo}, {hi}] K, required at least [{}, {}] K",
                    REQUIRED_COVERAGE.0, REQUIRED_COVERAGE.1
                )));
            }
        }
        Ok(())
    }

    /// Overall validity window of the table (intersection over species).
    pub fn valid_range(&self) -> (f64, f64) {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for species in Species::ALL {
            let rs = &self.ranges[species.index()];
            lo = lo.max(rs.iter().map(|r| r.t_min).fold(f64::INFINITY, f64::min));
            hi = hi.min(rs.iter().map(|r| r.t_max).fold(f64::NEG_INFINITY, f64::max));
        }
        (lo, hi)
    }

    fn range_for(&self, species: Species, temperature: f64) -> Result<&ShomateRange, ThermoError> {
        let rs = &self.ranges[species.index()];
        rs.iter()
            .find(|r| temperature >= r.t_min && temperature <= r.t_max)
            .ok_or_else(|| {
                let t_min = rs.iter().map(|r| r.t_min).fold(f64::INFINITY, f64::min);
                let t_max = rs.iter().map(|r| r.t_max).fold(f64::NEG_INFINITY, f64::max);
                ThermoError::OutOfRange {
                    species: species.label(),
                    temperature,
                    t_min,
                    t_max,
                }
            })
    }

    /// Standard enthalpy of `species`, J/mol (formation-referenced).
    pub fn enthalpy(&self, species: Species, temperature: f64) -> Result<f64, ThermoError> {
        Ok(self.range_for(species, temperature)?.enthalpy(temperature))
    }

    /// Standard entropy of `species`, J/(mol·K).
    pub fn entropy(&self, species: Species, temperature: f64) -> Result<f64, ThermoError> {
        Ok(self.range_for(species, temperature)?.entropy(temperature))
    }

    /// Standard Gibbs energy of `species`, J/mol.
    pub fn gibbs(&self, species: Species, temperature: f64) -> Result<f64, ThermoError> {
        let range = self.range_for(species, temperature)?;
        Ok(range.enthalpy(temperature) - temperature * range.entropy(temperature))
    }

    /// Standard reaction Gibbs energy ΔG°(T) = Σ ν_i (H_i − T·S_i), J/mol.
    pub fn gibbs_reaction(&self, reaction: ReactionId, temperature: f64) -> Result<f64, ThermoError> {
        let nu = reaction.stoichiometry();
        let mut dg = 0.0;
        for (species, coeff) in Species::ALL.iter().zip(nu) {
            if coeff != 0.0 {
                dg += coeff * self.gibbs(*species, temperature)?;
            }
        }
        Ok(dg)
    }

    /// Pressure-basis equilibrium constant
    /// `K = exp(−ΔG°/(R·T)) · p_ref^Δn`.
    ///
    /// For the reforming reaction (Δn = +2) the result carries Pa²; for the
    /// shift reaction it is dimensionless. The pressure basis is what the
    /// mass-action residuals over raw partial pressures require.
    pub fn k_equilibrium(
        &self,
        reaction: ReactionId,
        temperature: f64,
        p_ref: f64,
    ) -> Result<f64, ThermoError> {
        if p_ref <= 0.0 {
            return Err(ThermoError::NonPositivePressure(p_ref));
        }
        let dg = self.gibbs_reaction(reaction, temperature)?;
        let k = (-dg / (GAS_CONSTANT * temperature)).exp();
        Ok(k * p_ref.powi(reaction.mole_change()))
    }
}
