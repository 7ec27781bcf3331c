//! Shared test oracles.

use msr_surrogate::equilibrium::{self, ShiftResidualForm};
use msr_surrogate::kinetics::{Conversions, OperatingPoint};
use msr_surrogate::thermo::SpeciesThermoTable;

/// Brute-force equilibrium oracle: scaled-residual norm minimization on an
/// `n × n` feasible grid followed by shrinking local refinement. Independent
/// of the Newton solver (it only evaluates the residual function).
pub fn grid_refine_oracle(
    op: &OperatingPoint,
    table: &SpeciesThermoTable,
    form: ShiftResidualForm,
    n: usize,
) -> (f64, f64) {
    let sc = op.steam_ratio;
    let norm2 = |x: f64, y: f64| {
        let conv = Conversions {
            reforming: x,
            shift: y,
        };
        match equilibrium::residuals(
            &conv,
            op.temperature,
            sc,
            op.nitrogen_ratio,
            op.co2_ratio,
            op.pressure,
            table,
            form,
        ) {
            Ok((f1, f2)) => f1 * f1 + f2 * f2,
            Err(_) => f64::INFINITY,
        }
    };
    let eps = 1e-9;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..n {
        let x = eps + (1.0 - 2.0 * eps) * i as f64 / (n - 1) as f64;
        let y_hi = x.min(sc - x) - eps;
        if y_hi <= 0.0 {
            continue;
        }
        for j in 0..n {
            let y = y_hi * j as f64 / (n - 1) as f64;
            let v = norm2(x, y);
            if v < best.0 {
                best = (v, x, y);
            }
        }
    }
    let (mut x0, mut y0) = (best.1, best.2);
    let mut rx = 1.0 / n as f64;
    let mut ry = sc / n as f64;
    for _ in 0..24 {
        let mut local = (norm2(x0, y0), x0, y0);
        for i in 0..17 {
            let x = (x0 - rx + 2.0 * rx * i as f64 / 16.0).clamp(eps, 1.0 - eps);
            let y_hi = x.min(sc - x) - eps;
            for j in 0..17 {
                let y = (y0 - ry + 2.0 * ry * j as f64 / 16.0).clamp(0.0, y_hi.max(0.0));
                let v = norm2(x, y);
                if v < local.0 {
                    local = (v, x, y);
                }
            }
        }
        x0 = local.1;
        y0 = local.2;
        rx /= 4.0;
        ry /= 4.0;
    }
    (x0, y0)
}
