//! Full-memory BFGS with a strong-Wolfe line search.
//!
//! The inverse-Hessian approximation starts at the identity and is rebuilt
//! from rank-two updates; a curvature failure resets it to the identity. The
//! line search brackets and zooms per Nocedal & Wright (Algorithms 3.5/3.6)
//! with bisection inside the zoom.

/// Objective evaluation: value and gradient at a point.
pub type Evaluation = (f64, Vec<f64>);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIterations,
    /// The line search could not make progress even after an identity reset;
    /// the iterate is (numerically) a stationary point or the objective is
    /// too flat to improve.
    LineSearchFailure,
    /// The per-iteration callback requested a stop.
    Callback,
    /// The objective returned a non-finite value at the current iterate.
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    #[allow(dead_code)] // consumed by tests and diagnostics
    pub value: f64,
    pub iterations: usize,
    pub stop: StopReason,
}

#[derive(Debug, Clone, Copy)]
pub struct BfgsConfig {
    pub max_iterations: usize,
    /// Trial step of the very first line search; later searches start at 1.
    pub initial_step: f64,
    pub c1: f64,
    pub c2: f64,
    /// Relative curvature threshold below which the update is skipped and
    /// the approximation reset.
    pub curvature_tol: f64,
}

impl Default for BfgsConfig {
    fn default() -> Self {
        BfgsConfig {
            max_iterations: 100,
            initial_step: 1.0,
            c1: 1e-4,
            c2: 0.9,
            curvature_tol: 1e-10,
        }
    }
}

/// Line-search strategy. `ExactQuadratic` computes the exact minimizer along
/// the ray for quadratic objectives (one extra gradient evaluation); it
/// exists for algebra tests and must not be used on non-quadratics.
#[derive(Debug, Clone, Copy)]
pub enum LineSearch {
    StrongWolfe,
    #[allow(dead_code)] // quadratic-algebra tests only
    ExactQuadratic,
}

struct Point {
    alpha: f64,
    value: f64,
    slope: f64,
    gradient: Vec<f64>,
}

/// Minimize `objective` from `x0`.
///
/// `on_step(iteration, value, x)` runs after every accepted update and may
/// return `false` to stop.
pub fn minimize<F, C>(
    mut objective: F,
    x0: Vec<f64>,
    config: &BfgsConfig,
    line_search: LineSearch,
    mut on_step: C,
) -> BfgsOutcome
where
    F: FnMut(&[f64]) -> Evaluation,
    C: FnMut(usize, f64, &[f64]) -> bool,
{
    let n = x0.len();
    let mut x = x0;
    let (mut value, mut gradient) = objective(&x);
    if !value.is_finite() {
        return BfgsOutcome {
            x,
            value,
            iterations: 0,
            stop: StopReason::NonFinite,
        };
    }

    // Inverse Hessian approximation, row-major n×n, starting at identity.
    let mut h = identity(n);
    let mut direction = vec![0.0; n];
    let mut iterations = 0;
    // Rescale the identity to s·y/y·y curvature right before the first
    // update after a (re)start; standard quasi-Newton warmup that makes the
    // unit trial step meaningful.
    let mut scale_next_update = true;

    for iteration in 1..=config.max_iterations {
        // d = −H·g
        for i in 0..n {
            let row = &h[i * n..(i + 1) * n];
            direction[i] = -dot(row, &gradient);
        }
        let mut slope = dot(&direction, &gradient);
        if slope >= 0.0 {
            // Not a descent direction (stale curvature); restart from steepest
            // descent.
            reset_identity(&mut h);
            scale_next_update = true;
            for (d, g) in direction.iter_mut().zip(&gradient) {
                *d = -*g;
            }
            slope = -dot(&gradient, &gradient);
            if slope == 0.0 {
                return BfgsOutcome {
                    x,
                    value,
                    iterations,
                    stop: StopReason::LineSearchFailure,
                };
            }
        }

        let trial = if iteration == 1 { config.initial_step } else { 1.0 };
        let mut found = run_line_search(
            &mut objective,
            &x,
            &direction,
            value,
            slope,
            trial,
            config,
            line_search,
        );
        if found.is_none() && !is_identity(&h) {
            // Retry once along steepest descent with a fresh approximation.
            reset_identity(&mut h);
            scale_next_update = true;
            for (d, g) in direction.iter_mut().zip(&gradient) {
                *d = -*g;
            }
            let slope = -dot(&gradient, &gradient);
            if slope < 0.0 {
                found = run_line_search(
                    &mut objective,
                    &x,
                    &direction,
                    value,
                    slope,
                    1.0,
                    config,
                    line_search,
                );
            }
        }
        let Some(accepted) = found else {
            return BfgsOutcome {
                x,
                value,
                iterations,
                stop: StopReason::LineSearchFailure,
            };
        };
        if !accepted.value.is_finite() {
            return BfgsOutcome {
                x,
                value: accepted.value,
                iterations,
                stop: StopReason::NonFinite,
            };
        }

        // s = α·d, y = g_new − g
        let step: Vec<f64> = direction.iter().map(|d| accepted.alpha * d).collect();
        let y: Vec<f64> = accepted.gradient.iter().zip(&gradient).map(|(a, b)| a - b).collect();
        for (xi, si) in x.iter_mut().zip(&step) {
            *xi += si;
        }
        value = accepted.value;
        gradient = accepted.gradient;
        iterations = iteration;

        let sy = dot(&step, &y);
        let s_norm = dot(&step, &step).sqrt();
        let y_norm = dot(&y, &y).sqrt();
        if sy <= config.curvature_tol * s_norm * y_norm {
            reset_identity(&mut h);
            scale_next_update = true;
        } else {
            if scale_next_update {
                let gamma = sy / dot(&y, &y);
                reset_identity(&mut h);
                for i in 0..n {
                    h[i * n + i] = gamma;
                }
                scale_next_update = false;
            }
            bfgs_update(&mut h, &step, &y, sy);
        }

        if !on_step(iteration, value, &x) {
            return BfgsOutcome {
                x,
                value,
                iterations,
                stop: StopReason::Callback,
            };
        }
    }

    BfgsOutcome {
        x,
        value,
        iterations,
        stop: StopReason::MaxIterations,
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

fn reset_identity(h: &mut [f64]) {
    let n = (h.len() as f64).sqrt() as usize;
    h.fill(0.0);
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
}

fn is_identity(h: &[f64]) -> bool {
    let n = (h.len() as f64).sqrt() as usize;
    h.iter().enumerate().all(|(k, v)| {
        let (i, j) = (k / n, k % n);
        *v == if i == j { 1.0 } else { 0.0 }
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ`, expanded to rank-two form.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    // hy = H·y (H symmetric).
    let mut hy = vec![0.0; n];
    for i in 0..n {
        hy[i] = dot(&h[i * n..(i + 1) * n], y);
    }
    let yhy = dot(y, &hy);
    let coeff = rho * rho * yhy + rho;
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += coeff * s[i] * s[j] - rho * (s[i] * hy[j] + hy[i] * s[j]);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_line_search<F>(
    objective: &mut F,
    x: &[f64],
    direction: &[f64],
    f0: f64,
    slope0: f64,
    trial: f64,
    config: &BfgsConfig,
    kind: LineSearch,
) -> Option<Point>
where
    F: FnMut(&[f64]) -> Evaluation,
{
    let mut probe = |alpha: f64| -> Point {
        let candidate: Vec<f64> = x.iter().zip(direction).map(|(xi, di)| xi + alpha * di).collect();
        let (value, gradient) = objective(&candidate);
        let slope = dot(&gradient, direction);
        Point {
            alpha,
            value,
            slope,
            gradient,
        }
    };

    match kind {
        LineSearch::ExactQuadratic => {
            // A·d = g(x + d) − g(x) for quadratics, hence α* = −g·d / dᵀAd.
            let at_unit = probe(1.0);
            let mut curvature = at_unit.slope - slope0;
            if curvature <= 0.0 {
                curvature = f64::MIN_POSITIVE;
            }
            let alpha = -slope0 / curvature;
            Some(probe(alpha))
        }
        LineSearch::StrongWolfe => {
            strong_wolfe(&mut probe, f0, slope0, trial, config.c1, config.c2)
        }
    }
}

fn wolfe_ok(p: &Point, f0: f64, slope0: f64, c1: f64, c2: f64) -> bool {
    p.value <= f0 + c1 * p.alpha * slope0 && p.slope.abs() <= -c2 * slope0
}

fn strong_wolfe(
    probe: &mut impl FnMut(f64) -> Point,
    f0: f64,
    slope0: f64,
    trial: f64,
    c1: f64,
    c2: f64,
) -> Option<Point> {
    const MAX_BRACKET: usize = 30;
    const MAX_ZOOM: usize = 50;
    const ALPHA_MAX: f64 = 1e12;

    let zoom = |probe: &mut dyn FnMut(f64) -> Point, mut lo: Point, mut hi_alpha: f64, mut hi_value: f64| -> Option<Point> {
        for _ in 0..MAX_ZOOM {
            let width = hi_alpha - lo.alpha;
            if width.abs() <= 1e-16 * (1.0 + lo.alpha.abs()) {
                break;
            }
            // Quadratic model through φ(lo), φ'(lo), φ(hi); safeguarded to
            // the interior, bisection when the model is unusable.
            let mut alpha = {
                let denom = hi_value - lo.value - lo.slope * width;
                if denom.is_finite() && denom != 0.0 {
                    lo.alpha - 0.5 * lo.slope * width * width / denom
                } else {
                    f64::NAN
                }
            };
            let (near, far) = (lo.alpha + 0.1 * width, hi_alpha - 0.1 * width);
            let inside = if width > 0.0 {
                (near..=far).contains(&alpha)
            } else {
                (far..=near).contains(&alpha)
            };
            if !alpha.is_finite() || !inside {
                alpha = 0.5 * (lo.alpha + hi_alpha);
            }
            let p = probe(alpha);
            if !p.value.is_finite() || p.value > f0 + c1 * alpha * slope0 || p.value >= lo.value {
                hi_alpha = alpha;
                hi_value = p.value;
            } else {
                if p.slope.abs() <= -c2 * slope0 {
                    return Some(p);
                }
                if p.slope * (hi_alpha - lo.alpha) >= 0.0 {
                    hi_alpha = lo.alpha;
                    hi_value = lo.value;
                }
                lo = p;
            }
        }
        let _ = hi_value;
        // Fall back to the best sufficient-decrease point found.
        if lo.alpha > 0.0 && lo.value < f0 {
            Some(lo)
        } else {
            None
        }
    };

    let mut prev_alpha = 0.0;
    let mut prev_value = f0;
    let mut alpha = trial.clamp(1e-300, ALPHA_MAX);
    for i in 0..MAX_BRACKET {
        let p = probe(alpha);
        if !p.value.is_finite() || p.value > f0 + c1 * alpha * slope0 || (i > 0 && p.value >= prev_value) {
            let lo = if prev_alpha == 0.0 {
                Point {
                    alpha: 0.0,
                    value: f0,
                    slope: slope0,
                    gradient: Vec::new(),
                }
            } else {
                probe(prev_alpha)
            };
            return zoom(&mut *probe, lo, p.alpha, p.value).filter(|p| !p.gradient.is_empty());
        }
        if p.slope.abs() <= -c2 * slope0 {
            return Some(p);
        }
        if p.slope >= 0.0 {
            return zoom(&mut *probe, p, prev_alpha, prev_value).filter(|p| !p.gradient.is_empty());
        }
        prev_alpha = alpha;
        prev_value = p.value;
        alpha = (2.0 * alpha).min(ALPHA_MAX);
        if alpha >= ALPHA_MAX {
            return Some(p).filter(|p| wolfe_ok(p, f0, slope0, c1, c2));
        }
    }
    None
}
