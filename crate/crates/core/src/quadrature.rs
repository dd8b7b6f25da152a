//! Composite Gauss-Legendre quadrature with adaptive bisection.
//!
//! Panels use a fixed 16-node rule. A panel is accepted once the two-half
//! estimate agrees with the single-panel estimate to the requested relative
//! tolerance. Semi-infinite ranges are split into dyadic shells and truncated
//! once a shell contributes less than `shell_cutoff` of the running total.
//! Evaluation order is fixed, so results are bitwise reproducible.

use std::f64::consts::PI;
use std::sync::OnceLock;

use thiserror::Error;

const NODES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("adaptive quadrature did not converge on [{a}, {b}] (estimate {estimate}, error {error})")]
    NotConverged { a: f64, b: f64, estimate: f64, error: f64 },
    #[error("integrand is not integrable on [{start}, inf): shells stopped decaying after {shells} shells")]
    NotIntegrable { start: f64, shells: usize },
    #[error("integrand produced a non-finite value at {at}")]
    NonFinite { at: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: usize,
    /// Relative size below which an outer shell ends the semi-infinite sum.
    pub shell_cutoff: f64,
    pub max_shells: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-300,
            max_depth: 40,
            shell_cutoff: 1e-12,
            max_shells: 400,
        }
    }
}

impl QuadOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self { rel_tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

struct Rule {
    nodes: [f64; NODES],
    weights: [f64; NODES],
}

fn rule() -> &'static Rule {
    static RULE: OnceLock<Rule> = OnceLock::new();
    RULE.get_or_init(|| {
        let mut nodes = [0.0; NODES];
        let mut weights = [0.0; NODES];
        let n = NODES as f64;
        for i in 0..NODES / 2 {
            // Newton on P_n starting from the Tricomi approximation.
            let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(NODES, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(NODES, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[NODES - 1 - i] = x;
            weights[i] = w;
            weights[NODES - 1 - i] = w;
        }
        Rule { nodes, weights }
    })
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    let dp = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn panel<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<f64, QuadratureError> {
    let r = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut sum = 0.0;
    for k in 0..NODES {
        let x = mid + half * r.nodes[k];
        let fx = f(x);
        if !fx.is_finite() {
            return Err(QuadratureError::NonFinite { at: x });
        }
        sum += r.weights[k] * fx;
    }
    Ok(sum * half)
}

/// Fixed 16-node rule on a single panel (no adaptivity).
pub fn gauss_legendre_panel<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> Result<f64, QuadratureError> {
    panel(&mut f, a, b)
}

/// Adaptive integral of `f` over the finite interval `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<QuadResult, QuadratureError> {
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let whole = panel(&mut f, a, b)?;
    let mut evaluations = NODES;
    // Depth-first stack; pushing right before left keeps left-to-right order.
    let mut stack = vec![(a, b, whole, 0usize)];
    let mut value = 0.0;
    let mut error = 0.0;
    let scale = whole.abs();
    while let Some((lo, hi, est, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = panel(&mut f, lo, mid)?;
        let right = panel(&mut f, mid, hi)?;
        evaluations += 2 * NODES;
        let refined = left + right;
        let diff = (refined - est).abs();
        let width_frac = ((hi - lo) / (b - a)).abs();
        let local_tol = (opts.rel_tol * scale.max(refined.abs())).max(opts.abs_tol) * width_frac.sqrt();
        if diff <= local_tol || diff <= 4.0 * f64::EPSILON * refined.abs().max(scale) * width_frac {
            value += refined;
            error += diff;
        } else if depth >= opts.max_depth {
            return Err(QuadratureError::NotConverged { a: lo, b: hi, estimate: refined, error: diff });
        } else {
            stack.push((mid, hi, right, depth + 1));
            stack.push((lo, mid, left, depth + 1));
        }
    }
    Ok(QuadResult { value, error, evaluations })
}

/// Adaptive integral of `f` over `[start, inf)` by dyadic shells.
///
/// Shell k covers `[start + 2^k - 1, start + 2^(k+1) - 1]`. Summation stops
/// when a shell is below `shell_cutoff` times the running total; if shells
/// keep growing (ratio >= 1 for eight consecutive shells past the first ten)
/// the integrand is reported as not integrable.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    start: f64,
    opts: &QuadOptions,
) -> Result<QuadResult, QuadratureError> {
    let mut total = 0.0;
    let mut error = 0.0;
    let mut evaluations = 0;
    let mut prev_shell: Option<f64> = None;
    let mut growing = 0usize;
    for k in 0..opts.max_shells {
        let lo = start + (2f64.powi(k as i32) - 1.0);
        let hi = start + (2f64.powi(k as i32 + 1) - 1.0);
        let shell = integrate(&mut f, lo, hi, opts)?;
        total += shell.value;
        error += shell.error;
        evaluations += shell.evaluations;
        let size = shell.value.abs();
        if k >= 3 && size <= opts.shell_cutoff * total.abs() {
            return Ok(QuadResult { value: total, error, evaluations });
        }
        if let Some(prev) = prev_shell {
            if k >= 10 && size >= prev && size > 0.0 {
                growing += 1;
            } else {
                growing = 0;
            }
        }
        if growing >= 8 {
            return Err(QuadratureError::NotIntegrable { start, shells: k + 1 });
        }
        prev_shell = Some(size);
        if !hi.is_finite() {
            break;
        }
    }
    Err(QuadratureError::NotIntegrable { start, shells: opts.max_shells })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_weights_sum_to_two() {
        let r = rule();
        let s: f64 = r.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        for w in r.nodes.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn single_panel_exact_for_degree_31() {
        let v = gauss_legendre_panel(|x| x.powi(30) + x.powi(31), -1.0, 1.0).unwrap();
        assert!((v - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_sqrt_endpoint() {
        let v = integrate(|x: f64| x.sqrt(), 0.0, 1.0, &QuadOptions::default()).unwrap();
        assert!((v.value - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn exponential_tail() {
        let v = integrate_to_infinity(|x: f64| (-x).exp(), 0.0, &QuadOptions::default()).unwrap();
        assert!((v.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn growing_integrand_rejected() {
        let r = integrate_to_infinity(|x: f64| x / (1.0 + x), 0.0, &QuadOptions::default());
        assert!(matches!(r, Err(QuadratureError::NotIntegrable { .. })));
    }

    #[test]
    fn log_divergence_not_converged() {
        let r = integrate(|x: f64| 1.0 / x, 0.0, 1.0, &QuadOptions::default());
        assert!(matches!(r, Err(QuadratureError::NotConverged { .. })));
    }
}
