//! Shooting solver for the radial reduction `u_rr (u_r/r)^{n−1} = ψⁿ(r, u, u_r)`
//! with `u(R₊) = 0` and `u_r(R₋) = γ₀u(R₋) + φ`.
//!
//! The state is (u, s) with s = u_rⁿ, so that `s′ = nψⁿr^{n−1}` and
//! `u′ = s^{1/n}`. For ψ independent of u and u_r the s-equation is a
//! polynomial in r and the only singular behaviour (u′ ~ √ near R₋ for small
//! slopes) is confined to a smooth quadrature. Each grid interval is covered
//! by RK4 with recursive step doubling and Richardson correction.

use serde::Serialize;
use thiserror::Error;

use crate::closed_form::{phi_k_value, RadialConcentricND};
use crate::domain::{PhiSpec, ProblemSpec, PsiSpec};
use crate::MAX_DIM;

/// Smallest admissible inner slope.
pub const D_MIN: f64 = 1e-12;

const LOCAL_TOL: f64 = 1e-13;
const MAX_DEPTH: u32 = 30;
const BLOWUP: f64 = 1e150;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadialError {
    #[error("radial solver needs a concentric annulus")]
    UnsupportedDomain,
    #[error("boundary data is not rotationally invariant (spread {spread:e})")]
    NonRadialData { spread: f64 },
    #[error("inner slope {d:e} collapsed (minimum {min:e})")]
    SlopeCollapse { d: f64, min: f64 },
    #[error("local error control failed near r = {r}")]
    StepRejected { r: f64 },
    #[error("solution blew up near r = {r}")]
    Blowup { r: f64 },
    #[error("no sign change of the Neumann residual on [{d_lo:e}, {d_hi:e}] (G = {g_lo:e}, {g_hi:e})")]
    NoBracket { d_lo: f64, d_hi: f64, g_lo: f64, g_hi: f64 },
    #[error("no convergence after {iterations} iterations (|G| = {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("bad input: {0}")]
    BadInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileMeta {
    pub d_star: f64,
    /// |u_r(R₋) − γ₀u(R₋) − φ|
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialProfile {
    pub r_nodes: Vec<f64>,
    pub u: Vec<f64>,
    pub u_r: Vec<f64>,
    pub u_rr: Vec<f64>,
    pub meta: ProfileMeta,
}

impl RadialProfile {
    /// Rows `r,u,u_r,u_rr`.
    pub fn rows(&self) -> impl Iterator<Item = [f64; 4]> + '_ {
        (0..self.r_nodes.len()).map(move |i| [self.r_nodes[i], self.u[i], self.u_r[i], self.u_rr[i]])
    }

    fn cell(&self, r: f64) -> (usize, f64) {
        let n = self.r_nodes.len();
        let r = r.clamp(self.r_nodes[0], self.r_nodes[n - 1]);
        let i = match self.r_nodes.partition_point(|&x| x <= r) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        (i, r)
    }

    /// Quintic Hermite interpolation of u from (u, u_r, u_rr) at the nodes.
    pub fn value_quintic(&self, r: f64) -> f64 {
        let (i, r) = self.cell(r);
        let h = self.r_nodes[i + 1] - self.r_nodes[i];
        let t = (r - self.r_nodes[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let (t4, t5) = (t3 * t, t3 * t2);
        let basis = [
            1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5,
            t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5,
            0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5),
            10.0 * t3 - 15.0 * t4 + 6.0 * t5,
            -4.0 * t3 + 7.0 * t4 - 3.0 * t5,
            0.5 * (t3 - 2.0 * t4 + t5),
        ];
        basis[0] * self.u[i]
            + basis[1] * h * self.u_r[i]
            + basis[2] * h * h * self.u_rr[i]
            + basis[3] * self.u[i + 1]
            + basis[4] * h * self.u_r[i + 1]
            + basis[5] * h * h * self.u_rr[i + 1]
    }

    /// Cubic Hermite interpolation of (u, u_r) at r.
    pub fn interpolate(&self, r: f64) -> (f64, f64) {
        let (i, r) = self.cell(r);
        let (r0, r1) = (self.r_nodes[i], self.r_nodes[i + 1]);
        let h = r1 - r0;
        let t = (r - r0) / h;
        let (u0, u1, m0, m1) = (self.u[i], self.u[i + 1], self.u_r[i], self.u_r[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let u = (2.0 * t3 - 3.0 * t2 + 1.0) * u0 + (t3 - 2.0 * t2 + t) * h * m0 + (-2.0 * t3 + 3.0 * t2) * u1 + (t3 - t2) * h * m1;
        let du = ((6.0 * t2 - 6.0 * t) * u0 + (3.0 * t2 - 4.0 * t + 1.0) * h * m0 + (-6.0 * t2 + 6.0 * t) * u1 + (3.0 * t2 - 2.0 * t) * h * m1) / h;
        (u, du)
    }
}

/// Radial data extracted from a [`ProblemSpec`].
#[derive(Debug, Clone)]
pub struct RadialProblem {
    pub n: usize,
    pub r_inner: f64,
    pub r_outer: f64,
    pub gamma0: f64,
    pub phi: f64,
    pub psi: PsiSpec,
}

impl RadialProblem {
    /// Requires a concentric domain and φ constant on Γ⁻. ψ is evaluated
    /// along the ray through e₁ and must be rotationally invariant.
    pub fn from_spec(spec: &ProblemSpec) -> Result<Self, RadialError> {
        let dom = &spec.domain;
        if !dom.is_concentric() {
            return Err(RadialError::UnsupportedDomain);
        }
        let phi = match &spec.phi {
            PhiSpec::Constant(v) => *v,
            PhiSpec::Field(f) => {
                let vals: Vec<f64> = dom.inner_samples().iter().map(|(x, _)| f(x)).collect();
                let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if hi - lo > 1e-12 * hi.abs().max(1.0) {
                    return Err(RadialError::NonRadialData { spread: hi - lo });
                }
                vals[0]
            }
        };
        Ok(Self { n: spec.dim(), r_inner: dom.r_inner(), r_outer: dom.r_outer(), gamma0: spec.gamma0, phi, psi: spec.psi.clone() })
    }

    pub fn with_phi(&self, phi: f64) -> Self {
        Self { phi, ..self.clone() }
    }

    fn psi_n(&self, r: f64, u: f64, w: f64) -> f64 {
        let mut x = [0.0; MAX_DIM];
        let mut p = [0.0; MAX_DIM];
        x[0] = r;
        p[0] = w;
        self.psi.psi_n(&x[..self.n], u, &p[..self.n])
    }

    fn rhs(&self, r: f64, y: [f64; 2]) -> [f64; 2] {
        let w = y[1].max(0.0).powf(1.0 / self.n as f64);
        [w, self.n as f64 * self.psi_n(r, y[0], w) * r.powi(self.n as i32 - 1)]
    }

    fn rk4(&self, r: f64, y: [f64; 2], h: f64) -> [f64; 2] {
        let add = |a: [f64; 2], b: [f64; 2], s: f64| [a[0] + s * b[0], a[1] + s * b[1]];
        let k1 = self.rhs(r, y);
        let k2 = self.rhs(r + 0.5 * h, add(y, k1, 0.5 * h));
        let k3 = self.rhs(r + 0.5 * h, add(y, k2, 0.5 * h));
        let k4 = self.rhs(r + h, add(y, k3, h));
        [
            y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]
    }

    fn advance(&self, r: f64, y: [f64; 2], h: f64, depth: u32) -> Result<[f64; 2], RadialError> {
        let y1 = self.rk4(r, y, h);
        let yh = self.rk4(r, y, 0.5 * h);
        let y2 = self.rk4(r + 0.5 * h, yh, 0.5 * h);
        if !(y2[0].is_finite() && y2[1].is_finite()) || y2[1].abs() > BLOWUP {
            return Err(RadialError::Blowup { r });
        }
        let err = ((y2[0] - y1[0]).abs() / (1.0 + y2[0].abs())).max((y2[1] - y1[1]).abs() / (1.0 + y2[1].abs()));
        if err <= LOCAL_TOL {
            return Ok([y2[0] + (y2[0] - y1[0]) / 15.0, y2[1] + (y2[1] - y1[1]) / 15.0]);
        }
        if depth >= MAX_DEPTH {
            return Err(RadialError::StepRejected { r });
        }
        let mid = self.advance(r, y, 0.5 * h, depth + 1)?;
        self.advance(r + 0.5 * h, mid, 0.5 * h, depth + 1)
    }

    fn nodes(&self, count: usize) -> Vec<f64> {
        let h = (self.r_outer - self.r_inner) / (count - 1) as f64;
        (0..count).map(|i| if i + 1 == count { self.r_outer } else { self.r_inner + i as f64 * h }).collect()
    }

    /// One outward pass from u(R₋) = u_start; returns (u, s) at the nodes.
    fn sweep(&self, d: f64, u_start: f64, r: &[f64]) -> Result<(Vec<f64>, Vec<f64>), RadialError> {
        let mut y = [u_start, d.powi(self.n as i32)];
        let mut u = Vec::with_capacity(r.len());
        let mut s = Vec::with_capacity(r.len());
        u.push(y[0]);
        s.push(y[1]);
        for w in r.windows(2) {
            y = self.advance(w[0], y, w[1] - w[0], 0)?;
            if !(y[1] > 0.0) {
                return Err(RadialError::SlopeCollapse { d, min: D_MIN });
            }
            u.push(y[0]);
            s.push(y[1]);
        }
        Ok((u, s))
    }

    /// Integrates outward from slope d and fixes u(R₊) = 0.
    pub fn integrate_outward(&self, d: f64, nodes: usize) -> Result<RadialProfile, RadialError> {
        if !(d >= D_MIN) {
            return Err(RadialError::SlopeCollapse { d, min: D_MIN });
        }
        if nodes < 3 {
            return Err(RadialError::BadInput(format!("need at least 3 nodes, got {nodes}")));
        }
        let r = self.nodes(nodes);
        let (mut u, s) = if self.psi.depends_on_z() {
            let mut start = 0.0;
            let mut last = None;
            // u(R₊) depends on u(R₋) with slope close to 1, so the full
            // shift is a near-Newton update.
            for _ in 0..50 {
                let (u, s) = self.sweep(d, start, &r)?;
                let end = u[u.len() - 1];
                let done = end.abs() <= 1e-14 * (1.0 + start.abs());
                last = Some((u, s));
                if done {
                    break;
                }
                start -= end;
            }
            last.expect("at least one sweep")
        } else {
            self.sweep(d, 0.0, &r)?
        };
        let end = u[u.len() - 1];
        u.iter_mut().for_each(|v| *v -= end);
        let nf = self.n as f64;
        let u_r: Vec<f64> = s.iter().map(|v| v.powf(1.0 / nf)).collect();
        let u_rr: Vec<f64> = (0..r.len())
            .map(|i| self.psi_n(r[i], u[i], u_r[i]) * (r[i] / u_r[i]).powi(self.n as i32 - 1))
            .collect();
        let residual = (u_r[0] - self.gamma0 * u[0] - self.phi).abs();
        Ok(RadialProfile { r_nodes: r, u, u_r, u_rr, meta: ProfileMeta { d_star: d, residual, iterations: 0 } })
    }

    /// Neumann residual G(d) = d − γ₀u(R₋; d) − φ on a coarse 257-node pass.
    pub fn neumann_residual(&self, d: f64, nodes: usize) -> Result<f64, RadialError> {
        let p = self.integrate_outward(d, nodes)?;
        Ok(d - self.gamma0 * p.u[0] - self.phi)
    }

    /// φ_k(d) = d − γ₀u(R₋; d) for this ψ (closed form when ψ is constant).
    pub fn phi_for_slope(&self, d: f64, nodes: usize) -> Result<f64, RadialError> {
        if let Some(psi) = self.psi.constant_value() {
            let u_inner = if self.n == 2 {
                return phi_k_value(psi, self.gamma0, self.r_inner, self.r_outer, d)
                    .map_err(|e| RadialError::BadInput(e.to_string()));
            } else {
                RadialConcentricND::new(self.n, psi, self.r_inner, self.r_outer, d)
                    .map_err(|e| RadialError::BadInput(e.to_string()))?
                    .u(self.r_inner)
            };
            return Ok(d - self.gamma0 * u_inner);
        }
        Ok(d - self.gamma0 * self.integrate_outward(d, nodes)?.u[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShootOptions {
    pub d_lo: f64,
    pub d_hi: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub nodes: usize,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self { d_lo: 1e-9, d_hi: 10.0, tol: 1e-10, max_iter: 100, nodes: 1024 }
    }
}

/// G(d), with blow-up read as +∞ (G increases with d).
fn residual_or_inf(prob: &RadialProblem, d: f64, nodes: usize) -> Result<f64, RadialError> {
    match prob.neumann_residual(d, nodes) {
        Err(RadialError::Blowup { .. }) => Ok(f64::INFINITY),
        other => other,
    }
}

/// Root of G on [d_lo, d_hi]: log-space bisection to a 10⁻³ relative bracket,
/// then safeguarded Newton with a finite-difference G′.
pub fn shoot(prob: &RadialProblem, opts: &ShootOptions) -> Result<RadialProfile, RadialError> {
    let (mut lo, mut hi) = (opts.d_lo, opts.d_hi);
    if !(lo >= D_MIN && hi > lo) {
        return Err(RadialError::BadInput(format!("bad bracket [{lo:e}, {hi:e}]")));
    }
    let g_lo = residual_or_inf(prob, lo, opts.nodes)?;
    let g_hi = residual_or_inf(prob, hi, opts.nodes)?;
    if g_lo == 0.0 {
        return finish(prob, lo, 0, opts);
    }
    if g_hi == 0.0 {
        return finish(prob, hi, 0, opts);
    }
    if g_lo.signum() == g_hi.signum() || g_lo.is_nan() || g_hi.is_nan() {
        return Err(RadialError::NoBracket { d_lo: lo, d_hi: hi, g_lo, g_hi });
    }
    let increasing = g_hi > 0.0;
    let mut iterations = 0;
    while hi / lo > 1.001 {
        iterations += 1;
        let mid = (lo * hi).sqrt();
        let g = residual_or_inf(prob, mid, opts.nodes)?;
        if (g > 0.0) == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
        if iterations >= opts.max_iter {
            return Err(RadialError::MaxIterations { iterations, residual: g.abs() });
        }
    }
    let mut d = (lo * hi).sqrt();
    let mut g = prob.neumann_residual(d, opts.nodes)?;
    while g.abs() > opts.tol {
        iterations += 1;
        if iterations >= opts.max_iter {
            return Err(RadialError::MaxIterations { iterations, residual: g.abs() });
        }
        if (g > 0.0) == increasing {
            hi = d;
        } else {
            lo = d;
        }
        let delta = 1e-7 * d;
        let slope = (prob.neumann_residual(d + delta, opts.nodes)? - g) / delta;
        let mut next = d - g / slope;
        if !(next > lo && next < hi) || !slope.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - d).abs() <= 1e-16 * d {
            break;
        }
        d = next;
        g = prob.neumann_residual(d, opts.nodes)?;
    }
    finish(prob, d, iterations, opts)
}

fn finish(prob: &RadialProblem, d: f64, iterations: usize, opts: &ShootOptions) -> Result<RadialProfile, RadialError> {
    let mut p = prob.integrate_outward(d, opts.nodes)?;
    p.meta.iterations = iterations;
    if p.meta.residual > opts.tol {
        return Err(RadialError::MaxIterations { iterations, residual: p.meta.residual });
    }
    Ok(p)
}

/// Every root bracketed by a 64-point log scan of [d_lo, d_hi].
pub fn shoot_all(prob: &RadialProblem, opts: &ShootOptions) -> Result<Vec<RadialProfile>, RadialError> {
    let (lo, hi) = (opts.d_lo, opts.d_hi);
    if !(lo >= D_MIN && hi > lo) {
        return Err(RadialError::BadInput(format!("bad bracket [{lo:e}, {hi:e}]")));
    }
    let ds: Vec<f64> = (0..64).map(|i| lo * (hi / lo).powf(i as f64 / 63.0)).collect();
    let gs = ds.iter().map(|&d| residual_or_inf(prob, d, 257)).collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::new();
    for k in 0..63 {
        if gs[k].signum() != gs[k + 1].signum() {
            let sub = ShootOptions { d_lo: ds[k], d_hi: ds[k + 1], ..*opts };
            out.push(shoot(prob, &sub)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlowupRow {
    pub d: f64,
    pub phi_k: f64,
    /// Inner double-normal quantity: in the plane u_rr + u_r/R₋, otherwise u_rr.
    pub u_nn_inner: f64,
    pub u_rr_inner: f64,
    pub sup_grad: f64,
    pub d_star: f64,
}

/// For each d, solves with φ = φ_k(d) and reports the inner second derivatives.
pub fn blowup_sweep(prob: &RadialProblem, d_list: &[f64], nodes: usize) -> Result<Vec<BlowupRow>, RadialError> {
    d_list
        .iter()
        .map(|&d| {
            if !(d > 0.0) {
                return Err(RadialError::BadInput(format!("slopes must be positive, got {d}")));
            }
            let phi_k = prob.phi_for_slope(d, nodes)?;
            let sub = prob.with_phi(phi_k);
            let opts = ShootOptions { d_lo: (0.25 * d).max(D_MIN), d_hi: 4.0 * d, tol: 1e-13 * (1.0 + phi_k.abs()), max_iter: 100, nodes };
            let p = shoot(&sub, &opts)?;
            let u_rr = p.u_rr[0];
            let u_nn = if prob.n == 2 { u_rr + p.u_r[0] / prob.r_inner } else { u_rr };
            Ok(BlowupRow { d, phi_k, u_nn_inner: u_nn, u_rr_inner: u_rr, sup_grad: p.u_r[p.u_r.len() - 1], d_star: p.meta.d_star })
        })
        .collect()
}

/// max over interior nodes of |(u_rⁿ)′ − nψⁿr^{n−1}| using 4th-order
/// differences of the stored u_r, relative to 1 + |nψⁿr^{n−1}|.
pub fn ode_residual(prob: &RadialProblem, p: &RadialProfile) -> f64 {
    let n = prob.n as i32;
    let m = p.r_nodes.len();
    if m < 5 {
        return f64::NAN;
    }
    let h = p.r_nodes[1] - p.r_nodes[0];
    let s: Vec<f64> = p.u_r.iter().map(|w| w.powi(n)).collect();
    let mut worst: f64 = 0.0;
    for i in 2..m - 2 {
        let ds = (s[i - 2] - 8.0 * s[i - 1] + 8.0 * s[i + 1] - s[i + 2]) / (12.0 * h);
        let rhs = n as f64 * prob.psi_n(p.r_nodes[i], p.u[i], p.u_r[i]) * p.r_nodes[i].powi(n - 1);
        worst = worst.max((ds - rhs).abs() / (1.0 + rhs.abs()));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::{critical_phi, ClosedFormSolution, GradientBlowup, RadialConcentric2D};
    use crate::domain::AnnularDomain;
    use approx::assert_relative_eq;

    fn prob(n: usize, psi: f64, gamma0: f64, phi: f64) -> RadialProblem {
        let d = AnnularDomain::concentric(n, 1.0, 2.0).unwrap();
        RadialProblem::from_spec(&ProblemSpec::new(d, PsiSpec::Constant(psi), gamma0, PhiSpec::Constant(phi)).unwrap()).unwrap()
    }

    #[test]
    fn outward_matches_closed_form() {
        let p = prob(2, 1.0, 1.0, 0.0);
        let q = p.integrate_outward(1.0, 1024).unwrap();
        assert_relative_eq!(q.u_r[1023], 2.0, epsilon = 1e-12);
        for d in [1.0, 0.5, 0.1] {
            let cf = RadialConcentric2D::new(1.0, 1.0, 2.0, d).unwrap();
            let q = p.integrate_outward(d, 1024).unwrap();
            for (i, r) in q.r_nodes.iter().enumerate() {
                let (u, ur, urr) = cf.profile(*r);
                assert!((q.u[i] - u).abs() <= 1e-10, "d={d} r={r}");
                assert!((q.u_r[i] - ur).abs() <= 1e-10);
                assert!((q.u_rr[i] - urr).abs() <= 1e-10 * urr.max(1.0));
                assert!(q.u_r[i] > 0.0 && q.u_rr[i] > 0.0);
            }
            let ex = (0.25 + 0.0f64).sqrt();
            if d == 0.5 {
                assert_relative_eq!(q.u_r[0], ex, epsilon = 1e-15);
            }
        }
        let p3 = prob(3, 1.0, 1.0, 0.0);
        let q = p3.integrate_outward(0.1, 512).unwrap();
        assert_relative_eq!(q.u_rr[0], 100.0, max_relative = 1e-12);
    }

    #[test]
    fn fourth_order_convergence() {
        let p = prob(2, 1.0, 1.0, 0.0);
        let cf = RadialConcentric2D::new(1.0, 1.0, 2.0, 0.5).unwrap();
        // Fixed RK4 steps without adaptivity.
        let err = |m: usize| {
            let h = 1.0 / m as f64;
            let mut y = [0.0, 0.25];
            for i in 0..m {
                y = p.rk4(1.0 + i as f64 * h, y, h);
            }
            let exact = cf.profile(2.0).0 - cf.profile(1.0).0;
            (y[0] - exact).abs()
        };
        let (e1, e2) = (err(16), err(32));
        assert!(e1 / e2 >= 14.0, "{e1} {e2}");
    }

    #[test]
    fn shooting_recovers_slope() {
        for d in [1.0, 0.5, 0.1] {
            let phi = phi_k_value(1.0, 1.0, 1.0, 2.0, d).unwrap();
            let p = prob(2, 1.0, 1.0, phi);
            let q = shoot(&p, &ShootOptions::default()).unwrap();
            assert!((q.meta.d_star - d).abs() <= 1e-8, "{d}: {:?}", q.meta);
            assert!(ode_residual(&p, &q) <= 1e-8);
        }
    }

    #[test]
    fn below_critical_has_no_bracket() {
        let phi = 0.9 * critical_phi(1.0, 1.0, 1.0, 2.0).unwrap();
        let p = prob(2, 1.0, 1.0, phi);
        assert!(matches!(shoot(&p, &ShootOptions::default()), Err(RadialError::NoBracket { .. })));
    }

    #[test]
    fn shooting_map_increasing() {
        let p = prob(2, 1.0, 1.0, 2.0);
        let mut prev = f64::NEG_INFINITY;
        for k in 0..30 {
            let d = 1e-4 * 10f64.powf(k as f64 / 6.0);
            let g = p.neumann_residual(d, 257).unwrap();
            assert!(g > prev);
            prev = g;
        }
    }

    #[test]
    fn slope_collapse_guard() {
        let p = prob(2, 1.0, 1.0, 2.0);
        assert!(matches!(p.integrate_outward(1e-13, 64), Err(RadialError::SlopeCollapse { .. })));
    }

    #[test]
    fn blowup_sweep_matches_formula() {
        let p = prob(2, 1.0, 1.0, 0.0);
        let rows = blowup_sweep(&p, &[1.0, 1e-1, 1e-3], 1024).unwrap();
        for row in &rows {
            let expect = 1.0 / row.d + row.d;
            assert!((row.u_nn_inner - expect).abs() <= 1e-6 * expect, "{row:?}");
        }
        assert_relative_eq!(rows[0].u_nn_inner, 2.0, max_relative = 1e-9);
        assert_relative_eq!(rows[2].u_nn_inner, 1000.001, max_relative = 1e-9);
    }

    #[test]
    fn z_dependent_self_consistency() {
        let d = AnnularDomain::concentric(2, 1.0, 2.0).unwrap();
        let spec = ProblemSpec::new(d, PsiSpec::of_xz(|_, z| (1.0 + 0.2 * z.tanh()).max(0.1)), 1.0, PhiSpec::Constant(2.0)).unwrap();
        let p = RadialProblem::from_spec(&spec).unwrap();
        let q = shoot(&p, &ShootOptions::default()).unwrap();
        assert!(q.u[q.u.len() - 1].abs() <= 1e-12);
        assert!(ode_residual(&p, &q) <= 1e-8);
        assert!(q.u_rr.iter().all(|v| *v > 0.0) && q.u.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn gradient_dependent_family() {
        let fam = GradientBlowup::new(1.0, 1.5, 0.3).unwrap();
        let d = AnnularDomain::concentric(2, 1.0, 1.5).unwrap();
        let spec = ProblemSpec::new(d, PsiSpec::blowup_counterexample(), 1.0, PhiSpec::Constant(fam.phi(1.0))).unwrap();
        let p = RadialProblem::from_spec(&spec).unwrap();
        let roots = shoot_all(&p, &ShootOptions { d_lo: 1e-3, d_hi: 0.6, ..Default::default() }).unwrap();
        assert_eq!(roots.len(), 1);
        assert!((roots[0].meta.d_star - 0.3).abs() < 1e-8);
        assert_relative_eq!(roots[0].u_r[roots[0].u_r.len() - 1], fam.sup_grad(), max_relative = 1e-9);
    }

    #[test]
    fn hermite_interpolation_exact_on_cubics() {
        let p = prob(2, 1.0, 1.0, 0.0);
        let q = p.integrate_outward(1.0, 9).unwrap();
        let (u, du) = q.interpolate(1.3);
        assert_relative_eq!(q.value_quintic(1.3), 0.5 * (1.69 - 4.0), epsilon = 1e-12);
        assert_relative_eq!(u, 0.5 * (1.69 - 4.0), epsilon = 1e-12);
        assert_relative_eq!(du, 1.3, epsilon = 1e-12);
    }

    #[test]
    fn quintic_interpolation_is_sixth_order() {
        let sol = ClosedFormSolution::radial_2d(1.0, 1.0, 2.0, 0.5).unwrap();
        let p = prob(2, 1.0, 1.0, 0.0);
        let err = |nodes: usize| {
            let q = p.integrate_outward(0.5, nodes).unwrap();
            (0..50).map(|k| 1.0 + (k as f64 + 0.5) / 50.0).map(|r| (q.value_quintic(r) - sol.radial_profile(r).unwrap().0).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(17), err(33));
        assert!(e2 < 1e-8 && (e1 / e2).log2() > 5.0, "{e1} {e2}");
    }

    proptest::proptest! {
        #![proptest_config(proptest::test_runner::Config::with_cases(24))]
        #[test]
        fn shooting_recovers_generating_slope(d in 0.05f64..2.0, psi in 0.3f64..3.0, gamma0 in 0.2f64..3.0) {
            let cf = RadialConcentric2D::new(psi, 1.0, 2.0, d).unwrap();
            let phi = d - gamma0 * cf.profile(1.0).0;
            let q = shoot(&prob(2, psi, gamma0, phi), &ShootOptions { nodes: 256, ..ShootOptions::default() }).unwrap();
            proptest::prop_assert!((q.meta.d_star - d).abs() < 1e-8 * d.max(1.0));
            proptest::prop_assert!(q.u_r.iter().zip(&q.u_rr).all(|(&a, &b)| a > 0.0 && b > 0.0));
            proptest::prop_assert!(q.u.last().unwrap().abs() < 1e-10);
        }
    }
}
