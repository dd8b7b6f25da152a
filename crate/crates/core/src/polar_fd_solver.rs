//! Damped Newton solver for `det D²u = ψⁿ(x, u, Du)` on a concentric planar
//! annulus, discretised on a polar grid with standard second-order stencils.
//!
//! Unknowns are the rings 1..nr−2. The outer ring carries the Dirichlet value
//! and the inner ring is eliminated through the one-sided Robin stencil
//! `(−3u₀ + 4u₁ − u₂)/(2h) = γ₀u₀ + φ`. Angles are numbered 0, 1, N−1, 2,
//! N−2, … so that periodic neighbours stay within two slots and the Jacobian
//! is banded with half-bandwidth N + 2.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::banded::{BandError, BandMatrix};
use crate::closed_form::{polar_det, Field};
use crate::domain::{ProblemSpec, PsiSpec};
use crate::grid::{BoundaryData, GridField, PolarGrid};

pub const MIN_NODES: usize = 16;
const DAMPING_FLOOR: f64 = 1.0 / 1_048_576.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolarError {
    #[error("grid {nr}x{ntheta} is coarser than {MIN_NODES}x{MIN_NODES}")]
    GridTooCoarse { nr: usize, ntheta: usize },
    #[error("polar solver needs a concentric planar annulus")]
    UnsupportedDomain,
    #[error("field grid does not match the problem domain")]
    GridMismatch,
    #[error("Newton step lost convexity (min eigenvalue {min_eig:e}) at the damping floor")]
    DivergedNonConvex { min_eig: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("line search stalled at residual {residual:e}")]
    LineSearchStalled { residual: f64 },
    #[error(transparent)]
    Linear(#[from] BandError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NewtonReport {
    pub iterations: usize,
    pub final_residual_sup: f64,
    pub damping_history: Vec<f64>,
    pub residual_history: Vec<f64>,
    pub convexity_min_eig: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50 }
    }
}

/// Centred polar derivatives at an interior node.
#[derive(Debug, Clone, Copy)]
struct Stencil {
    u: f64,
    u_r: f64,
    u_rr: f64,
    u_t: f64,
    u_tt: f64,
    u_rt: f64,
}

fn stencil(f: &GridField, i: usize, j: usize) -> Stencil {
    let g = &f.grid;
    let (h, k) = (g.dr(), g.dtheta());
    let (jp, jm) = (g.jp(j), g.jm(j));
    let c = f.at(i, j);
    Stencil {
        u: c,
        u_r: (f.at(i + 1, j) - f.at(i - 1, j)) / (2.0 * h),
        u_rr: (f.at(i + 1, j) - 2.0 * c + f.at(i - 1, j)) / (h * h),
        u_t: (f.at(i, jp) - f.at(i, jm)) / (2.0 * k),
        u_tt: (f.at(i, jp) - 2.0 * c + f.at(i, jm)) / (k * k),
        u_rt: (f.at(i + 1, jp) - f.at(i + 1, jm) - f.at(i - 1, jp) + f.at(i - 1, jm)) / (4.0 * h * k),
    }
}

/// Cartesian point and gradient for polar derivatives.
fn cartesian(r: f64, theta: f64, u_r: f64, u_t: f64) -> ([f64; 2], [f64; 2]) {
    let (s, c) = theta.sin_cos();
    let w = u_t / r;
    ([r * c, r * s], [u_r * c - w * s, u_r * s + w * c])
}

/// Smallest eigenvalue of the Hessian reconstructed in the (e_r, e_θ) frame.
fn min_eig(s: &Stencil, r: f64) -> f64 {
    let a = s.u_rr;
    let b = (s.u_rt - s.u_t / r) / r;
    let c = s.u_r / r + s.u_tt / (r * r);
    0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt()
}

struct Setup {
    grid: PolarGrid,
    gamma0: f64,
    phi: Vec<f64>,
    outer: f64,
    psi: PsiSpec,
}

impl Setup {
    fn new(spec: &ProblemSpec, grid: PolarGrid) -> Result<Self, PolarError> {
        let dom = &spec.domain;
        if !dom.is_concentric() || dom.dim() != 2 {
            return Err(PolarError::UnsupportedDomain);
        }
        if grid.nr < MIN_NODES || grid.ntheta < MIN_NODES {
            return Err(PolarError::GridTooCoarse { nr: grid.nr, ntheta: grid.ntheta });
        }
        if (grid.r_inner - dom.r_inner()).abs() > 1e-12 || (grid.r_outer - dom.r_outer()).abs() > 1e-12 {
            return Err(PolarError::GridMismatch);
        }
        let phi = (0..grid.ntheta).map(|j| spec.phi.eval(&grid.point(0, j))).collect();
        Ok(Self { grid, gamma0: spec.gamma0, phi, outer: 0.0, psi: spec.psi.clone() })
    }

    fn robin_denominator(&self) -> f64 {
        3.0 + 2.0 * self.grid.dr() * self.gamma0
    }

    /// Sets the inner and outer rings from the unknown rings.
    fn apply_bc(&self, f: &mut GridField) {
        let g = self.grid;
        let h = g.dr();
        let c = self.robin_denominator();
        for j in 0..g.ntheta {
            let v = (4.0 * f.at(1, j) - f.at(2, j) - 2.0 * h * self.phi[j]) / c;
            f.values[g.index(0, j)] = v;
            f.values[g.index(g.nr - 1, j)] = self.outer;
        }
    }

    fn psi_n(&self, x: &[f64; 2], z: f64, p: &[f64; 2]) -> f64 {
        self.psi.psi_n(x, z, p)
    }

    /// (∂ψⁿ/∂z, ∂ψⁿ/∂p) by central differences; zero where ψ does not depend on them.
    fn psi_partials(&self, x: &[f64; 2], z: f64, p: &[f64; 2]) -> (f64, [f64; 2]) {
        let dz = if self.psi.depends_on_z() {
            let e = 1e-6 * (1.0 + z.abs());
            (self.psi_n(x, z + e, p) - self.psi_n(x, z - e, p)) / (2.0 * e)
        } else {
            0.0
        };
        let mut dp = [0.0; 2];
        if self.psi.depends_on_p() {
            for (k, slot) in dp.iter_mut().enumerate() {
                let e = 1e-6 * (1.0 + p[k].abs());
                let mut a = *p;
                let mut b = *p;
                a[k] += e;
                b[k] -= e;
                *slot = (self.psi_n(x, z, &a) - self.psi_n(x, z, &b)) / (2.0 * e);
            }
        }
        (dz, dp)
    }

    fn interior_residual(&self, f: &GridField, i: usize, j: usize) -> f64 {
        let g = &self.grid;
        let s = stencil(f, i, j);
        let r = g.r(i);
        let (x, p) = cartesian(r, g.theta(j), s.u_r, s.u_t);
        polar_det(s.u_r, s.u_rr, s.u_rt, s.u_t, s.u_tt, r) - self.psi_n(&x, s.u, &p)
    }

    fn residual_sup(&self, f: &GridField) -> f64 {
        let g = &self.grid;
        let mut m: f64 = 0.0;
        for i in 1..g.nr - 1 {
            for j in 0..g.ntheta {
                m = m.max(self.interior_residual(f, i, j).abs());
            }
        }
        m
    }

    fn min_convexity(&self, f: &GridField) -> f64 {
        let g = &self.grid;
        let mut m = f64::INFINITY;
        for i in 1..g.nr - 1 {
            for j in 0..g.ntheta {
                m = m.min(min_eig(&stencil(f, i, j), g.r(i)));
            }
        }
        m
    }
}

fn theta_slot(j: usize, n: usize) -> usize {
    if j == 0 {
        0
    } else if 2 * j <= n {
        2 * j - 1
    } else {
        2 * (n - j)
    }
}

fn unknown(grid: &PolarGrid, i: usize, j: usize) -> usize {
    (i - 1) * grid.ntheta + theta_slot(j, grid.ntheta)
}

/// Residual on every node: interior PDE, inner Robin (one-sided), outer Dirichlet.
pub fn discrete_residual(field: &GridField, spec: &ProblemSpec) -> Result<GridField, PolarError> {
    let setup = Setup::new(spec, field.grid)?;
    let g = field.grid;
    let h = g.dr();
    let mut out = GridField::zeros(g);
    for j in 0..g.ntheta {
        let slope = (-3.0 * field.at(0, j) + 4.0 * field.at(1, j) - field.at(2, j)) / (2.0 * h);
        out.values[g.index(0, j)] = slope - (setup.gamma0 * field.at(0, j) + setup.phi[j]);
        out.values[g.index(g.nr - 1, j)] = field.at(g.nr - 1, j) - setup.outer;
        for i in 1..g.nr - 1 {
            out.values[g.index(i, j)] = setup.interior_residual(field, i, j);
        }
    }
    Ok(out)
}

fn assemble(setup: &Setup, f: &GridField) -> Result<(BandMatrix, Vec<f64>), PolarError> {
    let g = setup.grid;
    let n = g.ntheta;
    let size = (g.nr - 2) * n;
    let mut jac = BandMatrix::zeros(size, n + 2, n + 2);
    let mut rhs = vec![0.0; size];
    let (h, k) = (g.dr(), g.dtheta());
    let c = setup.robin_denominator();
    for i in 1..g.nr - 1 {
        let r = g.r(i);
        for j in 0..n {
            let row = unknown(&g, i, j);
            let s = stencil(f, i, j);
            let theta = g.theta(j);
            let (x, p) = cartesian(r, theta, s.u_r, s.u_t);
            rhs[row] = -(polar_det(s.u_r, s.u_rr, s.u_rt, s.u_t, s.u_tt, r) - setup.psi_n(&x, s.u, &p));
            let m = s.u_rt - s.u_t / r;
            let (dz, dp) = setup.psi_partials(&x, s.u, &p);
            let (sn, cs) = theta.sin_cos();
            let d_ur = s.u_rr / r - (dp[0] * cs + dp[1] * sn);
            let d_urr = s.u_r / r + s.u_tt / (r * r);
            let d_utt = s.u_rr / (r * r);
            let d_urt = -2.0 * m / (r * r);
            let d_ut = 2.0 * m / (r * r * r) - (-dp[0] * sn + dp[1] * cs) / r;
            let (jp, jm) = (g.jp(j), g.jm(j));
            let mut coeffs: Vec<(usize, usize, f64)> = vec![
                (i, j, -2.0 * d_urr / (h * h) - 2.0 * d_utt / (k * k) - dz),
                (i + 1, j, d_ur / (2.0 * h) + d_urr / (h * h)),
                (i - 1, j, -d_ur / (2.0 * h) + d_urr / (h * h)),
                (i, jp, d_ut / (2.0 * k) + d_utt / (k * k)),
                (i, jm, -d_ut / (2.0 * k) + d_utt / (k * k)),
            ];
            let q = d_urt / (4.0 * h * k);
            coeffs.extend([(i + 1, jp, q), (i + 1, jm, -q), (i - 1, jp, -q), (i - 1, jm, q)]);
            for (ii, jj, v) in coeffs {
                if ii == g.nr - 1 {
                    continue;
                }
                if ii == 0 {
                    jac.add(row, unknown(&g, 1, jj), 4.0 * v / c)?;
                    jac.add(row, unknown(&g, 2, jj), -v / c)?;
                } else {
                    jac.add(row, unknown(&g, ii, jj), v)?;
                }
            }
        }
    }
    Ok((jac, rhs))
}

/// Sampled ψ_ref(r² − R₊²)/2 with ψ_ref the constant ψ (or 1).
pub fn default_init(spec: &ProblemSpec, grid: PolarGrid) -> GridField {
    let psi_ref = spec.psi.constant_value().unwrap_or(1.0);
    GridField::quadratic(grid, psi_ref)
}

/// Damped Newton with Armijo backtracking on the residual sup-norm.
pub fn newton_solve(spec: &ProblemSpec, init: &GridField, opts: &NewtonOptions) -> Result<(GridField, NewtonReport), PolarError> {
    let setup = Setup::new(spec, init.grid)?;
    let g = setup.grid;
    let mut f = init.clone();
    setup.apply_bc(&mut f);
    let mut res = setup.residual_sup(&f);
    let mut report = NewtonReport {
        iterations: 0,
        final_residual_sup: res,
        damping_history: Vec::new(),
        residual_history: vec![res],
        convexity_min_eig: setup.min_convexity(&f),
    };
    while res > opts.tol {
        if report.iterations >= opts.max_iter {
            return Err(PolarError::MaxIterations { iterations: report.iterations, residual: res });
        }
        report.iterations += 1;
        let (jac, rhs) = assemble(&setup, &f)?;
        let delta = jac.factor()?.solve(&rhs);
        let mut alpha = 1.0;
        let mut last_eig;
        let (next, next_res) = loop {
            let mut trial = f.clone();
            for i in 1..g.nr - 1 {
                for j in 0..g.ntheta {
                    trial.values[g.index(i, j)] += alpha * delta[unknown(&g, i, j)];
                }
            }
            setup.apply_bc(&mut trial);
            let eig = setup.min_convexity(&trial);
            last_eig = eig;
            if eig > 0.0 {
                let tr = setup.residual_sup(&trial);
                if tr <= (1.0 - 1e-4 * alpha) * res {
                    break (trial, tr);
                }
            }
            alpha *= 0.5;
            if alpha < DAMPING_FLOOR {
                if !(last_eig > 0.0) {
                    return Err(PolarError::DivergedNonConvex { min_eig: last_eig });
                }
                return Err(PolarError::LineSearchStalled { residual: res });
            }
        };
        f = next;
        res = next_res;
        report.damping_history.push(alpha);
        report.residual_history.push(res);
        report.convexity_min_eig = last_eig;
    }
    report.final_residual_sup = res;
    f.bc = Some(BoundaryData { outer_dirichlet: setup.outer, gamma0: setup.gamma0, phi: setup.phi.clone() });
    Ok((f, report))
}

/// Inner slope (−3u₀ + 4u₁ − u₂)/(2h) averaged over the inner ring.
pub fn inner_slope(f: &GridField) -> f64 {
    let g = &f.grid;
    let h = g.dr();
    (0..g.ntheta).map(|j| (-3.0 * f.at(0, j) + 4.0 * f.at(1, j) - f.at(2, j)) / (2.0 * h)).sum::<f64>() / g.ntheta as f64
}

/// max over nodes of |u − u_exact|.
pub fn sup_error(f: &GridField, exact: &dyn Field) -> f64 {
    let g = &f.grid;
    let mut m: f64 = 0.0;
    for i in 0..g.nr {
        for j in 0..g.ntheta {
            m = m.max((f.at(i, j) - exact.jet(&g.point(i, j)).u).abs());
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub nr: usize,
    pub ntheta: usize,
    pub h: f64,
    pub sup_error: f64,
    pub iterations: usize,
    /// log(e_prev/e)/log(h_prev/h); `None` on the first grid or when either
    /// error is at rounding level.
    pub order: Option<f64>,
    /// Set when the order is undefined or below 1.8.
    pub flagged: bool,
}

/// Solves on each grid from the default start and compares with `exact`.
pub fn convergence_study(
    spec: &ProblemSpec,
    exact: &dyn Field,
    grids: &[(usize, usize)],
    opts: &NewtonOptions,
) -> Result<Vec<StudyRow>, PolarError> {
    let dom = &spec.domain;
    let mut rows: Vec<StudyRow> = Vec::new();
    for &(nr, nt) in grids {
        let grid = PolarGrid::new(nr, nt, dom.r_inner(), dom.r_outer());
        let (f, rep) = newton_solve(spec, &default_init(spec, grid), opts)?;
        let err = sup_error(&f, exact);
        let h = grid.dr();
        let order = rows.last().and_then(|prev| {
            (prev.sup_error > 1e-12 && err > 1e-12).then(|| (prev.sup_error / err).ln() / (prev.h / h).ln())
        });
        let flagged = rows.last().is_some() && order.is_none_or(|o| o < 1.8);
        rows.push(StudyRow { nr, ntheta: nt, h, sup_error: err, iterations: rep.iterations, order, flagged });
    }
    Ok(rows)
}

/// ∫_{Du(Ω)} (1+|p|²)^{−2} dp for a radial field with inner and outer
/// slopes a < b, where Du(Ω) is the annulus a ≤ |p| ≤ b.
pub fn radial_gauss_image(a: f64, b: f64) -> f64 {
    PI * (1.0 / (1.0 + a * a) - 1.0 / (1.0 + b * b))
}

/// Mean one-sided outer slope (3u_N − 4u_{N−1} + u_{N−2})/(2h).
pub fn outer_slope(f: &GridField) -> f64 {
    let g = &f.grid;
    let h = g.dr();
    let n = g.nr - 1;
    (0..g.ntheta).map(|j| (3.0 * f.at(n, j) - 4.0 * f.at(n - 1, j) + f.at(n - 2, j)) / (2.0 * h)).sum::<f64>() / g.ntheta as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::{critical_phi, phi_k_value, ClosedFormSolution};
    use crate::conditions::integrate_over_domain;
    use crate::domain::{AnnularDomain, PhiSpec};
    use approx::assert_relative_eq;

    fn benchmark(d: f64) -> (ProblemSpec, ClosedFormSolution) {
        let sol = ClosedFormSolution::radial_2d(1.0, 1.0, 2.0, d).unwrap();
        let phi = phi_k_value(1.0, 1.0, 1.0, 2.0, d).unwrap();
        (ProblemSpec::new(sol.domain(), PsiSpec::Constant(1.0), 1.0, PhiSpec::Constant(phi)).unwrap(), sol)
    }

    fn sample(sol: &ClosedFormSolution, grid: PolarGrid) -> GridField {
        GridField::from_fn(grid, |r, t| sol.jet(&[r * t.cos(), r * t.sin()]).u)
    }

    #[test]
    fn theta_ordering_is_a_permutation_with_short_hops() {
        for n in [16, 17, 32] {
            let mut seen = vec![false; n];
            for j in 0..n {
                let s = theta_slot(j, n);
                assert!(!seen[s]);
                seen[s] = true;
                let nb = theta_slot((j + 1) % n, n);
                assert!((s as isize - nb as isize).abs() <= 2);
            }
        }
    }

    #[test]
    fn residual_of_exact_fields() {
        let (spec, sol) = benchmark(1.0);
        let grid = PolarGrid::new(16, 16, 1.0, 2.0);
        let res = discrete_residual(&sample(&sol, grid), &spec).unwrap();
        for i in 1..grid.nr - 1 {
            for j in 0..grid.ntheta {
                assert!(res.at(i, j).abs() <= 1e-12);
            }
        }
        let zero = GridField::zeros(grid);
        let r0 = discrete_residual(&zero, &spec).unwrap();
        assert_relative_eq!(r0.at(0, 3), -2.5, epsilon = 1e-14);
        assert_eq!(r0.at(15, 3), 0.0);
        assert_relative_eq!(r0.at(5, 3), -1.0, epsilon = 1e-14);
        let small = PolarGrid::new(8, 16, 1.0, 2.0);
        assert!(matches!(discrete_residual(&GridField::zeros(small), &spec), Err(PolarError::GridTooCoarse { .. })));
    }

    #[test]
    fn residual_converges_second_order() {
        let (spec, sol) = benchmark(0.5);
        let errs: Vec<f64> = [32, 64, 128, 256]
            .iter()
            .map(|&n| {
                let grid = PolarGrid::new(n + 1, n, 1.0, 2.0);
                let res = discrete_residual(&sample(&sol, grid), &spec).unwrap();
                res.sup_abs()
            })
            .collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.8, "{errs:?}");
        }
    }

    #[test]
    fn quadratic_from_exact_start() {
        let (spec, sol) = benchmark(1.0);
        let grid = PolarGrid::new(32, 32, 1.0, 2.0);
        let (f, rep) = newton_solve(&spec, &sample(&sol, grid), &NewtonOptions::default()).unwrap();
        assert!(rep.iterations <= 3, "{rep:?}");
        assert!(sup_error(&f, &sol) <= 1e-10);
    }

    #[test]
    fn newton_benchmark_small() {
        let (spec, sol) = benchmark(0.5);
        let grid = PolarGrid::new(32, 32, 1.0, 2.0);
        let (f, rep) = newton_solve(&spec, &default_init(&spec, grid), &NewtonOptions::default()).unwrap();
        assert!(rep.final_residual_sup <= 1e-10);
        assert!(rep.convexity_min_eig > 0.0);
        assert!(sup_error(&f, &sol) < 1e-2);
        assert!((inner_slope(&f) - 0.5).abs() < 1e-2);
        let res = discrete_residual(&f, &spec).unwrap();
        for j in 0..grid.ntheta {
            assert!(res.at(0, j).abs() <= 1e-8);
        }
        for w in rep.residual_history.windows(2) {
            if w[0] < 1e-2 {
                assert!(w[1] <= 0.1 * w[0], "{:?}", rep.residual_history);
            }
        }
    }

    #[test]
    fn rotation_equivariance() {
        let d = AnnularDomain::concentric(2, 1.0, 2.0).unwrap();
        let n = 16;
        let shift = 3;
        let dt = 2.0 * PI / n as f64;
        let mk = |offset: f64| {
            ProblemSpec::new(d.clone(), PsiSpec::Constant(1.0), 1.0, PhiSpec::field(move |x| 2.0 + 0.2 * (x[1].atan2(x[0]) - offset).cos()))
                .unwrap()
        };
        let grid = PolarGrid::new(16, n, 1.0, 2.0);
        let s0 = mk(0.0);
        let s1 = mk(shift as f64 * dt);
        let (a, _) = newton_solve(&s0, &default_init(&s0, grid), &NewtonOptions::default()).unwrap();
        let (b, _) = newton_solve(&s1, &default_init(&s1, grid), &NewtonOptions::default()).unwrap();
        for i in 0..grid.nr {
            for j in 0..n {
                assert!((a.at(i, j) - b.at(i, (j + shift) % n)).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn below_critical_fails_or_is_recorded() {
        let phi = 0.9 * critical_phi(1.0, 1.0, 1.0, 2.0).unwrap();
        let d = AnnularDomain::concentric(2, 1.0, 2.0).unwrap();
        let spec = ProblemSpec::new(d, PsiSpec::Constant(1.0), 1.0, PhiSpec::Constant(phi)).unwrap();
        let grid = PolarGrid::new(16, 16, 1.0, 2.0);
        // Either outcome is acceptable; only record it.
        let _ = newton_solve(&spec, &default_init(&spec, grid), &NewtonOptions::default());
    }

    #[test]
    fn gauss_curvature_image_identity() {
        let k0 = 0.05;
        let d = AnnularDomain::concentric(2, 1.0, 2.0).unwrap();
        let spec = ProblemSpec::new(d.clone(), PsiSpec::gauss_curvature(move |_| k0), 1.0, PhiSpec::Constant(1.0)).unwrap();
        let grid = PolarGrid::new(48, 16, 1.0, 2.0);
        let init = GridField::quadratic(grid, 0.3);
        let (f, rep) = newton_solve(&spec, &init, &NewtonOptions::default()).unwrap();
        assert!(rep.final_residual_sup <= 1e-10);
        let int_k = integrate_over_domain(&d, &|_| k0, 1e-10).unwrap();
        let image = radial_gauss_image(inner_slope(&f), outer_slope(&f));
        assert!((image - int_k).abs() <= 0.02 * int_k, "{image} vs {int_k}");
    }
}
