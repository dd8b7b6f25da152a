//! Explicit time stepping for `−u_t det D²u = ψⁿ(x, u, Du)` with radial data
//! on a concentric annulus: `u = ϑ(t)` on the outer sphere and
//! `u_r = γ₀u + φ(x, t)` on the inner one.
//!
//! The radial determinant is `u_rr (u_r/r)^{n−1}`. `u_t` is recovered from
//! the equation itself, never by differencing in time; on the Dirichlet ring
//! it is the trace derivative `ϑ′(t)`.

use std::collections::VecDeque;

use serde::Serialize;
use thiserror::Error;

use crate::domain::{ProblemSpec, PsiSpec};
use crate::MAX_DIM;

pub const HISTORY_LEN: usize = 256;
pub const DET_FLOOR: f64 = 1e-12;
const CFL_SAFETY: f64 = 0.9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("flow solver needs a concentric annulus")]
    UnsupportedDomain,
    #[error("problem has no flow data")]
    MissingFlow,
    #[error("need at least 8 radial nodes, got {0}")]
    TooFewNodes(usize),
    #[error("convexity lost at r = {r} (u_r = {u_r:e}, u_rr = {u_rr:e})")]
    ConvexityLost { r: f64, u_r: f64, u_rr: f64 },
    #[error("det D²u = {det:e} below floor at r = {r}")]
    DeterminantFloor { r: f64, det: f64 },
    #[error("phi_t = {rate} is not positive at t = {t}")]
    PhiRateNotPositive { t: f64, rate: f64 },
    #[error("initial data is not an elliptic solution at t = 0 (residual {residual:e})")]
    InitialResidual { residual: f64 },
    #[error("invalid argument: {0}")]
    BadInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistoryEntry {
    pub t: f64,
    pub inner_trace: f64,
    pub outer_trace: f64,
    pub sup_abs_ut: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub n: usize,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    /// `−ψⁿ/det D²u` at every node but the outer one, which carries `ϑ′(t)`.
    pub ut: Vec<f64>,
    pub history: VecDeque<HistoryEntry>,
}

/// (u_r, u_rr) at node i; one-sided second-order at the ends.
fn derivs(u: &[f64], h: f64, i: usize) -> (f64, f64) {
    let m = u.len() - 1;
    if i == 0 {
        ((-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h), (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / (h * h))
    } else if i == m {
        (
            (3.0 * u[m] - 4.0 * u[m - 1] + u[m - 2]) / (2.0 * h),
            (2.0 * u[m] - 5.0 * u[m - 1] + 4.0 * u[m - 2] - u[m - 3]) / (h * h),
        )
    } else {
        ((u[i + 1] - u[i - 1]) / (2.0 * h), (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h))
    }
}

fn radial_psi_n(psi: &PsiSpec, n: usize, r: f64, z: f64, u_r: f64) -> f64 {
    let mut x = [0.0; MAX_DIM];
    let mut p = [0.0; MAX_DIM];
    x[0] = r;
    p[0] = u_r;
    psi.psi_n(&x[..n], z, &p[..n])
}

fn radial_det(n: usize, r: f64, u_r: f64, u_rr: f64) -> f64 {
    u_rr * (u_r / r).powi(n as i32 - 1)
}

/// Per node: (u_r, u_rr, det, ψⁿ), failing on lost convexity or a vanishing determinant.
fn node_terms(spec: &ProblemSpec, n: usize, r: &[f64], u: &[f64]) -> Result<Vec<(f64, f64, f64, f64)>, FlowError> {
    let h = r[1] - r[0];
    (0..u.len())
        .map(|i| {
            let (u_r, u_rr) = derivs(u, h, i);
            if !(u_r > 0.0 && u_rr > 0.0) {
                return Err(FlowError::ConvexityLost { r: r[i], u_r, u_rr });
            }
            let det = radial_det(n, r[i], u_r, u_rr);
            if det < DET_FLOOR {
                return Err(FlowError::DeterminantFloor { r: r[i], det });
            }
            Ok((u_r, u_rr, det, radial_psi_n(&spec.psi, n, r[i], u[i], u_r)))
        })
        .collect()
}

/// `−ψⁿ/det` at every node except the Dirichlet ring, where `u_t = ϑ′(t)`.
fn recover_ut(spec: &ProblemSpec, n: usize, r: &[f64], u: &[f64], t: f64) -> Result<Vec<f64>, FlowError> {
    let mut ut: Vec<f64> = node_terms(spec, n, r, u)?.into_iter().map(|(_, _, det, pn)| -pn / det).collect();
    if let Some(flow) = &spec.flow {
        *ut.last_mut().unwrap() = flow.theta_rate(t);
    }
    Ok(ut)
}

fn sup_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

impl FlowState {
    /// State at time 0 sampled from `u0` on `nodes` uniform radii.
    pub fn new(spec: &ProblemSpec, u0: &dyn Fn(f64) -> f64, nodes: usize) -> Result<Self, FlowError> {
        let dom = &spec.domain;
        if !dom.is_concentric() {
            return Err(FlowError::UnsupportedDomain);
        }
        if nodes < 8 {
            return Err(FlowError::TooFewNodes(nodes));
        }
        let (a, b) = (dom.r_inner(), dom.r_outer());
        let h = (b - a) / (nodes - 1) as f64;
        let r: Vec<f64> = (0..nodes).map(|i| if i + 1 == nodes { b } else { a + i as f64 * h }).collect();
        let u: Vec<f64> = r.iter().map(|&x| u0(x)).collect();
        let n = spec.dim();
        let ut = recover_ut(spec, n, &r, &u, 0.0)?;
        let mut s = Self { t: 0.0, n, r, u, ut, history: VecDeque::with_capacity(HISTORY_LEN) };
        s.record();
        Ok(s)
    }

    fn h(&self) -> f64 {
        self.r[1] - self.r[0]
    }

    fn record(&mut self) {
        if self.history.len() == HISTORY_LEN {
            self.history.pop_front();
        }
        self.history.push_back(HistoryEntry {
            t: self.t,
            inner_trace: self.u[0],
            outer_trace: *self.u.last().unwrap(),
            sup_abs_ut: sup_abs(&self.ut),
        });
    }

    pub fn sup_abs_u(&self) -> f64 {
        sup_abs(&self.u)
    }

    /// Largest stable explicit step: the smaller of the diffusion limit
    /// `h² u_rr / (2|u_t|)` (with a safety factor) and `0.5 min det/ψⁿ`.
    pub fn stability_cap(&self, spec: &ProblemSpec) -> Result<f64, FlowError> {
        let h = self.h();
        let terms = node_terms(spec, self.n, &self.r, &self.u)?;
        let mut cap = f64::INFINITY;
        for &(_, u_rr, det, pn) in &terms {
            if pn > 0.0 {
                let rate = pn / det;
                cap = cap.min(CFL_SAFETY * h * h * u_rr / (2.0 * rate)).min(0.5 / rate);
            }
        }
        Ok(cap)
    }
}

/// One explicit step of size `dt`; the caller is responsible for `dt ≤ stability_cap`.
pub fn step(state: &FlowState, spec: &ProblemSpec, dt: f64) -> Result<FlowState, FlowError> {
    let flow = spec.flow.as_ref().ok_or(FlowError::MissingFlow)?;
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(FlowError::BadInput(format!("dt must be nonnegative, got {dt}")));
    }
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let m = state.u.len() - 1;
    let h = state.h();
    let t1 = state.t + dt;
    let mut u = state.u.clone();
    for i in 1..m {
        u[i] += dt * state.ut[i];
    }
    u[m] = (flow.theta)(t1);
    // Robin is linear in u₀, so the boundary Newton correction is one exact solve.
    let mut x0 = [0.0; MAX_DIM];
    x0[0] = state.r[0];
    let phi = (flow.phi)(&x0[..state.n], t1);
    u[0] = (4.0 * u[1] - u[2] - 2.0 * h * phi) / (3.0 + 2.0 * h * spec.gamma0);
    let ut = recover_ut(spec, state.n, &state.r, &u, t1)?;
    let mut next = FlowState { t: t1, n: state.n, r: state.r.clone(), u, ut, history: state.history.clone() };
    next.record();
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesRow {
    pub t: f64,
    pub sup_abs_u: f64,
    pub sup_abs_ut: f64,
    pub min_abs_ut: f64,
    /// max over nodes of u(t) − u(t − dt); nonpositive for a decreasing flow.
    pub max_increase: f64,
    pub inner_trace: f64,
    pub outer_trace: f64,
    pub substeps: usize,
}

fn row(s: &FlowState, prev: Option<&[f64]>, substeps: usize) -> SeriesRow {
    SeriesRow {
        t: s.t,
        sup_abs_u: s.sup_abs_u(),
        sup_abs_ut: sup_abs(&s.ut),
        min_abs_ut: s.ut.iter().fold(f64::INFINITY, |m, x| m.min(x.abs())),
        max_increase: prev.map_or(0.0, |p| s.u.iter().zip(p).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max)),
        inner_trace: s.u[0],
        outer_trace: *s.u.last().unwrap(),
        substeps,
    }
}

/// Rejects data with φ_t ≤ 0 somewhere on `[0, horizon]`.
pub fn check_phi_rate(spec: &ProblemSpec, horizon: f64) -> Result<(), FlowError> {
    let flow = spec.flow.as_ref().ok_or(FlowError::MissingFlow)?;
    let n = spec.dim();
    let mut x = [0.0; MAX_DIM];
    x[0] = spec.domain.r_inner();
    for k in 0..=200 {
        let t = horizon * k as f64 / 200.0;
        let rate = flow.phi_rate(&x[..n], t);
        if !(rate > 0.0) {
            return Err(FlowError::PhiRateNotPositive { t, rate });
        }
    }
    Ok(())
}

/// max of the equation, Robin and Dirichlet residuals of `u0` at t = 0,
/// with derivatives from fine central differences on `u0` itself.
pub fn initial_residual(spec: &ProblemSpec, u0: &dyn Fn(f64) -> f64, samples: usize) -> Result<f64, FlowError> {
    let flow = spec.flow.as_ref().ok_or(FlowError::MissingFlow)?;
    let (a, b) = (spec.domain.r_inner(), spec.domain.r_outer());
    let n = spec.dim();
    let e = 1e-4 * (b - a);
    let mut res: f64 = 0.0;
    for k in 1..samples {
        let r = a + (b - a) * k as f64 / samples as f64;
        let (um, u, up) = (u0(r - e), u0(r), u0(r + e));
        let u_r = (up - um) / (2.0 * e);
        let u_rr = (up - 2.0 * u + um) / (e * e);
        let lhs = radial_det(n, r, u_r, u_rr);
        res = res.max((lhs - radial_psi_n(&spec.psi, n, r, u, u_r)).abs());
    }
    let slope = (-3.0 * u0(a) + 4.0 * u0(a + e) - u0(a + 2.0 * e)) / (2.0 * e);
    let mut x = [0.0; MAX_DIM];
    x[0] = a;
    res = res.max((slope - spec.gamma0 * u0(a) - (flow.phi)(&x[..n], 0.0)).abs());
    res = res.max((u0(b) - (flow.theta)(0.0)).abs());
    Ok(res)
}

/// Runs to `horizon` with nominal step `dt`. A step above the stability cap
/// is split into equal substeps. `observer` sees every accepted state.
pub fn run(
    spec: &ProblemSpec,
    u0: &dyn Fn(f64) -> f64,
    nodes: usize,
    horizon: f64,
    dt: f64,
    observer: &mut dyn FnMut(&FlowState),
) -> Result<(FlowState, Vec<SeriesRow>), FlowError> {
    if !(horizon >= 0.0 && horizon.is_finite()) || !(dt > 0.0) {
        return Err(FlowError::BadInput(format!("need horizon ≥ 0 and dt > 0, got {horizon}, {dt}")));
    }
    check_phi_rate(spec, horizon)?;
    let residual = initial_residual(spec, u0, 200)?;
    if residual > 1e-6 {
        return Err(FlowError::InitialResidual { residual });
    }
    let mut state = FlowState::new(spec, u0, nodes)?;
    let mut series = vec![row(&state, None, 0)];
    observer(&state);
    let steps = (horizon / dt - 1e-9).ceil().max(0.0) as usize;
    for k in 0..steps {
        let target = if k + 1 == steps { horizon } else { (k + 1) as f64 * dt };
        let big = target - state.t;
        let cap = state.stability_cap(spec)?;
        let sub = (big / cap).ceil().max(1.0) as usize;
        let prev = state.u.clone();
        for _ in 0..sub {
            state = step(&state, spec, big / sub as f64)?;
        }
        state.t = target;
        observer(&state);
        series.push(row(&state, Some(&prev), sub));
    }
    Ok((state, series))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UtAudit {
    pub min_abs_ut: f64,
    pub max_abs_ut: f64,
    pub violated: bool,
}

/// Lower witness and upper check `max|u_t| ≤ C^T + 1e-6` over a time series.
pub fn ut_bounds_audit(series: &[SeriesRow], ct_upper: f64) -> Result<UtAudit, FlowError> {
    if series.is_empty() {
        return Err(FlowError::BadInput("empty series".into()));
    }
    let min_abs_ut = series.iter().map(|r| r.min_abs_ut).fold(f64::INFINITY, f64::min);
    let max_abs_ut = series.iter().map(|r| r.sup_abs_ut).fold(0.0, f64::max);
    Ok(UtAudit { min_abs_ut, max_abs_ut, violated: max_abs_ut > ct_upper + 1e-6 || !(min_abs_ut > 0.0) })
}

/// max of |−u_t/√(1+|Du|²) − (1+|Du|²)^{(n+2)/2}/det D²u| over the nodes
/// where `u_t` comes from the equation (all but the Dirichlet ring).
pub fn igcf_identity_residual(state: &FlowState) -> f64 {
    let h = state.h();
    let n = state.n as f64;
    (0..state.u.len() - 1)
        .map(|i| {
            let (u_r, u_rr) = derivs(&state.u, h, i);
            let w = 1.0 + u_r * u_r;
            let det = radial_det(state.n, state.r[i], u_r, u_rr);
            (-state.ut[i] / w.sqrt() - w.powf((n + 2.0) / 2.0) / det).abs()
        })
        .fold(0.0, f64::max)
}

/// min over nodes of u − u̲ at the state's time; negative when the supplied
/// parabolic subsolution crosses the flow.
pub fn subsolution_gap(state: &FlowState, sub: &dyn Fn(f64, f64) -> f64) -> f64 {
    state.r.iter().zip(&state.u).map(|(&r, &u)| u - sub(r, state.t)).fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefinementRow {
    pub dt: f64,
    /// sup|u_dt − u_{dt/2}| at the horizon.
    pub difference: f64,
    pub order: Option<f64>,
}

/// Successive-halving study at a fixed spatial grid, starting from `dt0`.
pub fn time_refinement(
    spec: &ProblemSpec,
    u0: &dyn Fn(f64) -> f64,
    nodes: usize,
    horizon: f64,
    dt0: f64,
    levels: usize,
) -> Result<Vec<RefinementRow>, FlowError> {
    let finals: Vec<Vec<f64>> = (0..=levels)
        .map(|k| run(spec, u0, nodes, horizon, dt0 / 2f64.powi(k as i32), &mut |_| {}).map(|(s, _)| s.u))
        .collect::<Result<_, _>>()?;
    let mut rows: Vec<RefinementRow> = Vec::new();
    for k in 0..levels {
        let diff = sup_abs(&finals[k].iter().zip(&finals[k + 1]).map(|(a, b)| a - b).collect::<Vec<_>>());
        let order = rows.last().and_then(|p| (diff > 0.0 && p.difference > 0.0).then(|| (p.difference / diff).log2()));
        rows.push(RefinementRow { dt: dt0 / 2f64.powi(k as i32), difference: diff, order });
    }
    Ok(rows)
}
