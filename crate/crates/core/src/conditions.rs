//! Numeric checkers for the solvability and structure conditions. Each
//! returns a [`ConditionReport`] whose margin is positive when the condition
//! holds on the sample.
//!
//! Boundary extrema are taken over dense samples (720 points on Γ⁻ in 2-D,
//! a 1282-node sphere mesh in 3-D) with golden-section refinement in 2-D.
//! This is an approximation, not a certificate.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::closed_form::Field;
use crate::domain::{geodesic_point, AnnularDomain, DomainError, ProblemSpec, PsiSpec};
use crate::quadrature::{integrate, integrate_to_infinity, QuadOptions, QuadratureError};
use crate::sampling::{golden_section_min, sphere_directions, tangent_directions};
use crate::{sub, unit_ball_volume, unit_sphere_area};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConditionError {
    #[error("gamma0 must be positive for this condition")]
    GammaZero,
    #[error("denominator {value:e} is not positive at {at:?}")]
    DenominatorSignError { value: f64, at: Vec<f64> },
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("no root: structure margin {margin:e} is not positive")]
    NoRoot { margin: f64 },
    #[error("finite-difference estimates disagree by {disagreement:e}; reduce the step")]
    StepTooLarge { disagreement: f64 },
    #[error("negative K = {value:e} at {at:?}")]
    NegativeK { value: f64, at: Vec<f64> },
    #[error("integrand not integrable: {0}")]
    NotIntegrable(#[from] QuadratureError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConditionId {
    Curvature,
    CurvatureDu,
    Structure,
    StructureGradient,
    Subsolution,
    FlowSubsolution,
    PrescribedGauss,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub label: String,
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub condition_id: ConditionId,
    pub satisfied: bool,
    pub margin: f64,
    pub constants_used: BTreeMap<String, f64>,
    pub samples: Vec<Sample>,
}

impl ConditionReport {
    fn new(condition_id: ConditionId, margin: f64, constants: &[(&str, f64)], samples: Vec<Sample>) -> Self {
        Self {
            condition_id,
            satisfied: margin > 0.0,
            margin,
            constants_used: constants.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            samples,
        }
    }
}

/// Minimum of `f` over Γ⁻; returns (value, argmin).
pub fn min_over_inner(domain: &AnnularDomain, f: &dyn Fn(&[f64]) -> f64) -> (f64, Vec<f64>) {
    let samples = domain.inner_samples();
    let mut best = (f64::INFINITY, 0usize);
    for (k, (x, _)) in samples.iter().enumerate() {
        let v = f(x);
        if v < best.0 {
            best = (v, k);
        }
    }
    let mut arg = samples[best.1].0.clone();
    let mut val = best.0;
    if domain.dim() == 2 {
        let step = 2.0 * PI / samples.len() as f64;
        let nu = &samples[best.1].1;
        let t0 = nu[1].atan2(nu[0]);
        let (t, v) = golden_section_min(|t| f(&domain.inner_point_2d(t)), t0 - step, t0 + step, 1e-12);
        if v < val {
            val = v;
            arg = domain.inner_point_2d(t);
        }
    }
    (val, arg)
}

fn max_curvature(domain: &AnnularDomain) -> Result<f64, ConditionError> {
    let mut kmax: f64 = 0.0;
    for (x, nu) in domain.inner_samples().iter().step_by(8) {
        for xi in tangent_directions(nu, 6) {
            kmax = kmax.max(domain.normal_curvature(x, &xi)?);
        }
    }
    Ok(kmax)
}

/// 2κ_ξ < γ₀ + max{0, min_{Γ⁻}(γ₀u + φ)/(M − u)}.
pub fn check_curvature(
    spec: &ProblemSpec,
    u_on_inner: &dyn Fn(&[f64]) -> f64,
    m: f64,
) -> Result<ConditionReport, ConditionError> {
    curvature_common(spec, u_on_inner, ConditionId::Curvature, m, -1.0, 0.0, &[("M", m)])
}

/// 2κ_ξ + C̃ < γ₀ + max{0, min_{Γ⁻}(γ₀u + φ)/(M̃ + (1 − N⁴)u)}.
pub fn check_curvature_du(
    spec: &ProblemSpec,
    u_on_inner: &dyn Fn(&[f64]) -> f64,
    m_tilde: f64,
    n: f64,
    c_tilde: f64,
) -> Result<ConditionReport, ConditionError> {
    if !(n >= 1.0) {
        return Err(ConditionError::BadParameter(format!("N must be at least 1, got {n}")));
    }
    let constants = [("M_tilde", m_tilde), ("N", n), ("C_tilde", c_tilde)];
    curvature_common(spec, u_on_inner, ConditionId::CurvatureDu, m_tilde, 1.0 - n.powi(4), c_tilde, &constants)
}

fn curvature_common(
    spec: &ProblemSpec,
    u: &dyn Fn(&[f64]) -> f64,
    id: ConditionId,
    m: f64,
    factor: f64,
    c_tilde: f64,
    extra: &[(&str, f64)],
) -> Result<ConditionReport, ConditionError> {
    if !(spec.gamma0 > 0.0) {
        return Err(ConditionError::GammaZero);
    }
    let g0 = spec.gamma0;
    let denom = |x: &[f64]| m + factor * u(x);
    for (x, _) in spec.domain.inner_samples() {
        let d = denom(&x);
        if !(d > 0.0) {
            return Err(ConditionError::DenominatorSignError { value: d, at: x });
        }
    }
    let ratio = |x: &[f64]| (g0 * u(x) + spec.phi.eval(x)) / denom(x);
    let (min_ratio, arg) = min_over_inner(&spec.domain, &ratio);
    let kappa = max_curvature(&spec.domain)?;
    let margin = g0 + min_ratio.max(0.0) - 2.0 * kappa - c_tilde;
    let mut constants = vec![("gamma0", g0), ("kappa_max", kappa), ("min_ratio", min_ratio)];
    constants.extend_from_slice(extra);
    let samples = vec![Sample { label: "argmin_ratio".into(), point: arg, value: min_ratio }];
    Ok(ConditionReport::new(id, margin, &constants, samples))
}

/// ∫_Ω f by nested adaptive quadrature (polar about the origin in 2-D,
/// radial along e₁ with the sphere area factor for n ≥ 3).
pub fn integrate_over_domain(
    domain: &AnnularDomain,
    f: &dyn Fn(&[f64]) -> f64,
    rel_tol: f64,
) -> Result<f64, QuadratureError> {
    let n = domain.dim();
    let inner_opts = QuadOptions::with_rel_tol(rel_tol * 1e-2);
    if n == 2 {
        let failure: RefCell<Option<QuadratureError>> = RefCell::new(None);
        let ring = |theta: f64| {
            let dir = [theta.cos(), theta.sin()];
            let (lo, hi) = domain.ray_extent(&dir);
            match integrate(|r| r * f(&[r * dir[0], r * dir[1]]), lo, hi, &inner_opts) {
                Ok(q) => q.value,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            }
        };
        let out = integrate(ring, 0.0, 2.0 * PI, &QuadOptions::with_rel_tol(rel_tol));
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        return out.map(|q| q.value);
    }
    let area = unit_sphere_area(n);
    let q = integrate(
        |r| {
            let mut x = vec![0.0; n];
            x[0] = r;
            r.powi(n as i32 - 1) * f(&x)
        },
        domain.r_inner(),
        domain.r_outer(),
        &QuadOptions::with_rel_tol(rel_tol),
    )?;
    Ok(area * q.value)
}

/// ∫_{|p| ≤ R} h for a radial profile h(|p|) in R^n.
pub fn radial_mass(n: usize, h: &dyn Fn(f64) -> f64, radius: f64, rel_tol: f64) -> Result<f64, QuadratureError> {
    let area = if n == 1 { 2.0 } else { unit_sphere_area(n) };
    let q = integrate(|r| r.powi(n as i32 - 1) * h(r), 0.0, radius, &QuadOptions::with_rel_tol(rel_tol))?;
    Ok(area * q.value)
}

/// ∫_{R^n} h for a radial profile h(|p|).
pub fn total_radial_mass(n: usize, h: &dyn Fn(f64) -> f64, rel_tol: f64) -> Result<f64, QuadratureError> {
    let area = if n == 1 { 2.0 } else { unit_sphere_area(n) };
    let opts = QuadOptions::with_rel_tol(rel_tol);
    let g = |r: f64| r.powi(n as i32 - 1) * h(r);
    let head = integrate(g, 0.0, 1.0, &opts)?;
    let tail = integrate_to_infinity(g, 1.0, &opts)?;
    Ok(area * (head.value + tail.value))
}

/// ∫_{R^n} (1 + |p|²)^{−(n+2)/2} dp, which equals ω_n.
pub fn gauss_mass(n: usize) -> Result<f64, QuadratureError> {
    let e = (n as f64 + 2.0) / 2.0;
    total_radial_mass(n, &|r| (1.0 + r * r).powf(-e), 1e-12)
}

/// ∫_Ω g < ∫_{R^n} h, with h given as a radial profile of |p|.
///
/// A nonpositive margin yields an unsatisfied report without R₀; use
/// [`structure_r0`] for the root itself.
pub fn check_structure(
    spec: &ProblemSpec,
    g: &dyn Fn(&[f64]) -> f64,
    h: &dyn Fn(f64) -> f64,
) -> Result<ConditionReport, ConditionError> {
    let n = spec.dim();
    let int_g = integrate_over_domain(&spec.domain, g, 1e-10)?;
    let int_h = total_radial_mass(n, h, 1e-10)?;
    let mut margin = int_h - int_g;
    if margin.abs() <= 1e-10 * int_h.abs().max(int_g.abs()) {
        margin = 0.0;
    }
    let mut constants = vec![("int_g", int_g), ("int_h", int_h)];
    if margin > 0.0 {
        constants.push(("R0", structure_r0(n, int_g, h)?));
    }
    Ok(ConditionReport::new(ConditionId::Structure, margin, &constants, Vec::new()))
}

/// R₀ with ∫_{|p| ≤ R₀} h = `int_g`.
pub fn structure_r0(n: usize, int_g: f64, h: &dyn Fn(f64) -> f64) -> Result<f64, ConditionError> {
    let int_h = total_radial_mass(n, h, 1e-10)?;
    let margin = int_h - int_g;
    if margin <= 1e-10 * int_h.abs().max(int_g.abs()) {
        return Err(ConditionError::NoRoot { margin });
    }
    if int_g <= 0.0 {
        return Ok(0.0);
    }
    let f = |r: f64| radial_mass(n, h, r, 1e-12).map(|m| m - int_g);
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi)? < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(ConditionError::NoRoot { margin });
        }
    }
    // Illinois-modified regula falsi on the monotone mass function.
    let (mut flo, mut fhi) = (f(lo)?, f(hi)?);
    let mut side = 0i32;
    for _ in 0..200 {
        let c = (lo * fhi - hi * flo) / (fhi - flo);
        let fc = f(c)?;
        if fc == 0.0 || (hi - lo) <= 1e-14 * hi {
            return Ok(c);
        }
        if fc < 0.0 {
            lo = c;
            flo = fc;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = c;
            fhi = fc;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
        if fc.abs() <= 1e-15 * int_g {
            return Ok(c);
        }
    }
    Ok(0.5 * (lo + hi))
}

/// ψⁿ(x, z, p) ≤ Z(|z|) d_x^β |p|^{β+n+1} near Γ⁺, sampled with
/// d_x ∈ (10⁻⁶·band, band), z ∈ [−C₀′, 0], |p| ∈ [Z, 10Z].
pub fn check_structure_gradient(
    spec: &ProblemSpec,
    z_fn: &dyn Fn(f64) -> f64,
    beta: f64,
    band: f64,
    c0_prime: f64,
) -> Result<ConditionReport, ConditionError> {
    if !(band > 0.0 && beta >= 0.0 && c0_prime >= 0.0) {
        return Err(ConditionError::BadParameter("band > 0, beta >= 0 and C0' >= 0 required".into()));
    }
    let n = spec.dim();
    let dom = &spec.domain;
    let center = dom.center_outer();
    let dirs: Vec<Vec<f64>> = dom.outer_samples().into_iter().step_by(10).map(|(_, nrm)| nrm).collect();
    let pdirs = sphere_directions(n, if n == 2 { 8 } else { 12 });
    let mut worst = (f64::INFINITY, Vec::new());
    for dir in &dirs {
        for kd in 0..13 {
            let dist = band * 10f64.powf(-6.0 * kd as f64 / 12.0) * (1.0 - 1e-9);
            let x: Vec<f64> = (0..n).map(|k| center[k] + (dom.r_outer() - dist) * dir[k]).collect();
            if !dom.contains(&x) {
                continue;
            }
            for kz in 0..5 {
                let z = -c0_prime * kz as f64 / 4.0;
                let zz = z_fn(z.abs());
                for kp in 0..4 {
                    let mag = zz * (1.0 + 9.0 * kp as f64 / 3.0);
                    for pd in &pdirs {
                        let p: Vec<f64> = pd.iter().map(|c| mag * c).collect();
                        let rhs = zz * dist.powf(beta) * mag.powf(beta + n as f64 + 1.0);
                        let v = rhs - spec.psi.psi_n(&x, z, &p);
                        if v < worst.0 {
                            let mut pt = x.clone();
                            pt.push(z);
                            pt.extend(&p);
                            worst = (v, pt);
                        }
                    }
                }
            }
        }
    }
    let samples = vec![Sample { label: "worst (x, z, p)".into(), point: worst.1, value: worst.0 }];
    Ok(ConditionReport::new(
        ConditionId::StructureGradient,
        worst.0,
        &[("beta", beta), ("band", band), ("C0_prime", c0_prime)],
        samples,
    ))
}

/// Inputs for the tangential subsolution test at a point of Γ⁻.
pub struct SubsolutionProbe<'a> {
    pub u: &'a dyn Field,
    pub usub: &'a dyn Field,
    pub x0: Vec<f64>,
    pub xi: Vec<f64>,
    pub h: f64,
}

impl<'a> SubsolutionProbe<'a> {
    /// Probe with the default step h = 10⁻³·R₋.
    pub fn new(u: &'a dyn Field, usub: &'a dyn Field, x0: Vec<f64>, xi: Vec<f64>, domain: &AnnularDomain) -> Self {
        Self { u, usub, x0, xi, h: 1e-3 * domain.r_inner() }
    }
}

/// (1/γ₀)U″(0) + κ_ξU(0) + u̲_ξξ(x₀) ≥ τ with U(s) = (u_ν − u̲_ν)(γ(s)).
pub fn check_subsolution(
    probe: &SubsolutionProbe<'_>,
    spec: &ProblemSpec,
    tau_floor: f64,
) -> Result<ConditionReport, ConditionError> {
    if !(spec.gamma0 > 0.0) {
        return Err(ConditionError::GammaZero);
    }
    let dom = &spec.domain;
    let nu0 = dom.inner_normal(&probe.x0)?;
    let kappa = dom.normal_curvature(&probe.x0, &probe.xi)?;
    let c = dom.center_inner();
    let r = dom.r_inner();
    let big_u = |s: f64| {
        let y = geodesic_point(&c, r, &nu0, &probe.xi, s);
        let nu: Vec<f64> = sub(&y, &c).iter().map(|v| v / r).collect();
        probe.u.jet(&y).grad_dot(&nu) - probe.usub.jet(&y).grad_dot(&nu)
    };
    let u0 = big_u(0.0);
    let second = |h: f64| (big_u(h) - 2.0 * u0 + big_u(-h)) / (h * h);
    let d1 = second(probe.h);
    let d2 = second(0.5 * probe.h);
    let disagreement = (d1 - d2).abs();
    if disagreement > 1e-4 {
        return Err(ConditionError::StepTooLarge { disagreement });
    }
    let u2 = (4.0 * d2 - d1) / 3.0;
    let sub_jet = probe.usub.jet(&probe.x0);
    let usub_xixi = sub_jet.hess_form(&probe.xi, &probe.xi);
    let lhs = u2 / spec.gamma0 + kappa * u0 + usub_xixi;
    let u_xixi = probe.u.jet(&probe.x0).hess_form(&probe.xi, &probe.xi);
    let constants = [
        ("tau_floor", tau_floor),
        ("U0", u0),
        ("U_ss", u2),
        ("kappa", kappa),
        ("usub_xixi", usub_xixi),
        ("u_xixi_implied", lhs),
        ("u_xixi_direct", u_xixi),
        ("h", probe.h),
        ("richardson_disagreement", disagreement),
    ];
    let samples = vec![Sample { label: "lhs".into(), point: probe.x0.clone(), value: lhs }];
    Ok(ConditionReport::new(ConditionId::Subsolution, lhs - tau_floor, &constants, samples))
}

/// ∫_Ω K < ω_n together with K = 0 on Γ⁺ (max |K| ≤ 10⁻¹⁰ there).
///
/// When K fails to vanish on Γ⁺ the margin is −max_{Γ⁺}|K|.
pub fn check_prescribed_gauss(spec: &ProblemSpec) -> Result<ConditionReport, ConditionError> {
    let k = match &spec.psi {
        PsiSpec::GaussCurvature(k) => k.clone(),
        other => return Err(ConditionError::BadParameter(format!("expected a Gauss-curvature right-hand side, got {other:?}"))),
    };
    let dom = &spec.domain;
    for x in dom.interior_samples(1000).into_iter().chain(dom.inner_samples().into_iter().map(|(x, _)| x)) {
        let v = k(&x);
        if v < 0.0 {
            return Err(ConditionError::NegativeK { value: v, at: x });
        }
    }
    let n = spec.dim();
    let omega = unit_ball_volume(n);
    let int_k = integrate_over_domain(dom, &|x| k(x), 1e-10)?;
    let (max_outer, arg) = dom
        .outer_samples()
        .into_iter()
        .map(|(x, _)| (k(&x).abs(), x))
        .fold((0.0, Vec::new()), |acc, (v, x)| if v > acc.0 || acc.1.is_empty() { (v, x) } else { acc });
    let outer_ok = max_outer <= 1e-10;
    let margin = if outer_ok { omega - int_k } else { -max_outer };
    let constants = [("omega_n", omega), ("int_K", int_k), ("max_K_outer", max_outer)];
    let samples = vec![Sample { label: "max |K| on outer boundary".into(), point: arg, value: max_outer }];
    Ok(ConditionReport::new(ConditionId::PrescribedGauss, margin, &constants, samples))
}

/// Parabolic comparison: margin = min over samples of u − u̲.
pub fn check_flow_subsolution(samples: &[(Vec<f64>, f64, f64, f64)]) -> ConditionReport {
    let mut worst = (f64::INFINITY, Vec::new(), 0.0);
    for (x, t, u, usub) in samples {
        let gap = u - usub;
        if gap < worst.0 {
            worst = (gap, x.clone(), *t);
        }
    }
    let samples = vec![Sample { label: "min u - usub".into(), point: worst.1, value: worst.0 }];
    ConditionReport::new(ConditionId::FlowSubsolution, worst.0, &[("t_worst", worst.2)], samples)
}

/// Analytic R₀ = −ln(1 − (R₊ − R₋)) for g = 1/|x|, h = e^{−|p|}/|p| in the plane.
pub fn blowup_structure_r0(width: f64) -> f64 {
    -(1.0 - width).ln()
}
