//! A-priori constants (C₀, C₁, C₃, M, flow constants) and the barrier field
//! used in the second-derivative estimate.

use serde::Serialize;
use thiserror::Error;

use crate::closed_form::{ClosedFormError, ClosedFormSolution, Field, Jet};
use crate::domain::{AnnularDomain, DomainError, PhiSpec, ProblemSpec};
use crate::grid::{GridField, PolarGrid};
use crate::sampling::golden_section_min;
use crate::{dot, norm, sub};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("K = {k} outside (0, {max})")]
    KOutOfRange { k: f64, max: f64 },
    #[error("bad defining function: {0}")]
    BadDefiningFunction(String),
    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),
    #[error("sup of psi needs a solution to evaluate p-dependent right-hand sides")]
    PsiNeedsSolution,
    #[error("gauge undefined at u = {u} (base {base:e})")]
    GaugeUndefined { u: f64, base: f64 },
    #[error("Hessian is singular (det = {det:e})")]
    SingularHessian { det: f64 },
    #[error("problem has no flow data")]
    MissingFlow,
    #[error("max |rho| on the inner boundary is {max_rho}, must be below 1")]
    RhoTooDeep { max_rho: f64 },
    #[error("lambda = {lambda} outside (0, {max}]")]
    LambdaOutOfRange { lambda: f64, max: f64 },
    #[error("gamma0 must be positive")]
    GammaZero,
    #[error(transparent)]
    ClosedForm(#[from] ClosedFormError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// A constant together with the formula that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bound {
    pub value: f64,
    pub formula: &'static str,
}

impl Bound {
    pub fn new(value: f64, formula: &'static str) -> Option<Self> {
        Some(Self { value, formula })
    }
}

pub const F_C0: &str = "e^(1/2) max{|psi|_inf/(K(1-K max|x|^2)), max|phi|/(K m0)}";
pub const F_C1: &str = "max{C0/min_inner|rho|, |psi|_inf/lambda_min} max_outer|Drho|";
pub const F_C3: &str = "gamma0 C1 + sup_inner|Dphi|";
pub const F_C0_PRIME: &str = "(R0 + max_inner|phi|)/gamma0 + R0 diam";
pub const F_C1_LOC: &str = "C0'/dist(level set {u = -lambda}, outer boundary)";
pub const F_M: &str = "max{(l2 + sqrt(l2^2 + 4 l1))/2, (|psi|/n)(l3/2 + sqrt((l3/2)^2 + n(n|D2 ln psi| + 2|a| C1)/|psi|))}";
pub const F_CT: &str = "max{1, sup|theta'|, sup phi_t/gamma0}";
pub const F_C0T: &str = "T C^T + sup|u0|";
pub const F_C1T: &str = "max{C0T/(1 - max_inner|rho|), (|psi|_inf/lambda_min)^(n/(n+1))} max_outer|Drho|";
pub const F_CT_LOWER: &str = "observed min|u_t|";

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BoundConstants {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c0: Option<Bound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1: Option<Bound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c2: Option<Bound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c3: Option<Bound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c4: Option<Bound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c5: Option<Bound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c0_prime: Option<Bound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1_prime: Option<Bound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1_loc: Option<Bound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<Bound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ell1: Option<Bound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ell2: Option<Bound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ell3: Option<Bound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ct_upper: Option<Bound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c0_t: Option<Bound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1_t: Option<Bound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ct_lower_witness: Option<Bound>,
    /// K used for C₀, when it was chosen by minimisation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
}

// ---------------------------------------------------------------- sup norms

fn sample_points(domain: &AnnularDomain) -> Vec<Vec<f64>> {
    let mut pts = domain.interior_samples(2000);
    pts.extend(domain.inner_samples().into_iter().map(|(x, _)| x));
    pts.extend(domain.outer_samples().into_iter().map(|(x, _)| x));
    pts
}

/// ‖ψ‖∞ over Ω̄. Constant and x-only data need no solution; for ψ(x, z)
/// the sup is taken at z = 0 (ψ is nondecreasing in z and u ≤ 0). For
/// p-dependent ψ the sup is taken along `along`.
pub fn psi_sup(spec: &ProblemSpec, along: Option<&dyn Field>) -> Result<f64, BoundsError> {
    if let Some(c) = spec.psi.constant_value() {
        return Ok(c);
    }
    let n = spec.dim();
    let zero = vec![0.0; n];
    let pts = sample_points(&spec.domain);
    if !spec.psi.depends_on_p() {
        return Ok(pts.iter().map(|x| spec.psi.psi(x, 0.0, &zero)).fold(0.0, f64::max));
    }
    let sol = along.ok_or(BoundsError::PsiNeedsSolution)?;
    Ok(pts
        .iter()
        .map(|x| {
            let j = sol.jet(x);
            let p: Vec<f64> = j.grad.iter().copied().collect();
            spec.psi.psi(x, j.u, &p)
        })
        .fold(0.0, f64::max))
}

/// ‖ψ‖∞ along a closed-form solution, using the family's own right-hand side.
pub fn psi_sup_closed_form(sol: &ClosedFormSolution) -> f64 {
    let n = sol.dim() as f64;
    sample_points(&sol.domain())
        .iter()
        .map(|x| sol.psi_n(x, &sol.jet(x)).max(0.0).powf(1.0 / n))
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------- C0

/// C₀ from its ingredients.
pub fn c0_bound_from(psi_sup: f64, phi_max: f64, k: f64, max_norm_sq: f64, m0: f64) -> Result<f64, BoundsError> {
    let kmax = 1.0 / max_norm_sq;
    if !(k > 0.0 && k < kmax) {
        return Err(BoundsError::KOutOfRange { k, max: kmax });
    }
    let a = psi_sup / (k * (1.0 - k * max_norm_sq));
    let b = phi_max / (k * m0);
    Ok(0.5f64.exp() * a.max(b))
}

/// C₀ for `spec` at a caller-chosen K.
pub fn c0_bound(spec: &ProblemSpec, k: f64, along: Option<&dyn Field>) -> Result<f64, BoundsError> {
    let d = &spec.domain;
    c0_bound_from(psi_sup(spec, along)?, spec.phi_max_inner(), k, d.max_norm_sq(), d.min_support())
}

/// Minimise C₀ over K: 64-point log grid, then golden section. Returns (K, C₀).
pub fn c0_bound_min_k(psi_sup: f64, phi_max: f64, max_norm_sq: f64, m0: f64) -> Result<(f64, f64), BoundsError> {
    let kmax = 1.0 / max_norm_sq;
    let f = |k: f64| c0_bound_from(psi_sup, phi_max, k, max_norm_sq, m0).unwrap_or(f64::INFINITY);
    let ks: Vec<f64> = (0..64).map(|i| kmax * 10f64.powf(-4.0 + 4.0 * i as f64 / 64.0)).collect();
    let (ibest, _) = ks
        .iter()
        .map(|&k| f(k))
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let lo = if ibest == 0 { ks[0] * 0.5 } else { ks[ibest - 1] };
    let hi = if ibest + 1 == ks.len() { kmax * (1.0 - 1e-12) } else { ks[ibest + 1] };
    let (k, v) = golden_section_min(f, lo, hi, 1e-12 * kmax);
    let best_grid = f(ks[ibest]);
    Ok(if v <= best_grid { (k, v) } else { (ks[ibest], best_grid) })
}

/// C₀ for `spec` with K chosen by [`c0_bound_min_k`].
pub fn c0_bound_auto(spec: &ProblemSpec, along: Option<&dyn Field>) -> Result<(f64, f64), BoundsError> {
    let d = &spec.domain;
    c0_bound_min_k(psi_sup(spec, along)?, spec.phi_max_inner(), d.max_norm_sq(), d.min_support())
}

// ---------------------------------------------------------------- C1, C3

/// Data of a defining function ρ for Γ⁺ (ρ < 0 in Ω, ρ = 0 on Γ⁺).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DefiningFunction {
    pub lambda_min: f64,
    pub sup_grad_on_outer: f64,
    pub min_abs_on_inner: f64,
    pub max_abs_on_inner: f64,
}

impl DefiningFunction {
    /// ρ = (|x − γ₊|² − R₊²)/(2R₊): |Dρ| = 1 on Γ⁺ and D²ρ = I/R₊.
    pub fn standard(domain: &AnnularDomain) -> Self {
        let ro = domain.r_outer();
        let offset = norm(&sub(&domain.center_inner(), &domain.center_outer()));
        let far = offset + domain.r_inner();
        let near = (domain.r_inner() - offset).max(0.0);
        Self {
            lambda_min: 1.0 / ro,
            sup_grad_on_outer: 1.0,
            min_abs_on_inner: (ro * ro - far * far) / (2.0 * ro),
            max_abs_on_inner: (ro * ro - near * near) / (2.0 * ro),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            lambda_min: s * self.lambda_min,
            sup_grad_on_outer: s * self.sup_grad_on_outer,
            min_abs_on_inner: s * self.min_abs_on_inner,
            max_abs_on_inner: s * self.max_abs_on_inner,
        }
    }

    fn validate(&self) -> Result<(), BoundsError> {
        if !(self.lambda_min > 0.0) {
            return Err(BoundsError::BadDefiningFunction(format!("lambda_min = {}", self.lambda_min)));
        }
        if !(self.sup_grad_on_outer > 0.0 && self.sup_grad_on_outer <= 1.0) {
            return Err(BoundsError::BadDefiningFunction(format!("sup |Drho| = {}", self.sup_grad_on_outer)));
        }
        if !(self.min_abs_on_inner > 0.0) {
            return Err(BoundsError::BadDefiningFunction(format!("min |rho| = {}", self.min_abs_on_inner)));
        }
        Ok(())
    }
}

pub fn c1_bound(psi_sup: f64, rho: &DefiningFunction, c0: f64) -> Result<f64, BoundsError> {
    rho.validate()?;
    Ok((c0 / rho.min_abs_on_inner).max(psi_sup / rho.lambda_min) * rho.sup_grad_on_outer)
}

/// sup over Γ⁻ of |Dφ| (zero for constant φ, 4th-order differences otherwise).
pub fn sup_dphi_inner(spec: &ProblemSpec) -> f64 {
    match &spec.phi {
        PhiSpec::Constant(_) => 0.0,
        PhiSpec::Field(f) => {
            let h = 1e-3 * spec.domain.r_inner();
            spec.domain
                .inner_samples()
                .iter()
                .map(|(x, _)| norm(&fd_grad(&|y| f(y), x, h)))
                .fold(0.0, f64::max)
        }
    }
}

pub fn c3_bound(gamma0: f64, c1: f64, sup_dphi: f64) -> f64 {
    gamma0 * c1 + sup_dphi
}

/// C₀′ from the structure radius R₀.
pub fn c0_du_bound(r0: f64, spec: &ProblemSpec) -> Result<f64, BoundsError> {
    if !(spec.gamma0 > 0.0) {
        return Err(BoundsError::GammaZero);
    }
    Ok((r0 + spec.phi_max_inner()) / spec.gamma0 + r0 * spec.domain.diameter())
}

/// C′₁,loc = C₀′/dist(Ω_λ, Γ⁺) for a radial solution, where Ω_λ = {u ≤ −λ}.
pub fn local_gradient_bound(c0_prime: f64, lambda: f64, sol: &ClosedFormSolution) -> Result<f64, BoundsError> {
    let d = sol.domain();
    let (ri, ro) = (d.r_inner(), d.r_outer());
    let u = |r: f64| sol.radial_profile(r).map(|p| p.0);
    let max = -u(ri)?;
    if !(lambda > 0.0 && lambda <= max) {
        return Err(BoundsError::LambdaOutOfRange { lambda, max });
    }
    let (mut lo, mut hi) = (ri, ro);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if u(mid)? + lambda > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * ro {
            break;
        }
    }
    Ok(c0_prime / (ro - 0.5 * (lo + hi)))
}

// ---------------------------------------------------------------- M and the barrier norms

/// Sup norms of the barrier coefficients and of φ.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct BarrierNorms {
    pub a_sup: f64,
    pub da_sup: f64,
    pub d2a_sup: f64,
    pub bbar_sup: f64,
    pub dbbar_sup: f64,
    pub d2bbar_sup: f64,
    pub b_sup: f64,
    pub dphi_sup: f64,
    pub d2phi_sup: f64,
    pub d3phi_sup: f64,
    pub sup_outer_norm: f64,
    pub nr: usize,
    pub ntheta: usize,
}

/// Sup norms of ln ψ derivatives.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PsiNorms {
    pub sup: f64,
    pub sup_dlog: f64,
    pub sup_d2log: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EllTerms {
    pub ell1: f64,
    pub ell2: f64,
    pub ell3: f64,
}

pub fn ell_terms(nm: &BarrierNorms, psi: &PsiNorms, c1: f64, gamma0: f64, n: usize) -> EllTerms {
    let n = n as f64;
    let ell1 = 2.0 * c1 * (c1 * nm.da_sup + (c1 + nm.dphi_sup) * nm.dbbar_sup + nm.bbar_sup * nm.d2phi_sup);
    let ell2 = nm.d2a_sup * c1
        + (c1 + nm.dphi_sup) * nm.d2bbar_sup
        + 2.0 * nm.dbbar_sup * nm.d2phi_sup
        + nm.bbar_sup * nm.d3phi_sup
        + 4.0 * c1 * nm.sup_outer_norm;
    let ell3 = gamma0 * nm.bbar_sup
        + n * (nm.a_sup + gamma0 * nm.bbar_sup) * psi.sup_dlog
        + 2.0 * n * (nm.da_sup + gamma0 * nm.bbar_sup);
    EllTerms { ell1, ell2, ell3 }
}

/// Infimum admissible M (any strict excess is admissible).
pub fn m_bound(ell: &EllTerms, psi: &PsiNorms, a_sup: f64, c1: f64, n: usize) -> f64 {
    let first = 0.5 * (ell.ell2 + (ell.ell2 * ell.ell2 + 4.0 * ell.ell1).sqrt());
    let nf = n as f64;
    let second = if psi.sup > 0.0 {
        let h = 0.5 * ell.ell3;
        (psi.sup / nf) * (h + (h * h + nf * (nf * psi.sup_d2log + 2.0 * a_sup * c1) / psi.sup).sqrt())
    } else {
        0.0
    };
    first.max(second)
}

/// 4th-order central gradient.
fn fd_grad(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|k| {
            let mut at = |s: f64| {
                y[k] = x[k] + s * h;
                f(&y)
            };
            let v = (at(-2.0) - 8.0 * at(-1.0) + 8.0 * at(1.0) - at(2.0)) / (12.0 * h);
            y[k] = x[k];
            v
        })
        .collect()
}

/// Frobenius norm of the order-`order` derivative tensor by nested differences.
fn fd_tensor_norm(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64, order: usize) -> f64 {
    fn entries(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64, order: usize, out: &mut Vec<f64>) {
        if order == 0 {
            out.push(f(x));
            return;
        }
        for k in 0..x.len() {
            let g = |y: &[f64]| fd_grad(f, y, h)[k];
            entries(&g, x, h, order - 1, out);
        }
    }
    let mut out = Vec::new();
    entries(f, x, h, order, &mut out);
    out.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn radial_unit(x: &[f64]) -> Vec<f64> {
    let r = norm(x);
    x.iter().map(|c| c / r).collect()
}

/// a(x) = 2(ξ·ν)ξ′(γ₀ − 1/|x|) with ν = x/|x| and ξ′ = ξ − (ξ·ν)ν.
pub fn barrier_a(x: &[f64], xi: &[f64], gamma0: f64) -> Vec<f64> {
    let nu = radial_unit(x);
    let xn = dot(xi, &nu);
    let r = norm(x);
    xi.iter().zip(&nu).map(|(a, b)| 2.0 * xn * (a - xn * b) * (gamma0 - 1.0 / r)).collect()
}

/// b̄(x) = 2(ξ·ν)ξ′.
pub fn barrier_bbar(x: &[f64], xi: &[f64]) -> Vec<f64> {
    let nu = radial_unit(x);
    let xn = dot(xi, &nu);
    xi.iter().zip(&nu).map(|(a, b)| 2.0 * xn * (a - xn * b)).collect()
}

/// Sup norms of a, b̄, b = b̄·Dφ and φ derivatives over an nr × ntheta polar grid.
pub fn sample_barrier_norms(spec: &ProblemSpec, xi: &[f64], nr: usize, ntheta: usize) -> Result<BarrierNorms, BoundsError> {
    let dom = &spec.domain;
    if !dom.is_concentric() || dom.dim() != 2 {
        return Err(BoundsError::UnsupportedDomain("barrier norms need a concentric planar annulus".into()));
    }
    let g0 = spec.gamma0;
    let grid = PolarGrid::new(nr, ntheta, dom.r_inner(), dom.r_outer());
    let h = 1e-4 * dom.r_inner();
    let hp = 1e-2 * dom.r_inner();
    let phi = |y: &[f64]| spec.phi.eval(y);
    let phi_const = matches!(spec.phi, PhiSpec::Constant(_));
    let mut nm = BarrierNorms { nr, ntheta, sup_outer_norm: dom.r_outer(), ..Default::default() };
    for i in 0..grid.nr {
        for j in 0..grid.ntheta {
            let x = grid.point(i, j).to_vec();
            let a = barrier_a(&x, xi, g0);
            let bb = barrier_bbar(&x, xi);
            nm.a_sup = nm.a_sup.max(norm(&a));
            nm.bbar_sup = nm.bbar_sup.max(norm(&bb));
            let comp_norm = |order: usize, field: &dyn Fn(&[f64]) -> Vec<f64>| {
                (0..2)
                    .map(|k| fd_tensor_norm(&|y: &[f64]| field(y)[k], &x, h, order).powi(2))
                    .sum::<f64>()
                    .sqrt()
            };
            let fa = |y: &[f64]| barrier_a(y, xi, g0);
            let fb = |y: &[f64]| barrier_bbar(y, xi);
            nm.da_sup = nm.da_sup.max(comp_norm(1, &fa));
            nm.d2a_sup = nm.d2a_sup.max(comp_norm(2, &fa));
            nm.dbbar_sup = nm.dbbar_sup.max(comp_norm(1, &fb));
            nm.d2bbar_sup = nm.d2bbar_sup.max(comp_norm(2, &fb));
            if !phi_const {
                let dphi = fd_grad(&phi, &x, hp);
                nm.dphi_sup = nm.dphi_sup.max(norm(&dphi));
                nm.d2phi_sup = nm.d2phi_sup.max(fd_tensor_norm(&phi, &x, hp, 2));
                nm.d3phi_sup = nm.d3phi_sup.max(fd_tensor_norm(&phi, &x, hp, 3));
                nm.b_sup = nm.b_sup.max(dot(&bb, &dphi).abs());
            }
        }
    }
    Ok(nm)
}

/// Norms of ln ψ(x, u(x), Du(x)) along a solution.
pub fn psi_norms_along(sol: &ClosedFormSolution, nr: usize, ntheta: usize) -> Result<PsiNorms, BoundsError> {
    let dom = sol.domain();
    if let Some(c) = sol.psi_spec().constant_value() {
        return Ok(PsiNorms { sup: c, sup_dlog: 0.0, sup_d2log: 0.0 });
    }
    if dom.dim() != 2 || !dom.is_concentric() {
        return Err(BoundsError::UnsupportedDomain("psi norms sampled on concentric planar annuli only".into()));
    }
    let n = sol.dim() as f64;
    let lnpsi = |y: &[f64]| sol.psi_n(y, &sol.jet(y)).ln() / n;
    let grid = PolarGrid::new(nr, ntheta, dom.r_inner(), dom.r_outer());
    let h = 1e-3 * dom.r_inner();
    let mut out = PsiNorms::default();
    for i in 0..grid.nr {
        for j in 0..grid.ntheta {
            let x = grid.point(i, j).to_vec();
            out.sup = out.sup.max(lnpsi(&x).exp());
            out.sup_dlog = out.sup_dlog.max(norm(&fd_grad(&lnpsi, &x, h)));
            out.sup_d2log = out.sup_d2log.max(fd_tensor_norm(&lnpsi, &x, h, 2));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- barrier field

/// Gauge g(u) multiplying u_ξξ in the barrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Gauge {
    /// g = 1/(M − u)
    Reciprocal { m: f64 },
    /// g = (M̃ + (1 − N⁴)u)^{1/(1 − N⁴)}
    PowerLaw { m_tilde: f64, n: f64 },
}

impl Gauge {
    /// (g, g′, g″) at u.
    pub fn eval(&self, u: f64) -> Result<(f64, f64, f64), BoundsError> {
        match *self {
            Gauge::Reciprocal { m } => {
                let base = m - u;
                if !(base > 0.0) {
                    return Err(BoundsError::GaugeUndefined { u, base });
                }
                let g = 1.0 / base;
                Ok((g, g * g, 2.0 * g * g * g))
            }
            Gauge::PowerLaw { m_tilde, n } => {
                let q = 1.0 - n.powi(4);
                let base = m_tilde + q * u;
                if !(base > 0.0) || q == 0.0 {
                    return Err(BoundsError::GaugeUndefined { u, base });
                }
                let e = 1.0 / q;
                Ok((base.powf(e), base.powf(e - 1.0), (1.0 - q) * base.powf(e - 2.0)))
            }
        }
    }

    /// g″ − 2(g′)²/g at u.
    pub fn identity_residual(&self, u: f64) -> Result<f64, BoundsError> {
        let (g, g1, g2) = self.eval(u)?;
        Ok(g2 - 2.0 * g1 * g1 / g)
    }
}

/// Sampled gauge properties on [−C₀, 0].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaugeAudit {
    pub min_identity: f64,
    pub max_abs_identity: f64,
    pub min_dg: f64,
    pub max_neg_dg_over_g: f64,
}

pub fn gauge_audit(gauge: &Gauge, c0: f64, samples: usize) -> Result<GaugeAudit, BoundsError> {
    let mut a = GaugeAudit {
        min_identity: f64::INFINITY,
        max_abs_identity: 0.0,
        min_dg: f64::INFINITY,
        max_neg_dg_over_g: f64::NEG_INFINITY,
    };
    for k in 0..=samples {
        let u = -c0 * k as f64 / samples as f64;
        let (g, g1, _) = gauge.eval(u)?;
        let id = gauge.identity_residual(u)?;
        a.min_identity = a.min_identity.min(id);
        a.max_abs_identity = a.max_abs_identity.max(id.abs());
        a.min_dg = a.min_dg.min(g1);
        a.max_neg_dg_over_g = a.max_neg_dg_over_g.max(-g1 / g);
    }
    Ok(a)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarrierSpec {
    pub gauge: Gauge,
    /// Unit direction ξ.
    pub xi: Vec<f64>,
    /// Coefficient of |x|².
    pub m: f64,
    /// Weight exponent N in e^{N|Du|²}; `None` or 0 gives the plain barrier.
    pub weight_n: Option<f64>,
}

/// w = g(u)u_ξξ + a·Du + b + M|x|², optionally times e^{N|Du|²}, on a polar grid.
pub fn barrier_field(sol: &dyn Field, spec: &ProblemSpec, bspec: &BarrierSpec, grid: PolarGrid) -> Result<GridField, BoundsError> {
    if !spec.domain.is_concentric() || spec.dim() != 2 {
        return Err(BoundsError::UnsupportedDomain("barrier field needs a concentric planar annulus".into()));
    }
    let h = 1e-2 * spec.domain.r_inner();
    let mut out = GridField::zeros(grid);
    for i in 0..grid.nr {
        for j in 0..grid.ntheta {
            let x = grid.point(i, j);
            let jet = sol.jet(&x);
            out.values[grid.index(i, j)] = barrier_value(&jet, &x, spec, bspec, h)?;
        }
    }
    Ok(out)
}

fn barrier_value(jet: &Jet, x: &[f64], spec: &ProblemSpec, bspec: &BarrierSpec, h: f64) -> Result<f64, BoundsError> {
    let (g, _, _) = bspec.gauge.eval(jet.u)?;
    let p: Vec<f64> = jet.grad.iter().copied().collect();
    let a = barrier_a(x, &bspec.xi, spec.gamma0);
    let b = match &spec.phi {
        PhiSpec::Constant(_) => 0.0,
        PhiSpec::Field(f) => dot(&barrier_bbar(x, &bspec.xi), &fd_grad(&|y| f(y), x, h)),
    };
    let w = g * jet.hess_form(&bspec.xi, &bspec.xi) + dot(&a, &p) + b + bspec.m * dot(x, x);
    Ok(match bspec.weight_n {
        Some(n) if n != 0.0 => (n * dot(&p, &p)).exp() * w,
        _ => w,
    })
}

// ---------------------------------------------------------------- linearisation identity

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearizationResidual {
    /// |F^{ij}u_{ijξξ} − ln(ψⁿ)_ξξ − F^{ij}u_{jkξ}F^{kl}u_{liξ}|
    pub second_order: f64,
    /// |F^{ij}u_{ijξ} − ln(ψⁿ)_ξ| (Richardson-extrapolated differences)
    pub first_order: f64,
}

/// Differentiates the closed-form Hessian along ξ with step h.
pub fn linearization_identity_check(
    sol: &ClosedFormSolution,
    x: &[f64],
    xi: &[f64],
    h: f64,
) -> Result<LinearizationResidual, BoundsError> {
    let at = |s: f64| -> Vec<f64> { x.iter().zip(xi).map(|(a, b)| a + s * b).collect() };
    let j0 = sol.jet(x);
    let det = j0.det();
    if !(det > 1e-14) {
        return Err(BoundsError::SingularHessian { det });
    }
    let f = j0.hess.clone().try_inverse().ok_or(BoundsError::SingularHessian { det })?;
    let hess = |s: f64| sol.jet(&at(s)).hess;
    let lnpsi = |s: f64| {
        let y = at(s);
        sol.psi_n(&y, &sol.jet(&y)).ln()
    };
    let (hp, hm) = (hess(h), hess(-h));
    let h_xi = (&hp - &hm) / (2.0 * h);
    let h_xixi = (&hp - &j0.hess * 2.0 + &hm) / (h * h);
    let l0 = lnpsi(0.0);
    let l_xixi = (lnpsi(h) - 2.0 * l0 + lnpsi(-h)) / (h * h);
    let lhs2 = (&f * &h_xixi).trace();
    let rhs2 = l_xixi + (&f * &h_xi * &f * &h_xi).trace();

    let first = |step: f64| {
        let d = (hess(step) - hess(-step)) / (2.0 * step);
        (&f * d).trace() - (lnpsi(step) - lnpsi(-step)) / (2.0 * step)
    };
    let (r1, r2) = (first(h), first(0.5 * h));
    Ok(LinearizationResidual {
        second_order: (lhs2 - rhs2).abs(),
        first_order: ((4.0 * r2 - r1) / 3.0).abs(),
    })
}

/// Observed orders log₂(e_k/e_{k+1})·/log₂(h_k/h_{k+1}) for successive steps.
pub fn observed_orders(steps: &[f64], errors: &[f64]) -> Vec<f64> {
    steps
        .windows(2)
        .zip(errors.windows(2))
        .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect()
}

// ---------------------------------------------------------------- flow constants

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowConstants {
    pub ct_upper: f64,
    pub c0_t: f64,
    pub c1_t: Option<f64>,
}

/// C^T, C₀ᵀ and (when ρ and ‖ψ‖∞ are supplied) C₁ᵀ.
pub fn flow_constants(
    spec: &ProblemSpec,
    sup_u0: f64,
    gradient: Option<(&DefiningFunction, f64)>,
) -> Result<FlowConstants, BoundsError> {
    let flow = spec.flow.as_ref().ok_or(BoundsError::MissingFlow)?;
    if !(spec.gamma0 > 0.0) {
        return Err(BoundsError::GammaZero);
    }
    let t_end = flow.horizon;
    let inner: Vec<Vec<f64>> = spec.domain.inner_samples().into_iter().step_by(12).map(|(x, _)| x).collect();
    let mut theta_rate: f64 = 0.0;
    let mut phi_rate = f64::NEG_INFINITY;
    for k in 0..=200 {
        let t = t_end * k as f64 / 200.0;
        theta_rate = theta_rate.max(flow.theta_rate(t).abs());
        for x in &inner {
            phi_rate = phi_rate.max(flow.phi_rate(x, t));
        }
    }
    let ct = 1f64.max(theta_rate).max(phi_rate / spec.gamma0);
    let c0t = t_end * ct + sup_u0;
    let c1t = match gradient {
        None => None,
        Some((rho, psi_sup)) => {
            rho.validate()?;
            if rho.max_abs_on_inner >= 1.0 {
                return Err(BoundsError::RhoTooDeep { max_rho: rho.max_abs_on_inner });
            }
            let n = spec.dim() as f64;
            let a = c0t / (1.0 - rho.max_abs_on_inner);
            let b = (psi_sup / rho.lambda_min).powf(n / (n + 1.0));
            Some(a.max(b) * rho.sup_grad_on_outer)
        }
    };
    Ok(FlowConstants { ct_upper: ct, c0_t: c0t, c1_t: c1t })
}

// ---------------------------------------------------------------- assembly

/// C₀ (K minimised), C₁ and C₃ for a stationary problem, optionally with
/// C₀′ from a structure radius R₀.
pub fn stationary_constants(
    spec: &ProblemSpec,
    along: Option<&dyn Field>,
    r0: Option<f64>,
) -> Result<BoundConstants, BoundsError> {
    let psi = psi_sup(spec, along)?;
    let d = &spec.domain;
    let (k, c0) = c0_bound_min_k(psi, spec.phi_max_inner(), d.max_norm_sq(), d.min_support())?;
    let rho = DefiningFunction::standard(d);
    let c1 = c1_bound(psi, &rho, c0)?;
    let c3 = c3_bound(spec.gamma0, c1, sup_dphi_inner(spec));
    let mut out = BoundConstants {
        c0: Bound::new(c0, F_C0),
        c1: Bound::new(c1, F_C1),
        c3: Bound::new(c3, F_C3),
        k: Some(k),
        ..Default::default()
    };
    if let Some(r0) = r0 {
        out.c0_prime = Bound::new(c0_du_bound(r0, spec)?, F_C0_PRIME);
    }
    Ok(out)
}

/// Adds ℓ₁, ℓ₂, ℓ₃ and M for a closed-form solution and direction ξ.
pub fn add_m_bound(
    constants: &mut BoundConstants,
    spec: &ProblemSpec,
    sol: &ClosedFormSolution,
    xi: &[f64],
    nr: usize,
    ntheta: usize,
) -> Result<f64, BoundsError> {
    let c1 = constants.c1.as_ref().map(|b| b.value).ok_or_else(|| BoundsError::BadDefiningFunction("C1 missing".into()))?;
    let norms = sample_barrier_norms(spec, xi, nr, ntheta)?;
    let pn = psi_norms_along(sol, nr, ntheta)?;
    let ell = ell_terms(&norms, &pn, c1, spec.gamma0, spec.dim());
    let m = m_bound(&ell, &pn, norms.a_sup, c1, spec.dim());
    constants.ell1 = Bound::new(ell.ell1, "2C1(C1|Da| + (C1 + |Dphi|)|Dbbar| + |bbar||D2phi|)");
    constants.ell2 = Bound::new(ell.ell2, "|D2a|C1 + (C1 + |Dphi|)|D2bbar| + 2|Dbbar||D2phi| + |bbar||D3phi| + 4C1 sup|x|");
    constants.ell3 = Bound::new(ell.ell3, "gamma0|bbar| + n(|a| + gamma0|bbar|)|D ln psi| + 2n(|Da| + gamma0|bbar|)");
    constants.m = Bound::new(m, F_M);
    Ok(m)
}

/// True when (i, j) lies within one cell of the inner or outer ring.
pub fn near_boundary(grid: &PolarGrid, i: usize) -> bool {
    i <= 1 || i + 2 >= grid.nr
}

/// Maximum of a grid field and whether it sits within one cell of ∂Ω.
pub fn boundary_max(field: &GridField) -> ((usize, usize), f64, bool) {
    let (i, j) = field.argmax();
    ((i, j), field.at(i, j), near_boundary(&field.grid, i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::phi_k_value;
    use crate::domain::PsiSpec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn radial_spec(d: f64, gamma0: f64) -> (ProblemSpec, ClosedFormSolution) {
        let sol = ClosedFormSolution::radial_2d(1.0, 1.0, 2.0, d).unwrap();
        let phi = phi_k_value(1.0, gamma0, 1.0, 2.0, d).unwrap();
        let spec = ProblemSpec::new(sol.domain(), PsiSpec::Constant(1.0), gamma0, PhiSpec::Constant(phi)).unwrap();
        (spec, sol)
    }

    #[test]
    fn c0_examples() {
        let v = c0_bound_from(1.0, 2.5, 0.125, 4.0, 1.0).unwrap();
        assert_relative_eq!(v, 20.0 * 0.5f64.exp(), max_relative = 1e-14);
        let v0 = c0_bound_from(1.0, 0.0, 0.125, 4.0, 1.0).unwrap();
        assert_relative_eq!(v0, 0.5f64.exp() * 16.0, max_relative = 1e-14);
        let v2 = c0_bound_from(2.0, 0.0, 0.125, 4.0, 1.0).unwrap();
        assert_relative_eq!(v2, 2.0 * v0, max_relative = 1e-14);
        assert!(matches!(c0_bound_from(1.0, 1.0, 0.25, 4.0, 1.0), Err(BoundsError::KOutOfRange { .. })));
        assert!(matches!(c0_bound_from(1.0, 1.0, 0.0, 4.0, 1.0), Err(BoundsError::KOutOfRange { .. })));
    }

    #[test]
    fn c0_minimiser_beats_grid() {
        let (k, v) = c0_bound_min_k(1.0, 2.5, 4.0, 1.0).unwrap();
        assert!(k > 0.0 && k < 0.25);
        for i in 1..1000 {
            let kk = 0.25 * i as f64 / 1000.0;
            assert!(v <= c0_bound_from(1.0, 2.5, kk, 4.0, 1.0).unwrap() * (1.0 + 1e-9));
        }
    }

    #[test]
    fn c1_examples() {
        let d = AnnularDomain::concentric(2, 1.0, 2.0).unwrap();
        let rho = DefiningFunction::standard(&d);
        assert_relative_eq!(rho.lambda_min, 0.5);
        assert_relative_eq!(rho.min_abs_on_inner, 0.75);
        let c0 = 10.0;
        assert_relative_eq!(c1_bound(1.0, &rho, c0).unwrap(), (c0 * 4.0 / 3.0f64).max(2.0), max_relative = 1e-14);
        assert_relative_eq!(c1_bound(0.0, &rho, c0).unwrap(), c0 / 0.75, max_relative = 1e-14);
        let half = rho.scaled(0.5);
        assert_relative_eq!(c1_bound(1.0, &half, c0).unwrap(), c1_bound(1.0, &rho, c0).unwrap(), max_relative = 1e-14);
        let bad = DefiningFunction { lambda_min: 0.0, ..rho };
        assert!(matches!(c1_bound(1.0, &bad, c0), Err(BoundsError::BadDefiningFunction(_))));
        let steep = DefiningFunction { sup_grad_on_outer: 1.5, ..rho };
        assert!(c1_bound(1.0, &steep, c0).is_err());
    }

    #[test]
    fn m_bound_examples() {
        let z = PsiNorms { sup: 1.0, sup_dlog: 0.0, sup_d2log: 0.0 };
        let e = |a, b, c| EllTerms { ell1: a, ell2: b, ell3: c };
        assert_eq!(m_bound(&e(0.0, 0.0, 0.0), &z, 0.0, 1.0, 2), 0.0);
        assert_relative_eq!(m_bound(&e(4.0, 0.0, 0.0), &z, 0.0, 1.0, 2), 2.0);
        assert_relative_eq!(m_bound(&e(0.0, 3.0, 0.0), &z, 0.0, 1.0, 2), 3.0);
    }

    #[test]
    fn c0_du_examples() {
        let d = AnnularDomain::concentric(2, 1.0, 1.5).unwrap();
        let s = ProblemSpec::new(d.clone(), PsiSpec::Constant(1.0), 1.0, PhiSpec::Constant(1.0)).unwrap();
        let ln2 = 2f64.ln();
        assert_relative_eq!(c0_du_bound(ln2, &s).unwrap(), 4.0 * ln2 + 1.0, max_relative = 1e-14);
        assert_relative_eq!(c0_du_bound(0.0, &s).unwrap(), 1.0);
        let s2 = ProblemSpec::new(d.clone(), PsiSpec::Constant(1.0), 2.0, PhiSpec::Constant(1.0)).unwrap();
        assert_relative_eq!(c0_du_bound(ln2, &s2).unwrap(), (ln2 + 1.0) / 2.0 + 3.0 * ln2, max_relative = 1e-14);
        let s0 = ProblemSpec::new(d, PsiSpec::Constant(1.0), 0.0, PhiSpec::Constant(1.0)).unwrap();
        assert!(matches!(c0_du_bound(ln2, &s0), Err(BoundsError::GammaZero)));
    }

    #[test]
    fn local_gradient_examples() {
        let q = ClosedFormSolution::radial_2d(1.0, 1.0, 2.0, 1.0).unwrap();
        for lambda in [0.1f64, 0.5, 1.0, 1.5] {
            let dist = 2.0 - (4.0 - 2.0 * lambda).sqrt();
            assert_relative_eq!(local_gradient_bound(1.0, lambda, &q).unwrap(), 1.0 / dist, max_relative = 1e-10);
        }
        assert!(local_gradient_bound(1.0, 1e-6, &q).unwrap() > 1e5);
        assert!(matches!(local_gradient_bound(1.0, 1.6, &q), Err(BoundsError::LambdaOutOfRange { .. })));
    }

    #[test]
    fn gauge_identities() {
        let g = Gauge::Reciprocal { m: 10.0 };
        for k in 0..=100 {
            let u = -5.0 * k as f64 / 100.0;
            assert!(g.identity_residual(u).unwrap().abs() <= 1e-12);
        }
        assert!(matches!(g.eval(10.0), Err(BoundsError::GaugeUndefined { .. })));
        let p = Gauge::PowerLaw { m_tilde: 5.0, n: 1.5 };
        let a = gauge_audit(&p, 2.0, 200).unwrap();
        assert!(a.min_dg >= 0.0 && a.max_neg_dg_over_g.is_finite() && a.min_identity >= 0.0);
        // derivatives agree with finite differences
        let (_, g1, g2) = p.eval(-0.7).unwrap();
        let h = 1e-5;
        let gp = p.eval(-0.7 + h).unwrap();
        let gm = p.eval(-0.7 - h).unwrap();
        assert_relative_eq!((gp.0 - gm.0) / (2.0 * h), g1, max_relative = 1e-7);
        assert_relative_eq!((gp.1 - gm.1) / (2.0 * h), g2, max_relative = 1e-7);
    }

    #[test]
    fn barrier_norms_trivial_cases() {
        let d = AnnularDomain::concentric(2, 1.0, 2.0).unwrap();
        let s = ProblemSpec::new(d.clone(), PsiSpec::Constant(1.0), 0.0, PhiSpec::Constant(0.0)).unwrap();
        let nm = sample_barrier_norms(&s, &[1.0, 0.0], 16, 32).unwrap();
        assert_eq!(nm.b_sup, 0.0);
        assert_eq!(nm.dphi_sup, 0.0);
        // |a| = 2|ξ·ν||ξ′|/r ≤ 1/r; maximum 1 at r = 1, 45 degrees.
        assert!(nm.a_sup <= 1.0 + 1e-12 && nm.a_sup > 0.95);
        let sk = ProblemSpec::new(
            AnnularDomain::skewed([0.1, 0.0], [0.0, 0.0], 0.5, 2.0).unwrap(),
            PsiSpec::Constant(1.0),
            1.0,
            PhiSpec::Constant(0.0),
        )
        .unwrap();
        assert!(matches!(sample_barrier_norms(&sk, &[1.0, 0.0], 16, 32), Err(BoundsError::UnsupportedDomain(_))));
    }

    #[test]
    fn barrier_norms_refinement_stable() {
        let d = AnnularDomain::concentric(2, 1.0, 2.0).unwrap();
        let s = ProblemSpec::new(d, PsiSpec::Constant(1.0), 1.0, PhiSpec::field(|x| 1.0 + 0.1 * x[0] * x[1])).unwrap();
        let a = sample_barrier_norms(&s, &[0.6, 0.8], 24, 48).unwrap();
        let b = sample_barrier_norms(&s, &[0.6, 0.8], 48, 96).unwrap();
        for (x, y) in [
            (a.a_sup, b.a_sup),
            (a.da_sup, b.da_sup),
            (a.d2a_sup, b.d2a_sup),
            (a.bbar_sup, b.bbar_sup),
            (a.dbbar_sup, b.dbbar_sup),
            (a.d2bbar_sup, b.d2bbar_sup),
            (a.dphi_sup, b.dphi_sup),
            (a.d2phi_sup, b.d2phi_sup),
            (a.b_sup, b.b_sup),
        ] {
            assert!((x - y).abs() <= 0.02 * y.abs().max(1e-12), "{x} vs {y}");
        }
        assert!(a.d3phi_sup < 1e-5);
    }

    #[test]
    fn barrier_quadratic_symbolic() {
        // u = (|x|² − 4)/2, ξ = e₁, γ₀ = 0, φ constant: w = g(u) + a·x + M|x|².
        let (spec, sol) = {
            let sol = ClosedFormSolution::radial_2d(1.0, 1.0, 2.0, 1.0).unwrap();
            let spec = ProblemSpec::new(sol.domain(), PsiSpec::Constant(1.0), 0.0, PhiSpec::Constant(2.0)).unwrap();
            (spec, sol)
        };
        let grid = PolarGrid::new(8, 16, 1.0, 2.0);
        let b = BarrierSpec { gauge: Gauge::Reciprocal { m: 5.0 }, xi: vec![1.0, 0.0], m: 3.0, weight_n: None };
        let w = barrier_field(&sol, &spec, &b, grid).unwrap();
        for i in 0..grid.nr {
            for j in 0..grid.ntheta {
                let x = grid.point(i, j);
                let r2 = dot(&x, &x);
                let u = 0.5 * (r2 - 4.0);
                // a·x = 0 since ξ′ ⟂ x.
                let expect = 1.0 / (5.0 - u) + 3.0 * r2;
                assert_relative_eq!(w.at(i, j), expect, max_relative = 1e-12);
            }
        }
        let b0 = BarrierSpec { weight_n: Some(0.0), ..b.clone() };
        assert_eq!(barrier_field(&sol, &spec, &b0, grid).unwrap().values, w.values);
        let bad = BarrierSpec { gauge: Gauge::Reciprocal { m: -5.0 }, ..b };
        assert!(matches!(barrier_field(&sol, &spec, &bad, grid), Err(BoundsError::GaugeUndefined { .. })));
    }

    #[test]
    fn linearization_quadratic_and_radial() {
        let q = ClosedFormSolution::radial_2d(1.0, 1.0, 2.0, 1.0).unwrap();
        let r = linearization_identity_check(&q, &[1.2, 0.5], &[0.6, 0.8], 1e-2).unwrap();
        assert!(r.second_order <= 1e-10 && r.first_order <= 1e-10);
        let u = ClosedFormSolution::radial_2d(1.0, 1.0, 2.0, 0.5).unwrap();
        let hs = [1e-2, 5e-3, 2.5e-3];
        let errs: Vec<f64> = hs
            .iter()
            .map(|&h| linearization_identity_check(&u, &[1.5, 0.0], &[1.0, 0.0], h).unwrap().second_order)
            .collect();
        for o in observed_orders(&hs, &errs) {
            assert!(o >= 1.8, "order {o}, errors {errs:?}");
        }
        let r = linearization_identity_check(&u, &[1.5, 0.0], &[1.0, 0.0], 1e-3).unwrap();
        assert!(r.first_order <= 1e-8, "{r:?}");
    }

    #[test]
    fn flow_constant_examples() {
        use crate::domain::FlowData;
        use std::sync::Arc;
        let d = AnnularDomain::concentric(2, 1.0, 2.0).unwrap();
        let mk = |gamma0: f64, horizon: f64| {
            ProblemSpec::new(d.clone(), PsiSpec::Constant(1.0), gamma0, PhiSpec::Constant(4.0))
                .unwrap()
                .with_flow(FlowData { theta: Arc::new(|t| -t), phi: Arc::new(|_, t| 4.0 + t), horizon })
                .unwrap()
        };
        let f = flow_constants(&mk(2.0, 1.0), 2.0, None).unwrap();
        assert_relative_eq!(f.ct_upper, 1.0, max_relative = 1e-8);
        let f3 = flow_constants(&mk(2.0, 3.0), 2.0, None).unwrap();
        assert_relative_eq!(f3.c0_t, 5.0, max_relative = 1e-8);
        let big = flow_constants(&mk(1e6, 1.0), 2.0, None).unwrap();
        assert_relative_eq!(big.ct_upper, 1.0, max_relative = 1e-8);
        let rho = DefiningFunction::standard(&d);
        let with = flow_constants(&mk(2.0, 1.0), 1.5, Some((&rho, 1.0))).unwrap();
        assert_relative_eq!(with.c1_t.unwrap(), (2.5f64 / 0.25).max(2f64.powf(2.0 / 3.0)), max_relative = 1e-8);
        let deep = rho.scaled(1.5);
        assert!(matches!(
            flow_constants(&mk(2.0, 1.0), 1.5, Some((&DefiningFunction { sup_grad_on_outer: 1.0, ..deep }, 1.0))),
            Err(BoundsError::RhoTooDeep { .. })
        ));
        let plain = ProblemSpec::new(d.clone(), PsiSpec::Constant(1.0), 2.0, PhiSpec::Constant(4.0)).unwrap();
        assert!(matches!(flow_constants(&plain, 1.0, None), Err(BoundsError::MissingFlow)));
    }

    #[test]
    fn bounds_hold_on_radial_family() {
        for d in [1.0, 0.5, 0.1] {
            let (spec, sol) = radial_spec(d, 1.0);
            let c = stationary_constants(&spec, None, None).unwrap();
            let (u, ur, _) = sol.radial_profile(1.0).unwrap();
            assert!(u.abs() <= c.c0.as_ref().unwrap().value);
            let (_, ur2, _) = sol.radial_profile(2.0).unwrap();
            assert!(ur.max(ur2) <= c.c1.as_ref().unwrap().value);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn c0_monotone_in_psi(psi in 0.1f64..10.0, k in 0.01f64..0.24) {
            let a = c0_bound_from(psi, 1.0, k, 4.0, 1.0).unwrap();
            let b = c0_bound_from(2.0 * psi, 1.0, k, 4.0, 1.0).unwrap();
            prop_assert!(b >= a);
        }

        #[test]
        fn reciprocal_identity_pointwise(m in 0.5f64..100.0, t in 0.0f64..1.0) {
            let g = Gauge::Reciprocal { m };
            let u = -10.0 * t;
            let (gv, g1, _) = g.eval(u).unwrap();
            prop_assert!(g.identity_residual(u).unwrap().abs() <= 1e-12 * (1.0 + gv.powi(3)));
            prop_assert!(g1 >= 0.0);
        }
    }
}
