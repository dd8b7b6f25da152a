//! Exact solution families used as oracles.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::domain::{AnnularDomain, DomainError, PsiSpec};
use crate::quadrature::{integrate, QuadOptions};
use crate::{dot, norm, sub};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClosedFormError {
    #[error("point {point:?} lies outside the closed annulus")]
    OutOfDomain { point: Vec<f64> },
    #[error("validity clause violated: {0}")]
    ValidityViolated(String),
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),
    #[error("operation not supported for the {0} family")]
    UnsupportedFamily(&'static str),
    #[error("index {k} out of range for {len} values")]
    IndexOutOfRange { k: usize, len: usize },
    #[error("mu must exceed 1, got {mu}")]
    BadMu { mu: f64 },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Value, gradient and Hessian at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub u: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

impl Jet {
    pub fn det(&self) -> f64 {
        self.hess.determinant()
    }

    pub fn min_eig(&self) -> f64 {
        self.hess.clone().symmetric_eigen().eigenvalues.min()
    }

    /// ξᵀ D²u η.
    pub fn hess_form(&self, xi: &[f64], eta: &[f64]) -> f64 {
        let a = DVector::from_column_slice(xi);
        let b = DVector::from_column_slice(eta);
        a.dot(&(&self.hess * b))
    }

    pub fn grad_dot(&self, v: &[f64]) -> f64 {
        self.grad.iter().zip(v).map(|(g, c)| g * c).sum()
    }
}

/// Anything that can produce a [`Jet`] at a point.
///
/// `jet` does not check domain membership; evaluators may return non-finite
/// values outside the region where their formula is defined.
pub trait Field: Send + Sync {
    fn dim(&self) -> usize;
    fn jet(&self, x: &[f64]) -> Jet;
}

/// Hessian `(u_r/r)(I − x̂x̂ᵀ) + u_rr x̂x̂ᵀ` of a radial function and its determinant.
pub fn radial_hessian(n: usize, r: f64, u_r: f64, u_rr: f64, x: &[f64]) -> (DMatrix<f64>, f64) {
    let t = u_r / r;
    let h = DMatrix::from_fn(n, n, |i, j| {
        let xx = x[i] * x[j] / (r * r);
        let delta = if i == j { 1.0 } else { 0.0 };
        t * (delta - xx) + u_rr * xx
    });
    let det = h.determinant();
    (h, det)
}

/// Monge-Ampère determinant in polar coordinates.
pub fn polar_det(u_r: f64, u_rr: f64, u_rtheta: f64, u_theta: f64, u_thetatheta: f64, r: f64) -> f64 {
    let m = u_rtheta - u_theta / r;
    u_rr * u_r / r + u_rr * u_thetatheta / (r * r) - m * m / (r * r)
}

fn radial_jet(n: usize, x: &[f64], u: f64, u_r: f64, u_rr: f64) -> Jet {
    let r = norm(x);
    let grad = DVector::from_iterator(n, x.iter().map(|c| u_r * c / r));
    let (hess, _) = radial_hessian(n, r, u_r, u_rr, x);
    Jet { u, grad, hess }
}

/// u^(k) in the plane: u = (ψ/2)[rS + D ln(r+S)] − const, S = √(r²+D),
/// D = −R₋² + (d/ψ)².
#[derive(Debug, Clone, PartialEq)]
pub struct RadialConcentric2D {
    psi: f64,
    r_inner: f64,
    r_outer: f64,
    d: f64,
    big_d: f64,
    offset: f64,
}

impl RadialConcentric2D {
    pub fn new(psi: f64, r_inner: f64, r_outer: f64, d: f64) -> Result<Self, ClosedFormError> {
        if !(psi > 0.0 && psi.is_finite()) {
            return Err(ClosedFormError::ParameterOutOfRange(format!("psi must be positive, got {psi}")));
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(ClosedFormError::ParameterOutOfRange(format!("d_k must be positive, got {d}")));
        }
        AnnularDomain::concentric(2, r_inner, r_outer)?;
        let big_d = -r_inner * r_inner + (d / psi) * (d / psi);
        let mut sol = Self { psi, r_inner, r_outer, d, big_d, offset: 0.0 };
        sol.offset = sol.raw(r_outer);
        Ok(sol)
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn r_inner(&self) -> f64 {
        self.r_inner
    }

    pub fn r_outer(&self) -> f64 {
        self.r_outer
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    /// D_k = −R₋² + (d/ψ)².
    pub fn big_d(&self) -> f64 {
        self.big_d
    }

    /// √(r² + D) formed as √((r−R₋)(r+R₋) + (d/ψ)²).
    fn s(&self, r: f64) -> f64 {
        let q = self.d / self.psi;
        ((r - self.r_inner) * (r + self.r_inner) + q * q).sqrt()
    }

    fn raw(&self, r: f64) -> f64 {
        let s = self.s(r);
        0.5 * self.psi * (r * s + self.big_d * (r + s).ln())
    }

    /// (u, u_r, u_rr) at radius r.
    pub fn profile(&self, r: f64) -> (f64, f64, f64) {
        let s = self.s(r);
        let u = if r == self.r_outer { 0.0 } else { self.raw(r) - self.offset };
        (u, self.psi * s, self.psi * r / s)
    }
}

/// Radial family in n dimensions: u_r = (ψⁿrⁿ − ψⁿR₋ⁿ + dⁿ)^{1/n}, u by
/// quadrature from u(R₊) = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialConcentricND {
    n: usize,
    psi: f64,
    r_inner: f64,
    r_outer: f64,
    d: f64,
}

impl RadialConcentricND {
    pub fn new(n: usize, psi: f64, r_inner: f64, r_outer: f64, d: f64) -> Result<Self, ClosedFormError> {
        if !(psi > 0.0 && psi.is_finite()) {
            return Err(ClosedFormError::ParameterOutOfRange(format!("psi must be positive, got {psi}")));
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(ClosedFormError::ParameterOutOfRange(format!("d_k must be positive, got {d}")));
        }
        AnnularDomain::concentric(n, r_inner, r_outer)?;
        Ok(Self { n, psi, r_inner, r_outer, d })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn r_inner(&self) -> f64 {
        self.r_inner
    }

    pub fn r_outer(&self) -> f64 {
        self.r_outer
    }

    pub fn u_r(&self, r: f64) -> f64 {
        // rⁿ − R₋ⁿ = (r − R₋) Σ r^k R₋^{n−1−k}
        let n = self.n;
        let sum: f64 = (0..n).map(|k| r.powi(k as i32) * self.r_inner.powi((n - 1 - k) as i32)).sum();
        let diff = (r - self.r_inner) * sum;
        (self.psi.powi(n as i32) * diff + self.d.powi(n as i32)).powf(1.0 / n as f64)
    }

    pub fn u_rr(&self, r: f64) -> f64 {
        let n = self.n as i32;
        let ur = self.u_r(r);
        self.psi.powi(n) * r.powi(n - 1) / ur.powi(n - 1)
    }

    pub fn u(&self, r: f64) -> f64 {
        if r == self.r_outer {
            return 0.0;
        }
        let opts = QuadOptions::with_rel_tol(1e-14);
        let q = integrate(|t| self.u_r(t), r, self.r_outer, &opts).expect("smooth radial integrand");
        -q.value
    }

    pub fn profile(&self, r: f64) -> (f64, f64, f64) {
        (self.u(r), self.u_r(r), self.u_rr(r))
    }
}

/// u = (ψ/2)|x − γ₊|² − (ψ/2)R₊² on a skewed planar annulus.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewedQuadratic {
    psi: f64,
    domain: AnnularDomain,
}

impl SkewedQuadratic {
    pub fn new(psi: f64, domain: AnnularDomain) -> Result<Self, ClosedFormError> {
        if !(psi > 0.0 && psi.is_finite()) {
            return Err(ClosedFormError::ParameterOutOfRange(format!("psi must be positive, got {psi}")));
        }
        if domain.dim() != 2 {
            return Err(ClosedFormError::ParameterOutOfRange("skewed quadratic is planar".into()));
        }
        Ok(Self { psi, domain })
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn domain(&self) -> &AnnularDomain {
        &self.domain
    }
}

/// v(x) = u^(k)(x − γ₊) on a skewed planar annulus.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewedShifted {
    inner: RadialConcentric2D,
    domain: AnnularDomain,
}

impl SkewedShifted {
    /// Requires |x − γ₊| ≥ R₋ of the radial solution on all of Ω̄ and a shared
    /// outer circle.
    pub fn new(inner: RadialConcentric2D, domain: AnnularDomain) -> Result<Self, ClosedFormError> {
        if domain.dim() != 2 {
            return Err(ClosedFormError::ParameterOutOfRange("skewed shifted family is planar".into()));
        }
        if (inner.r_outer - domain.r_outer()).abs() > 1e-12 * domain.r_outer() {
            return Err(ClosedFormError::ValidityViolated(format!(
                "radial outer radius {} differs from domain outer radius {}",
                inner.r_outer,
                domain.r_outer()
            )));
        }
        let gap = norm(&sub(&domain.center_outer(), &domain.center_inner()));
        let min_dist = (domain.r_inner() - gap).max(0.0);
        if min_dist < inner.r_inner {
            return Err(ClosedFormError::ValidityViolated(format!(
                "min |x − γ₊| over the domain is {min_dist}, below the radial inner radius {}",
                inner.r_inner
            )));
        }
        Ok(Self { inner, domain })
    }

    pub fn radial(&self) -> &RadialConcentric2D {
        &self.inner
    }

    pub fn domain(&self) -> &AnnularDomain {
        &self.domain
    }
}

/// Gradient blow-up family: u_r = −ln(a − r), a = e^{−d} + R₋.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBlowup {
    r_inner: f64,
    r_outer: f64,
    d: f64,
    a: f64,
}

impl GradientBlowup {
    pub fn new(r_inner: f64, r_outer: f64, d: f64) -> Result<Self, ClosedFormError> {
        AnnularDomain::concentric(2, r_inner, r_outer)?;
        let width = r_outer - r_inner;
        if width >= 1.0 {
            return Err(ClosedFormError::ParameterOutOfRange(format!("r_outer − r_inner = {width} must be below 1")));
        }
        let d_max = -width.ln();
        if !(d > 0.0 && d < d_max) {
            return Err(ClosedFormError::ParameterOutOfRange(format!("d_k = {d} must lie in (0, {d_max})")));
        }
        Ok(Self { r_inner, r_outer, d, a: (-d).exp() + r_inner })
    }

    pub fn r_inner(&self) -> f64 {
        self.r_inner
    }

    pub fn r_outer(&self) -> f64 {
        self.r_outer
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    fn prim(&self, r: f64) -> f64 {
        let t = self.a - r;
        t * (t.ln() - 1.0)
    }

    pub fn profile(&self, r: f64) -> (f64, f64, f64) {
        let t = self.a - r;
        let u = if r == self.r_outer { 0.0 } else { self.prim(r) - self.prim(self.r_outer) };
        (u, -t.ln(), 1.0 / t)
    }

    /// sup |Du| = u_r(R₊) = −ln(e^{−d} + R₋ − R₊).
    pub fn sup_grad(&self) -> f64 {
        -(self.a - self.r_outer).ln()
    }

    /// Robin data φ = d − γ₀u(R₋).
    pub fn phi(&self, gamma0: f64) -> f64 {
        let e = (-self.d).exp();
        let t = self.a - self.r_outer;
        self.d + gamma0 * (e * (self.d + 1.0) + t * (t.ln() - 1.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClosedFormSolution {
    Radial2D(RadialConcentric2D),
    RadialND(RadialConcentricND),
    SkewedQuadratic(SkewedQuadratic),
    SkewedShifted(SkewedShifted),
    GradientBlowup(GradientBlowup),
}

impl ClosedFormSolution {
    pub fn radial_2d(psi: f64, r_inner: f64, r_outer: f64, d: f64) -> Result<Self, ClosedFormError> {
        RadialConcentric2D::new(psi, r_inner, r_outer, d).map(Self::Radial2D)
    }

    pub fn radial_nd(n: usize, psi: f64, r_inner: f64, r_outer: f64, d: f64) -> Result<Self, ClosedFormError> {
        RadialConcentricND::new(n, psi, r_inner, r_outer, d).map(Self::RadialND)
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Self::Radial2D(_) => "radial2d",
            Self::RadialND(_) => "radial-nd",
            Self::SkewedQuadratic(_) => "skewed-quadratic",
            Self::SkewedShifted(_) => "skewed-shifted",
            Self::GradientBlowup(_) => "blowup",
        }
    }

    pub fn domain(&self) -> AnnularDomain {
        let conc = |n, a, b| AnnularDomain::concentric(n, a, b).expect("validated at construction");
        match self {
            Self::Radial2D(s) => conc(2, s.r_inner, s.r_outer),
            Self::RadialND(s) => conc(s.n, s.r_inner, s.r_outer),
            Self::SkewedQuadratic(s) => s.domain.clone(),
            Self::SkewedShifted(s) => s.domain.clone(),
            Self::GradientBlowup(s) => conc(2, s.r_inner, s.r_outer),
        }
    }

    pub fn is_radial(&self) -> bool {
        matches!(self, Self::Radial2D(_) | Self::RadialND(_) | Self::GradientBlowup(_))
    }

    /// (u, u_r, u_rr) at radius r for radial families.
    pub fn radial_profile(&self, r: f64) -> Result<(f64, f64, f64), ClosedFormError> {
        match self {
            Self::Radial2D(s) => Ok(s.profile(r)),
            Self::RadialND(s) => Ok(s.profile(r)),
            Self::GradientBlowup(s) => Ok(s.profile(r)),
            _ => Err(ClosedFormError::UnsupportedFamily(self.family_name())),
        }
    }

    /// The right-hand side the family solves.
    pub fn psi_spec(&self) -> PsiSpec {
        match self {
            Self::Radial2D(s) => PsiSpec::Constant(s.psi),
            Self::RadialND(s) => PsiSpec::Constant(s.psi),
            Self::SkewedQuadratic(s) => PsiSpec::Constant(s.psi),
            Self::SkewedShifted(s) => PsiSpec::Constant(s.inner.psi),
            Self::GradientBlowup(_) => PsiSpec::blowup_counterexample(),
        }
    }

    /// ψⁿ(x, u, Du) along this solution.
    pub fn psi_n(&self, x: &[f64], jet: &Jet) -> f64 {
        let p: Vec<f64> = jet.grad.iter().copied().collect();
        match self {
            Self::GradientBlowup(_) => {
                let r = norm(x);
                let xp = dot(x, &p);
                (xp / (r * r)) * (xp / r).exp()
            }
            _ => self.psi_spec().psi_n(x, jet.u, &p),
        }
    }

    /// Evaluation on Ω̄.
    pub fn eval(&self, x: &[f64]) -> Result<Jet, ClosedFormError> {
        if !self.domain().contains(x) {
            return Err(ClosedFormError::OutOfDomain { point: x.to_vec() });
        }
        Ok(self.jet(x))
    }

    /// Double normal derivative on Γ⁻. In the plane this returns
    /// ψ²R₋/d + d/R₋ (which is u_rr + u_r/R₋); for the n-D family it returns
    /// ψⁿR₋^{n−1}/d^{n−1}.
    pub fn inner_dnn(&self) -> Result<f64, ClosedFormError> {
        match self {
            Self::Radial2D(s) => Ok(s.psi * s.psi * s.r_inner / s.d + s.d / s.r_inner),
            Self::RadialND(s) => Ok(s.u_rr(s.r_inner)),
            Self::GradientBlowup(s) => {
                let (_, ur, urr) = s.profile(s.r_inner);
                Ok(urr + ur / s.r_inner)
            }
            _ => Err(ClosedFormError::UnsupportedFamily(self.family_name())),
        }
    }

    /// νᵀD²uν on Γ⁻ for radial families.
    pub fn inner_u_rr(&self) -> Result<f64, ClosedFormError> {
        match self {
            Self::Radial2D(s) => Ok(s.psi * s.psi * s.r_inner / s.d),
            Self::RadialND(s) => Ok(s.u_rr(s.r_inner)),
            Self::GradientBlowup(s) => Ok(s.profile(s.r_inner).2),
            _ => Err(ClosedFormError::UnsupportedFamily(self.family_name())),
        }
    }

    /// Robin data φ(x) = u_ν − γ₀u at a point of Γ⁻.
    pub fn robin_phi(&self, gamma0: f64, x: &[f64]) -> Result<f64, ClosedFormError> {
        let nu = self.domain().inner_normal(x)?;
        let j = self.jet(x);
        Ok(j.grad_dot(&nu) - gamma0 * j.u)
    }
}

impl Field for ClosedFormSolution {
    fn dim(&self) -> usize {
        match self {
            Self::RadialND(s) => s.n,
            _ => 2,
        }
    }

    fn jet(&self, x: &[f64]) -> Jet {
        match self {
            Self::Radial2D(s) => {
                let (u, ur, urr) = s.profile(norm(x));
                radial_jet(2, x, u, ur, urr)
            }
            Self::RadialND(s) => {
                let (u, ur, urr) = s.profile(norm(x));
                radial_jet(s.n, x, u, ur, urr)
            }
            Self::GradientBlowup(s) => {
                let (u, ur, urr) = s.profile(norm(x));
                radial_jet(2, x, u, ur, urr)
            }
            Self::SkewedQuadratic(s) => {
                let y = sub(x, &s.domain.center_outer());
                let ro = s.domain.r_outer();
                Jet {
                    u: 0.5 * s.psi * (dot(&y, &y) - ro * ro),
                    grad: DVector::from_iterator(2, y.iter().map(|c| s.psi * c)),
                    hess: DMatrix::identity(2, 2) * s.psi,
                }
            }
            Self::SkewedShifted(s) => {
                let y = sub(x, &s.domain.center_outer());
                let (u, ur, urr) = s.inner.profile(norm(&y));
                radial_jet(2, &y, u, ur, urr)
            }
        }
    }
}

/// u_ν = ψ[(γ₋ − γ₊)·ν + R₋] on Γ⁻ for the skewed quadratic.
pub fn skewed_inner_neumann(sol: &SkewedQuadratic, x: &[f64]) -> Result<f64, ClosedFormError> {
    let dom = &sol.domain;
    let nu = dom.inner_normal(x)?;
    let shift = sub(&dom.center_inner(), &dom.center_outer());
    Ok(sol.psi * (dot(&shift, &nu) + dom.r_inner()))
}

/// φ_k = d − γ₀u^(k)(R₋) for the planar radial family.
pub fn phi_k_value(psi: f64, gamma0: f64, r_inner: f64, r_outer: f64, d: f64) -> Result<f64, ClosedFormError> {
    let s = RadialConcentric2D::new(psi, r_inner, r_outer, d)?;
    Ok(d - gamma0 * s.profile(r_inner).0)
}

/// φ^ψ_∞ = (ψγ₀/2)[μ√(μ²−1) − ln(μ + √(μ²−1))]R₋².
pub fn critical_phi(psi: f64, gamma0: f64, r_inner: f64, mu: f64) -> Result<f64, ClosedFormError> {
    if !(mu > 1.0) {
        return Err(ClosedFormError::BadMu { mu });
    }
    if !(psi > 0.0 && gamma0 > 0.0 && r_inner > 0.0) {
        return Err(ClosedFormError::ParameterOutOfRange("psi, gamma0 and r_inner must be positive".into()));
    }
    let root = ((mu - 1.0) * (mu + 1.0)).sqrt();
    Ok(0.5 * psi * gamma0 * (mu * root - mu.acosh()) * r_inner * r_inner)
}

/// Data sequence φ_k for decreasing slopes d_k.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiSequence {
    pub psi: f64,
    pub gamma0: f64,
    pub r_inner: f64,
    pub r_outer: f64,
    d_values: Vec<f64>,
}

impl PhiSequence {
    pub fn new(psi: f64, gamma0: f64, r_inner: f64, r_outer: f64, d_values: Vec<f64>) -> Result<Self, ClosedFormError> {
        if d_values.iter().any(|d| !(*d > 0.0)) {
            return Err(ClosedFormError::ParameterOutOfRange("d values must be positive".into()));
        }
        if d_values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(ClosedFormError::ParameterOutOfRange("d values must be strictly decreasing".into()));
        }
        RadialConcentric2D::new(psi, r_inner, r_outer, 1.0)?;
        Ok(Self { psi, gamma0, r_inner, r_outer, d_values })
    }

    pub fn d_values(&self) -> &[f64] {
        &self.d_values
    }

    pub fn phi_k(&self, k: usize) -> Result<f64, ClosedFormError> {
        let d = *self
            .d_values
            .get(k)
            .ok_or(ClosedFormError::IndexOutOfRange { k, len: self.d_values.len() })?;
        phi_k_value(self.psi, self.gamma0, self.r_inner, self.r_outer, d)
    }

    /// The limit φ^ψ_∞ with μ = R₊/R₋.
    pub fn limit(&self) -> Result<f64, ClosedFormError> {
        critical_phi(self.psi, self.gamma0, self.r_inner, self.r_outer / self.r_inner)
    }
}

/// Output of [`blowup_gradient_family`].
#[derive(Debug, Clone, PartialEq)]
pub struct BlowupFamily {
    pub solution: ClosedFormSolution,
    pub sup_grad: f64,
    pub phi: f64,
}

pub fn blowup_gradient_family(fam: &GradientBlowup, gamma0: f64) -> BlowupFamily {
    BlowupFamily {
        solution: ClosedFormSolution::GradientBlowup(fam.clone()),
        sup_grad: fam.sup_grad(),
        phi: fam.phi(gamma0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::tangent_directions;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn u_k(d: f64) -> ClosedFormSolution {
        ClosedFormSolution::radial_2d(1.0, 1.0, 2.0, d).unwrap()
    }

    #[test]
    fn quadratic_reduction() {
        let j = u_k(1.0).eval(&[1.5, 0.0]).unwrap();
        assert_relative_eq!(j.u, -0.875, epsilon = 1e-14);
        assert_eq!(u_k(1.0).eval(&[2.0, 0.0]).unwrap().u, 0.0);
        let j = u_k(0.5).eval(&[1.0, 0.0]).unwrap();
        assert_relative_eq!(j.grad[0], 0.5, epsilon = 1e-15);
        assert!(matches!(u_k(0.5).eval(&[0.5, 0.0]), Err(ClosedFormError::OutOfDomain { .. })));
    }

    #[test]
    fn nd_matches_planar_for_n2() {
        let a = u_k(0.3);
        let b = ClosedFormSolution::radial_nd(2, 1.0, 1.0, 2.0, 0.3).unwrap();
        for r in [1.0, 1.2, 1.7, 2.0] {
            let (ja, jb) = (a.jet(&[r, 0.0]), b.jet(&[r, 0.0]));
            assert_relative_eq!(ja.u, jb.u, epsilon = 1e-13);
            assert_relative_eq!(ja.hess[(0, 0)], jb.hess[(0, 0)], max_relative = 1e-13);
        }
    }

    #[test]
    fn inner_dnn_values() {
        let s = u_k(0.1);
        assert_relative_eq!(s.inner_dnn().unwrap(), 10.1, max_relative = 1e-14);
        let s3 = ClosedFormSolution::radial_nd(3, 1.0, 1.0, 2.0, 0.1).unwrap();
        assert_relative_eq!(s3.inner_dnn().unwrap(), 100.0, max_relative = 1e-12);
        assert_relative_eq!(u_k(1.0).inner_dnn().unwrap(), 2.0, max_relative = 1e-15);
        // planar value is the Hessian trace on Γ⁻; n-D value is νᵀD²uν
        let j = s.jet(&[1.0, 0.0]);
        assert_relative_eq!(j.hess.trace(), 10.1, max_relative = 1e-12);
        let j3 = s3.jet(&[0.0, 1.0, 0.0]);
        assert_relative_eq!(j3.hess[(1, 1)], 100.0, max_relative = 1e-12);
    }

    #[test]
    fn skewed_spot_values() {
        let dom = AnnularDomain::skewed([0.25, 0.0], [1.0, 0.0], 0.5, 2.0).unwrap();
        let q = SkewedQuadratic::new(1.0, dom.clone()).unwrap();
        assert!((skewed_inner_neumann(&q, &[0.75, 0.0]).unwrap() + 0.25).abs() < 1e-12);
        let y = 5f64.sqrt() / 6.0;
        for s in [1.0, -1.0] {
            assert!(skewed_inner_neumann(&q, &[7.0 / 12.0, s * y]).unwrap().abs() < 1e-12);
        }
        let sol = ClosedFormSolution::SkewedQuadratic(q.clone());
        let x = [0.75, 0.0];
        let nu = dom.inner_normal(&x).unwrap();
        assert!((sol.eval(&x).unwrap().grad_dot(&nu) + 0.25).abs() < 1e-12);
        let conc = AnnularDomain::skewed([0.1, 0.0], [0.1, 0.0], 0.5, 2.0).unwrap();
        let qc = SkewedQuadratic::new(2.0, conc.clone()).unwrap();
        for t in [0.0, 1.0, 2.5] {
            let x = conc.inner_point_2d(t);
            assert!((skewed_inner_neumann(&qc, &x).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shifted_validity() {
        let dom = AnnularDomain::skewed([0.25, 0.0], [0.5, 0.0], 1.0, 2.0).unwrap();
        // min |x − γ₊| = 1 − 0.25 = 0.75
        let ok = RadialConcentric2D::new(1.0, 0.7, 2.0, 0.4).unwrap();
        assert!(SkewedShifted::new(ok, dom.clone()).is_ok());
        let bad = RadialConcentric2D::new(1.0, 0.8, 2.0, 0.4).unwrap();
        assert!(matches!(SkewedShifted::new(bad, dom), Err(ClosedFormError::ValidityViolated(_))));
    }

    #[test]
    fn phi_k_examples() {
        assert_relative_eq!(phi_k_value(1.0, 1.0, 1.0, 2.0, 1.0).unwrap(), 2.5, epsilon = 1e-14);
        assert_relative_eq!(phi_k_value(1.0, 1.0, 1.0, 2.0, 0.5).unwrap(), 1.703925841617719, epsilon = 1e-13);
        let seq = PhiSequence::new(1.0, 1.0, 1.0, 2.0, vec![1.0, 0.5, 0.1, 1e-3]).unwrap();
        let vals: Vec<f64> = (0..4).map(|k| seq.phi_k(k).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[0] > w[1]));
        assert!(vals.iter().all(|v| *v > seq.limit().unwrap()));
        assert!(matches!(seq.phi_k(4), Err(ClosedFormError::IndexOutOfRange { .. })));
        assert!(PhiSequence::new(1.0, 1.0, 1.0, 2.0, vec![0.5, 1.0]).is_err());
    }

    #[test]
    fn critical_phi_examples() {
        let expected = 0.5 * (2.0 * 3f64.sqrt() - (2.0 + 3f64.sqrt()).ln());
        assert_relative_eq!(critical_phi(1.0, 1.0, 1.0, 2.0).unwrap(), expected, max_relative = 1e-15);
        assert_relative_eq!(expected, 1.073571859106469, max_relative = 1e-14);
        assert!(critical_phi(1.0, 1.0, 1.0, 1.0 + 1e-12).unwrap().abs() < 1e-15);
        assert_relative_eq!(
            critical_phi(2.0, 1.0, 1.0, 2.0).unwrap(),
            2.0 * expected,
            max_relative = 1e-15
        );
        assert!(matches!(critical_phi(1.0, 1.0, 1.0, 1.0), Err(ClosedFormError::BadMu { .. })));
    }

    #[test]
    fn blowup_family() {
        let fam = GradientBlowup::new(1.0, 1.5, 0.5).unwrap();
        let out = blowup_gradient_family(&fam, 1.0);
        assert_relative_eq!(out.sup_grad, -((-0.5f64).exp() - 0.5).ln(), max_relative = 1e-15);
        assert_relative_eq!(out.sup_grad, 2.2393224506378187, max_relative = 1e-14);
        let (u_in, ur_in, _) = fam.profile(1.0);
        assert_relative_eq!(ur_in, 0.5, max_relative = 1e-15);
        assert_relative_eq!(out.phi, 0.5 - u_in, max_relative = 1e-14);
        assert_eq!(fam.profile(1.5).0, 0.0);
        let near = GradientBlowup::new(1.0, 1.5, 2f64.ln() - 1e-9).unwrap();
        assert!(near.sup_grad() > 19.0);
        assert!(GradientBlowup::new(1.0, 2.0, 0.1).is_err());
        assert!(GradientBlowup::new(1.0, 1.5, 0.7).is_err());
    }

    #[test]
    fn polar_det_examples() {
        let psi = 1.7;
        let r = 1.3;
        assert_relative_eq!(polar_det(psi * r, psi, 0.0, 0.0, 0.0, r), psi * psi, max_relative = 1e-15);
        assert_relative_eq!(polar_det(0.4, 2.0, 0.0, 0.0, 0.0, 1.6), 2.0 * 0.4 / 1.6, max_relative = 1e-15);
        assert_eq!(polar_det(0.0, 0.0, 0.6, 0.6 * 2.0, 3.0, 2.0), 0.0);
    }

    #[test]
    fn radial_hessian_examples() {
        let x = [0.3, -0.4, 1.2];
        let r = norm(&x);
        let (h, det) = radial_hessian(3, r, r, 1.0, &x);
        assert!((h - DMatrix::<f64>::identity(3, 3)).abs().max() < 1e-15);
        assert_relative_eq!(det, 1.0, max_relative = 1e-14);
        let (_, det) = radial_hessian(3, r, 2.0 * r, 2.0, &x);
        assert_relative_eq!(det, 8.0, max_relative = 1e-13);
        let (_, det2) = radial_hessian(2, 1.5, 0.8, 0.6, &[0.9, 1.2]);
        assert_relative_eq!(det2, polar_det(0.8, 0.6, 0.0, 0.0, 0.0, 1.5), max_relative = 1e-13);
    }

    #[test]
    fn tangential_identity_on_inner() {
        for sol in [u_k(0.5), ClosedFormSolution::radial_nd(3, 1.0, 1.0, 2.0, 0.3).unwrap()] {
            let n = sol.dim();
            let dom = sol.domain();
            for (x, nu) in dom.inner_samples().into_iter().step_by(97) {
                let j = sol.jet(&x);
                let ur = j.grad_dot(&nu);
                for xi in tangent_directions(&nu, 4) {
                    assert!((j.hess_form(&xi, &xi) - ur / dom.r_inner()).abs() < 1e-12);
                }
                assert_eq!(x.len(), n);
            }
        }
    }

    #[test]
    fn dnn_monotone_and_blowup() {
        let mut prev = 0.0;
        for m in 0..7 {
            let d = 10f64.powi(-m);
            let v = u_k(d).inner_dnn().unwrap();
            assert!(v > prev);
            assert!(v >= 10f64.powi(m) * (1.0 - 1e-9));
            prev = v;
        }
    }

    fn residuals(sol: &ClosedFormSolution, gamma0: f64) -> (f64, f64, f64) {
        let dom = sol.domain();
        let mut pde: f64 = 0.0;
        for x in dom.interior_samples(300) {
            let j = sol.eval(&x).unwrap();
            let rhs = sol.psi_n(&x, &j);
            pde = pde.max((j.det() - rhs).abs() / rhs.max(1.0));
            assert!(j.min_eig() > 0.0);
        }
        let outer = dom.outer_samples().iter().map(|(x, _)| sol.jet(x).u.abs()).fold(0.0, f64::max);
        let (x0, _) = &dom.inner_samples()[0];
        let phi = sol.robin_phi(gamma0, x0).unwrap();
        let robin = dom
            .inner_samples()
            .iter()
            .map(|(x, nu)| {
                let j = sol.jet(x);
                (j.grad_dot(nu) - gamma0 * j.u - phi).abs()
            })
            .fold(0.0, f64::max);
        (pde, outer, robin)
    }

    #[test]
    fn pde_and_bc_residuals() {
        let fams = vec![
            u_k(1.0),
            u_k(0.1),
            ClosedFormSolution::radial_nd(3, 1.3, 1.0, 2.0, 0.2).unwrap(),
            ClosedFormSolution::radial_nd(4, 0.8, 0.5, 1.0, 0.4).unwrap(),
            ClosedFormSolution::GradientBlowup(GradientBlowup::new(1.0, 1.5, 0.5).unwrap()),
        ];
        for sol in &fams {
            let (pde, outer, robin) = residuals(sol, 1.0);
            assert!(pde <= 1e-10, "{} pde {pde}", sol.family_name());
            assert!(outer <= 1e-12, "{} outer {outer}", sol.family_name());
            assert!(robin <= 1e-10, "{} robin {robin}", sol.family_name());
        }
    }

    proptest! {
        #[test]
        fn radial_pde_residual(d in 0.01f64..2.0, psi in 0.2f64..3.0, r in 1.0f64..2.0, t in 0.0f64..6.3) {
            let sol = ClosedFormSolution::radial_2d(psi, 1.0, 2.0, d).unwrap();
            let x = [r * t.cos(), r * t.sin()];
            let j = sol.jet(&x);
            prop_assert!((j.det() - psi * psi).abs() <= 1e-10 * (psi * psi).max(1.0));
            prop_assert!(j.min_eig() > 0.0);
        }

        #[test]
        fn phi_k_increasing_in_d(d in 0.001f64..2.0) {
            let a = phi_k_value(1.0, 1.0, 1.0, 2.0, d).unwrap();
            let b = phi_k_value(1.0, 1.0, 1.0, 2.0, d * 1.01).unwrap();
            prop_assert!(b > a);
        }

        #[test]
        fn critical_phi_increasing_in_psi(psi in 0.1f64..5.0, mu in 1.01f64..4.0) {
            let a = critical_phi(psi, 1.0, 1.0, mu).unwrap();
            let b = critical_phi(psi * 1.1, 1.0, 1.0, mu).unwrap();
            prop_assert!(b > a);
        }

        #[test]
        fn nd_hessian_det(n in 2usize..6, d in 0.05f64..1.5, r in 1.0f64..2.0) {
            let sol = ClosedFormSolution::radial_nd(n, 1.1, 1.0, 2.0, d).unwrap();
            let mut x = vec![0.0; n];
            x[n - 1] = r;
            let j = sol.jet(&x);
            prop_assert!((j.det() - 1.1f64.powi(n as i32)).abs() <= 1e-10 * 1.1f64.powi(n as i32));
        }
    }
}
