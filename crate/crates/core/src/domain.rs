//! Annular geometry, the right-hand side ψ, boundary data φ and the bundled
//! problem description.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::sampling::{halton, sphere_directions};
use crate::{dot, norm, sub, MAX_DIM};

/// Relative tolerance for boundary membership.
pub const BOUNDARY_TOL: f64 = 1e-12;

pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type XzFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
pub type XzpFn = Arc<dyn Fn(&[f64], f64, &[f64]) -> f64 + Send + Sync>;
pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type SpaceTimeFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("point is not on the boundary (relative distance {distance:e})")]
    PointNotOnBoundary { distance: f64 },
    #[error("direction is not tangent to the boundary (normal component {dot:e})")]
    NotTangent { dot: f64 },
    #[error("arc length {s} exceeds half the circumference")]
    ArcTooLong { s: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid right-hand side: {0}")]
    InvalidPsi(String),
    #[error("negative Gauss curvature K = {value:e} at {at:?}")]
    NegativeK { value: f64, at: Vec<f64> },
    #[error("invalid problem data: {0}")]
    InvalidProblem(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Concentric { dim: usize, r_inner: f64, r_outer: f64 },
    Skewed2D { center_inner: [f64; 2], center_outer: [f64; 2], r_inner: f64, r_outer: f64 },
}

/// Region between an inner sphere Γ⁻ and an outer sphere Γ⁺, both enclosing
/// the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnularDomain {
    kind: Kind,
}

impl AnnularDomain {
    pub fn concentric(dim: usize, r_inner: f64, r_outer: f64) -> Result<Self, DomainError> {
        if !(2..=MAX_DIM).contains(&dim) {
            return Err(DomainError::InvalidDomain(format!("dimension {dim} outside 2..={MAX_DIM}")));
        }
        if !(r_inner > 0.0 && r_inner.is_finite() && r_outer.is_finite()) {
            return Err(DomainError::InvalidDomain("radii must be positive and finite".into()));
        }
        if r_inner >= r_outer {
            return Err(DomainError::InvalidDomain(format!("r_inner {r_inner} must be below r_outer {r_outer}")));
        }
        Ok(Self { kind: Kind::Concentric { dim, r_inner, r_outer } })
    }

    pub fn skewed(center_inner: [f64; 2], center_outer: [f64; 2], r_inner: f64, r_outer: f64) -> Result<Self, DomainError> {
        let finite = center_inner.iter().chain(&center_outer).all(|c| c.is_finite());
        if !(finite && r_inner > 0.0 && r_outer.is_finite() && r_inner.is_finite()) {
            return Err(DomainError::InvalidDomain("centers and radii must be finite, radii positive".into()));
        }
        if norm(&center_inner) >= r_inner {
            return Err(DomainError::InvalidDomain("inner circle must enclose the origin".into()));
        }
        if norm(&center_outer) >= r_outer {
            return Err(DomainError::InvalidDomain("outer circle must enclose the origin".into()));
        }
        if norm(&sub(&center_outer, &center_inner)) >= r_outer - r_inner {
            return Err(DomainError::InvalidDomain("inner circle must lie strictly inside the outer circle".into()));
        }
        Ok(Self { kind: Kind::Skewed2D { center_inner, center_outer, r_inner, r_outer } })
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            Kind::Concentric { dim, .. } => dim,
            Kind::Skewed2D { .. } => 2,
        }
    }

    pub fn r_inner(&self) -> f64 {
        match self.kind {
            Kind::Concentric { r_inner, .. } | Kind::Skewed2D { r_inner, .. } => r_inner,
        }
    }

    pub fn r_outer(&self) -> f64 {
        match self.kind {
            Kind::Concentric { r_outer, .. } | Kind::Skewed2D { r_outer, .. } => r_outer,
        }
    }

    pub fn is_concentric(&self) -> bool {
        matches!(self.kind, Kind::Concentric { .. })
    }

    pub fn center_inner(&self) -> Vec<f64> {
        match &self.kind {
            Kind::Concentric { dim, .. } => vec![0.0; *dim],
            Kind::Skewed2D { center_inner, .. } => center_inner.to_vec(),
        }
    }

    pub fn center_outer(&self) -> Vec<f64> {
        match &self.kind {
            Kind::Concentric { dim, .. } => vec![0.0; *dim],
            Kind::Skewed2D { center_outer, .. } => center_outer.to_vec(),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), DomainError> {
        if x.len() != self.dim() {
            return Err(DomainError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    fn inner_offset(&self, x: &[f64]) -> f64 {
        (norm(&sub(x, &self.center_inner())) - self.r_inner()) / self.r_inner()
    }

    fn outer_offset(&self, x: &[f64]) -> f64 {
        (norm(&sub(x, &self.center_outer())) - self.r_outer()) / self.r_outer()
    }

    pub fn on_inner(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.inner_offset(x).abs() <= BOUNDARY_TOL
    }

    pub fn on_outer(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.outer_offset(x).abs() <= BOUNDARY_TOL
    }

    /// Membership in the closed annulus.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.inner_offset(x) >= -BOUNDARY_TOL && self.outer_offset(x) <= BOUNDARY_TOL
    }

    /// Inward (into Ω) unit normal on Γ⁻.
    pub fn inner_normal(&self, x: &[f64]) -> Result<Vec<f64>, DomainError> {
        self.check_dim(x)?;
        let off = self.inner_offset(x);
        if off.abs() > BOUNDARY_TOL {
            return Err(DomainError::PointNotOnBoundary { distance: off.abs() });
        }
        let v = sub(x, &self.center_inner());
        let r = norm(&v);
        Ok(v.into_iter().map(|c| c / r).collect())
    }

    fn check_tangent(&self, x: &[f64], xi: &[f64]) -> Result<Vec<f64>, DomainError> {
        let nu = self.inner_normal(x)?;
        self.check_dim(xi)?;
        let d = dot(&nu, xi);
        if d.abs() > 1e-10 || (norm(xi) - 1.0).abs() > 1e-10 {
            return Err(DomainError::NotTangent { dot: d });
        }
        Ok(nu)
    }

    /// Normal curvature of Γ⁻ at `x` in the tangent direction `xi`.
    pub fn normal_curvature(&self, x: &[f64], xi: &[f64]) -> Result<f64, DomainError> {
        self.check_tangent(x, xi)?;
        Ok(1.0 / self.r_inner())
    }

    /// Unit-speed geodesic on Γ⁻ through `x0` with initial velocity `xi`.
    pub fn geodesic_on_inner(&self, x0: &[f64], xi: &[f64], s: f64) -> Result<Vec<f64>, DomainError> {
        let nu = self.check_tangent(x0, xi)?;
        let r = self.r_inner();
        if s.abs() > PI * r {
            return Err(DomainError::ArcTooLong { s });
        }
        Ok(geodesic_point(&self.center_inner(), r, &nu, xi, s))
    }

    /// m₀ = min over Γ⁻ of ⟨x, ν(x)⟩.
    pub fn min_support(&self) -> f64 {
        self.r_inner() - norm(&self.center_inner())
    }

    /// max over Ω̄ of |x|².
    pub fn max_norm_sq(&self) -> f64 {
        let r = norm(&self.center_outer()) + self.r_outer();
        r * r
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.r_outer()
    }

    /// Distance from `x` to Γ⁺ (nonnegative inside the outer ball).
    pub fn dist_to_outer(&self, x: &[f64]) -> f64 {
        self.r_outer() - norm(&sub(x, &self.center_outer()))
    }

    /// Radial extent along the unit ray `dir` from the origin: (ρ⁻, ρ⁺) with
    /// Ω ∩ ray = [ρ⁻, ρ⁺]. Both circles enclose the origin, so Ω is star-shaped.
    pub fn ray_extent(&self, dir: &[f64]) -> (f64, f64) {
        let hit = |c: &[f64], r: f64| {
            let b = dot(c, dir);
            b + (b * b - dot(c, c) + r * r).sqrt()
        };
        (hit(&self.center_inner(), self.r_inner()), hit(&self.center_outer(), self.r_outer()))
    }

    /// Sample of (point, inward normal) pairs on Γ⁻.
    pub fn inner_samples(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        let c = self.center_inner();
        let r = self.r_inner();
        boundary_directions(self.dim())
            .into_iter()
            .map(|nu| {
                let x = c.iter().zip(&nu).map(|(ci, ni)| ci + r * ni).collect();
                (x, nu)
            })
            .collect()
    }

    /// Sample of (point, outward unit normal) pairs on Γ⁺.
    pub fn outer_samples(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        let c = self.center_outer();
        let r = self.r_outer();
        boundary_directions(self.dim())
            .into_iter()
            .map(|nrm| {
                let x = c.iter().zip(&nrm).map(|(ci, ni)| ci + r * ni).collect();
                (x, nrm)
            })
            .collect()
    }

    /// Point on Γ⁻ for the planar angle θ (2-D only).
    pub fn inner_point_2d(&self, theta: f64) -> Vec<f64> {
        let c = self.center_inner();
        let r = self.r_inner();
        vec![c[0] + r * theta.cos(), c[1] + r * theta.sin()]
    }

    /// `count` quasi-random points in Ω̄.
    pub fn interior_samples(&self, count: usize) -> Vec<Vec<f64>> {
        let n = self.dim();
        let dirs = sphere_directions(n, count.max(1));
        let radial = halton(1, count);
        dirs.iter()
            .zip(&radial)
            .map(|(dir, t)| {
                let (lo, hi) = self.ray_extent(dir);
                let rho = lo + t[0] * (hi - lo);
                dir.iter().map(|d| d * rho).collect()
            })
            .collect()
    }
}

fn boundary_directions(dim: usize) -> Vec<Vec<f64>> {
    match dim {
        2 => sphere_directions(2, 720),
        3 => sphere_directions(3, 1282),
        n => sphere_directions(n, 2000),
    }
}

pub(crate) fn geodesic_point(center: &[f64], r: f64, nu: &[f64], xi: &[f64], s: f64) -> Vec<f64> {
    let (sn, cs) = (s / r).sin_cos();
    (0..center.len()).map(|k| center[k] + r * (cs * nu[k] + sn * xi[k])).collect()
}

/// ⟨(ν,0),(p,−1)⟩ / ⟨−e_{n+1},(p,−1)⟩ in R^{n+1}.
pub fn graph_angle_ratio(p: &[f64], nu: &[f64]) -> f64 {
    let mut lifted_nu = nu.to_vec();
    lifted_nu.push(0.0);
    let mut lifted_p = p.to_vec();
    lifted_p.push(-1.0);
    let mut down = vec![0.0; p.len()];
    down.push(-1.0);
    dot(&lifted_nu, &lifted_p) / dot(&down, &lifted_p)
}

/// Right-hand side ψ of `det D²u = ψⁿ(x, u, Du)`.
#[derive(Clone)]
pub enum PsiSpec {
    Constant(f64),
    OfX(ScalarFn),
    /// Must be nondecreasing in z.
    OfXZ(XzFn),
    /// Must be nondecreasing in z.
    OfXZP(XzpFn),
    /// ψⁿ = K(x)(1+|p|²)^{(n+2)/2}.
    GaussCurvature(ScalarFn),
}

impl fmt::Debug for PsiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PsiSpec::Constant(v) => write!(f, "Constant({v})"),
            PsiSpec::OfX(_) => write!(f, "OfX(..)"),
            PsiSpec::OfXZ(_) => write!(f, "OfXZ(..)"),
            PsiSpec::OfXZP(_) => write!(f, "OfXZP(..)"),
            PsiSpec::GaussCurvature(_) => write!(f, "GaussCurvature(..)"),
        }
    }
}

impl PsiSpec {
    pub fn of_x(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        PsiSpec::OfX(Arc::new(f))
    }

    pub fn of_xz(f: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        PsiSpec::OfXZ(Arc::new(f))
    }

    pub fn of_xzp(f: impl Fn(&[f64], f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        PsiSpec::OfXZP(Arc::new(f))
    }

    pub fn gauss_curvature(k: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        PsiSpec::GaussCurvature(Arc::new(k))
    }

    /// ψ² = (x·p/|x|²) exp(x·p/|x|) in the plane (gradient blow-up family).
    pub fn blowup_counterexample() -> Self {
        PsiSpec::of_xzp(|x, _z, p| {
            let r = norm(x);
            let xp = dot(x, p);
            ((xp / (r * r)) * (xp / r).exp()).max(0.0).sqrt()
        })
    }

    /// Inverse Gauss curvature flow data: ψⁿ = (1+|p|²)^{(n+3)/2}.
    pub fn igcf() -> Self {
        PsiSpec::of_xzp(|x, _z, p| {
            let n = x.len() as f64;
            (1.0 + dot(p, p)).powf((n + 3.0) / (2.0 * n))
        })
    }

    pub fn depends_on_z(&self) -> bool {
        matches!(self, PsiSpec::OfXZ(_) | PsiSpec::OfXZP(_))
    }

    pub fn depends_on_p(&self) -> bool {
        matches!(self, PsiSpec::OfXZP(_) | PsiSpec::GaussCurvature(_))
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self {
            PsiSpec::Constant(v) => Some(*v),
            _ => None,
        }
    }

    /// ψⁿ(x, z, p) with n = x.len().
    pub fn psi_n(&self, x: &[f64], z: f64, p: &[f64]) -> f64 {
        let n = x.len() as i32;
        match self {
            PsiSpec::Constant(v) => v.powi(n),
            PsiSpec::OfX(f) => f(x).powi(n),
            PsiSpec::OfXZ(f) => f(x, z).powi(n),
            PsiSpec::OfXZP(f) => f(x, z, p).powi(n),
            PsiSpec::GaussCurvature(k) => k(x) * (1.0 + dot(p, p)).powf((n as f64 + 2.0) / 2.0),
        }
    }

    pub fn psi(&self, x: &[f64], z: f64, p: &[f64]) -> f64 {
        match self {
            PsiSpec::Constant(v) => *v,
            PsiSpec::OfX(f) => f(x),
            PsiSpec::OfXZ(f) => f(x, z),
            PsiSpec::OfXZP(f) => f(x, z, p),
            PsiSpec::GaussCurvature(_) => self.psi_n(x, z, p).max(0.0).powf(1.0 / x.len() as f64),
        }
    }

    /// Samples 10³ quasi-random points of Ω̄ × [−10, 0] × B₁₀ and checks
    /// finiteness, sign, positivity (for ψ without p-dependence) and
    /// monotonicity in z.
    pub fn validate(&self, domain: &AnnularDomain) -> Result<(), DomainError> {
        if let PsiSpec::Constant(v) = self {
            if !(*v > 0.0 && v.is_finite()) {
                return Err(DomainError::InvalidPsi(format!("constant ψ must be positive, got {v}")));
            }
            return Ok(());
        }
        let n = domain.dim();
        let xs = domain.interior_samples(1000);
        let aux = halton((n + 2).min(12), 1000);
        for (x, h) in xs.iter().zip(&aux) {
            let z = -10.0 * h[0];
            let radius = 10.0 * h[1];
            let p: Vec<f64> = if n + 2 <= 12 {
                let dir: Vec<f64> = h[2..].iter().map(|c| 2.0 * c - 1.0).collect();
                let len = norm(&dir).max(1e-12);
                dir.iter().map(|c| radius * c / len).collect()
            } else {
                vec![0.0; n]
            };
            if let PsiSpec::GaussCurvature(k) = self {
                let kv = k(x);
                if !kv.is_finite() {
                    return Err(DomainError::InvalidPsi(format!("K is not finite at {x:?}")));
                }
                if kv < 0.0 {
                    return Err(DomainError::NegativeK { value: kv, at: x.clone() });
                }
                continue;
            }
            let v = self.psi(x, z, &p);
            if !v.is_finite() || v < 0.0 {
                return Err(DomainError::InvalidPsi(format!("ψ = {v} at x = {x:?}, z = {z}")));
            }
            if !self.depends_on_p() && v <= 0.0 {
                return Err(DomainError::InvalidPsi(format!("ψ must be positive, got {v} at {x:?}")));
            }
            if self.depends_on_z() {
                let dz = 1e-3;
                let up = self.psi(x, z + dz, &p);
                if up < v - 1e-12 * v.abs().max(1.0) {
                    return Err(DomainError::InvalidPsi(format!("ψ decreases in z at x = {x:?}, z = {z}")));
                }
            }
        }
        Ok(())
    }
}

/// Inner boundary data φ, with its smooth extension into Ω.
#[derive(Clone)]
pub enum PhiSpec {
    Constant(f64),
    Field(ScalarFn),
}

impl fmt::Debug for PhiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhiSpec::Constant(v) => write!(f, "Constant({v})"),
            PhiSpec::Field(_) => write!(f, "Field(..)"),
        }
    }
}

impl PhiSpec {
    pub fn field(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        PhiSpec::Field(Arc::new(f))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            PhiSpec::Constant(v) => *v,
            PhiSpec::Field(f) => f(x),
        }
    }
}

/// Time-dependent data for the flow problem.
#[derive(Clone)]
pub struct FlowData {
    /// Outer Dirichlet value ϑ(t).
    pub theta: TimeFn,
    /// Inner Robin data φ(x, t).
    pub phi: SpaceTimeFn,
    pub horizon: f64,
}

impl fmt::Debug for FlowData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FlowData").field("horizon", &self.horizon).finish_non_exhaustive()
    }
}

impl FlowData {
    pub fn theta_rate(&self, t: f64) -> f64 {
        let h = 1e-6 * t.abs().max(1.0);
        ((self.theta)(t + h) - (self.theta)(t - h)) / (2.0 * h)
    }

    pub fn phi_rate(&self, x: &[f64], t: f64) -> f64 {
        let h = 1e-6 * t.abs().max(1.0);
        ((self.phi)(x, t + h) - (self.phi)(x, t - h)) / (2.0 * h)
    }
}

#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub domain: AnnularDomain,
    pub psi: PsiSpec,
    pub gamma0: f64,
    pub phi: PhiSpec,
    pub flow: Option<FlowData>,
}

impl ProblemSpec {
    pub fn new(domain: AnnularDomain, psi: PsiSpec, gamma0: f64, phi: PhiSpec) -> Result<Self, DomainError> {
        if !(gamma0 >= 0.0 && gamma0.is_finite()) {
            return Err(DomainError::InvalidProblem(format!("gamma0 must be nonnegative, got {gamma0}")));
        }
        psi.validate(&domain)?;
        Ok(Self { domain, psi, gamma0, phi, flow: None })
    }

    pub fn with_flow(mut self, flow: FlowData) -> Result<Self, DomainError> {
        if !(flow.horizon >= 0.0 && flow.horizon.is_finite()) {
            return Err(DomainError::InvalidProblem("flow horizon must be nonnegative".into()));
        }
        let t0 = (flow.theta)(0.0);
        if t0.abs() > 1e-12 {
            return Err(DomainError::InvalidProblem(format!("theta(0) must vanish, got {t0}")));
        }
        self.flow = Some(flow);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// max over sampled Γ⁻ of |φ|.
    pub fn phi_max_inner(&self) -> f64 {
        match self.phi {
            PhiSpec::Constant(v) => v.abs(),
            _ => self.domain.inner_samples().iter().map(|(x, _)| self.phi.eval(x).abs()).fold(0.0, f64::max),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn skewed() -> AnnularDomain {
        AnnularDomain::skewed([0.25, 0.0], [1.0, 0.0], 0.5, 2.0).unwrap()
    }

    #[test]
    fn normals() {
        let d = AnnularDomain::concentric(2, 1.0, 2.0).unwrap();
        assert_eq!(d.inner_normal(&[1.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        let n = d.inner_normal(&[0.0, -1.0]).unwrap();
        assert!((n[0]).abs() < 1e-15 && (n[1] + 1.0).abs() < 1e-15);
        assert_eq!(skewed().inner_normal(&[0.75, 0.0]).unwrap(), vec![1.0, 0.0]);
        assert!(matches!(d.inner_normal(&[1.1, 0.0]), Err(DomainError::PointNotOnBoundary { .. })));
    }

    #[test]
    fn curvatures() {
        let d = AnnularDomain::concentric(2, 1.0, 2.0).unwrap();
        assert_eq!(d.normal_curvature(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        let half = AnnularDomain::concentric(3, 0.5, 2.0).unwrap();
        assert_eq!(half.normal_curvature(&[0.0, 0.0, 0.5], &[1.0, 0.0, 0.0]).unwrap(), 2.0);
        let s = skewed();
        let x = s.inner_point_2d(1.0);
        let nu = s.inner_normal(&x).unwrap();
        assert_eq!(s.normal_curvature(&x, &[-nu[1], nu[0]]).unwrap(), 2.0);
        assert!(matches!(d.normal_curvature(&[1.0, 0.0], &[1.0, 0.0]), Err(DomainError::NotTangent { .. })));
    }

    #[test]
    fn geodesics() {
        let d = AnnularDomain::concentric(2, 1.0, 2.0).unwrap();
        let g = d.geodesic_on_inner(&[1.0, 0.0], &[0.0, 1.0], PI / 2.0).unwrap();
        assert!(g[0].abs() < 1e-15 && (g[1] - 1.0).abs() < 1e-15);
        assert_eq!(d.geodesic_on_inner(&[1.0, 0.0], &[0.0, 1.0], 0.0).unwrap(), vec![1.0, 0.0]);
        let s3 = AnnularDomain::concentric(3, 1.0, 2.0).unwrap();
        let g = s3.geodesic_on_inner(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], PI).unwrap();
        assert!((g[0] + 1.0).abs() < 1e-15 && g[1].abs() < 1e-15 && g[2] == 0.0);
        assert!(s3.geodesic_on_inner(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], 3.2).is_err());
    }

    #[test]
    fn geodesic_second_derivative_order() {
        let d = AnnularDomain::concentric(3, 0.7, 2.0).unwrap();
        let x0 = [0.0, 0.7, 0.0];
        let xi = [0.6, 0.0, 0.8];
        let nu = d.inner_normal(&x0).unwrap();
        let kappa = d.normal_curvature(&x0, &xi).unwrap();
        let err = |h: f64| {
            let p = d.geodesic_on_inner(&x0, &xi, h).unwrap();
            let m = d.geodesic_on_inner(&x0, &xi, -h).unwrap();
            (0..3).map(|k| ((p[k] - 2.0 * x0[k] + m[k]) / (h * h) + kappa * nu[k]).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(0.04), err(0.02));
        assert!((e1 / e2).log2() >= 1.9, "order {}", (e1 / e2).log2());
    }

    #[test]
    fn support() {
        assert_eq!(AnnularDomain::concentric(2, 1.0, 2.0).unwrap().min_support(), 1.0);
        assert_eq!(AnnularDomain::concentric(4, 0.3, 2.0).unwrap().min_support(), 0.3);
        assert_eq!(skewed().min_support(), 0.25);
    }

    #[test]
    fn graph_angle_examples() {
        assert_eq!(graph_angle_ratio(&[2.0, 0.0], &[1.0, 0.0]), 2.0);
        assert_eq!(graph_angle_ratio(&[0.0, 0.0], &[0.6, 0.8]), 0.0);
        assert_eq!(graph_angle_ratio(&[1.0, 1.0], &[0.0, 1.0]), 1.0);
    }

    #[test]
    fn invalid_domains() {
        assert!(AnnularDomain::concentric(2, 2.0, 1.0).is_err());
        assert!(AnnularDomain::concentric(1, 1.0, 2.0).is_err());
        assert!(AnnularDomain::concentric(9, 1.0, 2.0).is_err());
        assert!(AnnularDomain::skewed([0.6, 0.0], [0.0, 0.0], 0.5, 2.0).is_err());
        assert!(AnnularDomain::skewed([0.0, 0.0], [1.6, 0.0], 0.5, 2.0).is_err());
        assert!(AnnularDomain::skewed([0.0, 0.0], [1.2, 0.0], 0.9, 2.0).is_err());
    }

    #[test]
    fn psi_validation() {
        let d = AnnularDomain::concentric(2, 1.0, 2.0).unwrap();
        assert!(PsiSpec::Constant(1.0).validate(&d).is_ok());
        assert!(PsiSpec::Constant(0.0).validate(&d).is_err());
        assert!(PsiSpec::of_xz(|_, z| (z).exp()).validate(&d).is_ok());
        assert!(PsiSpec::of_xz(|_, z| (-z).exp()).validate(&d).is_err());
        assert!(PsiSpec::gauss_curvature(|x| 2.0 - norm(x)).validate(&d).is_ok());
        assert!(matches!(
            PsiSpec::gauss_curvature(|x| 1.5 - norm(x)).validate(&d),
            Err(DomainError::NegativeK { .. })
        ));
        assert!(PsiSpec::blowup_counterexample().validate(&d).is_ok());
        assert!(PsiSpec::igcf().validate(&d).is_ok());
    }

    #[test]
    fn interior_samples_inside() {
        for d in [AnnularDomain::concentric(3, 1.0, 2.0).unwrap(), skewed()] {
            for x in d.interior_samples(500) {
                assert!(d.contains(&x), "{x:?}");
            }
        }
    }

    proptest! {
        #[test]
        fn graph_angle_matches_inner_product(p in prop::collection::vec(-10.0f64..10.0, 3), a in 0.0f64..6.3, b in 0.0f64..3.1) {
            let nu = [b.sin() * a.cos(), b.sin() * a.sin(), b.cos()];
            let diff = graph_angle_ratio(&p, &nu) - dot(&nu, &p);
            prop_assert!(diff.abs() <= 4.0 * f64::EPSILON * (1.0 + norm(&p)));
        }

        #[test]
        fn support_bounds_inner_product(cx in -0.2f64..0.2, cy in -0.2f64..0.2, theta in 0.0f64..6.3) {
            let d = AnnularDomain::skewed([cx, cy], [0.0, 0.0], 0.5, 2.0).unwrap();
            let x = d.inner_point_2d(theta);
            let nu = d.inner_normal(&x).unwrap();
            prop_assert!(dot(&x, &nu) >= d.min_support() - 1e-12);
        }

        #[test]
        fn geodesic_stays_on_sphere(s in -3.0f64..3.0, a in 0.0f64..6.3) {
            let d = AnnularDomain::concentric(3, 1.3, 2.0).unwrap();
            let x0 = [1.3 * a.cos(), 1.3 * a.sin(), 0.0];
            let xi = [0.0, 0.0, 1.0];
            let g = d.geodesic_on_inner(&x0, &xi, s).unwrap();
            prop_assert!((norm(&g) - 1.3).abs() <= 1e-12);
        }
    }
}
