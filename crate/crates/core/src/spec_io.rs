//! JSON problem specifications and the built-in presets.
//!
//! ψ, φ and K are either named built-ins or coefficient tables; there is no
//! expression language. Example:
//!
//! ```json
//! {"domain": {"kind": "concentric", "dim": 2, "r_inner": 1, "r_outer": 2},
//!  "psi": {"kind": "constant", "value": 1},
//!  "gamma0": 1,
//!  "phi": {"kind": "phi-k", "d_k": 0.5}}
//! ```

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closed_form::{ClosedFormError, ClosedFormSolution, GradientBlowup, SkewedQuadratic};
use crate::domain::{AnnularDomain, DomainError, FlowData, PhiSpec, ProblemSpec, PsiSpec};
use crate::norm;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    ClosedForm(#[from] ClosedFormError),
    #[error("{0}")]
    Invalid(String),
    #[error("unknown preset {0:?} (known: {PRESETS:?})")]
    UnknownPreset(String),
}

pub const PRESETS: [&str; 5] = ["paper-4.2", "paper-4.3", "paper-5.2", "paper-6-omega", "paper-7-flow"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainJson {
    Concentric { dim: usize, r_inner: f64, r_outer: f64 },
    Skewed { center_inner: [f64; 2], center_outer: [f64; 2], r_inner: f64, r_outer: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub powers: Vec<u32>,
    pub coeff: f64,
}

/// A scalar function of x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScalarJson {
    Constant { value: f64 },
    /// Σ coeff · Π x_i^{powers_i}.
    Polynomial { terms: Vec<Monomial> },
    /// Σ c_k |x|^k.
    RadialPolynomial { coeffs: Vec<f64> },
    /// c |x|^a.
    RadialPower { coeff: f64, exponent: f64 },
    /// Σ c_k cos(kθ) in the plane.
    AngularCos { coeffs: Vec<f64> },
}

type Scalar = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

impl ScalarJson {
    fn build(&self, dim: usize) -> Result<Scalar, SpecError> {
        Ok(match self.clone() {
            ScalarJson::Constant { value } => Arc::new(move |_| value),
            ScalarJson::Polynomial { terms } => {
                if let Some(m) = terms.iter().find(|m| m.powers.len() != dim) {
                    return Err(SpecError::Invalid(format!("monomial {:?} has {} powers, dimension is {dim}", m.powers, m.powers.len())));
                }
                Arc::new(move |x| {
                    terms.iter().map(|m| m.coeff * m.powers.iter().zip(x).map(|(&k, &xi)| xi.powi(k as i32)).product::<f64>()).sum()
                })
            }
            ScalarJson::RadialPolynomial { coeffs } => Arc::new(move |x| {
                let r = norm(x);
                coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c)
            }),
            ScalarJson::RadialPower { coeff, exponent } => Arc::new(move |x| coeff * norm(x).powf(exponent)),
            ScalarJson::AngularCos { coeffs } => {
                if dim != 2 {
                    return Err(SpecError::Invalid("angular-cos needs dimension 2".into()));
                }
                Arc::new(move |x| {
                    let t = x[1].atan2(x[0]);
                    coeffs.iter().enumerate().map(|(k, c)| c * (k as f64 * t).cos()).sum()
                })
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PsiJson {
    Constant { value: f64 },
    /// ψ = f(x).
    OfX { f: ScalarJson },
    /// ψⁿ = K(x)(1+|p|²)^{(n+2)/2}.
    GaussCurvature { k: ScalarJson },
    /// ψⁿ = (1+|p|²)^{(n+3)/2}.
    Igcf,
    /// The planar gradient blow-up right-hand side.
    BlowupCounterexample,
}

/// Robin data on the inner boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PhiJson {
    /// φ = d − γ₀u^(k)(R₋) for the radial family with inner slope d (constant ψ, concentric).
    PhiK { d_k: f64 },
    /// Data of the skewed quadratic (ψ/2)|x − γ₊|² − (ψ/2)R₊² (constant ψ, skewed).
    SkewedQuadratic,
    /// Data of the gradient blow-up family −ln(e^{−d} + R₋ − r).
    Blowup { d_k: f64 },
    #[serde(untagged)]
    Field(ScalarJson),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowJson {
    /// ϑ(t) = theta_rate · t.
    pub theta_rate: f64,
    /// φ(x, t) = φ(x) + phi_rate · t.
    pub phi_rate: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemJson {
    pub domain: DomainJson,
    pub psi: PsiJson,
    pub gamma0: f64,
    pub phi: PhiJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowJson>,
}

impl ProblemJson {
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serialises")
    }

    pub fn preset(name: &str) -> Result<Self, SpecError> {
        let conc = |a, b| DomainJson::Concentric { dim: 2, r_inner: a, r_outer: b };
        let one = PsiJson::Constant { value: 1.0 };
        Ok(match name {
            "paper-4.2" => Self { domain: conc(1.0, 2.0), psi: one, gamma0: 1.0, phi: PhiJson::PhiK { d_k: 0.5 }, flow: None },
            "paper-4.3" => Self {
                domain: DomainJson::Skewed { center_inner: [0.25, 0.0], center_outer: [1.0, 0.0], r_inner: 0.5, r_outer: 2.0 },
                psi: one,
                gamma0: 1.0,
                phi: PhiJson::SkewedQuadratic,
                flow: None,
            },
            "paper-5.2" => Self {
                domain: conc(1.0, 1.5),
                psi: PsiJson::BlowupCounterexample,
                gamma0: 1.0,
                phi: PhiJson::Blowup { d_k: 0.5 },
                flow: None,
            },
            "paper-6-omega" => Self {
                domain: conc(1.0, 2.0),
                psi: PsiJson::GaussCurvature { k: ScalarJson::Constant { value: 0.05 } },
                gamma0: 1.0,
                phi: PhiJson::Field(ScalarJson::Constant { value: 1.0 }),
                flow: None,
            },
            "paper-7-flow" => Self {
                domain: conc(1.0, 2.0),
                psi: one,
                gamma0: 2.0,
                phi: PhiJson::Field(ScalarJson::Constant { value: 4.0 }),
                flow: Some(FlowJson { theta_rate: -1.0, phi_rate: 1.0, horizon: 1.0 }),
            },
            other => return Err(SpecError::UnknownPreset(other.to_string())),
        })
    }

    pub fn build_domain(&self) -> Result<AnnularDomain, SpecError> {
        Ok(match &self.domain {
            DomainJson::Concentric { dim, r_inner, r_outer } => AnnularDomain::concentric(*dim, *r_inner, *r_outer)?,
            DomainJson::Skewed { center_inner, center_outer, r_inner, r_outer } => {
                AnnularDomain::skewed(*center_inner, *center_outer, *r_inner, *r_outer)?
            }
        })
    }

    fn constant_psi(&self, what: &str) -> Result<f64, SpecError> {
        match self.psi {
            PsiJson::Constant { value } => Ok(value),
            _ => Err(SpecError::Invalid(format!("{what} data needs a constant psi"))),
        }
    }

    /// The closed-form solution whose Robin data the `phi` entry names, if any.
    pub fn matched_solution(&self) -> Result<Option<ClosedFormSolution>, SpecError> {
        let dom = self.build_domain()?;
        Ok(match self.phi {
            PhiJson::PhiK { d_k } => {
                let psi = self.constant_psi("phi-k")?;
                if !dom.is_concentric() {
                    return Err(SpecError::Invalid("phi-k data needs a concentric domain".into()));
                }
                Some(match dom.dim() {
                    2 => ClosedFormSolution::radial_2d(psi, dom.r_inner(), dom.r_outer(), d_k)?,
                    n => ClosedFormSolution::radial_nd(n, psi, dom.r_inner(), dom.r_outer(), d_k)?,
                })
            }
            PhiJson::SkewedQuadratic => {
                let psi = self.constant_psi("skewed-quadratic")?;
                Some(ClosedFormSolution::SkewedQuadratic(SkewedQuadratic::new(psi, dom)?))
            }
            PhiJson::Blowup { d_k } => {
                if !(dom.is_concentric() && dom.dim() == 2) || self.psi != PsiJson::BlowupCounterexample {
                    return Err(SpecError::Invalid("blowup data needs a planar concentric domain and the blowup psi".into()));
                }
                Some(ClosedFormSolution::GradientBlowup(GradientBlowup::new(dom.r_inner(), dom.r_outer(), d_k)?))
            }
            PhiJson::Field(_) => None,
        })
    }

    pub fn to_spec(&self) -> Result<ProblemSpec, SpecError> {
        let dom = self.build_domain()?;
        let dim = dom.dim();
        let psi = match &self.psi {
            PsiJson::Constant { value } => PsiSpec::Constant(*value),
            PsiJson::OfX { f } => {
                let f = f.build(dim)?;
                PsiSpec::of_x(move |x| f(x))
            }
            PsiJson::GaussCurvature { k } => {
                let k = k.build(dim)?;
                PsiSpec::gauss_curvature(move |x| k(x))
            }
            PsiJson::Igcf => PsiSpec::igcf(),
            PsiJson::BlowupCounterexample => {
                if dim != 2 {
                    return Err(SpecError::Invalid("blowup-counterexample psi is planar".into()));
                }
                PsiSpec::blowup_counterexample()
            }
        };
        let gamma0 = self.gamma0;
        let phi = match (&self.phi, self.matched_solution()?) {
            (PhiJson::Field(ScalarJson::Constant { value }), _) => PhiSpec::Constant(*value),
            (PhiJson::Field(f), _) => {
                let f = f.build(dim)?;
                PhiSpec::field(move |x| f(x))
            }
            (_, Some(sol)) if sol.is_radial() => {
                let x = {
                    let mut v = vec![0.0; dim];
                    v[0] = dom.r_inner();
                    v
                };
                PhiSpec::Constant(sol.robin_phi(gamma0, &x)?)
            }
            (_, Some(sol)) => {
                let domain = dom.clone();
                PhiSpec::field(move |x| {
                    let y = domain.inner_point_2d(angle_on_inner(&domain, x));
                    sol.robin_phi(gamma0, &y).unwrap_or(f64::NAN)
                })
            }
            (_, None) => unreachable!("matched data always yields a solution"),
        };
        let mut spec = ProblemSpec::new(dom, psi, gamma0, phi)?;
        if let Some(fl) = &self.flow {
            let base = spec.phi.clone();
            let (tr, pr) = (fl.theta_rate, fl.phi_rate);
            spec = spec.with_flow(FlowData {
                theta: Arc::new(move |t| tr * t),
                phi: Arc::new(move |x, t| base.eval(x) + pr * t),
                horizon: fl.horizon,
            })?;
        }
        Ok(spec)
    }
}

/// Angle of x about the inner centre, used to snap points onto Γ⁻.
fn angle_on_inner(dom: &AnnularDomain, x: &[f64]) -> f64 {
    let c = dom.center_inner();
    let t = (x[1] - c[1]).atan2(x[0] - c[0]);
    if t < 0.0 {
        t + 2.0 * PI
    } else {
        t
    }
}
