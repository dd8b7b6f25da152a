//! `annular-ma` command-line front end.
//!
//! Exit codes: 0 success (including unsatisfied condition reports), 2 invalid
//! input or specification, 3 solver divergence.

mod output;

use std::f64::consts::PI;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use annular_ma::bounds::{
    self, add_m_bound, barrier_field, boundary_max, c0_bound, c0_bound_auto, flow_constants, gauge_audit, psi_sup,
    stationary_constants, Bound, BarrierSpec, BoundConstants, DefiningFunction, Gauge, F_C0, F_C0T, F_C1T, F_CT,
};
use annular_ma::closed_form::{ClosedFormSolution, GradientBlowup, RadialConcentric2D, SkewedQuadratic, SkewedShifted};
use annular_ma::conditions::{self, ConditionReport};
use annular_ma::flow_solver::{self, FlowError};
use annular_ma::polar_fd_solver::{self, NewtonOptions, PolarError};
use annular_ma::radial_solver::{self, RadialError, RadialProblem, RadialProfile, ShootOptions};
use annular_ma::spec_io::{FlowJson, PhiJson, ProblemJson, PsiJson, ScalarJson};
use annular_ma::{AnnularDomain, Field, GridField, PolarGrid, ProblemSpec};

use output::Output;

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, specification or I/O.
    Input(String),
    /// A solver failed to converge or lost convexity.
    Solver(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

fn input<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

impl From<RadialError> for CliError {
    fn from(e: RadialError) -> Self {
        match e {
            RadialError::UnsupportedDomain | RadialError::NonRadialData { .. } | RadialError::BadInput(_) => input(e),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<PolarError> for CliError {
    fn from(e: PolarError) -> Self {
        match e {
            PolarError::GridTooCoarse { .. } | PolarError::UnsupportedDomain | PolarError::GridMismatch => input(e),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

impl From<FlowError> for CliError {
    fn from(e: FlowError) -> Self {
        match e {
            FlowError::ConvexityLost { .. } | FlowError::DeterminantFloor { .. } => CliError::Solver(e.to_string()),
            _ => input(e),
        }
    }
}

#[derive(Parser)]
#[command(name = "annular-ma", version, about = "Monge-Ampere problems on annuli: oracles, checks, constants and solvers")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "ANNULAR_MA_OUT", default_value = "annular-ma-out")]
    out: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample a closed-form family and dump boundary quantities and the blow-up table.
    Oracle(OracleArgs),
    /// Evaluate a solvability condition; unsatisfied conditions still exit 0.
    Check {
        #[command(subcommand)]
        which: CheckCmd,
    },
    /// Compute a-priori constants.
    Constants(ConstantsArgs),
    /// Evaluate the barrier field on a polar grid.
    Barrier(BarrierArgs),
    /// Radial shooting solve.
    SolveRadial(SolveRadialArgs),
    /// Polar finite-difference Newton solve.
    #[command(name = "solve-2d")]
    Solve2d(Solve2dArgs),
    /// Radial flow run.
    Flow(FlowArgs),
}

#[derive(Args, Clone)]
struct SpecArgs {
    /// Problem specification (JSON file).
    #[arg(long, conflicts_with = "preset")]
    spec: Option<PathBuf>,
    /// Built-in problem: paper-4.2, paper-4.3, paper-5.2, paper-6-omega, paper-7-flow.
    #[arg(long)]
    preset: Option<String>,
}

impl SpecArgs {
    fn load(&self, default: &str) -> Result<ProblemJson, CliError> {
        match (&self.spec, &self.preset) {
            (Some(path), _) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                ProblemJson::parse(&text).map_err(input)
            }
            (None, Some(name)) => ProblemJson::preset(name).map_err(input),
            (None, None) => ProblemJson::preset(default).map_err(input),
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Family {
    Radial2d,
    RadialNd,
    SkewedQuadratic,
    SkewedShifted,
    Blowup,
}

#[derive(Args, Serialize)]
struct OracleArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    psi: f64,
    /// Inner slope d_k (radial, shifted and blow-up families).
    #[arg(long, allow_negative_numbers = true)]
    dk: Option<f64>,
    /// Dimension of the radial-nd family.
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, allow_negative_numbers = true)]
    r_inner: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    r_outer: Option<f64>,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    gamma0: f64,
    /// Inner centre "x,y" for the skewed families.
    #[arg(long)]
    center_inner: Option<String>,
    /// Outer centre "x,y" for the skewed families.
    #[arg(long)]
    center_outer: Option<String>,
    /// Number of interior sample points.
    #[arg(long, default_value_t = 64)]
    samples: usize,
}

#[derive(Subcommand)]
enum CheckCmd {
    /// ∫_Ω g < ∫ h with the pair (g, h) read off ψ.
    Structure {
        #[command(flatten)]
        spec: SpecArgs,
        /// Override R₊ = R₋ + width on a concentric domain.
        #[arg(long, allow_negative_numbers = true)]
        width: Option<f64>,
    },
    /// Boundary curvature condition with constant M.
    Curvature {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, allow_negative_numbers = true)]
        m: f64,
    },
    /// Gradient-dependent curvature condition with M̃, N and C̃.
    CurvatureDu {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, allow_negative_numbers = true)]
        m_tilde: f64,
        #[arg(long, allow_negative_numbers = true)]
        n: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        c_tilde: f64,
    },
    /// Growth of ψⁿ in |p| near the outer boundary with constant Z.
    StructureGradient {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, allow_negative_numbers = true)]
        z: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        beta: f64,
        #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
        band: f64,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        c0_prime: f64,
    },
    /// K = 0 on the outer boundary and ∫K < ω_n.
    PrescribedGauss {
        #[command(flatten)]
        spec: SpecArgs,
    },
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Formula {
    All,
    C0,
    C1,
    C3,
    M,
    Flow,
}

#[derive(Args)]
struct ConstantsArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, value_enum, default_value = "all")]
    formula: Formula,
    /// K in (0, 1/max|x|²), or "auto" to minimise C₀ over K.
    #[arg(long = "K", default_value = "auto")]
    k: String,
    /// Structure radius R₀ for C₀′.
    #[arg(long, allow_negative_numbers = true)]
    r0: Option<f64>,
    /// Barrier direction ξ = (cos a, sin a) used for M.
    #[arg(long, default_value_t = PI / 2.0, allow_negative_numbers = true)]
    xi_angle: f64,
    #[arg(long, default_value_t = 64)]
    nr: usize,
    #[arg(long, default_value_t = 64)]
    ntheta: usize,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum GaugeKind {
    Reciprocal,
    PowerLaw,
}

#[derive(Args)]
struct BarrierArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, value_enum, default_value = "reciprocal")]
    gauge: GaugeKind,
    /// M in g = 1/(M − u), or M̃ for the power-law gauge.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    gauge_m: f64,
    /// N for the power-law gauge.
    #[arg(long, default_value_t = 1.1, allow_negative_numbers = true)]
    gauge_n: f64,
    /// Coefficient of |x|²; defaults to the computed M bound plus one.
    #[arg(long, allow_negative_numbers = true)]
    m: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    xi_angle: f64,
    #[arg(long, default_value_t = 128)]
    nr: usize,
    #[arg(long, default_value_t = 128)]
    ntheta: usize,
}

#[derive(Args)]
struct SolveRadialArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Replace φ by the radial-family data with inner slope d.
    #[arg(long, allow_negative_numbers = true)]
    phi_from_dk: Option<f64>,
    #[arg(long, default_value_t = 1024)]
    nodes: usize,
    #[arg(long, default_value_t = 1e-10, allow_negative_numbers = true)]
    tol: f64,
    /// Report every root found by a log-spaced scan.
    #[arg(long)]
    all: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Init {
    Quadratic,
    File,
}

#[derive(Args)]
struct Solve2dArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, allow_negative_numbers = true)]
    phi_from_dk: Option<f64>,
    #[arg(long, default_value_t = 64)]
    nr: usize,
    #[arg(long, default_value_t = 64)]
    ntheta: usize,
    #[arg(long, default_value_t = 1e-10, allow_negative_numbers = true)]
    tol: f64,
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    #[arg(long, value_enum, default_value = "quadratic")]
    init: Init,
    /// CSV with columns r,theta,u for --init file.
    #[arg(long)]
    init_file: Option<PathBuf>,
}

#[derive(Args)]
struct FlowArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Horizon T.
    #[arg(long = "T", allow_negative_numbers = true)]
    horizon: Option<f64>,
    #[arg(long, default_value_t = 1e-3, allow_negative_numbers = true)]
    dt: f64,
    /// ϑ′, with ϑ(t) = ϑ′ t on the outer boundary.
    #[arg(long, allow_negative_numbers = true)]
    theta: Option<f64>,
    /// Constant φ at t = 0.
    #[arg(long, allow_negative_numbers = true)]
    phi0: Option<f64>,
    /// φ_t.
    #[arg(long, allow_negative_numbers = true)]
    phit: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma0: Option<f64>,
    #[arg(long, default_value_t = 65)]
    nodes: usize,
}

fn parse_pair(s: &str) -> Result<[f64; 2], CliError> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::Input(format!("expected \"x,y\", got {s:?}")));
    }
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| CliError::Input(format!("{t:?}: {e}")));
    Ok([p(parts[0])?, p(parts[1])?])
}

fn print(text: &str) {
    print!("{text}");
}

// ---------------------------------------------------------------- oracle

fn oracle_solution(a: &OracleArgs) -> Result<ClosedFormSolution, CliError> {
    let dk = || a.dk.ok_or_else(|| CliError::Input(format!("--dk is required for the {:?} family", family_name(a.family))));
    let ri = a.r_inner;
    let ro = a.r_outer;
    let sol = match a.family {
        Family::Radial2d => ClosedFormSolution::radial_2d(a.psi, ri.unwrap_or(1.0), ro.unwrap_or(2.0), dk()?),
        Family::RadialNd => ClosedFormSolution::radial_nd(a.n, a.psi, ri.unwrap_or(1.0), ro.unwrap_or(2.0), dk()?),
        Family::SkewedQuadratic => {
            let ci = a.center_inner.as_deref().map(parse_pair).transpose()?.unwrap_or([0.25, 0.0]);
            let co = a.center_outer.as_deref().map(parse_pair).transpose()?.unwrap_or([1.0, 0.0]);
            let dom = AnnularDomain::skewed(ci, co, ri.unwrap_or(0.5), ro.unwrap_or(2.0)).map_err(input)?;
            SkewedQuadratic::new(a.psi, dom).map(ClosedFormSolution::SkewedQuadratic)
        }
        Family::SkewedShifted => {
            let ci = a.center_inner.as_deref().map(parse_pair).transpose()?.unwrap_or([0.25, 0.0]);
            let co = a.center_outer.as_deref().map(parse_pair).transpose()?.unwrap_or([0.5, 0.0]);
            let (r_in, r_out) = (ri.unwrap_or(1.0), ro.unwrap_or(2.0));
            let dom = AnnularDomain::skewed(ci, co, r_in, r_out).map_err(input)?;
            // The shifted profile is evaluated at |x − γ₊|, which never drops below R₋ − s.
            let s = ((co[0] - ci[0]).powi(2) + (co[1] - ci[1]).powi(2)).sqrt();
            let inner = RadialConcentric2D::new(a.psi, r_in - s, r_out, dk()?).map_err(input)?;
            SkewedShifted::new(inner, dom).map(ClosedFormSolution::SkewedShifted)
        }
        Family::Blowup => GradientBlowup::new(ri.unwrap_or(1.0), ro.unwrap_or(1.5), dk()?).map(ClosedFormSolution::GradientBlowup),
    };
    sol.map_err(input)
}

fn family_name(f: Family) -> &'static str {
    match f {
        Family::Radial2d => "radial2d",
        Family::RadialNd => "radial-nd",
        Family::SkewedQuadratic => "skewed-quadratic",
        Family::SkewedShifted => "skewed-shifted",
        Family::Blowup => "blowup",
    }
}

fn cmd_oracle(a: &OracleArgs, out: &mut Output) -> Result<String, CliError> {
    let sol = oracle_solution(a)?;
    let dom = sol.domain();
    let n = dom.dim();
    let mut header: Vec<String> = (0..n).map(|k| format!("x{k}")).collect();
    header.push("u".into());
    header.extend((0..n).map(|k| format!("du{k}")));
    header.extend(["det".to_string(), "psi_n".to_string(), "residual".to_string()]);
    let rows: Vec<Vec<f64>> = dom
        .interior_samples(a.samples)
        .iter()
        .map(|x| {
            let j = sol.jet(x);
            let det = j.det();
            let pn = sol.psi_n(x, &j);
            let mut row = x.clone();
            row.push(j.u);
            row.extend(j.grad.iter());
            row.extend([det, pn, det - pn]);
            row
        })
        .collect();
    let hdr: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv("oracle_samples.csv", &hdr, &rows)?;

    let mut boundary: Vec<(String, Vec<f64>)> = Vec::new();
    let mut probe = |label: &str, x: Vec<f64>| -> Result<(), CliError> {
        let nu = dom.inner_normal(&x).map_err(input)?;
        let j = sol.jet(&x);
        let u_nu = j.grad_dot(&nu);
        let mut vals = x.clone();
        vals.resize(n, 0.0);
        vals.push(u_nu);
        boundary.push((label.to_string(), vals));
        let mut phi = x.clone();
        phi.resize(n, 0.0);
        phi.push(u_nu - a.gamma0 * j.u);
        boundary.push(("phi".to_string(), phi));
        Ok(())
    };
    if sol.is_radial() {
        let mut x = vec![0.0; n];
        x[0] = dom.r_inner();
        probe("u_nu", x.clone())?;
        let mut push = |label: &str, v: f64| {
            let mut vals = x.clone();
            vals.push(v);
            boundary.push((label.to_string(), vals));
        };
        push("u_nunu", sol.inner_dnn().map_err(input)?);
        push("u_rr", sol.inner_u_rr().map_err(input)?);
        if let ClosedFormSolution::GradientBlowup(b) = &sol {
            push("sup_grad", b.sup_grad());
        }
    } else {
        let s5 = 5f64.sqrt() / 6.0;
        let mut named = vec![vec![0.75, 0.0], vec![7.0 / 12.0, s5], vec![7.0 / 12.0, -s5]];
        named.retain(|x| dom.on_inner(x));
        for t in 0..8 {
            named.push(dom.inner_point_2d(2.0 * PI * t as f64 / 8.0));
        }
        for x in named {
            probe("u_nu", x)?;
        }
    }
    let mut bh: Vec<String> = vec!["quantity".into()];
    bh.extend((0..n).map(|k| format!("x{k}")));
    bh.push("value".into());
    let bh: Vec<&str> = bh.iter().map(String::as_str).collect();
    out.labeled_csv("oracle_boundary.csv", &bh, &boundary)?;

    let mut summary = serde_json::json!({ "family": family_name(a.family), "samples": rows.len() });
    if matches!(a.family, Family::Radial2d | Family::RadialNd) {
        let dk = a.dk.expect("radial families require --dk");
        let spec = ProblemSpec::new(
            dom.clone(),
            sol.psi_spec(),
            a.gamma0,
            annular_ma::PhiSpec::Constant(sol.robin_phi(a.gamma0, &boundary[0].1[..n]).map_err(input)?),
        )
        .map_err(input)?;
        let prob = RadialProblem::from_spec(&spec)?;
        let ds: Vec<f64> = (0..7).map(|k| dk * 10f64.powi(-k)).collect();
        let table = radial_solver::blowup_sweep(&prob, &ds, 1024)?;
        out.csv(
            "oracle_blowup.csv",
            &["d", "phi_k", "u_nunu_inner", "u_rr_inner", "sup_grad", "d_star"],
            table.iter().map(|r| [r.d, r.phi_k, r.u_nn_inner, r.u_rr_inner, r.sup_grad, r.d_star]),
        )?;
        summary["inner_u_nunu"] = sol.inner_dnn().map_err(input)?.into();
    }
    Ok(serde_json::to_string_pretty(&summary).expect("json") + "\n")
}

// ---------------------------------------------------------------- helpers on specs

type ScalarFn = Box<dyn Fn(&[f64]) -> f64>;

/// u on Γ⁻ from the matched closed form, or from a radial shooting solve.
fn inner_u(pj: &ProblemJson, spec: &ProblemSpec) -> Result<ScalarFn, CliError> {
    if let Some(sol) = pj.matched_solution().map_err(input)? {
        return Ok(Box::new(move |x: &[f64]| sol.jet(x).u));
    }
    let prob = RadialProblem::from_spec(spec)?;
    let prof = radial_solver::shoot(&prob, &ShootOptions::default())?;
    let u0 = prof.u[0];
    Ok(Box::new(move |_: &[f64]| u0))
}

fn radial_solution(spec: &ProblemSpec, nodes: usize, tol: f64) -> Result<RadialProfile, CliError> {
    let prob = RadialProblem::from_spec(spec)?;
    Ok(radial_solver::shoot(&prob, &ShootOptions { nodes, tol, ..ShootOptions::default() })?)
}

fn report_json(r: &ConditionReport) -> String {
    serde_json::to_string_pretty(r).expect("json") + "\n"
}

// ---------------------------------------------------------------- check

fn cmd_check(which: &CheckCmd, out: &mut Output) -> Result<(String, String), CliError> {
    let (name, pj, report) = match which {
        CheckCmd::Structure { spec, width } => {
            let mut pj = spec.load("paper-5.2")?;
            if let Some(w) = width {
                match &mut pj.domain {
                    annular_ma::spec_io::DomainJson::Concentric { r_inner, r_outer, .. } => *r_outer = *r_inner + w,
                    _ => return Err(CliError::Input("--width needs a concentric domain".into())),
                }
            }
            let s = pj.to_spec().map_err(input)?;
            let report = match &pj.psi {
                PsiJson::BlowupCounterexample => conditions::check_structure(
                    &s,
                    &|x: &[f64]| 1.0 / x.iter().map(|c| c * c).sum::<f64>().sqrt(),
                    &|r: f64| (-r).exp() / r,
                ),
                PsiJson::GaussCurvature { .. } => {
                    let n = s.dim() as f64;
                    let psi = s.psi.clone();
                    let zero = vec![0.0; s.dim()];
                    conditions::check_structure(&s, &move |x: &[f64]| psi.psi_n(x, 0.0, &zero), &move |r: f64| {
                        (1.0 + r * r).powf(-(n + 2.0) / 2.0)
                    })
                }
                _ => return Err(CliError::Input("structure check needs a blowup-counterexample or gauss-curvature psi".into())),
            }
            .map_err(input)?;
            ("structure", pj, report)
        }
        CheckCmd::Curvature { spec, m } => {
            let pj = spec.load("paper-4.2")?;
            let s = pj.to_spec().map_err(input)?;
            let u = inner_u(&pj, &s)?;
            let r = conditions::check_curvature(&s, &*u, *m).map_err(input)?;
            ("curvature", pj, r)
        }
        CheckCmd::CurvatureDu { spec, m_tilde, n, c_tilde } => {
            let pj = spec.load("paper-4.2")?;
            let s = pj.to_spec().map_err(input)?;
            let u = inner_u(&pj, &s)?;
            let r = conditions::check_curvature_du(&s, &*u, *m_tilde, *n, *c_tilde).map_err(input)?;
            ("curvature-du", pj, r)
        }
        CheckCmd::StructureGradient { spec, z, beta, band, c0_prime } => {
            let pj = spec.load("paper-6-omega")?;
            let s = pj.to_spec().map_err(input)?;
            let zz = *z;
            let r = conditions::check_structure_gradient(&s, &move |_| zz, *beta, *band, *c0_prime).map_err(input)?;
            ("structure-gradient", pj, r)
        }
        CheckCmd::PrescribedGauss { spec } => {
            let pj = spec.load("paper-6-omega")?;
            let s = pj.to_spec().map_err(input)?;
            let r = conditions::check_prescribed_gauss(&s).map_err(input)?;
            ("prescribed-gauss", pj, r)
        }
    };
    out.json(&format!("check_{name}.json"), &report)?;
    Ok((report_json(&report), serde_json::to_string(&pj).expect("json")))
}

// ---------------------------------------------------------------- constants

fn cmd_constants(a: &ConstantsArgs, out: &mut Output) -> Result<(String, String), CliError> {
    let pj = a.spec.load("paper-4.2")?;
    let spec = pj.to_spec().map_err(input)?;
    let matched = pj.matched_solution().map_err(input)?;
    let along = matched.as_ref().map(|s| s as &dyn Field);
    let fixed_k = match a.k.as_str() {
        "auto" => None,
        v => Some(v.parse::<f64>().map_err(|e| CliError::Input(format!("--K {v:?}: {e}")))?),
    };
    let mut c = match (a.formula, fixed_k) {
        (Formula::C0, Some(k)) => {
            BoundConstants { c0: Bound::new(c0_bound(&spec, k, along).map_err(input)?, F_C0), k: Some(k), ..Default::default() }
        }
        (Formula::C0, None) => {
            let (k, c0) = c0_bound_auto(&spec, along).map_err(input)?;
            BoundConstants { c0: Bound::new(c0, F_C0), k: Some(k), ..Default::default() }
        }
        _ => stationary_constants(&spec, along, a.r0).map_err(input)?,
    };
    if matches!(a.formula, Formula::C1) {
        c = BoundConstants { c1: c.c1, c0: c.c0, k: c.k, ..Default::default() };
    }
    if matches!(a.formula, Formula::C3) {
        c = BoundConstants { c3: c.c3, c1: c.c1, c0: c.c0, k: c.k, ..Default::default() };
    }
    if matches!(a.formula, Formula::All | Formula::M) {
        match (&matched, spec.domain.is_concentric() && spec.dim() == 2) {
            (Some(sol), true) => {
                let xi = [a.xi_angle.cos(), a.xi_angle.sin()];
                add_m_bound(&mut c, &spec, sol, &xi, a.nr, a.ntheta).map_err(input)?;
            }
            _ if a.formula == Formula::M => {
                return Err(CliError::Input("M needs a planar concentric problem with closed-form phi data".into()))
            }
            _ => {}
        }
    }
    if matches!(a.formula, Formula::All | Formula::Flow) && (spec.flow.is_some() || a.formula == Formula::Flow) {
        if spec.flow.is_none() {
            return Err(CliError::Input("flow constants need flow data".into()));
        }
        let prof = radial_solution(&spec, 1024, 1e-10)?;
        let sup_u0 = prof.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let ps = psi_sup(&spec, None).ok();
        let rho = DefiningFunction::standard(&spec.domain);
        let fc = flow_constants(&spec, sup_u0, ps.map(|p| (&rho, p))).map_err(input)?;
        c.ct_upper = Bound::new(fc.ct_upper, F_CT);
        c.c0_t = Bound::new(fc.c0_t, F_C0T);
        c.c1_t = fc.c1_t.and_then(|v| Bound::new(v, F_C1T));
    }
    let text = out.json("constants.json", &c)?;
    Ok((text, serde_json::to_string(&pj).expect("json")))
}

// ---------------------------------------------------------------- barrier

#[derive(Serialize)]
struct BarrierReport {
    m: f64,
    max_index: [usize; 2],
    max_r: f64,
    max_theta: f64,
    max_value: f64,
    max_near_boundary: bool,
    gauge: bounds::GaugeAudit,
}

fn cmd_barrier(a: &BarrierArgs, out: &mut Output) -> Result<(String, String), CliError> {
    let pj = a.spec.load("paper-4.2")?;
    let spec = pj.to_spec().map_err(input)?;
    let sol = pj
        .matched_solution()
        .map_err(input)?
        .ok_or_else(|| CliError::Input("barrier needs closed-form phi data (phi-k, skewed-quadratic or blowup)".into()))?;
    let xi = vec![a.xi_angle.cos(), a.xi_angle.sin()];
    let mut consts = stationary_constants(&spec, Some(&sol), None).map_err(input)?;
    let m = match a.m {
        Some(m) => m,
        None => add_m_bound(&mut consts, &spec, &sol, &xi, 64, 64).map_err(input)? + 1.0,
    };
    let gauge = match a.gauge {
        GaugeKind::Reciprocal => Gauge::Reciprocal { m: a.gauge_m },
        GaugeKind::PowerLaw => Gauge::PowerLaw { m_tilde: a.gauge_m, n: a.gauge_n },
    };
    let c0 = consts.c0.as_ref().map_or(1.0, |b| b.value);
    let audit = gauge_audit(&gauge, c0, 257).map_err(input)?;
    let grid = PolarGrid::new(a.nr, a.ntheta, spec.domain.r_inner(), spec.domain.r_outer());
    let w = barrier_field(&sol, &spec, &BarrierSpec { gauge, xi, m, weight_n: None }, grid).map_err(input)?;
    out.csv("barrier.csv", &["r", "theta", "w"], w.rows().map(|(r, t, v)| [r, t, v]))?;
    let ((i, j), v, near) = boundary_max(&w);
    let rep = BarrierReport {
        m,
        max_index: [i, j],
        max_r: grid.r(i),
        max_theta: grid.theta(j),
        max_value: v,
        max_near_boundary: near,
        gauge: audit,
    };
    let text = out.json("barrier.json", &rep)?;
    Ok((text, serde_json::to_string(&pj).expect("json")))
}

// ---------------------------------------------------------------- solve-radial

#[derive(Serialize)]
struct RadialReport {
    d_star: f64,
    neumann_residual: f64,
    iterations: usize,
    ode_residual: f64,
    sup_error_vs_closed_form: Option<f64>,
    roots: Vec<f64>,
}

fn with_phi_k(mut pj: ProblemJson, dk: Option<f64>) -> ProblemJson {
    if let Some(d) = dk {
        pj.phi = PhiJson::PhiK { d_k: d };
    }
    pj
}

fn cmd_solve_radial(a: &SolveRadialArgs, out: &mut Output) -> Result<(String, String), CliError> {
    let pj = with_phi_k(a.spec.load("paper-4.2")?, a.phi_from_dk);
    let spec = pj.to_spec().map_err(input)?;
    let prob = RadialProblem::from_spec(&spec)?;
    let opts = ShootOptions { nodes: a.nodes, tol: a.tol, ..ShootOptions::default() };
    let roots: Vec<f64> = if a.all {
        radial_solver::shoot_all(&prob, &opts)?.iter().map(|p| p.meta.d_star).collect()
    } else {
        Vec::new()
    };
    let prof = radial_solver::shoot(&prob, &opts)?;
    out.csv("radial_profile.csv", &["r", "u", "u_r", "u_rr"], prof.rows())?;
    let matched = pj.matched_solution().map_err(input)?.filter(|s| s.is_radial());
    let err = matched.map(|s| {
        prof.r_nodes
            .iter()
            .zip(&prof.u)
            .map(|(&r, &u)| (u - s.radial_profile(r).map_or(f64::NAN, |p| p.0)).abs())
            .fold(0.0, f64::max)
    });
    let rep = RadialReport {
        d_star: prof.meta.d_star,
        neumann_residual: prof.meta.residual,
        iterations: prof.meta.iterations,
        ode_residual: radial_solver::ode_residual(&prob, &prof),
        sup_error_vs_closed_form: err,
        roots,
    };
    let text = out.json("radial_report.json", &rep)?;
    Ok((text, serde_json::to_string(&pj).expect("json")))
}

// ---------------------------------------------------------------- solve-2d

#[derive(Serialize)]
struct Solve2dReport {
    nr: usize,
    ntheta: usize,
    newton: polar_fd_solver::NewtonReport,
    inner_slope: f64,
    sup_error_vs_closed_form: Option<f64>,
}

fn read_init(path: &PathBuf, grid: PolarGrid) -> Result<GridField, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut f = GridField::zeros(grid);
    let mut seen = vec![false; grid.len()];
    for (ln, line) in text.lines().enumerate().skip(1).filter(|(_, l)| !l.trim().is_empty()) {
        let vals: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Input(format!("line {}: {e}", ln + 1)))?;
        if vals.len() != 3 {
            return Err(CliError::Input(format!("line {}: expected r,theta,u", ln + 1)));
        }
        let i = ((vals[0] - grid.r_inner) / grid.dr()).round();
        let j = (vals[1] / grid.dtheta()).round();
        if !(0.0..grid.nr as f64).contains(&i) || !(0.0..grid.ntheta as f64).contains(&j) {
            return Err(CliError::Input(format!("line {}: point off the grid", ln + 1)));
        }
        let k = grid.index(i as usize, j as usize);
        f.values[k] = vals[2];
        seen[k] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(CliError::Input("init file does not cover every grid node".into()));
    }
    Ok(f)
}

fn cmd_solve_2d(a: &Solve2dArgs, out: &mut Output) -> Result<(String, String), CliError> {
    let pj = with_phi_k(a.spec.load("paper-4.2")?, a.phi_from_dk);
    let spec = pj.to_spec().map_err(input)?;
    if !spec.domain.is_concentric() || spec.dim() != 2 {
        return Err(CliError::Input("solve-2d needs a concentric planar annulus".into()));
    }
    let grid = PolarGrid::new(a.nr.max(3), a.ntheta.max(3), spec.domain.r_inner(), spec.domain.r_outer());
    let init = match a.init {
        Init::Quadratic => polar_fd_solver::default_init(&spec, grid),
        Init::File => {
            let path = a.init_file.as_ref().ok_or_else(|| CliError::Input("--init file needs --init-file".into()))?;
            read_init(path, grid)?
        }
    };
    let (f, rep) = polar_fd_solver::newton_solve(&spec, &init, &NewtonOptions { tol: a.tol, max_iter: a.max_iter })?;
    out.csv("field_2d.csv", &["r", "theta", "u"], f.rows().map(|(r, t, v)| [r, t, v]))?;
    let matched = pj.matched_solution().map_err(input)?;
    let report = Solve2dReport {
        nr: grid.nr,
        ntheta: grid.ntheta,
        newton: rep,
        inner_slope: polar_fd_solver::inner_slope(&f),
        sup_error_vs_closed_form: matched.map(|s| polar_fd_solver::sup_error(&f, &s)),
    };
    let text = out.json("solve_2d.json", &report)?;
    Ok((text, serde_json::to_string(&pj).expect("json")))
}

// ---------------------------------------------------------------- flow

#[derive(Serialize)]
struct FlowReport {
    horizon: f64,
    dt: f64,
    nodes: usize,
    steps: usize,
    sup_abs_u0: f64,
    constants: bounds::FlowConstants,
    audit: flow_solver::UtAudit,
    max_sup_abs_u: f64,
    max_increase: f64,
}

fn cmd_flow(a: &FlowArgs, out: &mut Output) -> Result<(String, String), CliError> {
    let mut pj = a.spec.load("paper-7-flow")?;
    let fl = pj.flow.get_or_insert(FlowJson { theta_rate: -1.0, phi_rate: 1.0, horizon: 1.0 });
    if let Some(v) = a.theta {
        fl.theta_rate = v;
    }
    if let Some(v) = a.phit {
        fl.phi_rate = v;
    }
    if let Some(v) = a.horizon {
        fl.horizon = v;
    }
    let horizon = fl.horizon;
    if let Some(v) = a.phi0 {
        pj.phi = PhiJson::Field(ScalarJson::Constant { value: v });
    }
    if let Some(v) = a.gamma0 {
        pj.gamma0 = v;
    }
    let spec = pj.to_spec().map_err(input)?;
    let prof = radial_solution(&spec, 1024, 1e-12)?;
    let sup_u0 = prof.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let fc = flow_constants(&spec, sup_u0, None).map_err(input)?;
    let u0 = |r: f64| prof.value_quintic(r);
    let (state, series) = flow_solver::run(&spec, &u0, a.nodes, horizon, a.dt, &mut |_| {})?;
    out.csv(
        "flow_series.csv",
        &["t", "sup_abs_u", "sup_abs_ut", "inner_trace", "outer_trace"],
        series.iter().map(|r| [r.t, r.sup_abs_u, r.sup_abs_ut, r.inner_trace, r.outer_trace]),
    )?;
    out.csv("flow_final.csv", &["r", "u", "u_t"], (0..state.r.len()).map(|i| [state.r[i], state.u[i], state.ut[i]]))?;
    let audit = flow_solver::ut_bounds_audit(&series, fc.ct_upper)?;
    let rep = FlowReport {
        horizon,
        dt: a.dt,
        nodes: a.nodes,
        steps: series.len() - 1,
        sup_abs_u0: sup_u0,
        constants: fc,
        audit,
        max_sup_abs_u: series.iter().map(|r| r.sup_abs_u).fold(0.0, f64::max),
        max_increase: series.iter().map(|r| r.max_increase).fold(f64::NEG_INFINITY, f64::max),
    };
    let text = out.json("flow_report.json", &rep)?;
    Ok((text, serde_json::to_string(&pj).expect("json")))
}

// ---------------------------------------------------------------- main

/// Command line without the output directory, so the manifest does not depend on where it is written.
fn recorded_args(args: impl Iterator<Item = String>) -> Vec<String> {
    let mut kept = Vec::new();
    let mut skip_next = false;
    for a in args {
        if skip_next {
            skip_next = false;
        } else if a == "--out" {
            skip_next = true;
        } else if !a.starts_with("--out=") {
            kept.push(a);
        }
    }
    kept
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut out = Output::new(cli.out.clone())?;
    let (text, digest_src) = match &cli.cmd {
        Cmd::Oracle(a) => (cmd_oracle(a, &mut out)?, serde_json::to_string(a).expect("json")),
        Cmd::Check { which } => cmd_check(which, &mut out)?,
        Cmd::Constants(a) => cmd_constants(a, &mut out)?,
        Cmd::Barrier(a) => cmd_barrier(a, &mut out)?,
        Cmd::SolveRadial(a) => cmd_solve_radial(a, &mut out)?,
        Cmd::Solve2d(a) => cmd_solve_2d(a, &mut out)?,
        Cmd::Flow(a) => cmd_flow(a, &mut out)?,
    };
    out.finish(recorded_args(std::env::args().skip(1)), &digest_src)?;
    print(&text);
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::Input(m) | CliError::Solver(m)) = &e;
            eprintln!("error: {m}");
            ExitCode::from(e.code())
        }
    }
}
