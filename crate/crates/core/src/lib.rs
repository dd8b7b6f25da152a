//! Monge-Ampère equations `det D²u = ψⁿ` on annular domains with Dirichlet
//! data on the outer boundary and a Robin condition `u_ν = γ₀u + φ` on the
//! inner boundary.
//!
//! The crate bundles exact solution families, solvability-condition checkers,
//! a-priori constant calculators, a radial shooting solver, a polar Newton
//! solver and a radial flow stepper for `-u_t det D²u = ψⁿ`.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod banded;
pub mod bounds;
pub mod closed_form;
pub mod conditions;
pub mod domain;
pub mod flow_solver;
pub mod grid;
pub mod polar_fd_solver;
pub mod quadrature;
pub mod radial_solver;
pub mod sampling;
pub mod spec_io;

pub use closed_form::{ClosedFormSolution, Field, Jet};
pub use domain::{AnnularDomain, FlowData, PhiSpec, ProblemSpec, PsiSpec};
pub use grid::{GridField, PolarGrid};

/// Largest supported space dimension.
pub const MAX_DIM: usize = 8;

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / n as f64 * unit_ball_volume(n - 2),
    }
}

/// Surface measure of the unit sphere `S^{n-1}` in `R^n`.
pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
