//! Polar tensor grids on the concentric planar annulus.

use std::f64::consts::PI;

use serde::Serialize;

/// `nr` radial nodes including both boundary rings, `ntheta` periodic angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolarGrid {
    pub nr: usize,
    pub ntheta: usize,
    pub r_inner: f64,
    pub r_outer: f64,
}

impl PolarGrid {
    pub fn new(nr: usize, ntheta: usize, r_inner: f64, r_outer: f64) -> Self {
        assert!(nr >= 3 && ntheta >= 3, "polar grid needs at least 3x3 nodes");
        Self { nr, ntheta, r_inner, r_outer }
    }

    pub fn dr(&self) -> f64 {
        (self.r_outer - self.r_inner) / (self.nr - 1) as f64
    }

    pub fn dtheta(&self) -> f64 {
        2.0 * PI / self.ntheta as f64
    }

    pub fn r(&self, i: usize) -> f64 {
        if i + 1 == self.nr {
            self.r_outer
        } else {
            self.r_inner + i as f64 * self.dr()
        }
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.dtheta()
    }

    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        let (s, c) = self.theta(j).sin_cos();
        let r = self.r(i);
        [r * c, r * s]
    }

    pub fn len(&self) -> usize {
        self.nr * self.ntheta
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.ntheta + j % self.ntheta
    }

    #[inline]
    pub fn jp(&self, j: usize) -> usize {
        (j + 1) % self.ntheta
    }

    #[inline]
    pub fn jm(&self, j: usize) -> usize {
        (j + self.ntheta - 1) % self.ntheta
    }
}

/// Boundary data attached to a field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryData {
    pub outer_dirichlet: f64,
    pub gamma0: f64,
    /// φ sampled at the inner-ring angles.
    pub phi: Vec<f64>,
}

/// Scalar field on a polar grid, row-major in (ring, angle).
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: PolarGrid,
    pub values: Vec<f64>,
    pub bc: Option<BoundaryData>,
}

impl GridField {
    pub fn zeros(grid: PolarGrid) -> Self {
        Self { grid, values: vec![0.0; grid.len()], bc: None }
    }

    pub fn from_fn(grid: PolarGrid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.nr {
            for j in 0..grid.ntheta {
                values.push(f(grid.r(i), grid.theta(j)));
            }
        }
        Self { grid, values, bc: None }
    }

    /// Sampled quadratic ψ_ref(r² − R₊²)/2.
    pub fn quadratic(grid: PolarGrid, psi_ref: f64) -> Self {
        let ro = grid.r_outer;
        Self::from_fn(grid, |r, _| 0.5 * psi_ref * (r * r - ro * ro))
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Index (i, j) of the largest value; ties resolve to the first.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = k;
            }
        }
        (best / self.grid.ntheta, best % self.grid.ntheta)
    }

    /// Rows `r,theta,value` for CSV output.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.grid.nr)
            .flat_map(move |i| (0..self.grid.ntheta).map(move |j| (self.grid.r(i), self.grid.theta(j), self.at(i, j))))
    }
}
