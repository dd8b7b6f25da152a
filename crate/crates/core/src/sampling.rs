//! Deterministic sample sets: Halton points, circle and sphere meshes.

use std::f64::consts::PI;

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Radical inverse of `index` in `base`.
pub fn van_der_corput(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    r
}

/// `count` Halton points in `[0,1)^dim`, skipping index 0.
pub fn halton(dim: usize, count: usize) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "halton: dimension {dim} unsupported");
    (1..=count as u64)
        .map(|i| (0..dim).map(|d| van_der_corput(i, PRIMES[d])).collect())
        .collect()
}

/// Unit vectors on S^{dim-1}.
///
/// Uniform angles in 2-D, a Fibonacci lattice in 3-D, and Halton points in the
/// unit ball pushed to the sphere for higher dimensions.
pub fn sphere_directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    match dim {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let rho = (1.0 - z * z).max(0.0).sqrt();
                    let t = golden * k as f64;
                    vec![rho * t.cos(), rho * t.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut out = Vec::with_capacity(count);
            let mut i = 1u64;
            while out.len() < count {
                let v: Vec<f64> = (0..dim).map(|d| 2.0 * van_der_corput(i, PRIMES[d]) - 1.0).collect();
                i += 1;
                let r = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                if r > 0.05 && r <= 1.0 {
                    out.push(v.into_iter().map(|c| c / r).collect());
                }
            }
            out
        }
    }
}

/// Unit vectors orthogonal to `normal` (a spanning sample of the tangent sphere).
pub fn tangent_directions(normal: &[f64], count: usize) -> Vec<Vec<f64>> {
    let n = normal.len();
    if n == 2 {
        return vec![vec![-normal[1], normal[0]], vec![normal[1], -normal[0]]];
    }
    let basis = orthonormal_complement(normal);
    sphere_directions(n - 1, count)
        .into_iter()
        .map(|c| {
            let mut v = vec![0.0; n];
            for (coef, b) in c.iter().zip(&basis) {
                for k in 0..n {
                    v[k] += coef * b[k];
                }
            }
            v
        })
        .collect()
}

/// Orthonormal basis of the complement of unit vector `v` (Gram-Schmidt on e_k).
pub fn orthonormal_complement(v: &[f64]) -> Vec<Vec<f64>> {
    let n = v.len();
    let mut basis: Vec<Vec<f64>> = vec![v.to_vec()];
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        for b in &basis {
            let d: f64 = e.iter().zip(b).map(|(a, c)| a * c).sum();
            for i in 0..n {
                e[i] -= d * b[i];
            }
        }
        let norm = e.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-8 {
            basis.push(e.into_iter().map(|c| c / norm).collect());
        }
        if basis.len() == n {
            break;
        }
    }
    basis.remove(0);
    basis
}

/// Golden-section minimisation of a unimodal function on `[a, b]`.
pub fn golden_section_min<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
