//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use ndarray::Array2;
use nescope_core::loo::Sym2;
use nescope_core::tsne::SimilarityMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` points with coordinates uniform in `[-scale, scale]`.
pub fn random_points(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((n, 2), |_| rng.random_range(-scale..scale))
}

/// Symmetric, zero-diagonal, positive affinities summing to 1.
pub fn random_similarity(rng: &mut ChaCha8Rng, n: usize) -> SimilarityMatrix {
    let mut v = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let x: f64 = rng.random_range(0.01..1.0);
            v[[i, j]] = x;
            v[[j, i]] = x;
        }
    }
    let s = v.sum();
    v /= s;
    SimilarityMatrix::from_values(v).unwrap()
}

/// Second-order central differences of `f` around `y0` with step `h`.
pub fn fd_hessian(f: impl Fn([f64; 2]) -> f64, y0: [f64; 2], h: f64) -> [[f64; 2]; 2] {
    let at = |dx: f64, dy: f64| f([y0[0] + dx, y0[1] + dy]);
    let f0 = at(0.0, 0.0);
    let hxx = (at(h, 0.0) - 2.0 * f0 + at(-h, 0.0)) / (h * h);
    let hyy = (at(0.0, h) - 2.0 * f0 + at(0.0, -h)) / (h * h);
    let hxy = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
    [[hxx, hxy], [hxy, hyy]]
}

/// Jacobian of a 2-vector field by central differences (symmetrized).
pub fn fd_jacobian(g: impl Fn([f64; 2]) -> [f64; 2], y0: [f64; 2], h: f64) -> [[f64; 2]; 2] {
    let mut m = [[0.0; 2]; 2];
    for c in 0..2 {
        let mut p = y0;
        let mut q = y0;
        p[c] += h;
        q[c] -= h;
        let (gp, gq) = (g(p), g(q));
        for r in 0..2 {
            m[r][c] = (gp[r] - gq[r]) / (2.0 * h);
        }
    }
    let off = 0.5 * (m[0][1] + m[1][0]);
    m[0][1] = off;
    m[1][0] = off;
    m
}

pub fn grad_fd(f: impl Fn([f64; 2]) -> f64, y0: [f64; 2], h: f64) -> [f64; 2] {
    let mut g = [0.0; 2];
    for c in 0..2 {
        let mut p = y0;
        let mut q = y0;
        p[c] += h;
        q[c] -= h;
        g[c] = (f(p) - f(q)) / (2.0 * h);
    }
    g
}

pub fn sym_to_array(s: &Sym2) -> [[f64; 2]; 2] {
    [[s.a, s.b], [s.b, s.c]]
}

/// Frobenius-norm relative error of `got` against `want`.
pub fn rel_err_2x2(got: [[f64; 2]; 2], want: [[f64; 2]; 2]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            num += (got[r][c] - want[r][c]).powi(2);
            den += want[r][c].powi(2);
        }
    }
    (num / den.max(1e-300)).sqrt()
}

pub fn rel_err_vec(got: &[f64], want: &[f64]) -> f64 {
    let num: f64 = got.iter().zip(want).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = want.iter().map(|b| b * b).sum();
    (num / den.max(1e-300)).sqrt()
}

/// `y` with row `i` replaced.
pub fn with_row(y: &Array2<f64>, i: usize, p: [f64; 2]) -> Array2<f64> {
    let mut z = y.clone();
    z[[i, 0]] = p[0];
    z[[i, 1]] = p[1];
    z
}

pub fn rotation(angle: f64) -> [[f64; 2]; 2] {
    let (s, c) = angle.sin_cos();
    [[c, -s], [s, c]]
}

pub fn rotate_rows(y: &Array2<f64>, r: [[f64; 2]; 2]) -> Array2<f64> {
    let mut z = y.clone();
    for mut row in z.rows_mut() {
        let (a, b) = (row[0], row[1]);
        row[0] = r[0][0] * a + r[0][1] * b;
        row[1] = r[1][0] * a + r[1][1] * b;
    }
    z
}

/// Indices of the largest `ceil(frac * n)` values.
pub fn top_indices(v: &[f64], frac: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    idx.truncate((frac * v.len() as f64).ceil() as usize);
    idx
}
