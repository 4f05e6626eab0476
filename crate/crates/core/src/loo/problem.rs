use ndarray::Array2;

use crate::error::{Error, Result};

/// A symmetric 2x2 matrix `[[a, b], [b, c]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 {
        a: 0.0,
        b: 0.0,
        c: 0.0,
    };

    pub fn identity() -> Self {
        Sym2 {
            a: 1.0,
            b: 0.0,
            c: 1.0,
        }
    }

    /// Eigenvalues `(lambda_min, lambda_max)` in closed form.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.a + self.c);
        let half = 0.5 * (self.a - self.c);
        let r = half.hypot(self.b);
        // The eigenvalue of smaller magnitude comes from the determinant to
        // avoid cancellation.
        let det = self.a * self.c - self.b * self.b;
        if mean >= 0.0 {
            let hi = mean + r;
            (if hi == 0.0 { 0.0 } else { det / hi }, hi)
        } else {
            let lo = mean - r;
            (lo, det / lo)
        }
    }

    /// Unit eigenvector for the smaller eigenvalue.
    pub fn min_eigenvector(&self) -> [f64; 2] {
        let (lmin, _) = self.eigenvalues();
        // Rows of (H - lambda I) are orthogonal to the eigenvector; use the larger one.
        let (r1, r2) = ([self.a - lmin, self.b], [self.b, self.c - lmin]);
        let pick = if r1[0].hypot(r1[1]) >= r2[0].hypot(r2[1]) {
            r1
        } else {
            r2
        };
        let v = [-pick[1], pick[0]];
        let norm = v[0].hypot(v[1]);
        if norm == 0.0 {
            [1.0, 0.0]
        } else {
            [v[0] / norm, v[1] / norm]
        }
    }

    pub fn solve(&self, g: [f64; 2]) -> Option<[f64; 2]> {
        let det = self.a * self.c - self.b * self.b;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some([
            (self.c * g[0] - self.b * g[1]) / det,
            (self.a * g[1] - self.b * g[0]) / det,
        ])
    }

    pub fn scale(&self, s: f64) -> Self {
        Sym2 {
            a: self.a * s,
            b: self.b * s,
            c: self.c * s,
        }
    }

    pub fn add(&self, o: &Sym2) -> Self {
        Sym2 {
            a: self.a + o.a,
            b: self.b + o.b,
            c: self.c + o.c,
        }
    }

    /// `R H R^T` for a rotation (or any 2x2) matrix `r`.
    pub fn conjugate(&self, r: [[f64; 2]; 2]) -> Self {
        let h = [[self.a, self.b], [self.b, self.c]];
        let mut rh = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                rh[i][j] = r[i][0] * h[0][j] + r[i][1] * h[1][j];
            }
        }
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = rh[i][0] * r[j][0] + rh[i][1] * r[j][1];
            }
        }
        Sym2 {
            a: out[0][0],
            b: 0.5 * (out[0][1] + out[1][0]),
            c: out[1][1],
        }
    }
}

/// Loss of a single free embedding point `y` against frozen points:
/// `L(y) = sum_k -2 u_k log w(y_k, y) + log(Z_frozen + 2 sum_k w(y_k, y))`.
#[derive(Debug, Clone)]
pub struct LooProblem {
    frozen: Vec<[f64; 2]>,
    u: Vec<f64>,
    z_frozen: f64,
    scale: f64,
}

/// Value, gradient and Hessian of the LOO loss at one point.
#[derive(Debug, Clone, Copy)]
pub struct LooEval {
    pub loss: f64,
    pub grad: [f64; 2],
    pub hess: Sym2,
}

impl LooProblem {
    /// Builds a problem from frozen points, a similarity column and the frozen
    /// normalizer `sum_{k != l} w_kl` over frozen pairs.
    pub fn new(frozen: Vec<[f64; 2]>, u: Vec<f64>, z_frozen: f64) -> Result<Self> {
        if frozen.is_empty() || frozen.len() != u.len() {
            return Err(Error::invalid(format!(
                "{} frozen points but {} similarity entries",
                frozen.len(),
                u.len()
            )));
        }
        if frozen.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("frozen embedding has non-finite entries"));
        }
        if u.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::invalid(
                "similarity column must be finite and non-negative",
            ));
        }
        if !u.iter().any(|&v| v > 0.0) {
            return Err(Error::invalid("similarity column has no positive entry"));
        }
        if !(z_frozen >= 0.0) || !z_frozen.is_finite() {
            return Err(Error::invalid(
                "frozen normalizer must be finite and non-negative",
            ));
        }
        let diag = bbox_diag(&frozen);
        let scale = if diag > 0.0 { diag } else { 1.0 };
        Ok(Self {
            frozen,
            u,
            z_frozen,
            scale,
        })
    }

    /// Freezes all rows of `y` except `skip` (if any) and computes the frozen
    /// normalizer directly.
    pub fn from_embedding(y: &Array2<f64>, skip: Option<usize>, u: Vec<f64>) -> Result<Self> {
        let frozen: Vec<[f64; 2]> = y
            .rows()
            .into_iter()
            .enumerate()
            .filter(|(k, _)| Some(*k) != skip)
            .map(|(_, r)| [r[0], r[1]])
            .collect();
        let z = frozen_normalizer(&frozen);
        Self::new(frozen, u, z)
    }

    pub fn frozen(&self) -> &[[f64; 2]] {
        &self.frozen
    }

    pub fn column(&self) -> &[f64] {
        &self.u
    }

    pub fn z_frozen(&self) -> f64 {
        self.z_frozen
    }

    /// Bounding-box diagonal of the frozen points (1 if they all coincide).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn loss(&self, y: [f64; 2]) -> f64 {
        let (mut att, mut s) = (0.0, 0.0);
        for (p, &u) in self.frozen.iter().zip(&self.u) {
            let d2 = sq(y[0] - p[0]) + sq(y[1] - p[1]);
            att += 2.0 * u * d2.ln_1p();
            s += 1.0 / (1.0 + d2);
        }
        att + (self.z_frozen + 2.0 * s).ln()
    }

    pub fn gradient(&self, y: [f64; 2]) -> [f64; 2] {
        let (fa, fr) = self.forces(y);
        [-(fa[0] + fr[0]), -(fa[1] + fr[1])]
    }

    /// Attractive and repulsive parts of the negative gradient,
    /// `F_a = 4 sum u w (y_k - y)` and `F_r = -(4/S) sum w^2 (y_k - y)`.
    pub fn forces(&self, y: [f64; 2]) -> ([f64; 2], [f64; 2]) {
        let (mut fa, mut rw, mut s) = ([0.0; 2], [0.0; 2], 0.0);
        for (p, &u) in self.frozen.iter().zip(&self.u) {
            let (dx, dy) = (p[0] - y[0], p[1] - y[1]);
            let w = 1.0 / (1.0 + dx * dx + dy * dy);
            s += w;
            fa[0] += u * w * dx;
            fa[1] += u * w * dy;
            rw[0] += w * w * dx;
            rw[1] += w * w * dy;
        }
        let total = self.z_frozen + 2.0 * s;
        (
            [4.0 * fa[0], 4.0 * fa[1]],
            [-4.0 * rw[0] / total, -4.0 * rw[1] / total],
        )
    }

    pub fn eval(&self, y: [f64; 2]) -> LooEval {
        let mut att = 0.0;
        let mut ga = [0.0; 2];
        let mut ha = Sym2::ZERO;
        let mut s = 0.0;
        let mut gs = [0.0; 2];
        let mut hs = Sym2::ZERO;
        for (p, &u) in self.frozen.iter().zip(&self.u) {
            let (rx, ry) = (y[0] - p[0], y[1] - p[1]);
            let d2 = rx * rx + ry * ry;
            let w = 1.0 / (1.0 + d2);
            let w2 = w * w;
            att += 2.0 * u * d2.ln_1p();
            let aw = 4.0 * u * w;
            ga[0] += aw * rx;
            ga[1] += aw * ry;
            let aww = 8.0 * u * w2;
            ha.a += aw - aww * rx * rx;
            ha.b -= aww * rx * ry;
            ha.c += aw - aww * ry * ry;
            s += w;
            gs[0] -= 4.0 * w2 * rx;
            gs[1] -= 4.0 * w2 * ry;
            let w3 = 16.0 * w2 * w;
            hs.a += -4.0 * w2 + w3 * rx * rx;
            hs.b += w3 * rx * ry;
            hs.c += -4.0 * w2 + w3 * ry * ry;
        }
        let total = self.z_frozen + 2.0 * s;
        let grad = [ga[0] + gs[0] / total, ga[1] + gs[1] / total];
        let t2 = total * total;
        let hess = Sym2 {
            a: ha.a + hs.a / total - gs[0] * gs[0] / t2,
            b: ha.b + hs.b / total - gs[0] * gs[1] / t2,
            c: ha.c + hs.c / total - gs[1] * gs[1] / t2,
        };
        LooEval {
            loss: att + total.ln(),
            grad,
            hess,
        }
    }
}

#[inline]
fn sq(x: f64) -> f64 {
    x * x
}

pub(crate) fn bbox_diag(pts: &[[f64; 2]]) -> f64 {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in pts {
        for c in 0..2 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    (sq(hi[0] - lo[0]) + sq(hi[1] - lo[1])).sqrt()
}

/// `sum_{k != l} w(y_k, y_l)` over all ordered pairs of the given points.
pub fn frozen_normalizer(pts: &[[f64; 2]]) -> f64 {
    let mut z = 0.0;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            z += 1.0 / (1.0 + sq(pts[i][0] - pts[j][0]) + sq(pts[i][1] - pts[j][1]));
        }
    }
    2.0 * z
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> LooProblem {
        LooProblem::from_embedding(
            &ndarray::array![[0.0, 0.0], [2.0, 1.0], [-1.0, 3.0], [4.0, -2.0]],
            None,
            vec![0.1, 0.02, 0.0, 0.05],
        )
        .unwrap()
    }

    #[test]
    fn eval_agrees_with_parts() {
        let p = toy();
        let y = [0.7, -0.4];
        let e = p.eval(y);
        assert!((e.loss - p.loss(y)).abs() < 1e-14);
        let g = p.gradient(y);
        assert!((e.grad[0] - g[0]).abs() < 1e-14 && (e.grad[1] - g[1]).abs() < 1e-14);
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let p = toy();
        let y = [1.1, 0.3];
        let h = 1e-6;
        let e = p.eval(y);
        let gx = p.gradient([y[0] + h, y[1]]);
        let gx0 = p.gradient([y[0] - h, y[1]]);
        let gy = p.gradient([y[0], y[1] + h]);
        let gy0 = p.gradient([y[0], y[1] - h]);
        let a = (gx[0] - gx0[0]) / (2.0 * h);
        let b = (gy[0] - gy0[0]) / (2.0 * h);
        let c = (gy[1] - gy0[1]) / (2.0 * h);
        assert!((e.hess.a - a).abs() < 1e-7 * (1.0 + a.abs()));
        assert!((e.hess.b - b).abs() < 1e-7 * (1.0 + b.abs()));
        assert!((e.hess.c - c).abs() < 1e-7 * (1.0 + c.abs()));
    }

    #[test]
    fn sym2_eigen() {
        let h = Sym2 {
            a: 2.0,
            b: 1.0,
            c: 2.0,
        };
        assert_eq!(h.eigenvalues(), (1.0, 3.0));
        let v = h.min_eigenvector();
        assert!((v[0] + v[1]).abs() < 1e-15);
        assert_eq!(
            Sym2 {
                a: 2.0,
                b: 0.0,
                c: 1e-8
            }
            .eigenvalues()
            .0,
            1e-8
        );
    }

    #[test]
    fn rejects_empty_column() {
        assert!(LooProblem::new(vec![[0.0, 0.0]], vec![0.0], 0.0).is_err());
    }
}
