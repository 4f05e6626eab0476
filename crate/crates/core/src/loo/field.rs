use super::problem::LooProblem;
use crate::error::{Error, Result};

/// Leading-order negative gradient of the LOO loss near the midpoint of two
/// separated clusters at `+theta` and `-theta`:
/// `(y_par - y_perp + eps * theta) / |theta|^2`, where `y_par` is the
/// projection of `y` on `theta`.
pub fn theoretical_field(theta: [f64; 2], eps: f64, y: [f64; 2]) -> Result<[f64; 2]> {
    let t2 = theta[0] * theta[0] + theta[1] * theta[1];
    if !(t2 > 0.0) {
        return Err(Error::invalid("theta must be non-zero"));
    }
    let proj = (theta[0] * y[0] + theta[1] * y[1]) / t2;
    let par = [proj * theta[0], proj * theta[1]];
    let perp = [y[0] - par[0], y[1] - par[1]];
    Ok([
        (par[0] - perp[0] + eps * theta[0]) / t2,
        (par[1] - perp[1] + eps * theta[1]) / t2,
    ])
}

/// Agreement between the empirical negative gradient and the theoretical field.
#[derive(Debug, Clone, Copy)]
pub struct FieldAgreement {
    pub mean_cosine: f64,
    /// Fraction of points where both the `theta` and the perpendicular
    /// components have the sign predicted by the theory.
    pub sign_fraction: f64,
    /// Fraction of points with a positive inner product against the hyperbolic term alone.
    pub hyperbolic_fraction: f64,
    /// Fraction of points pushed away from the origin along `theta` and
    /// pulled toward the `theta` axis across it.
    pub pattern_fraction: f64,
    pub points: usize,
}

/// Two-cluster coordinates for the field comparison: `origin` and `theta`
/// come from the similarity-weighted centroids of the two groups, and `eps`
/// is the relative imbalance `2 (U+ - U-) / (U+ + U-)` of the group masses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoClusterFrame {
    pub origin: [f64; 2],
    pub theta: [f64; 2],
    pub eps: f64,
}

impl TwoClusterFrame {
    /// `plus[k]` marks the frozen points of the `+theta` group.
    pub fn from_problem(problem: &LooProblem, plus: &[bool]) -> Result<Self> {
        if plus.len() != problem.frozen().len() {
            return Err(Error::invalid(
                "group mask length differs from the frozen set",
            ));
        }
        let mut mass = [0.0f64; 2];
        let mut c = [[0.0f64; 2]; 2];
        for ((p, &u), &is_plus) in problem.frozen().iter().zip(problem.column()).zip(plus) {
            let g = usize::from(!is_plus);
            mass[g] += u;
            c[g][0] += u * p[0];
            c[g][1] += u * p[1];
        }
        if !(mass[0] > 0.0 && mass[1] > 0.0) {
            return Err(Error::invalid("both groups need positive similarity mass"));
        }
        for g in 0..2 {
            c[g][0] /= mass[g];
            c[g][1] /= mass[g];
        }
        Ok(Self {
            origin: [0.5 * (c[0][0] + c[1][0]), 0.5 * (c[0][1] + c[1][1])],
            theta: [0.5 * (c[0][0] - c[1][0]), 0.5 * (c[0][1] - c[1][1])],
            eps: 2.0 * (mass[0] - mass[1]) / (mass[0] + mass[1]),
        })
    }

    pub fn theta_norm(&self) -> f64 {
        self.theta[0].hypot(self.theta[1])
    }
}

/// Compares `-grad L` with the theoretical field at `origin + offset` for each
/// offset. Points where either field vanishes are skipped.
pub fn compare_field(
    problem: &LooProblem,
    origin: [f64; 2],
    theta: [f64; 2],
    eps: f64,
    offsets: &[[f64; 2]],
) -> Result<FieldAgreement> {
    let perp_axis = [-theta[1], theta[0]];
    let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];
    let (mut cos_sum, mut count) = (0.0, 0usize);
    let (mut signs, mut hyper, mut pattern) = (0usize, 0usize, 0usize);
    for &off in offsets {
        let g = problem.gradient([origin[0] + off[0], origin[1] + off[1]]);
        let emp = [-g[0], -g[1]];
        let th = theoretical_field(theta, eps, off)?;
        let hy = theoretical_field(theta, 0.0, off)?;
        let (ne, nt) = (emp[0].hypot(emp[1]), th[0].hypot(th[1]));
        if ne == 0.0 || nt == 0.0 {
            continue;
        }
        count += 1;
        cos_sum += dot(emp, th) / (ne * nt);
        let same = |axis: [f64; 2]| (dot(emp, axis) > 0.0) == (dot(th, axis) > 0.0);
        if same(theta) && same(perp_axis) {
            signs += 1;
        }
        if dot(emp, hy) > 0.0 {
            hyper += 1;
        }
        let push = (dot(emp, theta) > 0.0) == (dot(off, theta) > 0.0);
        let pull = (dot(emp, perp_axis) > 0.0) != (dot(off, perp_axis) > 0.0);
        if push && pull {
            pattern += 1;
        }
    }
    if count == 0 {
        return Err(Error::invalid("no grid point with a non-vanishing field"));
    }
    Ok(FieldAgreement {
        mean_cosine: cos_sum / count as f64,
        sign_fraction: signs as f64 / count as f64,
        hyperbolic_fraction: hyper as f64 / count as f64,
        pattern_fraction: pattern as f64 / count as f64,
        points: count,
    })
}

/// `k x k` offsets on `[-r, r]^2` with `k` even, so no point lies on either axis.
pub fn symmetric_offsets(r: f64, k: usize) -> Vec<[f64; 2]> {
    let k = k.max(2) + k % 2;
    let step = 2.0 * r / (k - 1) as f64;
    let mut out = Vec::with_capacity(k * k);
    for a in 0..k {
        for b in 0..k {
            out.push([-r + a as f64 * step, -r + b as f64 * step]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_along_theta_pull_across() {
        let f = theoretical_field([2.0, 0.0], 0.0, [1.0, 0.0]).unwrap();
        assert!(f[0] > 0.0 && f[1] == 0.0);
        let f = theoretical_field([2.0, 0.0], 0.0, [0.0, 1.0]).unwrap();
        assert!(f[0] == 0.0 && f[1] < 0.0);
    }

    #[test]
    fn odd_without_perturbation() {
        let th = [1.3, -0.4];
        let y = [0.7, 2.1];
        let a = theoretical_field(th, 0.0, y).unwrap();
        let b = theoretical_field(th, 0.0, [-y[0], -y[1]]).unwrap();
        assert_eq!(a, [-b[0], -b[1]]);
    }

    #[test]
    fn zero_theta_rejected() {
        assert!(theoretical_field([0.0, 0.0], 0.0, [1.0, 1.0]).is_err());
    }
}
