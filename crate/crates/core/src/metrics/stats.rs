use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::neighborhood::pearson;
use crate::error::{Error, Result};

/// Ranks starting at 1, ties given their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && v[order[end]] == v[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpearmanTest {
    pub rho: f64,
    /// Two-sided p-value from the Student-t approximation.
    pub p_value: f64,
    pub n: usize,
    /// Set for `n < 10`, where the approximation is coarse.
    pub small_sample: bool,
}

/// Spearman rank correlation with a two-sided t-approximation test.
pub fn spearman_test(a: &[f64], b: &[f64]) -> Result<SpearmanTest> {
    let n = a.len();
    if b.len() != n {
        return Err(Error::invalid("vectors differ in length"));
    }
    if n < 5 {
        return Err(Error::invalid(format!("need at least 5 pairs, got {n}")));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("values must be finite"));
    }
    let rho = pearson(&average_ranks(a), &average_ranks(b))
        .ok_or_else(|| Error::invalid("a constant vector has no rank correlation"))?;
    let df = (n - 2) as f64;
    let p_value = if rho.abs() >= 1.0 {
        0.0
    } else {
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
        (2.0 * dist.sf(t.abs())).min(1.0)
    };
    Ok(SpearmanTest {
        rho,
        p_value,
        n,
        small_sample: n < 10,
    })
}

/// Area under the ROC curve via the Mann-Whitney statistic, ties counted half.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let n_pos = positive.iter().filter(|p| **p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid("both classes must be present"));
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks
        .iter()
        .zip(positive)
        .filter(|(_, p)| **p)
        .map(|(r, _)| r)
        .sum();
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}
