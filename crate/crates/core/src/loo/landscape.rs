use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problem::LooProblem;
use super::solve::{inflated_bounds, solve_from, LocalMinimum, SolveStrategy};
use crate::error::{Error, Result};

/// Rectangle `[lo[0], hi[0]] x [lo[1], hi[1]]` in embedding coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl Bounds {
    /// Frozen bounding box of the problem, inflated by 20%.
    pub fn around(problem: &LooProblem) -> Self {
        let (lo, hi) = inflated_bounds(problem.frozen(), 0.2);
        Self { lo, hi }
    }

    pub fn contains(&self, y: [f64; 2]) -> bool {
        (0..2).all(|c| y[c] >= self.lo[c] && y[c] <= self.hi[c])
    }
}

/// Loss and negative gradient on a regular grid, with the local minima
/// reached by descending from every grid node.
///
/// `loss[r][c]` and `grad[r][c]` are evaluated at
/// `(x_c, y_r) = (lo0 + c * dx, lo1 + r * dy)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LandscapeGrid {
    pub bounds: Bounds,
    pub resolution: [usize; 2],
    pub loss: Vec<Vec<f64>>,
    pub grad: Vec<Vec<[f64; 2]>>,
    pub minima: Vec<LocalMinimum>,
}

impl LandscapeGrid {
    pub fn node(&self, r: usize, c: usize) -> [f64; 2] {
        grid_node(&self.bounds, self.resolution, r, c)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(f, self)?;
        Ok(())
    }
}

fn grid_node(b: &Bounds, res: [usize; 2], r: usize, c: usize) -> [f64; 2] {
    let fx = c as f64 / (res[0] - 1) as f64;
    let fy = r as f64 / (res[1] - 1) as f64;
    [
        b.lo[0] + fx * (b.hi[0] - b.lo[0]),
        b.lo[1] + fy * (b.hi[1] - b.lo[1]),
    ]
}

/// Evaluates the landscape and counts minima. `resolution` is
/// `[columns, rows]`; both must be at least 2. Minima that descents reach
/// outside `bounds` are not reported.
pub fn landscape(
    problem: &LooProblem,
    bounds: Bounds,
    resolution: [usize; 2],
    strategy: &SolveStrategy,
) -> Result<LandscapeGrid> {
    if resolution[0] < 2 || resolution[1] < 2 {
        return Err(Error::invalid(
            "landscape resolution must be at least 2 per axis",
        ));
    }
    if !(bounds.hi[0] > bounds.lo[0] && bounds.hi[1] > bounds.lo[1]) {
        return Err(Error::invalid("landscape bounds must have positive extent"));
    }
    let rows: Vec<(Vec<f64>, Vec<[f64; 2]>)> = (0..resolution[1])
        .into_par_iter()
        .map(|r| {
            (0..resolution[0])
                .map(|c| {
                    let y = grid_node(&bounds, resolution, r, c);
                    let g = problem.gradient(y);
                    (problem.loss(y), [-g[0], -g[1]])
                })
                .unzip()
        })
        .collect();
    let (loss, grad) = rows.into_iter().unzip();
    let starts: Vec<[f64; 2]> = (0..resolution[1])
        .flat_map(|r| (0..resolution[0]).map(move |c| (r, c)))
        .map(|(r, c)| grid_node(&bounds, resolution, r, c))
        .collect();
    let minima = match solve_from(problem, &starts, strategy) {
        Ok(sol) => sol
            .minima
            .into_iter()
            .filter(|m| bounds.contains(m.y))
            .collect(),
        Err(Error::NoConvergence { .. }) => Vec::new(),
        Err(e) => return Err(e),
    };
    Ok(LandscapeGrid {
        bounds,
        resolution,
        loss,
        grad,
        minima,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_attractor_has_one_minimum() {
        // One frozen point with u > 1/2: the loss is (2u - 1) log(1 + |y|^2).
        let p = LooProblem::new(vec![[1.0, 2.0]], vec![0.8], 0.0).unwrap();
        let b = Bounds {
            lo: [-6.0, -6.0],
            hi: [10.0, 10.0],
        };
        let g = landscape(&p, b, [20, 20], &SolveStrategy::default()).unwrap();
        assert_eq!(g.minima.len(), 1);
        let (r, c) = (7, 11);
        let y = g.node(r, c);
        let grad = p.gradient(y);
        assert_eq!(g.grad[r][c], [-grad[0], -grad[1]]);
        assert_eq!(g.loss[r][c], p.loss(y));
    }

    #[test]
    fn json_has_expected_keys() {
        let p = LooProblem::from_embedding(
            &ndarray::array![[0.0, 0.0], [1.0, 1.0]],
            None,
            vec![0.2, 0.1],
        )
        .unwrap();
        let g = landscape(&p, Bounds::around(&p), [3, 4], &SolveStrategy::default()).unwrap();
        let v: serde_json::Value = serde_json::to_value(&g).unwrap();
        for key in ["bounds", "resolution", "loss", "grad", "minima"] {
            assert!(v.get(key).is_some());
        }
        assert_eq!(v["loss"].as_array().unwrap().len(), 4);
        assert_eq!(v["grad"][0][0].as_array().unwrap().len(), 2);
    }
}
