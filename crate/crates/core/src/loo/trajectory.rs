use std::path::Path;

use serde::Serialize;

use super::column::{ColumnMethod, LooContext};
use super::solve::{solve_loo_map, SolveStrategy};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub y: [f64; 2],
    /// Distance to the previous point of the trajectory (0 for the first).
    pub jump: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn max_jump(&self) -> f64 {
        self.points.iter().map(|p| p.jump).fold(0.0, f64::max)
    }

    /// Sample variance of the consecutive step lengths.
    pub fn step_variance(&self) -> f64 {
        let steps: Vec<f64> = self.points.iter().skip(1).map(|p| p.jump).collect();
        if steps.len() < 2 {
            return 0.0;
        }
        let m = steps.iter().sum::<f64>() / steps.len() as f64;
        steps.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / (steps.len() - 1) as f64
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "y1", "y2", "jump"])?;
        for p in &self.points {
            w.write_record(
                [p.t, p.y[0], p.y[1], p.jump]
                    .iter()
                    .map(|v| format!("{v:?}")),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// LOO-map images of `x(t) = t c1 + (1 - t) c2` for `steps` evenly spaced
/// `t` in `[0, 1]`. Each solve also starts from the previous image.
pub fn interpolation_trajectory(
    ctx: &LooContext,
    c1: &[f64],
    c2: &[f64],
    steps: usize,
    method: ColumnMethod,
    strategy: &SolveStrategy,
) -> Result<Trajectory> {
    if steps < 2 {
        return Err(Error::invalid("a trajectory needs at least two steps"));
    }
    if c1.len() != c2.len() {
        return Err(Error::invalid("endpoints differ in dimension"));
    }
    let mut points: Vec<TrajectoryPoint> = Vec::with_capacity(steps);
    for s in 0..steps {
        let t = s as f64 / (steps - 1) as f64;
        let x: Vec<f64> = c1
            .iter()
            .zip(c2)
            .map(|(a, b)| t * a + (1.0 - t) * b)
            .collect();
        let problem = ctx.add_one_problem(&x, method)?;
        let mut strat = strategy.clone();
        if let Some(prev) = points.last() {
            strat.extra_starts.push(prev.y);
        }
        let y = solve_loo_map(&problem, &strat)?.argmin;
        let jump = points
            .last()
            .map_or(0.0, |p| (p.y[0] - y[0]).hypot(p.y[1] - y[1]));
        points.push(TrajectoryPoint { t, y, jump });
    }
    Ok(Trajectory { points })
}
