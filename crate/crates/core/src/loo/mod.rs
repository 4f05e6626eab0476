//! Leave-one-out machinery: the loss of a single free point against a frozen
//! embedding, its global minimization, landscapes, trajectories and the
//! validation protocol for the frozen-embedding assumption.

mod column;
mod field;
mod landscape;
mod problem;
mod solve;
mod trajectory;
mod validate;

pub use column::{ColumnMethod, LooContext};
pub use field::{
    compare_field, symmetric_offsets, theoretical_field, FieldAgreement, TwoClusterFrame,
};
pub use landscape::{landscape, Bounds, LandscapeGrid};
pub use problem::{frozen_normalizer, LooEval, LooProblem, Sym2};
pub use solve::{inflated_bounds, solve_loo_map, LocalMinimum, LooSolution, SolveStrategy};
pub use trajectory::{interpolation_trajectory, Trajectory, TrajectoryPoint};
pub use validate::{
    loo_trial, normalized_error, validate_from_base, validate_loo, LooValidationReport,
    PointSampler, ValidateOptions,
};
