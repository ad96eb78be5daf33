//! Exact analysis of stationary solutions on finite cyclic spaces.

pub mod affine;
pub mod orbit;
pub mod polyhedron;

pub use affine::{AffineExpr, LinearConstraint, Relation};
pub use orbit::{
    cone, enumerate_pieces, enumerate_pieces_with, exact_stationarity_residual, find_cycle_fixed_points,
    find_cycle_fixed_points_with, push_through_cycle, verify_counterexample, AffinePiece, CounterexampleReport,
    CycleSolution, ExactOptions, FixedPointReport, PieceTrace, SolutionKind, Verdict,
};
pub use polyhedron::{Bound, PointSampler, Polyhedron};
