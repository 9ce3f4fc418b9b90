//! Binary linear programs and an exact LP-based branch-and-bound solver.

pub mod bnb;
pub mod program;
pub mod simplex;

pub use bnb::{bnb_solve, Limits, MipResult, MipStatus};
pub use program::{BinaryProgram, Constraint, Sense};
pub use simplex::{lp_solve, LpSolution, LpStatus};
