//! Sparse interior-point solver for smooth nonlinear programs.

pub mod ipm;
pub mod ldl;

pub use ipm::{solve, NlpProblem, Options, Solution, Status};
