//! Spectral multidomain penalty discretization of the 2D Poisson–Neumann
//! problem, solved through a deflated, block-Jacobi preconditioned Schur
//! complement on the element interfaces.
//!
//! The pipeline is: [`mesh::build_mesh`] → [`assembly::SmpmOperators`] →
//! [`schur::SchurContext`] → [`driver::solve`]. [`experiments`] holds the
//! manufactured problem, the dense oracle and the refinement studies used by
//! the `smpm` binary.

pub mod assembly;
pub mod driver;
pub mod error;
pub mod experiments;
pub mod gll;
pub mod krylov;
pub mod mesh;
pub mod mmio;
pub mod nullspace;
pub mod schur;
pub mod sparse;

pub use assembly::SmpmOperators;
pub use driver::{solve, SchurSolver, Solution, SolverMode, SolverReport};
pub use error::{Error, Result};
pub use krylov::{gmres, GmresOptions, SolveStats};
pub use mesh::{build_mesh, Mesh};
pub use schur::SchurContext;

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
struct ReadmeDoctests;
