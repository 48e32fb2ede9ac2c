//! Nonconforming Crouzeix-Raviart solvers for the 2D incompressible
//! Stokes and Navier-Stokes equations on triangle meshes.
//!
//! Three pressure discretizations share the same CR velocity space:
//! piecewise-constant pressure (`CrP0`), the enriched constant-plus-vertex
//! pressure (`TrioP0P1`), and a piecewise-constant pressure whose gradient
//! is reconstructed by a symmetric multi-point flux approximation (`Mps`).
//! A manufactured-solution harness measures L2 errors and experimental
//! convergence orders over mesh families, and a projection time stepper
//! handles the transient problem.

pub mod cases;
pub mod fem;
pub mod mpfa;
pub mod stokes;
pub mod linalg;
pub mod mesh;

mod error;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
