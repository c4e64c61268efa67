//! Numerical laboratory for the two-dimensional Poisson matching problem.
//!
//! * [`point_process`]: reproducible Poisson / binomial samples on boxes.
//! * [`dyadic`]: dyadic count statistics, the density stopping scale and the
//!   stopped partition.
//! * [`assignment`]: exact matching and transportation solvers, the
//!   semi-discrete `W_2` distance to Lebesgue, monotonicity checks and the
//!   `E(R)` / `D(R)` statistics.
//! * [`witness`]: the dyadic martingale dual witness (lower bound on `W_1`).
//! * [`flux`]: hierarchical Neumann fluxes (certified upper bound on `W_2^2`).
//! * [`experiments`]: scaling sweeps, least-squares fits and result records.

pub mod assignment;
pub mod dyadic;
pub mod error;
pub mod experiments;
pub mod flux;
mod export;
mod krylov;
pub mod point_process;
mod spatial;
pub mod stats;
pub mod witness;

pub use error::{Error, Result};
pub use point_process::{Point, PointSet, Rect, RngStream};
pub use export::{read_grid, write_grid};
