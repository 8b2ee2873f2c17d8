//! Projection-free first-order optimization over smooth and strongly convex
//! sets, built on the structure of squared gauge functions.

pub mod error;
pub mod experiment;
pub mod finitemax;
pub mod gauge;
pub mod linalg;
pub mod scalar;
pub mod sets;
pub mod solvers;
pub mod steps;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// `f64` instantiations of the generic types.
pub type Matrix = linalg::Matrix<f64>;
pub type Set = sets::StructuredSet<f64>;
pub type Oracle = gauge::GaugeOracle<f64>;
pub type Problem = finitemax::FiniteMaxProblem<f64>;
pub type Quadratic = finitemax::QuadraticObjective<f64>;
pub type TraceF64 = solvers::Trace<f64>;
