//! Budgeted network reconfiguration: relax binary switches to
//! probabilities, minimize the Laplacian congestion `d^T L_s^+ d` with
//! Frank–Wolfe, certify the result, and round it back to a configuration.

// `!(x > 0.0)` is used deliberately so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod congestion;
pub mod dense;
pub mod error;
pub mod frank_wolfe;
pub mod graph;
pub mod io;
pub mod laplacian;
pub mod oracle;
pub mod rounding;
pub mod solver;

pub use congestion::{approx_diff, exact_gradient, exact_phi, phi, DiffResult, HessianInfo};
pub use error::{Error, Result};
pub use frank_wolfe::{Certificate, FwConfig, FwOutcome, FwTrace, StepRule};
pub use graph::{
    project_zero_mean, Configuration, DemandVector, Edge, Graph, SwitchVector, Violation,
};
pub use io::Instance;
pub use laplacian::{assemble_laplacian, SparseLaplacian};
pub use oracle::EnumerationResult;
pub use rounding::{RepairMode, RoundingParams, RoundingReport};
pub use solver::{PreconditionerKind, SolveResult, SolverConfig};
