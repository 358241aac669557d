//! One-sided direct event location for autonomous ODEs.
//!
//! An event problem `x' = f(x)`, `x(0) = x0`, `g(x0) < 0`, is lifted to a
//! Poisson system whose invariant encodes `g`, then integrated with an
//! energy-conserving EPHBVM(k, s) method on the interval `ω ∈ [0, H̄]`. When
//! `g` is a polynomial of degree `ν ≤ 2k / s` the final point lies on
//! `g = 0` up to round-off, and every earlier step endpoint stays on the
//! `g < 0` side.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod legendre;
pub mod locator;
pub mod method;
pub mod poisson;
pub mod problems;
pub mod surface;

pub use error::{Error, Result};
pub use locator::{
    convergence_study, locate, reference_event, ConvergenceRow, ErrorMetric, EventResult,
    LocateOptions, Rate, ReferenceSpec, StudyOptions,
};
pub use method::{Ephbvm, MethodParams, StageSystem, StepResult};
pub use poisson::{AugmentedState, PoissonSystem};
pub use problems::{builtin, EventProblem, ProblemBarrier};
