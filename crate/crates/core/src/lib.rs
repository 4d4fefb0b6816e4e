//! Finite-statistics hypothesis testing for the Wineland spin-squeezing
//! criterion.
//!
//! The null hypothesis is "the measured state is not squeezed", i.e.
//! `Gamma = N Var(Q_perp) - <Q_n>^2 >= 0`. The crate provides
//!
//! * [`estimators`]: the Wineland parameter, the linearized criterion, the
//!   tangent-plane family `Gamma_c` and the unbiased estimators of `Gamma`;
//! * [`bounds`]: upper bounds on the p-value (Bernstein on `Gamma_c`,
//!   McDiarmid, block Bernstein) and the number of measurements each needs;
//! * [`lowerbound`]: a lower bound on any test's p-value from an explicit
//!   non-squeezed mixture;
//! * [`simulator`]: an exact symmetric-sector spin simulator and a Monte
//!   Carlo oracle used to check the analytic bounds;
//! * [`catalog`]: published experiments and their sample-size deficits.

// `!(x < 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod catalog;
pub mod error;
pub mod estimators;
pub mod lowerbound;
pub mod model;
pub mod simulator;

pub use error::{Error, Result};
pub use model::{
    BoundMethod, BoundReport, ExperimentEntry, MeasurementBatch, Round, SummaryStats, TangentPoint,
};
