//! Exact collective-spin simulation on the `(N + 1)`-dimensional symmetric
//! sector, and a Monte Carlo oracle built on it.

mod measure;
mod oracle;
mod spin;
mod state;

pub use measure::{measure_distribution, ExactMoments, MeasurementAxes, OutcomeDistribution};
pub use oracle::{
    binomial_interval, clopper_pearson, empirical_tail, empirical_tails, sample_batch, trial_rng,
    TailConfig, TailEstimate, TailQuery, TailStatistic, Z_99,
};
pub use spin::{Axis, SpinOperators, DEFAULT_N_MAX};
pub use state::{
    css_state, one_axis_twist, principal_axes, rho_mixture, twisted_squeezed_state,
    SqueezedPreparation, StateMixture, SymmetricState,
};
