//! Statistics computed from measurement data.
//!
//! All quantities use normalized outcomes `q = 2J/N`. The linearized criterion
//! is `Gamma = N Var(Q_perp) - <Q_n>^2` and the tangent-plane family replaces
//! the convex term `h(x, y) = N x^2 + y^2` by its tangent plane at
//! `c = (alpha, beta)`:
//!
//! ```text
//! f_c(x, y) = 2 alpha N x + 2 beta y - N alpha^2 - beta^2 <= h(x, y)
//! Gamma_c   = N <Q_perp^2> - f_c(<Q_perp>, <Q_n>) >= Gamma
//! ```
//!
//! The observed `gamma_c` is the mean of the per-round terms
//! `Gamma_{c,i} = N q_perp^2 - f_c(q_perp, q_par)` over the `M/2` rounds.

use crate::error::{Error, Result};
use crate::model::{MeasurementBatch, SummaryStats, TangentPoint};

/// Anything that yields the observed `gamma_c` for a tangent point.
pub trait GammaCSource: Sync {
    fn gamma_c(&self, c: TangentPoint) -> f64;

    /// A point where `gamma_c` is smallest, if cheaply known. Used to seed
    /// tangent searches whose feasible region may be thinner than the grid.
    fn hint(&self) -> Option<TangentPoint> {
        None
    }
}

impl<F> GammaCSource for F
where
    F: Fn(TangentPoint) -> f64 + Sync,
{
    fn gamma_c(&self, c: TangentPoint) -> f64 {
        self(c)
    }
}

/// Wineland parameter `N s_perp / mu_par^2`.
pub fn wineland_xi2(stats: &SummaryStats) -> Result<f64> {
    if stats.mu_par == 0.0 {
        return Err(Error::Division("mean spin length mu_par is zero"));
    }
    Ok(stats.n_spins as f64 * stats.s_perp / (stats.mu_par * stats.mu_par))
}

/// Linearized criterion `N s_perp - mu_par^2`; negative iff `xi2 < 1`.
pub fn gamma_linear(stats: &SummaryStats) -> f64 {
    stats.n_spins as f64 * stats.s_perp - stats.mu_par * stats.mu_par
}

/// Tangent plane of `N x^2 + y^2` at `c`, evaluated at `(x, y)`.
pub fn tangent_plane(n_spins: u32, c: TangentPoint, x: f64, y: f64) -> f64 {
    let n = n_spins as f64;
    2.0 * c.alpha * n * x + 2.0 * c.beta * y - n * c.alpha * c.alpha - c.beta * c.beta
}

/// Per-round term `Gamma_{c,i}`.
pub fn gamma_c_point(q_perp: f64, q_par: f64, n_spins: u32, c: TangentPoint) -> f64 {
    n_spins as f64 * q_perp * q_perp - tangent_plane(n_spins, c, q_perp, q_par)
}

/// Mean of `Gamma_{c,i}` over the rounds of a batch.
pub fn gamma_c_observed(batch: &MeasurementBatch, c: TangentPoint) -> Result<f64> {
    if batch.rounds.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let sum: f64 = batch
        .rounds
        .iter()
        .map(|r| gamma_c_point(r.q_perp, r.q_par, batch.n_spins, c))
        .sum();
    Ok(sum / batch.pairs() as f64)
}

/// Which summary expression to use for `gamma_c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SummaryForm {
    /// `N[S + mu_perp^2] - 2 N alpha mu_perp - 2 beta mu_par + N alpha^2 + beta^2`.
    Full,
    /// `N S - 2 beta mu_par + beta^2`, i.e. the full form with `alpha = mu_perp = 0`.
    Reduced,
}

pub fn gamma_c_from_summary(stats: &SummaryStats, c: TangentPoint, form: SummaryForm) -> f64 {
    let n = stats.n_spins as f64;
    match form {
        SummaryForm::Full => {
            n * (stats.s_perp + stats.mu_perp * stats.mu_perp)
                - 2.0 * n * c.alpha * stats.mu_perp
                - 2.0 * c.beta * stats.mu_par
                + n * c.alpha * c.alpha
                + c.beta * c.beta
        }
        SummaryForm::Reduced => n * stats.s_perp - 2.0 * c.beta * stats.mu_par + c.beta * c.beta,
    }
}

/// `gamma_c` as a function of `c` for fixed summary statistics.
#[derive(Debug, Clone, Copy)]
pub struct SummaryGamma {
    pub stats: SummaryStats,
    pub form: SummaryForm,
}

impl SummaryGamma {
    pub fn new(stats: SummaryStats, form: SummaryForm) -> Self {
        Self { stats, form }
    }
}

impl GammaCSource for SummaryGamma {
    fn gamma_c(&self, c: TangentPoint) -> f64 {
        gamma_c_from_summary(&self.stats, c, self.form)
    }

    fn hint(&self) -> Option<TangentPoint> {
        let alpha = match self.form {
            SummaryForm::Full => self.stats.mu_perp,
            SummaryForm::Reduced => 0.0,
        };
        Some(TangentPoint::clamped(alpha, self.stats.mu_par))
    }
}

/// Raw first and second moments of a batch, enough to evaluate `gamma_c`
/// at any `c` in constant time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchMoments {
    pub n_spins: u32,
    pub mean_perp_sq: f64,
    pub mean_perp: f64,
    pub mean_par: f64,
    pub pairs: usize,
}

impl BatchMoments {
    pub fn new(batch: &MeasurementBatch) -> Result<Self> {
        if batch.rounds.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let l = batch.pairs() as f64;
        Ok(Self {
            n_spins: batch.n_spins,
            mean_perp_sq: batch.perp().map(|q| q * q).sum::<f64>() / l,
            mean_perp: batch.perp().sum::<f64>() / l,
            mean_par: batch.par().sum::<f64>() / l,
            pairs: batch.pairs(),
        })
    }
}

impl GammaCSource for BatchMoments {
    fn gamma_c(&self, c: TangentPoint) -> f64 {
        self.n_spins as f64 * self.mean_perp_sq
            - tangent_plane(self.n_spins, c, self.mean_perp, self.mean_par)
    }

    fn hint(&self) -> Option<TangentPoint> {
        Some(TangentPoint::clamped(self.mean_perp, self.mean_par))
    }
}

/// Unbiased sample variance (divisor `len - 1`).
pub fn sample_variance(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: values.len(),
        });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Ok(values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Unbiased estimate of the squared mean: mean of squares minus the sample
/// variance. Can be negative.
pub fn second_moment_estimate(values: &[f64]) -> Result<f64> {
    let var = sample_variance(values)?;
    let n = values.len() as f64;
    Ok(values.iter().map(|v| v * v).sum::<f64>() / n - var)
}

/// Unbiased estimate of `Gamma`: `N` times the sample variance of the
/// perpendicular outcomes minus the squared-mean estimate of the parallel ones.
pub fn gamma_tilde(batch: &MeasurementBatch) -> Result<f64> {
    let perp: Vec<f64> = batch.perp().collect();
    let par: Vec<f64> = batch.par().collect();
    Ok(batch.n_spins as f64 * sample_variance(&perp)? - second_moment_estimate(&par)?)
}

/// Value of one block estimator from two consecutive rounds.
pub fn gamma_prime_block(n_spins: u32, perp: (f64, f64), par: (f64, f64)) -> f64 {
    let d = perp.0 - perp.1;
    0.5 * n_spins as f64 * d * d - par.0 * par.1
}

/// Block estimator of `Gamma`: consecutive rounds `(2i-1, 2i)` form a block
/// `(N/2)(q_perp - q_perp')^2 - q_par q_par'`; returns the mean over the
/// `M/4` blocks.
pub fn gamma_prime_blocks(batch: &MeasurementBatch) -> Result<f64> {
    if batch.rounds.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if !batch.pairs().is_multiple_of(2) {
        return Err(Error::Blocking(batch.total_count()));
    }
    let blocks = batch.pairs() / 2;
    let sum: f64 = batch
        .rounds
        .chunks_exact(2)
        .map(|b| {
            gamma_prime_block(
                batch.n_spins,
                (b[0].q_perp, b[1].q_perp),
                (b[0].q_par, b[1].q_par),
            )
        })
        .sum();
    Ok(sum / blocks as f64)
}

/// Largest and smallest possible values of `Gamma_{c,i}` over `[-1, 1]^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaCExtrema {
    pub gamma1: f64,
    pub gamma0: f64,
}

impl GammaCExtrema {
    pub fn new(n_spins: u32, c: TangentPoint) -> Self {
        let n = n_spins as f64;
        let (a, b) = (c.alpha.abs(), c.beta.abs());
        Self {
            gamma1: n * (1.0 + a).powi(2) + (1.0 + b).powi(2) - 1.0,
            gamma0: (1.0 - b).powi(2) - 1.0,
        }
    }
}
