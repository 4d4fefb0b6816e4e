use rand::Rng;
use serde::{Deserialize, Serialize};

use super::spin::{check_axis, Axis, SpinOperators};
use super::state::StateMixture;
use crate::error::{Error, Result};
use crate::model::TangentPoint;

/// Born probabilities of `Q = 2 J_axis / N` over the outcomes `q_k = 2k/N - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub axis: Axis,
    pub probabilities: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn n_spins(&self) -> u32 {
        (self.probabilities.len() - 1) as u32
    }

    pub fn outcome(&self, k: usize) -> f64 {
        2.0 * k as f64 / self.n_spins() as f64 - 1.0
    }

    pub fn outcomes(&self) -> Vec<f64> {
        (0..self.probabilities.len()).map(|k| self.outcome(k)).collect()
    }

    pub fn mean(&self) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(k, p)| p * self.outcome(k))
            .sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.probabilities
            .iter()
            .enumerate()
            .map(|(k, p)| p * self.outcome(k).powi(2))
            .sum()
    }

    pub fn variance(&self) -> f64 {
        self.second_moment() - self.mean().powi(2)
    }
}

/// Exact outcome distribution along `axis`. The axis operator is diagonalized
/// and each eigenvector is assigned to the outcome nearest its eigenvalue;
/// mixtures average their components' distributions.
pub fn measure_distribution(source: &StateMixture, axis: Axis) -> Result<OutcomeDistribution> {
    source.check()?;
    check_axis(axis)?;
    let n = source.n_spins();
    let ops = SpinOperators::with_max(n, n.max(super::spin::DEFAULT_N_MAX))?;
    let eig = ops.along(axis).symmetric_eigen();
    let dim = ops.dim();
    let half = n as f64 / 2.0;
    let mut probabilities = vec![0.0; dim];
    let mut seen = vec![false; dim];
    let mut slot = Vec::with_capacity(dim);
    for (col, &lambda) in eig.eigenvalues.iter().enumerate() {
        let k = (lambda + half).round();
        if !(0.0..dim as f64).contains(&k) || (lambda + half - k).abs() > 1e-6 || seen[k as usize] {
            return Err(Error::Validation(format!(
                "eigenvalue {lambda} of the axis operator is not a distinct spin projection"
            )));
        }
        seen[k as usize] = true;
        slot.push((col, k as usize));
    }
    for (w, state) in &source.components {
        let v = state.vector();
        for &(col, k) in &slot {
            probabilities[k] += w * eig.eigenvectors.column(col).dotc(&v).norm_sqr();
        }
    }
    let total: f64 = probabilities.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::Validation(format!("probabilities sum to {total}")));
    }
    for p in &mut probabilities {
        *p /= total;
    }
    Ok(OutcomeDistribution { axis, probabilities })
}

/// Measurement directions: `n` (mean spin) and `n_perp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementAxes {
    pub n: Axis,
    pub n_perp: Axis,
}

impl MeasurementAxes {
    pub fn new(n: Axis, n_perp: Axis) -> Result<Self> {
        check_axis(n)?;
        check_axis(n_perp)?;
        let dot: f64 = (0..3).map(|i| n[i] * n_perp[i]).sum();
        if dot.abs() > 1e-9 {
            return Err(Error::Domain(format!("axes are not orthogonal (dot = {dot})")));
        }
        Ok(Self { n, n_perp })
    }
}

/// First and second moments of both measured observables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactMoments {
    pub n_spins: u32,
    pub mean_perp: f64,
    pub mean_perp_sq: f64,
    pub mean_par: f64,
}

impl ExactMoments {
    pub fn new(perp: &OutcomeDistribution, par: &OutcomeDistribution) -> Self {
        Self {
            n_spins: perp.n_spins(),
            mean_perp: perp.mean(),
            mean_perp_sq: perp.second_moment(),
            mean_par: par.mean(),
        }
    }

    pub fn of(source: &StateMixture, axes: &MeasurementAxes) -> Result<Self> {
        Ok(Self::new(
            &measure_distribution(source, axes.n_perp)?,
            &measure_distribution(source, axes.n)?,
        ))
    }

    /// `N Var(Q_perp) - <Q_n>^2`.
    pub fn gamma(&self) -> f64 {
        self.n_spins as f64 * (self.mean_perp_sq - self.mean_perp.powi(2)) - self.mean_par.powi(2)
    }

    pub fn gamma_c(&self, c: TangentPoint) -> f64 {
        self.n_spins as f64 * self.mean_perp_sq
            - crate::estimators::tangent_plane(self.n_spins, c, self.mean_perp, self.mean_par)
    }

    pub fn xi2(&self) -> f64 {
        self.n_spins as f64 * (self.mean_perp_sq - self.mean_perp.powi(2)) / self.mean_par.powi(2)
    }
}

/// Inverse-CDF sampler over the `N + 1` outcome bins.
#[derive(Debug, Clone)]
pub(crate) struct BinSampler {
    cdf: Vec<f64>,
}

impl BinSampler {
    pub fn new(dist: &OutcomeDistribution) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = dist
            .probabilities
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        // the final bin absorbs rounding so u < 1 always lands somewhere
        let last_nonzero = dist
            .probabilities
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(cdf.len() - 1);
        for c in &mut cdf[last_nonzero..] {
            *c = 1.0;
        }
        Self { cdf }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u)
    }
}
