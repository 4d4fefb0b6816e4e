//! Monte Carlo estimates of tail probabilities of the estimators, used as an
//! oracle for the analytic bounds.
//!
//! Each trial draws its outcomes from its own ChaCha stream selected by
//! `(seed, trial index)`, and hit counts are integer sums, so results do not
//! depend on how trials are spread over worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{Beta, ContinuousCDF};

use super::measure::{measure_distribution, BinSampler, ExactMoments, MeasurementAxes};
use super::state::StateMixture;
use crate::error::{Error, Result};
use crate::estimators::{gamma_c_observed, gamma_prime_blocks, gamma_tilde};
use crate::model::{MeasurementBatch, Round, TangentPoint};

/// Two-sided 99% standard normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_900_4;

/// Below this many hits the interval is exact Clopper-Pearson.
const EXACT_INTERVAL_BELOW: u64 = 10;

/// Slack on the null-hypothesis check of exact moments.
const NULL_TOLERANCE: f64 = 1e-12;

pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

struct PairSampler {
    n_spins: u32,
    perp: BinSampler,
    par: BinSampler,
}

impl PairSampler {
    fn new(source: &StateMixture, axes: &MeasurementAxes) -> Result<Self> {
        Ok(Self {
            n_spins: source.n_spins(),
            perp: BinSampler::new(&measure_distribution(source, axes.n_perp)?),
            par: BinSampler::new(&measure_distribution(source, axes.n)?),
        })
    }

    fn outcome(&self, k: usize) -> f64 {
        2.0 * k as f64 / self.n_spins as f64 - 1.0
    }

    /// All perpendicular outcomes are drawn first, then all parallel ones.
    fn draw(&self, rng: &mut ChaCha8Rng, pairs: usize) -> MeasurementBatch {
        let mut rounds = vec![Round::new(0.0, 0.0); pairs];
        for r in rounds.iter_mut() {
            r.q_perp = self.outcome(self.perp.sample(rng));
        }
        for r in rounds.iter_mut() {
            r.q_par = self.outcome(self.par.sample(rng));
        }
        MeasurementBatch::new(self.n_spins, rounds)
    }
}

/// `rounds` i.i.d. rounds from the exact outcome distributions along both axes.
///
/// Sampling a mixture's averaged distribution is the same as drawing a fresh
/// component for every measurement and then measuring that component.
pub fn sample_batch(
    source: &StateMixture,
    axes: &MeasurementAxes,
    rounds: usize,
    seed: u64,
) -> Result<MeasurementBatch> {
    let sampler = PairSampler::new(source, axes)?;
    Ok(sampler.draw(&mut trial_rng(seed, 0), rounds))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailStatistic {
    /// Mean of the per-round `Gamma_{c,i}`.
    GammaC(TangentPoint),
    /// Sample-variance estimator of `Gamma`.
    GammaTilde,
    /// Four-measurement block estimator of `Gamma`.
    GammaPrime,
}

impl TailStatistic {
    fn evaluate(&self, batch: &MeasurementBatch) -> Result<f64> {
        match self {
            Self::GammaC(c) => gamma_c_observed(batch, *c),
            Self::GammaTilde => gamma_tilde(batch),
            Self::GammaPrime => gamma_prime_blocks(batch),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailQuery {
    pub statistic: TailStatistic,
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailConfig {
    pub trials: u64,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Reject states whose exact moments violate the null hypothesis.
    pub null_check: bool,
}

impl TailConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        Self {
            trials,
            seed,
            workers: None,
            null_check: true,
        }
    }
}

/// Empirical frequency with a 99% two-sided confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEstimate {
    pub hits: u64,
    pub trials: u64,
    pub frequency: f64,
    pub lower: f64,
    pub upper: f64,
    /// Largest distance from `frequency` to an interval end.
    pub half_width: f64,
}

/// 99% interval for a binomial proportion: normal approximation, or exact
/// Clopper-Pearson when there are fewer than ten hits.
pub fn binomial_interval(hits: u64, trials: u64) -> TailEstimate {
    assert!(trials > 0 && hits <= trials);
    let n = trials as f64;
    let f = hits as f64 / n;
    let (lower, upper) = if hits < EXACT_INTERVAL_BELOW {
        clopper_pearson(hits, trials, 0.01)
    } else {
        let h = Z_99 * (f * (1.0 - f) / n).sqrt();
        ((f - h).max(0.0), (f + h).min(1.0))
    };
    TailEstimate {
        hits,
        trials,
        frequency: f,
        lower,
        upper,
        half_width: (upper - f).max(f - lower),
    }
}

/// Exact two-sided interval at level `1 - alpha`.
pub fn clopper_pearson(hits: u64, trials: u64, alpha: f64) -> (f64, f64) {
    let (x, n) = (hits as f64, trials as f64);
    let lower = if hits == 0 {
        0.0
    } else if hits == trials {
        (alpha / 2.0).powf(1.0 / n)
    } else {
        Beta::new(x, n - x + 1.0)
            .expect("positive shape parameters")
            .inverse_cdf(alpha / 2.0)
    };
    let upper = if hits == trials {
        1.0
    } else if hits == 0 {
        1.0 - (alpha / 2.0).powf(1.0 / n)
    } else {
        Beta::new(x + 1.0, n - x)
            .expect("positive shape parameters")
            .inverse_cdf(1.0 - alpha / 2.0)
    };
    (lower, upper)
}

fn check_null(stat: &TailStatistic, exact: &ExactMoments) -> Result<()> {
    let value = match stat {
        TailStatistic::GammaC(c) => exact.gamma_c(*c),
        TailStatistic::GammaTilde | TailStatistic::GammaPrime => exact.gamma(),
    };
    if value < -NULL_TOLERANCE {
        return Err(Error::NullViolation(value));
    }
    Ok(())
}

/// Frequencies of `{statistic <= threshold}` over `cfg.trials` simulated
/// experiments of `M` measurements (`M/2` rounds) each. All queries share
/// the same simulated data. Output is indexed `[query][threshold]`.
pub fn empirical_tails(
    source: &StateMixture,
    axes: &MeasurementAxes,
    m: u64,
    queries: &[TailQuery],
    cfg: &TailConfig,
) -> Result<Vec<Vec<TailEstimate>>> {
    if m < 2 || !m.is_multiple_of(2) {
        return Err(Error::Domain(format!("M must be even and at least 2, got {m}")));
    }
    if cfg.trials == 0 {
        return Err(Error::Domain("need at least one trial".into()));
    }
    for q in queries {
        if q.statistic == TailStatistic::GammaPrime && !m.is_multiple_of(4) {
            return Err(Error::Blocking(m));
        }
        if q.statistic == TailStatistic::GammaTilde && m < 4 {
            return Err(Error::TooFewSamples { needed: 2, got: (m / 2) as usize });
        }
    }
    if cfg.null_check {
        let exact = ExactMoments::of(source, axes)?;
        for q in queries {
            check_null(&q.statistic, &exact)?;
        }
    }
    let sampler = PairSampler::new(source, axes)?;
    let pairs = (m / 2) as usize;
    let offsets: Vec<usize> = queries
        .iter()
        .scan(0, |acc, q| {
            let start = *acc;
            *acc += q.thresholds.len();
            Some(start)
        })
        .collect();
    let width: usize = queries.iter().map(|q| q.thresholds.len()).sum();

    let run = || -> Result<Vec<u64>> {
        (0..cfg.trials)
            .into_par_iter()
            .try_fold(
                || vec![0u64; width],
                |mut acc, t| {
                    let batch = sampler.draw(&mut trial_rng(cfg.seed, t), pairs);
                    for (q, &off) in queries.iter().zip(&offsets) {
                        let value = q.statistic.evaluate(&batch)?;
                        for (j, &th) in q.thresholds.iter().enumerate() {
                            if value <= th {
                                acc[off + j] += 1;
                            }
                        }
                    }
                    Ok(acc)
                },
            )
            .try_reduce(
                || vec![0u64; width],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    Ok(a)
                },
            )
    };
    let hits = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::Domain(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };

    Ok(queries
        .iter()
        .zip(&offsets)
        .map(|(q, &off)| {
            (0..q.thresholds.len())
                .map(|j| binomial_interval(hits[off + j], cfg.trials))
                .collect()
        })
        .collect())
}

/// Frequency of `{mean Gamma_{c,i} <= gamma_c}` for a null state.
pub fn empirical_tail(
    source: &StateMixture,
    axes: &MeasurementAxes,
    c: TangentPoint,
    gamma_c: f64,
    m: u64,
    trials: u64,
    seed: u64,
) -> Result<TailEstimate> {
    let query = TailQuery {
        statistic: TailStatistic::GammaC(c),
        thresholds: vec![gamma_c],
    };
    let out = empirical_tails(source, axes, m, &[query], &TailConfig::new(trials, seed))?;
    Ok(out[0][0])
}
