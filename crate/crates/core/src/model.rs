//! Domain types shared across the crate, their range checks, and the raw-data
//! CSV format (`round,q_perp,q_par`).
//!
//! Outcomes are normalized collective-spin values `q = 2J/N` and therefore lie
//! in `[-1, 1]`. Pairing of the two axes is by position: the i-th perpendicular
//! outcome belongs to the same round as the i-th parallel outcome.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed when checking that an outcome sits on the `{-1, -1+2/N, ..., 1}` lattice.
pub const LATTICE_TOLERANCE: f64 = 1e-9;

/// Slack on the Bhatia-Davis consistency check of [`SummaryStats`].
pub const BHATIA_DAVIS_SLACK: f64 = 1e-9;

/// One experimental round: an outcome along `n_perp` and one along `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub q_perp: f64,
    pub q_par: f64,
}

impl Round {
    pub fn new(q_perp: f64, q_par: f64) -> Self {
        Self { q_perp, q_par }
    }
}

/// Paired outcomes of `M/2` rounds on an `N`-spin system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementBatch {
    pub n_spins: u32,
    pub rounds: Vec<Round>,
}

impl MeasurementBatch {
    pub fn new(n_spins: u32, rounds: Vec<Round>) -> Self {
        Self { n_spins, rounds }
    }

    /// Builds a batch from two per-axis outcome lists, pairing them by index.
    pub fn from_axes(n_spins: u32, perp: &[f64], par: &[f64]) -> Result<Self> {
        if perp.len() != par.len() {
            return Err(Error::Pairing {
                perp: perp.len(),
                par: par.len(),
            });
        }
        let rounds = perp
            .iter()
            .zip(par)
            .map(|(&q_perp, &q_par)| Round { q_perp, q_par })
            .collect();
        Ok(Self { n_spins, rounds })
    }

    /// Number of rounds, `M/2`.
    pub fn pairs(&self) -> usize {
        self.rounds.len()
    }

    /// Total number of measurements `M`, two per round.
    pub fn total_count(&self) -> u64 {
        2 * self.rounds.len() as u64
    }

    pub fn perp(&self) -> impl Iterator<Item = f64> + '_ {
        self.rounds.iter().map(|r| r.q_perp)
    }

    pub fn par(&self) -> impl Iterator<Item = f64> + '_ {
        self.rounds.iter().map(|r| r.q_par)
    }

    pub fn validate(self, lattice_strict: bool) -> Result<Self> {
        self.check(lattice_strict)?;
        Ok(self)
    }

    pub fn check(&self, lattice_strict: bool) -> Result<()> {
        if self.n_spins == 0 {
            return Err(Error::Validation("n_spins must be positive".into()));
        }
        for (i, r) in self.rounds.iter().enumerate() {
            for v in [r.q_perp, r.q_par] {
                if !(-1.0..=1.0).contains(&v) {
                    return Err(Error::Range { round: i, value: v });
                }
                if lattice_strict && !on_lattice(v, self.n_spins) {
                    return Err(Error::Lattice {
                        round: i,
                        value: v,
                        n_spins: self.n_spins,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Whether `value` equals `-1 + 2k/N` for some integer `k` in `0..=N`.
pub fn on_lattice(value: f64, n_spins: u32) -> bool {
    let n = n_spins as f64;
    let k = ((value + 1.0) * n / 2.0).round();
    if !(0.0..=n).contains(&k) {
        return false;
    }
    (value - (-1.0 + 2.0 * k / n)).abs() <= LATTICE_TOLERANCE
}

/// Sample statistics of an experiment: variance and mean along `n_perp`,
/// mean along `n`, and the number of measurements per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryStats {
    pub n_spins: u32,
    pub s_perp: f64,
    pub mu_par: f64,
    #[serde(default)]
    pub mu_perp: f64,
    pub m_par: u64,
    pub m_perp: u64,
}

impl SummaryStats {
    /// Summary of a batch. The variance uses the `1/(M/2)` divisor, so the
    /// summary form of `gamma_c` reproduces the per-round mean exactly.
    pub fn from_batch(batch: &MeasurementBatch) -> Result<Self> {
        let l = batch.pairs();
        if l < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: l });
        }
        let lf = l as f64;
        let mu_perp = batch.perp().sum::<f64>() / lf;
        let mu_par = batch.par().sum::<f64>() / lf;
        let s_perp = batch.perp().map(|q| (q - mu_perp).powi(2)).sum::<f64>() / lf;
        Ok(Self {
            n_spins: batch.n_spins,
            s_perp,
            mu_par,
            mu_perp,
            m_par: l as u64,
            m_perp: l as u64,
        })
    }

    /// Total number of measurements over both axes.
    pub fn total_count(&self) -> u64 {
        self.m_par + self.m_perp
    }

    pub fn validate(self) -> Result<Self> {
        self.check()?;
        Ok(self)
    }

    pub fn check(&self) -> Result<()> {
        if self.n_spins == 0 {
            return Err(Error::Validation("n_spins must be positive".into()));
        }
        if !(self.s_perp >= 0.0) {
            return Err(Error::Validation(format!(
                "s_perp must be nonnegative, got {}",
                self.s_perp
            )));
        }
        for (name, mu) in [("mu_par", self.mu_par), ("mu_perp", self.mu_perp)] {
            if !(-1.0..=1.0).contains(&mu) {
                return Err(Error::Validation(format!("{name}={mu} outside [-1, 1]")));
            }
        }
        let cap = (1.0 - self.mu_perp) * (self.mu_perp + 1.0);
        if self.s_perp > cap + BHATIA_DAVIS_SLACK {
            return Err(Error::Validation(format!(
                "s_perp={} exceeds the Bhatia-Davis cap {cap} for mu_perp={}",
                self.s_perp, self.mu_perp
            )));
        }
        if self.m_par < 2 || self.m_perp < 2 {
            return Err(Error::Validation(format!(
                "need at least 2 measurements per axis, got m_par={} m_perp={}",
                self.m_par, self.m_perp
            )));
        }
        Ok(())
    }
}

/// Point `c = (alpha, beta)` of the tangent-plane family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentPoint {
    pub alpha: f64,
    pub beta: f64,
}

impl TangentPoint {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let c = Self { alpha, beta };
        c.check()?;
        Ok(c)
    }

    /// Clamps both coordinates into the square `[-1, 1]^2`.
    pub fn clamped(alpha: f64, beta: f64) -> Self {
        Self {
            alpha: alpha.clamp(-1.0, 1.0),
            beta: beta.clamp(-1.0, 1.0),
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.alpha) || !(-1.0..=1.0).contains(&self.beta) {
            return Err(Error::Domain(format!(
                "tangent point ({}, {}) outside [-1, 1]^2",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMethod {
    BernsteinGammaC,
    Mcdiarmid,
    BernsteinGammaPrime,
    LowerMixedState,
}

impl BoundMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::BernsteinGammaC => "bernstein_gamma_c",
            Self::Mcdiarmid => "mcdiarmid",
            Self::BernsteinGammaPrime => "bernstein_gamma_prime",
            Self::LowerMixedState => "lower_mixed_state",
        }
    }
}

/// A p-value bound together with the inputs that produced it.
///
/// `p_bound` is `exp(ln_p_bound)` rounded up to the smallest positive normal
/// float, so it stays a valid upper bound even where the exponential underflows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub method: BoundMethod,
    pub p_bound: f64,
    pub ln_p_bound: f64,
    pub gamma_value: f64,
    pub tangent: Option<TangentPoint>,
    pub m_used: u64,
}

impl BoundReport {
    pub fn new(
        method: BoundMethod,
        ln_p_bound: f64,
        gamma_value: f64,
        tangent: Option<TangentPoint>,
        m_used: u64,
    ) -> Result<Self> {
        if tangent.is_some() != (method == BoundMethod::BernsteinGammaC) {
            return Err(Error::Validation(format!(
                "tangent point must be present exactly for bernstein_gamma_c, method {}",
                method.as_str()
            )));
        }
        let ln_p_bound = ln_p_bound.min(0.0);
        Ok(Self {
            method,
            p_bound: p_from_ln(ln_p_bound),
            ln_p_bound,
            gamma_value,
            tangent,
            m_used,
        })
    }
}

/// `exp(ln_p)` clamped into `(0, 1]`. Underflow rounds up, never down.
pub fn p_from_ln(ln_p: f64) -> f64 {
    ln_p.min(0.0).exp().max(f64::MIN_POSITIVE)
}

/// One published experiment: system size, measurements performed, and the
/// number of measurements needed for a 5% upper bound on the p-value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentEntry {
    pub name: String,
    pub citation_key: String,
    pub n_spins: u32,
    pub m_reported: u64,
    #[serde(default)]
    pub summary: Option<SummaryStats>,
    #[serde(default)]
    pub m_required_mu0: Option<u64>,
    #[serde(default)]
    pub m_required_mu01: Option<u64>,
    /// Observed Wineland parameter, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi2_observed: Option<f64>,
    /// Observed squared mean spin length along `n`, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_par_sq_observed: Option<f64>,
}

impl ExperimentEntry {
    pub fn check(&self) -> Result<()> {
        if self.n_spins < 2 {
            return Err(Error::Validation(format!(
                "entry `{}`: n_spins must be at least 2, got {}",
                self.name, self.n_spins
            )));
        }
        if self.m_reported < 2 {
            return Err(Error::Validation(format!(
                "entry `{}`: m_reported must be at least 2, got {}",
                self.name, self.m_reported
            )));
        }
        if let Some(s) = &self.summary {
            if s.n_spins != self.n_spins {
                return Err(Error::Validation(format!(
                    "entry `{}`: summary n_spins {} differs from entry n_spins {}",
                    self.name, s.n_spins, self.n_spins
                )));
            }
            s.check()
                .map_err(|e| Error::Validation(format!("entry `{}`: {e}", self.name)))?;
        }
        if let Some(x) = self.xi2_observed {
            if !(x >= 0.0) {
                return Err(Error::Validation(format!(
                    "entry `{}`: xi2_observed must be nonnegative",
                    self.name
                )));
            }
        }
        if let Some(q) = self.q_par_sq_observed {
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::Validation(format!(
                    "entry `{}`: q_par_sq_observed must lie in (0, 1]",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    round: u64,
    q_perp: f64,
    q_par: f64,
}

pub const BATCH_CSV_HEADER: [&str; 3] = ["round", "q_perp", "q_par"];

/// Reads a raw-data CSV with header `round,q_perp,q_par`. Rows are paired in
/// file order; the `round` column is informational.
pub fn read_batch_csv<R: Read>(reader: R, n_spins: u32) -> Result<MeasurementBatch> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != BATCH_CSV_HEADER {
        return Err(Error::Parse(format!(
            "expected header `round,q_perp,q_par`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rounds = Vec::new();
    for row in rdr.deserialize::<CsvRow>() {
        let row = row.map_err(|e| Error::Parse(e.to_string()))?;
        rounds.push(Round::new(row.q_perp, row.q_par));
    }
    Ok(MeasurementBatch::new(n_spins, rounds))
}

/// Writes a batch in the raw-data CSV format, numbering rounds from 1.
pub fn write_batch_csv<W: Write>(writer: W, batch: &MeasurementBatch) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for (i, r) in batch.rounds.iter().enumerate() {
        wtr.serialize(CsvRow {
            round: i as u64 + 1,
            q_perp: r.q_perp,
            q_par: r.q_par,
        })
        .map_err(|e| Error::Parse(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}
