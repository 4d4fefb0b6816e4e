//! Analytic upper bounds on the p-value and their sample-size inverses.
//!
//! Every bound here has the form `p <= exp(M * rate)` with a rate that does not
//! depend on `M`, so each bound is evaluated in log-space and each inverse is a
//! closed form followed by an exact check at the returned `M` and one step below.
//!
//! * [`bernstein_tail`]: Bernstein tail for the mean of `l` independent
//!   variables in `[a, b]` with nonnegative mean, where the Bhatia-Davis
//!   inequality stands in for the unknown variance.
//! * [`bernstein_pvalue_gamma_c`]: that tail applied to the per-round terms
//!   `Gamma_{c,i}`, whose range is [`GammaCExtrema`]. [`optimize_tangent`]
//!   minimizes it over `c`.
//! * [`mcdiarmid_pvalue`]: bounded differences of the nonlinear estimator
//!   `gamma_tilde`; carries an `N^2` penalty.
//! * [`bernstein_prime_pvalue`]: Bernstein on the four-measurement block
//!   estimator, whose terms lie in `[-1, 2N + 1]`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{GammaCExtrema, GammaCSource, SummaryForm, SummaryGamma};
use crate::model::{p_from_ln, SummaryStats, TangentPoint};

/// Largest `M` the inverses will return.
const MAX_REQUIRED_M: f64 = 1e18;

/// Log of the Bernstein bound `exp(z^2 l / (2ba + 2(b-a)z/3))` without domain
/// checks on `a`. Valid whenever `a <= 0 < b` and `z < 0`.
fn bernstein_exponent(z: f64, l: f64, a: f64, b: f64) -> f64 {
    let denom = 2.0 * b * a + 2.0 * (b - a) * z / 3.0;
    (z * z * l / denom).min(0.0)
}

/// Log of [`bernstein_tail`].
pub fn ln_bernstein_tail(z: f64, l: u64, a: f64, b: f64) -> Result<f64> {
    if !(z < 0.0) {
        return Err(Error::Domain(format!("deviation z must be negative, got {z}")));
    }
    if !(a < 0.0) || !(b > 0.0) {
        return Err(Error::Domain(format!("need a < 0 < b, got a={a} b={b}")));
    }
    if l == 0 {
        return Err(Error::Domain("need at least one variable".into()));
    }
    Ok(bernstein_exponent(z, l as f64, a, b))
}

/// `P(Z <= z)` for the mean `Z` of `l` independent variables in `[a, b]` whose
/// mean is nonnegative.
pub fn bernstein_tail(z: f64, l: u64, a: f64, b: f64) -> Result<f64> {
    ln_bernstein_tail(z, l, a, b).map(p_from_ln)
}

pub fn gamma_c_extrema(n_spins: u32, c: TangentPoint) -> GammaCExtrema {
    GammaCExtrema::new(n_spins, c)
}

fn check_m_even(m: u64) -> Result<()> {
    if m < 2 || !m.is_multiple_of(2) {
        return Err(Error::Domain(format!("M must be even and at least 2, got {m}")));
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma < 0.0) {
        return Err(Error::Domain(format!(
            "the observed statistic must be negative, got {gamma}"
        )));
    }
    Ok(())
}

/// Per-measurement log rate of the `Gamma_c` bound: `ln p = M * rate`.
fn gamma_c_rate(gamma_c: f64, n_spins: u32, c: TangentPoint) -> f64 {
    let e = GammaCExtrema::new(n_spins, c);
    bernstein_exponent(gamma_c, 0.5, e.gamma0, e.gamma1)
}

/// Log of [`bernstein_pvalue_gamma_c`].
pub fn ln_bernstein_pvalue_gamma_c(gamma_c: f64, m: u64, n_spins: u32, c: TangentPoint) -> Result<f64> {
    check_gamma(gamma_c)?;
    check_m_even(m)?;
    c.check()?;
    let e = GammaCExtrema::new(n_spins, c);
    if e.gamma0 < 0.0 {
        ln_bernstein_tail(gamma_c, m / 2, e.gamma0, e.gamma1)
    } else {
        // beta = 0: every term is nonnegative and the event is impossible;
        // the expression is still a valid bound.
        Ok(bernstein_exponent(gamma_c, (m / 2) as f64, e.gamma0, e.gamma1))
    }
}

/// Upper bound on `P(gamma_c_observed <= gamma_c)` under `Gamma >= 0` (or the
/// weaker `Gamma_c >= 0`) from `M/2` rounds at tangent point `c`.
pub fn bernstein_pvalue_gamma_c(gamma_c: f64, m: u64, n_spins: u32, c: TangentPoint) -> Result<f64> {
    ln_bernstein_pvalue_gamma_c(gamma_c, m, n_spins, c).map(p_from_ln)
}

/// Grid and refinement parameters of the tangent-point search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentSearch {
    /// Points per axis of the uniform grid on `[-1, 1]`.
    pub grid: usize,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_iterations: usize,
}

impl Default for TangentSearch {
    fn default() -> Self {
        Self {
            grid: 101,
            initial_step: 0.02,
            min_step: 1e-6,
            max_iterations: 100_000,
        }
    }
}

impl TangentSearch {
    pub fn with_grid(grid: usize) -> Self {
        Self {
            grid,
            initial_step: 2.0 / (grid.max(2) - 1) as f64,
            ..Self::default()
        }
    }

    fn coordinate(&self, i: usize) -> f64 {
        if self.grid == 1 {
            return 0.0;
        }
        // integer numerator keeps the grid exactly symmetric about zero
        let g = (self.grid - 1) as f64;
        (2.0 * i as f64 - g) / g
    }
}

/// Tangent point minimizing the `Gamma_c` rate, with its observed `gamma_c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestTangent {
    pub c: TangentPoint,
    pub gamma_c: f64,
    /// `ln p = M * rate`.
    pub rate: f64,
    pub refinement_iterations: usize,
}

fn feasible_rate<S: GammaCSource + ?Sized>(source: &S, n_spins: u32, c: TangentPoint) -> Option<(f64, f64)> {
    let g = source.gamma_c(c);
    if !(g < 0.0) || !g.is_finite() {
        return None;
    }
    let r = gamma_c_rate(g, n_spins, c);
    r.is_finite().then_some((g, r))
}

/// Minimizes the rate of the `Gamma_c` bound over the square. The minimizer
/// does not depend on `M`.
pub fn best_tangent<S: GammaCSource + ?Sized>(
    source: &S,
    n_spins: u32,
    search: &TangentSearch,
) -> Result<BestTangent> {
    if search.grid == 0 {
        return Err(Error::Domain("grid resolution must be positive".into()));
    }
    let g = search.grid;
    let seed = (0..g * g)
        .into_par_iter()
        .filter_map(|k| {
            let c = TangentPoint {
                alpha: search.coordinate(k / g),
                beta: search.coordinate(k % g),
            };
            feasible_rate(source, n_spins, c).map(|(gamma, rate)| (rate, k, c, gamma))
        })
        .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));

    let hinted = source.hint().and_then(|c| {
        feasible_rate(source, n_spins, c).map(|(gamma, rate)| (rate, usize::MAX, c, gamma))
    });
    let start = match (seed, hinted) {
        (Some(s), Some(h)) => {
            if h.0 < s.0 {
                h
            } else {
                s
            }
        }
        (Some(s), None) => s,
        (None, Some(h)) => h,
        (None, None) => return Err(Error::Infeasible),
    };

    let (mut rate, _, mut c, mut gamma) = start;
    let mut step = search.initial_step;
    let mut iterations = 0;
    while step >= search.min_step && iterations < search.max_iterations {
        iterations += 1;
        let mut moved = false;
        for (da, db) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
            let cand = TangentPoint::clamped(c.alpha + da, c.beta + db);
            if let Some((g2, r2)) = feasible_rate(source, n_spins, cand) {
                if r2 < rate {
                    rate = r2;
                    c = cand;
                    gamma = g2;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    Ok(BestTangent {
        c,
        gamma_c: gamma,
        rate,
        refinement_iterations: iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizationResult {
    pub best_c: TangentPoint,
    pub p_bound: f64,
    pub ln_p_bound: f64,
    pub gamma_c_at_best: f64,
    pub grid_resolution: usize,
    pub refinement_iterations: usize,
}

/// Tightest `Gamma_c` bound over tangent points with `gamma_c(c) < 0`:
/// a uniform grid seeds a coordinate search with step halving.
pub fn optimize_tangent<S: GammaCSource + ?Sized>(
    source: &S,
    m: u64,
    n_spins: u32,
    search: &TangentSearch,
) -> Result<OptimizationResult> {
    check_m_even(m)?;
    let best = best_tangent(source, n_spins, search)?;
    let ln_p = ln_bernstein_pvalue_gamma_c(best.gamma_c, m, n_spins, best.c)?;
    Ok(OptimizationResult {
        best_c: best.c,
        p_bound: p_from_ln(ln_p),
        ln_p_bound: ln_p,
        gamma_c_at_best: best.gamma_c,
        grid_resolution: search.grid,
        refinement_iterations: best.refinement_iterations,
    })
}

fn check_p_target(p_target: f64) -> Result<()> {
    if !(p_target > 0.0 && p_target <= 1.0) {
        return Err(Error::Domain(format!("p_target must lie in (0, 1], got {p_target}")));
    }
    Ok(())
}

/// Smallest positive multiple of `step` with `M * rate <= ln p_target`.
fn smallest_sufficient_m(p_target: f64, rate: f64, step: u64) -> Result<u64> {
    check_p_target(p_target)?;
    let ln_p = p_target.ln();
    if ln_p == 0.0 {
        return Ok(step);
    }
    if !(rate < 0.0) {
        return Err(Error::Domain(format!("bound does not decay with M (rate {rate})")));
    }
    let raw = ln_p / rate;
    if !(raw <= MAX_REQUIRED_M) {
        return Err(Error::Domain(format!("required M {raw:e} is out of range")));
    }
    let s = step as f64;
    let mut m = ((raw / s).ceil() as u64).max(1) * step;
    let ok = |m: u64| m as f64 * rate <= ln_p;
    while !ok(m) {
        m += step;
    }
    while m > step && ok(m - step) {
        m -= step;
    }
    Ok(m)
}

/// Required `M` (even) for the `Gamma_c` bound at a fixed tangent point.
pub fn required_m_at_tangent(p_target: f64, gamma_c: f64, n_spins: u32, c: TangentPoint) -> Result<u64> {
    check_gamma(gamma_c)?;
    c.check()?;
    smallest_sufficient_m(p_target, gamma_c_rate(gamma_c, n_spins, c), 2)
}

/// Smallest even `M` whose optimized `Gamma_c` bound is at most `p_target`.
pub fn required_m_bernstein_c<S: GammaCSource + ?Sized>(
    p_target: f64,
    source: &S,
    n_spins: u32,
    search: &TangentSearch,
) -> Result<u64> {
    check_p_target(p_target)?;
    let best = best_tangent(source, n_spins, search)?;
    smallest_sufficient_m(p_target, best.rate, 2)
}

fn mcdiarmid_ln(gamma: f64, n_spins: u32, m_par: f64, m_perp: f64) -> f64 {
    let n = n_spins as f64;
    -gamma * gamma / (8.0 * n * n / m_par + 8.0 / m_perp)
}

/// Log of [`mcdiarmid_pvalue`].
pub fn ln_mcdiarmid_pvalue(gamma: f64, n_spins: u32, m_par: u64, m_perp: u64) -> Result<f64> {
    check_gamma(gamma)?;
    if m_par == 0 || m_perp == 0 {
        return Err(Error::Domain("measurement counts must be positive".into()));
    }
    Ok(mcdiarmid_ln(gamma, n_spins, m_par as f64, m_perp as f64))
}

/// McDiarmid bound for the sample-variance estimator `gamma_tilde`, from the
/// bounded differences `4N/M_n` and `4/M_perp`.
pub fn mcdiarmid_pvalue(gamma: f64, n_spins: u32, m_par: u64, m_perp: u64) -> Result<f64> {
    ln_mcdiarmid_pvalue(gamma, n_spins, m_par, m_perp).map(p_from_ln)
}

/// Required even `M` for the McDiarmid bound with `M/2` measurements per axis:
/// `16 (N^2 + 1) ln(1/p) / gamma^2`, rounded up.
pub fn required_m_mcdiarmid(p_target: f64, gamma: f64, n_spins: u32) -> Result<u64> {
    check_gamma(gamma)?;
    let rate = mcdiarmid_ln(gamma, n_spins, 0.5, 0.5);
    smallest_sufficient_m(p_target, rate, 2)
}

fn check_m_blocks(m: u64) -> Result<()> {
    if m == 0 || !m.is_multiple_of(4) {
        return Err(Error::Blocking(m));
    }
    Ok(())
}

/// Log of [`bernstein_prime_pvalue`].
pub fn ln_bernstein_prime_pvalue(gamma: f64, m: u64, n_spins: u32) -> Result<f64> {
    check_gamma(gamma)?;
    check_m_blocks(m)?;
    ln_bernstein_tail(gamma, m / 4, -1.0, 2.0 * n_spins as f64 + 1.0)
}

/// Bernstein bound for the block estimator `gamma_prime_blocks`:
/// `exp(-gamma^2 (M/8) / (2N + 1 - 2 gamma (N + 1)/3))`.
pub fn bernstein_prime_pvalue(gamma: f64, m: u64, n_spins: u32) -> Result<f64> {
    ln_bernstein_prime_pvalue(gamma, m, n_spins).map(p_from_ln)
}

/// Required `M` (multiple of 4) for the block-estimator bound.
pub fn required_m_bernstein_prime(p_target: f64, gamma: f64, n_spins: u32) -> Result<u64> {
    check_gamma(gamma)?;
    let rate = bernstein_exponent(gamma, 0.25, -1.0, 2.0 * n_spins as f64 + 1.0);
    smallest_sufficient_m(p_target, rate, 4)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub mu_perp: f64,
    /// `None` when no tangent point gives a negative `gamma_c`.
    pub m_required: Option<u64>,
}

/// Required `M` for the full summary form as `mu_perp` ranges over
/// `steps` evenly spaced points of `[lo, hi]`.
pub fn mu_perp_sweep(
    stats: &SummaryStats,
    range: (f64, f64),
    steps: usize,
    p_target: f64,
    search: &TangentSearch,
) -> Result<Vec<SweepPoint>> {
    stats.check()?;
    if steps < 2 || !(range.0 <= range.1) {
        return Err(Error::Domain("sweep needs at least two points and lo <= hi".into()));
    }
    let mid = 0.5 * (range.0 + range.1);
    let half = 0.5 * (range.1 - range.0);
    let denom = (steps - 1) as f64;
    (0..steps)
        .map(|k| {
            let mu_perp = mid + half * (2.0 * k as f64 - denom) / denom;
            let source = SummaryGamma::new(SummaryStats { mu_perp, ..*stats }, SummaryForm::Full);
            let m_required = match required_m_bernstein_c(p_target, &source, stats.n_spins, search) {
                Ok(m) => Some(m),
                Err(Error::Infeasible) => None,
                Err(e) => return Err(e),
            };
            Ok(SweepPoint { mu_perp, m_required })
        })
        .collect()
}
