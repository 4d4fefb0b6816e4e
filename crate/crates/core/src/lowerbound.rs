//! Lower bound on the p-value from an explicit non-squeezed state.
//!
//! The state mixes a squeezed pure state `chi` (weight `r`) with the two
//! fully polarized states along `+n_perp` and `-n_perp` (weight `(1-r)/2`
//! each). Its Wineland parameter stays `>= 1` for every `r <= r_max`, yet with
//! probability `r^M` all `M` measurements come from `chi` and look exactly
//! like squeezed data. Any test's p-value is therefore at least `r_max^M`.

use crate::error::{Error, Result};

/// Mean along `n` and variance along `n_perp` of the mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureMoments {
    pub q_par_mean: f64,
    pub var_perp: f64,
}

/// Moments of the mixture at weight `r`, given `<Q_n>` and `<Q_perp^2>` of
/// `chi` (which has `<Q_perp> = 0`). The polarized pair contributes
/// `<Q_perp^2> = 1` and nothing along `n`.
pub fn rho_moments(r: f64, chi_q_par: f64, chi_q_perp_sq: f64) -> MixtureMoments {
    rho_moments_weighted(r, 1.0 - r, chi_q_par, chi_q_perp_sq)
}

/// [`rho_moments`] with the pair weight `1 - r` passed separately, for `r`
/// so close to 1 that `1 - r` would lose digits.
pub fn rho_moments_weighted(r: f64, pair_weight: f64, chi_q_par: f64, chi_q_perp_sq: f64) -> MixtureMoments {
    MixtureMoments {
        q_par_mean: r * chi_q_par,
        var_perp: r * chi_q_perp_sq + pair_weight,
    }
}

/// `<Q_perp^2>` of `chi` implied by its Wineland parameter and `<Q_n>^2`.
pub fn chi_q_perp_sq(xi2_chi: f64, q_par_sq_chi: f64, n_spins: u32) -> f64 {
    xi2_chi * q_par_sq_chi / n_spins as f64
}

/// Largest weight of `chi` that keeps the mixture non-squeezed:
/// the positive root of `r^2 + (N/q^2 - xi2) r - N/q^2 = 0`.
pub fn r_max(xi2_chi: f64, q_par_sq_chi: f64, n_spins: u32) -> Result<f64> {
    if !(q_par_sq_chi > 0.0) {
        return Err(Error::Division("squared mean spin length of chi is zero"));
    }
    let ratio = n_spins as f64 / q_par_sq_chi;
    let kappa = xi2_chi - ratio;
    let disc = (kappa * kappa + 4.0 * ratio).sqrt();
    // For kappa < 0 the textbook form cancels; use the conjugate root.
    Ok(if kappa < 0.0 {
        2.0 * ratio / (disc - kappa)
    } else {
        0.5 * (kappa + disc)
    })
}

/// `1 - r_max`, the smaller root of `s^2 + (kappa - 2) s + 1 - xi2 = 0`,
/// computed without cancellation. Negative when `xi2 > 1`.
pub fn pair_weight(xi2_chi: f64, q_par_sq_chi: f64, n_spins: u32) -> Result<f64> {
    if !(q_par_sq_chi > 0.0) {
        return Err(Error::Division("squared mean spin length of chi is zero"));
    }
    let ratio = n_spins as f64 / q_par_sq_chi;
    let kappa = xi2_chi - ratio;
    let disc = (kappa * kappa + 4.0 * ratio).sqrt();
    Ok(2.0 * (1.0 - xi2_chi) / (2.0 - kappa + disc))
}

/// Smallest `r_max` over all `chi`, reached at `xi2 = 0`, `<Q_n>^2 = 1`.
pub fn r_max_floor(n_spins: u32) -> f64 {
    let n = n_spins as f64;
    // (sqrt(N^2 + 4N) - N)/2 without cancellation
    2.0 / (1.0 + (1.0 + 4.0 / n).sqrt())
}

/// `r^M`, evaluated as `exp(M ln r)`.
pub fn p_star(r: f64, m: u64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    (m as f64 * r.ln()).exp()
}

/// Smallest `M` with `r_max^M <= p_target`.
pub fn min_m_lower(p_target: f64, r_max: f64) -> Result<u64> {
    if !(p_target > 0.0 && p_target < 1.0) {
        return Err(Error::Domain(format!("p_target must lie in (0, 1), got {p_target}")));
    }
    if !(r_max > 0.0 && r_max < 1.0) {
        return Err(Error::Domain(format!(
            "r_max = {r_max}: no finite number of measurements excludes this state"
        )));
    }
    Ok(min_m_for_ln_r(p_target.ln(), r_max.ln()))
}

fn min_m_for_ln_r(ln_p: f64, ln_r: f64) -> u64 {
    let mut m = (ln_p / ln_r).ceil().max(1.0) as u64;
    while m as f64 * ln_r > ln_p {
        m += 1;
    }
    while m > 1 && (m - 1) as f64 * ln_r <= ln_p {
        m -= 1;
    }
    m
}

/// The mixture built from an observed `(xi2, <Q_n>^2)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBoundModel {
    pub n_spins: u32,
    pub xi2_chi: f64,
    pub q_par_sq_chi: f64,
    pub r_max: f64,
    /// `1 - r_max`, kept separately for accuracy when `r_max` is near 1.
    pub pair_weight: f64,
    pub kappa: f64,
}

impl LowerBoundModel {
    pub fn new(xi2_chi: f64, q_par_sq_chi: f64, n_spins: u32) -> Result<Self> {
        if n_spins == 0 {
            return Err(Error::Domain("n_spins must be positive".into()));
        }
        if !(xi2_chi >= 0.0) {
            return Err(Error::Domain(format!("xi2 must be nonnegative, got {xi2_chi}")));
        }
        if !(q_par_sq_chi > 0.0 && q_par_sq_chi <= 1.0) {
            return Err(Error::Domain(format!(
                "<Q_n>^2 must lie in (0, 1], got {q_par_sq_chi}"
            )));
        }
        Ok(Self {
            n_spins,
            xi2_chi,
            q_par_sq_chi,
            r_max: r_max(xi2_chi, q_par_sq_chi, n_spins)?,
            pair_weight: pair_weight(xi2_chi, q_par_sq_chi, n_spins)?,
            kappa: xi2_chi - n_spins as f64 / q_par_sq_chi,
        })
    }

    /// Wineland parameter of the mixture at weight `r`.
    pub fn xi2_at(&self, r: f64) -> f64 {
        let q = self.q_par_sq_chi.sqrt();
        let m = rho_moments(r, q, chi_q_perp_sq(self.xi2_chi, self.q_par_sq_chi, self.n_spins));
        self.n_spins as f64 * m.var_perp / (m.q_par_mean * m.q_par_mean)
    }

    /// Moments of the mixture at `r_max`.
    pub fn boundary_moments(&self) -> MixtureMoments {
        rho_moments_weighted(
            self.r_max,
            self.pair_weight,
            self.q_par_sq_chi.sqrt(),
            chi_q_perp_sq(self.xi2_chi, self.q_par_sq_chi, self.n_spins),
        )
    }

    fn ln_r_max(&self) -> f64 {
        (-self.pair_weight).ln_1p()
    }

    pub fn p_star(&self, m: u64) -> f64 {
        if m == 0 {
            return 1.0;
        }
        (m as f64 * self.ln_r_max()).exp()
    }

    pub fn min_m(&self, p_target: f64) -> Result<u64> {
        // validates p_target and the range of r_max
        min_m_lower(p_target, self.r_max)?;
        if self.pair_weight <= 0.0 {
            return Err(Error::Domain(format!(
                "r_max = {}: no finite number of measurements excludes this state",
                self.r_max
            )));
        }
        Ok(min_m_for_ln_r(p_target.ln(), self.ln_r_max()))
    }
}
