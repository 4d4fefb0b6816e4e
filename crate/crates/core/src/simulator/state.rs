use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::spin::{check_axis, check_size, Axis, SpinOperators, DEFAULT_N_MAX};
use crate::error::{Error, Result};

const NORM_TOLERANCE: f64 = 1e-12;

/// Pure state of the symmetric sector, amplitudes indexed by `k = m + N/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricState {
    pub n_spins: u32,
    pub amplitudes: Vec<Complex64>,
}

impl SymmetricState {
    pub fn new(n_spins: u32, amplitudes: Vec<Complex64>) -> Result<Self> {
        let s = Self { n_spins, amplitudes };
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<()> {
        if self.amplitudes.len() != self.n_spins as usize + 1 {
            return Err(Error::Validation(format!(
                "expected {} amplitudes, got {}",
                self.n_spins + 1,
                self.amplitudes.len()
            )));
        }
        let norm = self.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Validation(format!("state norm^2 is {norm}")));
        }
        Ok(())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub(crate) fn vector(&self) -> DVector<Complex64> {
        DVector::from_column_slice(&self.amplitudes)
    }

    /// `<psi| op |psi>`.
    pub fn expectation(&self, op: &DMatrix<Complex64>) -> Complex64 {
        let v = self.vector();
        v.dotc(&(op * &v))
    }
}

/// All `N` spins polarized along `axis`.
pub fn css_state(n_spins: u32, axis: Axis) -> Result<SymmetricState> {
    check_size(n_spins, u32::MAX)?;
    check_axis(axis)?;
    let theta = axis[2].clamp(-1.0, 1.0).acos();
    let phi = axis[1].atan2(axis[0]);
    let up = (theta / 2.0).cos();
    let down = Complex64::from_polar((theta / 2.0).sin(), phi);
    let n = n_spins as usize;
    let mut binom = 1.0f64;
    let mut amplitudes = Vec::with_capacity(n + 1);
    for k in 0..=n {
        if k > 0 {
            binom = binom * (n - k + 1) as f64 / k as f64;
        }
        amplitudes.push(down.powi((n - k) as i32) * (binom.sqrt() * up.powi(k as i32)));
    }
    SymmetricState::new(n_spins, amplitudes)
}

/// Applies `exp(-i theta J_z^2)`.
pub fn one_axis_twist(state: &SymmetricState, theta: f64) -> SymmetricState {
    let j = state.n_spins as f64 / 2.0;
    let amplitudes = state
        .amplitudes
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let m = k as f64 - j;
            a * Complex64::from_polar(1.0, -theta * m * m)
        })
        .collect();
    SymmetricState {
        n_spins: state.n_spins,
        amplitudes,
    }
}

/// Convex combination of pure symmetric states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMixture {
    pub components: Vec<(f64, SymmetricState)>,
}

impl StateMixture {
    pub fn new(components: Vec<(f64, SymmetricState)>) -> Result<Self> {
        let m = Self { components };
        m.check()?;
        Ok(m)
    }

    pub fn check(&self) -> Result<()> {
        let first = self
            .components
            .first()
            .ok_or_else(|| Error::Validation("mixture has no components".into()))?;
        let n = first.1.n_spins;
        let mut total = 0.0;
        for (w, s) in &self.components {
            if !(0.0..=1.0).contains(w) {
                return Err(Error::Validation(format!("weight {w} outside [0, 1]")));
            }
            if s.n_spins != n {
                return Err(Error::Validation("components differ in spin number".into()));
            }
            s.check()?;
            total += w;
        }
        if (total - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Validation(format!("weights sum to {total}")));
        }
        Ok(())
    }

    pub fn n_spins(&self) -> u32 {
        self.components[0].1.n_spins
    }

    /// `Tr(rho op)`.
    pub fn expectation(&self, op: &DMatrix<Complex64>) -> Complex64 {
        self.components
            .iter()
            .map(|(w, s)| s.expectation(op) * *w)
            .sum()
    }
}

impl From<SymmetricState> for StateMixture {
    fn from(s: SymmetricState) -> Self {
        Self {
            components: vec![(1.0, s)],
        }
    }
}

/// The non-squeezed mixture `r |chi><chi| + (1-r)/2 (|up><up| + |down><down|)`,
/// with the polarized states along `+n_perp` and `-n_perp`.
pub fn rho_mixture(chi: &SymmetricState, r: f64, n_perp: Axis) -> Result<StateMixture> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Domain(format!("weight r={r} outside [0, 1]")));
    }
    let n = chi.n_spins;
    let down_axis = [-n_perp[0], -n_perp[1], -n_perp[2]];
    StateMixture::new(vec![
        (r, chi.clone()),
        (0.5 * (1.0 - r), css_state(n, n_perp)?),
        (0.5 * (1.0 - r), css_state(n, down_axis)?),
    ])
}

/// A one-axis-twisted state with its mean-spin axis and the perpendicular
/// axis of smallest variance.
#[derive(Debug, Clone)]
pub struct SqueezedPreparation {
    pub state: SymmetricState,
    pub mean_axis: Axis,
    pub squeeze_axis: Axis,
}

fn normalized(v: [f64; 3]) -> Axis {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn cross(a: Axis, b: Axis) -> Axis {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Mean spin direction of a state and, within the plane orthogonal to it,
/// the direction minimizing `Var(n_perp . J)`.
pub fn principal_axes(state: &SymmetricState) -> Result<(Axis, Axis)> {
    let ops = SpinOperators::with_max(state.n_spins, state.n_spins.max(DEFAULT_N_MAX))?;
    let mean = [
        state.expectation(&ops.jx).re,
        state.expectation(&ops.jy).re,
        state.expectation(&ops.jz).re,
    ];
    if mean.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-9 {
        return Err(Error::Domain("state has no mean spin direction".into()));
    }
    let n = normalized(mean);
    let helper = if n[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
    let u = normalized(cross(n, helper));
    let v = cross(n, u);
    let ju = ops.along(u);
    let jv = ops.along(v);
    let mu = state.expectation(&ju).re;
    let mv = state.expectation(&jv).re;
    let cuu = state.expectation(&(&ju * &ju)).re - mu * mu;
    let cvv = state.expectation(&(&jv * &jv)).re - mv * mv;
    let cuv = 0.5 * state.expectation(&(&ju * &jv + &jv * &ju)).re - mu * mv;
    let eig = Matrix2::new(cuu, cuv, cuv, cvv).symmetric_eigen();
    let i = if eig.eigenvalues[0] <= eig.eigenvalues[1] { 0 } else { 1 };
    let (a, b) = (eig.eigenvectors[(0, i)], eig.eigenvectors[(1, i)]);
    let perp = normalized([
        a * u[0] + b * v[0],
        a * u[1] + b * v[1],
        a * u[2] + b * v[2],
    ]);
    Ok((n, perp))
}

/// Coherent state along `+x` twisted by `exp(-i theta J_z^2)`.
pub fn twisted_squeezed_state(n_spins: u32, theta: f64) -> Result<SqueezedPreparation> {
    let css = css_state(n_spins, [1.0, 0.0, 0.0])?;
    let state = one_axis_twist(&css, theta);
    let (mean_axis, squeeze_axis) = principal_axes(&state)?;
    Ok(SqueezedPreparation {
        state,
        mean_axis,
        squeeze_axis,
    })
}
