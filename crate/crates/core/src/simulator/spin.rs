use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const DEFAULT_N_MAX: u32 = 64;

pub type Axis = [f64; 3];

pub(crate) fn check_size(n: u32, n_max: u32) -> Result<()> {
    if n == 0 || n > n_max {
        return Err(Error::Size { n, max: n_max });
    }
    Ok(())
}

pub(crate) fn check_axis(axis: Axis) -> Result<()> {
    let norm = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !((norm - 1.0).abs() <= 1e-9) {
        return Err(Error::Domain(format!("axis {axis:?} is not a unit vector")));
    }
    Ok(())
}

/// Collective spin operators on the symmetric sector `|J = N/2, m>`, with
/// basis index `k = m + N/2` (number of spins up along z).
#[derive(Debug, Clone)]
pub struct SpinOperators {
    pub n_spins: u32,
    pub jx: DMatrix<Complex64>,
    pub jy: DMatrix<Complex64>,
    pub jz: DMatrix<Complex64>,
}

impl SpinOperators {
    pub fn new(n_spins: u32) -> Result<Self> {
        Self::with_max(n_spins, DEFAULT_N_MAX)
    }

    pub fn with_max(n_spins: u32, n_max: u32) -> Result<Self> {
        check_size(n_spins, n_max)?;
        let dim = n_spins as usize + 1;
        let j = n_spins as f64 / 2.0;
        let mut jp = DMatrix::<Complex64>::zeros(dim, dim);
        let mut jz = DMatrix::<Complex64>::zeros(dim, dim);
        for k in 0..dim {
            let m = k as f64 - j;
            jz[(k, k)] = Complex64::new(m, 0.0);
            if k + 1 < dim {
                // <m+1| J+ |m> = sqrt(j(j+1) - m(m+1))
                jp[(k + 1, k)] = Complex64::new((j * (j + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
            }
        }
        let jm = jp.adjoint();
        let half = Complex64::new(0.5, 0.0);
        let jx = (&jp + &jm) * half;
        let jy = (&jp - &jm) * Complex64::new(0.0, -0.5);
        Ok(Self { n_spins, jx, jy, jz })
    }

    pub fn dim(&self) -> usize {
        self.n_spins as usize + 1
    }

    /// `n . J` for a unit vector `n`.
    pub fn along(&self, axis: Axis) -> DMatrix<Complex64> {
        &self.jx * Complex64::new(axis[0], 0.0)
            + &self.jy * Complex64::new(axis[1], 0.0)
            + &self.jz * Complex64::new(axis[2], 0.0)
    }
}
