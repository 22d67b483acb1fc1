//! Squeezed-vacuum probe as a quadrature covariance matrix, propagated
//! through passive networks by orthogonal-symplectic congruence.
//!
//! Ordering is `(x₁…x_M, p₁…p_M)` and the vacuum variance is ½.

use crate::error::{Error, Result};
use crate::linalg::RMatrix;
use crate::network::{channel_index, Unitary};
use crate::scalar::Real;

/// Single-mode squeezed vacuum injected into one channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSpec<T> {
    squeezing: T,
    channel: usize,
}

impl<T: Real> ProbeSpec<T> {
    pub fn new(squeezing: T, channel: usize) -> Result<Self> {
        if !(squeezing >= T::zero()) || !squeezing.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "squeezing must be finite and non-negative, got {squeezing}"
            )));
        }
        if channel == 0 {
            return Err(Error::ChannelIndex { index: 0, dim: 0 });
        }
        Ok(Self { squeezing, channel })
    }

    /// Probe with `sinh²r = N`, i.e. `r = asinh(√N)`.
    pub fn from_mean_photons(n: T, channel: usize) -> Result<Self> {
        if !(n >= T::zero()) {
            return Err(Error::NonPositivePhotonNumber(n.to_f64().unwrap_or(f64::NAN)));
        }
        Self::new(n.sqrt().asinh(), channel)
    }

    pub fn squeezing(&self) -> T {
        self.squeezing
    }

    pub fn channel(&self) -> usize {
        self.channel
    }

    pub fn mean_photons(&self) -> T {
        let s = self.squeezing.sinh();
        s * s
    }
}

/// 2M×2M real covariance of a centred Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix<T> {
    modes: usize,
    matrix: RMatrix<T>,
}

impl<T: Real> CovarianceMatrix<T> {
    /// Accepts a symmetric positive-definite `2M×2M` matrix.
    pub fn new(matrix: RMatrix<T>) -> Result<Self> {
        if matrix.rows() != matrix.cols() || !matrix.rows().is_multiple_of(2) || matrix.rows() == 0 {
            return Err(Error::InvalidArgument(format!(
                "covariance must be 2M×2M, got {}×{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let scale = matrix.max_abs().max(T::one());
        if matrix.asymmetry() > T::unitarity_tol() * scale {
            return Err(Error::InvalidArgument("covariance is not symmetric".into()));
        }
        let cov = Self {
            modes: matrix.rows() / 2,
            matrix,
        };
        if !(cov.min_eigenvalue() > T::unitarity_tol()) {
            return Err(Error::InvalidArgument("covariance is not positive definite".into()));
        }
        Ok(cov)
    }

    pub fn vacuum(modes: usize) -> Self {
        Self {
            modes,
            matrix: RMatrix::identity(2 * modes).scale(T::lit(0.5)),
        }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn matrix(&self) -> &RMatrix<T> {
        &self.matrix
    }

    pub fn min_eigenvalue(&self) -> T {
        self.matrix.symmetric_eigenvalues()[0]
    }

    pub fn determinant(&self) -> T {
        self.matrix
            .symmetric_eigenvalues()
            .into_iter()
            .fold(T::one(), |a, b| a * b)
    }

    /// `tr(Γ)/2 − M/2`: mean photon number of a centred state.
    pub fn mean_photons(&self) -> T {
        self.matrix.trace() / T::lit(2.0) - T::from_usize_lossy(self.modes) / T::lit(2.0)
    }
}

/// `[[Re u, −Im u], [Im u, Re u]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticOrthogonal<T> {
    matrix: RMatrix<T>,
}

impl<T: Real> SymplecticOrthogonal<T> {
    pub fn matrix(&self) -> &RMatrix<T> {
        &self.matrix
    }

    pub fn modes(&self) -> usize {
        self.matrix.rows() / 2
    }
}

/// `J = [[0, I], [−I, 0]]` in block ordering.
pub fn symplectic_form<T: Real>(modes: usize) -> RMatrix<T> {
    let mut j = RMatrix::zeros(2 * modes, 2 * modes);
    for i in 0..modes {
        j[(i, modes + i)] = T::one();
        j[(modes + i, i)] = -T::one();
    }
    j
}

/// `Γ₀ = ½ diag(e^{2𝓡}, e^{−2𝓡})` with `𝓡 = r` on the probe channel only.
pub fn input_covariance<T: Real>(probe: &ProbeSpec<T>, modes: usize) -> Result<CovarianceMatrix<T>> {
    let c = channel_index(probe.channel, modes)?;
    let half = T::lit(0.5);
    let two_r = T::lit(2.0) * probe.squeezing;
    let mut diag = vec![half; 2 * modes];
    diag[c] = half * two_r.exp();
    diag[modes + c] = half * (-two_r).exp();
    Ok(CovarianceMatrix {
        modes,
        matrix: RMatrix::from_diagonal(&diag),
    })
}

pub fn symplectic_from_unitary<T: Real>(u: &Unitary<T>) -> Result<SymplecticOrthogonal<T>> {
    let deviation = u.unitarity_error();
    if !(deviation <= T::acceptance_tol()) {
        return Err(Error::NotUnitary {
            deviation: deviation.to_f64().unwrap_or(f64::NAN),
        });
    }
    let m = u.dim();
    let re = u.matrix().real_part();
    let im = u.matrix().imag_part();
    let mut r = RMatrix::zeros(2 * m, 2 * m);
    r.set_block(0, 0, &re);
    r.set_block(0, m, &im.scale(-T::one()));
    r.set_block(m, 0, &im);
    r.set_block(m, m, &re);
    Ok(SymplecticOrthogonal { matrix: r })
}

/// `R Γ Rᵀ`.
pub fn evolve_covariance<T: Real>(
    gamma: &CovarianceMatrix<T>,
    r: &SymplecticOrthogonal<T>,
) -> Result<CovarianceMatrix<T>> {
    if gamma.modes != r.modes() {
        return Err(Error::DimensionMismatch {
            expected: gamma.modes,
            found: r.modes(),
        });
    }
    let out = r.matrix.matmul(&gamma.matrix).matmul(&r.matrix.transpose());
    // symmetrize away roundoff
    let sym = RMatrix::from_fn(out.rows(), out.cols(), |i, j| (out[(i, j)] + out[(j, i)]) * T::lit(0.5));
    Ok(CovarianceMatrix {
        modes: gamma.modes,
        matrix: sym,
    })
}

/// 2×2 block `[[⟨x_c²⟩, ⟨x_c p_c⟩], [⟨x_c p_c⟩, ⟨p_c²⟩]]` of one mode.
pub fn reduced_covariance<T: Real>(gamma: &CovarianceMatrix<T>, channel: usize) -> Result<RMatrix<T>> {
    let c = channel_index(channel, gamma.modes)?;
    let m = gamma.modes;
    let g = &gamma.matrix;
    Ok(RMatrix::from_row_major(
        2,
        2,
        vec![g[(c, c)], g[(c, m + c)], g[(m + c, c)], g[(m + c, m + c)]],
    ))
}

/// `(O_θ Γ′ O_θᵀ)₁₁` with `O_θ = [[cos θ, sin θ], [−sin θ, cos θ]]`.
pub fn quadrature_variance<T: Real>(gamma2: &RMatrix<T>, theta: T) -> T {
    let (s, c) = theta.sin_cos();
    c * c * gamma2[(0, 0)] + c * s * (gamma2[(0, 1)] + gamma2[(1, 0)]) + s * s * gamma2[(1, 1)]
}

/// `σ² = ½ + P (sinh²r + cos(2f − 2θ) sinh r cosh r)`.
pub fn variance_closed_form<T: Real>(prob: T, phase: T, theta: T, squeezing: T) -> T {
    let two = T::lit(2.0);
    let sh = squeezing.sinh();
    let ch = squeezing.cosh();
    T::lit(0.5) + prob * (sh * sh + (two * phase - two * theta).cos() * sh * ch)
}

/// Homodyne variance at `(channel, θ)` for `probe` sent through `u`, via the
/// full covariance pipeline.
pub fn pipeline_variance<T: Real>(probe: &ProbeSpec<T>, u: &Unitary<T>, channel: usize, theta: T) -> Result<T> {
    let gamma0 = input_covariance(probe, u.dim())?;
    let r = symplectic_from_unitary(u)?;
    let gamma = evolve_covariance(&gamma0, &r)?;
    Ok(quadrature_variance(&reduced_covariance(&gamma, channel)?, theta))
}
