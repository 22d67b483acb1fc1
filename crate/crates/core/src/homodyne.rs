//! Homodyne records: local-oscillator phase selection, Gaussian sampling
//! and the centred-Gaussian log-likelihood.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{wrap_angle, Real};

/// Which minimum-variance quadrature `f ± π/2` the oscillator is parked near.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Branch {
    #[default]
    Plus,
    Minus,
}

impl Branch {
    pub fn sign<T: Real>(self) -> T {
        match self {
            Branch::Plus => T::one(),
            Branch::Minus => -T::one(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomodyneSetting<T> {
    pub theta: T,
    pub k: T,
    pub branch: Branch,
}

/// `θ = f_ref ± π/2 + k/N`, wrapped to `(−π, π]`.
pub fn select_theta<T: Real>(f_ref: T, k: T, mean_photons: T, branch: Branch) -> Result<HomodyneSetting<T>> {
    if !(mean_photons > T::zero()) {
        return Err(Error::NonPositivePhotonNumber(
            mean_photons.to_f64().unwrap_or(f64::NAN),
        ));
    }
    if !k.is_finite() {
        return Err(Error::InvalidArgument("detuning k must be finite".into()));
    }
    let theta = wrap_angle(f_ref + branch.sign::<T>() * T::FRAC_PI_2() + k / mean_photons);
    Ok(HomodyneSetting { theta, k, branch })
}

/// Deterministic RNG for one `(seed, stream)` pair. Streams of the same seed
/// are independent ChaCha keystreams.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord<T> {
    pub samples: Vec<T>,
    pub theta: T,
    pub seed: u64,
    pub stream: u64,
}

impl<T: Real> MeasurementRecord<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `Σ x²`, the sufficient statistic of a centred Gaussian.
    pub fn sum_of_squares(&self) -> T {
        self.samples.iter().map(|&x| x * x).sum()
    }

    /// `Σ x² / n`, the maximum-likelihood variance.
    pub fn second_moment(&self) -> T {
        self.sum_of_squares() / T::from_usize_lossy(self.samples.len())
    }

    /// Unbiased sample variance around the sample mean.
    pub fn sample_variance(&self) -> T {
        let n = T::from_usize_lossy(self.samples.len());
        let mean = self.samples.iter().copied().sum::<T>() / n;
        self.samples.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / (n - T::one())
    }

    /// CSV with header `index,x`, one outcome per row, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "index,x")?;
        for (i, x) in self.samples.iter().enumerate() {
            writeln!(out, "{},{:.16e}", i, x.to_f64().unwrap_or(f64::NAN))?;
        }
        Ok(())
    }
}

/// `n` draws from `Normal(0, variance)` on stream 0 of `seed`.
pub fn sample<T: Real>(variance: T, n: usize, theta: T, seed: u64) -> Result<MeasurementRecord<T>> {
    sample_stream(variance, n, theta, seed, 0)
}

pub fn sample_stream<T: Real>(variance: T, n: usize, theta: T, seed: u64, stream: u64) -> Result<MeasurementRecord<T>> {
    check_sampling(variance, n)?;
    let samples = draw_samples(variance, n, &mut stream_rng(seed, stream));
    Ok(MeasurementRecord {
        samples,
        theta,
        seed,
        stream,
    })
}

/// Like [`sample_stream`] but drawing from a caller-owned generator that
/// was created by [`stream_rng`]`(seed, stream)`.
pub fn sample_with<T: Real, R: Rng + ?Sized>(
    variance: T,
    n: usize,
    theta: T,
    rng: &mut R,
    seed: u64,
    stream: u64,
) -> Result<MeasurementRecord<T>> {
    check_sampling(variance, n)?;
    Ok(MeasurementRecord {
        samples: draw_samples(variance, n, rng),
        theta,
        seed,
        stream,
    })
}

fn check_sampling<T: Real>(variance: T, n: usize) -> Result<()> {
    if !(variance > T::zero()) || !variance.is_finite() {
        return Err(Error::NonPositiveVariance(variance.to_f64().unwrap_or(f64::NAN)));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    Ok(())
}

fn draw_samples<T: Real, R: Rng + ?Sized>(variance: T, n: usize, rng: &mut R) -> Vec<T> {
    let sd = variance.sqrt();
    (0..n).map(|_| sd * T::standard_normal(rng)).collect()
}

/// `Σᵢ [−xᵢ²/(2σ²) − ½ log(2πσ²)]`.
pub fn log_likelihood<T: Real>(record: &MeasurementRecord<T>, variance: T) -> Result<T> {
    log_likelihood_from_moments(record.sum_of_squares(), record.len(), variance)
}

/// Same as [`log_likelihood`], from `Σ x²` and `n` alone.
pub fn log_likelihood_from_moments<T: Real>(sum_sq: T, n: usize, variance: T) -> Result<T> {
    if !(variance > T::zero()) {
        return Err(Error::NonPositiveVariance(variance.to_f64().unwrap_or(f64::NAN)));
    }
    let half = T::lit(0.5);
    let nn = T::from_usize_lossy(n);
    Ok(-sum_sq / (T::lit(2.0) * variance) - half * nn * (T::TAU() * variance).ln())
}
