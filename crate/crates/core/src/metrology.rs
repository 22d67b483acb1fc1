//! Fisher information of the homodyne statistics, its large-N rank-one
//! form, the detuning prefactor ρ(k, ℓ) and the resulting Cramér–Rao bound.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, RMatrix};
use crate::scalar::{wrap_angle, Real};

pub type GradientVector<T> = Vec<T>;

/// Refocusing deficit `ℓ`, detuning `k` and mean photon number `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionParams<T> {
    pub ell: T,
    pub k: T,
    pub mean_photons: T,
}

impl<T: Real> ConditionParams<T> {
    pub fn new(ell: T, k: T, mean_photons: T) -> Result<Self> {
        if !(ell >= T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "refocusing deficit must be >= 0, got {ell}"
            )));
        }
        if k == T::zero() || !k.is_finite() {
            return Err(Error::InvalidArgument("detuning k must be finite and nonzero".into()));
        }
        if !(mean_photons > T::zero()) {
            return Err(Error::NonPositivePhotonNumber(
                mean_photons.to_f64().unwrap_or(f64::NAN),
            ));
        }
        Ok(Self { ell, k, mean_photons })
    }
}

/// `ε^{1/3} · max(1, |x|)`.
pub fn default_step<T: Real>(x: T) -> T {
    T::epsilon().cbrt() * x.abs().max(T::one())
}

fn central_differences<T, F>(mut func: F, phi: &[T], step: Option<T>, wrap: bool) -> Result<GradientVector<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<T>,
{
    if let Some(h) = step {
        if !(h > T::zero()) {
            return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
        }
    }
    let mut probe = phi.to_vec();
    let mut grad = Vec::with_capacity(phi.len());
    for i in 0..phi.len() {
        let h = step.unwrap_or_else(|| default_step(phi[i]));
        probe[i] = phi[i] + h;
        let up = func(&probe)?;
        probe[i] = phi[i] - h;
        let down = func(&probe)?;
        probe[i] = phi[i];
        let mut diff = up - down;
        if wrap {
            diff = wrap_angle(diff);
        }
        grad.push(diff / (T::lit(2.0) * h));
    }
    Ok(grad)
}

/// Central-difference gradient `(g(φ + h eᵢ) − g(φ − h eᵢ)) / 2h`.
/// With `step = None` each component uses [`default_step`].
pub fn numeric_gradient<T, F>(func: F, phi: &[T], step: Option<T>) -> Result<GradientVector<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<T>,
{
    central_differences(func, phi, step, false)
}

/// Gradient of a phase-valued function: each difference is unwrapped into
/// `(−π, π]` before dividing, so branch cuts do not produce `2π/h` spikes.
pub fn phase_gradient<T, F>(func: F, phi: &[T], step: Option<T>) -> Result<GradientVector<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<T>,
{
    central_differences(func, phi, step, true)
}

/// `I = (∇σ²)(∇σ²)ᵀ / (2σ⁴)`.
pub fn fisher_exact<T, F>(mut sigma2: F, phi: &[T], step: Option<T>) -> Result<RMatrix<T>>
where
    T: Real,
    F: FnMut(&[T]) -> Result<T>,
{
    let s2 = sigma2(phi)?;
    if !(s2 > T::zero()) {
        return Err(Error::NonPositiveVariance(s2.to_f64().unwrap_or(f64::NAN)));
    }
    let grad = numeric_gradient(&mut sigma2, phi, step)?;
    Ok(RMatrix::outer(&grad, &grad).scale(T::one() / (T::lit(2.0) * s2 * s2)))
}

/// `ρ(k, ℓ) = (8k / (1 + 16k² + 4ℓ))²`.
pub fn rho<T: Real>(k: T, ell: T) -> T {
    let r = T::lit(8.0) * k / (T::one() + T::lit(16.0) * k * k + T::lit(4.0) * ell);
    r * r
}

/// `k* = √(1 + 4ℓ) / 4`, the maximiser of `ρ(·, ℓ)` over `k > 0`.
pub fn optimal_k<T: Real>(ell: T) -> Result<T> {
    if !(ell >= T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "refocusing deficit must be >= 0, got {ell}"
        )));
    }
    Ok((T::one() + T::lit(4.0) * ell).sqrt() / T::lit(4.0))
}

/// `I ≈ 8 ρ(k, ℓ) N² (∇f)(∇f)ᵀ`.
pub fn fisher_asymptotic<T: Real>(k: T, ell: T, mean_photons: T, grad_f: &[T]) -> Result<RMatrix<T>> {
    if !(mean_photons > T::zero()) {
        return Err(Error::NonPositivePhotonNumber(
            mean_photons.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let scale = T::lit(8.0) * rho(k, ell) * mean_photons * mean_photons;
    Ok(RMatrix::outer(grad_f, grad_f).scale(scale))
}

/// `(dg/df)² / (8 ρ N²)`; `dg/df` defaults to 1.
pub fn crb<T: Real>(k: T, ell: T, mean_photons: T, dg_df: Option<T>) -> Result<T> {
    if !(mean_photons > T::zero()) {
        return Err(Error::NonPositivePhotonNumber(
            mean_photons.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let r = rho(k, ell);
    if !(r > T::zero()) {
        return Err(Error::UndefinedBound);
    }
    let g = dg_df.unwrap_or_else(T::one);
    Ok(g * g / (T::lit(8.0) * r * mean_photons * mean_photons))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimability<T> {
    pub estimable: bool,
    /// Angle in `[0, π]` between the two gradients.
    pub angle: T,
}

/// Whether `∇α` lies in the one-dimensional support spanned by `∇f`: the
/// sine of the angle between them must not exceed `tol`.
pub fn estimability_check<T: Real>(grad_alpha: &[T], grad_f: &[T], tol: T) -> Result<Estimability<T>> {
    if grad_alpha.len() != grad_f.len() {
        return Err(Error::DimensionMismatch {
            expected: grad_f.len(),
            found: grad_alpha.len(),
        });
    }
    let nf = norm(grad_f);
    if nf == T::zero() {
        return Err(Error::ZeroGradient);
    }
    let na = norm(grad_alpha);
    if na == T::zero() {
        // a constant function is trivially estimable
        return Ok(Estimability {
            estimable: true,
            angle: T::zero(),
        });
    }
    let cos = dot(grad_alpha, grad_f) / (na * nf);
    let residual: Vec<T> = grad_alpha
        .iter()
        .zip(grad_f)
        .map(|(&a, &f)| a / na - cos * f / nf)
        .collect();
    let sin = norm(&residual);
    Ok(Estimability {
        estimable: sin <= tol,
        angle: sin.atan2(cos),
    })
}

/// Dominant eigenpair of a symmetric PSD matrix by power iteration.
pub fn eigen_rank_one<T: Real>(matrix: &RMatrix<T>) -> Result<(T, Vec<T>)> {
    let n = matrix.rows();
    if n == 0 || matrix.cols() != n {
        return Err(Error::InvalidArgument(
            "eigen_rank_one needs a non-empty square matrix".into(),
        ));
    }
    let scale = matrix.max_abs();
    if scale == T::zero() {
        let mut v = vec![T::zero(); n];
        v[0] = T::one();
        return Ok((T::zero(), v));
    }
    let inv_sqrt_n = T::one() / T::from_usize_lossy(n).sqrt();
    let mut v = vec![inv_sqrt_n; n];
    if norm(&matrix.matvec(&v)) <= T::epsilon() * scale {
        // start vector orthogonal to the range: fixed perturbation
        v = (0..n)
            .map(|i| T::one() + T::lit(0.1) * T::from_usize_lossy(i + 1))
            .collect();
        let nv = norm(&v);
        v.iter_mut().for_each(|x| *x = *x / nv);
    }
    let tol = T::lit(1e-12).max(T::epsilon() * T::lit(16.0));
    let mut lambda = T::zero();
    for _ in 0..10_000 {
        let w = matrix.matvec(&v);
        let nw = norm(&w);
        if nw == T::zero() {
            return Ok((T::zero(), v));
        }
        let next: Vec<T> = w.iter().map(|&x| x / nw).collect();
        lambda = dot(&next, &matrix.matvec(&next));
        let change = next
            .iter()
            .zip(&v)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max);
        v = next;
        if change <= tol {
            break;
        }
    }
    Ok((lambda, v))
}

/// `∇σ² = ∇P (sinh²r + cos(2f − 2θ) sinh r cosh r) − 2P ∇f sin(2f − 2θ) sinh r cosh r`.
pub fn variance_gradient_chain_rule<T: Real>(
    grad_p: &[T],
    grad_f: &[T],
    prob: T,
    phase: T,
    theta: T,
    squeezing: T,
) -> GradientVector<T> {
    let two = T::lit(2.0);
    let sh = squeezing.sinh();
    let ch = squeezing.cosh();
    let arg = two * phase - two * theta;
    let dp = sh * sh + arg.cos() * sh * ch;
    let df = -two * prob * arg.sin() * sh * ch;
    grad_p.iter().zip(grad_f).map(|(&gp, &gf)| gp * dp + gf * df).collect()
}

/// Exact and asymptotic Fisher matrices with the derived bound and
/// eigenstructure.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherReport<T> {
    pub exact: RMatrix<T>,
    pub asymptotic: RMatrix<T>,
    pub rho: T,
    pub crb: T,
    pub eigenvalue: T,
    pub eigenvector: Vec<T>,
    pub grad_f: GradientVector<T>,
}

/// Assemble a [`FisherReport`] from the variance map `σ²(φ)` and the phase
/// map `f(φ)` at `phi`.
pub fn fisher_report<T, S, F>(sigma2: S, phase: F, phi: &[T], cond: &ConditionParams<T>) -> Result<FisherReport<T>>
where
    T: Real,
    S: FnMut(&[T]) -> Result<T>,
    F: FnMut(&[T]) -> Result<T>,
{
    let exact = fisher_exact(sigma2, phi, None)?;
    let grad_f = phase_gradient(phase, phi, None)?;
    let asymptotic = fisher_asymptotic(cond.k, cond.ell, cond.mean_photons, &grad_f)?;
    let (eigenvalue, eigenvector) = eigen_rank_one(&asymptotic)?;
    Ok(FisherReport {
        exact,
        asymptotic,
        rho: rho(cond.k, cond.ell),
        crb: crb(cond.k, cond.ell, cond.mean_photons, None)?,
        eigenvalue,
        eigenvector,
        grad_f,
    })
}

/// Largest entrywise relative deviation `|a − b| / |b|` over entries where
/// `|b|` exceeds `floor · max|b|`.
pub fn max_relative_deviation<T: Real>(a: &RMatrix<T>, b: &RMatrix<T>, floor: T) -> T {
    let cut = floor * b.max_abs();
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .filter(|(_, &y)| y.abs() > cut)
        .map(|(&x, &y)| ((x - y) / y).abs())
        .fold(T::zero(), T::max)
}
