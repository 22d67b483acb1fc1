//! Monte Carlo estimation of the acquired phase from homodyne records and
//! the empirical Heisenberg-scaling check against the Cramér–Rao bound.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::{pipeline_variance, variance_closed_form, ProbeSpec};
use crate::homodyne::{log_likelihood_from_moments, sample_with, select_theta, stream_rng, Branch, MeasurementRecord};
use crate::metrology::crb;
use crate::network::transition;
use crate::scalar::{wrap_angle, Real};
use crate::scenarios::{shot_noise_prior_with, PriorKnowledge, Scenario};

/// Where the local oscillator is parked relative to the unknown phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThetaMode {
    /// `θ` from the true `f(φ)`.
    #[default]
    Ideal,
    /// `θ` from `f(φ_cl)`, the phase the prior predicts.
    Prior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig<T> {
    pub scenario: Scenario<T>,
    pub photon_numbers: Vec<T>,
    /// Homodyne samples per estimate.
    pub samples: usize,
    pub repetitions: usize,
    pub k: T,
    pub prior_scale: T,
    pub theta_mode: ThetaMode,
    pub branch: Branch,
    pub seed: u64,
    /// Permit `k = 0`, which is only meaningful as a control run.
    pub zero_detuning_control: bool,
}

impl<T: Real> ExperimentConfig<T> {
    pub fn new(scenario: Scenario<T>, photon_numbers: Vec<T>) -> Self {
        Self {
            scenario,
            photon_numbers,
            samples: 10_000,
            repetitions: 200,
            k: T::lit(0.25),
            prior_scale: T::one(),
            theta_mode: ThetaMode::Ideal,
            branch: Branch::Plus,
            seed: 0,
            zero_detuning_control: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.repetitions == 0 {
            return Err(Error::InvalidArgument(
                "sample and repetition counts must be at least 1".into(),
            ));
        }
        if self.photon_numbers.is_empty() {
            return Err(Error::InvalidArgument("empty photon-number grid".into()));
        }
        if let Some(n) = self
            .photon_numbers
            .iter()
            .find(|n| !(**n > T::zero()) || !n.is_finite())
        {
            return Err(Error::NonPositivePhotonNumber(n.to_f64().unwrap_or(f64::NAN)));
        }
        if !self.k.is_finite() || (self.k == T::zero() && !self.zero_detuning_control) {
            return Err(Error::InvalidArgument("k must be nonzero".into()));
        }
        if !(self.prior_scale >= T::zero()) {
            return Err(Error::InvalidArgument("prior scale must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationResult<T> {
    pub f_hat: T,
    pub n: usize,
    pub theta: T,
    pub converged: bool,
}

/// One-sided search interval of width π/8 ending at the variance minimum
/// `θ ∓ π/2`, on the side where `f` lies for the sign of `k`. The mirror
/// solution on the other side of the minimum is excluded.
pub fn estimator_bracket<T: Real>(theta: T, k: T, branch: Branch) -> (T, T) {
    let f_min = theta - branch.sign::<T>() * T::FRAC_PI_2();
    let width = T::PI() / T::lit(8.0);
    if k < T::zero() {
        (f_min, f_min + width)
    } else {
        (f_min - width, f_min)
    }
}

fn search_tolerance<T: Real>(lo: T, hi: T) -> T {
    let scale = lo.abs().max(hi.abs()).max(T::one());
    T::lit(1e-10).max(T::lit(8.0) * T::epsilon() * scale)
}

/// Maximum-likelihood `f` for a record taken at `theta`, with
/// `σ²(f) = variance_closed_form(P, f, θ, r)`, by golden-section search
/// over `bracket`.
pub fn mle_f<T: Real>(
    record: &MeasurementRecord<T>,
    theta: T,
    prob: T,
    squeezing: T,
    bracket: (T, T),
) -> Result<EstimationResult<T>> {
    let (lo, hi) = bracket;
    if !(hi > lo) || hi - lo > T::FRAC_PI_2() {
        return Err(Error::InvalidArgument(format!("bad search bracket [{lo}, {hi}]")));
    }
    if record.is_empty() {
        return Err(Error::InvalidArgument("empty record".into()));
    }
    let n = record.len();
    let sum_sq = record.sum_of_squares();
    let ll = |f: T| {
        log_likelihood_from_moments(sum_sq, n, variance_closed_form(prob, f, theta, squeezing))
            .unwrap_or(T::neg_infinity())
    };

    let tol = search_tolerance(lo, hi);
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (ll(c), ll(d));
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = ll(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = ll(d);
        }
    }
    let f_hat = (a + b) / T::lit(2.0);
    let flat = squeezing == T::zero() || prob == T::zero() || (ll(lo) == ll(hi) && ll(lo) == ll(f_hat));
    let interior = f_hat - lo > tol && hi - f_hat > tol;
    Ok(EstimationResult {
        f_hat,
        n,
        theta,
        converged: interior && !flat,
    })
}

/// One Monte Carlo repetition: the estimate plus the truth it is scored
/// against.
#[derive(Debug, Clone, PartialEq)]
pub struct Repetition<T> {
    pub estimate: EstimationResult<T>,
    pub f_true: T,
    pub prob: T,
    pub prior: PriorKnowledge<T>,
}

impl<T: Real> Repetition<T> {
    pub fn error(&self) -> T {
        wrap_angle(self.estimate.f_hat - self.f_true)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult<T> {
    pub mean_photons: T,
    pub repetitions: Vec<Repetition<T>>,
    /// Sample variance of `f̂ − f` over converged repetitions.
    pub per_estimate_variance: T,
    /// `n ×` the per-estimate variance, comparable to the per-sample bound.
    pub variance: T,
    /// Mean `(1 − P)·N` over repetitions, used as `ℓ` in the bound.
    pub ell: T,
    /// Per-sample bound `1/(8ρ(k, ℓ)N²)`; infinite when `ρ = 0`.
    pub crb: T,
    pub unconverged: usize,
    pub reliable: bool,
}

impl<T: Real> PointResult<T> {
    pub fn ratio(&self) -> T {
        self.variance / self.crb
    }
}

/// Stream id for repetition `rep` of grid point `point`.
pub fn stream_id(point: usize, rep: usize) -> u64 {
    ((point as u64) << 32) | rep as u64
}

fn one_repetition<T: Real>(
    config: &ExperimentConfig<T>,
    probe: &ProbeSpec<T>,
    point: usize,
    rep: usize,
) -> Result<Repetition<T>> {
    let n_ph = probe.mean_photons();
    let stream = stream_id(point, rep);
    let mut rng = stream_rng(config.seed, stream);
    let phi = config.scenario.phi_true();
    let prior = if config.scenario.uses_prior() {
        shot_noise_prior_with(&phi, n_ph, config.prior_scale, &mut rng)?
    } else {
        PriorKnowledge::exact(&phi)
    };
    let u = config.scenario.composite(&prior.phi_true, &prior.phi_cl)?;
    let tr = transition(&u, 1, 1)?;
    let f_true = tr.phase_checked()?;
    let f_ref = match config.theta_mode {
        ThetaMode::Ideal => f_true,
        ThetaMode::Prior => config
            .scenario
            .transition(&prior.phi_cl, &prior.phi_cl)?
            .phase_checked()?,
    };
    let setting = select_theta(f_ref, config.k, n_ph, config.branch)?;
    let variance = pipeline_variance(probe, &u, 1, setting.theta)?;
    let record = sample_with(variance, config.samples, setting.theta, &mut rng, config.seed, stream)?;
    let bracket = estimator_bracket(setting.theta, config.k, config.branch);
    let estimate = mle_f(&record, setting.theta, tr.prob, probe.squeezing(), bracket)?;
    Ok(Repetition {
        estimate,
        f_true,
        prob: tr.prob,
        prior,
    })
}

/// All repetitions at photon number `mean_photons`, which is grid point
/// `point` for stream assignment.
pub fn run_point<T: Real>(config: &ExperimentConfig<T>, point: usize, mean_photons: T) -> Result<PointResult<T>> {
    let probe = ProbeSpec::from_mean_photons(mean_photons, 1)?;
    let repetitions = (0..config.repetitions)
        .into_par_iter()
        .map(|rep| one_repetition(config, &probe, point, rep))
        .collect::<Result<Vec<_>>>()?;

    let errors: Vec<T> = repetitions
        .iter()
        .filter(|r| r.estimate.converged)
        .map(Repetition::error)
        .collect();
    let unconverged = repetitions.len() - errors.len();
    let per_estimate_variance = sample_variance(&errors);
    let variance = per_estimate_variance * T::from_usize_lossy(config.samples);
    let reps = T::from_usize_lossy(repetitions.len());
    let ell = repetitions
        .iter()
        .map(|r| (T::one() - r.prob).max(T::zero()) * mean_photons)
        .sum::<T>()
        / reps;
    let crb = crb(config.k, ell, mean_photons, None).unwrap_or_else(|_| T::infinity());
    let reliable = errors.len() >= 2 && T::from_usize_lossy(unconverged) <= T::lit(0.2) * reps;
    Ok(PointResult {
        mean_photons,
        repetitions,
        per_estimate_variance,
        variance,
        ell,
        crb,
        unconverged,
        reliable,
    })
}

fn sample_variance<T: Real>(xs: &[T]) -> T {
    if xs.len() < 2 {
        return T::nan();
    }
    let n = T::from_usize_lossy(xs.len());
    let mean = xs.iter().copied().sum::<T>() / n;
    xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / (n - T::one())
}

/// Least-squares line through `(ln x, ln y)`, skipping non-positive or
/// non-finite pairs. Returns `(slope, intercept)`, NaN with fewer than two
/// usable points.
pub fn fit_loglog<T: Real>(xs: &[T], ys: &[T]) -> (T, T) {
    let pts: Vec<(T, T)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > T::zero() && **y > T::zero() && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return (T::nan(), T::nan());
    }
    let n = T::from_usize_lossy(pts.len());
    let mx = pts.iter().map(|p| p.0).sum::<T>() / n;
    let my = pts.iter().map(|p| p.1).sum::<T>() / n;
    let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<T>();
    let sxx = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<T>();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport<T> {
    pub points: Vec<PointResult<T>>,
    /// Slope of `ln variance` against `ln N`.
    pub slope: T,
    pub intercept: T,
    pub reliable: bool,
}

impl<T: Real> ScalingReport<T> {
    /// `N,variance,crb,ratio,unconverged` rows, then comment lines with the
    /// per-estimate variances, unreliable points and the fit.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let f = |x: T| x.to_f64().unwrap_or(f64::NAN);
        writeln!(out, "N,variance,crb,ratio,unconverged")?;
        for p in &self.points {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{}",
                f(p.mean_photons),
                f(p.variance),
                f(p.crb),
                f(p.ratio()),
                p.unconverged
            )?;
        }
        for p in &self.points {
            writeln!(
                out,
                "# N={:.16e} per_estimate_variance={:.16e} ell={:.16e}",
                f(p.mean_photons),
                f(p.per_estimate_variance),
                f(p.ell)
            )?;
            if !p.reliable {
                writeln!(out, "# unreliable N={:.16e}", f(p.mean_photons))?;
            }
        }
        writeln!(
            out,
            "# slope={:.16e} intercept={:.16e}",
            f(self.slope),
            f(self.intercept)
        )
    }
}

/// Run every grid point and fit the log-log slope. The grid must hold at
/// least three photon numbers spanning two decades.
pub fn scaling_experiment<T: Real>(config: &ExperimentConfig<T>) -> Result<ScalingReport<T>> {
    config.validate()?;
    let grid = &config.photon_numbers;
    let lo = grid.iter().copied().fold(T::infinity(), T::min);
    let hi = grid.iter().copied().fold(T::neg_infinity(), T::max);
    if grid.len() < 3 || hi / lo < T::lit(100.0) * (T::one() - T::lit(1e-9)) {
        return Err(Error::InvalidArgument(
            "scaling grid needs at least 3 photon numbers spanning 2 decades".into(),
        ));
    }
    let points = grid
        .iter()
        .enumerate()
        .map(|(i, &n)| run_point(config, i, n))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<T> = points.iter().map(|p| p.mean_photons).collect();
    let ys: Vec<T> = points.iter().map(|p| p.variance).collect();
    let (slope, intercept) = fit_loglog(&xs, &ys);
    let reliable = points.iter().all(|p| p.reliable);
    Ok(ScalingReport {
        points,
        slope,
        intercept,
        reliable,
    })
}

/// How the prior error scales with `N` in [`prior_sufficiency_probe`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PriorNoise {
    /// `δ ~ Uniform[−c/√N, c/√N]`.
    #[default]
    ShotNoise,
    /// `δ ~ Uniform[−c, c]` at every `N`.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorProbeRow<T> {
    pub mean_photons: T,
    /// Largest `(1 − P)·N` over the draws.
    pub max_scaled_deficit: T,
    pub mean_scaled_deficit: T,
}

/// `(1 − P_φ)·N` over `draws` prior draws at each photon number.
pub fn prior_sufficiency_probe<T: Real>(
    scenario: &Scenario<T>,
    photon_numbers: &[T],
    scale: T,
    draws: usize,
    noise: PriorNoise,
    seed: u64,
) -> Result<Vec<PriorProbeRow<T>>> {
    if !scenario.uses_prior() {
        return Err(Error::InvalidArgument("scenario has no prior-tuned stages".into()));
    }
    if draws == 0 {
        return Err(Error::InvalidArgument("draw count must be at least 1".into()));
    }
    let phi = scenario.phi_true();
    photon_numbers
        .iter()
        .enumerate()
        .map(|(point, &n_ph)| {
            if !(n_ph > T::zero()) {
                return Err(Error::NonPositivePhotonNumber(n_ph.to_f64().unwrap_or(f64::NAN)));
            }
            let width_n = match noise {
                PriorNoise::ShotNoise => n_ph,
                PriorNoise::Fixed => T::one(),
            };
            let deficits = (0..draws)
                .into_par_iter()
                .map(|d| {
                    let mut rng = stream_rng(seed, stream_id(point, d));
                    let prior = shot_noise_prior_with(&phi, width_n, scale, &mut rng)?;
                    let p = scenario.transition(&prior.phi_true, &prior.phi_cl)?.prob;
                    Ok((T::one() - p).max(T::zero()) * n_ph)
                })
                .collect::<Result<Vec<T>>>()?;
            Ok(PriorProbeRow {
                mean_photons: n_ph,
                max_scaled_deficit: deficits.iter().copied().fold(T::zero(), T::max),
                mean_scaled_deficit: deficits.iter().copied().sum::<T>() / T::from_usize_lossy(draws),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homodyne::MeasurementRecord;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn record(samples: Vec<f64>, theta: f64) -> MeasurementRecord<f64> {
        MeasurementRecord {
            samples,
            theta,
            seed: 0,
            stream: 0,
        }
    }

    fn two_channel() -> Scenario<f64> {
        Scenario::TwoChannel {
            phi: [0.6, 0.2, -0.3],
            alpha1: FRAC_PI_2 / 2.0,
            alpha2: -FRAC_PI_2 / 2.0,
        }
    }

    #[test]
    fn bracket_sits_on_the_detuning_side() {
        let (lo, hi) = estimator_bracket(1.0 + FRAC_PI_2, 0.25, Branch::Plus);
        assert!((hi - 1.0).abs() < 1e-15 && (hi - lo - PI / 8.0).abs() < 1e-15);
        let (lo, hi) = estimator_bracket(1.0 - FRAC_PI_2, -0.25, Branch::Minus);
        assert!((lo - 1.0).abs() < 1e-15 && hi > lo);
    }

    #[test]
    fn mle_recovers_noiseless_proxy() {
        let (n_ph, k, f0) = (100.0f64, 0.25, 0.4);
        let r = n_ph.sqrt().asinh();
        let theta = f0 + FRAC_PI_2 + k / n_ph;
        let s2 = variance_closed_form(1.0, f0, theta, r);
        let rec = record(vec![s2.sqrt(); 1000], theta);
        let est = mle_f(&rec, theta, 1.0, r, estimator_bracket(theta, k, Branch::Plus)).unwrap();
        assert!(est.converged);
        assert!((est.f_hat - f0).abs() < 1e-8, "{}", est.f_hat - f0);
    }

    #[test]
    fn mle_scaled_outcomes_invert_variance() {
        let (n_ph, k, f0, s) = (50.0f64, 0.25, -0.2, 1.3f64);
        let r = n_ph.sqrt().asinh();
        let theta = f0 + FRAC_PI_2 + k / n_ph;
        let s2 = variance_closed_form(1.0, f0, theta, r);
        let rec = record(vec![s * s2.sqrt(); 10], theta);
        let est = mle_f(&rec, theta, 1.0, r, estimator_bracket(theta, k, Branch::Plus)).unwrap();
        // cos(2f − 2θ) = (s²σ² − ½ − sinh²r)/(sinh r cosh r), f < θ − π/2
        let c = (s * s * s2 - 0.5 - r.sinh().powi(2)) / (r.sinh() * r.cosh());
        let expect = theta - PI / 2.0 - (-c).acos() / 2.0;
        assert!((est.f_hat - expect).abs() < 1e-8, "{} vs {expect}", est.f_hat);
        assert!((variance_closed_form(1.0, est.f_hat, theta, r) - s * s * s2).abs() < 1e-6 * s2);
    }

    #[test]
    fn mle_flat_likelihood_is_unconverged() {
        let rec = record(vec![0.3, -0.7], 0.0);
        let est = mle_f(&rec, 0.0, 1.0, 0.0, (-1.0, -0.8)).unwrap();
        assert!(!est.converged);
    }

    #[test]
    fn mle_edge_maximiser_is_unconverged() {
        let (n_ph, k) = (100.0f64, 0.25);
        let r = n_ph.sqrt().asinh();
        let theta = FRAC_PI_2 + k / n_ph;
        let rec = record(vec![1e-9; 10], theta);
        let est = mle_f(&rec, theta, 1.0, r, estimator_bracket(theta, k, Branch::Plus)).unwrap();
        assert!(!est.converged);
    }

    #[test]
    fn mle_rejects_wide_bracket() {
        let rec = record(vec![0.3], 0.0);
        assert!(mle_f(&rec, 0.0, 1.0, 1.0, (0.0, 2.0)).is_err());
        assert!(mle_f(&rec, 0.0, 1.0, 1.0, (0.5, 0.1)).is_err());
    }

    fn small_config(reps: usize, samples: usize) -> ExperimentConfig<f64> {
        let mut cfg = ExperimentConfig::new(two_channel(), vec![100.0, 1000.0, 10000.0]);
        cfg.prior_scale = 0.0;
        cfg.repetitions = reps;
        cfg.samples = samples;
        cfg.seed = 7;
        cfg
    }

    #[test]
    fn single_repetition_is_flagged() {
        let p = run_point(&small_config(1, 100), 0, 100.0).unwrap();
        assert!(!p.reliable);
        assert!(p.variance.is_nan());
    }

    #[test]
    fn run_point_is_deterministic() {
        let cfg = small_config(16, 200);
        assert_eq!(run_point(&cfg, 1, 100.0).unwrap(), run_point(&cfg, 1, 100.0).unwrap());
    }

    #[test]
    fn perfect_prior_point_near_bound() {
        let p = run_point(&small_config(200, 2000), 0, 1000.0).unwrap();
        assert!(p.reliable);
        assert!(p.ell < 1e-9);
        assert!((p.crb - 1.0 / (8.0 * 1e6)).abs() < 1e-15);
        assert!(p.ratio() > 0.7 && p.ratio() < 1.5, "ratio {}", p.ratio());
    }

    #[test]
    fn doubling_samples_halves_variance() {
        let a = run_point(&small_config(400, 1000), 0, 1000.0).unwrap();
        let b = run_point(&small_config(400, 2000), 0, 1000.0).unwrap();
        let q = a.per_estimate_variance / b.per_estimate_variance;
        assert!(q > 1.6 && q < 2.5, "{q}");
    }

    #[test]
    fn scaling_grid_is_validated() {
        let mut cfg = small_config(4, 50);
        cfg.photon_numbers = vec![100.0, 1000.0];
        assert!(scaling_experiment(&cfg).is_err());
        cfg.photon_numbers = vec![100.0, 200.0, 500.0];
        assert!(scaling_experiment(&cfg).is_err());
        cfg.photon_numbers = vec![100.0, 1000.0, 10000.0];
        cfg.k = 0.0;
        assert!(scaling_experiment(&cfg).is_err());
    }

    #[test]
    fn fit_recovers_power_law() {
        let xs = [1e2f64, 1e3, 1e4];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-2.0)).collect();
        let (s, c) = fit_loglog(&xs, &ys);
        assert!((s + 2.0).abs() < 1e-12 && (c - 3f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn csv_layout() {
        let report = scaling_experiment(&small_config(8, 100)).unwrap();
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "N,variance,crb,ratio,unconverged");
        assert_eq!(lines[1..4].iter().filter(|l| l.split(',').count() == 5).count(), 3);
        assert!(lines.last().unwrap().starts_with("# slope="));
    }

    #[test]
    fn prior_probe_examples() {
        let s = two_channel();
        let rows = prior_sufficiency_probe(&s, &[1e2, 1e3], 0.0, 20, PriorNoise::ShotNoise, 1).unwrap();
        assert!(rows.iter().all(|r| r.max_scaled_deficit <= 1e-10 * r.mean_photons));
        let grid = [1e2, 1e3, 1e4, 1e5];
        let rows = prior_sufficiency_probe(&s, &grid, 1.0, 200, PriorNoise::ShotNoise, 1).unwrap();
        let maxes: Vec<f64> = rows.iter().map(|r| r.max_scaled_deficit).collect();
        let hi = maxes.iter().cloned().fold(0.0, f64::max);
        let lo = maxes.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(hi / lo < 3.0, "{maxes:?}");
        let rows = prior_sufficiency_probe(&s, &grid, 0.05, 200, PriorNoise::Fixed, 1).unwrap();
        let means: Vec<f64> = rows.iter().map(|r| r.mean_scaled_deficit).collect();
        let (slope, _) = fit_loglog(&grid, &means);
        assert!((slope - 1.0).abs() < 0.05, "{slope}");
    }
}
