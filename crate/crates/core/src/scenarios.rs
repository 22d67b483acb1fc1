//! The two worked interferometers: a two-channel network with one unknown
//! beam splitter and two unknown phases, and an M-channel network whose
//! refocused phase is a weighted sum of the unknowns. Both are tuned from a
//! coarse prior `φ_cl`.

use num_complex::Complex;
use rand::Rng;

use crate::error::{Error, Result};
use crate::homodyne::stream_rng;
use crate::linalg::CMatrix;
use crate::network::{beam_splitter, compose, phase_shift, transition, ParamNetwork, TransitionResult, Unitary};
use crate::scalar::{wrap_angle, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct PriorKnowledge<T> {
    pub phi_true: Vec<T>,
    pub phi_cl: Vec<T>,
}

impl<T: Real> PriorKnowledge<T> {
    pub fn exact(phi: &[T]) -> Self {
        Self {
            phi_true: phi.to_vec(),
            phi_cl: phi.to_vec(),
        }
    }

    /// `δφ = φ − φ_cl`.
    pub fn delta(&self) -> Vec<T> {
        self.phi_true.iter().zip(&self.phi_cl).map(|(&a, &b)| a - b).collect()
    }
}

/// `φ_cl = φ − δ` with each `δᵢ ~ Uniform[−c/√N, c/√N]`.
pub fn shot_noise_prior_with<T: Real, R: Rng + ?Sized>(
    phi_true: &[T],
    mean_photons: T,
    scale: T,
    rng: &mut R,
) -> Result<PriorKnowledge<T>> {
    if !(mean_photons > T::zero()) {
        return Err(Error::NonPositivePhotonNumber(
            mean_photons.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let half_width = scale / mean_photons.sqrt();
    let phi_cl = phi_true
        .iter()
        .map(|&p| {
            let u = T::lit(rng.random::<f64>());
            p - half_width * (T::lit(2.0) * u - T::one())
        })
        .collect();
    Ok(PriorKnowledge {
        phi_true: phi_true.to_vec(),
        phi_cl,
    })
}

pub fn shot_noise_prior<T: Real>(phi_true: &[T], mean_photons: T, scale: T, seed: u64) -> Result<PriorKnowledge<T>> {
    shot_noise_prior_with(phi_true, mean_photons, scale, &mut stream_rng(seed, 0))
}

/// Input, parameter-dependent and output stages of one setup.
#[derive(Debug, Clone, PartialEq)]
pub struct Stages<T> {
    pub f_in: Unitary<T>,
    pub u_phi: Unitary<T>,
    pub f_out: Unitary<T>,
}

impl<T: Real> Stages<T> {
    /// `F_out · U_φ · F_in`.
    pub fn composite(&self) -> Result<Unitary<T>> {
        compose(&[self.f_in.clone(), self.u_phi.clone(), self.f_out.clone()])
    }

    /// First-port to first-port transition of the composite.
    pub fn transition(&self) -> Result<TransitionResult<T>> {
        transition(&self.composite()?, 1, 1)
    }
}

/// `ω = ½ atan2(cos φ_cl,1, sin φ_cl,1 · cos Δα)`; `+π/4` where both
/// arguments vanish.
pub fn omega_from_prior<T: Real>(phi_cl_1: T, delta_alpha: T) -> T {
    let y = phi_cl_1.cos();
    let x = phi_cl_1.sin() * delta_alpha.cos();
    if y.hypot(x) <= T::unitarity_tol() {
        T::FRAC_PI_4()
    } else {
        y.atan2(x) / T::lit(2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoChannelConfig<T> {
    /// `(φ₁, φ₂, φ₃)`: splitter angle and the two arm phases.
    pub phi: [T; 3],
    pub phi_cl: [T; 3],
    pub alpha1: T,
    pub alpha2: T,
}

impl<T: Real> TwoChannelConfig<T> {
    pub fn new(phi: [T; 3], phi_cl: [T; 3], alpha1: T, alpha2: T) -> Self {
        Self {
            phi,
            phi_cl,
            alpha1,
            alpha2,
        }
    }

    /// Symmetric control phases `α₁ = Δα/2`, `α₂ = −Δα/2`.
    pub fn with_delta_alpha(phi: [T; 3], phi_cl: [T; 3], delta_alpha: T) -> Self {
        let half = delta_alpha / T::lit(2.0);
        Self {
            phi,
            phi_cl,
            alpha1: half,
            alpha2: -half,
        }
    }

    pub fn delta_alpha(&self) -> T {
        self.alpha1 - self.alpha2
    }

    pub fn omega(&self) -> T {
        omega_from_prior(self.phi_cl[0], self.delta_alpha())
    }

    pub fn delta(&self) -> [T; 3] {
        [
            self.phi[0] - self.phi_cl[0],
            self.phi[1] - self.phi_cl[1],
            self.phi[2] - self.phi_cl[2],
        ]
    }
}

/// `F_in = Υ(α₁, α₂) U_BS(ω)`, `U_φ = Υ(φ₂, φ₃) U_BS(φ₁)`,
/// `F_out = U_BS(ω − π/2) Υ(−α₁ − φ_cl,2, −α₂ − φ_cl,3)`.
///
/// The photon meets the unknown splitter before the unknown phases; with
/// the opposite order the stages do not refocus.
pub fn build_two_channel<T: Real>(config: &TwoChannelConfig<T>) -> Result<Stages<T>> {
    let omega = config.omega();
    let [p1, p2, p3] = config.phi;
    let f_in = compose(&[
        beam_splitter(2, 1, 2, omega)?,
        phase_shift(&[config.alpha1, config.alpha2])?,
    ])?;
    let u_phi = compose(&[beam_splitter(2, 1, 2, p1)?, phase_shift(&[p2, p3])?])?;
    let f_out = compose(&[
        phase_shift(&[-config.alpha1 - config.phi_cl[1], -config.alpha2 - config.phi_cl[2]])?,
        beam_splitter(2, 1, 2, omega - T::FRAC_PI_2())?,
    ])?;
    Ok(Stages { f_in, u_phi, f_out })
}

/// Closed-form acquired phase of the two-channel setup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormPhase<T> {
    /// `(δφ₂+δφ₃)/2 + atan2(num, den)`, wrapped to `(−π, π]`.
    pub quadrant_aware: T,
    /// `(δφ₂+δφ₃)/2 + arctan(num/den)` with the single-argument arctangent.
    pub principal: T,
    /// `true` when the two differ, i.e. `den < 0`.
    pub branch_mismatch: bool,
}

pub fn f_two_channel_closed<T: Real>(config: &TwoChannelConfig<T>) -> Result<ClosedFormPhase<T>> {
    let [p1, _, _] = config.phi;
    let cl1 = config.phi_cl[0];
    let [_, d2, d3] = config.delta();
    let da = config.delta_alpha();
    let half = T::lit(0.5);
    let mean = (d2 + d3) * half;
    let diff = (d2 - d3) * half;
    let root = (T::one() - (cl1.sin() * da.sin()).powi(2)).max(T::zero()).sqrt();
    let num = p1.sin() * (da - diff).sin() * root;
    let den = p1.cos() * cl1.cos() * diff.cos() + p1.sin() * cl1.sin() * da.cos() * (da - diff).cos();
    if den.abs() <= T::unitarity_tol() {
        return Err(Error::SingularDenominator);
    }
    Ok(ClosedFormPhase {
        quadrant_aware: wrap_angle(mean + num.atan2(den)),
        principal: mean + (num / den).atan(),
        branch_mismatch: den < T::zero(),
    })
}

/// Real orthogonal matrix with first column `(√ω₁, …, √ω_M)`, built from the
/// Householder reflection that maps `e₁` onto that column.
pub fn complete_unitary_from_weights<T: Real>(weights: &[T]) -> Result<Unitary<T>> {
    validate_weights(weights)?;
    let m = weights.len();
    let target: Vec<T> = weights.iter().map(|w| w.sqrt()).collect();
    let norm2: T = target.iter().map(|&x| x * x).sum();
    let norm = norm2.sqrt();
    let target: Vec<T> = target.iter().map(|&x| x / norm).collect();
    // v = e₁ − a, H = I − 2vvᵀ/|v|²; H e₁ = a
    let mut v = target.iter().map(|&x| -x).collect::<Vec<_>>();
    v[0] = v[0] + T::one();
    let vv: T = v.iter().map(|&x| x * x).sum();
    let matrix = if vv <= T::epsilon() {
        CMatrix::identity(m)
    } else {
        let two = T::lit(2.0);
        CMatrix::from_fn(m, m, |i, j| {
            let delta = if i == j { T::one() } else { T::zero() };
            Complex::new(delta - two * v[i] * v[j] / vv, T::zero())
        })
    };
    Ok(Unitary::from_matrix_unchecked(matrix))
}

fn validate_weights<T: Real>(weights: &[T]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidWeights("no weights".into()));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= T::zero()) || !w.is_finite()) {
        return Err(Error::InvalidWeights(format!("negative or non-finite weight {w}")));
    }
    let total: T = weights.iter().copied().sum();
    if (total - T::one()).abs() > T::unitarity_tol() {
        return Err(Error::InvalidWeights(format!("weights sum to {total}, not 1")));
    }
    Ok(())
}

/// `V = Υ(π/4, −π/4) U_BS(π/4)`, which turns a splitter angle into a pair of
/// opposite phases: `V† U_BS(φ) V = Υ(φ, −φ)`.
pub fn v_gadget<T: Real>() -> Unitary<T> {
    let q = T::FRAC_PI_4();
    compose(&[
        beam_splitter(2, 1, 2, q).expect("valid channels"),
        phase_shift(&[q, -q]).expect("two phases"),
    ])
    .expect("equal dims")
}

/// How the unknown on one channel of the linear-combination network is
/// encoded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelKind<T> {
    /// Single-mode phase shift `e^{iφ}`.
    PhaseShift,
    /// Splitter angle read out through `V† U_BS(φ) V` on a dedicated
    /// auxiliary mode.
    BeamSplitterViaV,
    /// A full two-channel local network (splitter `φ` between phases
    /// `phases`), tuned from `phases_cl` and the splitter prior.
    GeneralizedLocal {
        delta_alpha: T,
        phases: [T; 2],
        phases_cl: [T; 2],
    },
}

impl<T: Real> ChannelKind<T> {
    fn needs_aux(&self) -> bool {
        !matches!(self, ChannelKind::PhaseShift)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearCombConfig<T> {
    pub weights: Vec<T>,
    pub kinds: Vec<ChannelKind<T>>,
    pub phi: Vec<T>,
    pub phi_cl: Vec<T>,
}

impl<T: Real> LinearCombConfig<T> {
    pub fn validate(&self) -> Result<()> {
        validate_weights(&self.weights)?;
        let m = self.weights.len();
        for (name, len) in [
            ("kinds", self.kinds.len()),
            ("phi", self.phi.len()),
            ("phi_cl", self.phi_cl.len()),
        ] {
            if len != m {
                return Err(Error::InvalidArgument(format!(
                    "{name} has {len} entries, weights has {m}"
                )));
            }
        }
        Ok(())
    }

    /// Number of modes in the internal representation: one per weight plus
    /// one auxiliary mode per gadget channel.
    pub fn internal_dim(&self) -> usize {
        self.weights.len() + self.kinds.iter().filter(|k| k.needs_aux()).count()
    }

    /// `L(φ) = Σ ωᵢ gᵢ(φ)` where `gᵢ` is the local phase of channel `i`
    /// (`φᵢ` itself for phase shifts and V gadgets).
    pub fn target(&self) -> Result<T> {
        self.target_at(&self.phi, &self.phi_cl)
    }

    fn target_at(&self, phi: &[T], phi_cl: &[T]) -> Result<T> {
        let mut total = T::zero();
        for i in 0..self.weights.len() {
            total = total + self.weights[i] * local_phase(&self.kinds[i], phi[i], phi_cl[i])?;
        }
        Ok(total)
    }
}

fn local_phase<T: Real>(kind: &ChannelKind<T>, phi: T, phi_cl: T) -> Result<T> {
    match *kind {
        ChannelKind::PhaseShift | ChannelKind::BeamSplitterViaV => Ok(phi),
        ChannelKind::GeneralizedLocal {
            delta_alpha,
            phases,
            phases_cl,
        } => {
            let block = build_generalized_local(
                delta_alpha,
                [phi, phases[0], phases[1]],
                [phi_cl, phases_cl[0], phases_cl[1]],
            )?;
            transition(&block, 1, 1)?.phase_checked()
        }
    }
}

/// Two-channel block of [`build_two_channel`] with `α₁ = Δα/2`,
/// `α₂ = −Δα/2`, used as a local network inside a linear combination.
pub fn build_generalized_local<T: Real>(delta_alpha: T, phi_local: [T; 3], phi_cl_local: [T; 3]) -> Result<Unitary<T>> {
    build_two_channel(&TwoChannelConfig::with_delta_alpha(
        phi_local,
        phi_cl_local,
        delta_alpha,
    ))?
    .composite()
}

/// `F_in` scatters port 1 with `|F_in,i1|² = ωᵢ`; `U_φ` applies each
/// channel's encoding; `F_out = Υ(L_cl, 0, …) F_in† Υ(−g(φ_cl))`.
pub fn build_linear_comb<T: Real>(config: &LinearCombConfig<T>) -> Result<Stages<T>> {
    config.validate()?;
    let m = config.weights.len();
    let dim = config.internal_dim();
    let primary: Vec<usize> = (1..=m).collect();

    let f_in = complete_unitary_from_weights(&config.weights)?.embed(dim, &primary)?;

    let mut blocks = Vec::with_capacity(m);
    let mut next_aux = m + 1;
    for (i, kind) in config.kinds.iter().enumerate() {
        let port = i + 1;
        let phi = config.phi[i];
        let block = match *kind {
            ChannelKind::PhaseShift => crate::network::single_phase(dim, port, phi)?,
            ChannelKind::BeamSplitterViaV => {
                let v = v_gadget::<T>();
                let local = compose(&[v.clone(), beam_splitter(2, 1, 2, phi)?, v.adjoint()])?;
                let aux = next_aux;
                next_aux += 1;
                local.embed(dim, &[port, aux])?
            }
            ChannelKind::GeneralizedLocal {
                delta_alpha,
                phases,
                phases_cl,
            } => {
                let local = build_generalized_local(
                    delta_alpha,
                    [phi, phases[0], phases[1]],
                    [config.phi_cl[i], phases_cl[0], phases_cl[1]],
                )?;
                let aux = next_aux;
                next_aux += 1;
                local.embed(dim, &[port, aux])?
            }
        };
        blocks.push(block);
    }
    let u_phi = compose(&blocks)?;

    let cl_phases = (0..m)
        .map(|i| local_phase(&config.kinds[i], config.phi_cl[i], config.phi_cl[i]))
        .collect::<Result<Vec<_>>>()?;
    let l_cl: T = config.weights.iter().zip(&cl_phases).map(|(&w, &g)| w * g).sum();
    let mut undo = vec![T::zero(); dim];
    for (slot, g) in undo.iter_mut().zip(&cl_phases) {
        *slot = -*g;
    }
    let mut global = vec![T::zero(); dim];
    global[0] = l_cl;
    let f_out = compose(&[phase_shift(&undo)?, f_in.adjoint(), phase_shift(&global)?])?;
    Ok(Stages { f_in, u_phi, f_out })
}

/// Any of the supported setups, with the true parameter vector. Stages are
/// rebuilt from a prior on demand.
#[derive(Debug, Clone, PartialEq)]
pub enum Scenario<T> {
    TwoChannel {
        phi: [T; 3],
        alpha1: T,
        alpha2: T,
    },
    LinearComb {
        weights: Vec<T>,
        kinds: Vec<ChannelKind<T>>,
        phi: Vec<T>,
    },
    /// A user network with no auxiliary stages; the prior is ignored.
    Network {
        network: ParamNetwork<T>,
        phi: Vec<T>,
    },
}

impl<T: Real> Scenario<T> {
    pub fn phi_true(&self) -> Vec<T> {
        match self {
            Scenario::TwoChannel { phi, .. } => phi.to_vec(),
            Scenario::LinearComb { phi, .. } => phi.clone(),
            Scenario::Network { phi, .. } => phi.clone(),
        }
    }

    pub fn num_params(&self) -> usize {
        match self {
            Scenario::TwoChannel { .. } => 3,
            Scenario::LinearComb { phi, .. } => phi.len(),
            Scenario::Network { network, .. } => network.num_params(),
        }
    }

    pub fn uses_prior(&self) -> bool {
        !matches!(self, Scenario::Network { .. })
    }

    /// Stages tuned from `phi_cl`, evaluated at parameters `phi`.
    pub fn stages(&self, phi: &[T], phi_cl: &[T]) -> Result<Stages<T>> {
        let n = self.num_params();
        for v in [phi, phi_cl] {
            if v.len() != n && !(v.is_empty() && !self.uses_prior()) {
                return Err(Error::ParameterLength {
                    expected: n,
                    found: v.len(),
                });
            }
        }
        match self {
            Scenario::TwoChannel { alpha1, alpha2, .. } => build_two_channel(&TwoChannelConfig::new(
                [phi[0], phi[1], phi[2]],
                [phi_cl[0], phi_cl[1], phi_cl[2]],
                *alpha1,
                *alpha2,
            )),
            Scenario::LinearComb { weights, kinds, .. } => build_linear_comb(&LinearCombConfig {
                weights: weights.clone(),
                kinds: kinds.clone(),
                phi: phi.to_vec(),
                phi_cl: phi_cl.to_vec(),
            }),
            Scenario::Network { network, .. } => {
                let dim = network.dim();
                Ok(Stages {
                    f_in: Unitary::identity(dim),
                    u_phi: network.evaluate(phi)?,
                    f_out: Unitary::identity(dim),
                })
            }
        }
    }

    pub fn composite(&self, phi: &[T], phi_cl: &[T]) -> Result<Unitary<T>> {
        self.stages(phi, phi_cl)?.composite()
    }

    pub fn transition(&self, phi: &[T], phi_cl: &[T]) -> Result<TransitionResult<T>> {
        transition(&self.composite(phi, phi_cl)?, 1, 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI};

    #[test]
    fn shot_noise_prior_examples() {
        let p = shot_noise_prior(&[1.0, 2.0], 100.0, 0.0, 3).unwrap();
        assert_eq!(p.phi_cl, vec![1.0, 2.0]);
        let p = shot_noise_prior(&[1.0f64, 2.0], 100.0, 0.5, 3).unwrap();
        assert!(p.delta().iter().all(|d| d.abs() <= 0.05));
        assert!(shot_noise_prior(&[1.0], 0.0, 1.0, 0).is_err());
    }

    #[test]
    fn shot_noise_prior_moment() {
        // Var Uniform[−a, a] = a²/3
        let (n, c) = (400.0, 1.0);
        let mut rng = stream_rng(11, 0);
        let draws: Vec<f64> = (0..10_000)
            .map(|_| shot_noise_prior_with(&[0.0], n, c, &mut rng).unwrap().delta()[0])
            .collect();
        let var = draws.iter().map(|d| d * d).sum::<f64>() / draws.len() as f64;
        let expect = c * c / (3.0 * n);
        assert!((var - expect).abs() < 0.05 * expect, "{var} vs {expect}");
    }

    #[test]
    fn omega_examples() {
        assert!((omega_from_prior(FRAC_PI_3, 0.0) - PI / 12.0).abs() < 1e-15);
        assert!((omega_from_prior(FRAC_PI_3, 0.0) - (FRAC_PI_4 - FRAC_PI_3 / 2.0)).abs() < 1e-15);
        for da in [0.0, 0.7, 2.0] {
            assert!((omega_from_prior(0.0, da) - FRAC_PI_4).abs() < 1e-15);
        }
        assert!((omega_from_prior(FRAC_PI_2, FRAC_PI_2) - FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn omega_satisfies_tuning_condition() {
        for &(cl, da) in &[(0.3, 0.2), (1.1, 1.0), (0.7, 2.5)] {
            let w: f64 = omega_from_prior(cl, da);
            let lhs = (2.0 * w).tan() * cl.sin() * da.cos();
            assert!((lhs - cl.cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn two_channel_refocuses_with_exact_prior() {
        let cfg = TwoChannelConfig::new([0.0; 3], [0.0; 3], FRAC_PI_2, 0.0);
        let u = build_two_channel(&cfg).unwrap().composite().unwrap();
        assert!((u.entry(1, 1).unwrap() - Complex::new(1.0, 0.0)).norm() < 1e-12);

        for &(phi, da) in &[
            ([0.7f64, 0.3, -0.2], 0.0),
            ([1.2, -2.0, 0.4], 1.3),
            ([2.5, 0.1, 3.0], 2.9),
        ] {
            let cfg = TwoChannelConfig::new(phi, phi, 0.4 + da, 0.4);
            let stages = build_two_channel(&cfg).unwrap();
            for s in [&stages.f_in, &stages.u_phi, &stages.f_out] {
                assert!(s.unitarity_error() < 1e-12);
            }
            assert!((1.0 - stages.transition().unwrap().prob).abs() < 1e-12);
        }
    }

    #[test]
    fn two_channel_amplitude_matches_expansion() {
        // χ = e^{i(δ₂+δ₃)/2}(cos d sin2ω cosφ₁ + cos(Δα−d) cos2ω sinφ₁ + i sin(Δα−d) sinφ₁)
        let cfg = TwoChannelConfig::new([0.8f64, 0.3, -0.4], [0.77, 0.33, -0.38], 1.1, 0.2);
        let chi = build_two_channel(&cfg).unwrap().transition().unwrap().chi;
        let [_, d2, d3] = cfg.delta();
        let d = (d2 - d3) / 2.0;
        let w = cfg.omega();
        let da = cfg.delta_alpha();
        let p1 = cfg.phi[0];
        let inner = Complex::new(
            d.cos() * (2.0 * w).sin() * p1.cos() + (da - d).cos() * (2.0 * w).cos() * p1.sin(),
            (da - d).sin() * p1.sin(),
        );
        let expect = Complex::from_polar(1.0, (d2 + d3) / 2.0) * inner;
        assert!((chi - expect).norm() < 1e-12);
    }

    #[test]
    fn closed_form_linear_specialisation() {
        let phi = [0.6, 0.2, -0.3];
        let cl = [0.58, 0.21, -0.33];
        let cfg = TwoChannelConfig::with_delta_alpha(phi, cl, FRAC_PI_2);
        assert!((cfg.omega() - FRAC_PI_4).abs() < 1e-12);
        let f = f_two_channel_closed(&cfg).unwrap().quadrant_aware;
        let [_, d2, d3] = cfg.delta();
        assert!((f - (phi[0] + (d2 + d3) / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn closed_form_sine_specialisation_sign() {
        // Δα = 0, δφ₂ = −δφ₃ = λ: the closed form gives −λ sin φ₁ + O(λ³)
        let lam = 0.01f64;
        let phi = [0.7, 0.3, 0.2];
        let cl = [0.7, 0.3 - lam, 0.2 + lam];
        let cfg = TwoChannelConfig::with_delta_alpha(phi, cl, 0.0);
        let closed = f_two_channel_closed(&cfg).unwrap().quadrant_aware;
        let pipeline = build_two_channel(&cfg).unwrap().transition().unwrap().phase.unwrap();
        assert!((closed - pipeline).abs() < 1e-12);
        assert!((closed + lam * 0.7f64.sin()).abs() < 1e-6);
    }

    #[test]
    fn closed_form_zero_deltas_at_zero_delta_alpha() {
        let cfg = TwoChannelConfig::with_delta_alpha([0.9f64, 0.4, 0.1], [0.9, 0.4, 0.1], 0.0);
        assert!(f_two_channel_closed(&cfg).unwrap().quadrant_aware.abs() < 1e-15);
    }

    #[test]
    fn closed_form_flags_singular_denominator() {
        // φ₁ = π/2, Δα = π/2: den = 0
        let cfg = TwoChannelConfig::with_delta_alpha([FRAC_PI_2, 0.0, 0.0], [FRAC_PI_2, 0.0, 0.0], FRAC_PI_2);
        assert_eq!(f_two_channel_closed(&cfg).unwrap_err(), Error::SingularDenominator);
    }

    #[test]
    fn completion_examples() {
        let u = complete_unitary_from_weights(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(u.matrix(), &CMatrix::identity(3));
        let u = complete_unitary_from_weights(&[0.5, 0.5]).unwrap();
        let h = 0.5f64.sqrt();
        assert!((u.entry(1, 1).unwrap().re - h).abs() < 1e-15);
        assert!((u.entry(2, 1).unwrap().re - h).abs() < 1e-15);
        assert!(u.unitarity_error() < 1e-12);
        let w = [0.1f64, 0.25, 0.05, 0.35, 0.25];
        let u = complete_unitary_from_weights(&w).unwrap();
        for (i, wi) in w.iter().enumerate() {
            assert!((u.entry(i + 1, 1).unwrap().norm_sqr() - wi).abs() < 1e-12);
        }
        assert!(u.entry(1, 1).unwrap().re >= 0.0);
    }

    #[test]
    fn completion_rejects_invalid_weights() {
        assert!(complete_unitary_from_weights(&[0.5, 0.6]).is_err());
        assert!(complete_unitary_from_weights(&[1.2, -0.2]).is_err());
        assert!(complete_unitary_from_weights::<f64>(&[]).is_err());
    }

    #[test]
    fn v_gadget_examples() {
        let v = v_gadget::<f64>();
        let conj = |phi: f64| compose(&[v.clone(), beam_splitter(2, 1, 2, phi).unwrap(), v.adjoint()]).unwrap();
        assert!(conj(0.0).matrix().max_abs_diff(&CMatrix::identity(2)) < 1e-15);
        let expect = phase_shift(&[0.9, -0.9]).unwrap();
        assert!(conj(0.9).matrix().max_abs_diff(expect.matrix()) < 1e-12);
        let m = conj(0.4);
        assert!((m.entry(2, 2).unwrap() - Complex::from_polar(1.0, -0.4)).norm() < 1e-12);
    }

    fn lc(weights: Vec<f64>, kinds: Vec<ChannelKind<f64>>, phi: Vec<f64>, phi_cl: Vec<f64>) -> LinearCombConfig<f64> {
        LinearCombConfig {
            weights,
            kinds,
            phi,
            phi_cl,
        }
    }

    #[test]
    fn linear_comb_perfect_prior() {
        let phi = vec![0.3, -1.2, 0.8];
        let cfg = lc(
            vec![0.2, 0.5, 0.3],
            vec![ChannelKind::PhaseShift; 3],
            phi.clone(),
            phi.clone(),
        );
        let t = build_linear_comb(&cfg).unwrap().transition().unwrap();
        let l = 0.2 * 0.3 - 0.5 * 1.2 + 0.3 * 0.8;
        assert!((t.chi - Complex::from_polar(1.0, l)).norm() < 1e-12);
        assert!((1.0 - t.prob).abs() < 1e-12);
    }

    #[test]
    fn linear_comb_recovers_weighted_sum() {
        let phi = vec![0.4, 1.1];
        let cl = vec![0.4 - 0.02, 1.1 + 0.01];
        let cfg = lc(vec![0.3, 0.7], vec![ChannelKind::PhaseShift; 2], phi.clone(), cl);
        let f = build_linear_comb(&cfg).unwrap().transition().unwrap().phase.unwrap();
        assert!((f - (0.3 * phi[0] + 0.7 * phi[1])).abs() <= 1e-4);
    }

    #[test]
    fn linear_comb_probability_expansion() {
        let w = [0.3, 0.7];
        for scale in [0.05, 0.02, 0.01] {
            let delta = [scale, -0.5 * scale];
            let phi = vec![0.4, 1.1];
            let cl: Vec<f64> = phi.iter().zip(&delta).map(|(p, d)| p - d).collect();
            let cfg = lc(
                w.to_vec(),
                vec![ChannelKind::PhaseShift, ChannelKind::BeamSplitterViaV],
                phi,
                cl,
            );
            let p = build_linear_comb(&cfg).unwrap().transition().unwrap().prob;
            let a: f64 = w.iter().zip(&delta).map(|(w, d)| w * d).sum();
            let b: f64 = w.iter().zip(&delta).map(|(w, d)| w * d * d).sum();
            let norm = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
            assert!((p - (1.0 + a * a - b)).abs() <= 10.0 * norm.powi(3));
        }
    }

    #[test]
    fn linear_comb_beam_splitter_channel_uses_aux_mode() {
        let phi = vec![0.2, 0.9];
        let cfg = lc(
            vec![0.5, 0.5],
            vec![ChannelKind::PhaseShift, ChannelKind::BeamSplitterViaV],
            phi.clone(),
            phi,
        );
        assert_eq!(cfg.internal_dim(), 3);
        let stages = build_linear_comb(&cfg).unwrap();
        assert_eq!(stages.u_phi.dim(), 3);
        assert!((1.0 - stages.transition().unwrap().prob).abs() < 1e-12);
    }

    #[test]
    fn linear_comb_rejects_mismatched_lengths() {
        let cfg = lc(
            vec![0.5, 0.5],
            vec![ChannelKind::PhaseShift],
            vec![0.0, 0.0],
            vec![0.0, 0.0],
        );
        assert!(build_linear_comb(&cfg).is_err());
    }

    #[test]
    fn generalized_local_examples() {
        let b = build_generalized_local(0.8f64, [0.6, 0.2, 0.1], [0.6, 0.2, 0.1]).unwrap();
        assert!((1.0 - transition(&b, 1, 1).unwrap().prob).abs() < 1e-12);

        // Δα = π/2 with known zero phases: exactly the V-gadget conjugation
        let phi = 0.55;
        let b = build_generalized_local(FRAC_PI_2, [phi, 0.0, 0.0], [0.5, 0.0, 0.0]).unwrap();
        let v = v_gadget::<f64>();
        let expect = compose(&[v.clone(), beam_splitter(2, 1, 2, phi).unwrap(), v.adjoint()]).unwrap();
        assert!(b.matrix().max_abs_diff(expect.matrix()) < 1e-12);
    }

    #[test]
    fn generalized_local_deficit_is_order_one_over_n() {
        let mut scaled = Vec::new();
        for n in [1e2, 1e3, 1e4] {
            let d = 1.0 / f64::sqrt(n);
            let b = build_generalized_local(0.9, [0.7, 0.3, -0.2], [0.7 - d, 0.3 + d, -0.2 - 0.5 * d]).unwrap();
            scaled.push((1.0 - transition(&b, 1, 1).unwrap().prob) * n);
        }
        let max = scaled.iter().cloned().fold(0.0, f64::max);
        let min = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max < 10.0 && max / min < 1.5, "{scaled:?}");
    }

    #[test]
    fn linear_comb_with_generalized_local_refocuses() {
        let kind = ChannelKind::GeneralizedLocal {
            delta_alpha: 0.7,
            phases: [0.2, -0.1],
            phases_cl: [0.2, -0.1],
        };
        let phi = vec![0.3, 0.9];
        let cfg = lc(vec![0.4, 0.6], vec![ChannelKind::PhaseShift, kind], phi.clone(), phi);
        let t = build_linear_comb(&cfg).unwrap().transition().unwrap();
        assert!((1.0 - t.prob).abs() < 1e-12);
        assert!((t.phase.unwrap() - cfg.target().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn scenario_dispatch() {
        let s = Scenario::TwoChannel {
            phi: [0.5f64, 0.1, 0.2],
            alpha1: 0.3,
            alpha2: -0.2,
        };
        let phi = s.phi_true();
        assert!((1.0 - s.transition(&phi, &phi).unwrap().prob).abs() < 1e-12);
        assert!(s.transition(&phi[..2], &phi).is_err());
    }
}
