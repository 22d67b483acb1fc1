//! Passive linear networks: scattering matrices, their composition and the
//! single-photon transition amplitude between one input and one output port.
//!
//! Channels are 1-based everywhere in the public interface. Stages listed in
//! traversal order compose right-to-left, so `[a, b, c]` yields `c · b · a`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::Real;

/// M×M unitary scattering matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary<T> {
    matrix: CMatrix<T>,
}

pub(crate) fn channel_index(index: usize, dim: usize) -> Result<usize> {
    if index == 0 || index > dim {
        Err(Error::ChannelIndex { index, dim })
    } else {
        Ok(index - 1)
    }
}

impl<T: Real> Unitary<T> {
    /// Accept a square matrix if `‖U†U − I‖_max` is within the scalar's
    /// unitarity tolerance.
    pub fn new(matrix: CMatrix<T>) -> Result<Self> {
        Self::with_tolerance(matrix, T::unitarity_tol())
    }

    pub fn with_tolerance(matrix: CMatrix<T>, tol: T) -> Result<Self> {
        if matrix.rows() != matrix.cols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.rows(),
                found: matrix.cols(),
            });
        }
        if matrix.rows() == 0 {
            return Err(Error::InvalidArgument("unitary of dimension 0".into()));
        }
        let deviation = unitarity_deviation(&matrix);
        if !(deviation <= tol) {
            return Err(Error::NotUnitary {
                deviation: deviation.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self { matrix })
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMatrix<T>) -> Self {
        debug_assert!(unitarity_deviation(&matrix) <= T::acceptance_tol());
        Self { matrix }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: CMatrix::identity(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.matrix
    }

    /// Entry at 1-based `(row, col)`.
    pub fn entry(&self, row: usize, col: usize) -> Result<Complex<T>> {
        let r = channel_index(row, self.dim())?;
        let c = channel_index(col, self.dim())?;
        Ok(self.matrix[(r, c)])
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
        }
    }

    /// `self · rhs`, i.e. `rhs` is traversed first.
    pub fn then_after(&self, rhs: &Self) -> Result<Self> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: rhs.dim(),
            });
        }
        Ok(Self {
            matrix: self.matrix.matmul(&rhs.matrix),
        })
    }

    /// `‖U†U − I‖_max`.
    pub fn unitarity_error(&self) -> T {
        unitarity_deviation(&self.matrix)
    }

    /// Embed this `k×k` unitary into a `dim×dim` identity, mapping local
    /// channel `a` onto global channel `channels[a]` (1-based).
    pub fn embed(&self, dim: usize, channels: &[usize]) -> Result<Self> {
        if channels.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: channels.len(),
            });
        }
        let idx = channels
            .iter()
            .map(|&c| channel_index(c, dim))
            .collect::<Result<Vec<_>>>()?;
        for (a, &ia) in idx.iter().enumerate() {
            if idx[..a].contains(&ia) {
                return Err(Error::InvalidArgument(format!("channel {} used twice", ia + 1)));
            }
        }
        let mut m = CMatrix::identity(dim);
        for (a, &ia) in idx.iter().enumerate() {
            for (b, &ib) in idx.iter().enumerate() {
                m[(ia, ib)] = self.matrix[(a, b)];
            }
        }
        Ok(Self { matrix: m })
    }
}

fn unitarity_deviation<T: Real>(m: &CMatrix<T>) -> T {
    let gram = m.adjoint().matmul(m);
    gram.max_abs_diff(&CMatrix::identity(m.rows()))
}

/// `e^{iφσ_y}` acting on channels `(i, j)` of an M-channel network; the
/// block is the real rotation `[[cos φ, sin φ], [−sin φ, cos φ]]`.
pub fn beam_splitter<T: Real>(dim: usize, i: usize, j: usize, angle: T) -> Result<Unitary<T>> {
    let a = channel_index(i, dim)?;
    let b = channel_index(j, dim)?;
    if a == b {
        return Err(Error::DegenerateChannelPair(i, j));
    }
    let (s, c) = angle.sin_cos();
    let mut m = CMatrix::identity(dim);
    m[(a, a)] = Complex::new(c, T::zero());
    m[(a, b)] = Complex::new(s, T::zero());
    m[(b, a)] = Complex::new(-s, T::zero());
    m[(b, b)] = Complex::new(c, T::zero());
    Ok(Unitary::from_matrix_unchecked(m))
}

/// `diag(e^{iλ_1}, …, e^{iλ_M})`.
pub fn phase_shift<T: Real>(phases: &[T]) -> Result<Unitary<T>> {
    if phases.is_empty() {
        return Err(Error::InvalidArgument("phase shift needs at least one channel".into()));
    }
    let diag: Vec<_> = phases.iter().map(|&l| Complex::from_polar(T::one(), l)).collect();
    Ok(Unitary::from_matrix_unchecked(CMatrix::from_diagonal(&diag)))
}

/// Phase `phase` on a single channel of an M-channel network.
pub fn single_phase<T: Real>(dim: usize, channel: usize, phase: T) -> Result<Unitary<T>> {
    let c = channel_index(channel, dim)?;
    let mut phases = vec![T::zero(); dim];
    phases[c] = phase;
    phase_shift(&phases)
}

/// Product of stages in traversal order: the first listed acts first.
pub fn compose<T: Real>(stages: &[Unitary<T>]) -> Result<Unitary<T>> {
    let (first, rest) = stages.split_first().ok_or(Error::EmptyComposition)?;
    let mut acc = first.clone();
    for stage in rest {
        acc = stage.then_after(&acc)?;
    }
    Ok(acc)
}

/// Single-photon transition `in_ch → out_ch`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionResult<T> {
    pub chi: Complex<T>,
    pub prob: T,
    /// Full-quadrant argument of `chi`; `None` when the probability is too
    /// small for the phase to mean anything.
    pub phase: Option<T>,
}

impl<T: Real> TransitionResult<T> {
    pub fn from_amplitude(chi: Complex<T>) -> Self {
        let prob = chi.norm_sqr();
        let phase = if prob < T::phase_floor() {
            None
        } else {
            Some(chi.im.atan2(chi.re))
        };
        Self { chi, prob, phase }
    }

    /// Phase, or an error if it is undefined.
    pub fn phase_checked(&self) -> Result<T> {
        self.phase
            .ok_or_else(|| Error::InvalidArgument("transition probability too small for a phase".into()))
    }
}

pub fn transition<T: Real>(u: &Unitary<T>, in_ch: usize, out_ch: usize) -> Result<TransitionResult<T>> {
    Ok(TransitionResult::from_amplitude(u.entry(out_ch, in_ch)?))
}

/// Angle or phase of a network element: a constant, or `scale·φ_index + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Angle<T> {
    Fixed(T),
    /// 1-based index into the parameter vector.
    Bound {
        index: usize,
        scale: T,
        offset: T,
    },
}

impl<T: Real> Angle<T> {
    pub fn param(index: usize) -> Self {
        Angle::Bound {
            index,
            scale: T::one(),
            offset: T::zero(),
        }
    }

    fn resolve(&self, phi: &[T]) -> Result<T> {
        match *self {
            Angle::Fixed(v) => Ok(v),
            Angle::Bound { index, scale, offset } => {
                let i = index
                    .checked_sub(1)
                    .filter(|&i| i < phi.len())
                    .ok_or(Error::ParameterIndex {
                        index,
                        count: phi.len(),
                    })?;
                Ok(scale * phi[i] + offset)
            }
        }
    }

    fn bound_index(&self) -> Option<usize> {
        match *self {
            Angle::Fixed(_) => None,
            Angle::Bound { index, .. } => Some(index),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NetworkElement<T> {
    BeamSplitter { channels: (usize, usize), angle: Angle<T> },
    PhaseShift { channel: usize, phase: Angle<T> },
    Raw(Unitary<T>),
}

impl<T: Real> NetworkElement<T> {
    fn unitary(&self, dim: usize, phi: &[T]) -> Result<Unitary<T>> {
        match self {
            NetworkElement::BeamSplitter {
                channels: (i, j),
                angle,
            } => beam_splitter(dim, *i, *j, angle.resolve(phi)?),
            NetworkElement::PhaseShift { channel, phase } => single_phase(dim, *channel, phase.resolve(phi)?),
            NetworkElement::Raw(u) => {
                if u.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: u.dim(),
                    });
                }
                Ok(u.clone())
            }
        }
    }
}

/// Network whose element angles may depend on a parameter vector `φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamNetwork<T> {
    dim: usize,
    num_params: usize,
    layout: Vec<NetworkElement<T>>,
}

impl<T: Real> ParamNetwork<T> {
    /// Validates channel indices and parameter bindings up front so that
    /// `evaluate` can only fail on a wrong-length `φ`.
    pub fn new(dim: usize, num_params: usize, layout: Vec<NetworkElement<T>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("network dimension must be positive".into()));
        }
        for el in &layout {
            let bound = match el {
                NetworkElement::BeamSplitter {
                    channels: (i, j),
                    angle,
                } => {
                    channel_index(*i, dim)?;
                    channel_index(*j, dim)?;
                    if i == j {
                        return Err(Error::DegenerateChannelPair(*i, *j));
                    }
                    angle.bound_index()
                }
                NetworkElement::PhaseShift { channel, phase } => {
                    channel_index(*channel, dim)?;
                    phase.bound_index()
                }
                NetworkElement::Raw(u) => {
                    if u.dim() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            found: u.dim(),
                        });
                    }
                    None
                }
            };
            if let Some(index) = bound {
                if index == 0 || index > num_params {
                    return Err(Error::ParameterIndex {
                        index,
                        count: num_params,
                    });
                }
            }
        }
        Ok(Self {
            dim,
            num_params,
            layout,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn layout(&self) -> &[NetworkElement<T>] {
        &self.layout
    }

    pub fn evaluate(&self, phi: &[T]) -> Result<Unitary<T>> {
        if phi.len() != self.num_params {
            return Err(Error::ParameterLength {
                expected: self.num_params,
                found: phi.len(),
            });
        }
        let mut acc = Unitary::identity(self.dim);
        for el in &self.layout {
            acc = el.unitary(self.dim, phi)?.then_after(&acc)?;
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI};

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn beam_splitter_examples() {
        let id = beam_splitter(2, 1, 2, 0.0).unwrap();
        assert_eq!(id.matrix(), &CMatrix::identity(2));

        let quarter = beam_splitter(2, 1, 2, FRAC_PI_2).unwrap();
        let expect = CMatrix::from_row_major(2, 2, vec![c(0., 0.), c(1., 0.), c(-1., 0.), c(0., 0.)]);
        assert!(quarter.matrix().max_abs_diff(&expect) < 1e-15);

        let balanced = beam_splitter(2, 1, 2, FRAC_PI_4).unwrap();
        let h = FRAC_1_SQRT_2;
        let expect = CMatrix::from_row_major(2, 2, vec![c(h, 0.), c(h, 0.), c(-h, 0.), c(h, 0.)]);
        assert!(balanced.matrix().max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn beam_splitter_rejects_bad_channels() {
        assert_eq!(
            beam_splitter(2, 1, 1, 0.3).unwrap_err(),
            Error::DegenerateChannelPair(1, 1)
        );
        assert_eq!(
            beam_splitter(2, 0, 1, 0.3).unwrap_err(),
            Error::ChannelIndex { index: 0, dim: 2 }
        );
        assert_eq!(
            beam_splitter(2, 1, 3, 0.3).unwrap_err(),
            Error::ChannelIndex { index: 3, dim: 2 }
        );
    }

    #[test]
    fn beam_splitter_identity_outside_block() {
        let u = beam_splitter(4, 2, 4, 0.7).unwrap();
        assert_eq!(u.entry(1, 1).unwrap(), c(1., 0.));
        assert_eq!(u.entry(3, 3).unwrap(), c(1., 0.));
        assert_eq!(u.entry(1, 2).unwrap(), c(0., 0.));
        assert!((u.entry(2, 4).unwrap() - c(0.7f64.sin(), 0.)).norm() < 1e-15);
    }

    #[test]
    fn phase_shift_examples() {
        assert_eq!(phase_shift(&[0.0, 0.0]).unwrap().matrix(), &CMatrix::identity(2));
        let u = phase_shift(&[PI, 0.0]).unwrap();
        assert!(
            u.matrix()
                .max_abs_diff(&CMatrix::from_diagonal(&[c(-1., 0.), c(1., 0.)]))
                < 1e-15
        );
        let u = phase_shift(&[FRAC_PI_2, -FRAC_PI_2]).unwrap();
        assert!(
            u.matrix()
                .max_abs_diff(&CMatrix::from_diagonal(&[c(0., 1.), c(0., -1.)]))
                < 1e-15
        );
    }

    #[test]
    fn compose_examples() {
        let id = Unitary::<f64>::identity(3);
        assert_eq!(compose(&[id.clone(), id.clone()]).unwrap(), id);

        let u = compose(&[
            beam_splitter(3, 1, 3, 0.4).unwrap(),
            phase_shift(&[0.1, 0.2, 0.3]).unwrap(),
        ])
        .unwrap();
        let back = compose(&[u.clone(), u.adjoint()]).unwrap();
        assert!(back.matrix().max_abs_diff(&CMatrix::identity(3)) < 1e-12);

        // rotation composition oracle: angles add on a shared channel pair
        let ab = compose(&[
            beam_splitter(2, 1, 2, 0.3).unwrap(),
            beam_splitter(2, 1, 2, 0.5).unwrap(),
        ])
        .unwrap();
        let (s, co) = 0.8f64.sin_cos();
        let expect = CMatrix::from_row_major(2, 2, vec![c(co, 0.), c(s, 0.), c(-s, 0.), c(co, 0.)]);
        assert!(ab.matrix().max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn compose_order_is_traversal_order() {
        let a = beam_splitter(2, 1, 2, 0.3).unwrap();
        let b = phase_shift(&[0.9, 0.0]).unwrap();
        let ab = compose(&[a.clone(), b.clone()]).unwrap();
        assert!(ab.matrix().max_abs_diff(&b.matrix().matmul(a.matrix())) < 1e-15);
    }

    #[test]
    fn compose_errors() {
        assert_eq!(compose::<f64>(&[]).unwrap_err(), Error::EmptyComposition);
        let err = compose(&[Unitary::<f64>::identity(2), Unitary::identity(3)]).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 3, found: 2 });
    }

    #[test]
    fn transition_examples() {
        let t = transition(&Unitary::<f64>::identity(2), 1, 1).unwrap();
        assert_eq!(t.chi, c(1., 0.));
        assert_eq!(t.prob, 1.0);
        assert_eq!(t.phase, Some(0.0));

        let u = phase_shift(&[FRAC_PI_3, 0.0]).unwrap();
        let t = transition(&u, 1, 1).unwrap();
        assert!((t.phase.unwrap() - FRAC_PI_3).abs() < 1e-15);
        assert!((t.prob - 1.0).abs() < 1e-15);

        let t = transition(&beam_splitter(2, 1, 2, FRAC_PI_4).unwrap(), 1, 1).unwrap();
        assert!((t.prob - 0.5).abs() < 1e-15);
        assert_eq!(t.phase, Some(0.0));
    }

    #[test]
    fn transition_phase_undefined_for_dark_port() {
        let u = beam_splitter(2, 1, 2, FRAC_PI_2).unwrap();
        let t = transition(&u, 1, 1).unwrap();
        assert!(t.prob < 1e-15);
        assert_eq!(t.phase, None);
        assert!(t.phase_checked().is_err());
    }

    #[test]
    fn atan2_phase_agrees_with_ratio_form_when_real_part_positive() {
        for &(re, im) in &[(0.3, 0.2), (0.9, -0.4), (0.01, 0.5)] {
            let t = TransitionResult::from_amplitude(c(re, im));
            assert!((t.phase.unwrap() - (im / re).atan()).abs() < 1e-15);
        }
        // outside Re χ > 0 the ratio form loses the quadrant
        let t = TransitionResult::from_amplitude(c(-0.5, 0.5));
        assert!((t.phase.unwrap() - 3.0 * FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn raw_matrix_must_be_unitary() {
        let m = CMatrix::from_row_major(2, 2, vec![c(1., 0.), c(0.1, 0.), c(0., 0.), c(1., 0.)]);
        assert!(matches!(Unitary::new(m), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn evaluate_examples() {
        let fixed = ParamNetwork::new(
            2,
            0,
            vec![
                NetworkElement::BeamSplitter {
                    channels: (1, 2),
                    angle: Angle::Fixed(0.2),
                },
                NetworkElement::PhaseShift {
                    channel: 2,
                    phase: Angle::Fixed(0.5),
                },
            ],
        )
        .unwrap();
        let expect = compose(&[beam_splitter(2, 1, 2, 0.2).unwrap(), single_phase(2, 2, 0.5).unwrap()]).unwrap();
        assert_eq!(fixed.evaluate(&[]).unwrap(), expect);

        let one = ParamNetwork::new(
            1,
            1,
            vec![NetworkElement::PhaseShift {
                channel: 1,
                phase: Angle::param(1),
            }],
        )
        .unwrap();
        let u = one.evaluate(&[0.7]).unwrap();
        assert!((u.entry(1, 1).unwrap() - Complex::from_polar(1.0, 0.7)).norm() < 1e-15);

        assert_eq!(
            one.evaluate(&[0.1, 0.2]).unwrap_err(),
            Error::ParameterLength { expected: 1, found: 2 }
        );
    }

    #[test]
    fn network_rejects_unbound_parameter() {
        let err = ParamNetwork::<f64>::new(
            2,
            1,
            vec![NetworkElement::PhaseShift {
                channel: 1,
                phase: Angle::param(2),
            }],
        )
        .unwrap_err();
        assert_eq!(err, Error::ParameterIndex { index: 2, count: 1 });
    }

    #[test]
    fn embed_places_block() {
        let bs = beam_splitter(2, 1, 2, 0.4).unwrap();
        let big = bs.embed(4, &[3, 1]).unwrap();
        assert_eq!(big.entry(3, 3).unwrap(), bs.entry(1, 1).unwrap());
        assert_eq!(big.entry(3, 1).unwrap(), bs.entry(1, 2).unwrap());
        assert_eq!(big.entry(2, 2).unwrap(), c(1., 0.));
    }

    #[test]
    fn works_in_single_precision() {
        let u = compose(&[
            beam_splitter(3, 1, 2, 0.3f32).unwrap(),
            phase_shift(&[0.1f32, 0.2, 0.3]).unwrap(),
        ])
        .unwrap();
        assert!(u.unitarity_error() < 1e-6);
    }
}
