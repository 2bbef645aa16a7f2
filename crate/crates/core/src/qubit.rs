//! Exact single-qubit states, rotation gates and overlap probabilities.
//!
//! Conventions used throughout the crate:
//!
//! * `Rz(θ) = diag(e^{-iθ/2}, e^{+iθ/2})`
//! * `Ry(θ) = R(π/2, θ)` and `Rx(θ) = R(0, θ)`
//!
//! where `R(γ, δ)` is the arbitrary-axis rotation of [`arb_rotation`]. With
//! these choices `R(γ, δ) = Rz(γ)·Rx(δ)·Rz(-γ)` holds entrywise, and every
//! observable in the pipeline (an overlap probability) is insensitive to the
//! global phases the convention leaves free. Angles are kept unreduced; all
//! gates are 2π-periodic up to global phase.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerance for the unitarity and normalization invariants.
pub const NORM_TOL: f64 = 1e-12;

/// Normalized single-qubit state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QubitState {
    pub amp0: Complex64,
    pub amp1: Complex64,
}

impl QubitState {
    /// The |0> basis state.
    pub fn zero() -> Self {
        QubitState { amp0: Complex64::new(1.0, 0.0), amp1: Complex64::new(0.0, 0.0) }
    }

    /// The |1> basis state.
    pub fn one() -> Self {
        QubitState { amp0: Complex64::new(0.0, 0.0), amp1: Complex64::new(1.0, 0.0) }
    }

    /// Build a state from raw amplitudes, normalizing them.
    ///
    /// Fails on non-finite amplitudes or a (near-)zero norm.
    pub fn from_amplitudes(amp0: Complex64, amp1: Complex64) -> Result<Self> {
        if !(amp0.re.is_finite() && amp0.im.is_finite() && amp1.re.is_finite() && amp1.im.is_finite())
        {
            return Err(Error::invalid("non-finite amplitude"));
        }
        let n = (amp0.norm_sqr() + amp1.norm_sqr()).sqrt();
        if n < 1e-12 {
            return Err(Error::invalid("zero-norm state"));
        }
        Ok(QubitState { amp0: amp0 / n, amp1: amp1 / n })
    }

    /// |amp0|^2 + |amp1|^2. Equals 1 within `NORM_TOL` for valid states.
    pub fn norm_sqr(&self) -> f64 {
        self.amp0.norm_sqr() + self.amp1.norm_sqr()
    }

    /// Probability of measuring |0>, clamped to [0, 1].
    pub fn p0(&self) -> f64 {
        self.amp0.norm_sqr().clamp(0.0, 1.0)
    }
}

/// 2x2 unitary matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Unitary {
    pub m: [[Complex64; 2]; 2],
}

impl Unitary {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Unitary { m: [[one, zero], [zero, one]] }
    }

    /// Matrix product `self * rhs` (rhs acts first).
    pub fn mul(&self, rhs: &Unitary) -> Unitary {
        let a = &self.m;
        let b = &rhs.m;
        let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Unitary { m }
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Unitary {
        Unitary {
            m: [
                [self.m[0][0].conj(), self.m[1][0].conj()],
                [self.m[0][1].conj(), self.m[1][1].conj()],
            ],
        }
    }

    /// Largest entrywise deviation of U†U from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let p = self.dagger().mul(self);
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                let target = if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
                worst = worst.max((p.m[i][j] - target).norm());
            }
        }
        worst
    }

    /// Largest entrywise distance to another matrix.
    pub fn max_entry_distance(&self, other: &Unitary) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((self.m[i][j] - other.m[i][j]).norm());
            }
        }
        worst
    }
}

/// Axis azimuth γ and rotation angle δ of one arbitrary-axis pulse.
///
/// Both angles are finite reals; no range reduction is applied (wrapping by
/// 2π changes nothing observable).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationParams {
    pub gamma: f64,
    pub delta: f64,
}

impl RotationParams {
    pub fn new(gamma: f64, delta: f64) -> Result<Self> {
        if !(gamma.is_finite() && delta.is_finite()) {
            return Err(Error::invalid(format!(
                "rotation angles must be finite, got gamma={gamma}, delta={delta}"
            )));
        }
        Ok(RotationParams { gamma, delta })
    }
}

/// Rotation of angle δ around the Bloch-sphere axis at azimuth γ in the
/// equatorial plane:
///
/// ```text
/// [ cos(δ/2)              -i e^{-iγ} sin(δ/2) ]
/// [ -i e^{iγ} sin(δ/2)     cos(δ/2)           ]
/// ```
pub fn arb_rotation(p: RotationParams) -> Unitary {
    let c = (p.delta / 2.0).cos();
    let s = (p.delta / 2.0).sin();
    let phase = Complex64::new(0.0, -1.0) * Complex64::from_polar(s, -p.gamma);
    let phase_conj = Complex64::new(0.0, -1.0) * Complex64::from_polar(s, p.gamma);
    Unitary {
        m: [
            [Complex64::new(c, 0.0), phase],
            [phase_conj, Complex64::new(c, 0.0)],
        ],
    }
}

/// `Rz(θ) = diag(e^{-iθ/2}, e^{+iθ/2})`.
pub fn rz(theta: f64) -> Result<Unitary> {
    if !theta.is_finite() {
        return Err(Error::invalid("rz angle must be finite"));
    }
    let zero = Complex64::new(0.0, 0.0);
    Ok(Unitary {
        m: [
            [Complex64::from_polar(1.0, -theta / 2.0), zero],
            [zero, Complex64::from_polar(1.0, theta / 2.0)],
        ],
    })
}

/// `Ry(θ) = R(π/2, θ)`.
pub fn ry(theta: f64) -> Result<Unitary> {
    if !theta.is_finite() {
        return Err(Error::invalid("ry angle must be finite"));
    }
    Ok(arb_rotation(RotationParams { gamma: std::f64::consts::FRAC_PI_2, delta: theta }))
}

/// `Rx(θ) = R(0, θ)`.
pub fn rx(theta: f64) -> Result<Unitary> {
    if !theta.is_finite() {
        return Err(Error::invalid("rx angle must be finite"));
    }
    Ok(arb_rotation(RotationParams { gamma: 0.0, delta: theta }))
}

/// Matrix-vector product `u * s`.
pub fn apply(u: &Unitary, s: QubitState) -> QubitState {
    QubitState {
        amp0: u.m[0][0] * s.amp0 + u.m[0][1] * s.amp1,
        amp1: u.m[1][0] * s.amp0 + u.m[1][1] * s.amp1,
    }
}

/// Squared overlap |<a|b>|^2, clamped to [0, 1] against rounding overshoot.
pub fn overlap_prob(a: &QubitState, b: &QubitState) -> f64 {
    let inner = a.amp0.conj() * b.amp0 + a.amp1.conj() * b.amp1;
    inner.norm_sqr().clamp(0.0, 1.0)
}
