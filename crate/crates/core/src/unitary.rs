//! 2x2 unitaries, the Clifford+T gate alphabet and gate sequences.

use std::cmp::Ordering;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::ops::Mul;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used when checking unitarity of user-supplied matrices.
pub const UNITARY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnitaryError {
    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),
    #[error("unknown gate symbol {0:?}")]
    UnknownGate(char),
    #[error("unknown gate id {0}")]
    UnknownGateId(u8),
}

const fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// A 2x2 complex matrix stored row-major as `[m00, m01, m10, m11]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unitary2(pub [Complex64; 4]);

impl Unitary2 {
    pub const IDENTITY: Unitary2 = Unitary2([c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);

    /// Builds a matrix from its entries, rejecting anything that is not unitary.
    pub fn new(entries: [Complex64; 4]) -> Result<Self, UnitaryError> {
        let u = Unitary2(entries);
        let dev = u.unitarity_deviation();
        if dev > UNITARY_TOL || !dev.is_finite() {
            return Err(UnitaryError::NotUnitary(dev));
        }
        Ok(u)
    }

    pub fn from_rows(r0: [Complex64; 2], r1: [Complex64; 2]) -> Self {
        Unitary2([r0[0], r0[1], r1[0], r1[1]])
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.0[2 * row + col]
    }

    #[inline]
    pub fn adjoint(&self) -> Self {
        let [a, b, cc, d] = self.0;
        Unitary2([a.conj(), cc.conj(), b.conj(), d.conj()])
    }

    #[inline]
    pub fn trace(&self) -> Complex64 {
        self.0[0] + self.0[3]
    }

    #[inline]
    pub fn det(&self) -> Complex64 {
        self.0[0] * self.0[3] - self.0[1] * self.0[2]
    }

    pub fn scale(&self, z: Complex64) -> Self {
        Unitary2(self.0.map(|e| e * z))
    }

    /// Max-abs deviation of `U U^dagger` from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        let p = *self * self.adjoint();
        let d = [p.0[0] - 1.0, p.0[1], p.0[2], p.0[3] - 1.0];
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Rescales by a global phase so that the determinant is 1.
    pub fn to_special(&self) -> Self {
        let det = self.det();
        let phase = Complex64::from_polar(1.0, -det.arg() / 2.0);
        self.scale(phase)
    }

    /// Unit quaternion `(Re a, Im a, Re b, Im b)` of the SU(2) form `[[a, -b*], [b, a*]]`.
    ///
    /// For two unitaries the trace value equals `|q . q'|`.
    pub fn quaternion(&self) -> [f64; 4] {
        let s = self.to_special();
        let a = (s.0[0] + s.0[3].conj()) * 0.5;
        let b = (s.0[2] - s.0[1].conj()) * 0.5;
        [a.re, a.im, b.re, b.im]
    }

    /// Max-abs entrywise difference.
    pub fn max_abs_diff(&self, other: &Unitary2) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }
}

impl Mul for Unitary2 {
    type Output = Unitary2;

    #[inline]
    fn mul(self, r: Unitary2) -> Unitary2 {
        let [a, b, cc, d] = self.0;
        let [e, f, g, h] = r.0;
        Unitary2([a * e + b * g, a * f + b * h, cc * e + d * g, cc * f + d * h])
    }
}

/// `Tr(U^dagger V)` without forming the product.
#[inline]
pub fn inner(u: &Unitary2, v: &Unitary2) -> Complex64 {
    u.0.iter().zip(v.0.iter()).map(|(a, b)| a.conj() * b).sum()
}

/// `|Tr(U^dagger V)| / 2`, a phase-invariant similarity in `[0, 1]`.
#[inline]
pub fn trace_value(u: &Unitary2, v: &Unitary2) -> f64 {
    (inner(u, v).norm() / 2.0).min(1.0)
}

/// Global-phase-invariant distance `sqrt(1 - |Tr(U^dagger V)|^2 / 4)`.
///
/// Evaluated as the norm of the traceless part of `W = U^dagger V`, which equals the
/// formula above for unitaries and stays accurate when `W` is close to a phase.
#[inline]
pub fn distance(u: &Unitary2, v: &Unitary2) -> f64 {
    let w = u.adjoint() * *v;
    let d = (w.0[0] - w.0[3]).norm_sqr() / 4.0 + (w.0[1].norm_sqr() + w.0[2].norm_sqr()) / 2.0;
    d.sqrt().min(1.0)
}

#[inline]
pub fn distance_from_trace_value(tv: f64) -> f64 {
    (1.0 - tv * tv).max(0.0).sqrt()
}

/// True when the two matrices agree up to a global phase.
pub fn phase_equivalent(u: &Unitary2, v: &Unitary2, tol: f64) -> bool {
    trace_value(u, v) > 1.0 - tol
}

pub fn rz(theta: f64) -> Unitary2 {
    let z = c(0.0, 0.0);
    Unitary2([Complex64::from_polar(1.0, -theta / 2.0), z, z, Complex64::from_polar(1.0, theta / 2.0)])
}

pub fn rx(theta: f64) -> Unitary2 {
    let (s, co) = (theta / 2.0).sin_cos();
    Unitary2([c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0)])
}

pub fn ry(theta: f64) -> Unitary2 {
    let (s, co) = (theta / 2.0).sin_cos();
    Unitary2([c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)])
}

/// Euler angles of the U3 parametrisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerAngles {
    pub theta: f64,
    pub phi: f64,
    pub lambda: f64,
}

impl EulerAngles {
    pub fn new(theta: f64, phi: f64, lambda: f64) -> Self {
        EulerAngles { theta, phi, lambda }
    }
}

/// `U3(theta, phi, lambda) = [[cos, -e^{i lambda} sin], [e^{i phi} sin, e^{i(phi+lambda)} cos]]`
/// with half-angle `theta / 2`.
pub fn u3(angles: EulerAngles) -> Unitary2 {
    let EulerAngles { theta, phi, lambda } = angles;
    let (s, co) = (theta / 2.0).sin_cos();
    Unitary2([
        c(co, 0.0),
        -Complex64::from_polar(s, lambda),
        Complex64::from_polar(s, phi),
        Complex64::from_polar(co, phi + lambda),
    ])
}

/// Angles of the three z-rotations in the chain `Rz(a) H Rz(b) H Rz(c)` equal to U3 up to
/// phase, listed in time order (`c` first).
pub fn u3_rz_angles(angles: EulerAngles) -> [f64; 3] {
    [angles.lambda - FRAC_PI_2, angles.theta, angles.phi + 5.0 * FRAC_PI_2]
}

/// Product of the z-rotation chain returned by [`u3_rz_angles`].
pub fn u3_from_rz_chain(angles: EulerAngles) -> Unitary2 {
    let [a, b, cc] = u3_rz_angles(angles);
    let h = GateId::H.matrix();
    rz(cc) * h * rz(b) * h * rz(a)
}

/// Recovers U3 angles such that `u3(angles)` equals `u` up to global phase.
pub fn zyz_decompose(u: &Unitary2) -> EulerAngles {
    const EPS: f64 = 1e-12;
    let [a, b, cc, d] = u.0;
    let theta = 2.0 * cc.norm().atan2(a.norm());
    if b.norm() < EPS && cc.norm() < EPS {
        return EulerAngles::new(0.0, d.arg() - a.arg(), 0.0);
    }
    if a.norm() < EPS && d.norm() < EPS {
        return EulerAngles::new(PI, cc.arg() - (-b).arg(), 0.0);
    }
    let gamma = if a.norm() >= cc.norm() { a.arg() } else { cc.arg() + (-b).arg() - d.arg() };
    EulerAngles::new(theta, cc.arg() - gamma, (-b).arg() - gamma)
}

/// Haar-random unitary from a complex Gaussian matrix orthonormalised by Gram-Schmidt.
pub fn haar_random_unitary(seed: u64) -> Unitary2 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_random_with(&mut rng)
}

pub fn haar_random_with<R: Rng + ?Sized>(rng: &mut R) -> Unitary2 {
    let mut gauss = || -> Complex64 {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im)
    };
    let col0 = [gauss(), gauss()];
    let col1 = [gauss(), gauss()];
    let n0 = (col0[0].norm_sqr() + col0[1].norm_sqr()).sqrt();
    let e0 = [col0[0] / n0, col0[1] / n0];
    let mut w = col1;
    // Second pass restores orthogonality lost when the columns are nearly parallel.
    for _ in 0..2 {
        let proj = e0[0].conj() * w[0] + e0[1].conj() * w[1];
        w = [w[0] - proj * e0[0], w[1] - proj * e0[1]];
    }
    let n1 = (w[0].norm_sqr() + w[1].norm_sqr()).sqrt();
    let e1 = [w[0] / n1, w[1] / n1];
    Unitary2([e0[0], e1[0], e0[1], e1[1]])
}

/// One letter of the Clifford+T alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum GateId {
    H = 0,
    S = 1,
    T = 2,
    X = 3,
    Y = 4,
    Z = 5,
}

impl GateId {
    pub const ALL: [GateId; 6] = [GateId::H, GateId::S, GateId::T, GateId::X, GateId::Y, GateId::Z];

    pub fn matrix(self) -> Unitary2 {
        let z = c(0.0, 0.0);
        let o = c(1.0, 0.0);
        match self {
            GateId::H => {
                let h = c(FRAC_1_SQRT_2, 0.0);
                Unitary2([h, h, h, -h])
            }
            GateId::S => Unitary2([o, z, z, c(0.0, 1.0)]),
            GateId::T => Unitary2([o, z, z, Complex64::from_polar(1.0, FRAC_PI_4)]),
            GateId::X => Unitary2([z, o, o, z]),
            GateId::Y => Unitary2([z, c(0.0, -1.0), c(0.0, 1.0), z]),
            GateId::Z => Unitary2([o, z, z, -o]),
        }
    }

    pub fn symbol(self) -> char {
        match self {
            GateId::H => 'H',
            GateId::S => 'S',
            GateId::T => 'T',
            GateId::X => 'X',
            GateId::Y => 'Y',
            GateId::Z => 'Z',
        }
    }

    pub fn from_symbol(ch: char) -> Result<Self, UnitaryError> {
        match ch.to_ascii_uppercase() {
            'H' => Ok(GateId::H),
            'S' => Ok(GateId::S),
            'T' => Ok(GateId::T),
            'X' => Ok(GateId::X),
            'Y' => Ok(GateId::Y),
            'Z' => Ok(GateId::Z),
            _ => Err(UnitaryError::UnknownGate(ch)),
        }
    }

    pub fn from_u8(id: u8) -> Result<Self, UnitaryError> {
        GateId::ALL.get(id as usize).copied().ok_or(UnitaryError::UnknownGateId(id))
    }

    pub fn is_pauli(self) -> bool {
        matches!(self, GateId::X | GateId::Y | GateId::Z)
    }
}

/// Lexicographic synthesis cost: T count, then non-Pauli Clifford count, then length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cost {
    pub t: usize,
    pub clifford: usize,
    pub len: usize,
}

impl Cost {
    pub fn of(gates: &[GateId]) -> Cost {
        let mut cost = Cost { t: 0, clifford: 0, len: gates.len() };
        for g in gates {
            match g {
                GateId::T => cost.t += 1,
                GateId::H | GateId::S => cost.clifford += 1,
                _ => {}
            }
        }
        cost
    }
}

/// Gates in time order: the first gate acts first.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GateSequence(pub Vec<GateId>);

impl GateSequence {
    pub fn new() -> Self {
        GateSequence(Vec::new())
    }

    pub fn gates(&self) -> &[GateId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, g: GateId) {
        self.0.push(g)
    }

    pub fn extend_from(&mut self, other: &GateSequence) {
        self.0.extend_from_slice(&other.0)
    }

    pub fn count(&self, g: GateId) -> usize {
        self.0.iter().filter(|&&x| x == g).count()
    }

    pub fn t_count(&self) -> usize {
        self.count(GateId::T)
    }

    pub fn cost(&self) -> Cost {
        Cost::of(&self.0)
    }

    /// Compares by [`Cost`], breaking ties by the gate string.
    pub fn cmp_cost(&self, other: &GateSequence) -> Ordering {
        self.cost().cmp(&other.cost()).then_with(|| self.0.cmp(&other.0))
    }

    pub fn matrix(&self) -> Unitary2 {
        matrix_of(&self.0)
    }
}

/// Product of the gates, last gate leftmost. The empty product is the identity.
pub fn matrix_of(gates: &[GateId]) -> Unitary2 {
    gates.iter().fold(Unitary2::IDENTITY, |acc, g| g.matrix() * acc)
}

impl fmt::Display for GateSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in &self.0 {
            write!(f, "{}", g.symbol())?;
        }
        Ok(())
    }
}

impl FromStr for GateSequence {
    type Err = UnitaryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .filter(|ch| !ch.is_whitespace())
            .map(GateId::from_symbol)
            .collect::<Result<Vec<_>, _>>()
            .map(GateSequence)
    }
}

impl From<Vec<GateId>> for GateSequence {
    fn from(v: Vec<GateId>) -> Self {
        GateSequence(v)
    }
}
