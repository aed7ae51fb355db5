//! Quaternion algebra.
//!
//! A quaternion is stored as a scalar `w` and a 3-vector `v`, and every
//! serialized form uses the component order `(w, x, y, z)`.
//!
//! Besides the Hamilton product the module provides the quaternion cross
//! product `a ∧ b = (b·ā − a·b̄)/2`, which is always a pure vector, and the
//! rotation action of unit quaternions `(0, y) = q (0, x) q̄`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{KsError, Result};

/// Largest norm deviation that [`UnitQuaternion::new`] silently normalizes away.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, PartialEq, Default)]
pub struct Quaternion {
    pub w: f64,
    pub v: Vector3<f64>,
}

impl Quaternion {
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, v: Vector3::new(x, y, z) }
    }

    pub fn from_parts(w: f64, v: Vector3<f64>) -> Self {
        Self { w, v }
    }

    /// The pure vector `(0, v)`.
    pub fn pure(v: Vector3<f64>) -> Self {
        Self { w: 0.0, v }
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 0.0, 0.0, 0.0)
    }

    pub const fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0)
    }

    /// Basis quaternion `e_k`, `k = 0..=3`.
    pub fn basis(k: usize) -> Self {
        let mut a = [0.0; 4];
        a[k] = 1.0;
        Self::from_array(a)
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.w, self.v.x, self.v.y, self.v.z]
    }

    pub fn scalar(&self) -> f64 {
        self.w
    }

    /// Vector part (the "natural" projection).
    pub fn vector(&self) -> Vector3<f64> {
        self.v
    }

    pub fn is_pure(&self) -> bool {
        self.w == 0.0
    }

    pub fn conj(&self) -> Self {
        Self { w: self.w, v: -self.v }
    }

    /// Euclidean scalar product of the 4-tuples.
    pub fn dot(&self, other: &Self) -> f64 {
        self.w * other.w + self.v.dot(&other.v)
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn scale(&self, k: f64) -> Self {
        Self { w: k * self.w, v: k * self.v }
    }

    /// `q⁻¹ = q̄ / |q|²`; `None` for the zero quaternion.
    pub fn inverse(&self) -> Option<Self> {
        let n2 = self.norm_squared();
        (n2 > 0.0).then(|| self.conj().scale(1.0 / n2))
    }

    /// Quaternion cross product `self ∧ other = (other·self̄ − self·other̄)/2`.
    ///
    /// Evaluated in the expanded form `(0, a₀b − b₀a + a×b)`, so the scalar
    /// part is exactly zero.
    pub fn cross(&self, other: &Self) -> Self {
        Self::pure(self.w * other.v - other.w * self.v + self.v.cross(&other.v))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (*self - *other).to_array().iter().fold(0.0_f64, |m, d| m.max(d.abs()))
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    fn mul(self, b: Quaternion) -> Quaternion {
        Quaternion { w: self.w * b.w - self.v.dot(&b.v), v: self.w * b.v + b.w * self.v + self.v.cross(&b.v) }
    }
}

impl Mul<f64> for Quaternion {
    type Output = Quaternion;

    fn mul(self, k: f64) -> Quaternion {
        self.scale(k)
    }
}

impl Mul<Quaternion> for f64 {
    type Output = Quaternion;

    fn mul(self, q: Quaternion) -> Quaternion {
        q.scale(self)
    }
}

impl Add for Quaternion {
    type Output = Quaternion;

    fn add(self, b: Quaternion) -> Quaternion {
        Quaternion { w: self.w + b.w, v: self.v + b.v }
    }
}

impl AddAssign for Quaternion {
    fn add_assign(&mut self, b: Quaternion) {
        self.w += b.w;
        self.v += b.v;
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;

    fn sub(self, b: Quaternion) -> Quaternion {
        Quaternion { w: self.w - b.w, v: self.v - b.v }
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;

    fn neg(self) -> Quaternion {
        Quaternion { w: -self.w, v: -self.v }
    }
}

impl fmt::Debug for Quaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Quaternion({}, {}, {}, {})", self.w, self.v.x, self.v.y, self.v.z)
    }
}

impl fmt::Display for Quaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}, {}]", self.w, self.v.x, self.v.y, self.v.z)
    }
}

impl Serialize for Quaternion {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Quaternion {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        <[f64; 4]>::deserialize(d).map(Quaternion::from_array)
    }
}

/// Entries of `R(q)` exactly as in the Euler–Rodrigues form.
///
/// For a non-unit `q` this is `|q|²` times a rotation matrix, which is how the
/// point transformation uses it.
pub fn rotation_scaling_matrix(q: &Quaternion) -> Matrix3<f64> {
    let (q0, q1, q2, q3) = (q.w, q.v.x, q.v.y, q.v.z);
    Matrix3::new(
        q0 * q0 + q1 * q1 - q2 * q2 - q3 * q3,
        2.0 * (q1 * q2 - q0 * q3),
        2.0 * (q0 * q2 + q1 * q3),
        2.0 * (q1 * q2 + q0 * q3),
        q0 * q0 - q1 * q1 + q2 * q2 - q3 * q3,
        -2.0 * (q0 * q1 - q2 * q3),
        -2.0 * (q0 * q2 - q1 * q3),
        2.0 * (q0 * q1 + q2 * q3),
        q0 * q0 - q1 * q1 - q2 * q2 + q3 * q3,
    )
}

/// A quaternion of unit norm, i.e. a set of Euler–Rodrigues parameters.
#[derive(Clone, Copy, PartialEq, Debug, Serialize)]
#[serde(transparent)]
pub struct UnitQuaternion(Quaternion);

impl UnitQuaternion {
    /// Normalizes `q` when `| |q| − 1 | ≤ 1e-9`, rejects it otherwise.
    pub fn new(q: Quaternion) -> Result<Self> {
        let n = q.norm();
        if !n.is_finite() || (n - 1.0).abs() > UNIT_NORM_TOLERANCE {
            return Err(KsError::InvalidInput(format!("quaternion norm {n} is not within {UNIT_NORM_TOLERANCE:e} of 1")));
        }
        Ok(Self(q.scale(1.0 / n)))
    }

    /// Normalizes any nonzero quaternion.
    pub fn normalize(q: Quaternion) -> Result<Self> {
        let n = q.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(KsError::InvalidInput("cannot normalize a zero quaternion".into()));
        }
        Ok(Self(q.scale(1.0 / n)))
    }

    pub(crate) fn new_unchecked(q: Quaternion) -> Self {
        Self(q)
    }

    pub const fn identity() -> Self {
        Self(Quaternion::identity())
    }

    /// `(cos(θ/2), sin(θ/2)·n)`.
    ///
    /// Angles outside `[0, π]` are first wrapped into `[0, 2π)`, then
    /// `θ ∈ (π, 2π)` is replaced by the equivalent pair `(−n, 2π − θ)`.
    pub fn axis_angle(n: &Vector3<f64>, theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(KsError::InvalidInput(format!("rotation angle {theta}")));
        }
        let len = n.norm();
        if (len - 1.0).abs() > 1e-9 {
            return Err(KsError::InvalidInput(format!("rotation axis has norm {len}, expected 1")));
        }
        let two_pi = std::f64::consts::TAU;
        let mut axis = *n;
        let mut angle = theta.rem_euclid(two_pi);
        if angle > std::f64::consts::PI {
            axis = -axis;
            angle = two_pi - angle;
        }
        let (s, c) = (0.5 * angle).sin_cos();
        Ok(Self(Quaternion::from_parts(c, s * axis)))
    }

    pub fn quaternion(&self) -> Quaternion {
        self.0
    }

    pub fn conj(&self) -> Self {
        Self(self.0.conj())
    }

    pub fn rotate(&self, x: &Vector3<f64>) -> Vector3<f64> {
        (self.0 * Quaternion::pure(*x) * self.0.conj()).v
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        rotation_scaling_matrix(&self.0)
    }
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;

    fn mul(self, b: UnitQuaternion) -> UnitQuaternion {
        UnitQuaternion(self.0 * b.0)
    }
}

impl From<UnitQuaternion> for Quaternion {
    fn from(q: UnitQuaternion) -> Quaternion {
        q.0
    }
}
