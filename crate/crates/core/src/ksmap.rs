//! The KS point transformation `α x = v c v̄` for an arbitrary unit defining
//! vector `c`, its fibration, the two inversion rules and the reduction of any
//! fiber member to the pure-vector (SKS) representative.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{KsError, Result};
use crate::quat::{Quaternion, UnitQuaternion};

/// The antipodal inversion branch is used when `1 + c·x̂` drops below this.
pub const POLE_EPSILON: f64 = 1e-10;

const DEFINING_VECTOR_TOLERANCE: f64 = 1e-12;

/// Unit vector fixing the preferred direction of a KS chart.
#[derive(Clone, Copy, PartialEq, Debug, Serialize)]
#[serde(transparent)]
pub struct DefiningVector(Vector3<f64>);

impl DefiningVector {
    pub fn new(c: Vector3<f64>) -> Result<Self> {
        let n = c.norm();
        if !n.is_finite() || (n - 1.0).abs() > DEFINING_VECTOR_TOLERANCE {
            return Err(KsError::InvalidInput(format!("defining vector must have unit length, got |c| = {n}")));
        }
        Ok(Self(c))
    }

    /// Accepts any nonzero vector and scales it to unit length.
    pub fn normalized(c: Vector3<f64>) -> Result<Self> {
        let n = c.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(KsError::InvalidInput("defining vector is zero".into()));
        }
        Self::new(c / n)
    }

    /// Classical celestial-mechanics chart, `c = e₁`.
    pub fn ks1() -> Self {
        Self(Vector3::x())
    }

    /// Atomic-physics chart, `c = e₃`.
    pub fn ks3() -> Self {
        Self(Vector3::z())
    }

    pub fn vector(&self) -> Vector3<f64> {
        self.0
    }

    pub fn as_quaternion(&self) -> Quaternion {
        Quaternion::pure(self.0)
    }

    /// Unit vector orthogonal to `c`: `normalize(c × a)` with `a` the basis
    /// vector whose component along `c` is smallest in magnitude (lowest index
    /// on ties).
    pub fn orthogonal_completion(&self) -> Vector3<f64> {
        let c = self.0;
        let mut k = 0;
        for i in 1..3 {
            if c[i].abs() < c[k].abs() {
                k = i;
            }
        }
        let mut a = Vector3::zeros();
        a[k] = 1.0;
        c.cross(&a).normalize()
    }
}

impl<'de> Deserialize<'de> for DefiningVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let c = <[f64; 3]>::deserialize(d)?;
        DefiningVector::new(Vector3::from(c)).map_err(serde::de::Error::custom)
    }
}

impl FromStr for DefiningVector {
    type Err = KsError;

    /// `KS1`, `KS3`, or three comma separated components (normalized).
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "KS1" => return Ok(Self::ks1()),
            "KS3" => return Ok(Self::ks3()),
            _ => {}
        }
        let parts = s
            .trim()
            .trim_start_matches('[')
            .trim_end_matches(']')
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| KsError::InvalidInput(format!("defining vector '{s}': {e}")))?;
        if parts.len() != 3 {
            return Err(KsError::InvalidInput(format!("defining vector '{s}' needs 3 components")));
        }
        Self::normalized(Vector3::new(parts[0], parts[1], parts[2]))
    }
}

impl fmt::Display for DefiningVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.0.x, self.0.y, self.0.z)
    }
}

/// Defining vector plus the length scale `α` of the KS variables.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct KsChart {
    #[serde(rename = "defining_vector")]
    pub c: DefiningVector,
    pub alpha: f64,
}

impl KsChart {
    pub fn new(c: DefiningVector, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(KsError::InvalidInput(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self { c, alpha })
    }

    pub fn ks1(alpha: f64) -> Result<Self> {
        Self::new(DefiningVector::ks1(), alpha)
    }

    pub fn ks3(alpha: f64) -> Result<Self> {
        Self::new(DefiningVector::ks3(), alpha)
    }

    /// `r = (v·v)/α`.
    pub fn radius(&self, v: &Quaternion) -> f64 {
        v.norm_squared() / self.alpha
    }
}

/// A Cartesian position together with its length.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct CartesianPosition {
    pub x: Vector3<f64>,
    pub r: f64,
}

impl CartesianPosition {
    pub fn new(x: Vector3<f64>) -> Self {
        Self { x, r: x.norm() }
    }
}

/// `α x = v c v̄`, evaluated through the vector identity
/// `α x = (v₀² − |v|²) c + 2 (c·v) v + 2 v₀ v × c`, whose scalar companion is
/// identically zero.
pub fn ks_forward(v: &Quaternion, chart: &KsChart) -> CartesianPosition {
    let c = chart.c.vector();
    let (v0, vv) = (v.w, v.v);
    let ax = (v0 * v0 - vv.norm_squared()) * c + 2.0 * c.dot(&vv) * vv + 2.0 * v0 * vv.cross(&c);
    CartesianPosition { x: ax / chart.alpha, r: chart.radius(v) }
}

/// `v (cos φ, sin φ c)`: another member of the fiber over the same point.
pub fn fiber_shift(v: &Quaternion, phi: f64, c: &DefiningVector) -> Quaternion {
    *v * fiber_rotor(phi, c)
}

pub(crate) fn fiber_rotor(phi: f64, c: &DefiningVector) -> Quaternion {
    let (s, co) = phi.sin_cos();
    Quaternion::from_parts(co, s * c.vector())
}

/// `r + c·x` without cancellation near the antipodal direction, using
/// `(r + c·x)(r − c·x) = |c × x|²`.
fn r_plus_cx(x: &Vector3<f64>, r: f64, c: &Vector3<f64>) -> f64 {
    let cx = c.dot(x);
    if cx >= 0.0 {
        r + cx
    } else {
        c.cross(x).norm_squared() / (r - cx)
    }
}

fn is_antipodal(x: &CartesianPosition, c: &DefiningVector) -> bool {
    r_plus_cx(&x.x, x.r, &c.vector()) < POLE_EPSILON * x.r
}

fn check_collision(x: &CartesianPosition) -> Result<()> {
    if !(x.r > 0.0) {
        return Err(KsError::Collision);
    }
    Ok(())
}

/// Representative `√(αr) (0, n)` used at `x̂ = −c`.
fn antipodal_representative(x: &CartesianPosition, chart: &KsChart) -> Quaternion {
    Quaternion::pure((chart.alpha * x.r).sqrt() * chart.c.orthogonal_completion())
}

/// First inversion rule: `v = √(α/2) (√(r + c·x), (c × x)/√(r + c·x))`, with the
/// antipodal branch below [`POLE_EPSILON`].
pub fn ks_invert(x: &CartesianPosition, chart: &KsChart) -> Result<Quaternion> {
    check_collision(x)?;
    if is_antipodal(x, &chart.c) {
        return Ok(antipodal_representative(x, chart));
    }
    let c = chart.c.vector();
    let s = r_plus_cx(&x.x, x.r, &c).sqrt();
    let k = (0.5 * chart.alpha).sqrt();
    Ok(Quaternion::from_parts(k * s, (k / s) * c.cross(&x.x)))
}

/// Pure-vector (SKS) inversion `±√(α/(2r(1 + c·x̂))) (0, x + r c)`.
pub fn ks_invert_sks(x: &CartesianPosition, chart: &KsChart, sign: Sign) -> Result<Quaternion> {
    check_collision(x)?;
    if is_antipodal(x, &chart.c) {
        return Ok(antipodal_representative(x, chart).scale(sign.value()));
    }
    let c = chart.c.vector();
    let rpc = r_plus_cx(&x.x, x.r, &c);
    // x + r c split into the part orthogonal to c and rpc along c
    let direction = (x.x - c.dot(&x.x) * c) + rpc * c;
    let k = sign.value() * (chart.alpha / (2.0 * rpc)).sqrt();
    Ok(Quaternion::pure(k * direction))
}

/// Choice of representative between `v` and `−v`.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub enum Sign {
    #[default]
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

/// Result of reducing a KS quaternion to its SKS representative.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct SksReduction {
    pub v_s: Quaternion,
    pub gauge: UnitQuaternion,
    pub sign: Sign,
}

/// `v_s = ±v q_s` with `q_s = (v·c, v₀ c)/√(v₀² + (v·c)²)`.
///
/// The sign is chosen so that `v_s·c ≥ 0`, which matches the `+` branch of
/// [`ks_invert_sks`]. Fails with [`KsError::GaugeUndefined`] when `v₀ = 0`
/// and `v·c = 0`.
pub fn reduce_to_sks(v: &Quaternion, c: &DefiningVector) -> Result<SksReduction> {
    let cv = v.v.dot(&c.vector());
    let norm = v.w.hypot(cv);
    if norm == 0.0 {
        return Err(KsError::GaugeUndefined);
    }
    let gauge = UnitQuaternion::new_unchecked(Quaternion::from_parts(cv / norm, (v.w / norm) * c.vector()));
    let product = *v * gauge.quaternion();
    let sign = if product.v.dot(&c.vector()) < 0.0 { Sign::Minus } else { Sign::Plus };
    // the scalar part v₀(v·c) − (v·c)v₀ vanishes identically
    let v_s = Quaternion::pure(sign.value() * product.v);
    Ok(SksReduction { v_s, gauge, sign })
}

/// Like [`reduce_to_sks`], but a pure `v` orthogonal to `c` (already the
/// antipodal representative) is returned unchanged with the identity gauge.
pub fn reduce_to_sks_or_identity(v: &Quaternion, c: &DefiningVector) -> Result<SksReduction> {
    match reduce_to_sks(v, c) {
        Err(KsError::GaugeUndefined) if v.norm_squared() > 0.0 => {
            Ok(SksReduction { v_s: *v, gauge: UnitQuaternion::identity(), sign: Sign::Plus })
        }
        other => other,
    }
}

/// Keeps successive SKS vectors of a sampled orbit continuous by flipping the
/// sign whenever `|v_k − v_{k−1}| > |v_k + v_{k−1}|`.
#[derive(Clone, Debug, Default)]
pub struct SignContinuity {
    previous: Option<Quaternion>,
}

impl SignContinuity {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, v: Quaternion) -> Quaternion {
        let out = match self.previous {
            Some(p) if (v - p).norm() > (v + p).norm() => -v,
            _ => v,
        };
        self.previous = Some(out);
        out
    }
}

/// Legacy KS1 oracle: `x = L(u) u` with the classical L-matrix, `r = Σ uᵢ²`.
pub fn ks1_oracle(u: &[f64; 4]) -> (Vector3<f64>, f64) {
    let [u1, u2, u3, u4] = *u;
    let l = nalgebra::Matrix4::new(
        u1, -u2, -u3, u4, //
        u2, u1, -u4, -u3, //
        u3, u4, u1, u2, //
        u4, -u3, u2, -u1,
    );
    let x = l * nalgebra::Vector4::new(u1, u2, u3, u4);
    (Vector3::new(x[0], x[1], x[2]), u.iter().map(|a| a * a).sum())
}

/// Reassignment `(v₀, v₁, v₂, v₃) = (−u₄, u₁, u₂, u₃)` between the L-matrix
/// convention and the quaternion KS1 chart.
pub fn ks1_to_quaternion(u: &[f64; 4]) -> Quaternion {
    Quaternion::new(-u[3], u[0], u[1], u[2])
}
