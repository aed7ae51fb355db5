//! Kepler motion seen from a frame rotating uniformly about the defining
//! vector, its KS Hamiltonian and the closed-form solution.
//!
//! In the rotating frame the Cartesian Hamiltonian gains `−Ω G·c`, which in
//! Sundman time becomes the perturbation `P = −(4rΩ/α) G·c`. On the constraint
//! manifold it coincides with `P_m = −(4rΩ/α) H`, `H = (𝐯 × 𝐕)·c`; with `P_m`
//! the scalar parts of `(v, V)` oscillate freely with frequency
//!
//! ```text
//! w = 2 √(2 (V* − ΩH)) / α
//! ```
//!
//! while the vector parts oscillate in a plane turning about `c`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::canon::{self, CartesianState, KsPhase, Representative};
use crate::dynamics::{self, Perturbation, PerturbationEval, VectorField};
use crate::error::{KsError, Result};
use crate::ksmap::{self, DefiningVector, KsChart};
use crate::quat::{Quaternion, UnitQuaternion};

/// Largest distance between the rotation axis and the chart vector accepted
/// as "the same direction".
pub const AXIS_TOLERANCE: f64 = 1e-12;

/// A frame turning with angular velocity `Ω c`, coinciding with the fixed
/// frame at time `epoch`.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct RotatingFrameSpec {
    pub omega: f64,
    pub axis: DefiningVector,
    #[serde(default)]
    pub epoch: f64,
}

impl RotatingFrameSpec {
    pub fn new(omega: f64, axis: DefiningVector) -> Self {
        Self { omega, axis, epoch: 0.0 }
    }

    pub fn with_epoch(self, epoch: f64) -> Self {
        Self { epoch, ..self }
    }

    /// `q = (cos(Ω(t − t₀)/2), −sin(Ω(t − t₀)/2) c)`, mapping fixed to rotating axes.
    pub fn frame_rotation(&self, t: f64) -> UnitQuaternion {
        let (s, co) = (0.5 * self.omega * (t - self.epoch)).sin_cos();
        UnitQuaternion::new_unchecked(Quaternion::from_parts(co, -s * self.axis.vector()))
    }

    /// Whether the rotation axis is the chart's defining vector.
    pub fn is_aligned(&self, chart: &KsChart) -> bool {
        (self.axis.vector() - chart.c.vector()).norm() <= AXIS_TOLERANCE
    }

    pub fn require_aligned(&self, chart: &KsChart) -> Result<()> {
        if self.is_aligned(chart) {
            Ok(())
        } else {
            Err(KsError::InvalidInput(format!("rotation axis {} differs from the defining vector {}", self.axis, chart.c)))
        }
    }
}

pub fn to_rotating_frame(s: &CartesianState, spec: &RotatingFrameSpec, t: f64) -> CartesianState {
    let q = spec.frame_rotation(t);
    CartesianState { x: q.rotate(&s.x), p: q.rotate(&s.p), mu: s.mu }
}

pub fn from_rotating_frame(s: &CartesianState, spec: &RotatingFrameSpec, t: f64) -> CartesianState {
    let q = spec.frame_rotation(t).conj();
    CartesianState { x: q.rotate(&s.x), p: q.rotate(&s.p), mu: s.mu }
}

/// `C y = Ω (c × y)`.
pub fn cross_product_matrix(spec: &RotatingFrameSpec) -> Matrix3<f64> {
    let c = spec.axis.vector();
    spec.omega * c.cross_matrix()
}

/// `H = (𝐯 × 𝐕)·c` for the vector parts of the KS coordinates and momenta.
pub fn rotation_invariant(v: &Quaternion, pv: &Quaternion, axis: &DefiningVector) -> f64 {
    v.v.cross(&pv.v).dot(&axis.vector())
}

/// `−(4rΩ/α) G·c`, with `G` including the `X₀ x` term.
pub fn rot_perturbation_raw(p: &KsPhase, chart: &KsChart, spec: &RotatingFrameSpec) -> f64 {
    let r = chart.radius(&p.v);
    let g = crate::invariants::angular_momentum_cartesian(p, chart);
    -4.0 * r * spec.omega / chart.alpha * g.dot(&spec.axis.vector())
}

/// `−(4r/α) Ω H`.
pub fn rot_perturbation_modified(p: &KsPhase, chart: &KsChart, spec: &RotatingFrameSpec) -> f64 {
    let r = chart.radius(&p.v);
    -4.0 * r / chart.alpha * spec.omega * rotation_invariant(&p.v, &p.pv, &spec.axis)
}

/// The raw rotating-frame term as a [`Perturbation`].
///
/// Expanded as `−(4Ω/α)(r w/2 + (J·c)(x·a)/2)`, where `w = (v ∧ V)♮·a` and
/// `a` is the rotation axis, which avoids dividing by `r`.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct RawRotation(pub RotatingFrameSpec);

impl Perturbation for RawRotation {
    fn evaluate(&self, p: &KsPhase, chart: &KsChart, _: f64) -> Result<PerturbationEval> {
        let (v, pv) = (&p.v, &p.pv);
        let a = self.0.axis.vector();
        let al = chart.alpha;
        let k = -4.0 * self.0.omega / al;

        let r = chart.radius(v);
        let d_r = v.scale(2.0 / al);

        let w = v.w * pv.v.dot(&a) - pv.w * v.v.dot(&a) + v.v.cross(&pv.v).dot(&a);
        let dw_v = Quaternion::from_parts(pv.v.dot(&a), -pv.w * a + pv.v.cross(&a));
        let dw_pv = Quaternion::from_parts(-v.v.dot(&a), v.w * a + a.cross(&v.v));

        let b = canon::bilinear_invariant(v, pv, &chart.c);
        let (db_v, db_pv) = dynamics::constraint_gradient(v, pv, &chart.c);

        let g = ksmap::ks_forward(v, chart).x.dot(&a);
        let dg_v = (Quaternion::pure(a) * *v * chart.c.as_quaternion().conj()).scale(2.0 / al);

        Ok(PerturbationEval {
            value: k * 0.5 * (r * w + b * g),
            d_v: (d_r.scale(w) + dw_v.scale(r) + db_v.scale(g) + dg_v.scale(b)).scale(0.5 * k),
            d_pv: (dw_pv.scale(r) + db_pv.scale(g)).scale(0.5 * k),
            d_t: 0.0,
        })
    }

    fn name(&self) -> &str {
        "rotating-raw"
    }
}

/// The modified rotating-frame term `−(4r/α) Ω H` as a [`Perturbation`].
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct ModifiedRotation(pub RotatingFrameSpec);

impl Perturbation for ModifiedRotation {
    fn evaluate(&self, p: &KsPhase, chart: &KsChart, _: f64) -> Result<PerturbationEval> {
        let a = self.0.axis.vector();
        let al = chart.alpha;
        let k = -4.0 * self.0.omega / al;
        let r = chart.radius(&p.v);
        let h = rotation_invariant(&p.v, &p.pv, &self.0.axis);
        let dh_v = Quaternion::pure(p.pv.v.cross(&a));
        let dh_pv = Quaternion::pure(a.cross(&p.v.v));
        Ok(PerturbationEval {
            value: k * r * h,
            d_v: (p.v.scale(2.0 * h / al) + dh_v.scale(r)).scale(k),
            d_pv: dh_pv.scale(k * r),
            d_t: 0.0,
        })
    }

    fn name(&self) -> &str {
        "rotating-modified"
    }
}

/// `w = 2√(2(V* − ΩH))/α`.
pub fn rot_frequency(pt: f64, h: f64, chart: &KsChart, spec: &RotatingFrameSpec) -> Result<f64> {
    let d = pt - spec.omega * h;
    let w2 = dynamics::omega0_squared(d, chart);
    if !(w2 > 0.0) || !w2.is_finite() {
        return Err(KsError::UnboundOrbit(d));
    }
    Ok(w2.sqrt())
}

/// Right-hand side of the rotating-frame equations with `P_m`:
///
/// ```text
/// v₀' = V₀                 V₀' = −w² v₀
/// 𝐯'  = 𝐕 − (4r/α) Ω c×𝐯    𝐕'  = −w² 𝐯 − (4r/α) Ω c×𝐕
/// v*' = 4r/α               V*' = 0
/// ```
pub fn rot_equations_of_motion(p: &KsPhase, chart: &KsChart, spec: &RotatingFrameSpec) -> KsPhase {
    let al = chart.alpha;
    let c = spec.axis.vector();
    let h = rotation_invariant(&p.v, &p.pv, &spec.axis);
    let w2 = 8.0 * (p.pt - spec.omega * h) / (al * al);
    let s = 4.0 * chart.radius(&p.v) / al;
    let so = s * spec.omega;
    KsPhase {
        v: Quaternion::from_parts(p.pv.w, p.pv.v - so * c.cross(&p.v.v)),
        pv: Quaternion::from_parts(-w2 * p.v.w, -w2 * p.v.v - so * c.cross(&p.pv.v)),
        t: s,
        pt: 0.0,
    }
}

/// Kepler problem in the rotating frame, with the modified perturbation.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct RotatingKepler {
    pub chart: KsChart,
    pub mu: f64,
    pub spec: RotatingFrameSpec,
}

impl RotatingKepler {
    /// Fails unless the rotation axis is the chart's defining vector.
    pub fn new(chart: KsChart, mu: f64, spec: RotatingFrameSpec) -> Result<Self> {
        spec.require_aligned(&chart)?;
        Ok(Self { chart, mu, spec })
    }

    /// KS phase of a rotating-frame Cartesian state at time `t`, with `V*`
    /// fixed by the Jacobi-like condition `K = 0`.
    pub fn initial_phase(&self, s: &CartesianState, t: f64, rep: Representative) -> Result<KsPhase> {
        let (v, pv) = canon::cartesian_to_ks(s, &self.chart, rep)?;
        let p = KsPhase::new(v, pv, t, 0.0);
        Ok(dynamics::fix_energy_manifold(&p, &self.chart, self.mu, &ModifiedRotation(self.spec))?.apply(&p))
    }
}

impl VectorField for RotatingKepler {
    fn chart(&self) -> &KsChart {
        &self.chart
    }

    fn mu(&self) -> f64 {
        self.mu
    }

    fn rate(&self, p: &KsPhase) -> Result<KsPhase> {
        Ok(rot_equations_of_motion(p, &self.chart, &self.spec))
    }

    fn hamiltonian(&self, p: &KsPhase) -> Result<f64> {
        dynamics::ks_hamiltonian(p, &self.chart, self.mu, &ModifiedRotation(self.spec))
    }
}

/// Coefficients of the closed-form solution at one value of `τ`:
/// `b₁ = b₄ = cos wτ`, `b₂ = sin wτ / w`, `b₃ = −w sin wτ`, and `A` the
/// rotation about `c` by `−Ω Δt(τ)`.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct RotSolutionCoeffs {
    pub w: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    pub a: Matrix3<f64>,
}

/// Rotation about `c` by `θ` in Rodrigues form; exactly `I` for `θ = 0`.
fn axis_rotation(c: &Vector3<f64>, theta: f64) -> Matrix3<f64> {
    if theta == 0.0 {
        return Matrix3::identity();
    }
    let (s, co) = theta.sin_cos();
    let cc = c * c.transpose();
    cc + (Matrix3::identity() - cc) * co + c.cross_matrix() * s
}

/// Physical time elapsed after `τ` of Sundman time, starting from `(u, U)`:
/// the integral of `4|y|²/α²` along the free oscillation `y(τ)`.
pub fn elapsed_time(u: &Quaternion, pu: &Quaternion, tau: f64, chart: &KsChart, w: f64) -> f64 {
    let wt = w * tau;
    let (s, _) = wt.sin_cos();
    let s2 = (2.0 * wt).sin() / (4.0 * w);
    let w2 = w * w;
    let integral = u.norm_squared() * (0.5 * tau + s2) + u.dot(pu) * s * s / w2 + pu.norm_squared() / w2 * (0.5 * tau - s2);
    4.0 * integral / (chart.alpha * chart.alpha)
}

impl RotSolutionCoeffs {
    pub fn at(u: &Quaternion, pu: &Quaternion, tau: f64, chart: &KsChart, spec: &RotatingFrameSpec, w: f64) -> Result<Self> {
        if !(w > 0.0) || !w.is_finite() {
            return Err(KsError::UnboundOrbit(w));
        }
        let (s, co) = (w * tau).sin_cos();
        let theta = -spec.omega * elapsed_time(u, pu, tau, chart, w);
        Ok(Self { w, b1: co, b2: s / w, b3: -w * s, b4: co, a: axis_rotation(&spec.axis.vector(), theta) })
    }
}

/// Rotating-frame state after `τ`, starting from `(u, U)` at `τ = 0`.
pub fn closed_form_propagate(
    u: &Quaternion,
    pu: &Quaternion,
    tau: f64,
    chart: &KsChart,
    spec: &RotatingFrameSpec,
    w: f64,
) -> Result<(Quaternion, Quaternion)> {
    let k = RotSolutionCoeffs::at(u, pu, tau, chart, spec, w)?;
    let y = k.b1 * u.v + k.b2 * pu.v;
    let py = k.b3 * u.v + k.b4 * pu.v;
    let (y, py) = if k.a == Matrix3::identity() { (y, py) } else { (k.a * y, k.a * py) };
    Ok((Quaternion::from_parts(k.b1 * u.w + k.b2 * pu.w, y), Quaternion::from_parts(k.b3 * u.w + k.b4 * pu.w, py)))
}

/// Closed-form rotating-frame trajectory through a given initial phase.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct ClosedFormSolution {
    pub chart: KsChart,
    pub spec: RotatingFrameSpec,
    pub initial: KsPhase,
    /// Invariant `H` of the initial state.
    pub h: f64,
    /// Frequency, fixed once from the initial state.
    pub w: f64,
}

impl ClosedFormSolution {
    pub fn new(initial: KsPhase, chart: KsChart, spec: RotatingFrameSpec) -> Result<Self> {
        spec.require_aligned(&chart)?;
        let h = rotation_invariant(&initial.v, &initial.pv, &spec.axis);
        let w = rot_frequency(initial.pt, h, &chart, &spec)?;
        Ok(Self { chart, spec, initial, h, w })
    }

    /// Same initial state and frequency, different rotation rate.
    pub fn with_omega(&self, omega: f64) -> Self {
        Self { spec: RotatingFrameSpec { omega, ..self.spec }, ..*self }
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.w
    }

    pub fn state_at(&self, tau: f64) -> Result<KsPhase> {
        let p = &self.initial;
        let (v, pv) = closed_form_propagate(&p.v, &p.pv, tau, &self.chart, &self.spec, self.w)?;
        Ok(KsPhase { v, pv, t: p.t + elapsed_time(&p.v, &p.pv, tau, &self.chart, self.w), pt: p.pt })
    }
}
