//! Fixed-step integration in Sundman time, physical-time bookkeeping and an
//! independent universal-variable Kepler propagator used as an oracle.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::canon::{self, CartesianState, KsPhase};
use crate::dynamics::{self, VectorField};
use crate::error::{KsError, Result};
use crate::ksmap::KsChart;

/// Integration stops with a collision error when `r < R_MIN_FACTOR · α`.
pub const R_MIN_FACTOR: f64 = 1e-12;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Classical fourth-order Runge–Kutta on the full vector field.
    #[default]
    Rk4,
    /// Strang splitting: exact oscillator half-drifts around an RK4 step of
    /// the remaining field.
    Splitting,
}

impl std::str::FromStr for Scheme {
    type Err = KsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rk4" => Ok(Scheme::Rk4),
            "splitting" | "leapfrog" => Ok(Scheme::Splitting),
            _ => Err(KsError::InvalidInput(format!("unknown scheme {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Sundman-time step `Δτ`.
    pub step: f64,
    #[serde(default)]
    pub scheme: Scheme,
    pub max_steps: usize,
    /// Emit every n-th step (the last state is always emitted).
    #[serde(default = "one")]
    pub sample_every: usize,
}

fn one() -> usize {
    1
}

impl IntegratorConfig {
    pub fn new(step: f64, max_steps: usize) -> Self {
        Self { step, scheme: Scheme::Rk4, max_steps, sample_every: 1 }
    }

    pub fn with_scheme(self, scheme: Scheme) -> Self {
        Self { scheme, ..self }
    }

    pub fn with_sample_every(self, n: usize) -> Self {
        Self { sample_every: n, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(KsError::InvalidInput(format!("step must be positive, got {}", self.step)));
        }
        if self.max_steps == 0 || self.sample_every == 0 {
            return Err(KsError::InvalidInput("max_steps and sample_every must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct InvariantReport {
    /// Bilinear constraint `J·c`.
    pub jc: f64,
    /// Unperturbed KS Hamiltonian.
    pub k0: f64,
    /// Full Hamiltonian of the integrated field.
    pub k: f64,
}

#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub tau: f64,
    pub phase: KsPhase,
    pub cartesian: CartesianState,
    pub invariants: InvariantReport,
}

impl TrajectorySample {
    pub fn new(tau: f64, phase: KsPhase, field: &dyn VectorField) -> Result<Self> {
        let chart = field.chart();
        Ok(Self {
            tau,
            phase,
            cartesian: canon::ks_to_cartesian(&phase, chart, field.mu())?,
            invariants: InvariantReport {
                jc: canon::bilinear_invariant(&phase.v, &phase.pv, &chart.c),
                k0: dynamics::ks_hamiltonian_unperturbed(&phase, chart, field.mu()).k0,
                k: field.hamiltonian(&phase)?,
            },
        })
    }

    /// Physical time, i.e. the `v*` channel.
    pub fn t(&self) -> f64 {
        self.phase.t
    }
}

fn guard(p: &KsPhase, chart: &KsChart) -> Result<()> {
    if !p.is_finite() {
        return Err(KsError::DegenerateState("non-finite state"));
    }
    if chart.radius(&p.v) < R_MIN_FACTOR * chart.alpha {
        return Err(KsError::Collision);
    }
    Ok(())
}

pub fn rk4_step(field: &dyn VectorField, p: &KsPhase, h: f64) -> Result<KsPhase> {
    let k1 = field.rate(p)?;
    let k2 = field.rate(&p.advanced(&k1, 0.5 * h))?;
    let k3 = field.rate(&p.advanced(&k2, 0.5 * h))?;
    let k4 = field.rate(&p.advanced(&k3, h))?;
    let a = p.to_array();
    let (b1, b2, b3, b4) = (k1.to_array(), k2.to_array(), k3.to_array(), k4.to_array());
    Ok(KsPhase::from_array(std::array::from_fn(|i| a[i] + h / 6.0 * (b1[i] + 2.0 * b2[i] + 2.0 * b3[i] + b4[i]))))
}

/// Exact flow of the free oscillator `v' = V`, `V' = −ω₀² v`, `v*' = 4r/α`
/// over `h`, for any sign of `ω₀²`.
pub fn oscillator_drift(p: &KsPhase, chart: &KsChart, h: f64) -> KsPhase {
    let w2 = dynamics::omega0_squared(p.pt, chart);
    let (uu, uv, vv) = (p.v.norm_squared(), p.v.dot(&p.pv), p.pv.norm_squared());
    let four_over_a2 = 4.0 / (chart.alpha * chart.alpha);
    let (v, pv, dt);
    if w2 > 0.0 {
        let w = w2.sqrt();
        let (s, co) = (w * h).sin_cos();
        v = p.v.scale(co) + p.pv.scale(s / w);
        pv = p.v.scale(-w * s) + p.pv.scale(co);
        dt = crate::rotframe::elapsed_time(&p.v, &p.pv, h, chart, w);
    } else if w2 < 0.0 {
        let k = (-w2).sqrt();
        let (s, co) = ((k * h).sinh(), (k * h).cosh());
        let s2 = (2.0 * k * h).sinh() / (4.0 * k);
        v = p.v.scale(co) + p.pv.scale(s / k);
        pv = p.v.scale(k * s) + p.pv.scale(co);
        dt = four_over_a2 * (uu * (0.5 * h + s2) + uv * s * s / (k * k) + vv / (k * k) * (s2 - 0.5 * h));
    } else {
        v = p.v + p.pv.scale(h);
        pv = p.pv;
        dt = four_over_a2 * (uu * h + uv * h * h + vv * h * h * h / 3.0);
    }
    KsPhase { v, pv, t: p.t + dt, pt: p.pt }
}

/// The field minus its free-oscillator part.
struct Remainder<'a>(&'a dyn VectorField);

impl VectorField for Remainder<'_> {
    fn chart(&self) -> &KsChart {
        self.0.chart()
    }

    fn mu(&self) -> f64 {
        self.0.mu()
    }

    fn rate(&self, p: &KsPhase) -> Result<KsPhase> {
        let full = self.0.rate(p)?.to_array();
        let free = dynamics::oscillator_rate(p, self.0.chart()).to_array();
        Ok(KsPhase::from_array(std::array::from_fn(|i| full[i] - free[i])))
    }

    fn hamiltonian(&self, p: &KsPhase) -> Result<f64> {
        self.0.hamiltonian(p)
    }
}

pub fn splitting_step(field: &dyn VectorField, p: &KsPhase, h: f64) -> Result<KsPhase> {
    let chart = field.chart();
    let a = oscillator_drift(p, chart, 0.5 * h);
    let b = rk4_step(&Remainder(field), &a, h)?;
    Ok(oscillator_drift(&b, chart, 0.5 * h))
}

pub fn step(field: &dyn VectorField, p: &KsPhase, h: f64, scheme: Scheme) -> Result<KsPhase> {
    match scheme {
        Scheme::Rk4 => rk4_step(field, p, h),
        Scheme::Splitting => splitting_step(field, p, h),
    }
}

/// Number of steps covering `[0, tau_end]`; the last one may be shorter.
pub fn step_count(step: f64, tau_end: f64) -> usize {
    if tau_end <= 0.0 {
        0
    } else {
        (tau_end / step - 1e-9).ceil().max(1.0) as usize
    }
}

/// Integrates from `τ = 0` to `tau_end`, handing each emitted sample to `sink`.
pub fn integrate_with<F>(p0: &KsPhase, field: &dyn VectorField, cfg: &IntegratorConfig, tau_end: f64, mut sink: F) -> Result<()>
where
    F: FnMut(TrajectorySample) -> Result<()>,
{
    cfg.validate()?;
    if !(tau_end >= 0.0) || !tau_end.is_finite() {
        return Err(KsError::InvalidInput(format!("tau span must be non-negative, got {tau_end}")));
    }
    let n = step_count(cfg.step, tau_end);
    if n > cfg.max_steps {
        return Err(KsError::StepLimitExceeded(cfg.max_steps));
    }
    let chart = field.chart();
    guard(p0, chart)?;
    sink(TrajectorySample::new(0.0, *p0, field)?)?;
    let mut p = *p0;
    for i in 1..=n {
        let h = if i == n { tau_end - (n - 1) as f64 * cfg.step } else { cfg.step };
        p = step(field, &p, h, cfg.scheme)?;
        guard(&p, chart)?;
        if i % cfg.sample_every == 0 || i == n {
            let tau = if i == n { tau_end } else { i as f64 * cfg.step };
            sink(TrajectorySample::new(tau, p, field)?)?;
        }
    }
    Ok(())
}

pub fn integrate(p0: &KsPhase, field: &dyn VectorField, cfg: &IntegratorConfig, tau_end: f64) -> Result<Vec<TrajectorySample>> {
    let mut out = Vec::new();
    integrate_with(p0, field, cfg, tau_end, |s| {
        out.push(s);
        Ok(())
    })?;
    Ok(out)
}

/// Cubic Hermite interpolant of `t(τ)` between two states, using `t' = 4r/α`.
#[derive(Clone, Copy, Debug)]
struct TimeSegment {
    tau0: f64,
    h: f64,
    t0: f64,
    t1: f64,
    d0: f64,
    d1: f64,
}

impl TimeSegment {
    fn new(tau0: f64, h: f64, a: &KsPhase, b: &KsPhase, chart: &KsChart) -> Self {
        let rate = |p: &KsPhase| 4.0 * chart.radius(&p.v) / chart.alpha;
        Self { tau0, h, t0: a.t, t1: b.t, d0: rate(a), d1: rate(b) }
    }

    fn eval(&self, tau: f64) -> f64 {
        let s = (tau - self.tau0) / self.h;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.t0
            + (s3 - 2.0 * s2 + s) * self.h * self.d0
            + (-2.0 * s3 + 3.0 * s2) * self.t1
            + (s3 - s2) * self.h * self.d1
    }

    /// Bisection for `t(τ) = target` on `[τ₀, τ₀ + h]`.
    fn invert(&self, target: f64) -> f64 {
        let (mut lo, mut hi) = (self.tau0, self.tau0 + self.h);
        while hi - lo > 1e-12 * (1.0 + hi.abs()) {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Sundman time at which the physical time reaches `t_target`, by cubic
/// Hermite interpolation of consecutive samples and bisection.
///
/// Returns `None` when `t_target` lies outside the sampled range.
pub fn tau_at_time(samples: &[TrajectorySample], chart: &KsChart, t_target: f64) -> Option<f64> {
    let first = samples.first()?;
    if t_target == first.t() {
        return Some(first.tau);
    }
    samples.windows(2).find_map(|w| {
        let (a, b) = (&w[0], &w[1]);
        if a.t() <= t_target && t_target <= b.t() {
            Some(TimeSegment::new(a.tau, b.tau - a.tau, &a.phase, &b.phase, chart).invert(t_target))
        } else {
            None
        }
    })
}

/// Integrates until the physical time reaches `t_end`, ending with a partial
/// step that lands on it.
pub fn integrate_until_time(p0: &KsPhase, field: &dyn VectorField, cfg: &IntegratorConfig, t_end: f64) -> Result<Vec<TrajectorySample>> {
    cfg.validate()?;
    if !(t_end >= p0.t) || !t_end.is_finite() {
        return Err(KsError::InvalidInput(format!("t span must end after the initial time, got {t_end}")));
    }
    let chart = field.chart();
    guard(p0, chart)?;
    let mut out = vec![TrajectorySample::new(0.0, *p0, field)?];
    if t_end == p0.t {
        return Ok(out);
    }
    let mut p = *p0;
    let mut tau = 0.0;
    for i in 1..=cfg.max_steps {
        let next = step(field, &p, cfg.step, cfg.scheme)?;
        guard(&next, chart)?;
        if next.t >= t_end {
            let seg = TimeSegment::new(tau, cfg.step, &p, &next, chart);
            let tau_hit = seg.invert(t_end);
            let last = if tau_hit - tau >= cfg.step { next } else { step(field, &p, tau_hit - tau, cfg.scheme)? };
            out.push(TrajectorySample::new(tau_hit, last, field)?);
            return Ok(out);
        }
        p = next;
        tau = i as f64 * cfg.step;
        if i % cfg.sample_every == 0 {
            out.push(TrajectorySample::new(tau, p, field)?);
        }
    }
    Err(KsError::StepLimitExceeded(cfg.max_steps))
}

/// The `v*` channel of a trajectory.
pub fn time_of(samples: &[TrajectorySample]) -> Vec<f64> {
    samples.iter().map(TrajectorySample::t).collect()
}

/// Physical times by trapezoidal quadrature of `4r/α` over the samples.
pub fn trapezoid_time(samples: &[TrajectorySample], chart: &KsChart) -> Vec<f64> {
    let rate = |s: &TrajectorySample| 4.0 * chart.radius(&s.phase.v) / chart.alpha;
    let mut out = Vec::with_capacity(samples.len());
    let Some(first) = samples.first() else {
        return out;
    };
    let mut t = first.t();
    out.push(t);
    for w in samples.windows(2) {
        t += 0.5 * (w[1].tau - w[0].tau) * (rate(&w[0]) + rate(&w[1]));
        out.push(t);
    }
    out
}

/// Largest deviations of the reported invariants from their initial values.
#[derive(Clone, Copy, PartialEq, Debug, Default, Serialize, Deserialize)]
pub struct DriftSummary {
    pub samples: usize,
    pub tau_end: f64,
    pub t_end: f64,
    pub max_abs_jc: f64,
    pub max_k0_drift: f64,
    pub max_k_drift: f64,
    pub max_abs_k: f64,
}

impl DriftSummary {
    pub fn from_samples(samples: &[TrajectorySample]) -> Self {
        let Some(first) = samples.first() else {
            return Self::default();
        };
        let last = samples.last().unwrap_or(first);
        let f = first.invariants;
        samples.iter().fold(Self { samples: samples.len(), tau_end: last.tau, t_end: last.t(), ..Self::default() }, |acc, s| {
            let i = s.invariants;
            Self {
                max_abs_jc: acc.max_abs_jc.max(i.jc.abs()),
                max_k0_drift: acc.max_k0_drift.max((i.k0 - f.k0).abs()),
                max_k_drift: acc.max_k_drift.max((i.k - f.k).abs()),
                max_abs_k: acc.max_abs_k.max(i.k.abs()),
                ..acc
            }
        })
    }
}

/// Stumpff functions `C(z)` and `S(z)`.
pub fn stumpff(z: f64) -> (f64, f64) {
    if z.abs() < 0.1 {
        // series, exact to rounding for |z| < 0.1
        let (mut c, mut s) = (0.0, 0.0);
        let mut term_c = 0.5;
        let mut term_s = 1.0 / 6.0;
        for k in 0..12 {
            c += term_c;
            s += term_s;
            let k = k as f64;
            term_c *= -z / ((2.0 * k + 3.0) * (2.0 * k + 4.0));
            term_s *= -z / ((2.0 * k + 4.0) * (2.0 * k + 5.0));
        }
        (c, s)
    } else if z > 0.0 {
        let q = z.sqrt();
        let h = (0.5 * q).sin();
        (2.0 * h * h / z, (q - q.sin()) / (q * z))
    } else {
        let q = (-z).sqrt();
        let h = (0.5 * q).sinh();
        (2.0 * h * h / -z, (q.sinh() - q) / (q * -z))
    }
}

pub const KEPLER_MAX_ITERATIONS: usize = 50;
pub const KEPLER_TOLERANCE: f64 = 1e-13;

/// Two-body propagation by universal variables: the state after time `t`.
pub fn kepler_oracle(s0: &CartesianState, t: f64) -> Result<CartesianState> {
    let mu = s0.mu;
    let r0 = s0.radius();
    if !(r0 > 0.0) {
        return Err(KsError::Collision);
    }
    if t == 0.0 {
        return Ok(*s0);
    }
    let sq = mu.sqrt();
    let sigma0 = s0.x.dot(&s0.p) / sq;
    let alpha = 2.0 / r0 - s0.p.norm_squared() / mu;

    // elliptic orbits: fold t into one period
    let t = if alpha > 0.0 {
        let period = 2.0 * PI / (sq * alpha.powf(1.5));
        t - period * (t / period).floor()
    } else {
        t
    };
    let target = sq * t;
    let scale = r0.max(1.0);

    let f = |chi: f64| {
        let z = alpha * chi * chi;
        let (c, s) = stumpff(z);
        let val = sigma0 * chi * chi * c + (1.0 - alpha * r0) * chi * chi * chi * s + r0 * chi - target;
        let r = sigma0 * chi * (1.0 - z * s) + (1.0 - alpha * r0) * chi * chi * c + r0;
        (val, r)
    };

    // F is increasing in χ with slope r > 0, so bracket the root and safeguard Newton
    let mut chi = if alpha > 0.0 { sq * t * alpha } else { target / r0 };
    let (mut lo, mut hi) = if target >= 0.0 { (0.0, f64::INFINITY) } else { (f64::NEG_INFINITY, 0.0) };
    let mut converged = false;
    for _ in 0..KEPLER_MAX_ITERATIONS {
        let (val, r) = f(chi);
        if val.abs() <= KEPLER_TOLERANCE * scale || (val / r).abs() <= 4.0 * f64::EPSILON * chi.abs() {
            converged = true;
            break;
        }
        if val > 0.0 {
            hi = hi.min(chi);
        } else {
            lo = lo.max(chi);
        }
        let mut next = chi - val / r;
        if !(next > lo && next < hi) {
            next = if lo.is_finite() && hi.is_finite() {
                0.5 * (lo + hi)
            } else if hi.is_finite() {
                hi - 2.0 * (hi - chi).abs().max(1.0)
            } else {
                lo + 2.0 * (chi - lo).abs().max(1.0)
            };
        }
        if next == chi {
            converged = true;
            break;
        }
        chi = next;
    }
    if !converged {
        return Err(KsError::NoConvergence(KEPLER_MAX_ITERATIONS));
    }
    let z = alpha * chi * chi;
    let (c, s) = stumpff(z);
    let fl = 1.0 - chi * chi / r0 * c;
    let gl = t - chi * chi * chi * s / sq;
    let x = fl * s0.x + gl * s0.p;
    let r = x.norm();
    let fdot = sq / (r * r0) * (z * chi * s - chi);
    let gdot = 1.0 - chi * chi / r * c;
    CartesianState::new(x, fdot * s0.x + gdot * s0.p, mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::Representative;
    use crate::dynamics::KsSystem;
    use crate::invariants;
    use crate::rotframe::{ClosedFormSolution, RotatingFrameSpec, RotatingKepler};
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector3;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn pericenter(a: f64, e: f64) -> CartesianState {
        let rp = a * (1.0 - e);
        CartesianState::new(Vector3::new(rp, 0.0, 0.0), Vector3::new(0.0, ((1.0 + e) / rp).sqrt(), 0.0), 1.0).unwrap()
    }

    fn circular() -> CartesianState {
        CartesianState::new(Vector3::x(), Vector3::y(), 1.0).unwrap()
    }

    #[test]
    fn stumpff_matches_closed_forms() {
        for z in [-30.0, -1.0, -0.2, -0.09, -1e-6, 0.0, 1e-6, 0.09, 0.2, 1.0, 30.0] {
            let (c, s) = stumpff(z);
            let (cr, sr) = if z > 0.0 {
                let q = f64::sqrt(z);
                ((1.0 - q.cos()) / z, (q - q.sin()) / (q * q * q))
            } else if z < 0.0 {
                let q = f64::sqrt(-z);
                ((q.cosh() - 1.0) / -z, (q.sinh() - q) / (q * q * q))
            } else {
                (0.5, 1.0 / 6.0)
            };
            let tol = if z.abs() < 0.1 { 1e-9 } else { 1e-14 };
            assert!((c - cr).abs() < tol && (s - sr).abs() < tol, "z = {z}");
        }
        // continuity across the series switch
        let (a, b) = (stumpff(0.1 - 1e-15), stumpff(0.1 + 1e-15));
        assert!((a.0 - b.0).abs() < 1e-15 && (a.1 - b.1).abs() < 1e-15);
    }

    #[test]
    fn oracle_examples() {
        let s = circular();
        assert_eq!(kepler_oracle(&s, 0.0).unwrap(), s);
        let back = kepler_oracle(&s, 2.0 * PI).unwrap();
        assert!((back.x - s.x).amax() < 1e-12 && (back.p - s.p).amax() < 1e-12);
        let quarter = kepler_oracle(&s, 0.5 * PI).unwrap();
        assert_abs_diff_eq!(quarter.x, Vector3::y(), epsilon = 1e-14);
        assert_abs_diff_eq!(quarter.p, -Vector3::x(), epsilon = 1e-14);

        let s = pericenter(1.0, 0.9);
        let back = kepler_oracle(&s, 2.0 * PI).unwrap();
        assert!((back.x - s.x).amax() < 1e-11 && (back.p - s.p).amax() < 1e-11);
        let apo = kepler_oracle(&s, PI).unwrap();
        assert_abs_diff_eq!(apo.x, Vector3::new(-1.9, 0.0, 0.0), epsilon = 1e-12);

        let origin = CartesianState::new(Vector3::zeros(), Vector3::x(), 1.0).unwrap();
        assert_eq!(kepler_oracle(&origin, 1.0), Err(KsError::Collision));
    }

    #[test]
    fn oracle_conserves_integrals() {
        let mut rng = StdRng::seed_from_u64(21);
        for _ in 0..300 {
            let s = CartesianState::new(
                Vector3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
                Vector3::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)),
                rng.random_range(0.5..2.0),
            )
            .unwrap();
            let t = rng.random_range(-20.0..20.0);
            let s1 = kepler_oracle(&s, t).unwrap();
            let e0 = dynamics::kepler_hamiltonian_cartesian(&s).unwrap();
            let e1 = dynamics::kepler_hamiltonian_cartesian(&s1).unwrap();
            let scale = e0.abs().max(s.mu / s.radius()).max(s.mu / s1.radius());
            assert!((e1 - e0).abs() <= 1e-12 * scale, "{e0} {e1}");
            let (g0, g1) = (s.angular_momentum(), s1.angular_momentum());
            assert!((g1 - g0).norm() <= 1e-12 * g0.norm().max(1e-3));
            // composition
            let s2 = kepler_oracle(&kepler_oracle(&s, 0.4 * t).unwrap(), 0.6 * t).unwrap();
            assert!((s2.x - s1.x).norm() <= 1e-9 * (1.0 + s1.x.norm()));
        }
    }

    #[test]
    fn oracle_handles_radial_and_hyperbolic_cases() {
        let s = CartesianState::new(Vector3::x(), Vector3::new(0.0, 3.0, 0.0), 1.0).unwrap();
        let s1 = kepler_oracle(&s, 5.0).unwrap();
        let e0 = dynamics::kepler_hamiltonian_cartesian(&s).unwrap();
        assert!((dynamics::kepler_hamiltonian_cartesian(&s1).unwrap() - e0).abs() < 1e-12 * e0);
        // parabolic
        let s = CartesianState::new(Vector3::x(), Vector3::new(0.0, 2f64.sqrt(), 0.0), 1.0).unwrap();
        let s1 = kepler_oracle(&s, 3.0).unwrap();
        assert!(dynamics::kepler_hamiltonian_cartesian(&s1).unwrap().abs() < 1e-12);
        // backwards equals forwards of the time-reversed state
        let s = pericenter(1.5, 0.3);
        let back = kepler_oracle(&s, -1.1).unwrap();
        let rev = CartesianState::new(s.x, -s.p, 1.0).unwrap();
        let fwd = kepler_oracle(&rev, 1.1).unwrap();
        assert!((back.x - fwd.x).amax() < 1e-13);
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::new(0.0, 10).validate().is_err());
        assert!(IntegratorConfig::new(0.1, 0).validate().is_err());
        assert!(IntegratorConfig::new(0.1, 10).with_sample_every(0).validate().is_err());
        assert!(IntegratorConfig::new(0.1, 10).validate().is_ok());
        assert_eq!("RK4".parse::<Scheme>().unwrap(), Scheme::Rk4);
        assert_eq!("leapfrog".parse::<Scheme>().unwrap(), Scheme::Splitting);
        assert_eq!(step_count(0.1, 1.0), 10);
        assert_eq!(step_count(0.1, 1.05), 11);
        assert_eq!(step_count(0.1, 0.0), 0);
    }

    #[test]
    fn zero_span_emits_initial_sample_only() {
        let chart = KsChart::ks3(1.0).unwrap();
        let sys = KsSystem::unperturbed(chart, 1.0);
        let p0 = sys.initial_phase(&circular(), 0.0, Representative::Sks).unwrap();
        let out = integrate(&p0, &sys, &IntegratorConfig::new(0.1, 10), 0.0).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].phase, p0);
        let out = integrate_until_time(&p0, &sys, &IntegratorConfig::new(0.1, 10), 0.0).unwrap();
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn step_limit_and_final_tau() {
        let chart = KsChart::ks3(1.0).unwrap();
        let sys = KsSystem::unperturbed(chart, 1.0);
        let p0 = sys.initial_phase(&circular(), 0.0, Representative::Sks).unwrap();
        assert_eq!(integrate(&p0, &sys, &IntegratorConfig::new(0.1, 5), 1.0), Err(KsError::StepLimitExceeded(5)));
        let out = integrate(&p0, &sys, &IntegratorConfig::new(0.1, 20).with_sample_every(3), 1.05).unwrap();
        assert_eq!(out.last().unwrap().tau, 1.05);
        assert_eq!(out.len(), 1 + 3 + 1);
        let t = time_of(&out);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn oscillator_period_returns_to_start() {
        let chart = KsChart::ks3(2.0).unwrap();
        let sys = KsSystem::unperturbed(chart, 1.0);
        let s = CartesianState::new(Vector3::new(0.9, 0.2, -0.3), Vector3::new(-0.1, 0.8, 0.4), 1.0).unwrap();
        let p0 = sys.initial_phase(&s, 0.0, Representative::Rule1).unwrap();
        let w0 = dynamics::omega0(p0.pt, &chart).unwrap();
        let period = 2.0 * PI / w0;
        let out = integrate(&p0, &sys, &IntegratorConfig::new(period / 2000.0, 3000), period).unwrap();
        let end = out.last().unwrap().phase;
        assert!(end.v.max_abs_diff(&p0.v) < 1e-10);
        assert!(end.pv.max_abs_diff(&p0.pv) < 1e-10);
    }

    #[test]
    fn circular_orbit_time_is_linear() {
        let chart = KsChart::ks1(2.0).unwrap();
        let sys = KsSystem::unperturbed(chart, 1.0);
        let p0 = sys.initial_phase(&circular(), 0.0, Representative::Sks).unwrap();
        let cfg = IntegratorConfig::new(0.01, 1000).with_scheme(Scheme::Splitting);
        for s in &integrate(&p0, &sys, &cfg, 3.0).unwrap() {
            assert_abs_diff_eq!(s.t(), 4.0 * 1.0 / chart.alpha * s.tau, epsilon = 1e-13);
        }
        for s in &integrate(&p0, &sys, &cfg.with_scheme(Scheme::Rk4), 3.0).unwrap() {
            assert_abs_diff_eq!(s.t(), 4.0 * 1.0 / chart.alpha * s.tau, epsilon = 1e-8);
        }
    }

    #[test]
    fn time_channel_matches_quadrature() {
        let chart = KsChart::ks3(2.0).unwrap();
        let sys = KsSystem::unperturbed(chart, 1.0);
        let p0 = sys.initial_phase(&pericenter(1.0, 0.6), 0.0, Representative::Sks).unwrap();
        let out = integrate(&p0, &sys, &IntegratorConfig::new(PI / 20000.0, 30000), PI).unwrap();
        let a = time_of(&out);
        let b = trapezoid_time(&out, &chart);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-8, "{x} vs {y}");
        }
        assert_abs_diff_eq!(*a.last().unwrap(), 2.0 * PI, epsilon = 1e-10);
    }

    #[test]
    fn interpolated_tau_inverts_time() {
        let chart = KsChart::ks3(2.0).unwrap();
        let sys = KsSystem::unperturbed(chart, 1.0);
        let p0 = sys.initial_phase(&pericenter(1.0, 0.5), 0.0, Representative::Sks).unwrap();
        let out = integrate(&p0, &sys, &IntegratorConfig::new(PI / 500.0, 1000), PI).unwrap();
        let sol = ClosedFormSolution::new(p0, chart, RotatingFrameSpec::new(0.0, chart.c)).unwrap();
        for t in [0.0, 0.3, 1.7, 4.0, 6.2] {
            let tau = tau_at_time(&out, &chart, t).unwrap();
            assert!((sol.state_at(tau).unwrap().t - t).abs() < 1e-9, "t = {t}");
        }
        assert!(tau_at_time(&out, &chart, 100.0).is_none());
    }

    #[test]
    fn integrate_until_time_lands_on_target() {
        let chart = KsChart::ks3(2.0).unwrap();
        let sys = KsSystem::unperturbed(chart, 1.0);
        let s = pericenter(1.0, 0.7);
        let p0 = sys.initial_phase(&s, 0.0, Representative::Sks).unwrap();
        let out = integrate_until_time(&p0, &sys, &IntegratorConfig::new(PI / 2000.0, 100000), 9.0).unwrap();
        let last = out.last().unwrap();
        assert!((last.t() - 9.0).abs() < 1e-9);
        let oracle = kepler_oracle(&s, last.t()).unwrap();
        assert!((last.cartesian.x - oracle.x).norm() < 1e-9);
        assert!(integrate_until_time(&p0, &sys, &IntegratorConfig::new(0.01, 3), 9.0).is_err());
    }

    #[test]
    fn splitting_is_exact_without_perturbation() {
        let chart = KsChart::ks3(2.0).unwrap();
        let sys = KsSystem::unperturbed(chart, 1.0);
        let p0 = sys.initial_phase(&pericenter(1.0, 0.8), 0.0, Representative::Sks).unwrap();
        let cfg = IntegratorConfig::new(0.5, 100).with_scheme(Scheme::Splitting);
        let out = integrate(&p0, &sys, &cfg, 10.0).unwrap();
        let sol = ClosedFormSolution::new(p0, chart, RotatingFrameSpec::new(0.0, chart.c)).unwrap();
        for s in &out {
            let exact = sol.state_at(s.tau).unwrap();
            let (a, b) = (s.phase.to_array(), exact.to_array());
            for i in 0..10 {
                assert!((a[i] - b[i]).abs() < 1e-12, "tau {} component {i}", s.tau);
            }
        }
    }

    #[test]
    fn oscillator_drift_branches() {
        let chart = KsChart::ks3(1.0).unwrap();
        let v = crate::quat::Quaternion::new(0.3, 0.2, -0.1, 0.5);
        let pv = crate::quat::Quaternion::new(-0.2, 0.4, 0.1, 0.3);
        for pt in [0.3, 0.0, -0.3] {
            let p = KsPhase::new(v, pv, 1.0, pt);
            let exact = oscillator_drift(&p, &chart, 0.8);
            let sys = KsSystem::unperturbed(chart, 1.0);
            let mut q = p;
            for _ in 0..800 {
                q = rk4_step(&sys, &q, 0.001).unwrap();
            }
            let (a, b) = (exact.to_array(), q.to_array());
            for i in 0..10 {
                assert!((a[i] - b[i]).abs() < 1e-12, "pt {pt} component {i}: {} {}", a[i], b[i]);
            }
        }
    }

    #[test]
    fn splitting_converges_at_second_order_for_rotation() {
        let chart = KsChart::ks3(2.0).unwrap();
        let spec = RotatingFrameSpec::new(0.3, chart.c);
        let sys = RotatingKepler::new(chart, 1.0, spec).unwrap();
        let s = CartesianState::new(Vector3::new(0.8, 0.2, 0.3), Vector3::new(-0.2, 1.0, 0.1), 1.0).unwrap();
        let p0 = sys.initial_phase(&s, 0.0, Representative::Sks).unwrap();
        let sol = ClosedFormSolution::new(p0, chart, spec).unwrap();
        let exact = sol.state_at(3.0).unwrap();
        let err = |h: f64| {
            let out = integrate(&p0, &sys, &IntegratorConfig::new(h, 10000).with_scheme(Scheme::Splitting), 3.0).unwrap();
            out.last().unwrap().phase.v.max_abs_diff(&exact.v)
        };
        let (e1, e2) = (err(0.02), err(0.01));
        let order = (e1 / e2).log2();
        assert!((1.8..2.3).contains(&order), "order {order}");
    }

    #[test]
    fn collision_guard() {
        let chart = KsChart::ks3(1.0).unwrap();
        let sys = KsSystem::unperturbed(chart, 1.0);
        // radial infall straight through the origin
        let s = CartesianState::new(Vector3::z(), Vector3::zeros(), 1.0).unwrap();
        let p0 = sys.initial_phase(&s, 0.0, Representative::Sks).unwrap();
        let w0 = dynamics::omega0(p0.pt, &chart).unwrap();
        // v(τ) = v₀ cos(w₀τ) vanishes at a quarter period
        let quarter = 0.5 * PI / w0;
        let cfg = IntegratorConfig::new(quarter / 100.0, 1000);
        assert_eq!(integrate(&p0, &sys, &cfg, 2.0 * quarter), Err(KsError::Collision));
    }

    #[test]
    fn summary_of_unperturbed_circular_orbit() {
        let chart = KsChart::ks3(2.0).unwrap();
        let sys = KsSystem::unperturbed(chart, 1.0);
        let p0 = sys.initial_phase(&circular(), 0.0, Representative::Sks).unwrap();
        let out = integrate(&p0, &sys, &IntegratorConfig::new(PI / 2000.0, 3000), PI).unwrap();
        let sum = DriftSummary::from_samples(&out);
        assert_eq!(sum.samples, 2001);
        assert!(sum.max_abs_jc <= 1e-10 && sum.max_k_drift <= 1e-10 && sum.max_k0_drift <= 1e-10);
        assert_abs_diff_eq!(sum.t_end, 2.0 * PI, epsilon = 1e-10);
        let e = invariants::laplace_vector_cartesian(&out.last().unwrap().cartesian).unwrap();
        assert!(e.norm() < 1e-10);
    }
}
