//! Hamiltonians in Cartesian and KS variables, the Sundman time transformation
//! `dτ/dt = α/(4r)`, and the equations of motion of the perturbed oscillator
//! in the extended phase space.
//!
//! With `β = α/4` the KS Hamiltonian reads
//!
//! ```text
//! K = ½ V·V + (4 V*/α²) v·v − 4μ/α + P(v, V, v*)
//! ```
//!
//! and the motion takes place on the manifold `K = 0`.

use std::sync::Arc;

use crate::canon::{self, CartesianState, KsPhase};
use crate::error::{KsError, Result};
use crate::ksmap::{DefiningVector, KsChart};
use crate::quat::Quaternion;

/// Value of a perturbation term and its gradient with respect to the KS
/// coordinates, momenta and the time variable `v*`.
#[derive(Clone, Copy, PartialEq, Debug, Default)]
pub struct PerturbationEval {
    pub value: f64,
    pub d_v: Quaternion,
    pub d_pv: Quaternion,
    pub d_t: f64,
}

/// A term `P(v, V, v*)` added to the unperturbed KS Hamiltonian.
///
/// Implementations supply the gradient analytically; the test suites check it
/// against finite differences. `P` never depends on `V*`.
pub trait Perturbation: Send + Sync {
    fn evaluate(&self, p: &KsPhase, chart: &KsChart, mu: f64) -> Result<PerturbationEval>;

    fn name(&self) -> &str {
        "custom"
    }
}

/// `P = 0`.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoPerturbation;

impl Perturbation for NoPerturbation {
    fn evaluate(&self, _: &KsPhase, _: &KsChart, _: f64) -> Result<PerturbationEval> {
        Ok(PerturbationEval::default())
    }

    fn name(&self) -> &str {
        "none"
    }
}

/// `X·X/2 − μ/r`.
pub fn kepler_hamiltonian_cartesian(s: &CartesianState) -> Result<f64> {
    let r = s.radius();
    if !(r > 0.0) {
        return Err(KsError::Collision);
    }
    Ok(0.5 * s.p.norm_squared() - s.mu / r)
}

/// Unperturbed KS Hamiltonian and the audit term carried over from the
/// Cartesian kinetic energy.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct KsEnergy {
    /// `½ V·V + (4V*/α²) v·v − 4μ/α`.
    pub k0: f64,
    /// `−(J·c)²/(2αr)`, zero on the constraint manifold.
    pub constraint_term: f64,
}

pub fn ks_hamiltonian_unperturbed(p: &KsPhase, chart: &KsChart, mu: f64) -> KsEnergy {
    let a = chart.alpha;
    let k0 = 0.5 * p.pv.norm_squared() + 4.0 * p.pt / (a * a) * p.v.norm_squared() - 4.0 * mu / a;
    let r = chart.radius(&p.v);
    let jc = canon::bilinear_invariant(&p.v, &p.pv, &chart.c);
    let constraint_term = if r > 0.0 { -jc * jc / (2.0 * a * r) } else { 0.0 };
    KsEnergy { k0, constraint_term }
}

/// Full `K = K₀ + P`.
pub fn ks_hamiltonian(p: &KsPhase, chart: &KsChart, mu: f64, pert: &dyn Perturbation) -> Result<f64> {
    Ok(ks_hamiltonian_unperturbed(p, chart, mu).k0 + pert.evaluate(p, chart, mu)?.value)
}

/// `dτ/dt = α/(4r)`.
pub fn sundman_rate(r: f64, chart: &KsChart) -> Result<f64> {
    if !(r > 0.0) {
        return Err(KsError::Collision);
    }
    Ok(chart.alpha / (4.0 * r))
}

/// `ω₀² = 8V*/α²`; negative for hyperbolic motion.
pub fn omega0_squared(pt: f64, chart: &KsChart) -> f64 {
    8.0 * pt / (chart.alpha * chart.alpha)
}

/// `ω₀ = 2√(2V*)/α`, defined for bound motion only.
pub fn omega0(pt: f64, chart: &KsChart) -> Result<f64> {
    let w2 = omega0_squared(pt, chart);
    if !(w2 > 0.0) || !w2.is_finite() {
        return Err(KsError::UnboundOrbit(w2));
    }
    Ok(w2.sqrt())
}

/// Value of `V*` putting a state on the `K = 0` manifold.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct EnergyManifold {
    pub pt: f64,
}

impl EnergyManifold {
    pub fn apply(&self, p: &KsPhase) -> KsPhase {
        KsPhase { pt: self.pt, ..*p }
    }
}

/// Solves `K = 0` for `V*`, which enters linearly through `(4V*/α²) v·v`.
pub fn fix_energy_manifold(p: &KsPhase, chart: &KsChart, mu: f64, pert: &dyn Perturbation) -> Result<EnergyManifold> {
    let vv = p.v.norm_squared();
    if !(vv > 0.0) {
        return Err(KsError::DegenerateState("v·v = 0, V* cannot be fixed"));
    }
    let a = chart.alpha;
    let rest = 0.5 * p.pv.norm_squared() - 4.0 * mu / a + pert.evaluate(p, chart, mu)?.value;
    Ok(EnergyManifold { pt: -rest * a * a / (4.0 * vv) })
}

/// Hamilton's equations of `K = K₀ + P` with respect to Sundman time:
///
/// ```text
/// v'  =  V + ∂P/∂V        V'  = −ω₀² v − ∂P/∂v
/// v*' =  4r/α             V*' = −∂P/∂v*
/// ```
pub fn ks_equations_of_motion(p: &KsPhase, chart: &KsChart, mu: f64, pert: &dyn Perturbation) -> Result<KsPhase> {
    let g = pert.evaluate(p, chart, mu)?;
    let w2 = omega0_squared(p.pt, chart);
    Ok(KsPhase { v: p.pv + g.d_pv, pv: -(p.v.scale(w2) + g.d_v), t: 4.0 * chart.radius(&p.v) / chart.alpha, pt: -g.d_t })
}

/// Unperturbed part of the vector field.
pub fn oscillator_rate(p: &KsPhase, chart: &KsChart) -> KsPhase {
    KsPhase { v: p.pv, pv: -p.v.scale(omega0_squared(p.pt, chart)), t: 4.0 * chart.radius(&p.v) / chart.alpha, pt: 0.0 }
}

/// Gradient of `J·c` with respect to `(v, V)`.
pub fn constraint_gradient(v: &Quaternion, pv: &Quaternion, c: &DefiningVector) -> (Quaternion, Quaternion) {
    let c = c.vector();
    let d_v = Quaternion::from_parts(-c.dot(&pv.v), pv.w * c + pv.v.cross(&c));
    let d_pv = Quaternion::from_parts(c.dot(&v.v), -v.w * c + c.cross(&v.v));
    (d_v, d_pv)
}

/// `d(J·c)/dτ` along a given rate of change of the state.
pub fn constraint_rate(p: &KsPhase, rate: &KsPhase, c: &DefiningVector) -> f64 {
    let (d_v, d_pv) = constraint_gradient(&p.v, &p.pv, c);
    d_v.dot(&rate.v) + d_pv.dot(&rate.pv)
}

/// Flow generated by a `Ψ J·c` term: right multiplication of both
/// quaternions by `(cos φ, sin φ c)`. Invisible in Cartesian variables.
pub fn gauge_flow(v: &Quaternion, pv: &Quaternion, c: &DefiningVector, phi: f64) -> (Quaternion, Quaternion) {
    let rotor = crate::ksmap::fiber_rotor(phi, c);
    (*v * rotor, *pv * rotor)
}

/// A vector field on the extended KS phase space, integrated in Sundman time.
pub trait VectorField: Send + Sync {
    fn chart(&self) -> &KsChart;

    fn mu(&self) -> f64;

    fn rate(&self, p: &KsPhase) -> Result<KsPhase>;

    /// Full Hamiltonian, reported along trajectories.
    fn hamiltonian(&self, p: &KsPhase) -> Result<f64>;
}

/// Kepler problem in KS variables with a pluggable perturbation.
#[derive(Clone)]
pub struct KsSystem {
    pub chart: KsChart,
    pub mu: f64,
    pub perturbation: Arc<dyn Perturbation>,
}

impl KsSystem {
    pub fn new(chart: KsChart, mu: f64, perturbation: Arc<dyn Perturbation>) -> Self {
        Self { chart, mu, perturbation }
    }

    pub fn unperturbed(chart: KsChart, mu: f64) -> Self {
        Self::new(chart, mu, Arc::new(NoPerturbation))
    }

    /// KS phase for a Cartesian state at physical time `t`, on the `K = 0` manifold.
    pub fn initial_phase(&self, s: &CartesianState, t: f64, rep: canon::Representative) -> Result<KsPhase> {
        let (v, pv) = canon::cartesian_to_ks(s, &self.chart, rep)?;
        let p = KsPhase::new(v, pv, t, 0.0);
        Ok(fix_energy_manifold(&p, &self.chart, self.mu, self.perturbation.as_ref())?.apply(&p))
    }
}

impl std::fmt::Debug for KsSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KsSystem")
            .field("chart", &self.chart)
            .field("mu", &self.mu)
            .field("perturbation", &self.perturbation.name())
            .finish()
    }
}

impl VectorField for KsSystem {
    fn chart(&self) -> &KsChart {
        &self.chart
    }

    fn mu(&self) -> f64 {
        self.mu
    }

    fn rate(&self, p: &KsPhase) -> Result<KsPhase> {
        ks_equations_of_motion(p, &self.chart, self.mu, self.perturbation.as_ref())
    }

    fn hamiltonian(&self, p: &KsPhase) -> Result<f64> {
        ks_hamiltonian(p, &self.chart, self.mu, self.perturbation.as_ref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::{cartesian_to_ks, ks_to_cartesian, Representative};
    use crate::ksmap::ks_forward;
    use approx::assert_abs_diff_eq;
    use nalgebra::Vector3;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn rv(rng: &mut StdRng, s: f64) -> Vector3<f64> {
        Vector3::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(-s..s))
    }

    /// A time-dependent test perturbation: `P = (4r/α) ε (x·a) sin(ν v*)`.
    struct Forced {
        eps: f64,
        nu: f64,
        a: Vector3<f64>,
    }

    impl Perturbation for Forced {
        fn evaluate(&self, p: &KsPhase, chart: &KsChart, _: f64) -> Result<PerturbationEval> {
            // 4r/α (x·a) = 4/α² (v·v)(v c v̄ · a)/α is a polynomial in v
            let al = chart.alpha;
            let vv = p.v.norm_squared();
            let xa = ks_forward(&p.v, chart).x.dot(&self.a);
            let (s, co) = (self.nu * p.t).sin_cos();
            let amp = 4.0 * vv / (al * al);
            // ∂(x·a)/∂v = 2/α ((a·v..)) via the sandwich: d(v c v̄)·a = 2 (a v c̄ ... )
            let dxa = (Quaternion::pure(self.a) * p.v * chart.c.as_quaternion().conj()).scale(2.0 / al);
            let d_v = (p.v.scale(8.0 / (al * al) * xa) + dxa.scale(amp)).scale(self.eps * s);
            Ok(PerturbationEval { value: self.eps * amp * xa * s, d_v, d_pv: Quaternion::zero(), d_t: self.eps * amp * xa * self.nu * co })
        }
    }

    fn fd_check(pert: &dyn Perturbation, p: &KsPhase, chart: &KsChart) {
        let g = pert.evaluate(p, chart, 1.0).unwrap();
        let base = p.to_array();
        let h = 1e-6;
        let grad = [g.d_v.to_array(), g.d_pv.to_array()].concat();
        for i in 0..9 {
            let mut a = base;
            let mut b = base;
            a[i] += h;
            b[i] -= h;
            let fa = pert.evaluate(&KsPhase::from_array(a), chart, 1.0).unwrap().value;
            let fb = pert.evaluate(&KsPhase::from_array(b), chart, 1.0).unwrap().value;
            let fd = (fa - fb) / (2.0 * h);
            let an = if i < 8 { grad[i] } else { g.d_t };
            assert!((fd - an).abs() <= 1e-6 * (1.0 + an.abs()), "component {i}: fd {fd} vs {an}");
        }
    }

    #[test]
    fn cartesian_energy_examples() {
        let s = CartesianState::new(Vector3::x(), Vector3::y(), 1.0).unwrap();
        assert_eq!(kepler_hamiltonian_cartesian(&s).unwrap(), -0.5);
        let s = CartesianState::new(Vector3::x(), Vector3::new(0.0, 2f64.sqrt(), 0.0), 1.0).unwrap();
        assert_abs_diff_eq!(kepler_hamiltonian_cartesian(&s).unwrap(), 0.0, epsilon = 1e-15);
        let s = CartesianState::new(Vector3::zeros(), Vector3::y(), 1.0).unwrap();
        assert_eq!(kepler_hamiltonian_cartesian(&s), Err(KsError::Collision));
    }

    #[test]
    fn ks_energy_vanishes_on_bound_states() {
        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..200 {
            let c = crate::ksmap::DefiningVector::normalized(rv(&mut rng, 1.0)).unwrap();
            let chart = KsChart::new(c, rng.random_range(0.5..3.0)).unwrap();
            let s = CartesianState::new(rv(&mut rng, 2.0), rv(&mut rng, 0.5), rng.random_range(0.5..2.0)).unwrap();
            let e = kepler_hamiltonian_cartesian(&s).unwrap();
            let (v, pv) = cartesian_to_ks(&s, &chart, Representative::Rule1).unwrap();
            let p = KsPhase::new(v, pv, 0.0, -e);
            let k = ks_hamiltonian_unperturbed(&p, &chart, s.mu);
            assert!(k.k0.abs() < 1e-12 * (1.0 + 4.0 * s.mu / chart.alpha));
            assert!(k.constraint_term.abs() < 1e-25);
            // cross-picture: (α/(4r)) K₀ = H* + V*
            let r = s.radius();
            let h_star = chart.alpha / (8.0 * r) * pv.norm_squared() - s.mu / r;
            assert!((h_star - e).abs() < 1e-12 * (1.0 + e.abs()));
        }
    }

    #[test]
    fn ks_energy_rest_state_and_frequency_form() {
        let chart = KsChart::ks3(2.0).unwrap();
        let v = Quaternion::new(0.0, 0.0, 0.0, 1.5);
        let r = chart.radius(&v);
        let p = KsPhase::new(v, Quaternion::zero(), 0.0, 0.3);
        let k = ks_hamiltonian_unperturbed(&p, &chart, 1.0).k0;
        assert_abs_diff_eq!(k, 4.0 * 0.3 * r / 2.0 - 2.0, epsilon = 1e-15);

        let p = KsPhase::new(Quaternion::new(0.1, 0.2, -0.3, 0.4), Quaternion::new(0.5, -0.1, 0.2, 0.0), 0.0, 0.7);
        let w0 = omega0(p.pt, &chart).unwrap();
        assert_abs_diff_eq!(w0, 2.0 * (2.0 * 0.7f64).sqrt() / 2.0, epsilon = 1e-15);
        let alt = 0.5 * p.pv.norm_squared() + 0.5 * w0 * w0 * p.v.norm_squared() - 2.0;
        assert_abs_diff_eq!(ks_hamiltonian_unperturbed(&p, &chart, 1.0).k0, alt, epsilon = 1e-14);
    }

    #[test]
    fn sundman_examples() {
        let chart = KsChart::ks3(2.0).unwrap();
        assert_eq!(sundman_rate(0.5, &chart).unwrap(), 1.0);
        assert_eq!(sundman_rate(1.0, &chart).unwrap(), 0.5);
        assert_eq!(sundman_rate(0.0, &chart), Err(KsError::Collision));
    }

    #[test]
    fn energy_manifold_examples() {
        let chart = KsChart::ks3(1.0).unwrap();
        let s = CartesianState::new(Vector3::x(), Vector3::y(), 1.0).unwrap();
        let (v, pv) = cartesian_to_ks(&s, &chart, Representative::Sks).unwrap();
        let m = fix_energy_manifold(&KsPhase::new(v, pv, 0.0, 0.0), &chart, 1.0, &NoPerturbation).unwrap();
        assert_abs_diff_eq!(m.pt, 0.5, epsilon = 1e-15);

        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..50 {
            let s = CartesianState::new(rv(&mut rng, 2.0), rv(&mut rng, 1.5), 1.0).unwrap();
            let (v, pv) = cartesian_to_ks(&s, &chart, Representative::Sks).unwrap();
            let m = fix_energy_manifold(&KsPhase::new(v, pv, 0.0, 0.0), &chart, 1.0, &NoPerturbation).unwrap();
            let e = kepler_hamiltonian_cartesian(&s).unwrap();
            assert!((m.pt + e).abs() < 1e-12 * (1.0 + e.abs()));
        }

        let zero = KsPhase::default();
        assert!(matches!(fix_energy_manifold(&zero, &chart, 1.0, &NoPerturbation), Err(KsError::DegenerateState(_))));
    }

    #[test]
    fn unperturbed_motion_is_four_oscillators() {
        let chart = KsChart::ks1(1.5).unwrap();
        let p = KsPhase::new(Quaternion::new(0.3, -0.2, 0.5, 0.1), Quaternion::new(0.4, 0.1, -0.3, 0.2), 0.0, 0.6);
        let d = ks_equations_of_motion(&p, &chart, 1.0, &NoPerturbation).unwrap();
        let w2 = omega0_squared(0.6, &chart);
        assert_eq!(d.v, p.pv);
        assert!(d.pv.max_abs_diff(&(-p.v.scale(w2))) < 1e-16);
        assert_eq!(d.pt, 0.0);
        assert_abs_diff_eq!(d.t, 4.0 * chart.radius(&p.v) / 1.5, epsilon = 1e-16);
        assert_eq!(d, oscillator_rate(&p, &chart));
    }

    #[test]
    fn equations_match_finite_differences_of_k() {
        let chart = KsChart::new(crate::ksmap::DefiningVector::normalized(Vector3::new(0.2, -0.5, 0.8)).unwrap(), 1.3).unwrap();
        let pert = Forced { eps: 0.05, nu: 0.7, a: Vector3::new(0.3, 0.1, -0.4) };
        let mut rng = StdRng::seed_from_u64(77);
        for _ in 0..20 {
            let arr: [f64; 10] = std::array::from_fn(|i| if i == 9 { rng.random_range(0.1..1.0) } else { rng.random_range(-1.0..1.0) });
            let p = KsPhase::from_array(arr);
            fd_check(&pert, &p, &chart);
            let d = ks_equations_of_motion(&p, &chart, 1.0, &pert).unwrap();
            let k = |q: [f64; 10]| ks_hamiltonian(&KsPhase::from_array(q), &chart, 1.0, &pert).unwrap();
            let h = 1e-6;
            let partial = |i: usize| {
                let (mut a, mut b) = (arr, arr);
                a[i] += h;
                b[i] -= h;
                (k(a) - k(b)) / (2.0 * h)
            };
            let rate = d.to_array();
            // q' = ∂K/∂p, p' = −∂K/∂q
            for i in 0..4 {
                let expect_q = partial(i + 4);
                let expect_p = -partial(i);
                assert!((rate[i] - expect_q).abs() <= 1e-6 * (1.0 + expect_q.abs()));
                assert!((rate[i + 4] - expect_p).abs() <= 1e-6 * (1.0 + expect_p.abs()));
            }
            assert!((rate[8] - partial(9)).abs() <= 1e-6 * (1.0 + rate[8].abs()));
            assert!((rate[9] + partial(8)).abs() <= 1e-6 * (1.0 + rate[9].abs()));
        }
    }

    #[test]
    fn constraint_is_stationary_for_unperturbed_flow() {
        let mut rng = StdRng::seed_from_u64(12);
        for _ in 0..200 {
            let c = crate::ksmap::DefiningVector::normalized(rv(&mut rng, 1.0)).unwrap();
            let chart = KsChart::new(c, 1.0).unwrap();
            let s = CartesianState::new(rv(&mut rng, 2.0), rv(&mut rng, 1.0), 1.0).unwrap();
            let sys = KsSystem::unperturbed(chart, 1.0);
            let p = sys.initial_phase(&s, 0.0, Representative::Rule1).unwrap();
            let d = sys.rate(&p).unwrap();
            assert!(constraint_rate(&p, &d, &chart.c).abs() < 1e-12);
        }
    }

    #[test]
    fn constraint_gradient_matches_finite_differences() {
        let c = crate::ksmap::DefiningVector::normalized(Vector3::new(0.3, 0.4, -0.2)).unwrap();
        let v = Quaternion::new(0.3, -0.7, 0.2, 0.5);
        let pv = Quaternion::new(-0.4, 0.6, 0.9, -0.1);
        let (dv, dpv) = constraint_gradient(&v, &pv, &c);
        let h = 1e-6;
        for i in 0..4 {
            let mut e = [0.0; 4];
            e[i] = h;
            let e = Quaternion::from_array(e);
            let fd_v = (canon::bilinear_invariant(&(v + e), &pv, &c) - canon::bilinear_invariant(&(v - e), &pv, &c)) / (2.0 * h);
            let fd_p = (canon::bilinear_invariant(&v, &(pv + e), &c) - canon::bilinear_invariant(&v, &(pv - e), &c)) / (2.0 * h);
            assert!((fd_v - dv.to_array()[i]).abs() < 1e-9);
            assert!((fd_p - dpv.to_array()[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn gauge_flow_examples() {
        let c = crate::ksmap::DefiningVector::ks3();
        let chart = KsChart::ks3(1.0).unwrap();
        let v = Quaternion::new(0.2, 0.4, -0.1, 0.8);
        let pv = Quaternion::new(-0.3, 0.2, 0.5, 0.1);
        assert_eq!(gauge_flow(&v, &pv, &c, 0.0), (v, pv));
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..100 {
            let phi = rng.random_range(-4.0..4.0);
            let (w, pw) = gauge_flow(&v, &pv, &c, phi);
            let a = ks_to_cartesian(&KsPhase::new(v, pv, 0.0, 0.0), &chart, 1.0).unwrap();
            let b = ks_to_cartesian(&KsPhase::new(w, pw, 0.0, 0.0), &chart, 1.0).unwrap();
            assert!((a.x - b.x).amax() < 1e-14);
            assert!((a.p - b.p).amax() < 1e-14);
            assert!((canon::bilinear_invariant(&v, &pv, &c) - canon::bilinear_invariant(&w, &pw, &c)).abs() < 1e-15);
        }
    }
}
