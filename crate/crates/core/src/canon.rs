//! Canonical extension of the point transformation: KS momenta from Cartesian
//! momenta and back, the bilinear constraint `J·c = 0`, and momenta of the SKS
//! representative.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{KsError, Result};
use crate::ksmap::{self, CartesianPosition, DefiningVector, KsChart, Sign};
use crate::quat::{Quaternion, UnitQuaternion};

/// Tolerance on `|J·c|` for KS phases supplied from outside the crate.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-10;

/// Point of the extended KS phase space.
///
/// `t` imitates physical time and `pt` is its conjugate momentum, which equals
/// minus the energy on the `K = 0` manifold.
#[derive(Clone, Copy, PartialEq, Debug, Default, Serialize, Deserialize)]
pub struct KsPhase {
    pub v: Quaternion,
    #[serde(rename = "V")]
    pub pv: Quaternion,
    #[serde(rename = "v_star")]
    pub t: f64,
    #[serde(rename = "V_star")]
    pub pt: f64,
}

impl KsPhase {
    pub fn new(v: Quaternion, pv: Quaternion, t: f64, pt: f64) -> Self {
        Self { v, pv, t, pt }
    }

    pub fn to_array(&self) -> [f64; 10] {
        let [a, b, c, d] = self.v.to_array();
        let [e, f, g, h] = self.pv.to_array();
        [a, b, c, d, e, f, g, h, self.t, self.pt]
    }

    pub fn from_array(a: [f64; 10]) -> Self {
        Self { v: Quaternion::new(a[0], a[1], a[2], a[3]), pv: Quaternion::new(a[4], a[5], a[6], a[7]), t: a[8], pt: a[9] }
    }

    /// `self + h·rate`, treating `rate` as a tangent vector.
    pub fn advanced(&self, rate: &KsPhase, h: f64) -> KsPhase {
        KsPhase { v: self.v + rate.v.scale(h), pv: self.pv + rate.pv.scale(h), t: self.t + h * rate.t, pt: self.pt + h * rate.pt }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|a| a.is_finite())
    }
}

/// Cartesian position, momentum per unit mass and gravitational parameter.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct CartesianState {
    pub x: Vector3<f64>,
    #[serde(rename = "X")]
    pub p: Vector3<f64>,
    pub mu: f64,
}

impl CartesianState {
    pub fn new(x: Vector3<f64>, p: Vector3<f64>, mu: f64) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(KsError::InvalidInput(format!("mu must be positive, got {mu}")));
        }
        Ok(Self { x, p, mu })
    }

    pub fn radius(&self) -> f64 {
        self.x.norm()
    }

    pub fn angular_momentum(&self) -> Vector3<f64> {
        self.x.cross(&self.p)
    }
}

/// Cartesian momentum recovered from KS variables, with the scalar part
/// `X₀ = (J·c)/(2r)` kept for auditing.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct CartesianMomentum {
    pub p: Vector3<f64>,
    pub x0: f64,
}

/// `X = V c v̄ / (2r)`.
pub fn momenta_to_cartesian(v: &Quaternion, pv: &Quaternion, chart: &KsChart) -> Result<CartesianMomentum> {
    let r = chart.radius(v);
    if !(r > 0.0) {
        return Err(KsError::Collision);
    }
    let q = *pv * chart.c.as_quaternion() * v.conj();
    Ok(CartesianMomentum { p: q.v / (2.0 * r), x0: q.w / (2.0 * r) })
}

/// `V = 2 X v c̄ / α` with `X₀ = 0`.
pub fn cartesian_to_momenta(v: &Quaternion, p: &Vector3<f64>, chart: &KsChart) -> Quaternion {
    let c = chart.c.vector();
    let k = 2.0 / chart.alpha;
    let w = k * (v.w * c + v.v.cross(&c)).dot(p);
    let vec = k * (c.dot(&v.v) * p + v.v.dot(p) * c - c.dot(p) * v.v + v.w * c.cross(p));
    Quaternion::from_parts(w, vec)
}

/// `J = −v₀ V + V₀ v + v × V`, equal to the vector part of `v̄ ∧ V̄`.
pub fn bilinear_vector(v: &Quaternion, pv: &Quaternion) -> Vector3<f64> {
    -v.w * pv.v + pv.w * v.v + v.v.cross(&pv.v)
}

/// `J·c`; vanishes for every state built from Cartesian variables.
pub fn bilinear_invariant(v: &Quaternion, pv: &Quaternion, c: &DefiningVector) -> f64 {
    bilinear_vector(v, pv).dot(&c.vector())
}

/// Rejects a KS phase whose constraint value exceeds [`CONSTRAINT_TOLERANCE`].
pub fn check_constraint(p: &KsPhase, c: &DefiningVector) -> Result<f64> {
    let jc = bilinear_invariant(&p.v, &p.pv, c);
    if jc.abs() > CONSTRAINT_TOLERANCE || !jc.is_finite() {
        return Err(KsError::ConstraintViolation(jc));
    }
    Ok(jc)
}

/// Drops the constraint-violating component of the momenta: maps to Cartesian
/// `(x, X)` and rebuilds `V` from the vector part of `X`, keeping `v`.
pub fn project_constraint(p: &KsPhase, chart: &KsChart) -> Result<KsPhase> {
    let m = momenta_to_cartesian(&p.v, &p.pv, chart)?;
    Ok(KsPhase { pv: cartesian_to_momenta(&p.v, &m.p, chart), ..*p })
}

/// Closed-form momenta of the `sign` SKS representative:
/// `V₀ = −k (x × X)·c`, `V = k (r X + (x·X) c + (x × X) × c)` with
/// `k = ±√(2/(α r (1 + c·x̂)))`.
pub fn sks_momenta(x: &Vector3<f64>, p: &Vector3<f64>, chart: &KsChart, sign: Sign) -> Result<Quaternion> {
    let r = x.norm();
    if !(r > 0.0) {
        return Err(KsError::Collision);
    }
    let c = chart.c.vector();
    let cx = c.dot(x);
    let rpc = if cx >= 0.0 { r + cx } else { c.cross(x).norm_squared() / (r - cx) };
    if rpc < ksmap::POLE_EPSILON * r {
        return Err(KsError::Pole);
    }
    let k = sign.value() * (2.0 / (chart.alpha * rpc)).sqrt();
    let g = x.cross(p);
    Ok(Quaternion::from_parts(-k * g.dot(&c), k * (r * p + x.dot(p) * c + g.cross(&c))))
}

/// `V_s = ±V q_s`, with the gauge and sign produced by
/// [`ksmap::reduce_to_sks`] for the matching coordinates.
pub fn reduce_momenta_sks(pv: &Quaternion, gauge: &UnitQuaternion, sign: Sign) -> Quaternion {
    (*pv * gauge.quaternion()).scale(sign.value())
}

/// Which fiber member to use when converting Cartesian states.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum Representative {
    /// Pure-vector representative (`+` sign).
    #[default]
    Sks,
    /// First inversion rule with a positive scalar part.
    Rule1,
}

/// Cartesian state to KS coordinates and momenta (`t` and `pt` left at zero).
pub fn cartesian_to_ks(s: &CartesianState, chart: &KsChart, rep: Representative) -> Result<(Quaternion, Quaternion)> {
    let pos = CartesianPosition::new(s.x);
    let v = match rep {
        Representative::Sks => ksmap::ks_invert_sks(&pos, chart, Sign::Plus)?,
        Representative::Rule1 => ksmap::ks_invert(&pos, chart)?,
    };
    Ok((v, cartesian_to_momenta(&v, &s.p, chart)))
}

/// KS phase to Cartesian state (vector part of the momentum quaternion).
pub fn ks_to_cartesian(p: &KsPhase, chart: &KsChart, mu: f64) -> Result<CartesianState> {
    let x = ksmap::ks_forward(&p.v, chart);
    let m = momenta_to_cartesian(&p.v, &p.pv, chart)?;
    CartesianState::new(x.x, m.p, mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ksmap::{fiber_shift, ks_forward, ks_invert_sks, reduce_to_sks};
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn rv(rng: &mut StdRng, s: f64) -> Vector3<f64> {
        Vector3::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(-s..s))
    }

    fn rq(rng: &mut StdRng) -> Quaternion {
        Quaternion::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }

    fn random_chart(rng: &mut StdRng) -> KsChart {
        let c = DefiningVector::normalized(rv(rng, 1.0)).unwrap();
        KsChart::new(c, rng.random_range(0.2..3.0)).unwrap()
    }

    #[test]
    fn zero_momenta() {
        let ch = KsChart::ks3(1.0).unwrap();
        let v = Quaternion::new(0.2, 0.5, -0.1, 0.7);
        let m = momenta_to_cartesian(&v, &Quaternion::zero(), &ch).unwrap();
        assert_eq!(m.p, Vector3::zeros());
        assert_eq!(cartesian_to_momenta(&v, &Vector3::zeros(), &ch), Quaternion::zero());
        assert_eq!(momenta_to_cartesian(&Quaternion::zero(), &v, &ch), Err(KsError::Collision));
    }

    #[test]
    fn explicit_vector_form() {
        // v = 1, c = e3, α = 1: X = vec((0,P) e3)/2 = (P2, -P1, 0)/2, X0 = -P3/2
        let ch = KsChart::ks3(1.0).unwrap();
        let pv = Quaternion::new(0.0, 0.4, -1.2, 0.9);
        let m = momenta_to_cartesian(&Quaternion::identity(), &pv, &ch).unwrap();
        assert_abs_diff_eq!(m.p, Vector3::new(-0.6, -0.2, 0.0), epsilon = 1e-16);
        assert_abs_diff_eq!(m.x0, -0.45, epsilon = 1e-16);
        assert_abs_diff_eq!(m.x0, bilinear_invariant(&Quaternion::identity(), &pv, &ch.c) / 2.0, epsilon = 1e-16);

        // the expanded component form against the quaternion product
        let mut rng = StdRng::seed_from_u64(2);
        for _ in 0..100 {
            let ch = random_chart(&mut rng);
            let (v, pv) = (rq(&mut rng), rq(&mut rng));
            let c = ch.c.vector();
            let r = ch.radius(&v);
            let expanded =
                (c.dot(&v.v) * pv.v + (v.w * pv.w - v.v.dot(&pv.v)) * c + (pv.w * v.v + v.w * pv.v).cross(&c) + c.dot(&pv.v) * v.v)
                    / (2.0 * r);
            let m = momenta_to_cartesian(&v, &pv, &ch).unwrap();
            assert!((m.p - expanded).amax() < 1e-13 * (1.0 + expanded.amax()));
            // V = 2 X v c̄ / α as a product
            let p = rv(&mut rng, 1.0);
            let prod = (Quaternion::pure(p) * v * ch.c.as_quaternion().conj()).scale(2.0 / ch.alpha);
            assert!(cartesian_to_momenta(&v, &p, &ch).max_abs_diff(&prod) < 1e-14);
        }
    }

    #[test]
    fn round_trip_example() {
        let ch = KsChart::ks3(1.0).unwrap();
        let v = ks_invert_sks(&CartesianPosition::new(Vector3::z()), &ch, Sign::Plus).unwrap();
        let p = Vector3::new(0.8, 0.0, 0.0);
        let pv = cartesian_to_momenta(&v, &p, &ch);
        let m = momenta_to_cartesian(&v, &pv, &ch).unwrap();
        assert_abs_diff_eq!(m.p, p, epsilon = 1e-16);
        assert_eq!(m.x0, 0.0);
    }

    #[test]
    fn bilinear_examples() {
        let c = DefiningVector::ks3();
        let v = Quaternion::new(0.3, 0.1, -0.4, 0.2);
        assert!(bilinear_invariant(&v, &v.scale(2.5), &c).abs() < 1e-15);
        let v = Quaternion::new(0.0, 0.0, 0.0, 1.0);
        let pv = Quaternion::new(0.0, 1.0, 0.0, 0.0);
        assert_eq!(bilinear_vector(&v, &pv), Vector3::y());
        assert_eq!(bilinear_invariant(&v, &pv, &c), 0.0);
    }

    #[test]
    fn bilinear_matches_quaternion_cross_and_ks1_form() {
        let mut rng = StdRng::seed_from_u64(4);
        for _ in 0..100 {
            let (v, pv) = (rq(&mut rng), rq(&mut rng));
            let c = DefiningVector::normalized(rv(&mut rng, 1.0)).unwrap();
            let via_cross = v.conj().cross(&pv.conj()).dot(&c.as_quaternion());
            assert!((bilinear_invariant(&v, &pv, &c) - via_cross).abs() < 1e-15);

            let u: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let up: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let ks1 = u[3] * up[0] - u[2] * up[1] + u[1] * up[2] - u[0] * up[3];
            let jc = bilinear_invariant(&ksmap::ks1_to_quaternion(&u), &ksmap::ks1_to_quaternion(&up), &DefiningVector::ks1());
            assert!((jc - ks1).abs() < 1e-15);
        }
    }

    #[test]
    fn sks_momenta_examples() {
        let ch = KsChart::ks3(1.0).unwrap();
        let x = Vector3::x();
        let p = Vector3::y();
        let pv = sks_momenta(&x, &p, &ch, Sign::Plus).unwrap();
        assert_abs_diff_eq!(pv.w, -2f64.sqrt(), epsilon = 1e-15);
        let v = ks_invert_sks(&CartesianPosition::new(x), &ch, Sign::Plus).unwrap();
        assert!(pv.max_abs_diff(&cartesian_to_momenta(&v, &p, &ch)) < 1e-15);

        // c orthogonal to the angular momentum: V0 vanishes
        let pv = sks_momenta(&Vector3::new(0.6, 0.0, 0.8), &Vector3::new(0.0, 0.0, 1.0), &ch, Sign::Plus).unwrap();
        assert_eq!(pv.w, 0.0);

        // radial momentum
        let x = Vector3::new(0.3, -0.4, 1.2);
        let p = 0.7 * x;
        let pv = sks_momenta(&x, &p, &ch, Sign::Plus).unwrap();
        let expected = x.norm() * p + x.dot(&p) * ch.c.vector();
        assert!(pv.v.cross(&expected).norm() < 1e-14);

        assert_eq!(sks_momenta(&-Vector3::z(), &p, &ch, Sign::Plus), Err(KsError::Pole));
        assert_eq!(sks_momenta(&Vector3::zeros(), &p, &ch, Sign::Plus), Err(KsError::Collision));
    }

    #[test]
    fn sks_momenta_match_general_rule() {
        let mut rng = StdRng::seed_from_u64(8);
        for _ in 0..200 {
            let ch = random_chart(&mut rng);
            let x = rv(&mut rng, 2.0);
            let p = rv(&mut rng, 1.0);
            for sign in [Sign::Plus, Sign::Minus] {
                let v = ks_invert_sks(&CartesianPosition::new(x), &ch, sign).unwrap();
                let a = sks_momenta(&x, &p, &ch, sign).unwrap();
                let b = cartesian_to_momenta(&v, &p, &ch);
                assert!(a.max_abs_diff(&b) < 1e-12 * (1.0 + b.norm()));
            }
        }
    }

    #[test]
    fn reduction_of_momenta() {
        let pv = Quaternion::new(0.1, 0.2, 0.3, 0.4);
        assert_eq!(reduce_momenta_sks(&pv, &UnitQuaternion::identity(), Sign::Plus), pv);

        let mut rng = StdRng::seed_from_u64(9);
        for _ in 0..200 {
            let ch = random_chart(&mut rng);
            let x = rv(&mut rng, 2.0);
            let p = rv(&mut rng, 1.0);
            // an arbitrary fiber member
            let v = fiber_shift(&ksmap::ks_invert(&CartesianPosition::new(x), &ch).unwrap(), rng.random_range(-3.0..3.0), &ch.c);
            let pv = cartesian_to_momenta(&v, &p, &ch);
            let red = reduce_to_sks(&v, &ch.c).unwrap();
            let pv_s = reduce_momenta_sks(&pv, &red.gauge, red.sign);
            let a = momenta_to_cartesian(&v, &pv, &ch).unwrap().p;
            let b = momenta_to_cartesian(&red.v_s, &pv_s, &ch).unwrap().p;
            assert!((a - b).amax() < 1e-12 * (1.0 + a.amax()));
            assert!(bilinear_invariant(&red.v_s, &pv_s, &ch.c).abs() < 1e-13);
            assert!((ks_forward(&red.v_s, &ch).x - x).amax() < 1e-12 * (1.0 + x.amax()));
        }
    }

    #[test]
    fn constraint_check_and_projection() {
        let ch = KsChart::ks3(1.0).unwrap();
        let s = CartesianState::new(Vector3::new(1.0, 0.2, 0.3), Vector3::new(0.1, 0.9, -0.2), 1.0).unwrap();
        let (v, pv) = cartesian_to_ks(&s, &ch, Representative::Sks).unwrap();
        let good = KsPhase::new(v, pv, 0.0, 0.5);
        assert!(check_constraint(&good, &ch.c).is_ok());
        let bad = KsPhase { pv: pv + Quaternion::new(1e-3, 0.0, 0.0, 0.0), ..good };
        assert!(matches!(check_constraint(&bad, &ch.c), Err(KsError::ConstraintViolation(_))));
        let fixed = project_constraint(&bad, &ch).unwrap();
        assert!(bilinear_invariant(&fixed.v, &fixed.pv, &ch.c).abs() < 1e-15);
        let back = ks_to_cartesian(&fixed, &ch, 1.0).unwrap();
        let moved = momenta_to_cartesian(&bad.v, &bad.pv, &ch).unwrap().p;
        assert_abs_diff_eq!(back.p, moved, epsilon = 1e-15);
    }

    #[test]
    fn phase_json_field_names() {
        let p = KsPhase::new(Quaternion::new(1.0, 0.0, 0.0, 0.0), Quaternion::new(0.0, 1.0, 0.0, 0.0), 0.5, 2.0);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"v":[1.0,0.0,0.0,0.0],"V":[0.0,1.0,0.0,0.0],"v_star":0.5,"V_star":2.0}"#);
        let c = CartesianState::new(Vector3::x(), Vector3::y(), 1.0).unwrap();
        assert_eq!(serde_json::to_string(&c).unwrap(), r#"{"x":[1.0,0.0,0.0],"X":[0.0,1.0,0.0],"mu":1.0}"#);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn vec3(s: f64) -> impl Strategy<Value = Vector3<f64>> {
            prop::array::uniform3(-s..s).prop_map(Vector3::from)
        }

        fn chart() -> impl Strategy<Value = KsChart> {
            (vec3(1.0).prop_filter("nonzero", |c| c.norm() > 1e-2), 0.2f64..3.0)
                .prop_map(|(c, a)| KsChart::new(DefiningVector::normalized(c).unwrap(), a).unwrap())
        }

        proptest! {
            #[test]
            fn constructed_momenta_satisfy_constraint(v in prop::array::uniform4(-1.0f64..1.0), p in vec3(2.0), ch in chart()) {
                let v = Quaternion::from_array(v);
                let pv = cartesian_to_momenta(&v, &p, &ch);
                prop_assert!(bilinear_invariant(&v, &pv, &ch.c).abs() <= 1e-13);
            }

            #[test]
            fn momenta_round_trip(v in prop::array::uniform4(-1.0f64..1.0), p in vec3(2.0), ch in chart()) {
                let v = Quaternion::from_array(v);
                prop_assume!(v.norm() > 0.05);
                let pv = cartesian_to_momenta(&v, &p, &ch);
                let back = momenta_to_cartesian(&v, &pv, &ch).unwrap();
                prop_assert!((back.p - p).amax() <= 1e-12 * (1.0 + p.amax()));
            }

            #[test]
            fn square_and_radial_identities(v in prop::array::uniform4(-1.0f64..1.0), pv in prop::array::uniform4(-1.0f64..1.0), ch in chart()) {
                let (v, pv) = (Quaternion::from_array(v), Quaternion::from_array(pv));
                prop_assume!(v.norm() > 0.1);
                let r = ch.radius(&v);
                let m = momenta_to_cartesian(&v, &pv, &ch).unwrap();
                let jc = bilinear_invariant(&v, &pv, &ch.c);
                let lhs = m.p.norm_squared();
                let rhs = ch.alpha / (4.0 * r) * pv.norm_squared() - jc * jc / (4.0 * r * r);
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs));
                let x = ks_forward(&v, &ch).x;
                let radial = x.dot(&m.p);
                prop_assert!((radial - v.dot(&pv) / 2.0).abs() <= 1e-12 * (1.0 + radial.abs()));
            }
        }
    }
}
