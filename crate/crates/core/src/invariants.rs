//! First integrals of the Kepler problem seen as a 4-D isotropic oscillator
//! (oscillator energies, Fradkin tensor, angular-momentum matrix) and as a
//! Cartesian two-body problem (angular momentum, Laplace vector), with the
//! formulas linking the two pictures.

use nalgebra::{Matrix3, Matrix4, Vector3};

use crate::canon::{self, CartesianState, KsPhase};
use crate::error::{KsError, Result};
use crate::ksmap::{self, DefiningVector, KsChart};
use crate::quat::Quaternion;

fn check_omega(omega0: f64) -> Result<()> {
    if !(omega0 > 0.0) || !omega0.is_finite() {
        return Err(KsError::UnboundOrbit(omega0 * omega0.abs()));
    }
    Ok(())
}

/// `Nⱼ = Vⱼ²/2 + ω₀² vⱼ²/2`.
pub fn oscillator_energies(v: &Quaternion, pv: &Quaternion, omega0: f64) -> [f64; 4] {
    let (a, b) = (v.to_array(), pv.to_array());
    std::array::from_fn(|j| 0.5 * b[j] * b[j] + 0.5 * omega0 * omega0 * a[j] * a[j])
}

/// Symmetric tensor `F_ij = VᵢVⱼ/ω₀ + ω₀ vᵢvⱼ` of quadratic oscillator integrals.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct FradkinTensor(pub Matrix4<f64>);

impl FradkinTensor {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// The 3×3 matrix `E` assembled from Fradkin entries, shaped like `R(v)`.
    pub fn laplace_matrix(&self) -> LaplaceMatrix {
        let f = |i, j| self.0[(i, j)];
        let e11 = 0.5 * (f(0, 0) + f(1, 1) - f(2, 2) - f(3, 3));
        let e22 = 0.5 * (f(0, 0) - f(1, 1) + f(2, 2) - f(3, 3));
        let e33 = 0.5 * (f(0, 0) - f(1, 1) - f(2, 2) + f(3, 3));
        LaplaceMatrix(Matrix3::new(
            e11,
            f(1, 2) - f(0, 3),
            f(1, 3) + f(0, 2),
            f(1, 2) + f(0, 3),
            e22,
            f(2, 3) - f(0, 1),
            f(1, 3) - f(0, 2),
            f(2, 3) + f(0, 1),
            e33,
        ))
    }
}

pub fn fradkin_tensor(v: &Quaternion, pv: &Quaternion, omega0: f64) -> Result<FradkinTensor> {
    check_omega(omega0)?;
    let (a, b) = (v.to_array(), pv.to_array());
    Ok(FradkinTensor(Matrix4::from_fn(|i, j| b[i] * b[j] / omega0 + omega0 * (a[i] * a[j]))))
}

/// Antisymmetric `L_ij = vᵢVⱼ − vⱼVᵢ`.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct AngularMomentumMatrix(pub Matrix4<f64>);

impl AngularMomentumMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Vector part of `v ∧ V`: `(L₀₁ + L₂₃, L₀₂ + L₃₁, L₀₃ + L₁₂)`.
    pub fn wedge_vector(&self) -> Vector3<f64> {
        let l = |i, j| self.0[(i, j)];
        Vector3::new(l(0, 1) + l(2, 3), l(0, 2) + l(3, 1), l(0, 3) + l(1, 2))
    }

    /// Vector part of `v̄ ∧ V̄`, i.e. `J`.
    pub fn conjugate_wedge_vector(&self) -> Vector3<f64> {
        let l = |i, j| self.0[(i, j)];
        Vector3::new(l(1, 0) + l(2, 3), l(2, 0) + l(3, 1), l(3, 0) + l(1, 2))
    }
}

pub fn angular_momentum_matrix(v: &Quaternion, pv: &Quaternion) -> AngularMomentumMatrix {
    let (a, b) = (v.to_array(), pv.to_array());
    AngularMomentumMatrix(Matrix4::from_fn(|i, j| if i == j { 0.0 } else { a[i] * b[j] - a[j] * b[i] }))
}

/// `X₀ = (J·c)/(2r)`; zero on the constraint manifold.
pub fn scalar_momentum(p: &KsPhase, chart: &KsChart) -> f64 {
    let r = chart.radius(&p.v);
    if r > 0.0 {
        canon::bilinear_invariant(&p.v, &p.pv, &chart.c) / (2.0 * r)
    } else {
        0.0
    }
}

/// `G = (v ∧ V)♮/2 + X₀ x`, equal to `x × X` of the Cartesian image.
pub fn angular_momentum_cartesian(p: &KsPhase, chart: &KsChart) -> Vector3<f64> {
    let x = ksmap::ks_forward(&p.v, chart).x;
    0.5 * p.v.cross(&p.pv).v + scalar_momentum(p, chart) * x
}

/// The same angular momentum assembled from the oscillator matrix `L`.
pub fn angular_momentum_from_matrix(l: &AngularMomentumMatrix, x0: f64, x: &Vector3<f64>) -> Vector3<f64> {
    0.5 * l.wedge_vector() + x0 * x
}

/// `e = ((X·X − μ/r) x − (x·X) X)/μ`.
pub fn laplace_vector_cartesian(s: &CartesianState) -> Result<Vector3<f64>> {
    let r = s.radius();
    if !(r > 0.0) {
        return Err(KsError::Collision);
    }
    Ok(((s.p.norm_squared() - s.mu / r) * s.x - s.x.dot(&s.p) * s.p) / s.mu)
}

/// Laplace vector as a quaternion product of KS variables:
///
/// ```text
/// μe = [ ((V·V/2 − 2μ/α − (J·c)²/(2αr)) v − (v·V/2) V) c v̄ ]♮ / (2r)
/// ```
pub fn laplace_vector_ks(p: &KsPhase, chart: &KsChart, mu: f64) -> Result<Vector3<f64>> {
    let r = chart.radius(&p.v);
    if !(r > 0.0) {
        return Err(KsError::Collision);
    }
    let a = chart.alpha;
    let jc = canon::bilinear_invariant(&p.v, &p.pv, &chart.c);
    let coef = 0.5 * p.pv.norm_squared() - 2.0 * mu / a - jc * jc / (2.0 * a * r);
    let inner = p.v.scale(coef) - p.pv.scale(0.5 * p.v.dot(&p.pv));
    let q = inner * chart.c.as_quaternion() * p.v.conj();
    Ok(q.v / (2.0 * r * mu))
}

/// Matrix `E` linking the Fradkin tensor to the Laplace vector.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct LaplaceMatrix(pub Matrix3<f64>);

/// Inputs of [`laplace_vector_fradkin`] that are not part of the tensor.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct FradkinLaplaceInputs {
    pub omega0: f64,
    pub mu: f64,
    /// Unperturbed KS Hamiltonian `K₀`.
    pub k0: f64,
    /// Scalar momentum `X₀ = (J·c)/(2r)`.
    pub x0: f64,
    /// Angular momentum `G`.
    pub g: Vector3<f64>,
    /// Cartesian position.
    pub x: Vector3<f64>,
}

/// `μe = −(αω₀/4) E c − X₀ G + (αK₀/(4r)) x`.
///
/// `K₀` and `X₀` are explicit inputs so the formula can be audited off the
/// constraint and energy manifolds.
pub fn laplace_vector_fradkin(
    f: &FradkinTensor,
    c: &DefiningVector,
    chart: &KsChart,
    inputs: &FradkinLaplaceInputs,
) -> Result<Vector3<f64>> {
    check_omega(inputs.omega0)?;
    let r = inputs.x.norm();
    if !(r > 0.0) {
        return Err(KsError::Collision);
    }
    let a = chart.alpha;
    let e = f.laplace_matrix().0;
    let mu_e = -(a * inputs.omega0 / 4.0) * (e * c.vector()) - inputs.x0 * inputs.g + (a * inputs.k0 / (4.0 * r)) * inputs.x;
    Ok(mu_e / inputs.mu)
}

/// Laplace vector by the three available routes for one KS state.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct LaplaceRoutes {
    pub cartesian: Vector3<f64>,
    pub ks: Vector3<f64>,
    /// `None` for unbound states, where `ω₀` is undefined.
    pub fradkin: Option<Vector3<f64>>,
}

impl LaplaceRoutes {
    /// Largest pairwise distance between the available routes.
    pub fn spread(&self) -> f64 {
        let mut s = (self.cartesian - self.ks).norm();
        if let Some(f) = self.fradkin {
            s = s.max((f - self.cartesian).norm()).max((f - self.ks).norm());
        }
        s
    }
}

pub fn laplace_routes(p: &KsPhase, chart: &KsChart, mu: f64) -> Result<LaplaceRoutes> {
    let s = canon::ks_to_cartesian(p, chart, mu)?;
    let cartesian = laplace_vector_cartesian(&s)?;
    let ks = laplace_vector_ks(p, chart, mu)?;
    let fradkin = match crate::dynamics::omega0(p.pt, chart) {
        Ok(w0) => {
            let f = fradkin_tensor(&p.v, &p.pv, w0)?;
            let inputs = FradkinLaplaceInputs {
                omega0: w0,
                mu,
                k0: crate::dynamics::ks_hamiltonian_unperturbed(p, chart, mu).k0,
                x0: scalar_momentum(p, chart),
                g: angular_momentum_cartesian(p, chart),
                x: s.x,
            };
            Some(laplace_vector_fradkin(&f, &chart.c, chart, &inputs)?)
        }
        Err(KsError::UnboundOrbit(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(LaplaceRoutes { cartesian, ks, fradkin })
}
