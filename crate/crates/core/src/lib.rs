//! Kustaanheimo–Stiefel regularization of the Kepler problem with an
//! arbitrary unit defining vector, written in quaternion form.
//!
//! The crate covers the KS map and its inverse, canonical momenta, the
//! oscillator Hamiltonian and its equations of motion, first integrals,
//! uniformly rotating frames with their closed-form solution, and
//! fixed-step propagators with a universal-variable Kepler oracle.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod canon;
pub mod dynamics;
pub mod error;
pub mod invariants;
pub mod ksmap;
pub mod propagator;
pub mod quat;
pub mod rotframe;

pub use canon::{CartesianState, KsPhase, Representative};
pub use dynamics::{KsSystem, NoPerturbation, Perturbation, PerturbationEval, VectorField};
pub use error::{KsError, Result};
pub use ksmap::{DefiningVector, KsChart, Sign};
pub use quat::{Quaternion, UnitQuaternion};
