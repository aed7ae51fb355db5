//! Propagates an eccentric orbit in a tilted KS chart for one period and
//! compares the result with a uniformly rotating frame solved in closed form.

use std::f64::consts::PI;

use ksreg::dynamics::omega0;
use ksreg::invariants::laplace_routes;
use ksreg::propagator::{integrate, DriftSummary, IntegratorConfig, Scheme};
use ksreg::rotframe::{ClosedFormSolution, RotatingFrameSpec};
use ksreg::{CartesianState, DefiningVector, KsChart, KsSystem, Representative};
use nalgebra::Vector3;

fn main() -> ksreg::Result<()> {
    let mu = 1.0;
    let s0 = CartesianState::new(Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 1.2, 0.3), mu)?;

    let energy = 0.5 * s0.p.norm_squared() - mu / s0.radius();
    let c = DefiningVector::normalized(Vector3::new(0.2, -0.7, 0.4))?;
    let chart = KsChart::new(c, -mu / energy)?;

    let sys = KsSystem::unperturbed(chart, mu);
    let p0 = sys.initial_phase(&s0, 0.0, Representative::Sks)?;
    // one Kepler orbit is half an oscillator period in Sundman time
    let orbit = PI / omega0(p0.pt, &chart)?;
    let cfg = IntegratorConfig::new(orbit / 2000.0, 100_000).with_scheme(Scheme::Rk4);
    let samples = integrate(&p0, &sys, &cfg, orbit)?;
    let end = samples.last().expect("at least the initial sample");

    let drift = DriftSummary::from_samples(&samples);
    println!("one orbit: t = {:.12}, |x - x0| = {:.2e}", end.t(), (end.cartesian.x - s0.x).norm());
    println!("max |J.c| = {:.2e}, max K0 drift = {:.2e}", drift.max_abs_jc, drift.max_k0_drift);

    let routes = laplace_routes(&end.phase, &chart, mu)?;
    println!("Laplace vector {:?}, route spread {:.2e}", routes.cartesian.as_slice(), routes.spread());

    let spec = RotatingFrameSpec::new(0.05, c);
    let sol = ClosedFormSolution::new(p0, chart, spec)?;
    let r = sol.state_at(orbit)?;
    println!("rotating frame: oscillator period {:.6}, t = {:.12} after the same span", sol.period(), r.t);
    Ok(())
}
