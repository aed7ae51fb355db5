//! Invariant audit of Cartesian or KS records.

use std::io::Write;

use ksreg::canon::{self, CartesianState, KsPhase, Representative};
use ksreg::invariants;
use ksreg::{dynamics, KsChart};
use nalgebra::Vector3;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::Common;
use crate::error::{CliError, CliResult};
use crate::io::{self, Record};
use crate::transform::{self, cartesian_of, ks_phase_of};

/// A finished report, plus the domain problem that should set the exit code.
struct Report {
    json: Value,
    problem: Option<String>,
}

fn vec_json(v: &Vector3<f64>) -> Value {
    json!([v.x, v.y, v.z])
}

fn state_of(rec: &Record, common: &Common, rep: Representative) -> CliResult<(KsPhase, KsChart, CartesianState)> {
    if rec.contains_key("x1") && !rec.contains_key("v0") {
        let s = cartesian_of(rec, common.mu)?;
        let chart = common.chart_for(&s)?;
        let (v, pv) = canon::cartesian_to_ks(&s, &chart, rep)?;
        let p = KsPhase::new(v, pv, transform::time_of(rec), -dynamics::kepler_hamiltonian_cartesian(&s)?);
        Ok((p, chart, s))
    } else {
        let chart = common.fixed_chart()?;
        let p = ks_phase_of(rec, &chart, common.mu)?;
        let s = canon::ks_to_cartesian(&p, &chart, common.mu)?;
        Ok((p, chart, s))
    }
}

fn check_record(rec: &Record, common: &Common, rep: Representative) -> CliResult<Report> {
    let (p, chart, s) = state_of(rec, common, rep)?;
    let mu = common.mu;
    let jc = canon::bilinear_invariant(&p.v, &p.pv, &chart.c);
    let k0 = dynamics::ks_hamiltonian_unperturbed(&p, &chart, mu).k0;
    let g_cart = s.angular_momentum();
    let g_ks = invariants::angular_momentum_cartesian(&p, &chart);
    let e_cart = invariants::laplace_vector_cartesian(&s)?;
    let e_ks = invariants::laplace_vector_ks(&p, &chart, mu)?;
    let routes = invariants::laplace_routes(&p, &chart, mu)?;
    // forms that assume X₀ = 0 and K₀ = 0; they drift apart from the
    // complete routes as soon as the state leaves the constraint manifold
    let x = s.x;
    let g_reduced = invariants::angular_momentum_from_matrix(&invariants::angular_momentum_matrix(&p.v, &p.pv), 0.0, &x);
    let e_reduced = match dynamics::omega0(p.pt, &chart) {
        Ok(w0) => {
            let f = invariants::fradkin_tensor(&p.v, &p.pv, w0)?;
            let inputs = invariants::FradkinLaplaceInputs { omega0: w0, mu, k0: 0.0, x0: 0.0, g: g_ks, x };
            Some(invariants::laplace_vector_fradkin(&f, &chart.c, &chart, &inputs)?)
        }
        Err(_) => None,
    };
    let g_spread = [g_ks, g_reduced].iter().map(|g| (g - g_cart).norm()).fold((g_ks - g_reduced).norm(), f64::max);
    let e_spread = e_reduced
        .iter()
        .flat_map(|r| [e_cart, e_ks].into_iter().chain(routes.fradkin).map(move |e| (e - r).norm()))
        .fold(routes.spread(), f64::max);
    let problem = routes.fradkin.is_none().then(|| match dynamics::omega0(p.pt, &chart) {
        Err(e) => format!("{e}; Fradkin routes unavailable"),
        Ok(_) => "Fradkin routes unavailable".to_string(),
    });
    let json = json!({
        "alpha": chart.alpha,
        "defining_vector": vec_json(&chart.c.vector()),
        "mu": mu,
        "energy": {
            "cartesian": dynamics::kepler_hamiltonian_cartesian(&s)?,
            "ks": -p.pt,
        },
        "K0": k0,
        "Jc": jc,
        "constraint_violated": canon::check_constraint(&p, &chart.c).is_err(),
        "G": {
            "cartesian": vec_json(&g_cart),
            "ks": vec_json(&g_ks),
            "matrix_on_manifold": vec_json(&g_reduced),
            "spread": g_spread,
        },
        "e": {
            "cartesian": vec_json(&e_cart),
            "ks": vec_json(&e_ks),
            "fradkin": routes.fradkin.map(|f| vec_json(&f)),
            "fradkin_on_manifold": e_reduced.map(|f| vec_json(&f)),
            "spread": e_spread,
        },
        "error": problem,
    });
    Ok(Report { json, problem })
}

pub fn run(common: &Common, rep: Representative) -> CliResult<()> {
    let records = io::read_records(common.input.as_deref(), common.input_format)?;
    let reports: Vec<CliResult<Report>> =
        transform::with_pool(common.jobs, || records.par_iter().map(|r| check_record(r, common, rep)).collect())?;
    let mut out = io::open_output(common.output.as_deref())?;
    let mut first_problem = None;
    for (i, r) in reports.into_iter().enumerate() {
        let mut r = match r {
            Ok(r) => r,
            Err(e) => {
                out.flush()?;
                return Err(e.at_record(i));
            }
        };
        r.json["record"] = json!(i);
        let line = serde_json::to_string(&r.json).map_err(|e| CliError::Usage(e.to_string()))?;
        writeln!(out, "{line}")?;
        if let (None, Some(msg)) = (&first_problem, r.problem) {
            first_problem = Some(CliError::Domain(msg).at_record(i));
        }
    }
    out.flush()?;
    first_problem.map_or(Ok(()), Err)
}
