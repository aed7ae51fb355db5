//! Fixed-frame propagation of one initial state.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use ksreg::canon::{CartesianState, KsPhase, Representative};
use ksreg::dynamics::{self, KsSystem};
use ksreg::propagator::{self, DriftSummary, IntegratorConfig, Scheme, TrajectorySample};
use ksreg::rotframe::{self, ClosedFormSolution, RotatingFrameSpec};
use ksreg::{KsChart, VectorField};
use nalgebra::Vector3;
use serde_json::json;

use crate::config::Common;
use crate::error::{CliError, CliResult};
use crate::io::{self, TableWriter};
use crate::transform::{cartesian_of, time_of};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Default)]
pub enum SchemeArg {
    #[default]
    Rk4,
    Splitting,
    Leapfrog,
    /// Exact oscillator solution, sampled on the same grid as the numerical schemes.
    Analytic,
}

impl SchemeArg {
    pub fn numerical(self) -> Option<Scheme> {
        match self {
            SchemeArg::Rk4 => Some(Scheme::Rk4),
            SchemeArg::Splitting | SchemeArg::Leapfrog => Some(Scheme::Splitting),
            SchemeArg::Analytic => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SchemeArg::Rk4 => "rk4",
            SchemeArg::Splitting | SchemeArg::Leapfrog => "splitting",
            SchemeArg::Analytic => "analytic",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Span {
    Tau(f64),
    Time(f64),
}

#[derive(Clone, Debug)]
pub struct StepOptions {
    pub step: Option<f64>,
    pub steps_per_orbit: usize,
    pub max_steps: usize,
    pub sample_every: usize,
}

#[derive(Clone, Debug)]
pub struct PropagateOptions {
    pub state: Option<[f64; 6]>,
    pub rep: Representative,
    pub span: Span,
    pub scheme: SchemeArg,
    pub steps: StepOptions,
    pub compare_oracle: bool,
}

/// The single initial state, from `--state` or from a one-record input file.
pub fn initial_state(common: &Common, state: Option<[f64; 6]>) -> CliResult<(CartesianState, f64)> {
    if let Some(s) = state {
        let x = Vector3::new(s[0], s[1], s[2]);
        let p = Vector3::new(s[3], s[4], s[5]);
        return Ok((CartesianState::new(x, p, common.mu)?, 0.0));
    }
    if common.input.is_none() {
        return Err(CliError::Usage("an initial state is required: use --state or --input".into()));
    }
    let records = io::read_records(common.input.as_deref(), common.input_format)?;
    match records.as_slice() {
        [rec] => Ok((cartesian_of(rec, common.mu).map_err(|e| e.at_record(0))?, time_of(rec))),
        _ => Err(CliError::Usage(format!("expected exactly one initial state, found {}", records.len()))),
    }
}

/// Sundman-time step: explicit, or a fraction of the Kepler orbit `π/ω₀`.
pub fn resolve_step(opts: &StepOptions, pt: f64, chart: &KsChart) -> CliResult<f64> {
    if let Some(h) = opts.step {
        if !(h > 0.0) || !h.is_finite() {
            return Err(CliError::Usage(format!("step must be positive, got {h}")));
        }
        return Ok(h);
    }
    if opts.steps_per_orbit == 0 {
        return Err(CliError::Usage("steps per orbit must be positive".into()));
    }
    match dynamics::omega0(pt, chart) {
        Ok(w0) => Ok(PI / w0 / opts.steps_per_orbit as f64),
        Err(_) => Err(CliError::Usage("the orbit is unbound: give --step explicitly".into())),
    }
}

/// Grid `τᵢ = i·h` with the last point moved to `tau_end`, keeping every
/// `every`-th point and the last one.
pub fn tau_grid(h: f64, tau_end: f64, every: usize) -> Vec<f64> {
    let n = propagator::step_count(h, tau_end);
    let mut grid = vec![0.0];
    for i in 1..=n {
        if i == n {
            grid.push(tau_end);
        } else if i % every == 0 {
            grid.push(i as f64 * h);
        }
    }
    grid
}

/// Sundman time at which the free oscillation reaches `t_end`, by bisection.
fn analytic_tau_for_time(sol: &ClosedFormSolution, t_end: f64) -> CliResult<f64> {
    let p = &sol.initial;
    let elapsed = |tau: f64| p.t + rotframe::elapsed_time(&p.v, &p.pv, tau, &sol.chart, sol.w);
    let mut hi = sol.period();
    let mut guard = 0;
    while elapsed(hi) < t_end {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(CliError::Numerical("cannot bracket the requested time".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if elapsed(mid) < t_end {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if (elapsed(lo) - t_end).abs() <= (elapsed(hi) - t_end).abs() { lo } else { hi })
}

fn analytic_samples(p0: &KsPhase, sys: &KsSystem, span: Span, h: f64, every: usize) -> CliResult<Vec<TrajectorySample>> {
    let sol = ClosedFormSolution::new(*p0, sys.chart, RotatingFrameSpec::new(0.0, sys.chart.c))?;
    let tau_end = match span {
        Span::Tau(t) => t,
        Span::Time(t) if t < p0.t => return Err(CliError::Usage(format!("t span must end after the initial time, got {t}"))),
        Span::Time(t) if t == p0.t => 0.0,
        Span::Time(t) => analytic_tau_for_time(&sol, t)?,
    };
    sample_closed_form(&sol, sys, h, tau_end, every)
}

pub fn sample_closed_form(
    sol: &ClosedFormSolution,
    field: &dyn VectorField,
    h: f64,
    tau_end: f64,
    every: usize,
) -> CliResult<Vec<TrajectorySample>> {
    if !(tau_end >= 0.0) || !tau_end.is_finite() {
        return Err(CliError::Usage(format!("tau span must be non-negative, got {tau_end}")));
    }
    tau_grid(h, tau_end, every).into_iter().map(|tau| Ok(TrajectorySample::new(tau, sol.state_at(tau)?, field)?)).collect()
}

pub fn integrator_config(h: f64, scheme: Scheme, opts: &StepOptions) -> CliResult<IntegratorConfig> {
    let cfg = IntegratorConfig::new(h, opts.max_steps).with_scheme(scheme).with_sample_every(opts.sample_every);
    cfg.validate()?;
    Ok(cfg)
}

pub fn write_summary(path: Option<&Path>, summary: &serde_json::Value) -> CliResult<()> {
    let text = serde_json::to_string(summary).map_err(|e| CliError::Usage(e.to_string()))?;
    match path {
        Some(p) => std::fs::write(p, format!("{text}\n")).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            writeln!(std::io::stderr(), "{text}")?;
            Ok(())
        }
    }
}

pub fn drift_json(d: &DriftSummary) -> serde_json::Value {
    json!({
        "samples": d.samples,
        "tau_end": d.tau_end,
        "t_end": d.t_end,
        "max_abs_jc": d.max_abs_jc,
        "max_k0_drift": d.max_k0_drift,
        "max_k_drift": d.max_k_drift,
        "max_abs_k": d.max_abs_k,
    })
}

pub fn run(common: &Common, opts: &PropagateOptions) -> CliResult<()> {
    let (s0, t0) = initial_state(common, opts.state)?;
    let chart = common.chart_for(&s0)?;
    let sys = KsSystem::unperturbed(chart, common.mu);
    let p0 = sys.initial_phase(&s0, t0, opts.rep)?;
    let h = resolve_step(&opts.steps, p0.pt, &chart)?;
    let samples = match opts.scheme.numerical() {
        None => analytic_samples(&p0, &sys, opts.span, h, opts.steps.sample_every.max(1))?,
        Some(scheme) => {
            let cfg = integrator_config(h, scheme, &opts.steps)?;
            match opts.span {
                Span::Tau(tau) => propagator::integrate(&p0, &sys, &cfg, tau)?,
                Span::Time(t) => propagator::integrate_until_time(&p0, &sys, &cfg, t)?,
            }
        }
    };

    let extra: &[&str] = if opts.compare_oracle { &["pos_err"] } else { &[] };
    let mut out = TableWriter::create(common.output.as_ref(), common.format, io::trajectory_columns(extra))?;
    let mut max_pos_err = 0.0f64;
    for s in &samples {
        let mut row = io::sample_row(s);
        if opts.compare_oracle {
            let oracle = propagator::kepler_oracle(&s0, s.t() - t0)?;
            let err = (s.cartesian.x - oracle.x).norm();
            max_pos_err = max_pos_err.max(err);
            row.push(err);
        }
        out.row(&row)?;
    }
    out.finish()?;

    let mut summary = drift_json(&DriftSummary::from_samples(&samples));
    summary["alpha"] = json!(chart.alpha);
    summary["step"] = json!(h);
    summary["scheme"] = json!(opts.scheme.name());
    if opts.compare_oracle {
        summary["max_pos_err"] = json!(max_pos_err);
    }
    write_summary(common.summary.as_deref(), &summary)
}
