//! Batch conversion between Cartesian and KS records.

use clap::ValueEnum;
use ksreg::canon::{self, CartesianState, KsPhase, Representative};
use ksreg::dynamics;
use ksreg::quat::Quaternion;
use nalgebra::Vector3;
use rayon::prelude::*;

use crate::config::Common;
use crate::error::{CliError, CliResult};
use crate::io::{self, field, Record, TableWriter};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Default)]
pub enum Target {
    #[default]
    Ks,
    Cartesian,
}

#[derive(Clone, Copy, Debug)]
pub struct TransformOptions {
    pub to: Target,
    pub rep: Representative,
    pub project_constraint: bool,
}

pub fn cartesian_of(rec: &Record, mu: f64) -> CliResult<CartesianState> {
    let x = Vector3::new(field(rec, "x1")?, field(rec, "x2")?, field(rec, "x3")?);
    let p = Vector3::new(field(rec, "X1")?, field(rec, "X2")?, field(rec, "X3")?);
    Ok(CartesianState::new(x, p, mu)?)
}

/// Physical time of a record: `t`, else `vstar`, else zero.
pub fn time_of(rec: &Record) -> f64 {
    rec.get("t").or_else(|| rec.get("vstar")).copied().unwrap_or(0.0)
}

/// KS phase of a record; `V*` defaults to minus the Kepler energy of its image.
pub fn ks_phase_of(rec: &Record, chart: &ksreg::KsChart, mu: f64) -> CliResult<KsPhase> {
    let v = Quaternion::new(field(rec, "v0")?, field(rec, "v1")?, field(rec, "v2")?, field(rec, "v3")?);
    let pv = Quaternion::new(field(rec, "V0")?, field(rec, "V1")?, field(rec, "V2")?, field(rec, "V3")?);
    let mut p = KsPhase::new(v, pv, time_of(rec), 0.0);
    p.pt = match rec.get("Vstar") {
        Some(&pt) => pt,
        None => -dynamics::kepler_hamiltonian_cartesian(&canon::ks_to_cartesian(&p, chart, mu)?)?,
    };
    Ok(p)
}

fn transform_record(rec: &Record, common: &Common, opts: &TransformOptions) -> CliResult<Vec<f64>> {
    let tau = rec.get("tau").copied().unwrap_or(0.0);
    let (p, chart, s) = match opts.to {
        Target::Ks => {
            let s = cartesian_of(rec, common.mu)?;
            let chart = common.chart_for(&s)?;
            let (v, pv) = canon::cartesian_to_ks(&s, &chart, opts.rep)?;
            let p = KsPhase::new(v, pv, time_of(rec), -dynamics::kepler_hamiltonian_cartesian(&s)?);
            (p, chart, canon::ks_to_cartesian(&p, &chart, common.mu)?)
        }
        Target::Cartesian => {
            let chart = common.fixed_chart()?;
            let mut p = ks_phase_of(rec, &chart, common.mu)?;
            if opts.project_constraint {
                p = canon::project_constraint(&p, &chart)?;
            }
            (p, chart, canon::ks_to_cartesian(&p, &chart, common.mu)?)
        }
    };
    let jc = canon::bilinear_invariant(&p.v, &p.pv, &chart.c);
    let k0 = dynamics::ks_hamiltonian_unperturbed(&p, &chart, common.mu).k0;
    Ok(io::trajectory_row(tau, &p, &s, jc, k0))
}

/// Runs `f` on a pool of `jobs` threads, or on the global pool.
pub fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    match jobs {
        None => Ok(f()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| CliError::Usage(format!("thread pool: {e}"))),
    }
}

pub fn run(common: &Common, opts: &TransformOptions) -> CliResult<()> {
    let records = io::read_records(common.input.as_deref(), common.input_format)?;
    let rows: Vec<CliResult<Vec<f64>>> =
        with_pool(common.jobs, || records.par_iter().map(|r| transform_record(r, common, opts)).collect())?;
    let mut out = TableWriter::create(common.output.as_ref(), common.format, io::trajectory_columns(&[]))?;
    for (i, row) in rows.into_iter().enumerate() {
        match row {
            Ok(row) => out.row(&row)?,
            Err(e) => {
                out.finish()?;
                return Err(e.at_record(i));
            }
        }
    }
    out.finish()
}
