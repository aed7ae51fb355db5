//! Closed-form propagation in a frame rotating uniformly about the chart's
//! defining vector, with an optional numerical cross-check.

use ksreg::canon::Representative;
use ksreg::propagator::{self, DriftSummary, Scheme};
use ksreg::rotframe::{ClosedFormSolution, RotatingFrameSpec, RotatingKepler};
use ksreg::{DefiningVector, KsChart};
use serde_json::json;

use crate::config::Common;
use crate::error::{CliError, CliResult};
use crate::io::{self, TableWriter};
use crate::propagate::{self, StepOptions};

#[derive(Clone, Debug)]
pub struct RotatingOptions {
    pub state: Option<[f64; 6]>,
    pub rep: Representative,
    pub omega: f64,
    pub axis: Option<DefiningVector>,
    pub epoch: f64,
    pub tau_span: f64,
    pub samples: usize,
    pub compare_numerical: bool,
    pub scheme: Scheme,
    /// Numerical step; the default is 4000 steps per oscillator period.
    pub step: Option<f64>,
    pub max_steps: usize,
}

/// The rotation axis must be the defining vector. A lone `--axis` selects
/// the chart; an explicit chart that disagrees with it is rejected.
pub fn resolve_axis(common: &Common, axis: Option<DefiningVector>) -> CliResult<DefiningVector> {
    match (common.defining_vector, axis) {
        (None, Some(a)) => Ok(a),
        (Some(c), Some(a)) => {
            let spec = RotatingFrameSpec::new(0.0, a);
            let chart = KsChart::new(c, 1.0)?;
            if spec.is_aligned(&chart) {
                Ok(c)
            } else {
                Err(CliError::Usage(format!("rotation axis {a} differs from the defining vector {c}")))
            }
        }
        (c, None) => Ok(c.unwrap_or_else(DefiningVector::ks3)),
    }
}

pub fn run(common: &Common, opts: &RotatingOptions) -> CliResult<()> {
    if !opts.omega.is_finite() {
        return Err(CliError::Usage(format!("omega must be finite, got {}", opts.omega)));
    }
    if opts.samples == 0 {
        return Err(CliError::Usage("samples must be at least 1".into()));
    }
    if !(opts.tau_span >= 0.0) || !opts.tau_span.is_finite() {
        return Err(CliError::Usage(format!("tau span must be non-negative, got {}", opts.tau_span)));
    }
    let c = resolve_axis(common, opts.axis)?;
    let (s0, t0) = propagate::initial_state(common, opts.state)?;
    let chart = KsChart::new(c, common.alpha.resolve(&s0)?)?;
    let spec = RotatingFrameSpec::new(opts.omega, c).with_epoch(opts.epoch);
    let sys = RotatingKepler::new(chart, common.mu, spec)?;
    let p0 = sys.initial_phase(&s0, t0, opts.rep)?;
    let sol = ClosedFormSolution::new(p0, chart, spec)?;

    let h = opts.tau_span / opts.samples as f64;
    let samples = if opts.tau_span == 0.0 {
        propagate::sample_closed_form(&sol, &sys, 1.0, 0.0, 1)?
    } else {
        propagate::sample_closed_form(&sol, &sys, h, opts.tau_span, 1)?
    };
    let mut out = TableWriter::create(common.output.as_ref(), common.format, io::trajectory_columns(&[]))?;
    for s in &samples {
        out.row(&io::sample_row(s))?;
    }
    out.finish()?;

    let mut summary = propagate::drift_json(&DriftSummary::from_samples(&samples));
    summary["alpha"] = json!(chart.alpha);
    summary["omega"] = json!(opts.omega);
    summary["axis"] = json!(c.vector().as_slice());
    summary["w"] = json!(sol.w);
    summary["period"] = json!(sol.period());
    summary["H"] = json!(sol.h);

    if opts.compare_numerical && opts.tau_span > 0.0 {
        let target = opts.step.unwrap_or(sol.period() / 4000.0);
        if !(target > 0.0) || !target.is_finite() {
            return Err(CliError::Usage(format!("step must be positive, got {target}")));
        }
        // an integer number of steps per sample interval, so every sample is hit
        let per_sample = (h / target).ceil().max(1.0) as usize;
        let steps =
            StepOptions { step: Some(h / per_sample as f64), steps_per_orbit: 0, max_steps: opts.max_steps, sample_every: per_sample };
        let cfg = propagate::integrator_config(h / per_sample as f64, opts.scheme, &steps)?;
        let numerical = propagator::integrate(&p0, &sys, &cfg, opts.tau_span)?;
        let (mut state_dev, mut pos_dev) = (0.0f64, 0.0f64);
        for n in &numerical {
            let exact = sol.state_at(n.tau)?;
            let a = n.phase.to_array();
            let b = exact.to_array();
            state_dev = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(state_dev, f64::max);
            let x = ksreg::canon::ks_to_cartesian(&exact, &chart, common.mu)?.x;
            pos_dev = pos_dev.max((n.cartesian.x - x).norm() / x.norm());
        }
        summary["numerical"] = json!({
            "scheme": format!("{:?}", opts.scheme).to_lowercase(),
            "step": cfg.step,
            "samples": numerical.len(),
            "max_state_deviation": state_dev,
            "max_relative_position_deviation": pos_dev,
        });
    }
    propagate::write_summary(common.summary.as_deref(), &summary)
}
