//! Command-line front end of the `ksreg` crate.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod check;
pub mod config;
pub mod error;
pub mod io;
pub mod plot;
pub mod propagate;
pub mod rotating;
pub mod transform;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ksreg::DefiningVector;

use crate::config::{parse_defining_vector, parse_state, parse_value_enum, AlphaSpec, Common, CommonFlags, ConfigFile, RepArg};
use crate::error::{CliError, CliResult};
use crate::io::Format;
use crate::plot::Plane;
use crate::propagate::{PropagateOptions, SchemeArg, Span, StepOptions};
use crate::rotating::RotatingOptions;
use crate::transform::{Target, TransformOptions};

#[derive(Parser, Debug)]
#[command(name = "ksreg", version, about = "Kustaanheimo-Stiefel regularized Kepler motion with an arbitrary defining vector")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Convert Cartesian records to KS variables or back.
    Transform(TransformArgs),
    /// Propagate one state in the fixed frame.
    Propagate(PropagateArgs),
    /// Closed-form propagation in a uniformly rotating frame.
    Rotating(RotatingArgs),
    /// Report energies, angular momentum, Laplace vector and constraint per record (JSON lines).
    Check(CheckArgs),
    /// Draw a trajectory file as SVG.
    Plot(PlotArgs),
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output format [default: csv].
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    /// Defining vector: KS1, KS3 or c1,c2,c3 [default: KS3].
    #[arg(long, value_parser = parse_defining_vector, allow_hyphen_values = true, global = true)]
    pub chart: Option<DefiningVector>,
    /// Length scale of the KS variables, or `auto` for the major axis of the orbit [default: 1].
    #[arg(long, global = true)]
    pub alpha: Option<AlphaSpec>,
    /// Gravitational parameter [default: 1].
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    /// Worker threads for record batches (transform, check).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Input file, `-` for stdin.
    #[arg(short, long, global = true)]
    pub input: Option<PathBuf>,
    /// Input format [default: from the extension, else --format].
    #[arg(long, value_enum, global = true)]
    pub input_format: Option<Format>,
    /// Output file [default: stdout].
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TransformArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Target variables [default: ks].
    #[arg(long, value_enum)]
    pub to: Option<Target>,
    /// Fiber representative for Cartesian input [default: sks].
    #[arg(long, value_enum)]
    pub rep: Option<RepArg>,
    /// Remove the constraint-violating part of KS momenta before mapping back.
    #[arg(long)]
    pub project_constraint: bool,
}

#[derive(Args, Debug, Clone)]
pub struct OrbitArgs {
    /// Initial state x1,x2,x3,X1,X2,X3 (otherwise a one-record --input).
    #[arg(long, value_parser = parse_state, allow_hyphen_values = true)]
    pub state: Option<[f64; 6]>,
    /// Fiber representative [default: sks].
    #[arg(long, value_enum)]
    pub rep: Option<RepArg>,
    /// Sundman-time span.
    #[arg(long)]
    pub tau_span: Option<f64>,
    /// Sundman-time step [default: a fraction of the orbit, see --steps-per-orbit].
    #[arg(long)]
    pub step: Option<f64>,
    /// Largest number of steps.
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Write the JSON summary here instead of stderr.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PropagateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub orbit: OrbitArgs,
    /// Physical-time span (instead of --tau-span).
    #[arg(long, conflicts_with = "tau_span")]
    pub t_span: Option<f64>,
    /// Steps per Kepler orbit when --step is not given [default: 2000].
    #[arg(long)]
    pub steps_per_orbit: Option<usize>,
    /// Integration scheme [default: rk4].
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Keep every n-th step [default: 1].
    #[arg(long)]
    pub sample_every: Option<usize>,
    /// Add the position error against a universal-variable Kepler solution.
    #[arg(long)]
    pub compare_oracle: bool,
}

#[derive(Args, Debug)]
pub struct RotatingArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub orbit: OrbitArgs,
    /// Rotation rate of the frame.
    #[arg(long, allow_hyphen_values = true)]
    pub omega: Option<f64>,
    /// Rotation axis [default: the defining vector].
    #[arg(long, value_parser = parse_defining_vector, allow_hyphen_values = true)]
    pub axis: Option<DefiningVector>,
    /// Time at which the rotating and fixed frames coincide [default: 0].
    #[arg(long, allow_hyphen_values = true)]
    pub epoch: Option<f64>,
    /// Number of output intervals over the span [default: 100].
    #[arg(long)]
    pub samples: Option<usize>,
    /// Integrate numerically as well and report the largest deviation.
    #[arg(long)]
    pub compare_numerical: bool,
    /// Scheme of the numerical comparison [default: rk4].
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Fiber representative for Cartesian input [default: sks].
    #[arg(long, value_enum)]
    pub rep: Option<RepArg>,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Coordinate plane of the orbit panel [default: xy].
    #[arg(long, value_enum)]
    pub plane: Option<Plane>,
    /// Image width in pixels [default: 900].
    #[arg(long)]
    pub width: Option<u32>,
}

fn common(args: &CommonArgs, summary: Option<PathBuf>) -> CliResult<(Common, ConfigFile)> {
    let file = ConfigFile::load(args.config.as_deref())?;
    let flags = CommonFlags {
        format: args.format,
        chart: args.chart,
        alpha: args.alpha,
        mu: args.mu,
        jobs: args.jobs,
        input: args.input.clone(),
        input_format: args.input_format,
        output: args.output.clone(),
        summary,
    };
    Ok((config::merge_common(flags, &file)?, file))
}

fn pick_enum<T: clap::ValueEnum>(flag: Option<T>, file: &Option<String>, key: &str) -> CliResult<Option<T>> {
    match (flag, file) {
        (Some(v), _) => Ok(Some(v)),
        (None, Some(s)) => parse_value_enum(key, s).map(Some),
        (None, None) => Ok(None),
    }
}

fn orbit_state(args: &OrbitArgs, file: &ConfigFile) -> CliResult<Option<[f64; 6]>> {
    match (args.state, &file.orbit.state) {
        (Some(s), _) => Ok(Some(s)),
        (None, Some(s)) => parse_state(s).map(Some).map_err(|e| CliError::Usage(format!("config: {e}"))),
        (None, None) => Ok(None),
    }
}

fn rep(flag: Option<RepArg>, file: &Option<String>, key: &str) -> CliResult<ksreg::Representative> {
    Ok(pick_enum(flag, file, key)?.unwrap_or_default().into())
}

const DEFAULT_MAX_STEPS: usize = 10_000_000;

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Transform(a) => {
            let (common, file) = common(&a.common, None)?;
            let opts = TransformOptions {
                to: pick_enum(a.to, &file.transform.to, "transform.to")?.unwrap_or_default(),
                rep: rep(a.rep, &file.transform.rep, "transform.rep")?,
                project_constraint: a.project_constraint || file.transform.project_constraint.unwrap_or(false),
            };
            transform::run(&common, &opts)
        }
        Command::Propagate(a) => {
            let (common, file) = common(&a.common, a.orbit.summary.clone())?;
            let tau = a.orbit.tau_span.or(if a.t_span.is_some() { None } else { file.orbit.tau_span });
            let t = a.t_span.or(if a.orbit.tau_span.is_some() { None } else { file.orbit.t_span });
            let span = match (tau, t) {
                (Some(x), None) => Span::Tau(x),
                (None, Some(x)) => Span::Time(x),
                (Some(_), Some(_)) => return Err(CliError::Usage("give either a tau span or a t span, not both".into())),
                (None, None) => return Err(CliError::Usage("a span is required: --tau-span or --t-span".into())),
            };
            let opts = PropagateOptions {
                state: orbit_state(&a.orbit, &file)?,
                rep: rep(a.orbit.rep, &file.orbit.rep, "orbit.rep")?,
                span,
                scheme: pick_enum(a.scheme, &file.integrator.scheme, "integrator.scheme")?.unwrap_or_default(),
                steps: StepOptions {
                    step: a.orbit.step.or(file.integrator.step),
                    steps_per_orbit: a.steps_per_orbit.or(file.integrator.steps_per_orbit).unwrap_or(2000),
                    max_steps: a.orbit.max_steps.or(file.integrator.max_steps).unwrap_or(DEFAULT_MAX_STEPS),
                    sample_every: a.sample_every.or(file.integrator.sample_every).unwrap_or(1),
                },
                compare_oracle: a.compare_oracle || file.orbit.compare_oracle.unwrap_or(false),
            };
            propagate::run(&common, &opts)
        }
        Command::Rotating(a) => {
            let (common, file) = common(&a.common, a.orbit.summary.clone())?;
            let scheme = match pick_enum(a.scheme, &file.integrator.scheme, "integrator.scheme")?.unwrap_or_default().numerical() {
                Some(s) => s,
                None => return Err(CliError::Usage("the numerical comparison needs rk4 or splitting".into())),
            };
            let axis = match (a.axis, &file.frame.axis) {
                (Some(c), _) => Some(c),
                (None, Some(s)) => Some(parse_defining_vector(s).map_err(|e| CliError::Usage(format!("config: frame.axis: {e}")))?),
                (None, None) => None,
            };
            let opts = RotatingOptions {
                state: orbit_state(&a.orbit, &file)?,
                rep: rep(a.orbit.rep, &file.orbit.rep, "orbit.rep")?,
                omega: a.omega.or(file.frame.omega).ok_or_else(|| CliError::Usage("--omega is required".into()))?,
                axis,
                epoch: a.epoch.or(file.frame.epoch).unwrap_or(0.0),
                tau_span: a.orbit.tau_span.or(file.orbit.tau_span).ok_or_else(|| CliError::Usage("--tau-span is required".into()))?,
                samples: a.samples.or(file.frame.samples).unwrap_or(100),
                compare_numerical: a.compare_numerical || file.frame.compare_numerical.unwrap_or(false),
                scheme,
                step: a.orbit.step.or(file.integrator.step),
                max_steps: a.orbit.max_steps.or(file.integrator.max_steps).unwrap_or(DEFAULT_MAX_STEPS),
            };
            rotating::run(&common, &opts)
        }
        Command::Check(a) => {
            let (common, file) = common(&a.common, None)?;
            check::run(&common, rep(a.rep, &file.transform.rep, "transform.rep")?)
        }
        Command::Plot(a) => {
            let (common, file) = common(&a.common, None)?;
            let plane = pick_enum(a.plane, &file.plot.plane, "plot.plane")?.unwrap_or_default();
            plot::run(&common, plane, a.width.or(file.plot.width).unwrap_or(900))
        }
    }
}
