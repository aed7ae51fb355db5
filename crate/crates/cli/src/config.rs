//! Options shared by the subcommands: a TOML config file merged under the
//! command-line flags, which always win.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::ValueEnum;
use ksreg::canon::{CartesianState, Representative};
use ksreg::dynamics;
use ksreg::{DefiningVector, KsChart};
use serde::Deserialize;

use crate::error::{CliError, CliResult};
use crate::io::Format;

/// `α` given explicitly, or `auto` for the major axis `2a` of the initial orbit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaSpec {
    Fixed(f64),
    Auto,
}

impl FromStr for AlphaSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.trim().eq_ignore_ascii_case("auto") {
            return Ok(AlphaSpec::Auto);
        }
        match s.trim().parse::<f64>() {
            Ok(a) if a > 0.0 && a.is_finite() => Ok(AlphaSpec::Fixed(a)),
            _ => Err(format!("alpha must be a positive number or 'auto', got '{s}'")),
        }
    }
}

impl AlphaSpec {
    pub fn resolve(self, s: &CartesianState) -> CliResult<f64> {
        match self {
            AlphaSpec::Fixed(a) => Ok(a),
            AlphaSpec::Auto => {
                let e = dynamics::kepler_hamiltonian_cartesian(s)?;
                if e < 0.0 {
                    Ok(-s.mu / e)
                } else {
                    Err(CliError::Domain(format!("alpha = auto needs a bound orbit, energy is {e}")))
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Default)]
pub enum RepArg {
    #[default]
    Sks,
    Rule1,
}

impl From<RepArg> for Representative {
    fn from(r: RepArg) -> Self {
        match r {
            RepArg::Sks => Representative::Sks,
            RepArg::Rule1 => Representative::Rule1,
        }
    }
}

pub fn parse_value_enum<T: ValueEnum>(key: &str, s: &str) -> CliResult<T> {
    T::from_str(s, true).map_err(|_| CliError::Usage(format!("config: invalid value '{s}' for {key}")))
}

#[derive(Deserialize, Clone, Debug)]
#[serde(untagged)]
pub enum AlphaValue {
    Number(f64),
    Text(String),
}

#[derive(Deserialize, Default, Debug)]
#[serde(default, deny_unknown_fields)]
pub struct ChartSection {
    pub defining_vector: Option<String>,
    pub alpha: Option<AlphaValue>,
    pub mu: Option<f64>,
}

#[derive(Deserialize, Default, Debug)]
#[serde(default, deny_unknown_fields)]
pub struct IoSection {
    pub format: Option<String>,
    pub input: Option<PathBuf>,
    pub input_format: Option<String>,
    pub output: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub jobs: Option<usize>,
}

#[derive(Deserialize, Default, Debug)]
#[serde(default, deny_unknown_fields)]
pub struct TransformSection {
    pub rep: Option<String>,
    pub to: Option<String>,
    pub project_constraint: Option<bool>,
}

#[derive(Deserialize, Default, Debug)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitSection {
    pub state: Option<String>,
    pub rep: Option<String>,
    pub tau_span: Option<f64>,
    pub t_span: Option<f64>,
    pub compare_oracle: Option<bool>,
}

#[derive(Deserialize, Default, Debug)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSection {
    pub step: Option<f64>,
    pub steps_per_orbit: Option<usize>,
    pub scheme: Option<String>,
    pub max_steps: Option<usize>,
    pub sample_every: Option<usize>,
}

#[derive(Deserialize, Default, Debug)]
#[serde(default, deny_unknown_fields)]
pub struct FrameSection {
    pub omega: Option<f64>,
    pub axis: Option<String>,
    pub epoch: Option<f64>,
    pub samples: Option<usize>,
    pub compare_numerical: Option<bool>,
}

#[derive(Deserialize, Default, Debug)]
#[serde(default, deny_unknown_fields)]
pub struct PlotSection {
    pub plane: Option<String>,
    pub width: Option<u32>,
}

/// Contents of a `--config` file. Every key is optional.
#[derive(Deserialize, Default, Debug)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub chart: ChartSection,
    pub io: IoSection,
    pub transform: TransformSection,
    pub orbit: OrbitSection,
    pub integrator: IntegratorSection,
    pub frame: FrameSection,
    pub plot: PlotSection,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

/// Parses a defining vector given by name or components.
pub fn parse_defining_vector(s: &str) -> Result<DefiningVector, String> {
    s.parse::<DefiningVector>().map_err(|e| e.to_string())
}

/// Chart, gravitational parameter and I/O options after merging.
#[derive(Clone, Debug)]
pub struct Common {
    /// `None` when neither a flag nor the config named a chart.
    pub defining_vector: Option<DefiningVector>,
    pub alpha: AlphaSpec,
    pub mu: f64,
    pub format: Format,
    pub input: Option<PathBuf>,
    pub input_format: Format,
    pub output: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl Common {
    pub fn chart_vector(&self) -> DefiningVector {
        self.defining_vector.unwrap_or_else(DefiningVector::ks3)
    }

    pub fn chart_for(&self, s: &CartesianState) -> CliResult<KsChart> {
        Ok(KsChart::new(self.chart_vector(), self.alpha.resolve(s)?)?)
    }

    /// Chart for inputs given in KS variables, where `α` cannot be inferred.
    pub fn fixed_chart(&self) -> CliResult<KsChart> {
        match self.alpha {
            AlphaSpec::Fixed(a) => Ok(KsChart::new(self.chart_vector(), a)?),
            AlphaSpec::Auto => Err(CliError::Usage("alpha = auto needs Cartesian input".into())),
        }
    }
}

/// Raw shared flags before merging with the config file.
#[derive(Clone, Debug, Default)]
pub struct CommonFlags {
    pub format: Option<Format>,
    pub chart: Option<DefiningVector>,
    pub alpha: Option<AlphaSpec>,
    pub mu: Option<f64>,
    pub jobs: Option<usize>,
    pub input: Option<PathBuf>,
    pub input_format: Option<Format>,
    pub output: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

pub fn merge_common(flags: CommonFlags, file: &ConfigFile) -> CliResult<Common> {
    let format = match (flags.format, &file.io.format) {
        (Some(f), _) => f,
        (None, Some(s)) => parse_value_enum("io.format", s)?,
        (None, None) => Format::Csv,
    };
    let defining_vector = match (flags.chart, &file.chart.defining_vector) {
        (Some(c), _) => Some(c),
        (None, Some(s)) => Some(parse_defining_vector(s).map_err(|e| CliError::Usage(format!("config: chart.defining_vector: {e}")))?),
        (None, None) => None,
    };
    let alpha = match (flags.alpha, &file.chart.alpha) {
        (Some(a), _) => a,
        (None, Some(AlphaValue::Number(a))) => AlphaSpec::from_str(&a.to_string()).map_err(|e| CliError::Usage(format!("config: {e}")))?,
        (None, Some(AlphaValue::Text(s))) => AlphaSpec::from_str(s).map_err(|e| CliError::Usage(format!("config: {e}")))?,
        (None, None) => AlphaSpec::Fixed(1.0),
    };
    let mu = flags.mu.or(file.chart.mu).unwrap_or(1.0);
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(CliError::Usage(format!("mu must be positive, got {mu}")));
    }
    let input = flags.input.or_else(|| file.io.input.clone());
    let input_format = match (flags.input_format, &file.io.input_format) {
        (Some(f), _) => f,
        (None, Some(s)) => parse_value_enum("io.input_format", s)?,
        (None, None) => input.as_deref().and_then(Format::from_path).unwrap_or(format),
    };
    let jobs = flags.jobs.or(file.io.jobs);
    if jobs == Some(0) {
        return Err(CliError::Usage("jobs must be at least 1".into()));
    }
    Ok(Common {
        defining_vector,
        alpha,
        mu,
        format,
        input,
        input_format,
        output: flags.output.or_else(|| file.io.output.clone()),
        summary: flags.summary.or_else(|| file.io.summary.clone()),
        jobs,
    })
}

/// Parses `x1,x2,x3,X1,X2,X3`.
pub fn parse_state(s: &str) -> Result<[f64; 6], String> {
    let parts: Vec<f64> =
        s.split(',').map(|p| p.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| format!("state '{s}': {e}"))?;
    parts.try_into().map_err(|p: Vec<f64>| format!("state needs 6 components, got {}", p.len()))
}
