//! Record input and tabular output in CSV or JSON lines.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use ksreg::canon::{CartesianState, KsPhase};
use ksreg::propagator::TrajectorySample;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

impl Format {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Format> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Format::Csv),
            "jsonl" | "ndjson" | "json" => Some(Format::Jsonl),
            _ => None,
        }
    }
}

pub const TRAJECTORY_COLUMNS: [&str; 20] =
    ["tau", "t", "v0", "v1", "v2", "v3", "V0", "V1", "V2", "V3", "vstar", "Vstar", "x1", "x2", "x3", "X1", "X2", "X3", "Jc", "K0"];

/// One input record, keyed by column name.
pub type Record = BTreeMap<String, f64>;

pub fn field(rec: &Record, key: &str) -> CliResult<f64> {
    rec.get(key).copied().ok_or_else(|| CliError::Usage(format!("missing column '{key}'")))
}

fn open_input(path: Option<&Path>) -> CliResult<Box<dyn Read>> {
    match path {
        None => Ok(Box::new(io::stdin())),
        Some(p) if p == Path::new("-") => Ok(Box::new(io::stdin())),
        Some(p) => {
            File::open(p).map(|f| Box::new(f) as Box<dyn Read>).map_err(|e| CliError::Usage(format!("cannot open {}: {e}", p.display())))
        }
    }
}

pub fn read_records(path: Option<&Path>, format: Format) -> CliResult<Vec<Record>> {
    let input = open_input(path)?;
    match format {
        Format::Csv => read_csv(input),
        Format::Jsonl => read_jsonl(input),
    }
}

fn read_csv(input: Box<dyn Read>) -> CliResult<Vec<Record>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(input);
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(CliError::Usage(format!("csv header: {e}"))),
    };
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| CliError::Usage(format!("record {i}: {e}")))?;
        let mut rec = Record::new();
        for (name, value) in headers.iter().zip(row.iter()) {
            let x = value.parse::<f64>().map_err(|_| CliError::Usage(format!("record {i}: column '{name}' is not a number: '{value}'")))?;
            rec.insert(name.to_string(), x);
        }
        out.push(rec);
    }
    Ok(out)
}

fn read_jsonl(input: Box<dyn Read>) -> CliResult<Vec<Record>> {
    let mut out = Vec::new();
    for line in BufReader::new(input).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let i = out.len();
        let obj: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(&line).map_err(|e| CliError::Usage(format!("record {i}: {e}")))?;
        let mut rec = Record::new();
        for (k, v) in obj {
            let x = match &v {
                serde_json::Value::Number(n) => n.as_f64(),
                serde_json::Value::Null => Some(f64::NAN),
                _ => None,
            }
            .ok_or_else(|| CliError::Usage(format!("record {i}: field '{k}' is not a number")))?;
            rec.insert(k, x);
        }
        out.push(rec);
    }
    Ok(out)
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_f64(x: f64, format: Format) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else if format == Format::Jsonl {
        "null".to_string()
    } else {
        format!("{x}")
    }
}

pub fn open_output(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    match path {
        None => Ok(Box::new(BufWriter::new(io::stdout()))),
        Some(p) if p == Path::new("-") => Ok(Box::new(BufWriter::new(io::stdout()))),
        Some(p) => File::create(p)
            .map(|f| Box::new(BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", p.display()))),
    }
}

/// Writes rows of numbers under fixed column names. The CSV header appears
/// with the first row, so no rows means no output at all.
pub struct TableWriter {
    out: Box<dyn Write>,
    format: Format,
    columns: Vec<String>,
    started: bool,
}

impl TableWriter {
    pub fn new(out: Box<dyn Write>, format: Format, columns: Vec<String>) -> Self {
        Self { out, format, columns, started: false }
    }

    pub fn create(path: Option<&PathBuf>, format: Format, columns: Vec<String>) -> CliResult<Self> {
        Ok(Self::new(open_output(path.map(|p| p.as_path()))?, format, columns))
    }

    pub fn row(&mut self, values: &[f64]) -> CliResult<()> {
        debug_assert_eq!(values.len(), self.columns.len());
        match self.format {
            Format::Csv => {
                if !self.started {
                    writeln!(self.out, "{}", self.columns.join(","))?;
                }
                let cells: Vec<String> = values.iter().map(|x| format_f64(*x, Format::Csv)).collect();
                writeln!(self.out, "{}", cells.join(","))?;
            }
            Format::Jsonl => {
                let cells: Vec<String> =
                    self.columns.iter().zip(values).map(|(k, x)| format!("\"{k}\":{}", format_f64(*x, Format::Jsonl))).collect();
                writeln!(self.out, "{{{}}}", cells.join(","))?;
            }
        }
        self.started = true;
        Ok(())
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn trajectory_columns(extra: &[&str]) -> Vec<String> {
    TRAJECTORY_COLUMNS.iter().chain(extra).map(|s| s.to_string()).collect()
}

pub fn trajectory_row(tau: f64, p: &KsPhase, s: &CartesianState, jc: f64, k0: f64) -> Vec<f64> {
    let mut row = Vec::with_capacity(24);
    row.extend([tau, p.t]);
    row.extend(p.v.to_array());
    row.extend(p.pv.to_array());
    row.extend([p.t, p.pt]);
    row.extend(s.x.iter());
    row.extend(s.p.iter());
    row.extend([jc, k0]);
    row
}

pub fn sample_row(s: &TrajectorySample) -> Vec<f64> {
    trajectory_row(s.tau, &s.phase, &s.cartesian, s.invariants.jc, s.invariants.k0)
}
