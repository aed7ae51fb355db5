//! SVG rendering of a trajectory file: the orbit in one coordinate plane and
//! the drift of `K₀` and `J·c` against Sundman time.

use std::fmt::Write as _;
use std::io::Write;

use clap::ValueEnum;

use crate::config::Common;
use crate::error::{CliError, CliResult};
use crate::io::{self, field, Record};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Default)]
pub enum Plane {
    #[default]
    Xy,
    Xz,
    Yz,
}

impl Plane {
    fn columns(self) -> (&'static str, &'static str) {
        match self {
            Plane::Xy => ("x1", "x2"),
            Plane::Xz => ("x1", "x3"),
            Plane::Yz => ("x2", "x3"),
        }
    }
}

/// Values below this are drawn at the floor of the logarithmic drift panel.
const LOG_FLOOR: f64 = 1e-18;

struct Panel {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
}

impl Panel {
    fn map(&self, (u, v): (f64, f64), (umin, umax): (f64, f64), (vmin, vmax): (f64, f64)) -> (f64, f64) {
        let su = if umax > umin { (u - umin) / (umax - umin) } else { 0.5 };
        let sv = if vmax > vmin { (v - vmin) / (vmax - vmin) } else { 0.5 };
        (self.x0 + su * self.w, self.y0 + (1.0 - sv) * self.h)
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

fn polyline(svg: &mut String, points: &[(f64, f64)], colour: &str) {
    let pts: Vec<String> = points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let _ = writeln!(svg, r#"<polyline fill="none" stroke="{colour}" stroke-width="1" points="{}"/>"#, pts.join(" "));
}

fn text(svg: &mut String, x: f64, y: f64, s: &str) {
    let _ = writeln!(svg, r#"<text x="{x:.1}" y="{y:.1}" font-family="sans-serif" font-size="12">{s}</text>"#);
}

pub fn render(records: &[Record], plane: Plane, width: u32) -> CliResult<String> {
    if records.is_empty() {
        return Err(CliError::Usage("nothing to plot: the trajectory is empty".into()));
    }
    let (cu, cv) = plane.columns();
    let mut orbit = Vec::with_capacity(records.len());
    let mut drift = Vec::with_capacity(records.len());
    let k0_ref = field(&records[0], "K0")?;
    for (i, r) in records.iter().enumerate() {
        let get = |k: &str| field(r, k).map_err(|e| e.at_record(i));
        orbit.push((get(cu)?, get(cv)?));
        let tau = get("tau")?;
        let dk = (get("K0")? - k0_ref).abs().max(LOG_FLOOR).log10();
        let jc = get("Jc")?.abs().max(LOG_FLOOR).log10();
        drift.push((tau, dk, jc));
    }

    let w = width.max(200) as f64;
    let side = w / 2.0 - 60.0;
    let left = Panel { x0: 40.0, y0: 40.0, w: side, h: side };
    let right = Panel { x0: w / 2.0 + 20.0, y0: 40.0, w: side, h: side };
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{:.0}" viewBox="0 0 {w:.0} {:.0}">"#,
        side + 90.0,
        side + 90.0
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for p in [&left, &right] {
        let _ =
            writeln!(svg, r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#, p.x0, p.y0, p.w, p.h);
    }

    // equal scales on both orbit axes, origin marked
    let (umin, umax) = range(orbit.iter().map(|p| p.0).chain([0.0]));
    let (vmin, vmax) = range(orbit.iter().map(|p| p.1).chain([0.0]));
    let half = 0.5 * (umax - umin).max(vmax - vmin).max(f64::MIN_POSITIVE) * 1.05;
    let (uc, vc) = (0.5 * (umin + umax), 0.5 * (vmin + vmax));
    let (ur, vr) = ((uc - half, uc + half), (vc - half, vc + half));
    let pts: Vec<_> = orbit.iter().map(|&p| left.map(p, ur, vr)).collect();
    polyline(&mut svg, &pts, "navy");
    let (ox, oy) = left.map((0.0, 0.0), ur, vr);
    let _ = writeln!(svg, r#"<circle cx="{ox:.2}" cy="{oy:.2}" r="3" fill="orange"/>"#);
    text(&mut svg, left.x0, 25.0, &format!("orbit ({cu}, {cv})"));

    let tr = range(drift.iter().map(|d| d.0));
    let (lo, hi) = range(drift.iter().flat_map(|d| [d.1, d.2]));
    let lr = (lo.floor(), hi.ceil().max(lo.floor() + 1.0));
    polyline(&mut svg, &drift.iter().map(|d| right.map((d.0, d.1), tr, lr)).collect::<Vec<_>>(), "crimson");
    polyline(&mut svg, &drift.iter().map(|d| right.map((d.0, d.2), tr, lr)).collect::<Vec<_>>(), "seagreen");
    text(&mut svg, right.x0, 25.0, "log10 |K0 - K0(0)| (red), log10 |Jc| (green)");
    text(&mut svg, right.x0, right.y0 + right.h + 20.0, &format!("tau {} .. {}", tr.0, tr.1));
    text(&mut svg, right.x0 - 15.0, right.y0 + 12.0, &format!("{}", lr.1));
    text(&mut svg, right.x0 - 15.0, right.y0 + right.h, &format!("{}", lr.0));
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn run(common: &Common, plane: Plane, width: u32) -> CliResult<()> {
    let records = io::read_records(common.input.as_deref(), common.input_format)?;
    let svg = render(&records, plane, width)?;
    let mut out = io::open_output(common.output.as_deref())?;
    out.write_all(svg.as_bytes())?;
    out.flush()?;
    Ok(())
}
