//! Report types, deterministic serialization and SVG plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::verify::config::ExperimentConfig;

/// Version of the `report.json` layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Outcome of a check, ordered by severity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    /// The inputs did not satisfy the hypothesis being tested.
    HypothesisViolated,
    Inconclusive,
    Fail,
}

impl Status {
    pub fn combine(self, other: Status) -> Status {
        self.max(other)
    }

    /// `0` pass, `2` inconclusive, `1` violation.
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::HypothesisViolated | Status::Inconclusive => 2,
            Status::Fail => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::HypothesisViolated => "hypothesis_violated",
            Status::Inconclusive => "inconclusive",
            Status::Fail => "fail",
        }
    }
}

/// A measured constant with the ratios it changed by under each refinement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasuredConstant {
    pub name: String,
    pub value: f64,
    /// Refinement name mapped to refined value over base value.
    pub sensitivity: BTreeMap<String, f64>,
}

impl MeasuredConstant {
    pub fn new(name: impl Into<String>, value: f64) -> Self {
        Self {
            name: name.into(),
            value,
            sensitivity: BTreeMap::new(),
        }
    }

    pub fn with(mut self, refinement: impl Into<String>, ratio: f64) -> Self {
        self.sensitivity.insert(refinement.into(), ratio);
        self
    }

    /// Largest symmetric change `max(ρ, 1/ρ)` over all refinements.
    pub fn worst_sensitivity(&self) -> f64 {
        self.sensitivity
            .values()
            .map(|&r| if r > 0.0 { r.max(1.0 / r) } else { f64::INFINITY })
            .fold(1.0, f64::max)
    }
}

/// A bound on what the finite box cannot see.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub name: String,
    pub value: f64,
    /// `value` over the quantity it perturbs.
    pub relative: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    /// Log-log decay profile with a power-law guide.
    Envelope,
    /// `λ ↦ λ^p w({G > λ})`.
    LevelCurve,
}

/// Data for one SVG figure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plot {
    pub name: String,
    pub kind: PlotKind,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
    /// Slope of the guide line through the first point, for envelopes.
    pub guide_slope: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub status: Status,
    pub message: String,
    pub constants: Vec<MeasuredConstant>,
    pub tail_bounds: Vec<TailBound>,
    pub details: serde_json::Value,
    #[serde(skip)]
    pub plots: Vec<Plot>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: Status::Pass,
            message: String::new(),
            constants: Vec::new(),
            tail_bounds: Vec::new(),
            details: serde_json::Value::Null,
            plots: Vec::new(),
        }
    }

    pub fn constant(&self, name: &str) -> Option<&MeasuredConstant> {
        self.constants.iter().find(|c| c.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub config: Option<ExperimentConfig>,
    pub status: Status,
    pub checks: Vec<CheckReport>,
    /// Written to `timing.json`, never to `report.json`.
    #[serde(skip)]
    pub wall_clock_seconds: Option<f64>,
}

impl Default for VerificationReport {
    fn default() -> Self {
        Self::new(None)
    }
}

impl VerificationReport {
    pub fn new(config: Option<ExperimentConfig>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool: "riesz-lab".into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config,
            status: Status::Pass,
            checks: Vec::new(),
            wall_clock_seconds: None,
        }
    }

    pub fn push(&mut self, check: CheckReport) {
        self.status = self.status.combine(check.status);
        self.checks.push(check);
    }

    pub fn check(&self, name: &str) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// One row per measured constant.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["check", "status", "constant", "value", "refinement", "sensitivity"])?;
        for c in &self.checks {
            if c.constants.is_empty() {
                w.write_record([c.name.as_str(), c.status.as_str(), "", "", "", ""])?;
            }
            for k in &c.constants {
                let value = format!("{:e}", k.value);
                if k.sensitivity.is_empty() {
                    w.write_record([c.name.as_str(), c.status.as_str(), &k.name, &value, "", ""])?;
                }
                for (r, ratio) in &k.sensitivity {
                    w.write_record([c.name.as_str(), c.status.as_str(), &k.name, &value, r, &format!("{ratio:e}")])?;
                }
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidParams(format!("csv buffer: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::InvalidParams(format!("csv encoding: {e}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Format {
    Json,
    Csv,
    Svg,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Json, Format::Csv, Format::Svg];
}

fn write(path: &Path, contents: &str) -> Result<PathBuf> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

/// Writes `report.json`, `summary.csv`, `plots/*.svg` and, when a wall-clock
/// time is present, `timing.json` under `dir`. Returns the written paths.
pub fn emit_report(report: &VerificationReport, dir: impl AsRef<Path>, formats: &[Format]) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    if formats.contains(&Format::Json) {
        written.push(write(&dir.join("report.json"), &report.to_json()?)?);
        if let Some(t) = report.wall_clock_seconds {
            let timing = serde_json::json!({ "wall_clock_seconds": t });
            written.push(write(&dir.join("timing.json"), &format!("{timing:#}\n"))?);
        }
    }
    if formats.contains(&Format::Csv) {
        written.push(write(&dir.join("summary.csv"), &report.to_csv()?)?);
    }
    if formats.contains(&Format::Svg) {
        let plots: Vec<(&CheckReport, &Plot)> = report
            .checks
            .iter()
            .flat_map(|c| c.plots.iter().map(move |p| (c, p)))
            .collect();
        if !plots.is_empty() {
            let pdir = dir.join("plots");
            std::fs::create_dir_all(&pdir).map_err(|e| Error::io(&pdir, e))?;
            for (c, p) in plots {
                let path = pdir.join(format!("{}_{}.svg", c.name, p.name));
                written.push(write(&path, &render_svg(p))?);
            }
        }
    }
    Ok(written)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Log-log SVG of a plot. Envelopes get one data polyline and one guide line.
pub fn render_svg(plot: &Plot) -> String {
    let pts: Vec<(f64, f64)> = plot
        .points
        .iter()
        .copied()
        .filter(|&(x, y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.log10(), y.log10()))
        .collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(&plot.title)
    );
    let (x0, y0, x1, y1) = (MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN / 2.0, MARGIN / 1.5);
    let _ = writeln!(
        svg,
        r#"<path class="axes" d="M{x0:.1},{y1:.1} L{x0:.1},{y0:.1} L{x1:.1},{y0:.1}" stroke="black" fill="none"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">log10 {}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 18.0,
        escape(&plot.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.1}" font-size="12" transform="rotate(-90 16 {:.1})" text-anchor="middle">log10 {}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(&plot.y_label)
    );
    if !pts.is_empty() {
        let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &pts {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
        let guide = plot.guide_slope.map(|s| {
            let (gx, gy) = pts[0];
            (gx, gy, xmax, gy + s * (xmax - gx))
        });
        if let Some((_, _, _, gy)) = guide {
            ymin = ymin.min(gy);
            ymax = ymax.max(gy);
        }
        if xmax - xmin < 1e-12 {
            xmin -= 0.5;
            xmax += 0.5;
        }
        if ymax - ymin < 1e-12 {
            ymin -= 0.5;
            ymax += 0.5;
        }
        let sx = |x: f64| x0 + (x - xmin) / (xmax - xmin) * (x1 - x0);
        let sy = |y: f64| y0 - (y - ymin) / (ymax - ymin) * (y0 - y1);
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="data" points="{}" stroke="steelblue" stroke-width="1.5" fill="none"/>"#,
            coords.join(" ")
        );
        if let Some((ax, ay, bx, by)) = guide {
            let _ = writeln!(
                svg,
                r#"<line class="guide" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="firebrick" stroke-dasharray="6 4"/>"#,
                sx(ax),
                sy(ay),
                sx(bx),
                sy(by)
            );
        }
        for (v, anchor) in [(xmin, x0), (xmax, x1)] {
            let _ = writeln!(
                svg,
                r#"<text x="{anchor:.1}" y="{:.1}" text-anchor="middle" font-size="11">{v:.2}</text>"#,
                y0 + 16.0
            );
        }
        for (v, anchor) in [(ymin, y0), (ymax, y1)] {
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{anchor:.1}" text-anchor="end" font-size="11">{v:.2}</text>"#,
                x0 - 6.0
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}
