use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{OutputFormat, RunConfig};

/// One pass/fail check with the margin that decided it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Signed margin; positive when satisfied. `None` for boolean checks.
    pub margin: Option<f64>,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, margin: Option<f64>, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, margin, detail: detail.into() }
    }

    /// Passes exactly when `margin > 0`.
    pub fn margin(name: impl Into<String>, margin: f64, detail: impl Into<String>) -> Self {
        Check::new(name, margin > 0.0, Some(margin), detail)
    }
}

/// An `(x, y)` series for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<[f64; 2]>,
}

impl Series {
    pub fn new(name: impl Into<String>, x_label: &str, y_label: &str, points: Vec<[f64; 2]>) -> Self {
        Series { name: name.into(), x_label: x_label.into(), y_label: y_label.into(), points }
    }
}

/// Failure category of a module error recorded in a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    /// Bad parameters reached a module.
    Invalid,
    /// Floating-point, budget or search-cap failure.
    Numerical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: String,
    pub kind: FailureKind,
    pub message: String,
}

/// Everything a run produced except wall-clock timings, which live in
/// [`Timings`] so that reports are reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub seed: u64,
    pub config: RunConfig,
    pub checks: Vec<Check>,
    pub series: Vec<Series>,
    /// Structured results by stage.
    pub results: BTreeMap<String, serde_json::Value>,
    pub errors: Vec<StageError>,
    pub passed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub stages: Vec<(String, f64)>,
    pub total_seconds: f64,
}

impl Report {
    pub fn new(config: &RunConfig) -> Self {
        Report {
            scenario: config.scenario.name().into(),
            seed: config.seed,
            config: config.clone(),
            checks: Vec::new(),
            series: Vec::new(),
            results: BTreeMap::new(),
            errors: Vec::new(),
            passed: true,
        }
    }

    /// Recomputes `passed` as the conjunction of every check, false if any
    /// stage errored.
    pub fn finish(&mut self) {
        self.passed = self.errors.is_empty() && self.checks.iter().all(|c| c.passed);
    }

    pub fn has_numerical_error(&self) -> bool {
        self.errors.iter().any(|e| e.kind == FailureKind::Numerical)
    }

    pub fn has_invalid_error(&self) -> bool {
        self.errors.iter().any(|e| e.kind == FailureKind::Invalid)
    }

    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialise");
        s.push('\n');
        s
    }

    /// `checks.csv` contents: one row per check.
    pub fn checks_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["check", "passed", "margin", "detail"]).expect("in-memory write");
        for c in &self.checks {
            let margin = c.margin.map(|m| m.to_string()).unwrap_or_default();
            w.write_record([c.name.as_str(), if c.passed { "true" } else { "false" }, &margin, &c.detail])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    /// `series.csv` contents: one row per series point.
    pub fn series_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["series", "x_label", "y_label", "x", "y"]).expect("in-memory write");
        for s in &self.series {
            for [x, y] in &s.points {
                w.write_record([&s.name, &s.x_label, &s.y_label, &x.to_string(), &y.to_string()])
                    .expect("in-memory write");
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    /// Whitespace-separated `x y` text for one series.
    pub fn plotdata(series: &Series) -> String {
        let mut out = format!("# {}\n# {} {}\n", series.name, series.x_label, series.y_label);
        for [x, y] in &series.points {
            out.push_str(&format!("{x} {y}\n"));
        }
        out
    }

    /// Files (relative name, contents) for the chosen format.
    pub fn render(&self, format: OutputFormat) -> Vec<(PathBuf, String)> {
        match format {
            OutputFormat::Json => vec![(PathBuf::from("report.json"), self.to_json())],
            OutputFormat::Csv => {
                vec![(PathBuf::from("checks.csv"), self.checks_csv()), (PathBuf::from("series.csv"), self.series_csv())]
            }
            OutputFormat::Plotdata => self
                .series
                .iter()
                .map(|s| (PathBuf::from("plotdata").join(format!("{}.dat", s.name)), Report::plotdata(s)))
                .collect(),
        }
    }

    /// Writes the rendered files under `dir`, plus `timings.json` when given.
    pub fn emit(&self, dir: &Path, format: OutputFormat, timings: Option<&Timings>) -> std::io::Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        let mut files = self.render(format);
        if let Some(t) = timings {
            let mut s = serde_json::to_string_pretty(t).expect("timings serialise");
            s.push('\n');
            files.push((PathBuf::from("timings.json"), s));
        }
        for (rel, text) in files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, text)?;
            written.push(path);
        }
        Ok(written)
    }
}
