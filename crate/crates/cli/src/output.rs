//! Output sink: per-experiment CSVs, `summary.json`, and `report.txt`.
//! Every file embeds the config hash and artifact version; floats are
//! written with full precision so byte identity is meaningful.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ARTIFACT_VERSION;
use crate::CliError;

/// Full-precision float field: 17 significant digits round-trip f64.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.17e}")
}

pub struct OutputWriter {
    dir: PathBuf,
    config_hash: String,
    files: Vec<String>,
}

impl OutputWriter {
    pub fn new(dir: &Path, config_hash: &str) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), config_hash: config_hash.to_string(), files: Vec::new() })
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    fn put(&mut self, name: &str, content: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, content).map_err(|e| CliError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Comma-separated table prefixed by hash and version comment lines.
    pub fn write_csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), CliError> {
        let mut body = String::new();
        body.push_str(&format!("# config_hash={}\n", self.config_hash));
        body.push_str(&format!("# artifact_version={ARTIFACT_VERSION}\n"));
        body.push_str(&header.join(","));
        body.push('\n');
        for row in rows {
            debug_assert_eq!(row.len(), header.len(), "ragged row in {name}");
            body.push_str(&row.join(","));
            body.push('\n');
        }
        self.put(name, &body)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut body =
            serde_json::to_string_pretty(value).expect("summary serialization is infallible");
        body.push('\n');
        self.put(name, &body)
    }

    pub fn write_text(&mut self, name: &str, content: &str) -> Result<(), CliError> {
        self.put(name, content)
    }
}

/// One pass/fail judgment against a declared tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// "<=" for error-like values, ">=" for margins.
    pub direction: &'static str,
    pub pass: bool,
}

impl Check {
    pub fn le(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            direction: "<=",
            pass: value.is_finite() && value <= threshold,
        }
    }

    pub fn ge(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            direction: ">=",
            pass: value.is_finite() && value >= threshold,
        }
    }
}

/// Everything an experiment reports back to the shell layer.
pub struct RunOutcome {
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    /// Kind-specific result payload for `summary.json`.
    pub results: serde_json::Value,
}

impl RunOutcome {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Human-readable run report.
pub fn render_report(
    kind: &str,
    config_hash: &str,
    profile: &str,
    seed: u64,
    outcome: &RunOutcome,
) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "stokeslab {ARTIFACT_VERSION}  experiment={kind}  profile={profile}  seed={seed}\n"
    ));
    out.push_str(&format!("config_hash={config_hash}\n\n"));
    for c in &outcome.checks {
        out.push_str(&format!(
            "[{}] {}: value={:.6e} {} threshold={:.6e}\n",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.direction,
            c.threshold
        ));
    }
    if outcome.checks.is_empty() {
        out.push_str("(no tolerance checks declared for this experiment)\n");
    }
    out.push('\n');
    if outcome.warnings.is_empty() {
        out.push_str("warnings: none\n");
    } else {
        out.push_str("warnings:\n");
        for w in &outcome.warnings {
            out.push_str(&format!("  - {w}\n"));
        }
    }
    out.push_str(&format!(
        "\noverall: {}\n",
        if outcome.all_pass() { "PASS" } else { "FAIL" }
    ));
    out
}
