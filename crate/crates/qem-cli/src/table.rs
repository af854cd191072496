//! Long-format result table and its two output files: a plot-ready CSV with
//! a fixed column order and a JSON manifest that records the resolved
//! configuration, its hash, and every acceptance assertion's outcome.

use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::config::ResolvedConfig;

pub const CSV_HEADER: &str = "experiment_id,method,level,m_or_lambda,metric,value,std,seed,timestamp";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment_id: String,
    pub method: String,
    pub level: usize,
    /// Subspace degree, noise-level multiplier, or sweep budget, depending
    /// on the experiment; f64 so all three fit one column.
    pub m_or_lambda: f64,
    pub metric: String,
    pub value: f64,
    pub std: f64,
    pub seed: u64,
    /// Logical emission index, not wall-clock time, so reruns with the same
    /// seed produce byte-identical files.
    pub timestamp: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssertionOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Single collector for every row an experiment produces. Rows arrive in a
/// deterministic order (parallel sections collect into indexed buffers
/// before appending) and the collector stamps the logical timestamp.
#[derive(Debug, Default)]
pub struct ResultTable {
    rows: Vec<ResultRow>,
    annotations: Vec<String>,
}

impl ResultTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends one row. A non-finite value or spread is allowed only with
    /// an annotation explaining it, so silent NaNs cannot reach the CSV.
    pub fn push(
        &mut self,
        experiment_id: &str,
        method: &str,
        level: usize,
        m_or_lambda: f64,
        metric: &str,
        value: f64,
        std: f64,
        seed: u64,
    ) {
        let timestamp = self.rows.len() as u64;
        if !value.is_finite() || !std.is_finite() {
            self.annotations.push(format!(
                "row {timestamp} ({method} {metric}) is non-finite: value {value}, std {std}"
            ));
        }
        self.rows.push(ResultRow {
            experiment_id: experiment_id.to_string(),
            method: method.to_string(),
            level,
            m_or_lambda,
            metric: metric.to_string(),
            value,
            std,
            seed,
            timestamp,
        });
    }

    pub fn annotate(&mut self, note: String) {
        self.annotations.push(note);
    }

    pub fn rows(&self) -> &[ResultRow] {
        &self.rows
    }

    pub fn annotations(&self) -> &[String] {
        &self.annotations
    }

    /// Renders the fixed-order CSV. An empty table still yields the header
    /// line so downstream parsers see the schema.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.experiment_id,
                r.method,
                r.level,
                format_float(r.m_or_lambda),
                r.metric,
                format_float(r.value),
                format_float(r.std),
                r.seed,
                r.timestamp
            ));
        }
        out
    }
}

/// Shortest round-trip decimal, with non-finite values spelled so the CSV
/// stays machine-readable.
fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        let mut buf = ryu_like(x);
        if buf == "-0" {
            buf = "0".to_string();
        }
        buf
    }
}

fn ryu_like(x: f64) -> String {
    // Rust's Display for f64 already prints the shortest string that parses
    // back to the same bits.
    format!("{x}")
}

/// Parses a CSV produced by `to_csv` back into rows; round-trips exactly.
#[cfg(test)]
pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    if header != CSV_HEADER {
        return Err(format!("unexpected header '{header}'"));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(format!("line {} has {} fields, want 9", i + 2, fields.len()));
        }
        let parse_f = |s: &str| -> Result<f64, String> {
            match s {
                "NaN" => Ok(f64::NAN),
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                _ => s.parse().map_err(|e| format!("line {}: {e}", i + 2)),
            }
        };
        rows.push(ResultRow {
            experiment_id: fields[0].to_string(),
            method: fields[1].to_string(),
            level: fields[2].parse().map_err(|e| format!("line {}: {e}", i + 2))?,
            m_or_lambda: parse_f(fields[3])?,
            metric: fields[4].to_string(),
            value: parse_f(fields[5])?,
            std: parse_f(fields[6])?,
            seed: fields[7].parse().map_err(|e| format!("line {}: {e}", i + 2))?,
            timestamp: fields[8].parse().map_err(|e| format!("line {}: {e}", i + 2))?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub experiment_id: String,
    pub config_hash: String,
    pub library_version: &'static str,
    pub seed: u64,
    pub wall_time_seconds: f64,
    pub row_count: usize,
    pub assertions: &'a [AssertionOutcome],
    pub annotations: &'a [String],
    pub resolved_config: &'a ResolvedConfig,
}

/// Writes `results.csv`, `manifest.json`, and any extra named files (for
/// example per-method histograms) into `dir`, creating it if needed.
pub fn emit_outputs(
    dir: &Path,
    config: &ResolvedConfig,
    table: &ResultTable,
    assertions: &[AssertionOutcome],
    extra_files: &[(String, String)],
    wall_time_seconds: f64,
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let manifest = Manifest {
        experiment_id: config.kind.id().to_string(),
        config_hash: config.hash(),
        library_version: qem_core::VERSION,
        seed: config.seed,
        wall_time_seconds,
        row_count: table.rows().len(),
        assertions,
        annotations: table.annotations(),
        resolved_config: config,
    };
    let mut csv_file = std::fs::File::create(dir.join("results.csv"))?;
    csv_file.write_all(table.to_csv().as_bytes())?;
    let mut manifest_file = std::fs::File::create(dir.join("manifest.json"))?;
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    manifest_file.write_all(json.as_bytes())?;
    manifest_file.write_all(b"\n")?;
    for (name, contents) in extra_files {
        let mut f = std::fs::File::create(dir.join(name))?;
        f.write_all(contents.as_bytes())?;
    }
    Ok(())
}

/// Renders one histogram as `bin_left,bin_right,count` lines.
pub fn histogram_csv(bins: &[(f64, f64, usize)]) -> String {
    let mut out = String::from("bin_left,bin_right,count\n");
    for (left, right, count) in bins {
        out.push_str(&format!("{},{},{}\n", format_float(*left), format_float(*right), count));
    }
    out
}
