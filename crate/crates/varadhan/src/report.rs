//! Deterministic report emission: CSV plot series and JSON reports.
//!
//! Every output file embeds the config hash (CSV as a leading comment
//! line, JSON as a top-level field), numeric CSV cells carry 17
//! significant digits (full double round trip), rows end with LF, and all
//! content is a pure function of `(config, seed)` so reruns are
//! byte-identical.

use crate::error::{Error, Result};
use crate::montecarlo::{ExperimentReport, RunRecord};
use serde::Serialize;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

// ---------------------------------------------------------------------------
// Formatting and CSV assembly
// ---------------------------------------------------------------------------

/// Full-round-trip numeric formatting: 17 significant digits in scientific
/// notation, enough to reconstruct the exact double.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// In-memory CSV: a header and homogeneous rows, rendered with the config
/// hash stamped as the first line.
#[derive(Debug, Clone)]
pub struct CsvTable {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    /// Table with the given column names.
    pub fn new(columns: &[&str]) -> CsvTable {
        CsvTable {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Append one row; the cell count must match the header.
    pub fn push(&mut self, cells: Vec<String>) -> Result<()> {
        if cells.len() != self.columns.len() {
            return Err(Error::InvalidInput(format!(
                "row has {} cells but the table has {} columns",
                cells.len(),
                self.columns.len()
            )));
        }
        self.rows.push(cells);
        Ok(())
    }

    /// Number of data rows.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// Whether the table has no data rows.
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Render to CSV text: `# config_hash=…`, header, rows; LF endings,
    /// trailing newline.
    pub fn render(&self, config_hash: &str) -> String {
        let mut out = String::new();
        out.push_str("# config_hash=");
        out.push_str(config_hash);
        out.push('\n');
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Write text to a file, creating parent directories as needed.
pub fn write_text(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, content)?;
    Ok(())
}

/// Serialize a payload to pretty JSON with the config hash as a top-level
/// sibling field, and write it.
pub fn write_json<T: Serialize>(path: &Path, config_hash: &str, payload: &T) -> Result<()> {
    #[derive(Serialize)]
    struct Stamped<'a, T> {
        config_hash: &'a str,
        #[serde(flatten)]
        payload: &'a T,
    }
    let doc = serde_json::to_string_pretty(&Stamped {
        config_hash,
        payload,
    })
    .map_err(|e| Error::Config(format!("serialize report: {e}")))?;
    write_text(path, &format!("{doc}\n"))
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

/// Provenance record for one CLI run: what was computed, from which
/// config, and where the artifacts went.  Timestamps make the manifest
/// itself non-reproducible metadata; the numeric payloads it points to
/// carry only the hash.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    /// Hash of the numeric-determining config payload.
    pub config_hash: String,
    /// RNG seed in effect (after overrides).
    pub seed: u64,
    /// Crate version that produced the artifacts.
    pub artifact_version: String,
    /// Wall-clock start, milliseconds since the Unix epoch.
    pub started_unix_ms: u64,
    /// Wall-clock end, milliseconds since the Unix epoch.
    pub finished_unix_ms: u64,
    /// Paths of every file the run wrote, relative to the output dir.
    pub outputs: Vec<String>,
}

impl RunManifest {
    /// Open a manifest at the current wall-clock time.
    pub fn start(config_hash: String, seed: u64) -> RunManifest {
        RunManifest {
            config_hash,
            seed,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_ms: now_unix_ms(),
            finished_unix_ms: 0,
            outputs: Vec::new(),
        }
    }

    /// Record one written artifact.
    pub fn record(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    /// Stamp the finish time and write the manifest itself.
    pub fn finish(mut self, dir: &Path) -> Result<()> {
        self.finished_unix_ms = now_unix_ms();
        self.outputs.push("manifest.json".to_string());
        let doc = serde_json::to_string_pretty(&self)
            .map_err(|e| Error::Config(format!("serialize manifest: {e}")))?;
        write_text(&dir.join("manifest.json"), &format!("{doc}\n"))
    }
}

fn now_unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

// ---------------------------------------------------------------------------
// Experiment plot series
// ---------------------------------------------------------------------------

/// Flatten an experiment report into the plot-series CSV: one row per
/// `(t, n, statistic)`, columns `t,n,statistic,value`, statistics in a
/// fixed documented order.  Booleans map to 1/0; counters to their float
/// value.
pub fn experiment_csv(report: &ExperimentReport) -> Result<CsvTable> {
    let mut table = CsvTable::new(&["t", "n", "statistic", "value"]);
    let mut put = |t: f64, n: usize, stat: &str, v: f64| -> Result<()> {
        table.push(vec![
            format_f64(t),
            n.to_string(),
            stat.to_string(),
            format_f64(v),
        ])
    };
    for record in &report.records {
        match record {
            RunRecord::Ulln(u) => {
                for slice in &u.per_time {
                    put(slice.t, u.n, "sup_function_median", slice.sup_function_median)?;
                    put(slice.t, u.n, "sup_function_p90", slice.sup_function_p90)?;
                    put(slice.t, u.n, "value_error_median", slice.value_error_median)?;
                    put(slice.t, u.n, "value_error_p90", slice.value_error_p90)?;
                    if let (Some(md), Some(p90)) = (slice.mean_dist_median, slice.mean_dist_p90) {
                        put(slice.t, u.n, "mean_dist_median", md)?;
                        put(slice.t, u.n, "mean_dist_p90", p90)?;
                    }
                }
            }
            RunRecord::FunctionClt(r) => {
                for (j, v) in r.f_mu.iter().enumerate() {
                    put(r.t, r.n, &format!("f_mu_{j}"), *v)?;
                }
                for (j, row) in r.target.iter().enumerate() {
                    for (k, v) in row.iter().enumerate() {
                        put(r.t, r.n, &format!("target_{j}_{k}"), *v)?;
                    }
                }
                for (j, row) in r.empirical.iter().enumerate() {
                    for (k, v) in row.iter().enumerate() {
                        put(r.t, r.n, &format!("empirical_{j}_{k}"), *v)?;
                    }
                }
                put(r.t, r.n, "rel_frobenius", r.rel_frobenius)?;
                put(r.t, r.n, "empirical_psd", r.empirical_psd as u8 as f64)?;
                put(r.t, r.n, "target_psd", r.target_psd as u8 as f64)?;
                normality_rows(&mut put, r.t, r.n, &r.normality)?;
            }
            RunRecord::VarianceClt(r) => {
                put(r.t, r.n, "value_target", r.value_target)?;
                put(r.t, r.n, "sigma_var_target", r.sigma_var_target)?;
                put(r.t, r.n, "empirical_variance", r.empirical_variance)?;
                put(r.t, r.n, "rel_error", r.rel_error)?;
                normality_rows(&mut put, r.t, r.n, &r.normality)?;
                put(r.t, r.n, "audit_mismatches", r.audit_mismatches as f64)?;
                put(r.t, r.n, "optimizer_fallbacks", r.optimizer_fallbacks as f64)?;
            }
            RunRecord::MeanClt(r) => {
                for (j, v) in r.base.iter().enumerate() {
                    put(r.t, r.n, &format!("base_{j}"), *v)?;
                }
                for (j, row) in r.target.iter().enumerate() {
                    for (k, v) in row.iter().enumerate() {
                        put(r.t, r.n, &format!("target_{j}_{k}"), *v)?;
                    }
                }
                if let Some(naive) = &r.naive_target {
                    for (j, row) in naive.iter().enumerate() {
                        for (k, v) in row.iter().enumerate() {
                            put(r.t, r.n, &format!("naive_target_{j}_{k}"), *v)?;
                        }
                    }
                }
                for (j, row) in r.empirical.iter().enumerate() {
                    for (k, v) in row.iter().enumerate() {
                        put(r.t, r.n, &format!("empirical_{j}_{k}"), *v)?;
                    }
                }
                put(r.t, r.n, "rel_frobenius", r.rel_frobenius)?;
                put(r.t, r.n, "frobenius_gap", r.frobenius_gap)?;
                if let Some(v) = r.rel_frobenius_naive {
                    put(r.t, r.n, "rel_frobenius_naive", v)?;
                }
                if let Some(v) = r.frobenius_gap_naive {
                    put(r.t, r.n, "frobenius_gap_naive", v)?;
                }
                put(r.t, r.n, "empirical_psd", r.empirical_psd as u8 as f64)?;
                put(r.t, r.n, "target_psd", r.target_psd as u8 as f64)?;
                normality_rows(&mut put, r.t, r.n, &r.normality)?;
                put(r.t, r.n, "rejected", r.rejected as f64)?;
                put(r.t, r.n, "audit_mismatches", r.audit_mismatches as f64)?;
                put(r.t, r.n, "optimizer_fallbacks", r.optimizer_fallbacks as f64)?;
            }
        }
    }
    Ok(table)
}

fn normality_rows(
    put: &mut impl FnMut(f64, usize, &str, f64) -> Result<()>,
    t: f64,
    n: usize,
    d: &crate::montecarlo::NormalityDiagnostics,
) -> Result<()> {
    for (j, v) in d.skewness.iter().enumerate() {
        put(t, n, &format!("skewness_{j}"), *v)?;
    }
    for (j, v) in d.excess_kurtosis.iter().enumerate() {
        put(t, n, &format!("excess_kurtosis_{j}"), *v)?;
    }
    put(t, n, "chi_square_p", d.chi_square_p)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
