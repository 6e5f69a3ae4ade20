//! Trace CSV, run manifest and reference files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use cfista::engine::IterationRecord;
use serde::{Deserialize, Serialize};

use crate::problem::{Algorithm, ModelSettings};
use crate::CliError;

pub const TRACE_HEADER: &str = "iter,objective,gap,step_norm,elapsed_ms";

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    let tmp = path.with_file_name(name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// One row per iteration. `gap` is `|F - F*|` when a reference optimum is known and
/// empty otherwise; `elapsed_ms` is empty unless `timing` is set, so that repeated
/// runs produce identical files.
pub fn render_trace(records: &[IterationRecord], f_star: Option<f64>, timing: bool) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in records {
        let gap = f_star
            .map(|f| format!("{:e}", (r.objective - f).abs()))
            .unwrap_or_default();
        let elapsed = if timing {
            format!("{:.3}", r.elapsed_ms)
        } else {
            String::new()
        };
        out.push_str(&format!(
            "{},{:e},{},{:e},{}\n",
            r.k, r.objective, gap, r.step_norm, elapsed
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub gap: Option<f64>,
    pub step_norm: f64,
    pub elapsed_ms: Option<f64>,
}

/// Parses a trace written by [`render_trace`].
pub fn parse_trace(text: &str) -> Result<Vec<TraceRow>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(TRACE_HEADER) {
        return Err("missing trace header".into());
    }
    let opt = |s: &str| -> Result<Option<f64>, String> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|e| format!("{s}: {e}"))
        }
    };
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(format!("expected 5 fields: {line}"));
            }
            Ok(TraceRow {
                iter: f[0].parse().map_err(|e| format!("{}: {e}", f[0]))?,
                objective: f[1].parse().map_err(|e| format!("{}: {e}", f[1]))?,
                gap: opt(f[2])?,
                step_norm: f[3].parse().map_err(|e| format!("{}: {e}", f[3]))?,
                elapsed_ms: opt(f[4])?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsUsed {
    pub mu: f64,
    pub lipschitz: f64,
    pub theta: Option<f64>,
    pub alpha: Option<f64>,
    pub big_c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub dataset: PathBuf,
    pub algorithm: Algorithm,
    pub model: ModelSettings,
    pub constants: ConstantsUsed,
    pub tolerance: f64,
    pub iterations: usize,
    pub termination: String,
    pub final_objective: f64,
    pub final_residual: f64,
    pub wall_time_ms: f64,
    pub exit_status: i32,
}

pub fn manifest_path(trace: &Path) -> PathBuf {
    let mut name = trace.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    trace.with_file_name(name)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Reference optimum produced by `reference` for gap computation and certificates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub dataset: PathBuf,
    pub model: ModelSettings,
    pub objective: f64,
    pub x: Vec<f64>,
    pub iterations: usize,
    pub termination: String,
    pub residual: f64,
    pub tolerance: f64,
}

pub fn read_reference(path: &Path) -> Result<Reference, CliError> {
    let text = fs::read(path)?;
    Ok(serde_json::from_slice(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(k: usize, objective: f64) -> IterationRecord {
        IterationRecord {
            k,
            objective,
            step_norm: 0.5,
            elapsed_ms: 1.25,
        }
    }

    #[test]
    fn trace_round_trip() {
        let recs = vec![rec(1, 3.0), rec(2, 1.0 / 3.0)];
        let text = render_trace(&recs, Some(0.25), true);
        assert!(text.starts_with("iter,objective,gap,step_norm,elapsed_ms\n"));
        let rows = parse_trace(&text).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].objective, 1.0 / 3.0);
        assert_eq!(rows[0].gap, Some(2.75));
        assert_eq!(rows[0].elapsed_ms, Some(1.25));
    }

    #[test]
    fn empty_columns() {
        let text = render_trace(&[rec(1, 2.0)], None, false);
        assert_eq!(text.lines().nth(1).unwrap(), "1,2e0,,5e-1,");
        let rows = parse_trace(&text).unwrap();
        assert_eq!((rows[0].gap, rows[0].elapsed_ms), (None, None));
    }

    #[test]
    fn manifest_sits_next_to_trace() {
        assert_eq!(
            manifest_path(Path::new("out/run.csv")),
            PathBuf::from("out/run.csv.manifest.json")
        );
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("f.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
