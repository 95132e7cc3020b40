//! CSV and JSON writers. Everything here is deterministic given the rows.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;

use sdkl_core::Sign;

use crate::runner::{Artifact, Row, RowOutcome};

pub const CSV_HEADER: &str =
    "scenario_id,check_id,predicted_sign,stabilized_sign,boundary,agrees,last_delta,err_estimate,runtime_ms";

/// Round-trippable scientific notation.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

fn sign(s: Option<Sign>) -> &'static str {
    s.map(|s| s.as_str()).unwrap_or("")
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_owned()
    }
}

/// One check's table. `runtime_ms` is left empty unless `timings` is set,
/// so that repeated runs produce identical bytes.
pub fn check_csv(master_seed: u64, rows: &[&Row], timings: bool) -> String {
    let mut s = format!("# sdkl master_seed={master_seed}\n{CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            quote(&r.scenario_id),
            r.check_id,
            sign(r.predicted),
            sign(r.stabilized),
            r.boundary,
            r.agrees,
            opt_real(r.last_delta),
            opt_real(r.err_estimate),
            if timings {
                format!("{:.3}", r.runtime_ms)
            } else {
                String::new()
            }
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FailureEntry {
    pub scenario_id: String,
    pub check_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub master_seed: u64,
    pub checks_run: usize,
    pub agreed: usize,
    pub disagreed: usize,
    pub boundary: usize,
    pub inconclusive: usize,
    pub failed: usize,
    pub errors: Vec<FailureEntry>,
}

impl Summary {
    pub fn from_rows(master_seed: u64, rows: &[Row]) -> Summary {
        let mut s = Summary {
            master_seed,
            checks_run: rows.len(),
            agreed: 0,
            disagreed: 0,
            boundary: 0,
            inconclusive: 0,
            failed: 0,
            errors: Vec::new(),
        };
        for r in rows {
            match r.outcome() {
                RowOutcome::Agreed => s.agreed += 1,
                RowOutcome::Disagreed => s.disagreed += 1,
                RowOutcome::Boundary => s.boundary += 1,
                RowOutcome::Inconclusive => s.inconclusive += 1,
                RowOutcome::Failed => {
                    s.failed += 1;
                    s.errors.push(FailureEntry {
                        scenario_id: r.scenario_id.clone(),
                        check_id: r.check_id.to_owned(),
                        error: r.failure.clone().unwrap_or_default(),
                    });
                }
            }
        }
        s
    }

    /// Fraction of non-boundary rows without a resolved sign.
    pub fn inconclusive_rate(&self) -> f64 {
        let n = self.checks_run - self.boundary;
        if n == 0 {
            0.0
        } else {
            self.inconclusive as f64 / n as f64
        }
    }
}

/// Writes `{check}.csv` for every check id (in the given order), the
/// artifacts, and `summary.json`.
pub fn write_all(
    out_dir: &Path,
    master_seed: u64,
    check_ids: &[&str],
    rows: &[Row],
    artifacts: &[Artifact],
    timings: bool,
) -> anyhow::Result<Summary> {
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    for id in check_ids {
        let mine: Vec<&Row> = rows.iter().filter(|r| r.check_id == *id).collect();
        let path = out_dir.join(format!("{id}.csv"));
        fs::write(&path, check_csv(master_seed, &mine, timings))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    for a in artifacts {
        let path = out_dir.join(&a.path);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, &a.contents).with_context(|| format!("writing {}", path.display()))?;
    }
    let summary = Summary::from_rows(master_seed, rows);
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    fs::write(out_dir.join("summary.json"), json)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip() {
        for x in [0.1, -1e-300, 1.0 / 3.0, 6.02e23] {
            assert_eq!(real(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(real(-0.5), "-5.0000000000000000e-1");
    }

    #[test]
    fn quoting() {
        assert_eq!(quote("a/b=1"), "a/b=1");
        assert_eq!(quote("a,b"), "\"a,b\"");
    }
}
