//! File outputs of a batch set: summary.csv, per_slot.csv and one JSON
//! record per (batch, run), plus optional auction-trace JSON lines.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::metrics::{render_per_slot_csv, render_summary_csv};

use super::batch::BatchSummary;
use super::pipeline::{HarnessError, RunRecord};

pub const TRACE_SCHEMA: &str = "auction-trace/1";

pub fn record_path(out_dir: &Path, batch: u32, run: u32) -> PathBuf {
    out_dir.join("runs").join(format!("{batch}-{run}.json"))
}

pub fn trace_path(out_dir: &Path, batch: u32, run: u32) -> PathBuf {
    out_dir.join("runs").join(format!("{batch}-{run}.trace.jsonl"))
}

/// Write the per-cell archive: the record list and, when traces were kept,
/// one JSON line per trace event behind a schema header.
pub fn write_records(
    out_dir: &Path,
    batch: u32,
    run: u32,
    records: &[RunRecord],
) -> Result<(), HarnessError> {
    let path = record_path(out_dir, batch, run);
    fs::create_dir_all(path.parent().expect("runs dir"))?;
    fs::write(&path, serde_json::to_vec_pretty(records)?)?;

    if records.iter().any(|r| r.trace.is_some()) {
        let mut file = fs::File::create(trace_path(out_dir, batch, run))?;
        writeln!(file, "{}", serde_json::json!({ "schema": TRACE_SCHEMA }))?;
        for record in records {
            if let Some(trace) = &record.trace {
                for event in trace {
                    writeln!(file, "{}", serde_json::to_string(event)?)?;
                }
            }
        }
    }
    Ok(())
}

/// Write summary.csv and per_slot.csv.
pub fn write_summaries(out_dir: &Path, summary: &BatchSummary) -> Result<(), HarnessError> {
    fs::create_dir_all(out_dir)?;
    fs::write(
        out_dir.join("summary.csv"),
        render_summary_csv(&summary.stats),
    )?;
    let rows: Vec<(u32, u32, &crate::metrics::MetricsReport)> = summary
        .reports
        .iter()
        .map(|(b, r, report)| (*b, *r, report))
        .collect();
    fs::write(out_dir.join("per_slot.csv"), render_per_slot_csv(&rows))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_batches, SimOptions};
    use crate::model::{IntRange, ScenarioConfig};

    fn tiny_config(seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            coalitions: IntRange([4, 5]),
            clients: IntRange([4, 5]),
            services: IntRange([2, 2]),
            slots_per_auction: 6,
            offered_run_lengths: IntRange([1, 6]),
            requested_run_lengths: IntRange([1, 6]),
            history_window: 4,
            seed,
            ..ScenarioConfig::default()
        }
    }

    fn run_into(dir: &Path, trace: bool) -> BatchSummary {
        let config = tiny_config(4);
        let opts = SimOptions { trace, ..SimOptions::default() };
        let summary = run_batches(&config, 2, 2, &opts, false, &|b, r, records| {
            write_records(dir, b, r, records)
        })
        .unwrap();
        write_summaries(dir, &summary).unwrap();
        summary
    }

    fn tree_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
        let mut files = Vec::new();
        let mut stack = vec![dir.to_path_buf()];
        while let Some(current) = stack.pop() {
            for entry in fs::read_dir(&current).unwrap() {
                let path = entry.unwrap().path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    let name = path
                        .strip_prefix(dir)
                        .unwrap()
                        .to_string_lossy()
                        .into_owned();
                    files.push((name, fs::read(&path).unwrap()));
                }
            }
        }
        files.sort();
        files
    }

    #[test]
    fn archive_layout_and_replay_identity() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        run_into(dir_a.path(), false);
        run_into(dir_b.path(), false);

        let a = tree_bytes(dir_a.path());
        let b = tree_bytes(dir_b.path());
        assert_eq!(a, b, "same config and seed must replay byte-identically");

        let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
        assert!(names.contains(&"summary.csv"));
        assert!(names.contains(&"per_slot.csv"));
        assert!(names.contains(&"runs/0-0.json"));
        assert!(names.contains(&"runs/1-1.json"));
    }

    #[test]
    fn trace_files_written_when_enabled() {
        let dir = tempfile::tempdir().unwrap();
        run_into(dir.path(), true);
        let trace = fs::read_to_string(trace_path(dir.path(), 0, 0)).unwrap();
        let mut lines = trace.lines();
        let header: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
        assert_eq!(header["schema"], TRACE_SCHEMA);
        for line in lines {
            let event: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(event.get("event").is_some());
        }
    }
}
