use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::extrapolate::{extrapolate_zero_variance, Extrapolation};
use super::run::{write_traces, CHECKPOINT_FILE};
use super::state::Checkpoint;
use super::timeline::{emit_timeline, read_timeline, TimelineSummary};
use crate::{Error, Result};

/// Index and headline numbers of a run directory, written as
/// `report.json` next to the CSV files it lists.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub run: PathBuf,
    pub iterations: usize,
    pub best_energy: f64,
    pub population_best: Vec<f64>,
    pub best_walkers: Vec<usize>,
    pub timeline: TimelineSummary,
    pub extrapolation: Option<Extrapolation>,
    pub files: Vec<String>,
}

/// Scaling CSVs dropped into the run directory by `bench-scaling`, sorted.
fn scaling_files(dir: &Path) -> Result<Vec<String>> {
    let mut out: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok()?.file_name().into_string().ok())
        .filter(|n| n.starts_with("scaling") && n.ends_with(".csv"))
        .collect();
    out.sort();
    Ok(out)
}

/// Regenerates every derived artifact of `dir` from its checkpoint and
/// timeline, then writes `report.json`.
pub fn report_run(dir: &Path) -> Result<RunReport> {
    let ckpt = Checkpoint::read(&dir.join(CHECKPOINT_FILE))?;
    write_traces(&ckpt, dir)?;
    let tl = dir.join("timeline.json");
    let records = if tl.is_file() { read_timeline(&tl)? } else { Vec::new() };
    let timeline = emit_timeline(&records, dir)?;
    let extrapolation = match extrapolate_zero_variance(&ckpt.variance_points) {
        Ok(fit) => Some(fit),
        Err(e) => {
            log::info!("no zero-variance fit: {e}");
            None
        }
    };
    let report = RunReport {
        run: dir.to_path_buf(),
        iterations: ckpt.iteration,
        best_energy: ckpt.best_energy(),
        population_best: ckpt.populations.iter().map(|p| p.best_energy()).collect(),
        best_walkers: ckpt.populations.iter().map(|p| p.best_walker()).collect(),
        timeline,
        extrapolation,
        files: [
            "de_trace.csv",
            "best_trace.csv",
            "walker_trace.csv",
            "variance_points.csv",
            "timeline.csv",
            "timeline.json",
        ]
        .iter()
        .map(|s| s.to_string())
        .chain(scaling_files(dir)?)
        .collect(),
    };
    let path = dir.join("report.json");
    std::fs::write(&path, serde_json::to_string_pretty(&report)?).map_err(|e| Error::io(&path, e))?;
    Ok(report)
}
