use std::fmt;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::linalg::monotonic_seconds;
use crate::{Error, Result};

pub const TIMELINE_SCHEMA: &str = "# schema: sqd-timeline v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    /// Building the circuit parameters and handing them to the sampler.
    Throw,
    /// Collecting and deserializing the measured batches.
    Retrieve,
    /// Recovery, subsampling and subspace construction.
    PreProcessing,
    /// Davidson, orbital optimization, carryover and DE bookkeeping.
    Diagonalization,
    /// Sampler time on the (simulated) device.
    QuantumExecution,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resource {
    Quantum,
    Classical,
}

impl Phase {
    pub const ALL: [Phase; 5] = [
        Phase::Throw,
        Phase::Retrieve,
        Phase::PreProcessing,
        Phase::Diagonalization,
        Phase::QuantumExecution,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Throw => "throw",
            Phase::Retrieve => "retrieve",
            Phase::PreProcessing => "pre-processing",
            Phase::Diagonalization => "diagonalization",
            Phase::QuantumExecution => "quantum-execution",
        }
    }

    pub fn resource(self) -> Resource {
        match self {
            Phase::QuantumExecution => Resource::Quantum,
            _ => Resource::Classical,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Resource {
    pub fn as_str(self) -> &'static str {
        match self {
            Resource::Quantum => "quantum",
            Resource::Classical => "classical",
        }
    }
}

/// One timed phase. Times are monotonic seconds from the run origin;
/// `wall_start_ms` is the Unix wall clock for humans only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub phase: Phase,
    pub population: usize,
    /// Absent for phases covering a whole population.
    pub walker: Option<usize>,
    pub iteration: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub wall_start_ms: u64,
}

impl TimingRecord {
    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Monotonic clock shared by the scheduler and the sampler threads.
#[derive(Clone, Copy, Debug)]
pub struct RunClock {
    origin: f64,
    /// Added to every reading so a resumed run continues the old axis.
    offset: f64,
}

impl RunClock {
    pub fn start(offset: f64) -> Self {
        RunClock {
            origin: monotonic_seconds(),
            offset,
        }
    }

    pub fn now(&self) -> f64 {
        monotonic_seconds() - self.origin + self.offset
    }

    /// Converts a raw process-monotonic reading to run time.
    pub fn from_monotonic(&self, t: f64) -> f64 {
        t - self.origin + self.offset
    }

    pub fn record(&self, phase: Phase, population: usize, walker: Option<usize>, iteration: usize, start_s: f64) -> TimingRecord {
        let end_s = self.now().max(start_s);
        TimingRecord {
            phase,
            population,
            walker,
            iteration,
            start_s,
            end_s,
            wall_start_ms: wall_ms().saturating_sub(((end_s - start_s) * 1e3) as u64),
        }
    }
}

pub fn wall_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceUsage {
    pub resource: Resource,
    pub busy_s: f64,
    pub idle_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimelineSummary {
    /// From the earliest start to the latest end over all records.
    pub span_s: f64,
    pub resources: Vec<ResourceUsage>,
}

/// Length of the union of `[start, end]` intervals.
pub fn covered_length(mut intervals: Vec<(f64, f64)>) -> f64 {
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0;
    let mut current: Option<(f64, f64)> = None;
    for (s, e) in intervals {
        match current {
            Some((cs, ce)) if s <= ce => current = Some((cs, ce.max(e))),
            Some((cs, ce)) => {
                total += ce - cs;
                current = Some((s, e));
            }
            None => current = Some((s, e)),
        }
    }
    total + current.map_or(0.0, |(s, e)| e - s)
}

/// Idle fraction per resource, 1 − covered/span, over the run span.
pub fn summarize(records: &[TimingRecord]) -> TimelineSummary {
    if records.is_empty() {
        return TimelineSummary {
            span_s: 0.0,
            resources: Vec::new(),
        };
    }
    let t0 = records.iter().map(|r| r.start_s).fold(f64::INFINITY, f64::min);
    let t1 = records.iter().map(|r| r.end_s).fold(f64::NEG_INFINITY, f64::max);
    let span_s = t1 - t0;
    let resources = [Resource::Quantum, Resource::Classical]
        .into_iter()
        .map(|res| {
            let busy_s = covered_length(
                records
                    .iter()
                    .filter(|r| r.phase.resource() == res)
                    .map(|r| (r.start_s, r.end_s))
                    .collect(),
            );
            let idle_fraction = if span_s > 0.0 { 1.0 - busy_s / span_s } else { 0.0 };
            ResourceUsage {
                resource: res,
                busy_s,
                idle_fraction,
            }
        })
        .collect();
    TimelineSummary { span_s, resources }
}

pub fn write_timeline_csv<W: Write>(records: &[TimingRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{TIMELINE_SCHEMA}")?;
    writeln!(w, "iteration,population,walker,phase,resource,start_s,end_s,duration_s")?;
    for r in records {
        let walker = r.walker.map(|k| k.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{:.6},{:.6},{:.6}",
            r.iteration,
            r.population,
            walker,
            r.phase,
            r.phase.resource().as_str(),
            r.start_s,
            r.end_s,
            r.duration()
        )?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct TimelineFile {
    schema: String,
    summary: TimelineSummary,
    records: Vec<TimingRecord>,
}

/// Writes `timeline.csv` and `timeline.json` into `dir`.
pub fn emit_timeline(records: &[TimingRecord], dir: &Path) -> Result<TimelineSummary> {
    let summary = summarize(records);
    let csv = dir.join("timeline.csv");
    let mut buf = Vec::new();
    write_timeline_csv(records, &mut buf).expect("in-memory write");
    std::fs::write(&csv, buf).map_err(|e| Error::io(&csv, e))?;
    let file = TimelineFile {
        schema: TIMELINE_SCHEMA.trim_start_matches("# schema: ").into(),
        summary: summary.clone(),
        records: records.to_vec(),
    };
    let json = dir.join("timeline.json");
    std::fs::write(&json, serde_json::to_string_pretty(&file)?).map_err(|e| Error::io(&json, e))?;
    Ok(summary)
}

pub fn read_timeline(path: &Path) -> Result<Vec<TimingRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: TimelineFile = serde_json::from_str(&text)?;
    Ok(file.records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(phase: Phase, s: f64, e: f64) -> TimingRecord {
        TimingRecord {
            phase,
            population: 0,
            walker: None,
            iteration: 0,
            start_s: s,
            end_s: e,
            wall_start_ms: 0,
        }
    }

    #[test]
    fn union_merges_overlaps() {
        assert_eq!(covered_length(vec![(0.0, 2.0), (1.0, 3.0), (5.0, 6.0)]), 4.0);
        assert_eq!(covered_length(vec![]), 0.0);
        assert_eq!(covered_length(vec![(0.0, 4.0), (1.0, 2.0)]), 4.0);
    }

    #[test]
    fn three_interval_fixture() {
        // span [0, 10]; quantum busy 0–4, classical busy 3–5 ∪ 8–10
        let recs = vec![
            rec(Phase::QuantumExecution, 0.0, 4.0),
            rec(Phase::Diagonalization, 3.0, 5.0),
            rec(Phase::PreProcessing, 8.0, 10.0),
        ];
        let s = summarize(&recs);
        assert_eq!(s.span_s, 10.0);
        let q = &s.resources[0];
        let c = &s.resources[1];
        assert_eq!(q.resource, Resource::Quantum);
        assert!((q.idle_fraction - 0.6).abs() < 1e-15);
        assert!((c.idle_fraction - 0.6).abs() < 1e-15);
        assert_eq!(c.busy_s, 4.0);
    }

    #[test]
    fn empty_set_writes_headers() {
        let dir = tempfile::tempdir().unwrap();
        let s = emit_timeline(&[], dir.path()).unwrap();
        assert_eq!(s.span_s, 0.0);
        let csv = std::fs::read_to_string(dir.path().join("timeline.csv")).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert!(read_timeline(&dir.path().join("timeline.json")).unwrap().is_empty());
    }

    #[test]
    fn phase_names() {
        let names: Vec<_> = Phase::ALL.iter().map(|p| p.as_str()).collect();
        assert_eq!(names, ["throw", "retrieve", "pre-processing", "diagonalization", "quantum-execution"]);
        let j = serde_json::to_string(&Phase::PreProcessing).unwrap();
        assert_eq!(j, "\"pre-processing\"");
    }
}
