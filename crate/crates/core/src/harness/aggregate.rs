use std::path::{Path, PathBuf};

use super::list_runs;
use super::trace_io::{read_meta, read_trace, write_aggregate};
use crate::error::{Error, Result};
use crate::trace::{ConvergenceTrace, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    F,
    Htot,
    Jtot,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::F, Metric::Htot, Metric::Jtot];

    pub fn name(self) -> &'static str {
        match self {
            Metric::F => "f",
            Metric::Htot => "htot",
            Metric::Jtot => "jtot",
        }
    }

    pub fn of(self, r: &TraceRecord) -> f64 {
        match self {
            Metric::F => r.f,
            Metric::Htot => r.htot,
            Metric::Jtot => r.jtot,
        }
    }
}

/// Median and empirical 95% band of one metric at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub median: f64,
    pub lo95: f64,
    pub hi95: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateRow {
    pub eval: usize,
    pub f: Band,
    pub htot: Band,
    pub jtot: Band,
}

impl AggregateRow {
    pub fn band(&self, m: Metric) -> Band {
        match m {
            Metric::F => self.f,
            Metric::Htot => self.htot,
            Metric::Jtot => self.jtot,
        }
    }
}

/// Evaluation counts `1..=budget`.
pub fn default_grid(budget: usize) -> Vec<usize> {
    (1..=budget).collect()
}

/// Linear-interpolated empirical quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn band(mut values: Vec<f64>) -> Band {
    values.sort_by(f64::total_cmp);
    Band {
        median: quantile(&values, 0.5),
        lo95: quantile(&values, 0.025),
        hi95: quantile(&values, 0.975),
    }
}

/// Record in force at `eval`: the last one at or before it, else the first
/// (the run's post-initialization state).
fn step_at(trace: &ConvergenceTrace, eval: usize) -> &TraceRecord {
    let r = trace.records();
    let k = r.partition_point(|t| t.eval <= eval);
    &r[k.saturating_sub(1)]
}

/// Step-interpolates every trace onto `grid` and summarizes each metric
/// across runs.
pub fn aggregate(traces: &[ConvergenceTrace], grid: &[usize]) -> Result<Vec<AggregateRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("aggregation grid is empty".into()));
    }
    if traces.is_empty() {
        return Err(Error::InvalidConfig("no traces to aggregate".into()));
    }
    if traces.iter().any(|t| t.is_empty()) {
        return Err(Error::InvalidConfig(
            "cannot aggregate an empty trace".into(),
        ));
    }
    Ok(grid
        .iter()
        .map(|&eval| {
            let at: Vec<&TraceRecord> = traces.iter().map(|t| step_at(t, eval)).collect();
            let b = |m: Metric| band(at.iter().map(|r| m.of(r)).collect());
            AggregateRow {
                eval,
                f: b(Metric::F),
                htot: b(Metric::Htot),
                jtot: b(Metric::Jtot),
            }
        })
        .collect())
}

/// Aggregates every run group found in `in_dir` into `out_dir/<group>_agg.csv`.
///
/// The grid runs up to the largest `budget` recorded in the groups' sidecars,
/// or the last trace count when no sidecar is present.
pub fn aggregate_dir(in_dir: &Path, out_dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let groups = list_runs(in_dir)?;
    if groups.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no run traces found in {}",
            in_dir.display()
        )));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for (group, files) in groups {
        let traces = files
            .iter()
            .map(|p| read_trace(p))
            .collect::<Result<Vec<_>>>()?;
        let mut end = traces
            .iter()
            .filter_map(|t| t.last().map(|r| r.eval))
            .max()
            .unwrap_or(1);
        for p in &files {
            let meta = p.with_extension("meta");
            if meta.exists() {
                if let Some((_, b)) = read_meta(&meta)?.into_iter().find(|(k, _)| k == "budget") {
                    let b: usize = b
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad budget in {}", meta.display())))?;
                    end = end.max(b);
                }
            }
        }
        let rows = aggregate(&traces, &default_grid(end))?;
        let path = out_dir.join(format!("{group}_agg.csv"));
        write_aggregate(&path, &rows)?;
        written.push((group, path));
    }
    Ok(written)
}
