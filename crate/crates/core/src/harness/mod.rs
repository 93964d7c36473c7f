//! Experiment driver: repeated seeded runs, raw trace files, aggregation and
//! plots.
//!
//! Every run writes `<group>_runNN.csv` (`eval,f,htot,jtot`, one row per
//! accepted-best update) plus a `key=value` sidecar `<group>_runNN.meta`.
//! The group is the solver id, suffixed with `_doeM` for BACO.

mod aggregate;
mod plot;
mod trace_io;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub use aggregate::{aggregate, aggregate_dir, default_grid, AggregateRow, Band, Metric};
pub use plot::{emit_plots, read_aggregate_dir, PlotScale};
pub use trace_io::{
    read_aggregate, read_meta, read_trace, write_aggregate, write_meta, write_trace,
};

use crate::baco::{solve_baco, BacoConfig};
use crate::co_variants::{random_start, solve_bilevel, BilevelConfig, CoVariant};
use crate::error::{Error, Result};
use crate::scalable::{make_problem, ScalableSpec};
use crate::trace::SolverRun;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverId {
    Co,
    Mco,
    Ico,
    Baco,
}

impl SolverId {
    pub const ALL: [SolverId; 4] = [SolverId::Co, SolverId::Mco, SolverId::Ico, SolverId::Baco];

    pub fn as_str(self) -> &'static str {
        match self {
            SolverId::Co => "co",
            SolverId::Mco => "mco",
            SolverId::Ico => "ico",
            SolverId::Baco => "baco",
        }
    }
}

impl fmt::Display for SolverId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverId::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::UnknownId {
                kind: "solver",
                id: s.to_string(),
            })
    }
}

/// Registered benchmark problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemId {
    /// Two-discipline scalable problem on the default seed-42 coefficients.
    Scalable,
}

impl ProblemId {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemId::Scalable => "scalable",
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scalable" => Ok(ProblemId::Scalable),
            _ => Err(Error::UnknownId {
                kind: "problem",
                id: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemId,
    pub solver: SolverId,
    pub budget: usize,
    pub runs: usize,
    /// Ignored by the bi-level solvers.
    pub doe_multipliers: Vec<usize>,
    pub eps: f64,
    pub base_seed: u64,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(problem: ProblemId, solver: SolverId, out_dir: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            problem,
            solver,
            budget: 300,
            runs: 10,
            doe_multipliers: vec![1, 2, 3, 4, 5],
            eps: 1e-3,
            base_seed: 0,
            out_dir: out_dir.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidConfig("runs must be at least 1".into()));
        }
        if self.budget == 0 {
            return Err(Error::InvalidConfig("budget must be at least 1".into()));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::InvalidConfig("eps must be non-negative".into()));
        }
        if self.solver == SolverId::Baco
            && (self.doe_multipliers.is_empty() || self.doe_multipliers.contains(&0))
        {
            return Err(Error::InvalidConfig(
                "BACO needs at least one DoE multiplier, each >= 1".into(),
            ));
        }
        Ok(())
    }

    /// `(group, doe multiplier)` for every series this config produces.
    pub fn groups(&self) -> Vec<(String, Option<usize>)> {
        match self.solver {
            SolverId::Baco => self
                .doe_multipliers
                .iter()
                .map(|&m| (format!("baco_doe{m}"), Some(m)))
                .collect(),
            s => vec![(s.to_string(), None)],
        }
    }
}

/// File stem of run `run` within `group`.
pub fn run_stem(group: &str, run: usize) -> String {
    format!("{group}_run{run:02}")
}

/// One run of an experiment.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub group: String,
    pub doe_multiplier: Option<usize>,
    pub run: usize,
    pub seed: u64,
    pub result: Result<SolverRun>,
    /// Trace CSV (successful runs) or error note (failed runs).
    pub path: PathBuf,
}

/// Runs one solve with a fresh ledger and fresh datasets.
pub fn run_single(
    problem: ProblemId,
    solver: SolverId,
    budget: usize,
    eps: f64,
    doe_multiplier: Option<usize>,
    seed: u64,
) -> Result<SolverRun> {
    let p = match problem {
        ProblemId::Scalable => make_problem(&ScalableSpec::default())?,
    };
    let variant = match solver {
        SolverId::Co => CoVariant::Co,
        SolverId::Mco => CoVariant::Mco,
        SolverId::Ico => CoVariant::Ico,
        SolverId::Baco => {
            let config = BacoConfig {
                total_budget: budget,
                doe_multiplier: doe_multiplier.unwrap_or(1),
                eps,
                seed,
                ..BacoConfig::default()
            };
            return solve_baco(&p, &config);
        }
    };
    let config = BilevelConfig {
        total_budget: budget,
        eps_j: eps,
        eps_h: eps,
        seed,
        ..BilevelConfig::default()
    };
    let start = random_start(&p, seed)?;
    Ok(solve_bilevel(&p, &config, &start, variant)?.run)
}

/// Runs `config.runs` seeds (`base_seed + run`) for every group and writes
/// the raw traces. A failed run leaves a `.err` note and does not stop the
/// others.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunOutput>> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir)?;
    let mut outputs = Vec::new();
    for (group, doe) in config.groups() {
        for run in 0..config.runs {
            let seed = config.base_seed.wrapping_add(run as u64);
            let result = run_single(
                config.problem,
                config.solver,
                config.budget,
                config.eps,
                doe,
                seed,
            );
            let stem = run_stem(&group, run);
            let path = match &result {
                Ok(r) => {
                    let csv = config.out_dir.join(format!("{stem}.csv"));
                    write_trace(&csv, &r.trace)?;
                    write_meta(
                        &config.out_dir.join(format!("{stem}.meta")),
                        &run_meta(config, doe, run, seed, r),
                    )?;
                    csv
                }
                Err(e) => {
                    log::error!("{stem}: {e}");
                    let note = config.out_dir.join(format!("{stem}.err"));
                    std::fs::write(&note, format!("{e}\n"))?;
                    note
                }
            };
            outputs.push(RunOutput {
                group: group.clone(),
                doe_multiplier: doe,
                run,
                seed,
                result,
                path,
            });
        }
    }
    Ok(outputs)
}

fn run_meta(
    config: &ExperimentConfig,
    doe: Option<usize>,
    run: usize,
    seed: u64,
    r: &SolverRun,
) -> Vec<(String, String)> {
    let mut m: Vec<(String, String)> = vec![
        ("problem".into(), config.problem.to_string()),
        ("solver".into(), config.solver.to_string()),
        ("budget".into(), config.budget.to_string()),
        ("eps".into(), config.eps.to_string()),
        ("run".into(), run.to_string()),
        ("seed".into(), seed.to_string()),
    ];
    if let Some(d) = doe {
        m.push(("doe_multiplier".into(), d.to_string()));
    }
    if config.problem == ProblemId::Scalable {
        let s = ScalableSpec::default();
        m.push(("n_disciplines".into(), s.n_disciplines.to_string()));
        m.push(("coeff_seed".into(), s.coeff_seed.to_string()));
    }
    m.extend([
        ("evals_used".into(), r.evals_used.to_string()),
        ("setup_evals".into(), r.setup_evals.to_string()),
        ("iterations".into(), r.iterations.to_string()),
        ("f_best".into(), r.best.f.to_string()),
        ("htot_best".into(), r.best.htot.to_string()),
        ("jtot_best".into(), r.best.jtot.to_string()),
    ]);
    m
}

/// Run stems (`<group>_runNN`) of every trace CSV in `dir`, grouped and sorted.
pub fn list_runs(dir: &Path) -> Result<Vec<(String, Vec<PathBuf>)>> {
    let mut groups: std::collections::BTreeMap<String, Vec<PathBuf>> = Default::default();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(stem) = path
            .file_name()
            .and_then(|s| s.to_str())
            .and_then(|n| n.strip_suffix(".csv"))
        else {
            continue;
        };
        let Some((group, run)) = stem.rsplit_once("_run") else {
            continue;
        };
        if !run.is_empty() && run.bytes().all(|b| b.is_ascii_digit()) {
            groups.entry(group.to_string()).or_default().push(path);
        }
    }
    Ok(groups
        .into_iter()
        .map(|(g, mut v)| {
            v.sort();
            (g, v)
        })
        .collect())
}
