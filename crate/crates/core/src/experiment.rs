//! Experiment grids and their flat CSV output.
//!
//! Every row echoes network, evidence, algorithm, N, t and seed, so any row
//! can be rerun on its own. Rows come out in grid order no matter how cells
//! are scheduled; only the timing columns vary between runs.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{bnras_run, error_metrics, score_frequencies, straight_run, ErrorReport, PosteriorEstimate};
use crate::network::{BeliefNetwork, Evidence};
use crate::oracle::PosteriorTable;

pub const CSV_HEADER: &str = "run_id,seed,algorithm,network,evidence,trials,transitions_per_trial,\
total_transitions,checkpoint,avg_error,max_error,worst_node,cpu_seconds,wall_seconds";

pub const DEFAULT_STRIDE: u64 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Bnras,
    Straight,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Bnras => "bnras",
            Algorithm::Straight => "straight",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bnras" => Ok(Algorithm::Bnras),
            "straight" => Ok(Algorithm::Straight),
            other => Err(Error::Usage(format!("unknown algorithm '{other}' (expected bnras or straight)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub run_id: u64,
    pub seed: u64,
    pub algorithm: String,
    pub network: String,
    pub evidence: String,
    pub trials: u64,
    pub transitions_per_trial: u64,
    pub total_transitions: u64,
    /// Empty for summary rows.
    pub checkpoint: Option<u64>,
    pub avg_error: f64,
    pub max_error: f64,
    pub worst_node: String,
    pub cpu_seconds: f64,
    pub wall_seconds: f64,
}

impl ResultRow {
    pub fn is_summary(&self) -> bool {
        self.checkpoint.is_none()
    }
}

/// A network, its evidence, and the exact answer everything is scored against.
pub struct Problem {
    pub net: BeliefNetwork,
    pub evidence: Evidence,
    pub oracle: PosteriorTable,
    /// Builtin name or file path, echoed into rows.
    pub network_label: String,
    pub evidence_label: String,
}

impl Problem {
    pub fn new(
        net: BeliefNetwork,
        evidence: Evidence,
        oracle: PosteriorTable,
        network_label: impl Into<String>,
    ) -> Self {
        let evidence_label = evidence.describe(&net);
        Problem { net, evidence, oracle, network_label: network_label.into(), evidence_label }
    }
}

/// One grid point of one seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cell {
    pub algorithm: Algorithm,
    /// BN-RAS trials; ignored for straight simulation.
    pub trials: u64,
    /// BN-RAS transitions per trial; ignored for straight simulation.
    pub transitions: u64,
    /// Straight-simulation scored transitions; ignored for BN-RAS.
    pub total: u64,
    pub seed: u64,
}

/// Runs one cell, returning its checkpoint rows followed by its summary row.
pub fn run_cell(problem: &Problem, cell: &Cell, run_id: u64, stride: u64, burn_in: u64) -> Result<Vec<ResultRow>> {
    let mut checkpoints: Vec<(u64, ErrorReport)> = Vec::new();
    let mut failure = None;
    let mut observe = |at: u64, tally: &crate::estimators::Tally| {
        match score_frequencies(&tally.free, &tally.frequencies(), &problem.oracle) {
            Ok(r) => checkpoints.push((at, r)),
            Err(e) => failure = Some(e),
        }
    };
    let est: PosteriorEstimate = match cell.algorithm {
        Algorithm::Bnras => bnras_run(
            &problem.net,
            &problem.evidence,
            cell.trials,
            cell.transitions,
            cell.seed,
            stride,
            &mut observe,
        )?,
        Algorithm::Straight => straight_run(
            &problem.net,
            &problem.evidence,
            cell.total,
            cell.seed,
            burn_in,
            stride,
            &mut observe,
        )?,
    };
    if let Some(e) = failure {
        return Err(e);
    }
    let summary = error_metrics(&est, &problem.oracle)?;

    let row = |checkpoint: Option<u64>, r: &ErrorReport, cpu: f64, wall: f64| ResultRow {
        run_id,
        seed: cell.seed,
        algorithm: cell.algorithm.to_string(),
        network: problem.network_label.clone(),
        evidence: problem.evidence_label.clone(),
        trials: est.trials,
        transitions_per_trial: est.transitions_per_trial,
        total_transitions: est.total_transitions,
        checkpoint,
        avg_error: r.avg_error,
        max_error: r.max_error,
        worst_node: problem.net.node(r.worst_node).name.clone(),
        cpu_seconds: cpu,
        wall_seconds: wall,
    };
    let mut rows: Vec<ResultRow> = checkpoints.iter().map(|(at, r)| row(Some(*at), r, 0.0, 0.0)).collect();
    rows.push(row(None, &summary, est.cpu_seconds, est.wall_seconds));
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepSpec {
    pub algorithm: Algorithm,
    /// BN-RAS grid over N.
    pub trials: Vec<u64>,
    /// BN-RAS grid over t.
    pub transitions: Vec<u64>,
    /// Straight-simulation grid over total transitions.
    pub totals: Vec<u64>,
    pub seeds: Vec<u64>,
    /// Running-error checkpoint stride in transitions; 0 emits summary rows only.
    pub stride: u64,
    pub burn_in: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Usage("seed list is empty".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::Usage("seeds must be distinct".into()));
        }
        match self.algorithm {
            Algorithm::Bnras => {
                if self.trials.is_empty() || self.transitions.is_empty() {
                    return Err(Error::Usage("bnras sweeps need non-empty --trials and --transitions grids".into()));
                }
                if self.trials.contains(&0) {
                    return Err(Error::Usage("number of trials must be at least 1".into()));
                }
            }
            Algorithm::Straight => {
                if self.totals.is_empty() {
                    return Err(Error::Usage("straight sweeps need a non-empty --total grid".into()));
                }
                if self.totals.contains(&0) {
                    return Err(Error::Usage("total transitions must be at least 1".into()));
                }
            }
        }
        Ok(())
    }

    /// Grid cells in output order: N, then t (or total), then seed.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        match self.algorithm {
            Algorithm::Bnras => {
                for &trials in &self.trials {
                    for &transitions in &self.transitions {
                        for &seed in &self.seeds {
                            cells.push(Cell { algorithm: Algorithm::Bnras, trials, transitions, total: 0, seed });
                        }
                    }
                }
            }
            Algorithm::Straight => {
                for &total in &self.totals {
                    for &seed in &self.seeds {
                        cells.push(Cell { algorithm: Algorithm::Straight, trials: 0, transitions: 1, total, seed });
                    }
                }
            }
        }
        cells
    }
}

fn run_cells(problem: &Problem, cells: &[Cell], stride: u64, burn_in: u64) -> Result<Vec<ResultRow>> {
    let per_cell: Vec<Vec<ResultRow>> = cells
        .par_iter()
        .enumerate()
        .map(|(i, cell)| run_cell(problem, cell, i as u64, stride, burn_in))
        .collect::<Result<_>>()?;
    Ok(per_cell.into_iter().flatten().collect())
}

pub fn run_sweep(problem: &Problem, spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    run_cells(problem, &spec.cells(), spec.stride, spec.burn_in)
}

/// Straight simulation and BN-RAS at the same total transition budget, per
/// seed: straight with `budget` transitions, BN-RAS with N = budget / t.
pub fn run_compare(
    problem: &Problem,
    budget: u64,
    transitions: u64,
    seeds: &[u64],
    stride: u64,
) -> Result<Vec<ResultRow>> {
    if budget == 0 {
        return Err(Error::Usage("budget must be at least 1".into()));
    }
    if transitions == 0 || budget < transitions {
        return Err(Error::Usage(format!(
            "budget {budget} leaves no complete BN-RAS trial at t = {transitions}"
        )));
    }
    if seeds.is_empty() {
        return Err(Error::Usage("seed list is empty".into()));
    }
    let trials = budget / transitions;
    let cells: Vec<Cell> = seeds
        .iter()
        .flat_map(|&seed| {
            [
                Cell { algorithm: Algorithm::Straight, trials: 0, transitions: 1, total: budget, seed },
                Cell { algorithm: Algorithm::Bnras, trials, transitions, total: 0, seed },
            ]
        })
        .collect();
    run_cells(problem, &cells, stride, 0)
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Ordinary least squares y = a + b x; returns (slope b, intercept a, R²).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}
