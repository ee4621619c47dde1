//! End-to-end estimation with BN-RAS and straight simulation, and scoring
//! against exact posteriors.
//!
//! BN-RAS trials are split into fixed blocks of [`TRIAL_BLOCK`] trials; block
//! `b` draws from `RandomStream::derive(seed, b)`. Results therefore depend
//! only on (network, evidence, trials, t, seed), whether blocks run serially
//! or on a thread pool.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gibbs::{ChainState, RandomStream};
use crate::network::{BeliefNetwork, Evidence, JointState};
use crate::oracle::PosteriorTable;
use crate::timing::Stopwatch;

pub const TRIAL_BLOCK: u64 = 1024;

/// Outcome counts for every free node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tally {
    pub free: Vec<usize>,
    pub counts: Vec<Vec<u64>>,
    pub scored: u64,
}

impl Tally {
    pub fn new(net: &BeliefNetwork, free: &[usize]) -> Self {
        Tally {
            free: free.to_vec(),
            counts: free.iter().map(|&n| vec![0; net.arity(n)]).collect(),
            scored: 0,
        }
    }

    #[inline]
    pub fn score(&mut self, state: &JointState) {
        for (k, &n) in self.free.iter().enumerate() {
            self.counts[k][state.get(n)] += 1;
        }
        self.scored += 1;
    }

    pub fn merge(&mut self, other: &Tally) {
        for (mine, theirs) in self.counts.iter_mut().zip(&other.counts) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                *a += b;
            }
        }
        self.scored += other.scored;
    }

    /// tally / scored per node; all zeros before anything is scored.
    pub fn frequencies(&self) -> Vec<Vec<f64>> {
        let n = self.scored.max(1) as f64;
        self.counts
            .iter()
            .map(|row| row.iter().map(|&c| c as f64 / n).collect())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorEstimate {
    pub free: Vec<usize>,
    pub tallies: Vec<Vec<u64>>,
    /// `probabilities[k][v]` estimates P(free[k] = v | e).
    pub probabilities: Vec<Vec<f64>>,
    /// Number of scored samples (trials for BN-RAS, transitions for straight simulation).
    pub trials: u64,
    pub transitions_per_trial: u64,
    pub total_transitions: u64,
    pub cpu_seconds: f64,
    pub wall_seconds: f64,
}

impl PosteriorEstimate {
    fn from_tally(tally: Tally, transitions_per_trial: u64, total_transitions: u64, times: (f64, f64)) -> Self {
        PosteriorEstimate {
            probabilities: tally.frequencies(),
            free: tally.free,
            tallies: tally.counts,
            trials: tally.scored,
            transitions_per_trial,
            total_transitions,
            cpu_seconds: times.0,
            wall_seconds: times.1,
        }
    }

    pub fn probability(&self, node: usize, value: usize) -> Option<f64> {
        self.free.iter().position(|&n| n == node).map(|k| self.probabilities[k][value])
    }

    /// Equality of everything except the timing fields.
    pub fn same_result(&self, other: &PosteriorEstimate) -> bool {
        self.free == other.free
            && self.tallies == other.tallies
            && self.trials == other.trials
            && self.transitions_per_trial == other.transitions_per_trial
            && self.total_transitions == other.total_transitions
    }
}

#[allow(clippy::too_many_arguments)]
fn run_block(
    net: &BeliefNetwork,
    ev: &Evidence,
    seed: u64,
    block: u64,
    count: u64,
    transitions: u64,
    tally: &mut Tally,
    mut after_trial: impl FnMut(&Tally),
) -> Result<()> {
    let mut rng = RandomStream::derive(seed, block);
    let mut cs = ChainState::new(net, ev);
    for _ in 0..count {
        cs.randomize(net, &mut rng);
        for _ in 0..transitions {
            cs.lazy_step(net, &mut rng)?;
        }
        tally.score(&cs.state);
        after_trial(tally);
    }
    Ok(())
}

fn blocks(trials: u64) -> impl Iterator<Item = (u64, u64)> {
    let n = trials.div_ceil(TRIAL_BLOCK);
    (0..n).map(move |b| (b, TRIAL_BLOCK.min(trials - b * TRIAL_BLOCK)))
}

fn check_bnras_args(net: &BeliefNetwork, ev: &Evidence, trials: u64) -> Result<Vec<usize>> {
    if trials == 0 {
        return Err(Error::Usage("number of trials must be at least 1".into()));
    }
    let free = net.free_nodes(ev);
    if free.is_empty() {
        return Err(Error::NoFreeNodes);
    }
    Ok(free)
}

/// BN-RAS: `trials` independent restarts, each followed by `transitions` lazy
/// transitions, scoring every free node once per trial.
pub fn bnras_estimate(
    net: &BeliefNetwork,
    ev: &Evidence,
    trials: u64,
    transitions: u64,
    seed: u64,
) -> Result<PosteriorEstimate> {
    bnras_run(net, ev, trials, transitions, seed, 0, |_, _| {})
}

/// [`bnras_estimate`] with blocks spread over the rayon pool. Identical tallies.
pub fn bnras_estimate_par(
    net: &BeliefNetwork,
    ev: &Evidence,
    trials: u64,
    transitions: u64,
    seed: u64,
) -> Result<PosteriorEstimate> {
    let free = check_bnras_args(net, ev, trials)?;
    let sw = Stopwatch::process();
    let parts: Vec<Tally> = blocks(trials)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(b, count)| {
            let mut tally = Tally::new(net, &free);
            run_block(net, ev, seed, b, count, transitions, &mut tally, |_| {})?;
            Ok(tally)
        })
        .collect::<Result<_>>()?;
    let mut total = Tally::new(net, &free);
    for part in &parts {
        total.merge(part);
    }
    Ok(PosteriorEstimate::from_tally(total, transitions, trials * transitions, sw.elapsed()))
}

/// Serial BN-RAS that reports the running tally to `observer` every time the
/// consumed work crosses a multiple of `stride` (0 disables checkpoints).
/// Work per trial is `transitions`, or 1 when `transitions` is 0.
pub fn bnras_run(
    net: &BeliefNetwork,
    ev: &Evidence,
    trials: u64,
    transitions: u64,
    seed: u64,
    stride: u64,
    mut observer: impl FnMut(u64, &Tally),
) -> Result<PosteriorEstimate> {
    let free = check_bnras_args(net, ev, trials)?;
    let sw = Stopwatch::thread();
    let work = transitions.max(1);
    let mut tally = Tally::new(net, &free);
    for (b, count) in blocks(trials) {
        run_block(net, ev, seed, b, count, transitions, &mut tally, |t| {
            let done = t.scored * work;
            if let (Some(now), Some(before)) = (done.checked_div(stride), (done - work).checked_div(stride)) {
                if now > before {
                    observer(done, t);
                }
            }
        })?;
    }
    Ok(PosteriorEstimate::from_tally(tally, transitions, trials * transitions, sw.elapsed()))
}

/// Straight simulation: one random start, then `total_transitions` cyclic
/// transitions, scoring the state after every one.
pub fn straight_estimate(
    net: &BeliefNetwork,
    ev: &Evidence,
    total_transitions: u64,
    seed: u64,
) -> Result<PosteriorEstimate> {
    straight_run(net, ev, total_transitions, seed, 0, 0, |_, _| {})
}

/// Straight simulation with an unscored burn-in and running checkpoints every
/// `stride` scored transitions (0 disables checkpoints).
pub fn straight_run(
    net: &BeliefNetwork,
    ev: &Evidence,
    total_transitions: u64,
    seed: u64,
    burn_in: u64,
    stride: u64,
    mut observer: impl FnMut(u64, &Tally),
) -> Result<PosteriorEstimate> {
    if total_transitions == 0 {
        return Err(Error::Usage("total transitions must be at least 1".into()));
    }
    let free = net.free_nodes(ev);
    if free.is_empty() {
        return Err(Error::NoFreeNodes);
    }
    let sw = Stopwatch::thread();
    let mut rng = RandomStream::new(seed);
    let mut cs = ChainState::new(net, ev);
    cs.randomize(net, &mut rng);
    for _ in 0..burn_in {
        cs.cyclic_step(net, &mut rng)?;
    }
    let mut tally = Tally::new(net, &free);
    for step in 1..=total_transitions {
        cs.cyclic_step(net, &mut rng)?;
        tally.score(&cs.state);
        if stride > 0 && step % stride == 0 {
            observer(step, &tally);
        }
    }
    Ok(PosteriorEstimate::from_tally(tally, 1, burn_in + total_transitions, sw.elapsed()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    /// Mean |estimate − exact| over free (node, outcome) pairs.
    pub avg_error: f64,
    pub max_error: f64,
    pub worst_node: usize,
}

/// Scores per-node probability rows against the exact table.
pub fn score_frequencies(free: &[usize], probabilities: &[Vec<f64>], oracle: &PosteriorTable) -> Result<ErrorReport> {
    if free != oracle.free.as_slice() {
        return Err(Error::ShapeMismatch(format!(
            "estimate covers nodes {free:?}, oracle covers {:?}",
            oracle.free
        )));
    }
    let (mut sum, mut count, mut max, mut worst) = (0.0, 0usize, 0.0, free.first().copied().unwrap_or(0));
    for (k, (est, exact)) in probabilities.iter().zip(&oracle.marginals).enumerate() {
        if est.len() != exact.len() {
            return Err(Error::ShapeMismatch(format!("node #{} outcome counts differ", free[k])));
        }
        for (a, b) in est.iter().zip(exact) {
            let d = (a - b).abs();
            sum += d;
            count += 1;
            if d > max {
                max = d;
                worst = free[k];
            }
        }
    }
    Ok(ErrorReport { avg_error: if count > 0 { sum / count as f64 } else { 0.0 }, max_error: max, worst_node: worst })
}

pub fn error_metrics(est: &PosteriorEstimate, oracle: &PosteriorTable) -> Result<ErrorReport> {
    score_frequencies(&est.free, &est.probabilities, oracle)
}

/// Free nodes having outcome `label`, by descending estimated probability of
/// it; ties keep declaration order.
pub fn rank_outcomes(est: &PosteriorEstimate, net: &BeliefNetwork, label: &str) -> Vec<usize> {
    let mut scored: Vec<(usize, f64)> = est
        .free
        .iter()
        .enumerate()
        .filter_map(|(k, &n)| net.node(n).outcome_index(label).map(|v| (n, est.probabilities[k][v])))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    scored.into_iter().map(|(n, _)| n).collect()
}

/// Whether `est` lies in [p/(1+γ) − α, (1+γ)p + α].
pub fn check_interval(true_p: f64, est: f64, gamma: f64, alpha: f64) -> bool {
    let lower = true_p / (1.0 + gamma) - alpha;
    let upper = (1.0 + gamma) * true_p + alpha;
    lower <= est && est <= upper
}
