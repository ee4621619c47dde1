//! Exact answers by brute-force enumeration of the free-node state space.
//!
//! States are enumerated in mixed radix over the free nodes, first free node
//! most significant. Every sum runs sequentially in that order, so results are
//! reproducible bit for bit.
//!
//! The transition matrix computes each full conditional as a ratio of joint
//! probabilities rather than through the Markov blanket, so it stays an
//! independent check on the sampler in [`crate::gibbs`].

use crate::error::{Error, Result};
use crate::network::{BeliefNetwork, Evidence, JointState};

pub const DEFAULT_ENUM_CAP: u64 = 1 << 22;
pub const DEFAULT_MATRIX_CAP: u64 = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleConfig {
    pub enum_cap: u64,
    pub matrix_cap: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { enum_cap: DEFAULT_ENUM_CAP, matrix_cap: DEFAULT_MATRIX_CAP }
    }
}

/// Enumeration of free-node assignments consistent with some evidence.
struct StateSpace {
    free: Vec<usize>,
    arities: Vec<usize>,
    /// Mixed-radix weight of each free node.
    strides: Vec<usize>,
    size: usize,
    base: JointState,
}

impl StateSpace {
    fn new(net: &BeliefNetwork, ev: &Evidence, cap: u64, what: &'static str) -> Result<Self> {
        let free = net.free_nodes(ev);
        let arities: Vec<usize> = free.iter().map(|&i| net.arity(i)).collect();
        let count: u128 = arities.iter().map(|&k| k as u128).product();
        if count > cap as u128 {
            return Err(Error::CapExceeded { what, count, cap });
        }
        let mut strides = vec![0; free.len()];
        let mut acc = 1;
        for k in (0..free.len()).rev() {
            strides[k] = acc;
            acc *= arities[k];
        }
        Ok(StateSpace { free, arities, strides, size: count as usize, base: JointState::clamped(net, ev) })
    }

    fn decode_into(&self, index: usize, state: &mut JointState) {
        for (k, &node) in self.free.iter().enumerate() {
            state.set(node, (index / self.strides[k]) % self.arities[k]);
        }
    }

    fn state(&self, index: usize) -> JointState {
        let mut s = self.base.clone();
        self.decode_into(index, &mut s);
        s
    }

    /// Unnormalized weights of every state, in enumeration order.
    fn weights(&self, net: &BeliefNetwork) -> Vec<f64> {
        let mut s = self.base.clone();
        (0..self.size)
            .map(|idx| {
                self.decode_into(idx, &mut s);
                net.joint_probability(&s)
            })
            .collect()
    }
}

/// Exact posterior marginals of the free nodes, plus P(e).
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorTable {
    pub free: Vec<usize>,
    /// `marginals[k][v]` = P(free[k] = v | e).
    pub marginals: Vec<Vec<f64>>,
    pub evidence_probability: f64,
}

impl PosteriorTable {
    pub fn marginal(&self, node: usize) -> Option<&[f64]> {
        self.free.iter().position(|&n| n == node).map(|k| self.marginals[k].as_slice())
    }
}

fn normalized_weights(net: &BeliefNetwork, space: &StateSpace) -> Result<(Vec<f64>, f64)> {
    let w = space.weights(net);
    let z: f64 = w.iter().sum();
    if z <= 0.0 {
        return Err(Error::ImpossibleEvidence);
    }
    Ok((w.into_iter().map(|x| x / z).collect(), z))
}

fn marginals_of(net: &BeliefNetwork, space: &StateSpace, posterior: &[f64]) -> Vec<Vec<f64>> {
    let mut marginals: Vec<Vec<f64>> = space.free.iter().map(|&n| vec![0.0; net.arity(n)]).collect();
    for (idx, &p) in posterior.iter().enumerate() {
        for k in 0..space.free.len() {
            marginals[k][(idx / space.strides[k]) % space.arities[k]] += p;
        }
    }
    marginals
}

pub fn enumerate_posteriors_with(net: &BeliefNetwork, ev: &Evidence, cfg: &OracleConfig) -> Result<PosteriorTable> {
    let space = StateSpace::new(net, ev, cfg.enum_cap, "enumeration")?;
    let (posterior, z) = normalized_weights(net, &space)?;
    Ok(PosteriorTable {
        marginals: marginals_of(net, &space, &posterior),
        free: space.free,
        evidence_probability: z,
    })
}

pub fn enumerate_posteriors(net: &BeliefNetwork, ev: &Evidence) -> Result<PosteriorTable> {
    enumerate_posteriors_with(net, ev, &OracleConfig::default())
}

/// Π: the smallest posterior probability of any free-node joint state.
pub fn min_joint_posterior_with(net: &BeliefNetwork, ev: &Evidence, cfg: &OracleConfig) -> Result<f64> {
    let space = StateSpace::new(net, ev, cfg.enum_cap, "enumeration")?;
    let (posterior, _) = normalized_weights(net, &space)?;
    Ok(posterior.into_iter().fold(f64::INFINITY, f64::min))
}

pub fn min_joint_posterior(net: &BeliefNetwork, ev: &Evidence) -> Result<f64> {
    min_joint_posterior_with(net, ev, &OracleConfig::default())
}

/// Explicit one-step matrix of the lazy random-scan Gibbs chain.
#[derive(Clone, Debug)]
pub struct TransitionMatrix {
    pub free: Vec<usize>,
    pub states: Vec<JointState>,
    /// Row-major M x M.
    pub entries: Vec<f64>,
    pub stationary: Vec<f64>,
}

impl TransitionMatrix {
    pub fn size(&self) -> usize {
        self.states.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.size();
        &self.entries[i * m..(i + 1) * m]
    }

    pub fn index_of(&self, state: &JointState) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }

    /// max_j |(π P)_j − π_j|.
    pub fn stationarity_residual(&self) -> f64 {
        let m = self.size();
        (0..m)
            .map(|j| {
                let flow: f64 = (0..m).map(|i| self.stationary[i] * self.get(i, j)).sum();
                (flow - self.stationary[j]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// max_{i,j} |π_i P_ij − π_j P_ji|.
    pub fn detailed_balance_residual(&self) -> f64 {
        let m = self.size();
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in (i + 1)..m {
                let d = self.stationary[i] * self.get(i, j) - self.stationary[j] * self.get(j, i);
                worst = worst.max(d.abs());
            }
        }
        worst
    }
}

/// Full conditional of `node` as a ratio of joints over its values.
fn joint_ratio_conditional(net: &BeliefNetwork, state: &JointState, node: usize) -> Vec<f64> {
    let mut s = state.clone();
    let w: Vec<f64> = (0..net.arity(node))
        .map(|v| {
            s.set(node, v);
            net.joint_probability(&s)
        })
        .collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

pub fn build_transition_matrix_with(
    net: &BeliefNetwork,
    ev: &Evidence,
    cfg: &OracleConfig,
) -> Result<TransitionMatrix> {
    let space = StateSpace::new(net, ev, cfg.matrix_cap, "transition matrix")?;
    if space.free.is_empty() {
        return Err(Error::NoFreeNodes);
    }
    let (stationary, _) = normalized_weights(net, &space)?;
    let m = space.size;
    let n = space.free.len();
    let select = 1.0 / (2.0 * n as f64);
    let mut entries = vec![0.0; m * m];
    let states: Vec<JointState> = (0..m).map(|i| space.state(i)).collect();

    for (i, s) in states.iter().enumerate() {
        let mut stay = 0.0;
        for (k, &node) in space.free.iter().enumerate() {
            let q = joint_ratio_conditional(net, s, node);
            let cur = s.get(node);
            for (v, &qv) in q.iter().enumerate() {
                if v == cur {
                    stay += qv;
                } else {
                    let j = (i as isize + (v as isize - cur as isize) * space.strides[k] as isize) as usize;
                    entries[i * m + j] = select * qv;
                }
            }
        }
        entries[i * m + i] = 0.5 + select * stay;
    }

    Ok(TransitionMatrix { free: space.free, states, entries, stationary })
}

pub fn build_transition_matrix(net: &BeliefNetwork, ev: &Evidence) -> Result<TransitionMatrix> {
    build_transition_matrix_with(net, ev, &OracleConfig::default())
}

/// p₀: the smallest strictly positive off-diagonal one-step probability.
pub fn min_transition_probability(tm: &TransitionMatrix) -> f64 {
    let m = tm.size();
    let mut p0 = f64::INFINITY;
    for i in 0..m {
        for j in 0..m {
            let p = tm.get(i, j);
            if i != j && p > 0.0 {
                p0 = p0.min(p);
            }
        }
    }
    p0
}

fn mat_mul(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * m];
    for i in 0..m {
        let row = &mut c[i * m..(i + 1) * m];
        for k in 0..m {
            let aik = a[i * m + k];
            if aik == 0.0 {
                continue;
            }
            for (cij, bkj) in row.iter_mut().zip(&b[k * m..(k + 1) * m]) {
                *cij += aik * bkj;
            }
        }
    }
    c
}

/// P^t by repeated squaring.
pub fn matrix_power(tm: &TransitionMatrix, t: u64) -> Vec<f64> {
    let m = tm.size();
    let mut result: Vec<f64> = (0..m * m).map(|x| if x / m == x % m { 1.0 } else { 0.0 }).collect();
    let mut base = tm.entries.clone();
    let mut e = t;
    while e > 0 {
        if e & 1 == 1 {
            result = mat_mul(&result, &base, m);
        }
        e >>= 1;
        if e > 0 {
            base = mat_mul(&base, &base, m);
        }
    }
    result
}

fn rpd_of(power: &[f64], pi: &[f64]) -> f64 {
    let m = pi.len();
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            worst = worst.max((power[i * m + j] - pi[j]).abs() / pi[j]);
        }
    }
    worst
}

/// Δ(t) = max_{i,j} |P^t_ij − π_j| / π_j.
pub fn relative_pointwise_distance(tm: &TransitionMatrix, t: u64) -> f64 {
    rpd_of(&matrix_power(tm, t), &tm.stationary)
}

/// Δ(t) for t = 0, 1, ..., max_t by successive multiplication.
pub fn rpd_curve(tm: &TransitionMatrix, max_t: u64) -> Vec<f64> {
    let m = tm.size();
    let mut power: Vec<f64> = (0..m * m).map(|x| if x / m == x % m { 1.0 } else { 0.0 }).collect();
    let mut out = vec![rpd_of(&power, &tm.stationary)];
    for _ in 0..max_t {
        power = mat_mul(&power, &tm.entries, m);
        out.push(rpd_of(&power, &tm.stationary));
    }
    out
}

/// Π, p₀ and Δ(t) at requested t values, all exact.
#[derive(Clone, Debug, PartialEq)]
pub struct MixingReport {
    pub pi_min: f64,
    pub p0: f64,
    pub delta_t: Vec<(u64, f64)>,
}

pub fn mixing_report(net: &BeliefNetwork, ev: &Evidence, ts: &[u64], cfg: &OracleConfig) -> Result<MixingReport> {
    let tm = build_transition_matrix_with(net, ev, cfg)?;
    Ok(MixingReport {
        pi_min: tm.stationary.iter().copied().fold(f64::INFINITY, f64::min),
        p0: min_transition_probability(&tm),
        delta_t: ts.iter().map(|&t| (t, relative_pointwise_distance(&tm, t))).collect(),
    })
}
