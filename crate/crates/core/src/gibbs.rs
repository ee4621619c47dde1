//! Trial generation by Gibbs transitions over the free nodes of a network.
//!
//! Two kernels share the same full conditional:
//!
//! * the lazy kernel ([`do_transition`]): with probability 1/2 hold the state,
//!   otherwise pick a free node uniformly and redraw it. It is aperiodic,
//!   irreducible on positive networks and reversible with respect to the
//!   posterior. Each BN-RAS trial restarts it from a uniform random state.
//! * the cyclic kernel ([`straight_step`]): visit free nodes in declaration
//!   order and redraw each in turn, never restarting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::network::{BeliefNetwork, Evidence, JointState};

/// A source of uniform draws in [0, 1).
pub trait UniformSource {
    fn uniform(&mut self) -> f64;
}

/// Seeded deterministic stream (ChaCha8).
///
/// `RandomStream::new(seed)` seeds ChaCha8 through `seed_from_u64` and uses
/// stream 0. `RandomStream::derive(seed, index)` uses the same key with the
/// ChaCha stream id set to `index + 1`, so derived streams never coincide
/// with each other or with the master stream.
#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        RandomStream { seed, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn derive(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index.wrapping_add(1));
        RandomStream { seed, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl UniformSource for RandomStream {
    fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }
}

/// Maps a uniform draw to an index in `0..k`.
#[inline]
fn uniform_index(u: f64, k: usize) -> usize {
    ((u * k as f64) as usize).min(k - 1)
}

/// Inverse-CDF selection over the cumulative weights in `cumulative`
/// (last entry is the total mass).
#[inline]
fn choose(cumulative: &[f64], u: f64) -> usize {
    let target = u * cumulative[cumulative.len() - 1];
    cumulative
        .iter()
        .position(|&c| target < c)
        .unwrap_or(cumulative.len() - 1)
}

/// Fills `buf` with cumulative unnormalized weights
/// P(node=v | parents) * prod over children c of P(c | parents of c, node=v).
fn cumulative_weights(
    net: &BeliefNetwork,
    state: &JointState,
    node: usize,
    buf: &mut Vec<f64>,
) -> Result<()> {
    let arity = net.arity(node);
    let own_base = net.row_index(node, state) * arity;
    let own = net.table(node);
    let current = state.get(node);

    // Row index of each child with this node's contribution removed.
    let links = net.child_links(node);
    let mut bases: SmallVec<[(usize, usize, usize); 8]> = SmallVec::new();
    for &(c, stride) in links {
        bases.push((c, net.row_index(c, state) - current * stride, stride));
    }

    buf.clear();
    let mut sum = 0.0;
    for v in 0..arity {
        let mut w = own[own_base + v];
        for &(c, base, stride) in bases.iter() {
            let row = base + v * stride;
            w *= net.table(c)[row * net.arity(c) + state.get(c)];
        }
        sum += w;
        buf.push(sum);
    }
    if sum <= 0.0 {
        return Err(Error::DeterministicConflict { node: net.node(node).name.clone() });
    }
    Ok(())
}

/// Distribution of `node` given every other node's value in `state`.
pub fn full_conditional(net: &BeliefNetwork, state: &JointState, node: usize) -> Result<Vec<f64>> {
    let mut buf = Vec::with_capacity(net.arity(node));
    cumulative_weights(net, state, node, &mut buf)?;
    let total = *buf.last().expect("arity >= 2");
    let mut prev = 0.0;
    Ok(buf
        .iter()
        .map(|&c| {
            let p = (c - prev) / total;
            prev = c;
            p
        })
        .collect())
}

/// Markov-chain state: a full assignment with evidence clamped, plus the
/// cyclic cursor used by straight simulation.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub state: JointState,
    pub evidence: Evidence,
    free: Vec<usize>,
    cursor: usize,
    scratch: Vec<f64>,
}

/// What one lazy transition did.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transition {
    Stay,
    Resampled { node: usize, changed: bool },
}

impl ChainState {
    /// Evidence clamped, free nodes at outcome 0, cursor 0.
    pub fn new(net: &BeliefNetwork, ev: &Evidence) -> Self {
        ChainState {
            state: JointState::clamped(net, ev),
            evidence: ev.clone(),
            free: net.free_nodes(ev),
            cursor: 0,
            scratch: Vec::new(),
        }
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// Sets every free node to an independent uniform outcome and resets the cursor.
    pub fn randomize<R: UniformSource>(&mut self, net: &BeliefNetwork, rng: &mut R) {
        for &i in &self.free {
            self.state.set(i, uniform_index(rng.uniform(), net.arity(i)));
        }
        self.cursor = 0;
    }

    fn resample<R: UniformSource>(&mut self, net: &BeliefNetwork, node: usize, rng: &mut R) -> Result<bool> {
        cumulative_weights(net, &self.state, node, &mut self.scratch)?;
        let v = choose(&self.scratch, rng.uniform());
        let changed = v != self.state.get(node);
        self.state.set(node, v);
        Ok(changed)
    }

    /// One lazy transition: hold on u <= 1/2, else redraw a uniformly chosen free node.
    pub fn lazy_step<R: UniformSource>(&mut self, net: &BeliefNetwork, rng: &mut R) -> Result<Transition> {
        if self.free.is_empty() {
            return Err(Error::NoFreeNodes);
        }
        if rng.uniform() <= 0.5 {
            return Ok(Transition::Stay);
        }
        let node = self.free[uniform_index(rng.uniform(), self.free.len())];
        let changed = self.resample(net, node, rng)?;
        Ok(Transition::Resampled { node, changed })
    }

    /// One cyclic transition: redraw the cursor's node, then advance the cursor.
    pub fn cyclic_step<R: UniformSource>(&mut self, net: &BeliefNetwork, rng: &mut R) -> Result<usize> {
        if self.free.is_empty() {
            return Err(Error::NoFreeNodes);
        }
        let node = self.free[self.cursor];
        self.resample(net, node, rng)?;
        self.cursor = (self.cursor + 1) % self.free.len();
        Ok(node)
    }
}

pub fn do_transition<R: UniformSource>(
    net: &BeliefNetwork,
    cs: &mut ChainState,
    rng: &mut R,
) -> Result<Transition> {
    cs.lazy_step(net, rng)
}

pub fn init_random_state<R: UniformSource>(net: &BeliefNetwork, ev: &Evidence, rng: &mut R) -> ChainState {
    let mut cs = ChainState::new(net, ev);
    cs.randomize(net, rng);
    cs
}

/// Random restart followed by exactly `transitions` lazy transitions.
pub fn next_trial<R: UniformSource>(
    net: &BeliefNetwork,
    ev: &Evidence,
    transitions: u64,
    rng: &mut R,
) -> Result<JointState> {
    let mut cs = init_random_state(net, ev, rng);
    for _ in 0..transitions {
        cs.lazy_step(net, rng)?;
    }
    Ok(cs.state)
}

pub fn straight_step<R: UniformSource>(net: &BeliefNetwork, cs: &mut ChainState, rng: &mut R) -> Result<usize> {
    cs.cyclic_step(net, rng)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model_io::builtin_network;
    use crate::network::Node;

    /// Replays fixed draws, counting how many were consumed.
    pub struct Scripted {
        pub draws: Vec<f64>,
        pub used: usize,
    }

    impl UniformSource for Scripted {
        fn uniform(&mut self) -> f64 {
            let u = self.draws[self.used];
            self.used += 1;
            u
        }
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn full_conditionals_on_ab() {
        let net = builtin_network("AB").unwrap();
        let p = full_conditional(&net, &JointState(vec![0, 0]), 0).unwrap();
        assert!(close(&p, &[9.0 / 11.0, 2.0 / 11.0], 1e-15));
        let p = full_conditional(&net, &JointState(vec![0, 1]), 0).unwrap();
        assert!(close(&p, &[1.0 / 9.0, 8.0 / 9.0], 1e-15));
        let p = full_conditional(&net, &JointState(vec![0, 1]), 1).unwrap();
        assert!(close(&p, &[0.9, 0.1], 1e-15));
    }

    #[test]
    fn conflict_is_reported() {
        let net = BeliefNetwork::new(
            "D",
            vec![
                Node::new("A", &["t", "f"], vec![], vec![vec![1.0, 0.0]]),
                Node::new("B", &["t", "f"], vec![0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
            ],
        )
        .unwrap();
        let r = full_conditional(&net, &JointState(vec![0, 1]), 0);
        assert!(matches!(r, Err(Error::DeterministicConflict { node }) if node == "A"));
    }

    #[test]
    fn lazy_branch_consumes_one_draw() {
        let net = builtin_network("AB").unwrap();
        let mut cs = ChainState::new(&net, &Evidence::empty());
        let before = cs.state.clone();
        let mut rng = Scripted { draws: vec![0.3, 0.9, 0.9], used: 0 };
        assert_eq!(do_transition(&net, &mut cs, &mut rng).unwrap(), Transition::Stay);
        assert_eq!(rng.used, 1);
        assert_eq!(cs.state, before);
        // u exactly 1/2 also holds
        let mut rng = Scripted { draws: vec![0.5], used: 0 };
        assert_eq!(do_transition(&net, &mut cs, &mut rng).unwrap(), Transition::Stay);
    }

    #[test]
    fn forced_draw_selects_by_inverse_cdf() {
        let net = builtin_network("AB").unwrap();
        let ev = Evidence::new(&net, [(1, 0)]).unwrap();
        for (draw, want) in [(0.0, 0), (0.8, 0), (9.0 / 11.0 - 1e-9, 0), (0.82, 1), (0.999, 1)] {
            let mut cs = ChainState::new(&net, &ev);
            cs.state.set(0, 1 - want);
            // coin 0.7 moves; node draw 0.1 picks the only free node A
            let mut rng = Scripted { draws: vec![0.7, 0.1, draw], used: 0 };
            let t = do_transition(&net, &mut cs, &mut rng).unwrap();
            assert_eq!(t, Transition::Resampled { node: 0, changed: true });
            assert_eq!(cs.state.get(0), want, "draw {draw}");
            assert_eq!(cs.state.get(1), 0);
            assert_eq!(rng.used, 3);
        }
    }

    #[test]
    fn node_choice_is_uniform_over_free_nodes() {
        let net = builtin_network("AB").unwrap();
        let mut cs = ChainState::new(&net, &Evidence::empty());
        let mut rng = RandomStream::new(7);
        let (mut moved, mut a) = (0u32, 0u32);
        for _ in 0..100_000 {
            if let Transition::Resampled { node, .. } = cs.lazy_step(&net, &mut rng).unwrap() {
                moved += 1;
                if node == 0 {
                    a += 1;
                }
            }
        }
        let frac = a as f64 / moved as f64;
        assert!((frac - 0.5).abs() < 0.01, "{frac}");
    }

    #[test]
    fn init_is_uniform_and_clamps() {
        let net = builtin_network("AB").unwrap();
        let ev = Evidence::new(&net, [(1, 0)]).unwrap();
        let mut rng = RandomStream::new(11);
        let mut a_true = 0u32;
        for _ in 0..100_000 {
            let cs = init_random_state(&net, &ev, &mut rng);
            assert_eq!(cs.state.get(1), 0);
            assert_eq!(cs.cursor(), 0);
            if cs.state.get(0) == 0 {
                a_true += 1;
            }
        }
        assert!((a_true as f64 / 1e5 - 0.5).abs() < 0.01);

        let all = Evidence::new(&net, [(0, 1), (1, 0)]).unwrap();
        let mut rng = Scripted { draws: vec![], used: 0 };
        let cs = init_random_state(&net, &all, &mut rng);
        assert_eq!(cs.state, JointState(vec![1, 0]));
        assert_eq!(rng.used, 0);
    }

    #[test]
    fn init_passes_chi_square_on_four_states() {
        let net = builtin_network("AB").unwrap();
        let mut rng = RandomStream::new(3);
        let mut counts = [0f64; 4];
        let n = 100_000;
        for _ in 0..n {
            let cs = init_random_state(&net, &Evidence::empty(), &mut rng);
            counts[cs.state.get(0) * 2 + cs.state.get(1)] += 1.0;
        }
        let expected = n as f64 / 4.0;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        // 3 degrees of freedom, 0.999 quantile
        assert!(chi2 < 16.27, "chi2 = {chi2}");
    }

    #[test]
    fn zero_transitions_is_random_init() {
        let net = builtin_network("AB").unwrap();
        let mut a = RandomStream::new(5);
        let mut b = RandomStream::new(5);
        for _ in 0..100 {
            let s = next_trial(&net, &Evidence::empty(), 0, &mut a).unwrap();
            assert_eq!(s, init_random_state(&net, &Evidence::empty(), &mut b).state);
        }
    }

    #[test]
    fn trials_converge_to_posterior() {
        let net = builtin_network("AB").unwrap();
        let ev = Evidence::new(&net, [(1, 0)]).unwrap();
        let mut rng = RandomStream::new(1);
        let n = 10_000;
        let hits = (0..n)
            .filter(|_| next_trial(&net, &ev, 200, &mut rng).unwrap().get(0) == 0)
            .count();
        assert!((hits as f64 / n as f64 - 9.0 / 11.0).abs() < 0.02);
    }

    #[test]
    fn cyclic_cursor_wraps() {
        let net = builtin_network("AB").unwrap();
        let mut cs = ChainState::new(&net, &Evidence::empty());
        let mut rng = RandomStream::new(2);
        assert_eq!(straight_step(&net, &mut cs, &mut rng).unwrap(), 0);
        assert_eq!(cs.cursor(), 1);
        assert_eq!(straight_step(&net, &mut cs, &mut rng).unwrap(), 1);
        assert_eq!(cs.cursor(), 0);
    }

    #[test]
    fn path2_sweep_survival() {
        let net = builtin_network("PATH2").unwrap();
        let tt = JointState(vec![0, 0]);
        // A redrawn given B=t, then B redrawn given A=t.
        let stay_a = full_conditional(&net, &tt, 0).unwrap()[0];
        let stay_b = full_conditional(&net, &tt, 1).unwrap()[0];
        let survival = stay_a * stay_b;
        assert!((survival - 0.9801).abs() < 1e-12);
        assert!(survival > 0.97);

        let mut rng = RandomStream::new(9);
        let trials = 100_000;
        let mut survived = 0;
        for _ in 0..trials {
            let mut cs = ChainState::new(&net, &Evidence::empty());
            straight_step(&net, &mut cs, &mut rng).unwrap();
            straight_step(&net, &mut cs, &mut rng).unwrap();
            if cs.state == tt {
                survived += 1;
            }
        }
        assert!((survived as f64 / trials as f64 - survival).abs() < 0.003);
    }

    #[test]
    fn no_free_nodes_is_an_error() {
        let net = builtin_network("AB").unwrap();
        let ev = Evidence::new(&net, [(0, 0), (1, 0)]).unwrap();
        let mut cs = ChainState::new(&net, &ev);
        let mut rng = RandomStream::new(0);
        assert!(matches!(cs.lazy_step(&net, &mut rng), Err(Error::NoFreeNodes)));
        assert!(matches!(cs.cyclic_step(&net, &mut rng), Err(Error::NoFreeNodes)));
    }

    #[test]
    fn derived_streams_differ() {
        let mut a = RandomStream::derive(42, 0);
        let mut b = RandomStream::derive(42, 1);
        let mut m = RandomStream::new(42);
        let xa: Vec<f64> = (0..4).map(|_| a.uniform()).collect();
        let xb: Vec<f64> = (0..4).map(|_| b.uniform()).collect();
        let xm: Vec<f64> = (0..4).map(|_| m.uniform()).collect();
        assert_ne!(xa, xb);
        assert_ne!(xa, xm);
        let mut a2 = RandomStream::derive(42, 0);
        assert_eq!(xa, (0..4).map(|_| a2.uniform()).collect::<Vec<_>>());
    }
}
