//! Shared fixtures for the criterion benches.

use bnras::{builtin_network, parse_evidence, BeliefNetwork, Evidence};

/// A bundled network and an evidence string applied to it.
pub fn fixture(name: &str, evidence: &str) -> (BeliefNetwork, Evidence) {
    let net = builtin_network(name).expect("bundled network");
    let ev = parse_evidence(evidence, &net).expect("valid evidence");
    (net, ev)
}
