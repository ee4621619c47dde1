//! Approximate posterior inference in discrete belief networks by randomized
//! Gibbs trials (BN-RAS), with straight simulation as the baseline, exact
//! enumeration as the gold standard, and a-priori convergence bounds.
//!
//! ```
//! use bnras::{builtin_network, parse_evidence, bnras_estimate, enumerate_posteriors, error_metrics};
//!
//! let net = builtin_network("AB").unwrap();
//! let ev = parse_evidence("B=t", &net).unwrap();
//! let exact = enumerate_posteriors(&net, &ev).unwrap();
//! let est = bnras_estimate(&net, &ev, 2000, 50, 7).unwrap();
//! assert!(error_metrics(&est, &exact).unwrap().max_error < 0.05);
//! ```

pub mod bounds;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod gibbs;
pub mod model_io;
pub mod network;
pub mod oracle;
pub mod timing;

pub use bounds::{
    factored_lower_bounds, mixing_bound, report_bounds, transitions_per_trial, trials_bound, BoundsMode,
    BoundsReport, ErrorTolerances,
};
pub use error::{Error, Result};
pub use estimators::{
    bnras_estimate, bnras_estimate_par, check_interval, error_metrics, rank_outcomes, straight_estimate, ErrorReport,
    PosteriorEstimate, Tally,
};
pub use experiment::{Algorithm, Problem, ResultRow, SweepSpec};
pub use gibbs::{
    do_transition, full_conditional, init_random_state, next_trial, straight_step, ChainState, RandomStream,
    UniformSource,
};
pub use model_io::{builtin_network, builtin_networks, parse_evidence, parse_network, serialize_network};
pub use network::{validate_network, BeliefNetwork, Cpt, Evidence, JointState, Node, ValidationReport};
pub use oracle::{
    build_transition_matrix, enumerate_posteriors, min_joint_posterior, min_transition_probability,
    relative_pointwise_distance, MixingReport, OracleConfig, PosteriorTable, TransitionMatrix,
};
