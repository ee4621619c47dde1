//! `bnras` command-line harness.
//!
//! Exit statuses: 0 success, 1 usage error, 2 validation error, 3 runtime or
//! capacity error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bnras::experiment::{run_cell, run_compare, run_sweep, write_csv, Cell, DEFAULT_STRIDE};
use bnras::model_io::{builtin_source, NetworkDocument};
use bnras::oracle::enumerate_posteriors_with;
use bnras::{
    parse_evidence, report_bounds, validate_network, Algorithm, BeliefNetwork, BoundsMode, BoundsReport,
    ErrorTolerances, Evidence, OracleConfig, Problem, SweepSpec,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

const ENUM_CAP_VAR: &str = "BNRAS_ENUM_CAP";

#[derive(Parser)]
#[command(name = "bnras", version, about = "Randomized Gibbs trials for belief-network inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a network, reporting errors with their locations.
    Validate {
        #[command(flatten)]
        target: Target,
    },
    /// Exact posterior marginals of every free node, plus P(e).
    Exact {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        evidence: EvidenceArg,
    },
    /// One estimate, written as CSV.
    Run(RunArgs),
    /// A-priori trial and transition counts.
    Bounds(BoundsArgs),
    /// A grid of estimates over N and t (or total transitions) and seeds.
    Sweep(SweepArgs),
    /// Straight simulation against BN-RAS at a matched transition budget.
    Compare(CompareArgs),
}

#[derive(Args)]
struct Target {
    /// Builtin network name (AB, PATH2, CHAIN5, MINIALARM) or a file path.
    #[arg(long, short = 'n')]
    network: String,
}

#[derive(Args)]
struct EvidenceArg {
    /// `Name=outcome(,Name=outcome)*`, or `none`.
    #[arg(long, short = 'e', default_value = "none")]
    evidence: String,
}

#[derive(Args)]
struct OutArg {
    /// CSV destination; standard output when omitted.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    target: Target,
    #[command(flatten)]
    evidence: EvidenceArg,
    #[arg(long, short = 'a', value_enum, default_value_t = AlgorithmArg::Bnras)]
    algorithm: AlgorithmArg,
    /// Number of BN-RAS trials N.
    #[arg(long, short = 'N')]
    trials: Option<u64>,
    /// Transitions per BN-RAS trial t.
    #[arg(long, short = 't')]
    transitions: Option<u64>,
    /// Scored transitions for straight simulation.
    #[arg(long)]
    total: Option<u64>,
    #[arg(long, short = 's', default_value_t = 1)]
    seed: u64,
    /// Running-error checkpoint stride in transitions; 0 writes the summary row only.
    #[arg(long, default_value_t = 0)]
    stride: u64,
    /// Unscored transitions before straight simulation starts scoring.
    #[arg(long, default_value_t = 0)]
    burn_in: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    target: Target,
    #[command(flatten)]
    evidence: EvidenceArg,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    /// Relative error; reported only.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    mode: ModeArg,
    /// Also write the report as a one-row CSV.
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    target: Target,
    #[command(flatten)]
    evidence: EvidenceArg,
    #[arg(long, short = 'a', value_enum, default_value_t = AlgorithmArg::Bnras)]
    algorithm: AlgorithmArg,
    /// Comma-separated grid over N.
    #[arg(long, short = 'N', value_delimiter = ',')]
    trials: Vec<u64>,
    /// Comma-separated grid over t.
    #[arg(long, short = 't', value_delimiter = ',')]
    transitions: Vec<u64>,
    /// Comma-separated grid over straight-simulation totals.
    #[arg(long, value_delimiter = ',')]
    total: Vec<u64>,
    /// Seeds: comma-separated values or inclusive ranges such as `1..30`.
    #[arg(long, default_value = "1")]
    seeds: String,
    #[arg(long, default_value_t = DEFAULT_STRIDE)]
    stride: u64,
    #[arg(long, default_value_t = 0)]
    burn_in: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    target: Target,
    #[command(flatten)]
    evidence: EvidenceArg,
    /// Total transition budget shared by both algorithms.
    #[arg(long)]
    total: u64,
    /// BN-RAS transitions per trial; N = budget / t.
    #[arg(long, short = 't', default_value_t = 100)]
    transitions: u64,
    /// Seeds: comma-separated values or inclusive ranges such as `1..30`.
    #[arg(long, default_value = "1")]
    seeds: String,
    #[arg(long, default_value_t = DEFAULT_STRIDE)]
    stride: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Bnras,
    Straight,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Bnras => Algorithm::Bnras,
            AlgorithmArg::Straight => Algorithm::Straight,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Factored,
}

/// A failure paired with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }

    fn validation(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<bnras::Error> for Failure {
    fn from(e: bnras::Error) -> Self {
        use bnras::Error as E;
        let code = match &e {
            E::Usage(_) | E::Domain { .. } => 1,
            E::InvalidNetwork(_) | E::Syntax { .. } | E::Semantic { .. } | E::Evidence(_) => 2,
            _ => 3,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure { code: 3, message: e.to_string() }
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    let cfg = oracle_config()?;
    match command {
        Command::Validate { target } => cmd_validate(&target.network),
        Command::Exact { target, evidence } => cmd_exact(&target.network, &evidence.evidence, &cfg),
        Command::Run(args) => cmd_run(args, &cfg),
        Command::Bounds(args) => cmd_bounds(args, &cfg),
        Command::Sweep(args) => cmd_sweep(args, &cfg),
        Command::Compare(args) => cmd_compare(args, &cfg),
    }
}

fn oracle_config() -> CliResult<OracleConfig> {
    let mut cfg = OracleConfig::default();
    if let Ok(raw) = std::env::var(ENUM_CAP_VAR) {
        cfg.enum_cap = raw
            .trim()
            .parse()
            .map_err(|_| Failure::usage(format!("{ENUM_CAP_VAR}={raw} is not a non-negative integer")))?;
    }
    Ok(cfg)
}

/// Source text for a builtin name or a file path.
fn read_source(network: &str) -> CliResult<String> {
    match builtin_source(network) {
        Some(text) => Ok(text.to_string()),
        None => std::fs::read_to_string(network)
            .map_err(|e| Failure { code: 3, message: format!("cannot read '{network}': {e}") }),
    }
}

fn load_network(network: &str) -> CliResult<BeliefNetwork> {
    let doc = NetworkDocument::load(read_source(network)?);
    match doc.network {
        Some(net) => Ok(net),
        None => Err(Failure::validation(describe_diagnostics(network, &doc))),
    }
}

fn describe_diagnostics(network: &str, doc: &NetworkDocument) -> String {
    doc.diagnostics
        .iter()
        .map(|d| match d.column {
            Some(c) => format!("{network}:{}:{c}: {}", d.line, d.message),
            None => format!("{network}:{}: {}", d.line, d.message),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn load_evidence(net: &BeliefNetwork, spec: &str) -> CliResult<Evidence> {
    let spec = spec.trim();
    if spec.is_empty() || spec.eq_ignore_ascii_case("none") {
        return Ok(Evidence::empty());
    }
    Ok(parse_evidence(spec, net)?)
}

fn load_problem(network: &str, evidence: &str, cfg: &OracleConfig) -> CliResult<Problem> {
    let net = load_network(network)?;
    let ev = load_evidence(&net, evidence)?;
    let oracle = enumerate_posteriors_with(&net, &ev, cfg)?;
    Ok(Problem::new(net, ev, oracle, network))
}

fn parse_seeds(spec: &str) -> CliResult<Vec<u64>> {
    let bad = || Failure::usage(format!("cannot parse seed list '{spec}'"));
    let mut seeds = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match item.split_once("..") {
            Some((lo, hi)) => {
                let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
                let hi: u64 = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
                if lo > hi {
                    return Err(bad());
                }
                seeds.extend(lo..=hi);
            }
            None => seeds.push(item.parse().map_err(|_| bad())?),
        }
    }
    if seeds.is_empty() {
        return Err(Failure::usage("seed list is empty"));
    }
    Ok(seeds)
}

fn open_out(path: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn create(path: &Path) -> CliResult<File> {
    File::create(path).map_err(|e| Failure { code: 3, message: format!("cannot write '{}': {e}", path.display()) })
}

fn cmd_validate(network: &str) -> CliResult<()> {
    let doc = NetworkDocument::load(read_source(network)?);
    let Some(net) = doc.network.as_ref() else {
        return Err(Failure::validation(describe_diagnostics(network, &doc)));
    };
    let report = validate_network(net);
    println!("{network}: valid network '{}' with {} nodes", net.name(), net.len());
    if report.positive {
        println!("all CPT entries strictly positive");
    } else {
        for (node, row) in &report.deterministic_rows {
            println!("node '{node}' row {row} contains a 0 or 1 entry");
        }
        println!("a-priori bounds are unavailable for this network");
    }
    Ok(())
}

fn cmd_exact(network: &str, evidence: &str, cfg: &OracleConfig) -> CliResult<()> {
    let net = load_network(network)?;
    let ev = load_evidence(&net, evidence)?;
    let table = enumerate_posteriors_with(&net, &ev, cfg)?;
    let given = if ev.is_empty() { String::new() } else { format!("|{}", ev.describe(&net)) };
    let mut out = io::stdout().lock();
    for (k, &node) in table.free.iter().enumerate() {
        let n = net.node(node);
        for (label, p) in n.outcomes.iter().zip(&table.marginals[k]) {
            writeln!(out, "P({}={label}{given})={p:.6}", n.name)?;
        }
    }
    writeln!(out, "P(e)={}", table.evidence_probability)?;
    Ok(())
}

fn cmd_run(args: RunArgs, cfg: &OracleConfig) -> CliResult<()> {
    let algorithm: Algorithm = args.algorithm.into();
    let cell = match algorithm {
        Algorithm::Bnras => {
            let trials = args.trials.ok_or_else(|| Failure::usage("bnras needs --trials"))?;
            let transitions = args.transitions.ok_or_else(|| Failure::usage("bnras needs --transitions"))?;
            if trials == 0 {
                return Err(Failure::usage("number of trials must be at least 1"));
            }
            Cell { algorithm, trials, transitions, total: 0, seed: args.seed }
        }
        Algorithm::Straight => {
            let total = args.total.ok_or_else(|| Failure::usage("straight needs --total"))?;
            if total == 0 {
                return Err(Failure::usage("total transitions must be at least 1"));
            }
            Cell { algorithm, trials: 0, transitions: 1, total, seed: args.seed }
        }
    };
    let problem = load_problem(&args.target.network, &args.evidence.evidence, cfg)?;
    let rows = run_cell(&problem, &cell, 0, args.stride, args.burn_in)?;
    write_csv(&rows, open_out(&args.out.out)?)?;
    Ok(())
}

const BOUNDS_HEADER: &str =
    "network,evidence,mode,alpha,delta,gamma,epsilon,trials,pi_min,p0,t_mix,t_per_trial,lower_bound_inputs";

fn cmd_bounds(args: BoundsArgs, cfg: &OracleConfig) -> CliResult<()> {
    let tol = ErrorTolerances::new(args.alpha, args.delta, args.gamma, args.epsilon)?;
    let net = load_network(&args.target.network)?;
    let ev = load_evidence(&net, &args.evidence.evidence)?;
    let mode = match args.mode {
        ModeArg::Exact => BoundsMode::Exact,
        ModeArg::Factored => BoundsMode::Factored,
    };
    let report = report_bounds(&net, &ev, &tol, mode, cfg)?;
    let mode_label = match args.mode {
        ModeArg::Exact => "exact",
        ModeArg::Factored => "factored",
    };
    print_bounds(&args.target.network, &ev.describe(&net), mode_label, &report)?;
    if let Some(path) = &args.out {
        let mut w = BufWriter::new(create(path)?);
        writeln!(w, "{BOUNDS_HEADER}")?;
        writeln!(
            w,
            "{},{},{mode_label},{},{},{},{},{},{:e},{:e},{},{},{}",
            args.target.network,
            ev.describe(&net),
            tol.alpha,
            tol.delta,
            tol.gamma,
            tol.epsilon,
            report.trials,
            report.pi_min,
            report.p0,
            report.t_mix,
            report.t_per_trial,
            report.lower_bound_inputs()
        )?;
        w.flush()?;
    }
    Ok(())
}

fn print_bounds(network: &str, evidence: &str, mode: &str, r: &BoundsReport) -> CliResult<()> {
    let mut out = io::stdout().lock();
    let evidence = if evidence.is_empty() { "none" } else { evidence };
    writeln!(out, "network: {network}")?;
    writeln!(out, "evidence: {evidence}")?;
    writeln!(out, "mode: {mode}")?;
    writeln!(
        out,
        "tolerances: alpha={} delta={} gamma={} epsilon={}",
        r.tolerances.alpha, r.tolerances.delta, r.tolerances.gamma, r.tolerances.epsilon
    )?;
    writeln!(out, "pi_min: {:e}", r.pi_min)?;
    writeln!(out, "p0: {:e}", r.p0)?;
    writeln!(out, "trials N: {}", r.trials)?;
    writeln!(out, "mixing transitions t: {}", r.t_mix)?;
    writeln!(out, "transitions per trial: {}", r.t_per_trial)?;
    if r.lower_bound_inputs() {
        writeln!(out, "note: lower-bound inputs; pi_min and p0 are certified lower bounds, so t is conservative")?;
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs, cfg: &OracleConfig) -> CliResult<()> {
    let spec = SweepSpec {
        algorithm: args.algorithm.into(),
        trials: args.trials,
        transitions: args.transitions,
        totals: args.total,
        seeds: parse_seeds(&args.seeds)?,
        stride: args.stride,
        burn_in: args.burn_in,
    };
    spec.validate()?;
    let problem = load_problem(&args.target.network, &args.evidence.evidence, cfg)?;
    let rows = run_sweep(&problem, &spec)?;
    write_csv(&rows, open_out(&args.out.out)?)?;
    Ok(())
}

fn cmd_compare(args: CompareArgs, cfg: &OracleConfig) -> CliResult<()> {
    let seeds = parse_seeds(&args.seeds)?;
    if args.total == 0 {
        return Err(Failure::usage("budget must be at least 1"));
    }
    let problem = load_problem(&args.target.network, &args.evidence.evidence, cfg)?;
    let rows = run_compare(&problem, args.total, args.transitions, &seeds, args.stride)?;
    write_csv(&rows, open_out(&args.out.out)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists_accept_values_and_ranges() {
        assert_eq!(parse_seeds("1,3..5, 9").ok().unwrap(), vec![1, 3, 4, 5, 9]);
        assert_eq!(parse_seeds("2..=3").ok().unwrap(), vec![2, 3]);
        assert!(parse_seeds("5..2").is_err());
        assert!(parse_seeds("x").is_err());
        assert!(parse_seeds("").is_err());
    }

    #[test]
    fn error_classes_map_to_stable_exit_codes() {
        assert_eq!(Failure::from(bnras::Error::Usage("x".into())).code, 1);
        assert_eq!(Failure::from(bnras::Error::Semantic { line: 1, message: "x".into() }).code, 2);
        assert_eq!(Failure::from(bnras::Error::ImpossibleEvidence).code, 3);
        assert_eq!(Failure::from(bnras::Error::CapExceeded { what: "x", count: 2, cap: 1 }).code, 3);
    }

    #[test]
    fn none_means_no_evidence() {
        let net = bnras::builtin_network("AB").unwrap();
        assert!(load_evidence(&net, "none").ok().unwrap().is_empty());
        assert!(load_evidence(&net, " ").ok().unwrap().is_empty());
        assert_eq!(load_evidence(&net, "B=t").ok().unwrap().len(), 1);
    }
}
