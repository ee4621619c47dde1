use std::path::Path;
use std::process::{Command, Output};

const HEADER: &str = "run_id,seed,algorithm,network,evidence,trials,transitions_per_trial,total_transitions,\
checkpoint,avg_error,max_error,worst_node,cpu_seconds,wall_seconds";

fn bnras(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bnras")).args(args).env_remove("BNRAS_ENUM_CAP").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

/// Parsed CSV records as maps from column name to value.
fn records(text: &str) -> Vec<std::collections::HashMap<String, String>> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(HEADER));
    let cols: Vec<&str> = HEADER.split(',').collect();
    lines
        .map(|l| {
            let fields: Vec<&str> = l.split(',').collect();
            assert_eq!(fields.len(), cols.len(), "{l}");
            cols.iter().zip(fields).map(|(c, f)| (c.to_string(), f.to_string())).collect()
        })
        .collect()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn validate_builtin_succeeds() {
    let o = bnras(&["validate", "--network", "AB"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("valid"));
}

#[test]
fn validate_reports_bad_row_sum_with_node_and_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "bad.bn",
        "network Bad\nnode A { outcomes: t, f }\ncpt A:\n  0.7 0.5\n",
    );
    let o = bnras(&["validate", "--network", &path]);
    assert_eq!(code(&o), 2);
    let err = stderr(&o);
    assert!(err.contains("'A'") || err.contains(" A "), "{err}");
    assert!(err.contains("row 0"), "{err}");
    assert!(err.contains("bad.bn:3:"), "location missing: {err}");
}

#[test]
fn validate_missing_file_is_io_error() {
    let o = bnras(&["validate", "--network", "/definitely/not/here.bn"]);
    assert_ne!(code(&o), 0);
    assert!(stderr(&o).contains("No such file"), "{}", stderr(&o));
}

#[test]
fn validate_flags_deterministic_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "det.bn",
        "network Det\nnode A { outcomes: t, f }\nnode B { outcomes: t, f }\nparents B: A\n\
         cpt A:\n  0.5 0.5\ncpt B:\n  1 0\n  0.5 0.5\n",
    );
    let o = bnras(&["validate", "--network", &path]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("node 'B' row 0"), "{}", stdout(&o));
}

#[test]
fn exact_prints_posterior_and_evidence_probability() {
    let o = bnras(&["exact", "--network", "AB", "--evidence", "B=t"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("P(A=t|B=t)=0.818182"), "{out}");
    assert!(out.contains("P(e)=0.55"), "{out}");

    let o = bnras(&["exact", "--network", "PATH2", "--evidence", "none"]);
    assert!(stdout(&o).contains("P(B=t)=0.500000"));
}

#[test]
fn exact_rejects_zero_probability_evidence() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "zero.bn",
        "network Zero\nnode A { outcomes: t, f }\nnode B { outcomes: t, f }\nparents B: A\n\
         cpt A:\n  1 0\ncpt B:\n  1 0\n  0.5 0.5\n",
    );
    let o = bnras(&["exact", "--network", &path, "--evidence", "B=f"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("evidence has probability zero"));
}

#[test]
fn exact_respects_enumeration_cap_override() {
    let o = Command::new(env!("CARGO_BIN_EXE_bnras"))
        .args(["exact", "--network", "MINIALARM"])
        .env("BNRAS_ENUM_CAP", "16")
        .output()
        .unwrap();
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("cap"));

    let o = Command::new(env!("CARGO_BIN_EXE_bnras"))
        .args(["exact", "--network", "AB"])
        .env("BNRAS_ENUM_CAP", "lots")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn unknown_evidence_node_is_validation_error() {
    let o = bnras(&["exact", "--network", "AB", "--evidence", "Q=t"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn run_bnras_emits_one_accurate_row() {
    let o = bnras(&["run", "--network", "AB", "--trials", "5000", "--transitions", "100", "--seed", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = records(&stdout(&o));
    assert_eq!(rows.len(), 1);
    let r = &rows[0];
    assert_eq!(r["algorithm"], "bnras");
    assert_eq!(r["network"], "AB");
    assert_eq!(r["trials"], "5000");
    assert_eq!(r["transitions_per_trial"], "100");
    assert_eq!(r["total_transitions"], "500000");
    assert_eq!(r["checkpoint"], "");
    assert!(r["max_error"].parse::<f64>().unwrap() < 0.05);
    assert!(r["cpu_seconds"].parse::<f64>().unwrap() >= 0.0);
}

#[test]
fn run_is_deterministic_up_to_timing() {
    let args = ["run", "--network", "CHAIN5", "--evidence", "C5=t", "-N", "300", "-t", "20", "--seed", "9", "--stride", "1000"];
    let strip = |o: &Output| -> Vec<String> {
        stdout(o)
            .lines()
            .map(|l| l.rsplitn(3, ',').nth(2).unwrap().to_string())
            .collect()
    };
    let a = bnras(&args);
    let b = bnras(&args);
    assert_eq!(strip(&a), strip(&b));
    assert!(strip(&a).len() > 2, "checkpoints expected");
}

#[test]
fn run_straight_writes_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("row.csv");
    let o = bnras(&[
        "run", "-n", "PATH2", "-a", "straight", "--total", "10000", "--seed", "1", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = records(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["algorithm"], "straight");
    assert_eq!(rows[0]["total_transitions"], "10000");
    assert_eq!(rows[0]["transitions_per_trial"], "1");
}

#[test]
fn run_usage_errors() {
    assert_eq!(code(&bnras(&["run", "-n", "AB", "-N", "0", "-t", "10"])), 1);
    assert_eq!(code(&bnras(&["run", "-n", "AB", "-t", "10"])), 1);
    assert_eq!(code(&bnras(&["run", "-n", "AB", "-a", "straight"])), 1);
    assert_eq!(code(&bnras(&["run", "-n", "AB", "-a", "gibbs", "-N", "1", "-t", "1"])), 1);
    assert_eq!(code(&bnras(&["frobnicate"])), 1);
    assert_eq!(code(&bnras(&["--help"])), 0);
}

#[test]
fn bounds_exact_on_ab() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bounds.csv");
    let o = bnras(&["bounds", "-n", "AB", "--alpha", "0.1", "--delta", "0.1", "--gamma", "0.1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("trials N: 250"), "{text}");
    assert!(text.contains("mixing transitions t: 67816"), "{text}");
    assert!(!text.contains("lower-bound inputs"));
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("network,evidence,mode"));
    let row = lines.next().unwrap();
    assert!(row.starts_with("AB,,exact,0.1,0.1,0.1,0.1,250,"), "{row}");
    assert!(row.ends_with(",false"));
}

#[test]
fn bounds_factored_on_minialarm_is_flagged() {
    let o = bnras(&["bounds", "-n", "MINIALARM", "--mode", "factored"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("lower-bound inputs"));
}

#[test]
fn bounds_refuse_deterministic_networks_and_bad_tolerances() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "det.bn",
        "network Det\nnode A { outcomes: t, f }\ncpt A:\n  1 0\n",
    );
    let o = bnras(&["bounds", "-n", &path]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("strictly positive"));
    assert_eq!(code(&bnras(&["bounds", "-n", "AB", "--alpha", "1.5"])), 1);
}

#[test]
fn sweep_cardinality_and_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = bnras(&[
        "sweep", "-n", "PATH2", "--trials", "10,100,1000", "--transitions", "1,10,100,1000", "--seeds", "1..10",
        "--stride", "0", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = records(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(rows.len(), 120);
    assert!(rows.iter().all(|r| r["checkpoint"].is_empty()));
    let ids: Vec<u64> = rows.iter().map(|r| r["run_id"].parse().unwrap()).collect();
    assert_eq!(ids, (0..120).collect::<Vec<_>>());
    assert_eq!(rows[0]["trials"], "10");
    assert_eq!(rows[0]["transitions_per_trial"], "1");
    assert_eq!(rows[119]["trials"], "1000");
    assert_eq!(rows[119]["seed"], "10");
}

#[test]
fn sweep_with_stride_adds_checkpoint_rows() {
    let o = bnras(&["sweep", "-n", "AB", "-a", "straight", "--total", "1000", "--seeds", "1,2", "--stride", "250"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = records(&stdout(&o));
    let summaries = rows.iter().filter(|r| r["checkpoint"].is_empty()).count();
    assert_eq!(summaries, 2);
    assert_eq!(rows.len(), 2 * 4 + 2);
}

#[test]
fn sweep_rejects_duplicate_seeds_and_empty_grids() {
    assert_eq!(code(&bnras(&["sweep", "-n", "AB", "-N", "10", "-t", "1", "--seeds", "1,1"])), 1);
    assert_eq!(code(&bnras(&["sweep", "-n", "AB", "-N", "10", "--seeds", "1"])), 1);
}

#[test]
fn compare_matches_budgets() {
    let o = bnras(&["compare", "-n", "AB", "--total", "10000", "-t", "100", "--seeds", "1..3", "--stride", "1000"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = records(&stdout(&o));
    let summaries: Vec<_> = rows.iter().filter(|r| r["checkpoint"].is_empty()).collect();
    assert_eq!(summaries.len(), 6);
    for r in &summaries {
        assert_eq!(r["total_transitions"], "10000");
    }
    assert!(summaries.iter().any(|r| r["algorithm"] == "bnras" && r["trials"] == "100"));
    assert!(rows.iter().any(|r| r["algorithm"] == "straight" && !r["checkpoint"].is_empty()));
    assert!(rows.iter().any(|r| r["algorithm"] == "bnras" && !r["checkpoint"].is_empty()));
}

#[test]
fn compare_budget_zero_is_usage_error() {
    assert_eq!(code(&bnras(&["compare", "-n", "AB", "--total", "0"])), 1);
}

#[test]
fn compare_on_well_mixing_network_has_close_medians() {
    let o = bnras(&["compare", "-n", "AB", "--total", "100000", "-t", "100", "--seeds", "1..30", "--stride", "0"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = records(&stdout(&o));
    let median = |alg: &str| {
        let mut v: Vec<f64> = rows
            .iter()
            .filter(|r| r["algorithm"] == alg)
            .map(|r| r["avg_error"].parse().unwrap())
            .collect();
        v.sort_by(f64::total_cmp);
        0.5 * (v[14] + v[15])
    };
    assert!((median("straight") - median("bnras")).abs() < 0.02);
}
