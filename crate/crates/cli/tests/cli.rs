use std::process::{Command, Output};

use serde_json::Value;

fn knowstate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_knowstate")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn verify_k2_passes_with_tight_slacks() {
    let out = knowstate(&["verify", "--algorithm", "k2"]);
    assert_eq!(out.status.code(), Some(0));
    let rep = json(&out);
    let checks = rep["checks"].as_array().unwrap();
    for label in ["Ac", "Bb", "Bd"] {
        let c = checks.iter().find(|c| c["action"] == label).unwrap();
        assert_eq!(c["slack"]["exact"], "0/1", "{label}");
    }
}

#[test]
fn printed_k3_potential_fails_on_db() {
    let out = knowstate(&["verify", "--algorithm", "k3", "--printed-potential", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("Db,") && l.ends_with(",-1/1,false")), "{text}");
}

#[test]
fn certified_k3_potential_passes() {
    assert_eq!(knowstate(&["verify", "--algorithm", "k3"]).status.code(), Some(0));
    let out = knowstate(&["verify", "--algorithm", "k3", "--printed-df"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn synthesize_finds_minimal_ratios() {
    let k2 = json(&knowstate(&["synthesize", "--algorithm", "k2"]));
    assert_eq!(k2["ratio"]["exact"], "3/2");
    let k3 = json(&knowstate(&["synthesize", "--algorithm", "k3"]));
    assert_eq!(k3["ratio"]["exact"], "11/6");
    let out = knowstate(&["synthesize", "--algorithm", "k2", "--ratio", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn enumerate_small_universe() {
    let out = knowstate(&["enumerate", "--algorithm", "k2", "--pages", "3", "--length", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let rep = json(&out);
    assert_eq!(rep["sequences"], 3280);
    assert_eq!(rep["max_excess"]["exact"], "0/1");
    let out = knowstate(&["enumerate", "--algorithm", "k2", "--pages", "3", "--length", "5", "--ratio", "1.2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_configs_are_usage_errors() {
    let out = knowstate(&["enumerate", "--algorithm", "k3", "--pages", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--pages"));
    assert_eq!(knowstate(&["simulate", "--trials", "0"]).status.code(), Some(2));
    assert_eq!(knowstate(&["exact", "--ratio", "x"]).status.code(), Some(2));
    assert_eq!(knowstate(&["verify", "--algorithm", "k4"]).status.code(), Some(2));
}

#[test]
fn generate_cyclic() {
    let out = knowstate(&["generate", "--generator", "cyclic", "--pages", "3", "--length", "6"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "a\nb\nc\na\nb\nc\n");
}

#[test]
fn simulate_is_reproducible_and_reads_sequence_files() {
    let dir = std::env::temp_dir().join(format!("knowstate-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("seq.txt");
    std::fs::write(&path, "# three faults\nc\nb\n\nd\n").unwrap();
    let p = path.to_str().unwrap();
    let args = ["simulate", "--algorithm", "k2", "--sequence", p, "--trials", "4000", "--seed", "3"];
    let a = knowstate(&args);
    let b = knowstate(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let rep = json(&a);
    assert_eq!(rep["length"], 3);
    assert_eq!(rep["opt_cost"], 2);
    let exact = rep["expected_cost"]["approx"].as_f64().unwrap();
    let mean = rep["monte_carlo"]["mean"].as_f64().unwrap();
    let se = rep["monte_carlo"]["standard_error"].as_f64().unwrap();
    assert!((mean - exact).abs() <= 4.0 * se + 1e-9, "{mean} vs {exact}");

    let csv = knowstate(&["exact", "--algorithm", "k2", "--sequence", p, "--format", "csv"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("step,request,cost,adjust,cumulative_cost"));
    assert_eq!(text.lines().nth(1), Some("1,c,1/1,1/1,1/1"));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn opt_mode_reports_both_oracles() {
    let out = knowstate(&["opt", "--algorithm", "k3", "--pages", "6", "--length", "20", "--seed", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let rep = json(&out);
    assert_eq!(rep["opt_cost"], rep["classical"]);
}
