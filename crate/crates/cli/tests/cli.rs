use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rrr(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rrr"))
        .args(args)
        .current_dir(dir)
        .env_remove("RRR_OUT_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn analyze_prints_the_formulas() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = rrr(&["analyze", "pr-bfs", "--ne", "100", "--q", "54", "--alpha", "0.33", "--beta", "0.05"], d);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "8.334e-4");
    let o = rrr(&["analyze", "pr-alv", "--ne", "100", "--q", "54", "--alpha", "0.33", "--beta", "0.05"], d);
    assert_eq!(stdout(&o).trim(), "6.229e-2");
    let o = rrr(&["analyze", "pr-blv", "--ne", "100", "--q", "54", "--beta", "0.05"], d);
    assert!(stdout(&o).trim().ends_with("e-33"));
    let o = rrr(&["analyze", "pr-ae", "--ne", "100", "--na", "100000", "--ta", "20000", "--alpha", "0.33"], d);
    assert!(stdout(&o).trim().ends_with("e-6"));
    let o = rrr(
        &["analyze", "pr-afs", "--ne", "100", "--q", "54", "--alpha", "0.33", "--beta", "0.05", "--depth", "3", "--log2-leaves", "0"],
        d,
    );
    assert!(stdout(&o).trim().ends_with("e-10"));
    let o = rrr(&["analyze", "throughput", "--tr", "5", "--block", "2000000", "--ne", "100", "--tx", "250"], d);
    let tps: f64 = stdout(&o).lines().next().unwrap().trim_start_matches("tps=").parse().unwrap();
    assert!((tps - 1500.0).abs() / 1500.0 < 0.05, "{tps}");
}

#[test]
fn missing_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = rrr(&["analyze", "pr-bfs", "--ne", "100", "--q", "54", "--alpha", "0.33"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--beta"), "{}", stderr(&o));
    assert!(stderr(&o).contains("Usage"));
    // Out-of-domain values are errors too.
    let o = rrr(&["analyze", "pr-bfs", "--ne", "100", "--q", "54", "--alpha", "0.7", "--beta", "0.5"], dir.path());
    assert!(!o.status.success());
}

#[test]
fn sweep_writes_one_row_per_quorum() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = rrr(
        &["sweep", "--ne", "100", "--alpha", "0.33", "--beta", "0.05", "--depth", "12", "--s", "5", "--output", "s.csv"],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("recommended_q=54"));
    let csv = fs::read_to_string(d.join("s.csv")).unwrap();
    assert_eq!(csv.lines().count(), 101);
    assert!(csv.starts_with(rrr_analysis::SWEEP_CSV_HEADER));

    let o = rrr(
        &["sweep", "--ne", "100", "--alpha", "0.33", "--beta", "0.05", "--depth", "12", "--s", "5", "--q-min", "60", "--q-max", "50"],
        d,
    );
    assert!(!o.status.success());
    assert!(stderr(&o).contains("empty"), "{}", stderr(&o));
}

#[test]
fn honest_run_writes_a_row_per_round_and_a_verifiable_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = r#"{
  "net": {"nodes": 12},
  "params": {"n_endorsers": 20, "quorum": 11},
  "rounds": 100,
  "output": {"dir": "res", "name": "honest", "dump": true}
}"#;
    fs::write(d.join("run.json"), cfg).unwrap();
    let o = rrr(&["simulate", "--config", "run.json"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("skip_rate=0.0000"));
    let csv = fs::read_to_string(d.join("res/honest.rounds.csv")).unwrap();
    assert!(csv.starts_with(rrr_sim::ROUND_CSV_HEADER));
    assert_eq!(csv.lines().count(), 101);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("res/honest.report.json")).unwrap()).unwrap();
    assert_eq!(report["blocks"], 100);

    let o = rrr(&["verify", "res/honest.chain"], d);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("valid: 100 blocks"));

    // A corrupted signature byte deep in the file fails verification.
    let blocks = d.join("res/honest.chain").join(rrr_core::chain::BLOCKS_FILE);
    let mut bytes = fs::read(&blocks).unwrap();
    let at = bytes.len() - 10;
    bytes[at] ^= 0x40;
    fs::write(&blocks, bytes).unwrap();
    let o = rrr(&["verify", "res/honest.chain"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("invalid"), "{}", stdout(&o));
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = Command::new(env!("CARGO_BIN_EXE_rrr"))
        .args(["simulate", "--nodes", "6", "--rounds", "5"])
        .current_dir(d)
        .env("RRR_OUT_DIR", "from-env")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(d.join("from-env/run.rounds.csv").exists());
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bad_value = "{\n  \"rounds\": 10,\n  \"net\": {\n    \"nodes\": 8,\n    \"beta\": 1.5\n  }\n}\n";
    fs::write(d.join("a.json"), bad_value).unwrap();
    let o = rrr(&["simulate", "--config", "a.json"], d);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("a.json:5:5: beta must lie in [0, 1)"), "{}", stderr(&o));

    let unknown = "{\n  \"rounds\": 10,\n  \"netx\": {}\n}\n";
    fs::write(d.join("b.json"), unknown).unwrap();
    let o = rrr(&["simulate", "--config", "b.json"], d);
    assert!(stderr(&o).contains("b.json:3:"), "{}", stderr(&o));
    assert!(stderr(&o).contains("unknown field `netx`"));

    let syntax = "{\n  \"rounds\": 10,\n  \"net\": {\"nodes\": }\n}\n";
    fs::write(d.join("c.json"), syntax).unwrap();
    let o = rrr(&["simulate", "--config", "c.json"], d);
    assert!(stderr(&o).contains("c.json:3:"), "{}", stderr(&o));

    let quorum = "{\n  \"params\": {\n    \"n_endorsers\": 10,\n    \"quorum\": 11\n  }\n}\n";
    fs::write(d.join("q.json"), quorum).unwrap();
    let o = rrr(&["simulate", "--config", "q.json"], d);
    assert!(stderr(&o).contains("q.json:4:5: quorum must satisfy"), "{}", stderr(&o));
}

#[test]
fn attack_requires_a_strategy() {
    let dir = tempfile::tempdir().unwrap();
    let o = rrr(&["attack", "--nodes", "6", "--rounds", "5"], dir.path());
    assert!(!o.status.success());
    assert!(stderr(&o).contains("strategy"));
    let o = rrr(&["attack", "--nodes", "6", "--rounds", "5", "--strategy", "no-such-thing"], dir.path());
    assert!(!o.status.success());
}

#[test]
fn bias_demo_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = rrr(&["bias-demo", "--alpha", "0", "--final", "2000", "--runs", "2"], d);
    assert!(o.status.success());
    let csv = stdout(&o);
    assert!(csv.starts_with("total_stake,adv_stake_share,adv_block_share\n"));
    assert_eq!(csv.lines().count(), 1001);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",0.000000,0.000000")), "{}", &csv[..200]);

    let o = rrr(&["bias-demo", "--control", "--runs", "5", "--output", "c.csv"], d);
    let line = stdout(&o);
    let share: f64 = line
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("final_adv_stake_share="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((share - 0.33).abs() < 0.02, "{line}");
}
