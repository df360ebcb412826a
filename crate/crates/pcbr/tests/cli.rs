//! End-to-end checks of the `pcbr` binary: output formats, determinism, the
//! format env var, file output, and the exit-code contract (0 ok, 1 audit or
//! round-trip failure, 2 usage error).

use std::process::{Command, Output};

fn pcbr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcbr"))
        .args(args)
        .output()
        .expect("spawn pcbr")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

#[test]
fn bounds_text_headline() {
    let out = pcbr(&["bounds", "-N", "2", "-K", "5", "-D", "2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("= 8/13"), "{text}");
    assert!(text.contains("symbols/server = 13"), "{text}");
}

#[test]
fn bounds_json_schema() {
    let out = pcbr(&[
        "bounds", "-N", "2", "-K", "5", "-D", "2", "--format", "json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["N"], 2);
    assert_eq!(v["K"], 5);
    assert_eq!(v["D"], 2);
    assert_eq!(v["f"], 2);
    assert_eq!(v["g"], 3);
    assert_eq!(v["M"], 1);
    assert_eq!(v["E"], 4);
    assert_eq!(v["rate"]["num"], 8);
    assert_eq!(v["rate"]["den"], 13);
    assert_eq!(v["L_lower"], 8);
    assert_eq!(v["L_upper"], 8);
    assert_eq!(v["tight"], true);
    assert_eq!(v["symbols_per_server"], 13);
}

#[test]
fn plan_output_is_deterministic() {
    let args = ["plan", "-N", "2", "-K", "5", "-D", "2", "-j", "1"];
    let first = pcbr(&args);
    let second = pcbr(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);

    let masked_a = pcbr(&[
        "plan", "-N", "2", "-K", "5", "-D", "2", "-j", "1", "--seed", "7",
    ]);
    let masked_b = pcbr(&[
        "plan", "-N", "2", "-K", "5", "-D", "2", "-j", "1", "--seed", "7",
    ]);
    let masked_c = pcbr(&[
        "plan", "-N", "2", "-K", "5", "-D", "2", "-j", "1", "--seed", "8",
    ]);
    assert_eq!(masked_a.stdout, masked_b.stdout);
    assert_ne!(masked_a.stdout, masked_c.stdout);
    assert_ne!(first.stdout, masked_a.stdout);
}

#[test]
fn plan_csv_schema() {
    let out = pcbr(&[
        "plan", "-N", "2", "-K", "5", "-D", "2", "-j", "1", "--format", "csv",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "server,k,support,entries,demand_entry,side_info");
    assert_eq!(lines.len(), 27, "header plus 2 servers x 13 symbols");
    assert!(lines[1..14].iter().all(|l| l.starts_with("1,")));
    assert!(lines[14..].iter().all(|l| l.starts_with("2,")));
}

#[test]
fn plan_json_shape() {
    let out = pcbr(&[
        "plan", "-N", "2", "-K", "5", "-D", "2", "-j", "3", "--format", "json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["demand_index"], 3);
    let servers = v["servers"].as_array().unwrap();
    assert_eq!(servers.len(), 2);
    for server in servers {
        assert_eq!(server.as_array().unwrap().len(), 13);
    }
}

#[test]
fn run_reports_rate_and_ok() {
    let out = pcbr(&["run", "-N", "2", "-K", "5", "-D", "2", "-j", "2"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "rate 8/13, decode OK, oracle OK\n");

    let large = pcbr(&["run", "-N", "2", "-K", "5", "-D", "3", "-j", "1", "-q", "3"]);
    assert!(large.status.success());
    assert_eq!(stdout(&large), "rate 3/4, decode OK, oracle OK\n");
}

#[test]
fn audit_passes_on_small_instance() {
    let out = pcbr(&[
        "audit",
        "-N",
        "2",
        "-K",
        "4",
        "-D",
        "2",
        "--samples",
        "2000",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("overall: pass"), "{text}");
    assert!(text.contains("shape_privacy"), "{text}");
    assert!(text.contains("statistical_privacy"), "{text}");
}

#[test]
fn sweep_covers_reference_point() {
    let out = pcbr(&[
        "sweep", "--N", "2..2", "--K", "5..5", "--q", "2", "--seeds", "1",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("overall: pass"), "{text}");
    assert!(
        text.contains("(2,5,2): 8/13 @ L=8 vs MPIR 82/135 @ L=82"),
        "{text}"
    );
}

#[test]
fn format_env_var_is_honored() {
    let out = Command::new(env!("CARGO_BIN_EXE_pcbr"))
        .args(["bounds", "-N", "2", "-K", "4", "-D", "2"])
        .env("PCBR_FORMAT", "json")
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["rate"]["num"], 2);
    assert_eq!(v["rate"]["den"], 3);
}

#[test]
fn output_flag_writes_file() {
    let path = std::env::temp_dir().join("pcbr-cli-test-bounds.json");
    let out = pcbr(&[
        "bounds",
        "-N",
        "3",
        "-K",
        "7",
        "-D",
        "3",
        "--format",
        "json",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let body = std::fs::read_to_string(&path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["rate"]["num"], 27);
    assert_eq!(v["rate"]["den"], 37);
    std::fs::remove_file(&path).ok();
}

#[test]
fn usage_errors_exit_two() {
    let bad_n = pcbr(&["bounds", "-N", "1", "-K", "5", "-D", "2"]);
    assert_eq!(bad_n.status.code(), Some(2));
    assert!(
        stderr(&bad_n).contains("N must be >= 2"),
        "{}",
        stderr(&bad_n)
    );

    let bad_d = pcbr(&["bounds", "-N", "2", "-K", "5", "-D", "5"]);
    assert_eq!(bad_d.status.code(), Some(2));

    let bad_j = pcbr(&["plan", "-N", "2", "-K", "5", "-D", "2", "-j", "9"]);
    assert_eq!(bad_j.status.code(), Some(2));

    let composite_q = pcbr(&["run", "-N", "2", "-K", "5", "-D", "2", "-j", "1", "-q", "4"]);
    assert_eq!(composite_q.status.code(), Some(2));
    assert!(
        stderr(&composite_q).contains("q must be prime (got 4)"),
        "{}",
        stderr(&composite_q)
    );

    let big_q = pcbr(&[
        "run", "-N", "2", "-K", "5", "-D", "2", "-j", "1", "-q", "13",
    ]);
    assert_eq!(big_q.status.code(), Some(2));
    assert!(stderr(&big_q).contains("unsupported"), "{}", stderr(&big_q));

    let empty_range = pcbr(&[
        "sweep", "--N", "2..2", "--K", "3..2", "--q", "2", "--seeds", "1",
    ]);
    assert_eq!(empty_range.status.code(), Some(2));
}
