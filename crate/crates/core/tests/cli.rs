use std::path::Path;
use std::process::Command;

use rbffd::cli;

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut full = vec!["rbffd"];
    full.extend_from_slice(args);
    let code = cli::run(full, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn path(dir: &Path) -> &str {
    dir.to_str().unwrap()
}

fn records(file: &Path) -> (csv::StringRecord, Vec<csv::StringRecord>) {
    let mut reader = csv::Reader::from_path(file).unwrap();
    let header = reader.headers().unwrap().clone();
    let rows = reader.records().map(|r| r.unwrap()).collect();
    (header, rows)
}

fn estimated_order(stdout: &str) -> f64 {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix("estimated order: "))
        .unwrap()
        .trim()
        .parse()
        .unwrap()
}

#[test]
fn solve_writes_solution_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&["solve", "--nodes", "300", "--steps", "200", "--out", path(dir.path())]);
    assert_eq!(code, 0, "{err}");

    let (header, rows) = records(&dir.path().join("solution.csv"));
    assert_eq!(&header, vec!["x", "y", "kind", "u", "exact", "abs_error"]);
    assert!(!rows.is_empty());
    for r in &rows {
        let u: f64 = r[3].parse().unwrap();
        let exact: f64 = r[4].parse().unwrap();
        let e: f64 = r[5].parse().unwrap();
        assert!(((u - exact).abs() - e).abs() <= 1e-12);
        if &r[2] == "boundary" {
            assert_eq!(u, exact);
        }
    }

    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["steps"], 200);
    assert_eq!(json["config"]["nodes"].as_u64().unwrap() as usize, rows.len());
    for key in ["wall_time_s", "linf", "l2", "residual"] {
        assert!(json[key].is_number(), "{key}");
    }
}

#[test]
fn zero_steps_reports_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&["solve", "--nodes", "200", "--steps", "0", "--out", path(dir.path())]);
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["steps"], 0);
    let (_, rows) = records(&dir.path().join("solution.csv"));
    for r in &rows {
        let u: f64 = r[3].parse().unwrap();
        match &r[2] {
            "interior" => assert_eq!(u, 0.0),
            _ => assert_eq!(u, r[4].parse::<f64>().unwrap()),
        }
    }
}

#[test]
fn bad_parameters_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    assert_eq!(run(&["solve", "--n", "3", "--nodes", "200", "--out", out]).0, 2);
    assert_eq!(run(&["solve", "--dt", "-1", "--nodes", "200", "--out", out]).0, 2);
    assert_eq!(run(&["solve", "--nodes", "200", "--h", "0.1", "--out", out]).0, 2);
    assert_eq!(run(&["bench"]).0, 2);
    assert_eq!(run(&["bench", "--nodes", ""]).0, 2);
    assert_eq!(run(&["converge", "--nodes", "500,1000"]).0, 2);
    assert_eq!(run(&["memory-model", "--cache-bytes", "0"]).0, 2);
    assert_eq!(run(&["no-such-command"]).0, 2);
}

#[test]
fn oversized_step_is_reported_as_instability() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&["solve", "--nodes", "300", "--dt", "1", "--steps", "1000", "--out", path(dir.path())]);
    assert_eq!(code, 4, "{err}");
}

#[test]
fn memory_model_table_and_options() {
    let (code, out, _) = run(&["memory-model"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "n,per_node_bytes,cache_peak_N");
    assert_eq!(lines[1], "12,180,30556");
    assert_eq!(lines[6], "60,756,7275");

    let (_, doubled, _) = run(&["memory-model", "--cache-bytes", "11000000"]);
    let base: Vec<u64> = out.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    let twice: Vec<u64> = doubled.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    for (a, b) in base.iter().zip(&twice) {
        assert!(b.abs_diff(2 * a) <= 1, "{a} -> {b}");
    }

    let (_, extra, _) = run(&["memory-model", "--n", "1"]);
    assert!(extra.lines().any(|l| l == "1,48,114583"));

    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = run(&["memory-model", "--format", "json", "--out", path(dir.path())]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(dir.path().join("memory_model.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 6);
}

#[test]
fn bench_writes_one_row_per_combination() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&[
        "bench", "--nodes", "200,400", "--n", "12,15", "--threads", "1,2", "--steps", "10", "--repeats", "1",
        "--out", path(dir.path()),
    ]);
    assert_eq!(code, 0, "{err}");
    let (header, rows) = records(&dir.path().join("bench.csv"));
    assert_eq!(&header, vec!["N", "n", "m", "threads", "steps", "loop_seconds", "ns_per_step_node"]);
    assert_eq!(rows.len(), 8);
    for r in &rows {
        assert!(r[6].parse::<f64>().unwrap() > 0.0);
    }
}

#[test]
fn converge_second_order() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = run(&["converge", "--nodes", "500,1000,2000", "--out", path(dir.path())]);
    assert_eq!(code, 0, "{err}");
    assert!(estimated_order(&out) >= 1.3, "{out}");
    let (header, rows) = records(&dir.path().join("converge.csv"));
    assert_eq!(&header, vec!["N", "h", "linf", "l2"]);
    assert_eq!(rows.len(), 3);
}

#[test]
fn converge_fourth_order() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = run(&[
        "converge", "--m", "4", "--n", "30", "--nodes", "500,1000,2000", "--format", "json", "--out",
        path(dir.path()),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(estimated_order(&out) >= 3.3, "{out}");
    let text = std::fs::read_to_string(dir.path().join("converge.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 3);
}

#[test]
fn thread_count_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_rbffd"))
        .args(["solve", "--nodes", "200", "--steps", "50", "--out", path(dir.path())])
        .env("RBFFD_THREADS", "2")
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["config"]["threads"], 2);

    let bad = Command::new(env!("CARGO_BIN_EXE_rbffd"))
        .args(["solve", "--nodes", "200", "--steps", "5", "--out", path(dir.path())])
        .env("RBFFD_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
