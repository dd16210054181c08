use std::fs;
use std::process::{Command, Output};

fn embedopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_embedopt"))
        .args(args)
        .env_remove("SIM_THREADS")
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn negative_epsilon_is_a_validation_error() {
    let out = embedopt(&["run", "--scenario", "paper_vdp", "--epsilon", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        text(&out.stderr).contains("epsilon must be positive"),
        "{}",
        text(&out.stderr)
    );
}

#[test]
fn disconnected_graph_is_rejected() {
    let out = embedopt(&["run", "--scenario", "disconnected_graph"]);
    assert_eq!(out.status.code(), Some(2));
    let err = text(&out.stderr);
    assert!(
        err.contains("not connected") && err.contains("connectivity assumption"),
        "{err}"
    );
}

#[test]
fn optimum_prints_two_decimals() {
    let out = embedopt(&["optimum", "--scenario", "paper_vdp"]);
    assert!(out.status.success());
    assert!(
        text(&out.stdout).starts_with("y* = 3.24 "),
        "{}",
        text(&out.stdout)
    );
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sweep");
    let out = embedopt(&[
        "sweep",
        "--scenario",
        "paper_vdp",
        "--param",
        "epsilon",
        "--values",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let table = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 1);
    assert!(table.starts_with("epsilon,status,"));
}

#[test]
fn sweep_marks_failed_cells_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_embedopt"))
        .args([
            "sweep",
            "--scenario",
            "paper_vdp",
            "--param",
            "epsilon",
            "--values",
            "0.4,-1,0.2",
            "--t-end",
            "2",
        ])
        .arg("--out")
        .arg(dir.path())
        .env("SIM_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", text(&out.stderr));
    let table = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("0.4,ok,"));
    assert!(rows[2].starts_with("-1,failed,"));
    assert!(rows[3].starts_with("0.2,ok,"));
    for k in 1..=3 {
        assert!(dir.path().join(format!("cell_{k:03}.txt")).exists());
    }
}

#[test]
fn bad_thread_count_is_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_embedopt"))
        .args([
            "sweep",
            "--scenario",
            "paper_vdp",
            "--param",
            "sigma",
            "--values",
            "0.1",
        ])
        .env("SIM_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_outputs_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let out = embedopt(&[
        "run",
        "--scenario",
        "paper_vdp",
        "--variant",
        "online",
        "--t-end",
        "50",
        "--plots",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    for f in [
        "trajectory.csv",
        "metrics.txt",
        "pe_report.txt",
        "outputs.svg",
        "theta_12.svg",
        "theta_34.svg",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let m = fs::read_to_string(dir.path().join("metrics.txt")).unwrap();
    let gap: f64 = m
        .lines()
        .find_map(|l| l.strip_prefix("max_final_gap = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(gap <= 0.05, "{gap}");
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,agent,x1,x2,y,r,lambda,u,theta_hat_1,"));
    let pe = fs::read_to_string(dir.path().join("pe_report.txt")).unwrap();
    assert!(pe.contains("agent1.p2.vdp_damping.excited = false"), "{pe}");
}

#[test]
fn divergence_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = embedopt(&[
        "run",
        "--scenario",
        "paper_vdp",
        "--epsilon",
        "0.02",
        "--step",
        "0.05",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(text(&out.stderr).contains("diverged"));
}

#[test]
fn missing_scenario_is_io_error() {
    let out = embedopt(&["validate", "--scenario", "/nonexistent/scenario.toml"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn unknown_key_in_file_is_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("typo.toml");
    let text_in = fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../core/scenarios/paper_vdp.toml"
    ))
    .unwrap()
    .replace("lambda_gain = 10.0", "lamda_gain = 10.0");
    fs::write(&path, text_in).unwrap();
    let out = embedopt(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("lamda_gain"));
}

#[test]
fn validate_reports_ok() {
    let out = embedopt(&["validate", "--scenario", "average_consensus"]);
    assert!(out.status.success());
    assert!(text(&out.stdout).starts_with("ok: average_consensus"));
}
