use std::path::Path;
use std::process::{Command, Output};

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_absf-sim"))
        .args(args)
        .env_remove("ABSF_SIM_SEED")
        .output()
        .expect("binary runs")
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
        .display()
        .to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn missing_config_names_the_path() {
    let o = sim(&["--config", "/nonexistent/absf.toml", "validate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/absf.toml"));
}

#[test]
fn invalid_field_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "num_runs = 0\n").unwrap();
    let o = sim(&["--config", path.to_str().unwrap(), "validate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("num_runs"));
}

#[test]
fn run_writes_results_and_guards_them() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/out");
    let out_s = out.to_str().unwrap();
    let args = ["--runs", "8", "--steps", "2", "run", "--quiet", "--out", out_s];
    let o = sim(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in [
        "muted_rate.csv",
        "sinr.csv",
        "mue_throughput.csv",
        "fue_throughput.csv",
        "outage.csv",
        "summary.json",
        "manifest.json",
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let csv = std::fs::read_to_string(out.join("outage.csv")).unwrap();
    // Header plus 5 schemes x 3 steps.
    assert_eq!(csv.lines().count(), 1 + 15);
    assert_eq!(csv.lines().next(), Some("scheme,step,mean,stddev,n"));
    let sinr = std::fs::read_to_string(out.join("sinr.csv")).unwrap();
    assert!(sinr.lines().any(|l| l.starts_with("unmuted,0,")));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["runs_completed"], 8);
    assert_eq!(summary["config"]["num_runs"], 8);

    let again = sim(&args);
    assert_eq!(again.status.code(), Some(2));
    assert!(stderr(&again).contains("--overwrite"));
    let forced = sim(&[
        "--runs",
        "8",
        "--steps",
        "2",
        "run",
        "--quiet",
        "--overwrite",
        "--out",
        out_s,
    ]);
    assert_eq!(forced.status.code(), Some(0));
}

#[test]
fn seed_flag_and_env_agree() {
    let a = sim(&["--seed", "77", "scenario"]);
    let b = Command::new(env!("CARGO_BIN_EXE_absf-sim"))
        .arg("scenario")
        .env("ABSF_SIM_SEED", "77")
        .output()
        .unwrap();
    let c = sim(&["scenario"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn inspect_worked_example_gives_two_tenths_everywhere() {
    let args = [
        "--config",
        &data("worked_example.toml"),
        "inspect",
        "--scenario",
        &data("worked_example.scn"),
    ];
    let o = sim(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("victims 5  coalitions 1"));
    let henb_rows: Vec<&str> = text
        .split("[henbs]")
        .nth(1)
        .unwrap()
        .lines()
        .skip(2)
        .take_while(|l| !l.is_empty())
        .collect();
    assert_eq!(henb_rows.len(), 3);
    for row in henb_rows {
        let cols: Vec<&str> = row.split('\t').collect();
        assert_eq!(cols[3], "2/10", "{row}");
        assert_eq!(cols[4], "XX........");
        assert_eq!(cols[5], "0");
    }
    assert!(text.contains("0\thenbs 6,7,8\tvictims 1,2,3,4,5"));
    assert_eq!(sim(&args).stdout, o.stdout);
}

#[test]
fn inspect_without_victims() {
    let o = sim(&[
        "--set",
        "num_henbs=0",
        "--set",
        "shadow_std_macro=0",
        "--set",
        "macro_radius=100",
        "inspect",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("victims 0  coalitions 0"));
}

#[test]
fn inspect_out_of_range() {
    assert_eq!(sim(&["--runs", "5", "inspect", "--run", "5"]).status.code(), Some(2));
    assert_eq!(sim(&["--steps", "2", "inspect", "--step", "3"]).status.code(), Some(2));
}

#[test]
fn table_dumps() {
    let o = sim(&["--runs", "2", "--steps", "3", "rates", "--run", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1 + 4);
    let o = sim(&["sinr", "--step", "0"]);
    assert!(stdout(&o).starts_with("step,mue,sinr_db,victim,aggressors\n"));
    assert_eq!(stdout(&o).lines().count(), 1 + 10);
    let o = sim(&["--steps", "1", "coalitions"]);
    assert!(stdout(&o).starts_with("step 0:"));
    let o = sim(&["pathloss", "--points", "3"]);
    assert_eq!(stdout(&o).lines().count(), 4);
    let o = sim(&["--set", "muting.engine=least_norm", "validate"]);
    assert!(stdout(&o).contains("engine = \"least_norm\""));
}

#[test]
fn bad_scheme_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = sim(&["run", "--schemes", "fixed:2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
