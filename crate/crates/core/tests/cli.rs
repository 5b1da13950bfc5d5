use std::path::Path;
use std::process::{Command, Output};

use evlstream::eval::{mean, population_std};
use evlstream::experiment::{load_report, run_experiment, BatchReport, ExperimentSpec};

fn evlstream(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evlstream")).args(args).output().unwrap()
}

fn small_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("exp.toml");
    let text = format!(
        r#"
repetitions = 3
jobs = 2
{extra}
[source]
type = "generator"
kind = "translate"
samples = 1250

[run]
window_size = 250
seed = 40
"#
    );
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn strip_times(report: &mut BatchReport) {
    for s in &mut report.sections {
        s.mean_wall_time = 0.0;
        s.std_wall_time = 0.0;
        for r in &mut s.runs {
            r.wall_time_seconds = 0.0;
        }
    }
}

#[test]
fn json_on_stdout_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = evlstream(&["--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: BatchReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.schema_version, 1);
    assert_eq!(report.std_convention, "population");
    assert_eq!(report.sections.len(), 1);
    assert_eq!(report.sections[0].runs.len(), 3);
    let again = serde_json::to_string_pretty(&report).unwrap() + "\n";
    assert_eq!(again, String::from_utf8(out.stdout).unwrap());
}

#[test]
fn reruns_match_except_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), r#"baselines = ["pso"]"#);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert!(evlstream(&["--config", &cfg, "--out", a.to_str().unwrap()]).status.success());
    assert!(evlstream(&["--config", &cfg, "--out", b.to_str().unwrap(), "--jobs", "1"]).status.success());
    let (mut ra, mut rb) = (load_report(&a).unwrap(), load_report(&b).unwrap());
    strip_times(&mut ra);
    strip_times(&mut rb);
    assert_eq!(serde_json::to_vec(&ra).unwrap(), serde_json::to_vec(&rb).unwrap());
}

#[test]
fn csv_output_has_one_row_per_run_and_window() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), r#"baselines = ["static"]"#);
    let out_path = dir.path().join("res.csv");
    let out = evlstream(&["--config", &cfg, "--format", "csv", "--out", out_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let runs = std::fs::read_to_string(dir.path().join("res_runs.csv")).unwrap();
    let windows = std::fs::read_to_string(dir.path().join("res_windows.csv")).unwrap();
    // 2 evolvers x 3 repetitions; 1000 stream items in windows of 250
    assert_eq!(runs.lines().count(), 1 + 2 * 3);
    assert_eq!(windows.lines().count(), 1 + 2 * 4);
    assert!(runs.starts_with("evolver,num_agents,run,seed,mean_f1,wall_time\n"));
}

#[test]
fn seeds_follow_the_ladder_and_wrap() {
    let mut spec = ExperimentSpec::from_toml(
        r#"
repetitions = 3
[source]
type = "generator"
kind = "translate"
samples = 800
[run]
seed = 18446744073709551614
"#,
    )
    .unwrap();
    spec.jobs = 1;
    let report = run_experiment(&spec).unwrap();
    let seeds: Vec<u64> = report.sections[0].runs.iter().map(|r| r.seed).collect();
    assert_eq!(seeds, vec![u64::MAX - 1, u64::MAX, 0]);
}

#[test]
fn section_statistics_recompute_from_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = evlstream(&["--config", &cfg, "--reps", "5"]);
    let report: BatchReport = serde_json::from_slice(&out.stdout).unwrap();
    let s = &report.sections[0];
    let scores: Vec<f64> = s.runs.iter().map(|r| r.mean_f1).collect();
    let times: Vec<f64> = s.runs.iter().map(|r| r.wall_time_seconds).collect();
    let m = scores.iter().sum::<f64>() / scores.len() as f64;
    let sd = (scores.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / scores.len() as f64).sqrt();
    assert!((s.mean_f1 - m).abs() < 1e-12);
    assert!((s.std_f1 - sd).abs() < 1e-12);
    assert!((s.mean_wall_time - mean(&times)).abs() < 1e-12);
    assert!((s.std_wall_time - population_std(&times)).abs() < 1e-12);
    for r in &s.runs {
        let wm = r.per_window_f1.iter().sum::<f64>() / r.per_window_f1.len() as f64;
        assert!((r.mean_f1 - wm).abs() < 1e-12);
    }
}

#[test]
fn sweep_gives_one_section_per_agent_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = evlstream(&["--config", &cfg, "--sweep", "10,20,50,100", "--reps", "2"]);
    assert!(out.status.success());
    let report: BatchReport = serde_json::from_slice(&out.stdout).unwrap();
    let agents: Vec<usize> = report.sections.iter().map(|s| s.num_agents).collect();
    assert_eq!(agents, vec![10, 20, 50, 100]);
}

#[test]
fn comparisons_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), r#"baselines = ["static"]"#);
    let out = evlstream(&["--config", &cfg, "--reference", "0.99"]);
    let report: BatchReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.comparisons.len(), 2);
}

#[test]
fn csv_stream_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let mut text = String::from("x,y,class\n");
    for i in 0..400 {
        let (x, l) = if i % 2 == 0 { (0.0, "a") } else { (10.0, "b") };
        text.push_str(&format!("{},{},{l}\n", x + (i % 7) as f64 * 0.01, 0.0));
    }
    std::fs::write(&path, text).unwrap();
    let out = evlstream(&["--csv", path.to_str().unwrap(), "--header", "--train", "100", "--window", "100", "--reps", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: BatchReport = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report.sections[0].runs[0].windows, 3);
    assert!(report.sections[0].mean_f1 > 0.99);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad_toml = dir.path().join("bad.toml");
    std::fs::write(&bad_toml, "repetitions = \"many\"").unwrap();
    assert_eq!(evlstream(&["--config", bad_toml.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(evlstream(&["--reps", "0"]).status.code(), Some(1));
    assert_eq!(evlstream(&["--format", "csv"]).status.code(), Some(1));
    assert_eq!(evlstream(&["--evolver", "annealing"]).status.code(), Some(1));

    let bad_csv = dir.path().join("bad.csv");
    std::fs::write(&bad_csv, "1,2,a\n1,oops,b\n").unwrap();
    let out = evlstream(&["--csv", bad_csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.csv:2:1"));
    let missing = dir.path().join("nope.csv");
    assert_eq!(evlstream(&["--csv", missing.to_str().unwrap(), "--label-column", "2"]).status.code(), Some(2));
}
