use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

const BIN: &str = env!("CARGO_BIN_EXE_smeared");

const BANK: &str = r#"
schema = 1
name = "small"
seed = 3

[[bank]]
kind = "packet"
name = "f"
center = [0.0, 0.0, 0.0, 0.0]
width = 1.0
duration = 1.0
electric = [1.0, 0.2, 0.0]
magnetic = [0.0, 0.5, -0.3]

[[bank]]
kind = "packet"
name = "g"
center = [1.0, 0.0, 0.5, 0.0]
width = 1.1
duration = 0.9
electric = [0.0, 1.0, 0.3]
magnetic = [0.4, 0.0, 0.2]
"#;

fn smeared(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("SMEARED_THREADS").output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Report JSON with timing fields removed.
fn without_timings(path: &Path) -> serde_json::Value {
    fn strip(v: &mut serde_json::Value) {
        match v {
            serde_json::Value::Object(m) => {
                m.remove("seconds");
                m.values_mut().for_each(strip);
            }
            serde_json::Value::Array(a) => a.iter_mut().for_each(strip),
            _ => {}
        }
    }
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    strip(&mut v);
    v
}

#[test]
fn empty_task_list_gives_valid_report() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s.toml", BANK);
    let out = dir.path().join("out");
    let o = smeared(&["run", &s, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(r["scenario"], "small");
    assert_eq!(r["passed"], true);
    assert_eq!(r["tasks"].as_array().unwrap().len(), 0);
    assert_eq!(r["conventions"]["metric_signature"], "diag(+1,-1,-1,-1)");
}

#[test]
fn undefined_member_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s.toml", &format!("{BANK}\n[[tasks]]\nkind = \"gram\"\nmembers = [\"f\", \"nope\"]\n"));
    let o = smeared(&["run", &s, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tasks[0].members[1]: undefined bank member `nope`"), "{}", stderr(&o));
}

#[test]
fn parse_errors_report_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s.toml", &BANK.replace("width = 1.0", "width = \"wide\""));
    let o = smeared(&["run", &s]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));
}

#[test]
fn unknown_flag_prints_usage() {
    let o = smeared(&["verify", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    let o = smeared(&["verify", "--only", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_only_runs_the_selected_suite() {
    let o = smeared(&["verify", "--only", "eq4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("eq4"));
    assert!(!text.contains("jacobi"));
    assert!(text.contains("1 of 1 criteria passed"));
}

#[test]
fn non_convergence_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let text = BANK.replace(
        "seed = 3\n",
        "seed = 3\n\n[quadrature]\nradial_nodes = 4\npolar_nodes = 4\nazimuthal_nodes = 4\ntolerance = 1e-14\nmax_rounds = 1\n",
    );
    let s = write(dir.path(), "s.toml", &format!("{text}\n[[tasks]]\nkind = \"gram\"\nmembers = [\"f\", \"g\"]\n"));
    let o = smeared(&["run", &s, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));
}

#[test]
fn reports_are_deterministic_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = "\n[[tasks]]\nkind = \"gram\"\nmembers = [\"f\", \"g\"]\n\n[[tasks]]\nkind = \"sample\"\nmembers = [\"f\", \"g\"]\ncount = 2000\n";
    let s = write(dir.path(), "s.toml", &format!("{BANK}{tasks}"));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(smeared(&["run", &s, "--out", a.to_str().unwrap(), "--threads", "1"]).status.code(), Some(0));
    let o = Command::new(BIN).args(["run", &s, "--out", b.to_str().unwrap()]).env("SMEARED_THREADS", "3").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(without_timings(&a.join("report.json")), without_timings(&b.join("report.json")));
    assert_eq!(std::fs::read(a.join("sample-1.csv")).unwrap(), std::fs::read(b.join("sample-1.csv")).unwrap());
    let csv = std::fs::read_to_string(a.join("gram-0.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("sheet,row,col,re,im,error"));
    assert_eq!(csv.lines().count(), 1 + 2 * 4);
}

#[test]
fn subcommands_fall_back_to_default_tasks() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s.toml", BANK);
    let out = dir.path().join("o");
    let o = smeared(&["sample", &s, "--count", "500", "--seed", "11", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(r["tasks"][0]["data"]["batch"]["seed"], 11);
    assert_eq!(std::fs::read_to_string(out.join("sample.csv")).unwrap().lines().count(), 501);
    let o = smeared(&["gram", &s, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let o = smeared(&["charfn", &s, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(out.join("charfn-g.csv").exists());
}

#[test]
fn bundled_scenario_passes() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/paper-identities.toml");
    let o = smeared(&["run", scenario.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    for f in ["report.json", "causality.csv", "thermal-law.csv", "vacuum-charfn.csv", "convolution.csv"] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
}

#[test]
fn fast_verify_finishes_within_a_minute() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let o = smeared(&["verify", "--fast", "--out", dir.path().to_str().unwrap()]);
    let elapsed = start.elapsed().as_secs_f64();
    let text = stdout(&o);
    assert!(elapsed < 60.0, "verify --fast took {elapsed:.1} s");
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).collect();
    assert_eq!(rows.len(), 13, "{text}");
    let all_pass = rows.iter().all(|l| l.starts_with("PASS"));
    assert_eq!(o.status.code(), Some(if all_pass { 0 } else { 1 }));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(r["criteria"].as_array().unwrap().len(), 13);
    assert!(dir.path().join("causality.csv").exists());
}
