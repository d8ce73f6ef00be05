use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use smeared_core::verification::{info, run_suite, CriterionInfo, VerifyOptions};
use smeared_core::Error;

mod scenario;
mod tasks;

use scenario::{ConfigError, Loaded, SourceConfig, StateConfig, TaskConfig};
use tasks::{run_task, FailureClass, Report};

/// Scenario runner for smeared-field verification suites.
#[derive(Debug, Parser)]
#[command(name = "smeared", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Output directory for report.json and per-task CSV files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized fixtures and samplers.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, env = "SMEARED_THREADS")]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every task of a scenario file.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the built-in acceptance criteria.
    Verify {
        /// Reduced sizes and cutoffs.
        #[arg(long)]
        fast: bool,
        /// Restrict to criteria by tag or number (repeatable).
        #[arg(long, value_name = "TAG")]
        only: Vec<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Gram matrices: the scenario's gram tasks, or one over the whole bank.
    Gram {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Characteristic functions: the scenario's charfn tasks, or vacuum phi for each real bank member.
    Charfn {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Classical samples: the scenario's sample tasks, or vacuum draws over the real bank members.
    Sample {
        scenario: PathBuf,
        /// Draw count for the default task.
        #[arg(long, default_value_t = 10_000)]
        count: usize,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Run { common, .. }
        | Command::Verify { common, .. }
        | Command::Gram { common, .. }
        | Command::Charfn { common, .. }
        | Command::Sample { common, .. } => common,
    };
    if let Some(t) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot configure {t} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    let code = match &cli.command {
        Command::Verify { fast, only, common } => verify(*fast, only, common),
        Command::Run { scenario, common } => scenario_command(scenario, common, |_| None),
        Command::Gram { scenario, common } => scenario_command(scenario, common, |l| Some(select(l, "gram", default_gram))),
        Command::Charfn { scenario, common } => scenario_command(scenario, common, |l| Some(select(l, "charfn", default_charfn))),
        Command::Sample { scenario, count, common } => {
            let count = *count;
            scenario_command(scenario, common, move |l| Some(select(l, "sample", |l| default_sample(l, count))))
        }
    };
    ExitCode::from(code)
}

/// Tasks of `kind`, or the defaults when the scenario has none.
fn select(l: &Loaded, kind: &str, defaults: impl Fn(&Loaded) -> Vec<TaskConfig>) -> Vec<TaskConfig> {
    let chosen: Vec<TaskConfig> = l.scenario.tasks.iter().filter(|t| t.kind() == kind).cloned().collect();
    if chosen.is_empty() {
        defaults(l)
    } else {
        chosen
    }
}

fn real_members(l: &Loaded) -> Vec<String> {
    l.bank.iter().filter(|(_, f)| f.reality_defect() <= 1e-10).map(|(n, _)| n.clone()).collect()
}

fn default_gram(l: &Loaded) -> Vec<TaskConfig> {
    if l.bank.is_empty() {
        return Vec::new();
    }
    vec![TaskConfig::Gram { name: Some("gram".into()), members: l.names(), sheet: Default::default() }]
}

fn default_charfn(l: &Loaded) -> Vec<TaskConfig> {
    real_members(l)
        .into_iter()
        .map(|m| TaskConfig::Charfn {
            name: Some(format!("charfn-{m}")),
            function: m,
            observable: scenario::ObservableChoice::Phi,
            alpha: 1.0,
            beta: 1.0,
            state: StateConfig::Vacuum,
            lambda_max: 3.0,
            points: 13,
            cutoff: Some(20),
            normalize: true,
        })
        .collect()
}

fn default_sample(l: &Loaded, count: usize) -> Vec<TaskConfig> {
    let members = real_members(l);
    if members.is_empty() {
        return Vec::new();
    }
    vec![TaskConfig::Sample { name: Some("sample".into()), members, source: SourceConfig::Vacuum, count, seed: None }]
}

fn report_config_error(e: &ConfigError) -> u8 {
    eprintln!("error: {e}");
    2
}

fn scenario_command(path: &Path, common: &Common, pick: impl Fn(&Loaded) -> Option<Vec<TaskConfig>>) -> u8 {
    let loaded = match scenario::load(path) {
        Ok(l) => l,
        Err(e) => return report_config_error(&e),
    };
    let tasks = pick(&loaded).unwrap_or_else(|| loaded.scenario.tasks.clone());
    let seed = common.seed.or(loaded.scenario.seed).unwrap_or(0);
    let out = common
        .out
        .clone()
        .or_else(|| loaded.scenario.output.clone())
        .unwrap_or_else(|| PathBuf::from("smeared-out").join(&loaded.scenario.name));
    let mut reports = Vec::new();
    let mut files = Vec::new();
    for (i, t) in tasks.iter().enumerate() {
        let o = run_task(&loaded, t, i, seed);
        let r = &o.report;
        match &r.error {
            Some(e) => println!("[FAIL] {:<24} {:<20} error: {e}", r.name, r.kind),
            None => {
                let worst = r.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect::<Vec<_>>();
                println!(
                    "[{}] {:<24} {:<20} {} checks{} ({:.2} s)",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.kind,
                    r.checks.len(),
                    if worst.is_empty() { String::new() } else { format!(", failed: {}", worst.join(", ")) },
                    r.seconds
                );
            }
        }
        if let (Some(name), Some(csv)) = (&r.csv, o.csv) {
            files.push((name.clone(), csv));
        }
        reports.push(o.report);
    }
    let hbar = loaded.scenario.quadrature.hbar.unwrap_or(1.0);
    let report = Report::new(&loaded.scenario.name, hbar, reports);
    if let Err(e) = write_outputs(&out, &serde_json::to_value(&report).expect("report serializes"), &files) {
        eprintln!("error: cannot write outputs to {}: {e}", out.display());
        return 2;
    }
    println!("report written to {}", out.join("report.json").display());
    report.exit_code()
}

fn write_outputs(dir: &Path, report: &serde_json::Value, files: &[(String, String)]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    std::fs::write(dir.join("report.json"), text)?;
    for (name, content) in files {
        std::fs::write(dir.join(name), content)?;
    }
    Ok(())
}

fn verify(fast: bool, only: &[String], common: &Common) -> u8 {
    let mut selected: Vec<CriterionInfo> = Vec::new();
    for tag in only {
        match info(tag) {
            Some(i) => selected.push(i),
            None => {
                eprintln!("error: --only {tag}: unknown criterion; known tags: {}", known_tags());
                return 2;
            }
        }
    }
    let opts = VerifyOptions { fast, seed: common.seed.unwrap_or(VerifyOptions::default().seed) };
    let mut entries = Vec::new();
    let mut files = Vec::new();
    let mut worst: Option<FailureClass> = None;
    println!("{:<6} {:>2}  {:<12} {:>11} {:>9} {:>8}  detail", "status", "id", "tag", "measured", "tolerance", "seconds");
    for (i, r) in run_suite(&opts, &selected) {
        match r {
            Ok(r) => {
                println!(
                    "{:<6} {:>2}  {:<12} {:>11.3e} {:>9.1e} {:>8.2}  {}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.id,
                    r.tag,
                    r.measured,
                    r.tolerance,
                    r.seconds,
                    r.detail
                );
                if !r.passed {
                    worst = worst.max(Some(FailureClass::Assertion));
                }
                if let Some(csv) = &r.csv {
                    files.push((format!("{}.csv", r.tag), csv.clone()));
                }
                entries.push(serde_json::to_value(&r).expect("criterion serializes"));
            }
            Err(e) => {
                println!("{:<6} {:>2}  {:<12} error: {e}", "FAIL", i.id, i.tag);
                let class = match e {
                    Error::NonConvergence { .. } => FailureClass::NonConvergence,
                    _ => FailureClass::Assertion,
                };
                worst = worst.max(Some(class));
                entries.push(json!({ "id": i.id, "tag": i.tag, "title": i.title, "passed": false, "error": e.to_string() }));
            }
        }
    }
    let failed = entries.iter().filter(|e| e["passed"] != json!(true)).count();
    println!("{} of {} criteria passed", entries.len() - failed, entries.len());
    let report = json!({
        "scenario": if fast { "verify-fast" } else { "verify" },
        "conventions": {
            "metric_signature": smeared_core::METRIC_CONVENTION,
            "fourier_sign": smeared_core::FOURIER_CONVENTION,
            "hbar": 1.0,
        },
        "versions": {
            "smeared": env!("CARGO_PKG_VERSION"),
            "generator": smeared_core::randomfield::GENERATOR_VERSION,
        },
        "seed": opts.seed,
        "passed": failed == 0,
        "criteria": entries,
    });
    if let Some(out) = &common.out {
        if let Err(e) = write_outputs(out, &report, &files) {
            eprintln!("error: cannot write outputs to {}: {e}", out.display());
            return 2;
        }
        println!("report written to {}", out.join("report.json").display());
    }
    worst.map_or(0, FailureClass::exit_code)
}

fn known_tags() -> String {
    smeared_core::verification::CRITERIA.iter().map(|c| c.tag).collect::<Vec<_>>().join(", ")
}
