//! Acceptance criteria at their pinned tolerances, one summary line each.
//!
//! Runs without the libtest harness so the lines always reach the output.
//! Optional arguments select criteria by id or tag; `--fast` uses reduced sizes.

use std::process::ExitCode;

use smeared_core::verification::{info, run_suite, VerifyOptions};

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let fast = args.iter().any(|a| a == "--fast");
    let mut only = Vec::new();
    for a in args.iter().filter(|a| !a.starts_with('-')) {
        match info(a) {
            Some(i) => only.push(i),
            None => {
                eprintln!("unknown criterion {a}");
                return ExitCode::from(2);
            }
        }
    }
    let opts = VerifyOptions { fast, ..VerifyOptions::default() };
    let mut failed = 0;
    for (i, r) in run_suite(&opts, &only) {
        match r {
            Ok(r) => {
                println!("{}", r.summary_line());
                failed += usize::from(!r.passed);
            }
            Err(e) => {
                println!("[FAIL] criterion {:>2} {:<12} error: {e}", i.id, i.tag);
                failed += 1;
            }
        }
    }
    println!("acceptance: {failed} of {} criteria failed", if only.is_empty() { 13 } else { only.len() });
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
