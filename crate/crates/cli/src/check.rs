//! The `check` subcommand: runs the property suite and writes
//! diagnostics.json.

use std::path::Path;

use hsbnn_core::diagnostics::{run_all, DiagnosticsReport, InjectedFault};

use crate::{CliError, CliResult};

pub fn run(seed: u64, fault: Option<&str>, out_dir: Option<&Path>) -> CliResult<DiagnosticsReport> {
    let fault = match fault {
        None => None,
        Some("doubled-gradient") => Some(InjectedFault::DoubledGradient),
        Some(other) => {
            return Err(CliError::usage(format!("unknown fault '{other}'")));
        }
    };
    let report = run_all(seed, fault);
    for c in &report.checks {
        println!(
            "check {:<32} {}  statistic={:.6e} threshold={:.1e}",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.statistic,
            c.threshold
        );
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))?;
        std::fs::write(
            dir.join("diagnostics.json"),
            serde_json::to_string_pretty(&report).expect("serializable") + "\n",
        )
        .map_err(|e| CliError::runtime(format!("cannot write diagnostics.json: {e}")))?;
    }
    Ok(report)
}
