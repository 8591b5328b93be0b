use clap::{Parser, Subcommand};
use finsler_core::runner::{exit_code_for, resummarize, run_scenario, scan_curvature, RunOptions, EXIT_CHECK_FAILED, EXIT_OK};
use finsler_core::scenario::{CheckKind, Scenario};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "finsler-lab", version, about = "Solve and verify gradient estimates on Finsler metric measure spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and run its checks
    Run {
        scenario: PathBuf,
        /// Output directory (overrides the scenario)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated checks (overrides the scenario)
        #[arg(long)]
        checks: Option<String>,
        /// Refine the grid k times, keeping dt/h² fixed
        #[arg(long, default_value_t = 0)]
        refine: u32,
    },
    /// Sample the weighted Ricci curvature over the scenario's doubled ball
    ScanCurvature {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute pass flags of a finished run from its record files
    Report { dir: PathBuf },
}

fn run(cli: Cli) -> finsler_core::Result<i32> {
    match cli.command {
        Command::Run { scenario, out, seed, checks, refine } => {
            let s = Scenario::load(&scenario)?;
            let checks = checks.as_deref().map(CheckKind::parse_list).transpose()?;
            let outcome = run_scenario(&s, &RunOptions { out, seed, checks, refine })?;
            let sum = &outcome.summary;
            if !sum.hypotheses_violated.is_empty() {
                for h in &sum.hypotheses_violated {
                    eprintln!("hypothesis not met: {h}");
                }
            }
            for c in &sum.checks {
                println!("{}", c.line());
            }
            println!("{} -> {}", if sum.ok { "ok" } else { "FAILED" }, outcome.out_dir.display());
            Ok(sum.exit_code())
        }
        Command::ScanCurvature { scenario, out } => {
            let s = Scenario::load(&scenario)?;
            let (scan, dir) = scan_curvature(&s, out)?;
            println!(
                "samples {}  min ratio {:.6e}  K estimate {:.6e}  K0 part {:.6e} -> {}",
                scan.records.len(),
                scan.min_ratio,
                scan.k_estimate,
                scan.k0_part_max,
                dir.display()
            );
            Ok(EXIT_OK)
        }
        Command::Report { dir } => {
            let (summary, checks) = resummarize(&dir)?;
            let mut ok = true;
            for c in &checks {
                let flag = if c.consistent { "" } else { "  INCONSISTENT with records" };
                println!("{}{flag}", c.check.line());
                ok &= c.consistent && c.check.acceptable();
            }
            println!("{} ({} {})", if ok { "ok" } else { "FAILED" }, summary.tool, summary.version);
            Ok(if ok { EXIT_OK } else { EXIT_CHECK_FAILED })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}
