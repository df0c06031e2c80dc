//! `degcz` command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use degcz::config::{Command, ExperimentConfig, Overrides};
use degcz::experiments as ex;
use degcz::output::OutputDir;
use degcz::Error;
use log::{info, warn};

const USAGE: u8 = 1;
const SETUP: u8 = 2;
const NONCONVERGENCE: u8 = 3;
const VIOLATION: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "degcz", version, about = "Experiments for elliptic equations with degenerate matrix weights")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// TOML configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (DEGCZ_OUT takes precedence).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Refinement level or level count of the command.
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[arg(long, global = true)]
    eps: Option<f64>,
    #[arg(long, global = true)]
    p: Option<f64>,
    #[arg(long, global = true)]
    rho: Option<f64>,
    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// BMO, Muckenhoupt and small-oscillation reports for a weight.
    AnalyzeWeight,
    /// Identity, flux and residual checks of an exact solution.
    VerifyExample,
    /// Solve the weighted p-Laplace problem; writes mesh, solution and trace.
    Solve,
    /// Gradient-estimate ratios over eps, rho and refinement levels.
    CzSweep,
    /// Randomized N-function inequality sweep.
    NfunProps,
    /// Summarize the CSV files of the output directory.
    Report,
}

impl Cmd {
    fn command(self) -> Command {
        match self {
            Cmd::AnalyzeWeight => Command::AnalyzeWeight,
            Cmd::VerifyExample => Command::VerifyExample,
            Cmd::Solve => Command::Solve,
            Cmd::CzSweep => Command::CzSweep,
            Cmd::NfunProps => Command::NfunProps,
            Cmd::Report => Command::Report,
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidInput(_) | Error::Config(_) => USAGE,
        Error::NonConvergence { .. } => NONCONVERGENCE,
        _ => SETUP,
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("degcz: {e}");
    ExitCode::from(exit_code(&e))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let cmd = cli.command.command();
    let mut cfg = match &cli.config {
        Some(p) => match ExperimentConfig::load(p) {
            Ok(c) => c,
            Err(e @ Error::Io { .. }) => {
                eprintln!("degcz: {e}");
                return ExitCode::from(USAGE);
            }
            Err(e) => return fail(e),
        },
        None => ExperimentConfig::default(),
    };
    let overrides = Overrides {
        seed: cli.seed,
        threads: cli.threads,
        grid: cli.grid,
        eps: cli.eps,
        p: cli.p,
        rho: cli.rho,
    };
    if let Err(e) = cfg.apply(cmd, &overrides).and_then(|_| cfg.validate(cmd)) {
        return fail(e);
    }
    let out_dir = std::env::var_os("DEGCZ_OUT")
        .map(PathBuf::from)
        .or(cli.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let out = match OutputDir::create(&out_dir, &cfg) {
        Ok(o) => o,
        Err(e) => return fail(e),
    };
    info!("settings hash {} -> {}", out.hash(), out_dir.display());

    let threads = cfg.threads;
    let run = || run(cli.command, &cfg, &out);
    match ex::with_threads(threads, run) {
        Ok(Ok(code)) => ExitCode::from(code),
        Ok(Err(e)) | Err(e) => fail(e),
    }
}

fn list(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run(cmd: Cmd, cfg: &ExperimentConfig, out: &OutputDir) -> degcz::Result<u8> {
    match cmd {
        Cmd::AnalyzeWeight => {
            let rep = ex::run_analyze(cfg)?;
            list(&ex::write_analyze(out, &rep)?);
            println!(
                "bmo(log M) = {:.6e}, bmo(M) = {:.6e} -> {:.6e} under zoom{}",
                rep.bmo_log_m.value,
                rep.bmo_m.value,
                rep.bmo_m_zoomed.value,
                if rep.bmo_m_unbounded { " (unbounded: growing with family refinement)" } else { "" }
            );
            for (p, a) in &rep.ap {
                match a.value() {
                    Some(v) => println!("A_{p} = {v:.6e}"),
                    None => println!("A_{p} divergent"),
                }
            }
            Ok(if rep.consistent { 0 } else { VIOLATION })
        }
        Cmd::VerifyExample => {
            let rep = ex::run_verify(cfg)?;
            list(&ex::write_verify(out, &rep)?);
            for c in &rep.checks {
                println!(
                    "{} {}: {:.3e} (tolerance {:.1e})",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.tolerance
                );
            }
            Ok(if rep.passed { 0 } else { VIOLATION })
        }
        Cmd::Solve => match ex::run_solve(cfg) {
            Ok(o) => {
                list(&ex::write_solve(out, &o)?);
                println!(
                    "{} iterations, residual {:.3e}, {} vertices, bmo(log M) {:.3e}",
                    o.summary.iterations, o.summary.final_residual, o.summary.vertices, o.summary.weight.bmo_log_m
                );
                Ok(0)
            }
            Err(Error::NonConvergence { reason, trace }) => {
                list(&[ex::write_trace(out, &trace)?]);
                Err(Error::NonConvergence { reason, trace })
            }
            Err(e) => Err(e),
        },
        Cmd::CzSweep => {
            let rep = ex::run_sweep(cfg)?;
            list(&ex::write_sweep(out, cfg, &rep)?);
            for b in &rep.boundaries {
                match b.detected {
                    Some(d) => println!("eps {} ball {}: boundary {d} (critical {})", b.eps, b.ball_id, b.critical_rho),
                    None => println!("eps {} ball {}: no boundary in the rho grid", b.eps, b.ball_id),
                }
            }
            if !rep.failures.is_empty() {
                warn!("{} sweep cells failed; see sweep.json", rep.failures.len());
            }
            Ok(0)
        }
        Cmd::NfunProps => {
            let rep = ex::run_nfun(cfg)?;
            list(&ex::write_nfun(out, &rep)?);
            for (p, c) in &rep.hammer {
                println!("p = {p}: hammer constant {c:.4}");
            }
            if !rep.hammer_within_limit() {
                warn!("hammer constant above {} for some p", rep.hammer_limit);
            }
            println!("{} violations", rep.violations);
            Ok(if rep.violations == 0 { 0 } else { VIOLATION })
        }
        Cmd::Report => {
            let rep = ex::run_report(out.root())?;
            list(&ex::write_report(out, &rep)?);
            for f in &rep {
                println!("{}: {} rows", f.file, f.rows);
            }
            Ok(0)
        }
    }
}
