//! `insq`: generate scenarios, run and verify them headless, or serve the API.
//!
//! Exit codes: 0 success, 1 usage, 2 verification failure, 3 runtime error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use insq_core::scenario::{
    generate_random, GenerateParams, DEFAULT_K, DEFAULT_NETWORK_RHO, DEFAULT_PLANE_RHO,
};
use insq_core::sim::{
    brute_force_oracle, compare_runs, metrics_csv, reports_jsonl, DiffReport, RunOutput,
};
use insq_core::{load_scenario, run_simulation, save_scenario, Mode};
use insq_service::ServiceConfig;

const USAGE: u8 = 1;
const VERIFY_FAILED: u8 = 2;
const RUNTIME: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "insq",
    version,
    about = "Moving k-nearest-neighbor queries with influential neighbor sets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Plane,
    Network,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Plane => Mode::Plane,
            ModeArg::Network => Mode::Network,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a random scenario.
    Generate {
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Number of sites [default: 100 in the plane, a quarter of the grid vertices on a network]
        #[arg(long)]
        n: Option<usize>,
        /// Grid size in vertices, e.g. 20x20 (network mode)
        #[arg(long, value_parser = parse_grid)]
        grid: Option<(u32, u32)>,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        /// Prefetch ratio [default: 1.6 in the plane, 1 on a network]
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, default_value_t = 2000)]
        ticks: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; standard output when omitted
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a scenario and print summary counters.
    Run {
        #[arg(short, long)]
        input: PathBuf,
        /// Per-tick metrics table (CSV)
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Per-tick reports, one JSON document per line
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Check every tick of a run against brute force; exit 2 on any mismatch.
    Verify {
        #[arg(short, long)]
        input: PathBuf,
    },
    /// Serve the session API and stream.
    Serve {
        #[arg(long, env = "INSQ_PORT", default_value_t = 8080)]
        port: u16,
        /// Directory with the UI bundle, served at /
        #[arg(long = "static", env = "INSQ_STATIC")]
        static_dir: Option<PathBuf>,
        /// Idle minutes before a session is dropped
        #[arg(long, env = "INSQ_SESSION_TTL", default_value_t = 30)]
        session_ttl: u64,
    },
}

fn parse_grid(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let dim = |v: &str| {
        v.trim()
            .parse::<u32>()
            .map_err(|e| format!("bad grid size {v:?}: {e}"))
    };
    Ok((dim(w)?, dim(h)?))
}

/// A failed command: message and exit code.
struct Failure(u8, String);

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure(RUNTIME, e.to_string())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes)
        .map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

fn load(path: &Path) -> Result<insq_core::Scenario, Failure> {
    let bytes =
        std::fs::read(path).map_err(|e| runtime(format!("cannot read {}: {e}", path.display())))?;
    load_scenario(&bytes).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn summary(run: &RunOutput) -> String {
    let m = &run.metrics;
    format!(
        "ticks={} reranks={} swaps={} recomputes={} false_alarms={} knn_changes={} comparisons={} diagram_builds={}",
        run.reports.len(),
        m.reranks,
        m.swaps,
        // the initial computation is not an update
        m.full_recomputes.saturating_sub(1),
        m.false_alarms,
        m.knn_changes,
        m.comparisons,
        run.diagram_builds,
    )
}

fn diff_text(d: &DiffReport) -> String {
    let mut out = format!(
        "ticks={} mismatched={} unsound_valid={} oracle_changes={} engine_events={} engine_recomputes={}\n",
        d.total_ticks,
        d.mismatched_ticks.len(),
        d.unsound_valid_ticks.len(),
        d.oracle_changes,
        d.engine_events,
        d.engine_recomputes,
    );
    for (label, ticks) in [
        ("mismatched ticks", &d.mismatched_ticks),
        ("unsound ticks", &d.unsound_valid_ticks),
    ] {
        if !ticks.is_empty() {
            let shown: Vec<String> = ticks.iter().take(20).map(u64::to_string).collect();
            let more = if ticks.len() > 20 { ", ..." } else { "" };
            let _ = writeln!(out, "{label}: {}{more}", shown.join(", "));
        }
    }
    out.push_str(if d.is_clean() {
        "verified\n"
    } else {
        "FAILED\n"
    });
    out
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Generate {
            mode,
            n,
            grid,
            k,
            rho,
            ticks,
            seed,
            output,
        } => {
            let mode = Mode::from(mode);
            let n = match (mode, n, grid) {
                (_, Some(n), _) => n,
                (Mode::Plane, None, _) => 100,
                (Mode::Network, None, Some((w, h))) => (w as usize * h as usize / 4).max(1),
                (Mode::Network, None, None) => {
                    return Err(Failure(USAGE, "network mode needs --grid WxH".into()))
                }
            };
            let rho = rho.unwrap_or(match mode {
                Mode::Plane => DEFAULT_PLANE_RHO,
                Mode::Network => DEFAULT_NETWORK_RHO,
            });
            let params = GenerateParams {
                mode,
                n,
                grid,
                k,
                rho,
                ticks,
                seed,
            };
            let s = generate_random(&params).map_err(|e| Failure(USAGE, e.to_string()))?;
            let bytes = save_scenario(&s);
            match output {
                Some(path) => write_file(&path, &bytes)?,
                None => print!("{}", String::from_utf8_lossy(&bytes)),
            }
            Ok(())
        }
        Command::Run {
            input,
            metrics,
            report,
        } => {
            let s = load(&input)?;
            let run = run_simulation(&s).map_err(runtime)?;
            if let Some(path) = metrics {
                write_file(&path, metrics_csv(&run.reports).as_bytes())?;
            }
            if let Some(path) = report {
                write_file(&path, reports_jsonl(&run.reports).as_bytes())?;
            }
            println!("{}", summary(&run));
            Ok(())
        }
        Command::Verify { input } => {
            let s = load(&input)?;
            let run = run_simulation(&s).map_err(runtime)?;
            let oracle = brute_force_oracle(&s).map_err(runtime)?;
            let diff = compare_runs(&run.reports, &oracle).map_err(runtime)?;
            print!("{}", diff_text(&diff));
            if diff.is_clean() {
                Ok(())
            } else {
                Err(Failure(
                    VERIFY_FAILED,
                    "engine disagrees with brute force".into(),
                ))
            }
        }
        Command::Serve {
            port,
            static_dir,
            session_ttl,
        } => {
            let config = ServiceConfig {
                port,
                static_dir,
                session_ttl: Duration::from_secs(session_ttl.saturating_mul(60)),
            };
            let rt = tokio::runtime::Runtime::new().map_err(runtime)?;
            rt.block_on(insq_service::serve(config)).map_err(runtime)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, message)) => {
            eprintln!("insq: {message}");
            ExitCode::from(code)
        }
    }
}
