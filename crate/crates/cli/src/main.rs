use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lsfp_core::harness::{self, verify_dir, write_atomic, META_FILE};
use lsfp_core::{run_experiment, Algo, AlgoSpec, ExperimentConfig, ProblemKind, Termination};

const EXIT_INVALID: u8 = 1;
const EXIT_VIOLATIONS: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "lsfp",
    version,
    about = "Line-search fixed point solvers and benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one trajectory from one random starting point.
    Solve(SolveArgs),
    /// Run one algorithm over several random starting points.
    Experiment(ExperimentArgs),
    /// Run every algorithm on both benchmark problems and tabulate the results.
    Reproduce(ReproduceArgs),
    /// Replay recorded traces and re-check every accepted step.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Problem {
    Qp,
    Gcfp,
}

impl From<Problem> for ProblemKind {
    fn from(p: Problem) -> Self {
        match p {
            Problem::Qp => ProblemKind::QpBall,
            Problem::Gcfp => ProblemKind::Gcfp,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Scale {
    /// Dimensions 100 and 1000, 20 samples.
    Desk,
    /// Dimensions 1000 and 10000, 100 samples (long-running).
    Paper,
}

#[derive(Debug, Args)]
struct AlgoArgs {
    /// sd1, sd2, sd3, fr, prp+, hs+, dy or hz.
    #[arg(long, default_value = "sd3", value_parser = parse_algo)]
    algo: Algo,
    #[arg(long, default_value_t = 0.3)]
    delta: f64,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long, default_value_t = 10)]
    max_iters: usize,
    /// Stop once the residual norm is at most this value.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
}

impl AlgoArgs {
    fn spec(&self) -> AlgoSpec {
        AlgoSpec {
            algo: self.algo,
            delta: self.delta,
            sigma: self.sigma,
            max_iters: self.max_iters,
            residual_tol: self.tol,
        }
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long, value_enum)]
    problem: Problem,
    #[arg(long, default_value_t = 100)]
    dim: usize,
    /// Seeds both the instance and the starting point.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    algo: AlgoArgs,
    /// Output directory.
    #[arg(long, env = "LSFP_OUT_DIR", default_value = "lsfp-out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long, value_enum)]
    problem: Problem,
    #[arg(long, default_value_t = 1000)]
    dim: usize,
    /// Number of random starting points.
    #[arg(long, default_value_t = 20)]
    samples: usize,
    /// Seed of the problem instance.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Starting point i uses seed `seed_base + i`.
    #[arg(long, default_value_t = 0)]
    seed_base: u64,
    #[command(flatten)]
    algo: AlgoArgs,
    #[arg(long, env = "LSFP_OUT_DIR", default_value = "lsfp-out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    #[arg(long, value_enum, default_value = "desk")]
    scale: Scale,
    #[arg(long, env = "LSFP_OUT_DIR", default_value = "lsfp-out")]
    out_dir: PathBuf,
    /// Seed of the problem instances.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// An output directory of solve/experiment, or any directory containing them.
    #[arg(long, env = "LSFP_OUT_DIR", default_value = "lsfp-out")]
    dir: PathBuf,
}

fn parse_algo(s: &str) -> Result<Algo, String> {
    s.parse().map_err(|e: lsfp_core::Error| e.to_string())
}

fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

fn exit_code(t: Termination) -> u8 {
    match t {
        Termination::ResidualZero => 0,
        Termination::IterationCap => 2,
        Termination::LinesearchFailure => 3,
    }
}

fn cmd_solve(args: &SolveArgs) -> anyhow::Result<u8> {
    let mut cfg = ExperimentConfig::new(args.algo.spec(), args.problem.into(), args.dim, 1);
    cfg.instance_seed = args.seed;
    cfg.seed_base = args.seed;
    cfg.out_dir = Some(args.out.clone());
    cfg.command = command_line();
    let report = run_experiment(&cfg)?;
    let run = &report.traces[0];
    println!("algo={}", report.algo_name);
    println!("instance={}", report.descriptor);
    println!("iterations={}", run.executed_steps());
    println!("final_residual={:.6e}", run.final_residual());
    println!("termination={}", run.terminated_by.name());
    println!("trace={}", args.out.join(harness::TRACE_FILE).display());
    Ok(exit_code(run.terminated_by))
}

fn cmd_experiment(args: &ExperimentArgs) -> anyhow::Result<u8> {
    let mut cfg = ExperimentConfig::new(args.algo.spec(), args.problem.into(), args.dim, args.samples);
    cfg.instance_seed = args.seed;
    cfg.seed_base = args.seed_base;
    cfg.out_dir = Some(args.out.clone());
    cfg.command = command_line();
    let report = run_experiment(&cfg)?;
    print!("{}", report.summary_text(&cfg));
    let aborted = report
        .traces
        .iter()
        .filter(|t| t.terminated_by == Termination::LinesearchFailure)
        .count();
    println!("aborted_samples={aborted}");
    Ok(0)
}

fn cmd_reproduce(args: &ReproduceArgs) -> anyhow::Result<u8> {
    let (dims, samples): (&[usize], usize) = match args.scale {
        Scale::Desk => (&[100, 1000], 20),
        Scale::Paper => (&[1000, 10_000], 100),
    };
    let mut table = String::new();
    let mut failed_cells = 0;
    for kind in [ProblemKind::QpBall, ProblemKind::Gcfp] {
        let _ = writeln!(table, "# {kind}: SR [%] (I={samples})");
        let header: Vec<String> = dims.iter().map(|d| format!("d={d}")).collect();
        let _ = writeln!(table, "{:<6} {}", "algo", header.join(" "));
        for algo in Algo::ALL {
            let mut cells = Vec::new();
            for &dim in dims {
                let mut cfg = ExperimentConfig::new(AlgoSpec::new(algo), kind, dim, samples);
                cfg.instance_seed = args.seed;
                cfg.out_dir = Some(
                    args.out_dir
                        .join(kind.name())
                        .join(format!("d{dim}"))
                        .join(algo.slug()),
                );
                cfg.command = command_line();
                match run_experiment(&cfg) {
                    Ok(report) => cells.push(format!("{:>8.1}", report.sr_percent)),
                    Err(e) => {
                        eprintln!("{kind} d={dim} {algo}: {e}");
                        failed_cells += 1;
                        cells.push(format!("{:>8}", "failed"));
                    }
                }
            }
            let _ = writeln!(table, "{:<6} {}", algo.name(), cells.join(" "));
        }
        table.push('\n');
    }
    let path = args.out_dir.join("sr_table.txt");
    write_atomic(&path, &table)?;
    print!("{table}");
    println!("table={}", path.display());
    if failed_cells > 0 {
        bail!("{failed_cells} cells failed");
    }
    Ok(0)
}

fn experiment_dirs(root: &Path, found: &mut Vec<PathBuf>) -> anyhow::Result<()> {
    if root.join(META_FILE).is_file() {
        found.push(root.to_path_buf());
        return Ok(());
    }
    let mut entries = std::fs::read_dir(root)
        .with_context(|| format!("reading {}", root.display()))?
        .collect::<Result<Vec<_>, _>>()?;
    entries.sort_by_key(|e| e.path());
    for entry in entries {
        if entry.file_type()?.is_dir() {
            experiment_dirs(&entry.path(), found)?;
        }
    }
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> anyhow::Result<u8> {
    let mut dirs = Vec::new();
    experiment_dirs(&args.dir, &mut dirs)?;
    if dirs.is_empty() {
        bail!("no recorded runs under {}", args.dir.display());
    }
    let (mut checked, mut violations) = (0, 0);
    for dir in &dirs {
        let report = verify_dir(dir).with_context(|| format!("verifying {}", dir.display()))?;
        for v in &report.violations {
            println!(
                "{}: sample {} iter {}: {}",
                dir.display(),
                v.sample,
                v.iter,
                v.reason
            );
        }
        checked += report.checked;
        violations += report.violations.len();
    }
    println!(
        "runs={} checked_steps={checked} violations={violations}",
        dirs.len()
    );
    Ok(if violations == 0 { 0 } else { EXIT_VIOLATIONS })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_INVALID);
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Reproduce(a) => cmd_reproduce(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}
