//! `coloc`: run collaborative-localization experiments from the command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use coloc::eval::{evaluate, DEFAULT_MAX_DT};
use coloc::experiment::{render_table, run_seeds, run_sweep, write_run_outputs, write_sweep_outputs, ExperimentConfig};
use coloc::io::{export_trajectory, generate_synthetic, load_trajectory};
use coloc::{AlignmentMode, Error, ErrorClass, PathKind, SyntheticSpec};

#[derive(Parser, Debug)]
#[command(name = "coloc", version, about = "Collaborative two-vehicle localization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the pipeline once per seed and write report.json, fused.csv,
    /// baseline.csv and errors.csv.
    ///
    /// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.
    Run(RunArgs),
    /// Run every (sigma, gamma) cell of the config's sweep grid plus the
    /// no-perception baseline and write report.json, table.txt and one
    /// directory per cell.
    ///
    /// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.
    Sweep(SweepArgs),
    /// Generate a synthetic leader/follower pair as smart.csv and adas.csv.
    ///
    /// Exit codes: 0 success, 1 usage, 2 data error.
    Gen(GenArgs),
    /// Compare an estimated trajectory against ground truth and print the
    /// error statistics as JSON.
    ///
    /// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
struct Overrides {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed to run; may repeat. Replaces the config's seed list.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Trajectory alignment before scoring; overrides the config.
    #[arg(long)]
    align: Option<AlignmentMode>,
    /// Association tolerance in seconds; overrides the config.
    #[arg(long)]
    max_dt: Option<f64>,
}

impl Overrides {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf), Error> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if !self.seeds.is_empty() {
            cfg.seeds = self.seeds.clone();
        }
        if let Some(a) = self.align {
            cfg.eval.align = a;
        }
        if let Some(dt) = self.max_dt {
            cfg.eval.max_dt = dt;
        }
        cfg.validate()?;
        // the report echoes the config, so --out is kept out of it
        let out = self
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .ok_or_else(|| Error::Config("no output directory: pass --out or set `output_dir`".into()))?;
        Ok((cfg, out))
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Overrides,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Overrides,
    /// Run cells one after another instead of on a worker pool.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// straight, circle, figure-eight or waypoint-spline.
    #[arg(long, default_value = "figure-eight")]
    kind: PathKind,
    /// Seconds.
    #[arg(long, default_value_t = 120.0)]
    duration: f64,
    /// Hz.
    #[arg(long, default_value_t = 200.0)]
    rate: f64,
    /// m/s.
    #[arg(long)]
    speed: Option<f64>,
    /// Seed for the waypoint spline.
    #[arg(long)]
    seed: Option<u64>,
    /// Distance the follower trails the leader, metres.
    #[arg(long)]
    gap: Option<f64>,
    /// Path scale, metres.
    #[arg(long)]
    size: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Estimated trajectory CSV.
    #[arg(long)]
    est: PathBuf,
    /// Ground-truth trajectory CSV.
    #[arg(long)]
    gt: PathBuf,
    /// none, se3 or yaw-only.
    #[arg(long, default_value = "se3")]
    align: AlignmentMode,
    /// Association tolerance in seconds.
    #[arg(long, default_value_t = DEFAULT_MAX_DT)]
    max_dt: f64,
}

fn create_dir(dir: &PathBuf) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn run(args: RunArgs) -> Result<(), Error> {
    let (cfg, out) = args.common.load()?;
    let (report, runs) = run_seeds(&cfg)?;
    write_run_outputs(&out, &report, &runs)?;
    for s in &report.seeds {
        println!(
            "seed {}: fused {:.3} m, baseline {:.3} m",
            s.seed, s.fused.translation.rmse, s.baseline.translation.rmse
        );
    }
    println!(
        "mean translation RMSE: fused {:.3} m, baseline {:.3} m",
        report.fused_translation_rmse_mean, report.baseline_translation_rmse_mean
    );
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), Error> {
    let (cfg, out) = args.common.load()?;
    let report = run_sweep(&cfg, !args.sequential)?;
    write_sweep_outputs(&out, &report)?;
    print!("{}", render_table(&report));
    eprintln!("wall clock: {:.2} s", report.wall_clock_seconds);
    let failures: usize = report
        .cells
        .iter()
        .flat_map(|c| &c.seeds)
        .filter(|s| s.error.is_some())
        .count();
    if failures > 0 {
        eprintln!("warning: {failures} seed run(s) failed; see report.json");
    }
    Ok(())
}

fn gen(args: GenArgs) -> Result<(), Error> {
    let d = SyntheticSpec::default();
    let spec = SyntheticSpec {
        kind: args.kind,
        duration: args.duration,
        rate: args.rate,
        speed: args.speed.unwrap_or(d.speed),
        seed: args.seed.unwrap_or(d.seed),
        gap: args.gap.unwrap_or(d.gap),
        size: args.size.unwrap_or(d.size),
        ..d
    };
    let (smart, adas) = generate_synthetic(&spec)?;
    create_dir(&args.out)?;
    export_trajectory(&smart, args.out.join("smart.csv"))?;
    export_trajectory(&adas, args.out.join("adas.csv"))?;
    Ok(())
}

fn eval(args: EvalArgs) -> Result<(), Error> {
    if !(args.max_dt > 0.0) {
        return Err(Error::InvalidParameter(format!("max_dt must be > 0, got {}", args.max_dt)));
    }
    let est = load_trajectory(&args.est)?;
    let gt = load_trajectory(&args.gt)?;
    let stats = evaluate(&est.samples, &gt.samples, args.align, args.max_dt)?;
    println!("{}", serde_json::to_string_pretty(&stats).expect("stats serialize"));
    Ok(())
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Usage => 1,
        ErrorClass::Data => 2,
        ErrorClass::Numeric => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let res = match cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Gen(a) => gen(a),
        Command::Eval(a) => eval(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
