//! `price`: runs one bounding experiment for a Bermudan put described by a
//! TOML config and writes CSV results plus `metadata.json`.
//!
//! Exit codes: 0 success, 2 bad config, 3 numerical failure, 4 I/O failure.

mod config;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use convexdp::bermudan::{
    bracket_run, build_put_mdp, convergence_sweep, exercise_boundary, lower_table_with,
    write_boundary_csv, write_bracket_csv, write_sweep_csv, BracketConfig, SweepAxis, HOLD,
    UNEXERCISED,
};
use convexdp::extract_policy;
use convexdp::mdp::StepOptions;
use convexdp::pwl::ConvexRepr;
use serde_json::{json, Map, Value};

use config::{Experiment, RunConfig};

#[derive(Parser)]
#[command(
    name = "price",
    version,
    about = "Lower and upper bounds for Bermudan put prices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lower and upper prices at every configured spot.
    Table(RunArgs),
    /// Estimate at the sweep spot for each disturbance sampling size.
    SweepN(RunArgs),
    /// Estimate at the sweep spot for each grid size.
    SweepM(RunArgs),
    /// Exercise boundary per exercise date from the lower bound.
    Boundary(RunArgs),
    /// Bounding functions, value tables, samplings and policy.
    Dump(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("numerical failure: {0}")]
    Numerical(#[from] convexdp::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config { .. } => 2,
            Failure::Numerical(_) => 3,
            Failure::Io { .. } => 4,
        }
    }
}

fn io_failure(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |source| Failure::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Result files, in write order, plus experiment-specific metadata.
#[derive(Default)]
struct Outcome {
    files: Vec<(&'static str, Vec<u8>)>,
    meta: Map<String, Value>,
}

impl Outcome {
    fn file(&mut self, name: &'static str, write: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) {
        let mut buf = Vec::new();
        write(&mut buf).expect("writing to memory");
        self.files.push((name, buf));
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match cli.command {
        Command::Table(a) => (Experiment::Table, a),
        Command::SweepN(a) => (Experiment::SweepN, a),
        Command::SweepM(a) => (Experiment::SweepM, a),
        Command::Boundary(a) => (Experiment::Boundary, a),
        Command::Dump(a) => (Experiment::Dump, a),
    };
    match run(experiment, &args) {
        Ok(dir) => {
            println!("price {}: wrote {}", experiment.as_str(), dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("price: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(experiment: Experiment, args: &RunArgs) -> Result<PathBuf, Failure> {
    let text = fs::read_to_string(&args.config).map_err(io_failure(&args.config))?;
    let config_error = |message: String| Failure::Config {
        path: args.config.clone(),
        message,
    };
    let config = RunConfig::parse(&text).map_err(config_error)?;
    config.validate(experiment).map_err(config_error)?;

    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.into())
            .build_global()
            .expect("global pool is configured once");
    }
    let out_dir = args
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    fs::create_dir_all(&out_dir).map_err(io_failure(&out_dir))?;

    let wall = Instant::now();
    let cpu = cpu_seconds();
    let outcome = match dispatch(experiment, &config) {
        Err(convexdp::Error::NotNested(m)) => {
            return Err(config_error(format!("[sweep] values: {m}")));
        }
        other => other?,
    };
    let wall_seconds = wall.elapsed().as_secs_f64();
    let cpu_seconds = cpu_seconds() - cpu;

    let mut names = Vec::new();
    for (name, bytes) in &outcome.files {
        let path = out_dir.join(name);
        fs::write(&path, bytes).map_err(io_failure(&path))?;
        names.push(*name);
    }
    let mut timings = Map::new();
    timings.insert("wall_seconds".into(), json!(wall_seconds));
    timings.insert("cpu_seconds".into(), json!(cpu_seconds));
    let mut meta = outcome.meta;
    if let Some(Value::Object(t)) = meta.remove("timings") {
        timings.extend(t);
    }
    let metadata = json!({
        "experiment": experiment.as_str(),
        "version": env!("CARGO_PKG_VERSION"),
        "config_file": args.config,
        "config": config,
        "seed": config.sampling.seed,
        "threads": rayon::current_num_threads(),
        "timings": timings,
        "outputs": names,
        "details": meta,
    });
    let path = out_dir.join("metadata.json");
    let body = serde_json::to_string_pretty(&metadata).expect("metadata serializes") + "\n";
    fs::write(&path, body).map_err(io_failure(&path))?;
    Ok(out_dir)
}

fn dispatch(experiment: Experiment, config: &RunConfig) -> convexdp::Result<Outcome> {
    let spec = config.put_spec();
    let grid = config.grid()?;
    let options = StepOptions {
        single_projection: config.induction.single_projection,
    };
    let bracket = || {
        bracket_run(
            &spec,
            &BracketConfig {
                grid: grid.clone(),
                n: config.sampling.n,
                mass: config.sampling.truncation_mass,
                lower_sampling: config.lower_sampling(),
                options,
            },
        )
    };
    let mut out = Outcome::default();
    match experiment {
        Experiment::Table => {
            let run = bracket()?;
            out.file("table.csv", |w| write_bracket_csv(&run.rows, w));
            out.meta.insert(
                "timings".into(),
                json!({ "lower_seconds": run.lower_seconds, "upper_seconds": run.upper_seconds }),
            );
            out.meta.insert(
                "left_extension_conflicts".into(),
                json!(run.upper.meta().left_extension_conflicts),
            );
        }
        Experiment::SweepN | Experiment::SweepM => {
            let (axis, name) = if experiment == Experiment::SweepN {
                (SweepAxis::N, "sweep_n.csv")
            } else {
                (SweepAxis::M, "sweep_m.csv")
            };
            let points = convergence_sweep(&spec, &config.sweep_request(axis))?;
            out.file(name, |w| write_sweep_csv(&points, w));
        }
        Experiment::Boundary => {
            let start = Instant::now();
            let (table, plan) = lower_table_with(
                &spec,
                &grid,
                config.sampling.n,
                config.lower_sampling(),
                options,
            )?;
            let boundary = exercise_boundary(&spec, &table, &plan)?;
            out.file("boundary.csv", |w| write_boundary_csv(&boundary, w));
            out.meta.insert(
                "timings".into(),
                json!({ "lower_seconds": start.elapsed().as_secs_f64() }),
            );
        }
        Experiment::Dump => {
            let run = bracket()?;
            let model = build_put_mdp(&spec)?;
            let policy = extract_policy(&run.lower, &model, &run.lower_plan)?;
            out.file("lower_v0.csv", |w| {
                run.lower.entry(0, UNEXERCISED).write_csv(w)
            });
            out.file("upper_v0.csv", |w| {
                run.upper.entry(0, UNEXERCISED).write_csv(w)
            });
            out.file("lower_values.csv", |w| run.lower.write_csv(w));
            out.file("upper_values.csv", |w| run.upper.write_csv(w));
            // step 0's sampling; local averages and extreme points are shared by all steps
            out.file("lower_sampling.csv", |w| {
                run.lower_plan.get(0, HOLD).write_csv(w)
            });
            out.file("upper_sampling.csv", |w| {
                run.upper_plan.get(0, HOLD).write_csv(w)
            });
            out.file("policy.csv", |w| policy.write_csv(w));
            out.meta.insert(
                "timings".into(),
                json!({ "lower_seconds": run.lower_seconds, "upper_seconds": run.upper_seconds }),
            );
        }
    }
    Ok(out)
}

/// Process CPU time in seconds.
fn cpu_seconds() -> f64 {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: `ts` is a valid, writable timespec for the duration of the call.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_PROCESS_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return f64::NAN;
    }
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}
