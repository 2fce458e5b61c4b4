//! `sdrift`: run experiments, sweep hyperparameters, generate streams and
//! serve the annotation API.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 config or usage error.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sdrift_core::eval::{emit_report, run_experiment, sweep, ExperimentConfig, Grid};
use sdrift_core::streams::write_csv_stream;
use sdrift_core::Error;

#[derive(Parser)]
#[command(name = "sdrift", version, about = "Explanation-based drift detection on confounded streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (learner, detector, seed) cell of a config and write reports.
    Run {
        config: PathBuf,
        /// Validate and print the resolved config without running.
        #[arg(long)]
        dry_run: bool,
        /// Overrides `output_dir`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Pick hyperparameters on the confounded validation prefix.
    Sweep {
        config: PathBuf,
        grid: PathBuf,
        /// Where to write the chosen config; defaults to `<config>.chosen.toml`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the session API, using `config` for requests that carry none.
    Serve {
        config: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
    },
    /// Write a generated stream to CSV.
    Gen {
        dataset: GenDataset,
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Stream length; defaults to the dataset's natural length.
        #[arg(long)]
        total: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GenDataset {
    Stagger,
    CStagger,
    Electricity,
    CElectricity,
}

/// Failure split by exit code.
enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidArgument(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    ExperimentConfig::load(path).map_err(|e| match e {
        Error::Io(io) => Failure::Config(format!("cannot read {}: {io}", path.display())),
        other => Failure::Config(other.to_string()),
    })
}

fn runtime(context: &str, e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(format!("{context}: {e}"))
}

fn cmd_run(config: &Path, dry_run: bool, output: Option<PathBuf>) -> Result<(), Failure> {
    let mut cfg = load_config(config)?;
    if let Some(dir) = output {
        cfg.output_dir = Some(dir);
    }
    if dry_run {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let root = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    let out = run_experiment(&cfg)?;
    let schema = cfg.schema()?;
    emit_report(&out, &schema, &root).map_err(|e| runtime("writing report", e))?;
    println!("{:<4} {:<6} {:>5} {:>8} {:>6} {:>5} {:>8}", "lrn", "det", "seed", "detected", "missed", "fa", "queries");
    for c in &out.report.cells {
        println!(
            "{:<4} {:<6} {:>5} {:>8} {:>6} {:>5} {:>8}",
            c.learner.to_string(),
            c.detector.to_string(),
            c.seed,
            c.outcome.detected,
            c.outcome.missed,
            c.outcome.false_alarms,
            c.query_count
        );
    }
    println!("wrote {}", root.join("summary.json").display());
    Ok(())
}

fn cmd_sweep(config: &Path, grid: &Path, out: Option<PathBuf>) -> Result<(), Failure> {
    let base = load_config(config)?;
    let grid = Grid::load(grid).map_err(|e| match e {
        Error::Io(io) => Failure::Config(format!("cannot read {}: {io}", grid.display())),
        other => Failure::Config(other.to_string()),
    })?;
    let outcome = sweep(&base, &grid)?;
    for s in &outcome.scores {
        let mark = if s.index == outcome.chosen { "*" } else { " " };
        println!("{mark} candidate {:>2}: false_alarms={} detected={}", s.index, s.false_alarms, s.detected);
    }
    let path = out.unwrap_or_else(|| config.with_extension("chosen.toml"));
    fs::write(&path, outcome.config.to_toml()).map_err(|e| runtime(&format!("writing {}", path.display()), e))?;
    println!("chose candidate {}; wrote {}", outcome.chosen, path.display());
    Ok(())
}

fn cmd_serve(config: &Path, bind: SocketAddr) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| runtime("starting runtime", e))?;
    eprintln!("listening on http://{bind}/v1");
    rt.block_on(sdrift_service::serve(bind, Some(cfg)))
        .map_err(|e| runtime(&format!("serving on {bind}"), e))
}

fn cmd_gen(dataset: GenDataset, out: &Path, seed: u64, total: Option<usize>) -> Result<(), Failure> {
    let (name, confound) = match dataset {
        GenDataset::Stagger => ("stagger", false),
        GenDataset::CStagger => ("stagger", true),
        GenDataset::Electricity => ("electricity", false),
        GenDataset::CElectricity => ("electricity", true),
    };
    let mut cfg = ExperimentConfig::for_dataset(name);
    cfg.confound = confound;
    cfg.total = total;
    cfg.validate()?;
    let stream = cfg.stream(seed)?;
    let file = fs::File::create(out).map_err(|e| runtime(&format!("creating {}", out.display()), e))?;
    write_csv_stream(std::io::BufWriter::new(file), &cfg.schema()?, &cfg.label_column, &stream)
        .map_err(|e| runtime(&format!("writing {}", out.display()), e))?;
    println!("wrote {} rows to {}", stream.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, dry_run, output } => cmd_run(&config, dry_run, output),
        Command::Sweep { config, grid, out } => cmd_sweep(&config, &grid, out),
        Command::Serve { config, bind } => cmd_serve(&config, bind),
        Command::Gen {
            dataset,
            out,
            seed,
            total,
        } => cmd_gen(dataset, &out, seed, total),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
