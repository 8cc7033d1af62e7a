use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use svnapot_sim::experiment::{emit_csv, emit_plotdata, run_sweep, write_csv, ExperimentConfig};
use svnapot_sim::workload::{Pattern, PatternKind, WorkloadSpec, DEFAULT_MEASURED_ACCESSES};
use svnapot_sim::{PageSize, VirtAddr};

#[derive(Parser)]
#[command(name = "svnapot-sim", version, about = "sv39 TLB hierarchy simulator with SVNAPOT 64KB pages")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configuration × pattern × chunk-size sweep and write CSV rows.
    Run(RunArgs),
    /// Write one workload trace, one hex address per line.
    GenTrace(GenTraceArgs),
    /// Check an experiment config file and print the grid it describes.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML). Without it the built-in grid is used.
    #[arg(long, conflicts_with = "default")]
    config: Option<PathBuf>,
    /// Use the built-in four-configuration grid.
    #[arg(long)]
    default: bool,
    /// CSV destination; `-` for stdout. Overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write per-panel plot series as JSON.
    #[arg(long)]
    plot_out: Option<PathBuf>,
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    include_warmup: bool,
}

#[derive(Args)]
struct GenTraceArgs {
    /// Chunk size in bytes; accepts K/M suffixes (e.g. 64K, 4M).
    #[arg(long, value_parser = parse_size)]
    chunk: u64,
    #[arg(long, default_value = "linear")]
    pattern: PatternKind,
    #[arg(long, default_value_t = svnapot_sim::experiment::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MEASURED_ACCESSES)]
    measured_accesses: usize,
    #[arg(long, value_parser = parse_u64, default_value = "0x40000000")]
    base_va: u64,
    /// Output path; `-` for stdout.
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn parse_u64(s: &str) -> Result<u64, String> {
    let s = s.replace('_', "");
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    }
    .map_err(|e| format!("`{s}`: {e}"))
}

fn parse_size(s: &str) -> Result<u64, String> {
    let upper = s.trim().to_ascii_uppercase();
    let upper = upper.strip_suffix('B').unwrap_or(&upper);
    let (digits, shift) = match upper.chars().last() {
        Some('K') => (&upper[..upper.len() - 1], 10),
        Some('M') => (&upper[..upper.len() - 1], 20),
        Some('G') => (&upper[..upper.len() - 1], 30),
        _ => (upper, 0),
    };
    let value = parse_u64(digits)?;
    value
        .checked_mul(1 << shift)
        .ok_or_else(|| format!("`{s}` overflows"))
}

fn run(args: RunArgs) -> svnapot_sim::Result<()> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.include_warmup |= args.include_warmup;
    let out = args.out.or_else(|| config.output.clone());

    let rows = run_sweep(&config, args.jobs)?;
    match out {
        Some(path) if path.as_os_str() != "-" => {
            emit_csv(&rows, &path)?;
            eprintln!("wrote {} rows to {}", rows.len(), path.display());
        }
        _ => write_csv(&rows, io::stdout().lock())?,
    }
    if let Some(path) = args.plot_out {
        emit_plotdata(&rows, &path)?;
    }
    Ok(())
}

fn gen_trace(args: GenTraceArgs) -> svnapot_sim::Result<()> {
    let pattern = match args.pattern {
        PatternKind::Linear => Pattern::Linear,
        PatternKind::Random => Pattern::Random { seed: args.seed },
    };
    let spec = WorkloadSpec {
        measured_accesses: args.measured_accesses,
        ..WorkloadSpec::new(args.chunk, pattern, PageSize::Page4K)
    };
    let trace = spec.trace(VirtAddr::new(args.base_va)?)?;
    if args.out.as_os_str() == "-" {
        trace.write_to(BufWriter::new(io::stdout().lock()))
    } else {
        trace.write_to(BufWriter::new(File::create(&args.out)?))
    }
}

fn validate(path: PathBuf) -> svnapot_sim::Result<()> {
    let config = ExperimentConfig::load(&path)?;
    println!(
        "{}: ok ({} configurations, {} cells, {} rows)",
        path.display(),
        config.configs.len(),
        config.cells().len(),
        config.expected_rows()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::GenTrace(args) => gen_trace(args),
        Command::Validate { config } => validate(config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
