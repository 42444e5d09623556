use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use snapalign::aligner::{AlignerParams, MaxDistance};
use snapalign::driver::{run_align, run_eval, run_index, run_simulate, AlignJob, EngineOptions, DEFAULT_CHUNK_MIN};
use snapalign::eval::DEFAULT_TOLERANCE;
use snapalign::simulate::SimProfile;

#[derive(Parser)]
#[command(name = "snapalign", version, about = "Seed-and-extend read aligner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a seed index from a FASTA reference.
    Index {
        fasta: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 20)]
        seed_size: usize,
    },
    /// Align FASTQ reads (plain or gzip) against an index, writing SAM.
    Align(AlignArgs),
    /// Simulate reads with known origins from a FASTA reference.
    Simulate(SimulateArgs),
    /// Score SAM output of simulated reads.
    Eval {
        sam: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: u64,
        #[arg(long, value_enum, default_value_t = ReportFormat::KeyValue)]
        format: ReportFormat,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    KeyValue,
    Json,
}

#[derive(Args)]
struct AlignArgs {
    index: PathBuf,
    reads: PathBuf,
    output: PathBuf,
    /// FASTA to verify against the genome stored in the index.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    seed_size: usize,
    #[arg(long, default_value_t = 25)]
    seeds_to_try: usize,
    /// Edit distance limit: a base count, or a percentage of the read length
    /// such as `12%`.
    #[arg(long, default_value = "12%", value_parser = parse_max_distance)]
    max_dist: MaxDistance,
    #[arg(long, default_value_t = 2)]
    confidence: u32,
    #[arg(long, default_value_t = 300)]
    max_hits: usize,
    #[arg(long, default_value_t = 32)]
    bucket_size: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Smallest work range in bytes.
    #[arg(long, default_value_t = DEFAULT_CHUNK_MIN)]
    chunk_min: u64,
    /// Write records in input order.
    #[arg(long)]
    stable_order: bool,
    /// Accepted for symmetry with `simulate`; alignment is deterministic.
    #[arg(long)]
    rng_seed: Option<u64>,
}

#[derive(Args)]
struct SimulateArgs {
    fasta: PathBuf,
    output: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    count: u64,
    #[arg(long, default_value_t = 100)]
    read_length: usize,
    #[arg(long, default_value_t = 0.02)]
    error_rate: f64,
    /// Fraction of sequencing errors that are single-base indels.
    #[arg(long, default_value_t = 0.0)]
    indel_error_fraction: f64,
    #[arg(long, default_value_t = 0.0009)]
    snp_rate: f64,
    #[arg(long, default_value_t = 0.0001)]
    indel_rate: f64,
    #[arg(long, default_value_t = 42)]
    rng_seed: u64,
}

fn parse_max_distance(s: &str) -> Result<MaxDistance, String> {
    let bad = || format!("expected a count or a percentage, got {s:?}");
    match s.strip_suffix('%') {
        Some(p) => p.parse().map(MaxDistance::PercentOfRead).map_err(|_| bad()),
        None => s.parse().map(MaxDistance::Fixed).map_err(|_| bad()),
    }
}

fn run(cli: Cli, command_line: String) -> snapalign::Result<()> {
    match cli.command {
        Command::Index { fasta, output, seed_size } => {
            let index = run_index(&fasta, seed_size, &output)?;
            info!("indexed {} seed windows", index.window_count());
        }
        Command::Align(a) => {
            let job = AlignJob {
                index: a.index,
                reads: a.reads,
                output: a.output,
                reference: a.reference,
                params: AlignerParams {
                    seed_size: a.seed_size,
                    seeds_to_try: a.seeds_to_try,
                    max_distance: a.max_dist,
                    confidence: a.confidence,
                    max_hits: a.max_hits,
                    bucket_size: a.bucket_size,
                    shrink_d_limit: true,
                },
                engine: EngineOptions { threads: a.threads, chunk_min: a.chunk_min, stable_order: a.stable_order },
                command_line,
            };
            let summary = run_align(&job)?;
            info!(
                "aligned {} reads in {:.2}s over {} chunks",
                summary.stats.reads, summary.elapsed_seconds, summary.chunks
            );
        }
        Command::Simulate(s) => {
            let profile = SimProfile {
                read_length: s.read_length,
                snp_rate: s.snp_rate,
                indel_mutation_rate: s.indel_rate,
                max_mutation_indel: 3,
                seq_error_rate: s.error_rate,
                indel_error_fraction: s.indel_error_fraction,
                rng_seed: s.rng_seed,
            };
            run_simulate(&s.fasta, profile, s.count, &s.output)?;
        }
        Command::Eval { sam, tolerance, format } => {
            let report = run_eval(&sam, tolerance)?;
            match format {
                ReportFormat::KeyValue => print!("{}", report.to_key_value()),
                ReportFormat::Json => println!("{}", report.to_json()),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli, args.join(" ")) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
