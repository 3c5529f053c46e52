//! `arcdex` command-line interface.

mod commands;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use arcdex::PipelineConfig;
use clap::{Args, Parser, Subcommand};

/// Config file read when `--config` is not given, if present.
const DEFAULT_CONFIG: &str = "arcdex.conf";

#[derive(Debug, Parser)]
#[command(
    name = "arcdex",
    version,
    about = "Index and search narratives by sentiment progression"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Args)]
struct GlobalOpts {
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a config key, e.g. `--set window=40`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Worker threads for per-book and per-pair stages.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Seed for synthetic generation.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Print machine-readable JSON instead of the human summary.
    #[arg(long, global = true)]
    json: bool,

    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize a corpus (directory, CMU summaries TSV) into a JSON store.
    Ingest {
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Character counts, prime and core characters of one book.
    Characters(BookArgs),
    /// Pivot points of every core pair of one book.
    Pivots(BookArgs),
    /// Sentiment progression series of one book, as CSV.
    Series(BookArgs),
    /// SPSI of two series CSVs, or the SPSI matrix of a corpus.
    Spsi {
        /// Two series CSV files.
        #[arg(num_args = 0..=2)]
        series: Vec<PathBuf>,
        /// Corpus to compare all-pairs instead.
        #[arg(long, conflicts_with = "series")]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cluster a similarity matrix CSV or a corpus.
    Cluster {
        #[arg(long, conflicts_with = "corpus")]
        matrix: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Fixed merge threshold; overrides the configured one.
        #[arg(long)]
        dt: Option<f64>,
        /// Use the lower triangle of an asymmetric matrix.
        #[arg(long)]
        mirror_lower: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a catalogue from a corpus.
    Index {
        corpus: PathBuf,
        #[arg(long, default_value = "catalogue.json")]
        out: PathBuf,
    },
    /// Search a catalogue by book or by pattern.
    Search {
        #[arg(long, default_value = "catalogue.json")]
        catalogue: PathBuf,
        /// Book id to find neighbours of.
        #[arg(long, conflicts_with = "pattern", required_unless_present = "pattern")]
        like: Option<String>,
        /// Series CSV (`position,value`) to search for.
        #[arg(long)]
        pattern: Option<PathBuf>,
        #[arg(short, default_value_t = 10)]
        k: usize,
        /// Keep the query book in the results.
        #[arg(long)]
        include_self: bool,
    },
    /// Compare clustering against reference labels.
    Eval {
        corpus: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Also score the metadata and summary baselines.
        #[arg(long)]
        baselines: bool,
    },
    /// Write a synthetic corpus with planted arcs.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 25)]
        books_per_archetype: usize,
        #[arg(long, default_value_t = 0.05)]
        sigma: f64,
    },
}

#[derive(Debug, Args)]
struct BookArgs {
    /// Plain-text book; its file stem is the book id.
    book: PathBuf,
    /// Alias table for this book.
    #[arg(long)]
    aliases: Option<PathBuf>,
    /// Write the machine-readable output here.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(arcdex::Error),
}

impl From<arcdex::Error> for CliError {
    fn from(e: arcdex::Error) -> Self {
        CliError::Data(e)
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn load_config(global: &GlobalOpts) -> CliResult<PipelineConfig> {
    let mut cfg = match &global.config {
        Some(path) => PipelineConfig::load(path)?,
        None if Path::new(DEFAULT_CONFIG).is_file() => PipelineConfig::load(DEFAULT_CONFIG)?,
        None => PipelineConfig::default(),
    };
    for o in &global.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {o:?}")))?;
        cfg.set(k, v).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult {
    let cfg = load_config(&cli.global)?;
    if cli.global.print_config {
        print!("{}", cfg.to_file_string());
        return Ok(());
    }
    if let Some(n) = cli.global.jobs {
        if n == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".to_string()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let Some(command) = cli.command else {
        return Err(CliError::Usage(
            "a subcommand is required (see --help)".to_string(),
        ));
    };
    commands::dispatch(command, &cfg, &cli.global)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
