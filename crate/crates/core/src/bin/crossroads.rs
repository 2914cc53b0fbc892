use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crossroads::config::PipelineConfig;
use crossroads::evaluate::GroupBy;
use crossroads::pipeline::RESULTS_FILE;
use crossroads::service::{self, http};
use crossroads::synth::{standard_scenarios, standard_suite, Tier};

#[derive(Parser)]
#[command(name = "crossroads", version, about = "Intersection bounds and head scans from driving feature streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// TOML pipeline configuration; unspecified keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<PipelineConfig, String> {
        match &self.config {
            Some(p) => PipelineConfig::load(p).map_err(|e| e.to_string()),
            None => Ok(PipelineConfig::default()),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline on a bundle or a directory of bundles.
    Process {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        /// Treat every bundle as having noisy flow (wider motion smoothing).
        #[arg(long)]
        noisy_flow: bool,
        /// Worker threads; defaults to the number of logical cores.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Compare results with ground truth and write report.json / report.csv.
    Evaluate {
        #[arg(long)]
        results: PathBuf,
        /// Directory holding <segment>/groundtruth.json files.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value = "table")]
        group_by: GroupBy,
        /// Report directory; defaults to the results directory.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Render synthetic scenario bundles with exact ground truth.
    Generate {
        #[arg(short, long)]
        output: PathBuf,
        /// Scenario catalog JSON; defaults to the built-in standard suite.
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "all")]
        tier: TierArg,
        /// Re-seed scenarios as seed + index.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Serve the HTTP API over a data root.
    Serve {
        #[arg(long)]
        data_root: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Write the head-scan table of a results file as CSV.
    ExportScans {
        /// results.json, or a directory containing one.
        results: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TierArg {
    All,
    Clean,
    Low,
    Moderate,
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(1)
}

fn run(cli: Cli) -> ExitCode {
    match cli.command {
        Command::Process { input, output, config, noisy_flow, workers } => {
            let cfg = match config.load() {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match service::process_all(&input, &output, &cfg, noisy_flow, workers) {
                Ok(s) => {
                    eprintln!("processed {} bundle(s), {} failure(s)", s.processed.len(), s.failures.len());
                    if s.failures.is_empty() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => fail(e),
            }
        }
        Command::Evaluate { results, truth, group_by, output, config } => {
            let cfg = match config.load() {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let out = output.unwrap_or_else(|| results.clone());
            match service::evaluate_dirs(&results, &truth, group_by, &cfg).and_then(|r| service::write_report(&r, &out)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(e),
            }
        }
        Command::Generate { output, catalog, tier, seed } => {
            let mut scenarios = match (&catalog, tier) {
                (Some(p), _) => match service::load_catalog(p) {
                    Ok(s) => s,
                    Err(e) => return fail(e),
                },
                (None, TierArg::All) => standard_suite(),
                (None, TierArg::Clean) => standard_scenarios(Tier::Clean),
                (None, TierArg::Low) => standard_scenarios(Tier::Low),
                (None, TierArg::Moderate) => standard_scenarios(Tier::Moderate),
            };
            if let Some(base) = seed {
                for (i, s) in scenarios.iter_mut().enumerate() {
                    s.seed = base.wrapping_add(i as u64);
                }
            }
            match service::generate_scenarios(&scenarios, &output) {
                Ok(ids) => {
                    eprintln!("wrote {} bundle(s) to {}", ids.len(), output.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Serve { data_root, port, config, workers } => {
            let cfg = match config.load() {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            if !data_root.is_dir() {
                return fail(format!("{} is not a directory", data_root.display()));
            }
            let workers = workers.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
            let state = http::AppState::new(data_root, cfg, workers);
            let rt = match tokio::runtime::Runtime::new() {
                Ok(rt) => rt,
                Err(e) => return fail(e),
            };
            match rt.block_on(http::serve(SocketAddr::from(([127, 0, 0, 1], port)), state)) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(e),
            }
        }
        Command::ExportScans { results, output } => {
            let path = if results.is_dir() { results.join(RESULTS_FILE) } else { results };
            match service::export_scans(&path) {
                Ok(csv) => match output {
                    Some(o) => write_or_fail(&o, &csv),
                    None => {
                        print!("{csv}");
                        ExitCode::SUCCESS
                    }
                },
                Err(e) => fail(e),
            }
        }
    }
}

fn write_or_fail(path: &Path, text: &str) -> ExitCode {
    match std::fs::write(path, text) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(format!("{}: {e}", path.display())),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    run(Cli::parse())
}
