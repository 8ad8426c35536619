use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use ripplebalance::config::{parse_sizes, Experiment, ExperimentConfig};
use ripplebalance::experiment::{run_bench, run_energy, run_interpret, run_simulate, ExperimentError};

/// Output directory used when neither `--out` nor the environment sets one.
const DEFAULT_OUT: &str = "ripplebalance-out";
const OUT_ENV: &str = "RIPPLEBALANCE_OUT";

/// Ripple replay simulation, balance-penalized interpretation and balance
/// energy kernels.
#[derive(Debug, Parser)]
#[command(name = "ripplebalance", version)]
struct Cli {
    /// simulate, interpret, bench or energy
    #[arg(value_parser = parse_experiment)]
    experiment: Experiment,
    /// `key = value` configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed, overriding the config file
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $RIPPLEBALANCE_OUT, then ./ripplebalance-out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Benchmark sizes, e.g. 50,100,200
    #[arg(long, value_parser = parse_size_list)]
    sizes: Option<SizeList>,
    /// Matrix CSV for the energy experiment
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Where the energy experiment writes the gradient matrix
    #[arg(long)]
    gradient_out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
struct SizeList(Vec<usize>);

fn parse_size_list(s: &str) -> Result<SizeList, String> {
    parse_sizes(s).map(SizeList)
}

fn parse_experiment(s: &str) -> Result<Experiment, String> {
    s.parse()
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Read {
                path: path.clone(),
                source,
            })?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    cfg.experiment = cli.experiment;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(sizes) = &cli.sizes {
        cfg.sizes = sizes.0.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn run(cli: &Cli) -> Result<Vec<String>, ExperimentError> {
    let cfg = load_config(cli)?;
    let out = out_dir(cli);
    Ok(match cfg.experiment {
        Experiment::Simulate => run_simulate(&cfg, &out)?.lines,
        Experiment::Interpret => run_interpret(&cfg, &out)?.lines,
        Experiment::Bench => run_bench(&cfg, &out)?.1,
        Experiment::Energy => run_energy(&cfg, cli.matrix.as_deref(), cli.gradient_out.as_deref())?.lines,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(lines) => {
            for line in lines {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
