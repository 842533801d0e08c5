use clap::{Parser, Subcommand};
use phasediff_cli::config::ExperimentConfig;
use phasediff_cli::scenarios::Scenario;
use phasediff_cli::{emit_default_config, list_scenarios, run_many, write_combined, write_outputs, CliError};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "phasediff", version, about = "Phase-space diffusion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario, or `all`
    Run {
        scenario: String,
        /// TOML config; only valid with a single scenario
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// worker threads for the numerical kernels
        #[arg(long)]
        threads: Option<usize>,
        /// run scenarios concurrently (each still writes its own directory)
        #[arg(long)]
        parallel: bool,
    },
    /// List scenario names
    List,
    /// Print the default config of a scenario
    DefaultConfig { scenario: String },
}

fn configs(scenario: &str, config: Option<PathBuf>, seed: Option<u64>) -> Result<Vec<ExperimentConfig>, CliError> {
    let mut cfgs = if scenario == "all" {
        if config.is_some() {
            return Err(CliError::Config("--config names a single scenario; it cannot be used with `all`".into()));
        }
        Scenario::ALL.iter().map(|s| ExperimentConfig::default_for(*s)).collect()
    } else if let Some(path) = config {
        let cfg = ExperimentConfig::parse(&std::fs::read_to_string(&path)?)?;
        if cfg.scenario != scenario {
            return Err(CliError::Config(format!("config is for '{}', not '{scenario}'", cfg.scenario)));
        }
        vec![cfg]
    } else {
        vec![ExperimentConfig::default_for(Scenario::from_name(scenario)?)]
    };
    if let Some(s) = seed {
        cfgs.iter_mut().for_each(|c| c.seed = s);
    }
    Ok(cfgs)
}

fn run(scenario: &str, config: Option<PathBuf>, out: Option<PathBuf>, seed: Option<u64>, threads: Option<usize>, parallel: bool) -> Result<bool, CliError> {
    if let Some(k) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global().map_err(|e| CliError::Config(e.to_string()))?;
    }
    let cfgs = configs(scenario, config, seed)?;
    let out = out.unwrap_or_else(|| PathBuf::from(&cfgs[0].out_dir));
    let mut ok = true;
    let mut done = Vec::new();
    for (cfg, res) in cfgs.iter().zip(run_many(&cfgs, parallel)) {
        match res {
            Ok(r) => {
                write_outputs(&out, &r)?;
                print!("{}", r.output.table.summary());
                ok &= r.output.table.all_pass();
                done.push(r);
            }
            Err(e) => {
                eprintln!("{}: {e}", cfg.scenario);
                ok = false;
            }
        }
    }
    write_combined(&out, &done.iter().collect::<Vec<_>>())?;
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run { scenario, config, out, seed, threads, parallel } => run(&scenario, config, out, seed, threads, parallel),
        Command::List => {
            print!("{}", list_scenarios());
            Ok(true)
        }
        Command::DefaultConfig { scenario } => emit_default_config(&scenario).map(|s| {
            print!("{s}");
            true
        }),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
