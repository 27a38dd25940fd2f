//! `twintier` runs the case study, the individual training commands,
//! orchestrator scenarios and plots.
//!
//! Exit status is 0 on success, 1 when a run fails (any seed included) and
//! 2 when the configuration is rejected.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::Parser;
use log::{error, info};
use twintier::experiment::{
    plot_training_logs, run_case_study, run_training, validate_config, write_outputs, Command, Method, Profile,
    RunConfig,
};
use twintier::orchestrator::{run_scenario, ScenarioScript};

#[derive(Debug, Parser)]
#[command(name = "twintier", version, about = "Two-tier meta-RL simulator")]
struct Args {
    /// TOML run configuration; unset keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// train-scratch, meta-train, meta-adapt, transfer, case-study, orchestrate or plot.
    #[arg(long)]
    command: Option<String>,
    /// Comma-separated seeds, e.g. 0,1,2.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Run-length preset: desk or paper.
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scenario script for `orchestrate`.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Training-log CSVs for `plot`.
    #[arg(long, value_delimiter = ',')]
    inputs: Option<Vec<PathBuf>>,
    /// Series labels for `plot`, one per input.
    #[arg(long, value_delimiter = ',')]
    labels: Option<Vec<String>>,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long)]
    check: bool,
}

enum Failure {
    Config(Vec<String>),
    Run(String),
}

fn resolve(args: &Args) -> Result<RunConfig, Vec<String>> {
    let profile = args
        .profile
        .as_deref()
        .map(Profile::from_str)
        .transpose()
        .map_err(|e| vec![e.to_string()])?;
    let mut cfg = validate_config(args.config.as_deref(), profile)?;
    if let Some(c) = &args.command {
        cfg.command = Command::from_str(c).map_err(|e| vec![e.to_string()])?;
    }
    if let Some(s) = &args.seeds {
        cfg.seeds = s.clone();
    }
    if let Some(o) = &args.out {
        cfg.out = o.clone();
    }
    if let Some(s) = &args.scenario {
        cfg.scenario = Some(s.clone());
    }
    if let Some(i) = &args.inputs {
        cfg.inputs = i.clone();
    }
    if let Some(l) = &args.labels {
        cfg.labels = l.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn label_of(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn train(cfg: &RunConfig) -> Result<(), Failure> {
    let outcome = if cfg.command == Command::CaseStudy {
        run_case_study(cfg)
    } else {
        run_training(cfg)
    }
    .map_err(|e| Failure::Run(e.to_string()))?;
    write_outputs(cfg, &outcome, &cfg.out).map_err(|e| Failure::Run(e.to_string()))?;
    if cfg.command == Command::CaseStudy {
        for run in outcome.successes() {
            let dir = cfg.out.join(format!("seed_{}", run.seed));
            let inputs: Vec<(String, PathBuf)> = Method::ALL
                .iter()
                .map(|m| (m.label().to_string(), dir.join(format!("{}.csv", m.file_stem()))))
                .collect();
            plot_training_logs(&inputs, &dir).map_err(|e| Failure::Run(e.to_string()))?;
        }
    }
    let failures = outcome.failures();
    for (seed, e) in &failures {
        error!("seed {seed} failed: {e}");
    }
    if failures.is_empty() {
        info!("wrote {}", cfg.out.display());
        Ok(())
    } else {
        Err(Failure::Run(format!("{} of {} seeds failed", failures.len(), cfg.seeds.len())))
    }
}

fn orchestrate(cfg: &RunConfig) -> Result<(), Failure> {
    let path = cfg.scenario.as_deref().ok_or_else(|| Failure::Config(vec!["no scenario script".into()]))?;
    let script = ScenarioScript::from_file(path).map_err(Failure::Config)?;
    let outcome = run_scenario(&script).map_err(|e| Failure::Run(e.to_string()))?;
    outcome.write(&cfg.out).map_err(|e| Failure::Run(e.to_string()))?;
    info!("{} events, {} retrains", outcome.log.events().len(), outcome.retrains.len());
    Ok(())
}

fn plot(cfg: &RunConfig) -> Result<(), Failure> {
    let inputs: Vec<(String, PathBuf)> = if cfg.labels.is_empty() {
        cfg.inputs.iter().map(|p| (label_of(p), p.clone())).collect()
    } else {
        cfg.labels.iter().cloned().zip(cfg.inputs.iter().cloned()).collect()
    };
    let files = plot_training_logs(&inputs, &cfg.out).map_err(|e| Failure::Run(e.to_string()))?;
    for f in files {
        info!("wrote {}", f.display());
    }
    Ok(())
}

fn run(args: &Args) -> Result<(), Failure> {
    let cfg = resolve(args).map_err(Failure::Config)?;
    if args.check {
        let json = serde_json::to_string_pretty(&cfg).map_err(|e| Failure::Run(e.to_string()))?;
        println!("{json}");
        return Ok(());
    }
    info!("{} with seeds {:?}", cfg.command.name(), cfg.seeds);
    match cfg.command {
        Command::Orchestrate => orchestrate(&cfg),
        Command::Plot => plot(&cfg),
        _ => train(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(problems)) => {
            for p in problems {
                eprintln!("config error: {p}");
            }
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("run failed: {msg}");
            ExitCode::from(1)
        }
    }
}
