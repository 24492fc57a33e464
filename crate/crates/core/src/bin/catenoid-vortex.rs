use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use catenoid_vortex::experiments::{execute, Scenario, ScenarioConfig};
use catenoid_vortex::{CatenoidParams, Error, Result};

#[derive(Parser)]
#[command(name = "catenoid-vortex", version, about = "Point-vortex experiments on the catenoid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Antipodal pair in rigid rotation.
    Rigid(Overrides),
    /// Growth of a seeded perturbation of the antipodal pair.
    Instability(Overrides),
    /// Generic two-vortex motion.
    Pair(Overrides),
    /// Reduced quadrature solution against the full integration.
    Reduce(Overrides),
    /// Drift of a random vortex cluster.
    Cluster(Overrides),
    /// Rotation rate of the antipodal pair as a function of latitude.
    Profile(Overrides),
}

#[derive(Args)]
struct Overrides {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    v0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    eta0: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for CSV and JSON files.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn resolve(&self, scenario: Scenario) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::from_file(path, Some(scenario))?,
            None => ScenarioConfig::new(scenario),
        };
        if let Some(a) = self.a {
            cfg.params = CatenoidParams::new(a)?;
        }
        if let Some(x) = self.gamma {
            cfg.gamma = x;
        }
        if let Some(x) = self.v0 {
            cfg.v0 = x;
        }
        if let Some(x) = self.eta0 {
            cfg.eta0 = x;
        }
        if let Some(x) = self.t_final {
            cfg.t_final = Some(x);
        }
        if let Some(x) = self.rtol {
            cfg.rel_tol = x;
        }
        if let Some(x) = self.atol {
            cfg.abs_tol = x;
        }
        if let Some(x) = self.seed {
            cfg.seed = Some(x);
        }
        if let Some(x) = &self.out {
            cfg.output_dir = Some(x.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<String> {
    let (scenario, overrides) = match &cli.command {
        Command::Rigid(o) => (Scenario::Rigid, o),
        Command::Instability(o) => (Scenario::Instability, o),
        Command::Pair(o) => (Scenario::GenericPair, o),
        Command::Reduce(o) => (Scenario::ReducedCompare, o),
        Command::Cluster(o) => (Scenario::Cluster, o),
        Command::Profile(o) => (Scenario::OmegaProfile, o),
    };
    let summary = execute(&overrides.resolve(scenario)?)?;
    serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            println!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let record = serde_json::json!({
                "error": { "kind": e.kind(), "message": e.to_string() }
            });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
