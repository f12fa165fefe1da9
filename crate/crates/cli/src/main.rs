use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use vrft_buck::pipeline::{run_pipeline, PipelineConfig, Recipe};
use vrft_buck::{CircuitParameters, PlantMode};

/// Buck converter simulation and data-driven PI tuning.
#[derive(Debug, Parser)]
#[command(name = "vrft-buck", version)]
struct Cli {
    /// collect-ol, tune-zn, tune-vrft, tune-vrft-aw, validate, compare or fig4-check
    recipe: Recipe,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Circuit parameter file (key=value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Plant used by every simulation.
    #[arg(long, alias = "mode", default_value = "switched")]
    plant: PlantMode,
    /// Horizon of the recipe's main simulation, seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Circuit parameter override, repeatable; wins over --config.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

fn config(cli: &Cli) -> anyhow::Result<PipelineConfig> {
    let mut params = match &cli.config {
        Some(path) => CircuitParameters::from_config_file(path)?,
        None => CircuitParameters::default(),
    };
    for (i, kv) in cli.params.iter().enumerate() {
        params.apply_config_text(kv, &format!("--param #{}", i + 1))?;
    }
    params.validate()?;
    let mut cfg = PipelineConfig::new(&cli.out);
    cfg.params = params;
    cfg.mode = cli.plant;
    cfg.seed = cli.seed;
    cfg.duration = cli.duration;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = config(&cli).and_then(|cfg| Ok(run_pipeline(cli.recipe, &cfg)?));
    match result {
        Ok(set) => {
            print!("{}", set.summary.to_text());
            for f in &set.files {
                println!("artifact={}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let kind = e
                .downcast_ref::<vrft_buck::Error>()
                .map_or("usage", |e| e.kind());
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error kind={kind} recipe={} message={msg:?}", cli.recipe);
            ExitCode::FAILURE
        }
    }
}
