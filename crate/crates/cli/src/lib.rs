//! Batch runner for particle-MCMC experiments.
//!
//! `pgas-mc run` reads a JSON [`config::ExperimentConfig`], simulates or loads
//! data, runs the configured kernel and driver (plus any comparison samplers)
//! and writes `chain.csv`, `diagnostics.csv` and `summary.json`. Runs are
//! fully determined by the config and its seed.

pub mod config;
pub mod data;
pub mod error;
pub mod output;
pub mod plot;
pub mod run;

use std::path::{Path, PathBuf};

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use run::{ChainResult, Experiment};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub chains: usize,
    pub plot: bool,
    pub out: Option<PathBuf>,
}

/// `pgas-mc run`: returns the written files.
pub fn run_config(path: &Path, opts: &RunOptions) -> Result<Vec<PathBuf>> {
    let exp = Experiment::load(path)?;
    let dir = run::output_dir(&exp.config, path.parent().unwrap_or(Path::new(".")), opts.out.as_deref())?;
    let chains = opts.chains.max(1);
    let results = exp.run(chains)?;
    output::write_outputs(&exp, &results, chains, &dir, opts.plot)
}

/// `pgas-mc validate`: parses and checks without writing anything.
pub fn validate_config(path: &Path) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::load(path)?;
    cfg.validate(path.parent().unwrap_or(Path::new(".")))?;
    Ok(cfg)
}

/// `pgas-mc simulate`: writes `data.csv` and `truth.csv` for a reference model.
pub fn simulate_dataset(model: &str, seed: u64, out: &Path, length: Option<usize>) -> Result<()> {
    let (cfg, default_len) = data::default_model(model, seed)?;
    let len = length.unwrap_or(default_len);
    if len < 2 {
        return Err(CliError::config("length", "need at least 2 time steps"));
    }
    let ds = data::simulate(&cfg, len, seed)?;
    data::write_dataset(out, &ds, &[format!("model: {model}"), format!("seed: {seed}")])
}

/// Caps the worker pool at `PGAS_MC_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("PGAS_MC_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::config("PGAS_MC_THREADS", format!("expected a positive integer, got '{raw}'")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::config("PGAS_MC_THREADS", e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}
