//! Builds models and samplers from a config and runs the chains.

use std::path::{Path, PathBuf};

use pgas_core::diagnostics::ChainRecord;
use pgas_core::learning::lgss::{LgssParameterModel, LgssPrior};
use pgas_core::learning::{gibbs_run, psaem_run, FixedParams, GibbsOptions, ParameterModel, SirParameterModel, StepSchedule};
use pgas_core::models::degenerate::DegenerateCollapsed;
use pgas_core::models::lgss::{Lgss, LgssParams};
use pgas_core::models::sir::{SirModel, SirParams};
use pgas_core::models::sv::StochasticVolatility;
use pgas_core::oracles::ideal_gibbs::ideal_gibbs_lgss;
use pgas_core::oracles::kalman::{kalman_smoother, ScalarLgss};
use pgas_core::par::par_map;
use pgas_core::rng::{stream, ChainRng};
use pgas_core::{initial_trajectory, KernelConfig};

use crate::config::{DriverConfig, ExperimentConfig, ModelConfig, Sampler};
use crate::data::{self, build_system, Dataset};
use crate::error::{CliError, Result};

/// A validated config with its data loaded.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub data: Dataset,
    pub primary: Sampler,
    pub comparisons: Vec<Sampler>,
}

/// Output of one sampler on one chain.
#[derive(Debug, Clone)]
pub struct ChainResult {
    pub chain: usize,
    /// ChaCha stream id under the experiment seed.
    pub stream: u64,
    pub sampler: Sampler,
    pub record: ChainRecord,
}

impl Experiment {
    /// Parses, validates and loads data; `config_dir` resolves relative paths.
    pub fn prepare(config: ExperimentConfig, config_dir: &Path) -> Result<Self> {
        config.validate(config_dir)?;
        if config.comparison_samplers()?.contains(&Sampler::Ideal) && matches!(config.driver, DriverConfig::Psaem { .. }) {
            return Err(CliError::config("diagnostics.compare", "the ideal sampler has no SAEM counterpart"));
        }
        let data = data::load(&config.model, config.data_path(config_dir).as_deref())?;
        if let ModelConfig::Degenerate { system, .. } = &config.model {
            let p = build_system(system)?.outputs();
            if data.y.iter().any(|r| r.len() != p) {
                return Err(CliError::config("model.data", format!("the system has {p} outputs")));
            }
        } else {
            data.scalar()?;
        }
        Ok(Self {
            seed: config.seed()?,
            primary: Sampler::Kernel(config.primary_sampler()?),
            comparisons: config.comparison_samplers()?,
            data,
            config,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let config = ExperimentConfig::load(path)?;
        Self::prepare(config, path.parent().unwrap_or(Path::new(".")))
    }

    /// Name of the recorded state coordinate.
    pub fn state_label(&self) -> &'static str {
        match self.config.model {
            ModelConfig::Sir { .. } => "mean_infected",
            _ => "x",
        }
    }

    fn gibbs_options(&self) -> GibbsOptions {
        GibbsOptions {
            iterations: self.config.driver.iterations(),
            burnin: self.config.driver.burnin(),
            record_states: self.config.diagnostics.record_states,
        }
    }

    /// Runs `chains` chains of the primary sampler and of every comparison.
    /// Task `(k, c)` draws from stream `k · 2³² + c`, so results do not depend
    /// on scheduling.
    pub fn run(&self, chains: usize) -> Result<Vec<ChainResult>> {
        let samplers: Vec<&Sampler> = std::iter::once(&self.primary).chain(&self.comparisons).collect();
        let tasks: Vec<(usize, usize)> = (0..samplers.len()).flat_map(|k| (0..chains).map(move |c| (k, c))).collect();
        let results = par_map(tasks.len(), |i| {
            let (k, c) = tasks[i];
            let id = ((k as u64) << 32) | c as u64;
            let mut rng = stream(self.seed, id);
            self.run_sampler(samplers[k], &mut rng).map(|mut record| {
                record.seed = self.seed;
                ChainResult {
                    chain: c,
                    stream: id,
                    sampler: samplers[k].clone(),
                    record,
                }
            })
        });
        results.into_iter().collect()
    }

    fn run_sampler(&self, sampler: &Sampler, rng: &mut ChainRng) -> Result<ChainRecord> {
        let opts = self.gibbs_options();
        let y = &self.data.y;
        let kernel = match sampler {
            Sampler::Kernel(k) => Some(k),
            Sampler::Ideal => None,
        };
        let driver = &self.config.driver;
        let rec = match &self.config.model {
            ModelConfig::Lgss { a, q, r, .. } => {
                let y = self.data.scalar()?;
                let fixed = LgssParams::new(*a, *q, *r)?;
                let theta0 = match driver {
                    DriverConfig::Gibbs { theta0: Some(t), .. } | DriverConfig::Psaem { theta0: Some(t), .. } => LgssParams::new(t[0], t[1], t[2])?,
                    _ => fixed,
                };
                let pm = LgssParameterModel::new(y.clone(), LgssPrior::default());
                match (driver, kernel) {
                    (DriverConfig::Smoothing { .. }, Some(k)) => gibbs_run(&FixedParams(Lgss::from_params(fixed, y)?), k, opts, (), None, rng)?,
                    (DriverConfig::Smoothing { .. }, None) => ideal_gibbs_lgss(&y, None, opts, fixed, rng)?,
                    (DriverConfig::Gibbs { .. }, Some(k)) => gibbs_run(&pm, k, opts, theta0, None, rng)?,
                    (DriverConfig::Gibbs { .. }, None) => ideal_gibbs_lgss(&y, Some(LgssPrior::default()), opts, theta0, rng)?,
                    (DriverConfig::Psaem { exponent, warmup, .. }, Some(k)) => {
                        let schedule = StepSchedule::WarmPower {
                            warmup: *warmup,
                            exponent: *exponent,
                        };
                        let trace = psaem_run(&pm, k, schedule, driver.iterations(), theta0, rng)?;
                        ChainRecord {
                            param_names: trace.param_names,
                            params: trace.params,
                            ..Default::default()
                        }
                    }
                    (DriverConfig::Psaem { .. }, None) => unreachable!("rejected in prepare"),
                }
            }
            ModelConfig::Sv { a, sigma, .. } => {
                let m = StochasticVolatility::new(*a, *sigma, self.data.scalar()?)?;
                gibbs_run(&FixedParams(m), kernel.expect("validated"), opts, (), None, rng)?
            }
            ModelConfig::Degenerate { system, .. } => {
                let m = DegenerateCollapsed::new(&build_system(system)?, y.clone())?;
                gibbs_run(&FixedParams(m), kernel.expect("validated"), opts, (), None, rng)?
            }
            ModelConfig::Sir { params, .. } => self.run_sir(params.resolve(), kernel.expect("validated"), opts, rng)?,
        };
        Ok(rec)
    }

    fn run_sir(&self, truth: SirParams, k: &KernelConfig, opts: GibbsOptions, rng: &mut ChainRng) -> Result<ChainRecord> {
        let y = self.data.scalar()?;
        let mut rec = match &self.config.driver {
            DriverConfig::Gibbs { theta0, .. } => {
                let start = match theta0 {
                    Some(t) => SirParams {
                        gamma: t[0],
                        r0: t[1],
                        alpha: t[2],
                        noise: t[3],
                        rho: t[4],
                        sigma: t[5],
                        ..truth.clone()
                    },
                    None => truth.clone(),
                };
                let mut pm = SirParameterModel::new(truth.clone(), y.clone());
                let x0 = initial_trajectory(&pm.build(&start)?, k.n.max(2), rng).map_err(|e| e.at_iteration(0))?;
                let rate = pm.tune(&start, &x0, rng);
                log::info!("SIR pilot tuning: acceptance {rate:.2}, scales {:?}", pm.scales);
                gibbs_run(&pm, k, opts, start, Some(x0), rng)?
            }
            _ => gibbs_run(&FixedParams(SirModel::new(truth.clone(), y.clone())?), k, opts, (), None, rng)?,
        };
        // Innovations are not worth writing out; keep the weekly mean of I.
        let m = truth.substeps;
        for (n, row) in rec.states.iter_mut().enumerate() {
            let params = match rec.params.get(n) {
                Some(t) if t.len() == 6 => SirParams {
                    gamma: t[0],
                    r0: t[1],
                    alpha: t[2],
                    noise: t[3],
                    ..truth.clone()
                },
                _ => truth.clone(),
            };
            let model = SirModel::new(params, y.clone())?;
            let v: Vec<Vec<f64>> = row.chunks(m).map(|c| c.to_vec()).collect();
            *row = model.trajectory(&v).mean_infected;
        }
        Ok(rec)
    }

    /// Exact posterior means of the latent path at the model's parameters,
    /// when a Kalman oracle exists and parameters are held fixed.
    pub fn reference_means(&self) -> Result<Option<Vec<f64>>> {
        if !matches!(self.config.driver, DriverConfig::Smoothing { .. }) {
            return Ok(None);
        }
        Ok(match &self.config.model {
            ModelConfig::Lgss { a, q, r, .. } => Some(ScalarLgss::stationary(*a, *q, *r).smooth(&self.data.scalar()?).0),
            ModelConfig::Degenerate { system, .. } => {
                Some(kalman_smoother(&build_system(system)?.full_system(), &self.data.y)?.first_coordinate_means())
            }
            _ => None,
        })
    }
}

/// Output directory: `--out` wins over the config's `output`.
pub fn output_dir(config: &ExperimentConfig, config_dir: &Path, out: Option<&Path>) -> Result<PathBuf> {
    match (out, &config.output) {
        (Some(o), _) => Ok(o.to_path_buf()),
        (None, Some(o)) if o.is_relative() => Ok(config_dir.join(o)),
        (None, Some(o)) => Ok(o.clone()),
        (None, None) => Err(CliError::config("output", "no output directory: set \"output\" or pass --out")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn experiment(text: &str) -> Experiment {
        Experiment::prepare(ExperimentConfig::parse(text).unwrap(), Path::new(".")).unwrap()
    }

    const SMOOTH: &str = r#"{
        "seed": 3,
        "model": {"name": "lgss", "a": 0.8, "q": 1.0, "r": 0.5, "data": {"simulate": {"length": 15, "seed": 2}}},
        "kernel": {"flavor": "pgas", "N": 5},
        "driver": {"kind": "smoothing", "iterations": 50},
        "diagnostics": {"compare": [{"sampler": "ideal"}, {"sampler": "pg"}]}
    }"#;

    #[test]
    fn chains_are_independent_of_scheduling() {
        let exp = experiment(SMOOTH);
        let a = exp.run(2).unwrap();
        let b = exp.run(2).unwrap();
        assert_eq!(a.len(), 6);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.record, y.record);
        }
        assert_ne!(a[0].record.states, a[1].record.states);
        assert_eq!(a[2].sampler, Sampler::Ideal);
    }

    #[test]
    fn reference_means_only_at_fixed_parameters() {
        let exp = experiment(SMOOTH);
        assert_eq!(exp.reference_means().unwrap().unwrap().len(), 15);
        let learn = SMOOTH.replace("\"smoothing\"", "\"gibbs\"");
        assert!(experiment(&learn).reference_means().unwrap().is_none());
    }

    #[test]
    fn sir_states_are_weekly_means() {
        let exp = experiment(
            r#"{
            "seed": 1,
            "model": {"name": "sir", "data": {"simulate": {"length": 12, "seed": 2}}},
            "kernel": {"flavor": "pgas", "N": 4},
            "driver": {"kind": "smoothing", "iterations": 3}
        }"#,
        );
        let rec = &exp.run(1).unwrap()[0].record;
        assert_eq!(rec.states[0].len(), 12);
        assert!(rec.states[0].iter().all(|v| *v > 0.0 && *v < 1e6));
    }
}
