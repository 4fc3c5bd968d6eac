//! Experiment configuration (JSON).
//!
//! ```json
//! {
//!   "name": "lgss_acf",
//!   "seed": 42,
//!   "model": { "name": "lgss", "a": 0.8, "q": 1.0, "r": 0.5,
//!              "data": { "simulate": { "length": 100, "seed": 7 } } },
//!   "kernel": { "flavor": "pgas", "N": 5, "truncation": "full" },
//!   "driver": { "kind": "gibbs", "iterations": 20000, "burnin": 4000 },
//!   "diagnostics": { "acf_lags": 50, "compare": [ { "sampler": "pg" } ] },
//!   "output": "out/lgss_acf"
//! }
//! ```
//!
//! `model.data` is either `{"simulate": {"length", "seed"}}` or
//! `{"path": "file.csv"}` (relative to the config file). Truncation is
//! `"full"`, `{"fixed": l}` or `{"adaptive": {"upsilon", "tau"}}`; the optional
//! `kernel.ancestor_mh` is `"off"`, `{"forced_move": n}` or
//! `{"truncated_proposal": n}`.

use std::path::{Path, PathBuf};

use pgas_core::models::lgss::LgssParams;
use pgas_core::models::sir::SirParams;
use pgas_core::{AncestorMh, Flavor, KernelConfig, TruncationPolicy};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Required: there is no wall-clock seeding.
    #[serde(default)]
    pub seed: Option<u64>,
    pub model: ModelConfig,
    pub kernel: KernelBlock,
    pub driver: DriverConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Lgss {
        a: f64,
        q: f64,
        r: f64,
        data: DataSpec,
    },
    Sv {
        a: f64,
        sigma: f64,
        data: DataSpec,
    },
    Degenerate {
        system: SystemSpec,
        data: DataSpec,
    },
    Sir {
        #[serde(default)]
        params: SirOverrides,
        data: DataSpec,
    },
}

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::Lgss { .. } => "lgss",
            ModelConfig::Sv { .. } => "sv",
            ModelConfig::Degenerate { .. } => "degenerate",
            ModelConfig::Sir { .. } => "sir",
        }
    }

    pub fn data(&self) -> &DataSpec {
        match self {
            ModelConfig::Lgss { data, .. }
            | ModelConfig::Sv { data, .. }
            | ModelConfig::Degenerate { data, .. }
            | ModelConfig::Sir { data, .. } => data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    Simulate { length: usize, seed: u64 },
    Path(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    /// Poles as `[re, im]`, one entry per complex-conjugate pair, realized
    /// under a random similarity drawn from `seed`.
    Modal {
        poles: Vec<[f64; 2]>,
        #[serde(default = "default_noise")]
        q: f64,
        #[serde(default = "default_noise")]
        r: f64,
        seed: u64,
    },
    Random { order: usize, outputs: usize, seed: u64 },
}

fn default_noise() -> f64 {
    0.1
}

/// Any subset of the SIR parameters; the rest take the reference values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SirOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub substeps: Option<usize>,
}

impl SirOverrides {
    pub fn resolve(&self) -> SirParams {
        let base = SirParams::default();
        let population = self.population.unwrap_or(base.population);
        let scale = population / base.population;
        SirParams {
            population,
            mu: self.mu.unwrap_or(base.mu),
            gamma: self.gamma.unwrap_or(base.gamma),
            r0: self.r0.unwrap_or(base.r0),
            alpha: self.alpha.unwrap_or(base.alpha),
            noise: self.noise.unwrap_or(base.noise),
            rho: self.rho.unwrap_or(base.rho),
            sigma: self.sigma.unwrap_or(base.sigma),
            substeps: self.substeps.unwrap_or(base.substeps),
            initial: pgas_core::models::sir::Compartments {
                s: base.initial.s * scale,
                i: base.initial.i * scale,
                r: base.initial.r * scale,
            },
            ..base
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationSpec {
    #[default]
    Full,
    Fixed(usize),
    Adaptive { upsilon: f64, tau: f64 },
}

impl TruncationSpec {
    pub fn policy(&self) -> TruncationPolicy {
        match *self {
            TruncationSpec::Full => TruncationPolicy::Full,
            TruncationSpec::Fixed(l) => TruncationPolicy::Fixed(l),
            TruncationSpec::Adaptive { upsilon, tau } => TruncationPolicy::Adaptive { upsilon, tau },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MhSpec {
    #[default]
    Off,
    ForcedMove(usize),
    TruncatedProposal(usize),
}

impl MhSpec {
    pub fn mode(&self) -> AncestorMh {
        match *self {
            MhSpec::Off => AncestorMh::Off,
            MhSpec::ForcedMove(n_inner) => AncestorMh::ForcedMove { n_inner },
            MhSpec::TruncatedProposal(n_inner) => AncestorMh::TruncatedProposal { n_inner },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelBlock {
    pub flavor: String,
    /// Signed so that a negative count is reported as such.
    #[serde(rename = "N")]
    pub n: i64,
    #[serde(default)]
    pub truncation: TruncationSpec,
    #[serde(default)]
    pub ancestor_mh: MhSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriverConfig {
    /// Bayesian learning: alternate the kernel with a parameter draw.
    Gibbs {
        iterations: usize,
        #[serde(default)]
        burnin: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta0: Option<Vec<f64>>,
    },
    /// Maximum likelihood by particle SAEM.
    Psaem {
        iterations: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        theta0: Option<Vec<f64>>,
        #[serde(default = "default_exponent")]
        exponent: f64,
        /// Steps with `γ = 1` before the power decay starts.
        #[serde(default)]
        warmup: usize,
    },
    /// Repeated kernel draws at the model's parameters.
    Smoothing {
        iterations: usize,
        #[serde(default)]
        burnin: usize,
    },
}

fn default_exponent() -> f64 {
    0.7
}

impl DriverConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            DriverConfig::Gibbs { .. } => "gibbs",
            DriverConfig::Psaem { .. } => "psaem",
            DriverConfig::Smoothing { .. } => "smoothing",
        }
    }

    pub fn iterations(&self) -> usize {
        match *self {
            DriverConfig::Gibbs { iterations, .. } | DriverConfig::Psaem { iterations, .. } | DriverConfig::Smoothing { iterations, .. } => {
                iterations
            }
        }
    }

    pub fn burnin(&self) -> usize {
        match *self {
            DriverConfig::Gibbs { burnin, .. } | DriverConfig::Smoothing { burnin, .. } => burnin,
            DriverConfig::Psaem { .. } => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    #[serde(default = "default_lags")]
    pub acf_lags: usize,
    /// Write one state column per time step into `chain.csv`.
    #[serde(default = "default_true")]
    pub record_states: bool,
    /// Extra samplers run on the same data for comparison tables.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub compare: Vec<CompareSpec>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            acf_lags: default_lags(),
            record_states: true,
            compare: Vec::new(),
        }
    }
}

fn default_lags() -> usize {
    50
}

fn default_true() -> bool {
    true
}

/// A comparison sampler; unset fields are inherited from `kernel`.
/// `sampler` may also be `"ideal"` (exact smoothing draws, LGSS only).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<String>,
    #[serde(default, rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<TruncationSpec>,
}

/// A resolved sampler: a particle kernel or the exact LGSS smoother.
#[derive(Debug, Clone, PartialEq)]
pub enum Sampler {
    Kernel(KernelConfig),
    Ideal,
}

impl Sampler {
    pub fn label(&self) -> String {
        match self {
            Sampler::Ideal => "ideal".into(),
            Sampler::Kernel(k) => {
                let trunc = match k.truncation {
                    TruncationPolicy::Full => String::new(),
                    TruncationPolicy::Fixed(l) => format!(" l={l}"),
                    TruncationPolicy::Adaptive { upsilon, tau } => format!(" adaptive({upsilon},{tau})"),
                };
                format!("{} N={}{trunc}", k.flavor.name(), k.n)
            }
        }
    }
}

fn parse_flavor(field: &str, s: &str) -> Result<Flavor> {
    s.parse::<Flavor>().map_err(|e| CliError::config(field, e.to_string()))
}

fn particle_count(field: &str, n: i64) -> Result<usize> {
    if n < 1 {
        return Err(CliError::config(field, format!("particle count must be at least 1, got {n}")));
    }
    Ok(n as usize)
}

impl ExperimentConfig {
    /// Reads and parses a config file; type errors name the offending field.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            // serde reports a missing key at its parent; name the key itself.
            let msg = inner.to_string();
            let field = match missing_field(&msg) {
                Some(key) if field == "." => key.to_string(),
                Some(key) => format!("{field}.{key}"),
                None => field,
            };
            CliError::config(field, msg)
        })
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| CliError::config("seed", "required (runs are never seeded from the clock)"))
    }

    pub fn primary_sampler(&self) -> Result<KernelConfig> {
        let k = &self.kernel;
        let cfg = KernelConfig::new(particle_count("kernel.N", k.n)?, parse_flavor("kernel.flavor", &k.flavor)?)
            .with_truncation(k.truncation.policy())
            .with_mh(k.ancestor_mh.mode());
        cfg.truncation.validate().map_err(|e| CliError::config("kernel.truncation", e.to_string()))?;
        cfg.validate().map_err(|e| CliError::config("kernel", e.to_string()))?;
        Ok(cfg)
    }

    pub fn comparison_samplers(&self) -> Result<Vec<Sampler>> {
        let base = self.primary_sampler()?;
        self.diagnostics
            .compare
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let field = |f: &str| format!("diagnostics.compare[{i}].{f}");
                if c.sampler.as_deref() == Some("ideal") {
                    if !matches!(self.model, ModelConfig::Lgss { .. }) {
                        return Err(CliError::config(field("sampler"), "the ideal sampler exists only for the lgss model"));
                    }
                    return Ok(Sampler::Ideal);
                }
                let mut k = base;
                if let Some(s) = &c.sampler {
                    k.flavor = parse_flavor(&field("sampler"), s)?;
                }
                if let Some(n) = c.n {
                    k.n = particle_count(&field("N"), n)?;
                }
                if let Some(t) = &c.truncation {
                    k.truncation = t.policy();
                    k.truncation.validate().map_err(|e| CliError::config(field("truncation"), e.to_string()))?;
                }
                Ok(Sampler::Kernel(k))
            })
            .collect()
    }

    /// Semantic checks beyond the schema. `base` resolves relative data paths.
    pub fn validate(&self, base: &Path) -> Result<()> {
        self.seed()?;
        self.primary_sampler()?;
        self.comparison_samplers()?;
        self.validate_model(base)?;
        self.validate_driver()?;
        Ok(())
    }

    pub fn data_path(&self, base: &Path) -> Option<PathBuf> {
        match self.model.data() {
            DataSpec::Path(p) if p.is_relative() => Some(base.join(p)),
            DataSpec::Path(p) => Some(p.clone()),
            DataSpec::Simulate { .. } => None,
        }
    }

    fn validate_model(&self, base: &Path) -> Result<()> {
        match self.model.data() {
            DataSpec::Simulate { length, .. } if *length < 2 => {
                return Err(CliError::config("model.data.simulate.length", format!("need at least 2 time steps, got {length}")));
            }
            DataSpec::Path(_) => {
                let p = self.data_path(base).unwrap();
                if !p.is_file() {
                    return Err(CliError::config("model.data.path", format!("no such file: {}", p.display())));
                }
            }
            _ => {}
        }
        let bad = |e: pgas_core::Error| CliError::config("model", e.to_string());
        match &self.model {
            ModelConfig::Lgss { a, q, r, .. } => {
                LgssParams::new(*a, *q, *r).map_err(bad)?;
            }
            ModelConfig::Sv { a, sigma, .. } => {
                pgas_core::models::sv::StochasticVolatility::new(*a, *sigma, vec![]).map_err(bad)?;
            }
            ModelConfig::Degenerate { system, .. } => match system {
                SystemSpec::Modal { poles, q, r, .. } => {
                    if poles.is_empty() {
                        return Err(CliError::config("model.system.modal.poles", "at least one pole is required"));
                    }
                    if poles.iter().any(|p| p[1] < 0.0) {
                        return Err(CliError::config(
                            "model.system.modal.poles",
                            "list complex poles once, with a positive imaginary part",
                        ));
                    }
                    if !(*q > 0.0 && *r > 0.0) {
                        return Err(CliError::config("model.system.modal", "q and r must be positive"));
                    }
                }
                SystemSpec::Random { order, outputs, .. } => {
                    if *order < 2 || *outputs < 1 {
                        return Err(CliError::config("model.system.random", "need order >= 2 and outputs >= 1"));
                    }
                }
            },
            ModelConfig::Sir { params, .. } => {
                params.resolve().validate().map_err(|e| CliError::config("model.params", e.to_string()))?;
            }
        }
        Ok(())
    }

    fn validate_driver(&self) -> Result<()> {
        let d = &self.driver;
        if d.iterations() == 0 {
            return Err(CliError::config("driver.iterations", "must be positive"));
        }
        if d.burnin() >= d.iterations() {
            return Err(CliError::config(
                "driver.burnin",
                format!("burn-in ({}) must be below the iteration count ({})", d.burnin(), d.iterations()),
            ));
        }
        let learnable = match (&self.model, d) {
            (_, DriverConfig::Smoothing { .. }) => true,
            (ModelConfig::Lgss { .. }, _) => true,
            (ModelConfig::Sir { .. }, DriverConfig::Gibbs { .. }) => true,
            _ => false,
        };
        if !learnable {
            return Err(CliError::config(
                "driver.kind",
                format!("'{}' is not available for the {} model", d.kind(), self.model.name()),
            ));
        }
        let theta0 = match d {
            DriverConfig::Gibbs { theta0, .. } | DriverConfig::Psaem { theta0, .. } => theta0.as_ref(),
            DriverConfig::Smoothing { .. } => None,
        };
        if let Some(t) = theta0 {
            let want = match self.model {
                ModelConfig::Lgss { .. } => 3,
                _ => 6,
            };
            if t.len() != want {
                return Err(CliError::config("driver.theta0", format!("expected {want} values, got {}", t.len())));
            }
            if let ModelConfig::Lgss { .. } = self.model {
                LgssParams::new(t[0], t[1], t[2]).map_err(|e| CliError::config("driver.theta0", e.to_string()))?;
            } else if t.iter().take(4).any(|v| !(*v > 0.0)) || !(t[5] > 0.0) {
                return Err(CliError::config("driver.theta0", "gamma, r0, alpha, noise and sigma must be positive"));
            }
        }
        if let DriverConfig::Psaem { exponent, .. } = d {
            if !(*exponent > 0.5 && *exponent <= 1.0) {
                return Err(CliError::config("driver.exponent", format!("must lie in (0.5, 1], got {exponent}")));
            }
        }
        Ok(())
    }
}

fn missing_field(msg: &str) -> Option<&str> {
    let rest = msg.strip_prefix("missing field `")?;
    rest.split('`').next()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "seed": 1,
        "model": {"name": "lgss", "a": 0.8, "q": 1.0, "r": 0.5, "data": {"simulate": {"length": 20, "seed": 2}}},
        "kernel": {"flavor": "pgas", "N": 5},
        "driver": {"kind": "smoothing", "iterations": 10}
    }"#;

    fn field_of(text: &str) -> String {
        let cfg = ExperimentConfig::parse(text);
        let err = match cfg {
            Err(e) => e,
            Ok(c) => c.validate(Path::new(".")).unwrap_err(),
        };
        match err {
            CliError::Config { field, .. } => field,
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn minimal_config_is_valid() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        cfg.validate(Path::new(".")).unwrap();
        assert_eq!(cfg.diagnostics.acf_lags, 50);
        assert_eq!(cfg.kernel.truncation, TruncationSpec::Full);
    }

    #[test]
    fn errors_name_the_field() {
        assert_eq!(field_of(&MINIMAL.replace("\"pgas\"", "\"pgx\"")), "kernel.flavor");
        assert_eq!(field_of(&MINIMAL.replace("\"N\": 5", "\"N\": -3")), "kernel.N");
        assert_eq!(field_of(&MINIMAL.replace("\"seed\": 1,", "")), "seed");
        assert_eq!(field_of(&MINIMAL.replace("\"N\": 5", "\"N\": \"five\"")), "kernel.N");
        assert_eq!(field_of(&MINIMAL.replace("\"iterations\": 10", "\"iterations\": 10, \"burnin\": 10")), "driver.burnin");
        assert_eq!(field_of(&MINIMAL.replace("\"smoothing\"", "\"psaem\"").replace("\"lgss\", \"a\": 0.8, \"q\": 1.0, \"r\": 0.5", "\"sv\", \"a\": 0.9, \"sigma\": 0.5")), "driver.kind");
    }

    #[test]
    fn missing_nested_key_is_qualified() {
        let text = MINIMAL.replace("\"flavor\": \"pgas\", ", "");
        assert_eq!(field_of(&text), "kernel.flavor");
    }

    #[test]
    fn truncation_forms() {
        for (json, want) in [
            ("\"full\"", TruncationSpec::Full),
            ("{\"fixed\": 3}", TruncationSpec::Fixed(3)),
            ("{\"adaptive\": {\"upsilon\": 0.1, \"tau\": 0.01}}", TruncationSpec::Adaptive { upsilon: 0.1, tau: 0.01 }),
        ] {
            let t: TruncationSpec = serde_json::from_str(json).unwrap();
            assert_eq!(t, want);
        }
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        let again = ExperimentConfig::parse(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn comparison_inherits_kernel_settings() {
        let text = MINIMAL.replace(
            "\"driver\"",
            "\"diagnostics\": {\"compare\": [{\"sampler\": \"pg\"}, {\"N\": 20}, {\"sampler\": \"ideal\"}]}, \"driver\"",
        );
        let cfg = ExperimentConfig::parse(&text).unwrap();
        let s = cfg.comparison_samplers().unwrap();
        assert_eq!(s[0], Sampler::Kernel(KernelConfig::pg(5)));
        assert_eq!(s[1], Sampler::Kernel(KernelConfig::pgas(20)));
        assert_eq!(s[2], Sampler::Ideal);
    }
}
