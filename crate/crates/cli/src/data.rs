//! Observation files and simulated data sets.
//!
//! Data files are CSV with optional `#` comment lines, a header, an optional
//! `t` column and one column per output named `y` or `y0, y1, ...`.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use pgas_core::models::degenerate::{random_stable_system, DegenerateLgss};
use pgas_core::models::lgss::LgssParams;
use pgas_core::models::sir::sir_simulate;
use pgas_core::models::sv::StochasticVolatility;
use pgas_core::rng::seeded;

use crate::config::{DataSpec, ModelConfig, SirOverrides, SystemSpec};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `y[t]` holds every output at time `t`.
    pub y: Vec<Vec<f64>>,
    /// Simulated latent quantities, one row per time step; empty for files.
    pub latent_names: Vec<String>,
    pub latent: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// The single output column; errors for multi-output data.
    pub fn scalar(&self) -> Result<Vec<f64>> {
        self.y
            .iter()
            .map(|row| match row.as_slice() {
                [v] => Ok(*v),
                _ => Err(CliError::config("model.data", format!("expected one output column, got {}", row.len()))),
            })
            .collect()
    }
}

pub fn reference_poles() -> Vec<[f64; 2]> {
    vec![[-0.65, 0.0], [-0.12, 0.0], [0.22, 0.10]]
}

pub fn build_system(spec: &SystemSpec) -> Result<DegenerateLgss> {
    let sys = match spec {
        SystemSpec::Modal { poles, q, r, seed } => {
            let poles: Vec<_> = poles.iter().map(|p| nalgebra::Complex::new(p[0], p[1])).collect();
            DegenerateLgss::from_poles(&poles, *q, *r, &mut seeded(*seed))
        }
        SystemSpec::Random { order, outputs, seed } => random_stable_system(*order, *outputs, &mut seeded(*seed)),
    };
    sys.map_err(|e| CliError::config("model.system", e.to_string()))
}

pub fn simulate(model: &ModelConfig, length: usize, seed: u64) -> Result<Dataset> {
    let rng = &mut seeded(seed);
    let bad = |e: pgas_core::Error| CliError::config("model", e.to_string());
    let scalar = |x: Vec<f64>, y: Vec<f64>, name: &str| Dataset {
        y: y.into_iter().map(|v| vec![v]).collect(),
        latent_names: vec![name.to_string()],
        latent: x.into_iter().map(|v| vec![v]).collect(),
    };
    Ok(match model {
        ModelConfig::Lgss { a, q, r, .. } => {
            let (x, y) = LgssParams::new(*a, *q, *r).map_err(bad)?.simulate(length, rng);
            scalar(x, y, "x")
        }
        ModelConfig::Sv { a, sigma, .. } => {
            let (x, y) = StochasticVolatility::new(*a, *sigma, vec![]).map_err(bad)?.simulate(length, rng);
            scalar(x, y, "x")
        }
        ModelConfig::Degenerate { system, .. } => {
            let sys = build_system(system)?;
            let (_, states, y) = sys.simulate(length, rng);
            Dataset {
                y,
                latent_names: (0..sys.order()).map(|j| format!("s{j}")).collect(),
                latent: states,
            }
        }
        ModelConfig::Sir { params, .. } => {
            let p = params.resolve();
            let sim = sir_simulate(&p, length, rng);
            Dataset {
                y: sim.y.iter().map(|v| vec![*v]).collect(),
                latent_names: ["mean_infected", "s", "i", "r"].map(String::from).to_vec(),
                latent: sim
                    .mean_infected
                    .iter()
                    .zip(&sim.week_end)
                    .map(|(ib, c)| vec![*ib, c.s, c.i, c.r])
                    .collect(),
            }
        }
    })
}

/// Observations for a config: simulated or read from `path`.
pub fn load(model: &ModelConfig, path: Option<&Path>) -> Result<Dataset> {
    match (model.data(), path) {
        (DataSpec::Simulate { length, seed }, _) => simulate(model, *length, *seed),
        (DataSpec::Path(_), Some(p)) => read_observations(p).map(|y| Dataset {
            y,
            latent_names: Vec::new(),
            latent: Vec::new(),
        }),
        (DataSpec::Path(p), None) => Err(CliError::config("model.data.path", format!("unresolved path {}", p.display()))),
    }
}

pub fn read_observations(path: &Path) -> Result<Vec<Vec<f64>>> {
    let field = "model.data.path";
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::config(field, format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| CliError::config(field, e.to_string()))?.clone();
    let cols: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| *h == "y" || (h.starts_with('y') && h[1..].parse::<usize>().is_ok()))
        .map(|(i, _)| i)
        .collect();
    if cols.is_empty() {
        return Err(CliError::config(field, format!("{}: no `y` column in header", path.display())));
    }
    let mut y = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::config(field, e.to_string()))?;
        let row = cols
            .iter()
            .map(|&c| {
                rec.get(c)
                    .and_then(|s| s.parse::<f64>().ok())
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| CliError::config(field, format!("{}: bad value on data row {}", path.display(), line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        y.push(row);
    }
    if y.len() < 2 {
        return Err(CliError::config(field, format!("{}: need at least 2 observations", path.display())));
    }
    Ok(y)
}

fn write_table(path: &Path, header: &[String], names: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut f = File::create(path).map_err(|e| CliError::io(path, e))?;
    for line in header {
        writeln!(f, "# {line}").map_err(|e| CliError::io(path, e))?;
    }
    let mut w = csv::Writer::from_writer(f);
    let io = |e: csv::Error| CliError::io(path, std::io::Error::other(e));
    w.write_record(std::iter::once("t").chain(names.iter().map(|s| s.as_str()))).map_err(io)?;
    for (t, row) in rows.iter().enumerate() {
        w.write_record(std::iter::once(t.to_string()).chain(row.iter().map(|v| v.to_string()))).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Writes `data.csv` (observations) and, when known, `truth.csv` (latents).
pub fn write_dataset(dir: &Path, ds: &Dataset, header: &[String]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let p = ds.y.first().map_or(1, |r| r.len());
    let names: Vec<String> = if p == 1 { vec!["y".into()] } else { (0..p).map(|j| format!("y{j}")).collect() };
    write_table(&dir.join("data.csv"), header, &names, &ds.y)?;
    if !ds.latent.is_empty() {
        write_table(&dir.join("truth.csv"), header, &ds.latent_names, &ds.latent)?;
    }
    Ok(())
}

/// Reference model for `pgas-mc simulate <name>`.
pub fn default_model(name: &str, seed: u64) -> Result<(ModelConfig, usize)> {
    let data = DataSpec::Simulate { length: 0, seed };
    Ok(match name {
        "lgss" => (ModelConfig::Lgss { a: 0.8, q: 1.0, r: 0.5, data }, 100),
        "sv" => (ModelConfig::Sv { a: 0.9, sigma: 0.5, data }, 400),
        "degenerate" => (
            ModelConfig::Degenerate {
                system: SystemSpec::Modal {
                    poles: reference_poles(),
                    q: 0.1,
                    r: 0.1,
                    seed,
                },
                data,
            },
            200,
        ),
        "sir" => {
            let weeks = SirOverrides::default().resolve().weeks_in_years(4.0);
            (
                ModelConfig::Sir {
                    params: SirOverrides::default(),
                    data,
                },
                weeks,
            )
        }
        other => {
            return Err(CliError::config(
                "model",
                format!("unknown model '{other}' (expected lgss, sv, degenerate or sir)"),
            ))
        }
    })
}
