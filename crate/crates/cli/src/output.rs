//! Output files of `pgas-mc run`.
//!
//! Per chain (suffix `-c` when more than one chain runs):
//!
//! - `chain.csv`: `iteration`, one column per parameter, then one column per
//!   time step (`x_0, x_1, ...`) when states are recorded. Kept iterations only.
//! - `diagnostics.csv`: long format `metric,index,value` with per-time update
//!   rates, per-iteration truncation levels and ancestor switches, and
//!   acceptance rates.
//! - `summary.json`: posterior means and SDs, RMSE against exact smoothing
//!   means when available, ACF tables for the chain and every comparison
//!   sampler, the config echo and the build's git description.
//!
//! Every CSV starts with `# config: <json>` and `# seed: ...` lines.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use pgas_core::diagnostics::{acf, mean, running_rmse, std_dev, update_rates, ChainRecord};
use serde_json::{json, Value};

use crate::config::{DriverConfig, Sampler};
use crate::error::{CliError, Result};
use crate::plot::{render, Panel};
use crate::run::{ChainResult, Experiment};

/// `git describe` of the build, or `unknown`.
pub const GIT_DESCRIBE: &str = env!("PGAS_MC_GIT_DESCRIBE");

fn header(exp: &Experiment, r: &ChainResult) -> Result<Vec<String>> {
    let config = serde_json::to_string(&exp.config).map_err(|e| CliError::config("config", e.to_string()))?;
    Ok(vec![
        format!("config: {config}"),
        format!("seed: {} (chain {}, stream {})", exp.seed, r.chain, r.stream),
    ])
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::io(path, e)
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::io(path, std::io::Error::other(e))
}

fn csv_writer(path: &Path, header: &[String]) -> Result<csv::Writer<File>> {
    let mut f = File::create(path).map_err(io_err(path))?;
    for line in header {
        writeln!(f, "# {line}").map_err(io_err(path))?;
    }
    Ok(csv::Writer::from_writer(f))
}

fn state_names(label: &str, rec: &ChainRecord) -> Vec<String> {
    let width = rec.states.first().map_or(0, |r| r.len());
    (0..width).map(|t| format!("{label}_{t}")).collect()
}

pub fn write_chain_csv(path: &Path, exp: &Experiment, r: &ChainResult) -> Result<()> {
    let rec = &r.record;
    let mut w = csv_writer(path, &header(exp, r)?)?;
    let e = csv_err(path);
    let mut names = vec!["iteration".to_string()];
    names.extend(rec.param_names.iter().cloned());
    names.extend(state_names(exp.state_label(), rec));
    w.write_record(&names).map_err(&e)?;
    // SAEM traces start at n = 1; Gibbs chains at n = 0.
    let offset = matches!(exp.config.driver, DriverConfig::Psaem { .. }) as usize;
    for n in rec.burnin..rec.len() {
        let mut row = vec![(n + offset).to_string()];
        if let Some(p) = rec.params.get(n) {
            row.extend(p.iter().map(|v| v.to_string()));
        }
        if let Some(s) = rec.states.get(n) {
            row.extend(s.iter().map(|v| v.to_string()));
        }
        w.write_record(&row).map_err(&e)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_diagnostics_csv(path: &Path, exp: &Experiment, r: &ChainResult) -> Result<()> {
    let rec = &r.record;
    let mut w = csv_writer(path, &header(exp, r)?)?;
    let e = csv_err(path);
    w.write_record(["metric", "index", "value"]).map_err(&e)?;
    let mut put = |metric: &str, index: String, value: f64| w.write_record([metric.to_string(), index, value.to_string()]);
    if rec.kept_states().len() >= 2 {
        for (t, v) in update_rates(rec.kept_states()).iter().enumerate() {
            put("update_rate", t.to_string(), *v).map_err(&e)?;
        }
    }
    for (n, v) in rec.levels.iter().enumerate() {
        put("truncation_level", n.to_string(), *v).map_err(&e)?;
    }
    for (n, v) in rec.ancestor_switches.iter().enumerate() {
        put("ancestor_switches", n.to_string(), *v as f64).map_err(&e)?;
    }
    if rec.param_proposed > 0 {
        put("param_acceptance", String::new(), rec.param_acceptance()).map_err(&e)?;
    }
    if rec.mh_proposed > 0 {
        put("ancestor_mh_acceptance", String::new(), rec.mh_acceptance()).map_err(&e)?;
    }
    w.flush().map_err(io_err(path))
}

/// Series whose autocorrelation is tabulated: every parameter, or three
/// state coordinates when parameters are fixed.
fn acf_series(label: &str, rec: &ChainRecord) -> Vec<(String, Vec<f64>)> {
    if !rec.param_names.is_empty() {
        return rec.param_names.iter().enumerate().map(|(j, name)| (name.clone(), rec.kept_param(j))).collect();
    }
    let kept = rec.kept_states();
    let Some(width) = kept.first().map(|r| r.len()) else {
        return Vec::new();
    };
    let mut ts = vec![0, width / 2, width - 1];
    ts.dedup();
    ts.into_iter()
        .map(|t| (format!("{label}_{t}"), kept.iter().map(|row| row[t]).collect()))
        .collect()
}

fn acf_table(label: &str, rec: &ChainRecord, lags: usize, centers: Option<&[(String, f64)]>) -> Value {
    let mut table = serde_json::Map::new();
    for (name, v) in acf_series(label, rec) {
        if v.len() < 2 {
            continue;
        }
        let center = centers.and_then(|c| c.iter().find(|(n, _)| *n == name)).map_or_else(|| mean(&v), |c| c.1);
        let value = acf(&v, lags.min(v.len() - 1), center).map_or(Value::Null, |a| json!(a));
        table.insert(name, value);
    }
    Value::Object(table)
}

fn posterior(rec: &ChainRecord) -> Value {
    rec.param_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let v = rec.kept_param(j);
            json!({"name": name, "mean": mean(&v), "sd": if v.len() > 1 { std_dev(&v) } else { 0.0 }})
        })
        .collect()
}

fn sampler_summary(exp: &Experiment, r: &ChainResult, centers: Option<&[(String, f64)]>, truth: Option<&[f64]>) -> Value {
    let rec = &r.record;
    let rates = if rec.kept_states().len() >= 2 { update_rates(rec.kept_states()) } else { Vec::new() };
    let rmse = truth
        .filter(|t| rec.kept_states().first().is_some_and(|row| row.len() == t.len()))
        .and_then(|t| running_rmse(rec.kept_states(), t).last().copied());
    let mut s = json!({
        "sampler": r.sampler.label(),
        "stream": r.stream,
        "iterations": rec.len(),
        "burnin": rec.burnin,
        "posterior": posterior(rec),
        "acf": acf_table(exp.state_label(), rec, exp.config.diagnostics.acf_lags, centers),
        "state_means": rec.state_means(),
        "rmse": rmse,
        "mean_update_rate": if rates.is_empty() { Value::Null } else { json!(mean(&rates)) },
        "update_rate_t0": rates.first(),
    });
    if let Sampler::Kernel(_) = r.sampler {
        if !rec.levels.is_empty() {
            s["mean_truncation_level"] = json!(rec.mean_level());
        }
        if rec.mh_proposed > 0 {
            s["ancestor_mh_acceptance"] = json!(rec.mh_acceptance());
        }
    }
    if rec.param_proposed > 0 {
        s["param_acceptance"] = json!(rec.param_acceptance());
    }
    if let DriverConfig::Psaem { .. } = exp.config.driver {
        let last = rec.params.last().cloned().unwrap_or_default();
        s["estimate"] = rec.param_names.iter().cloned().zip(last).map(|(n, v)| (n, json!(v))).collect::<serde_json::Map<_, _>>().into();
    }
    s
}

pub fn summary(exp: &Experiment, primary: &ChainResult, others: &[&ChainResult]) -> Result<Value> {
    let truth = exp.reference_means()?;
    // The ideal sampler's posterior mean centres every ACF when available.
    let ideal = others.iter().find(|r| r.sampler == Sampler::Ideal);
    let centers: Option<Vec<(String, f64)>> =
        ideal.map(|r| acf_series(exp.state_label(), &r.record).into_iter().map(|(n, v)| (n, mean(&v))).collect());
    let center_label = if centers.is_some() { "ideal sampler posterior mean" } else { "chain mean" };
    let mut s = sampler_summary(exp, primary, centers.as_deref(), truth.as_deref());
    s["acf_center"] = json!(center_label);
    s["acf_lags"] = json!(exp.config.diagnostics.acf_lags);
    s["rmse_reference"] = match truth {
        Some(_) => json!("exact Kalman smoothing means at the model parameters"),
        None => Value::Null,
    };
    s["comparisons"] = others.iter().map(|r| sampler_summary(exp, r, centers.as_deref(), truth.as_deref())).collect();
    Ok(json!({
        "tool": "pgas-mc",
        "version": env!("CARGO_PKG_VERSION"),
        "git_describe": GIT_DESCRIBE,
        "config": exp.config,
        "seed": exp.seed,
        "chain": primary.chain,
        "driver": exp.config.driver.kind(),
        "model": exp.config.model.name(),
        "result": s,
    }))
}

fn plot_panels(exp: &Experiment, primary: &ChainResult, others: &[&ChainResult]) -> (Vec<Panel>, Vec<Panel>) {
    let label = exp.state_label();
    let series = acf_series(label, &primary.record);
    let traces = series
        .iter()
        .take(6)
        .map(|(name, v)| Panel {
            title: format!("trace: {name}"),
            lines: vec![(primary.sampler.label(), v.clone())],
        })
        .collect();
    let lags = exp.config.diagnostics.acf_lags;
    let acfs = series
        .iter()
        .take(6)
        .map(|(name, _)| {
            let lines = std::iter::once(primary)
                .chain(others.iter().copied())
                .filter_map(|r| {
                    let v = acf_series(label, &r.record).into_iter().find(|(n, _)| n == name)?.1;
                    let a = acf(&v, lags.min(v.len().saturating_sub(1)), mean(&v)).ok()?;
                    Some((r.sampler.label(), a))
                })
                .collect();
            Panel {
                title: format!("autocorrelation: {name}"),
                lines,
            }
        })
        .collect();
    (traces, acfs)
}

/// Writes every output file and returns their paths.
pub fn write_outputs(exp: &Experiment, results: &[ChainResult], chains: usize, dir: &Path, plot: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for c in 0..chains {
        let suffix = if chains > 1 { format!("-{c}") } else { String::new() };
        let mine: Vec<&ChainResult> = results.iter().filter(|r| r.chain == c).collect();
        let (primary, others) = mine.split_first().expect("primary result per chain");
        let chain_path = dir.join(format!("chain{suffix}.csv"));
        write_chain_csv(&chain_path, exp, primary)?;
        let diag_path = dir.join(format!("diagnostics{suffix}.csv"));
        write_diagnostics_csv(&diag_path, exp, primary)?;
        let summary_path = dir.join(format!("summary{suffix}.json"));
        let text = serde_json::to_string_pretty(&summary(exp, primary, others)?).map_err(|e| CliError::config("config", e.to_string()))?;
        std::fs::write(&summary_path, text + "\n").map_err(io_err(&summary_path))?;
        written.extend([chain_path, diag_path, summary_path]);
        if plot {
            let (traces, acfs) = plot_panels(exp, primary, others);
            for (name, panels) in [("trace", traces), ("acf", acfs)] {
                let p = dir.join(format!("{name}{suffix}.svg"));
                std::fs::write(&p, render(&panels)).map_err(io_err(&p))?;
                written.push(p);
            }
        }
    }
    Ok(written)
}
