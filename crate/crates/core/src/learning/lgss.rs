//! Parameter conditionals and the closed-form M-step for the scalar LGSS.
//!
//! Prior: `q ∼ IG(α_q, β_q)`, `a | q ∼ N(m_a, q · s_a)`, `r ∼ IG(α_r, β_r)`,
//! restricted to `|a| < 1`.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::gauss::{log_normal, normal};
use crate::learning::saem::SaemModel;
use crate::learning::{Acceptance, ParameterModel};
use crate::models::lgss::{Lgss, LgssParams};
use crate::oracles::kalman::ScalarLgss;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LgssPrior {
    pub a_mean: f64,
    /// Prior variance of `a` in units of `q`.
    pub a_scale: f64,
    pub q_shape: f64,
    pub q_rate: f64,
    pub r_shape: f64,
    pub r_rate: f64,
}

impl Default for LgssPrior {
    fn default() -> Self {
        Self {
            a_mean: 0.0,
            a_scale: 1.0,
            q_shape: 0.01,
            q_rate: 0.01,
            r_shape: 0.01,
            r_rate: 0.01,
        }
    }
}

fn inv_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    let g = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::Numerical {
        t: 0,
        msg: format!("inverse-gamma({shape}, {rate}): {e}"),
    })?;
    Ok(1.0 / g.sample(rng))
}

/// Normal–inverse-gamma posterior of the AR(1) regression `x_{t+1} = a x_t + v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArPosterior {
    pub mean: f64,
    /// Posterior precision of `a` in units of `1 / q`.
    pub precision: f64,
    pub shape: f64,
    pub rate: f64,
}

pub fn ar_posterior(x: &[f64], prior: &LgssPrior) -> ArPosterior {
    let lam0 = 1.0 / prior.a_scale;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for w in x.windows(2) {
        sxx += w[0] * w[0];
        sxy += w[0] * w[1];
        syy += w[1] * w[1];
    }
    let lam = lam0 + sxx;
    let mean = (lam0 * prior.a_mean + sxy) / lam;
    let pairs = x.len().saturating_sub(1) as f64;
    ArPosterior {
        mean,
        precision: lam,
        shape: prior.q_shape + 0.5 * pairs,
        rate: prior.q_rate + 0.5 * (syy + lam0 * prior.a_mean * prior.a_mean - lam * mean * mean).max(0.0),
    }
}

/// Draws `(a, q, r)` from the conjugate conditional that ignores the initial
/// state term. `a` is not restricted here.
pub fn lgss_conjugate_posterior<R: Rng + ?Sized>(x: &[f64], y: &[f64], prior: &LgssPrior, rng: &mut R) -> Result<(f64, f64, f64)> {
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            t: 0,
            msg: "non-finite value in sufficient statistics".into(),
        });
    }
    let post = ar_posterior(x, prior);
    let q = inv_gamma(post.shape, post.rate, rng)?;
    let a = normal(rng, post.mean, (q / post.precision).sqrt());
    let n = x.len().min(y.len());
    let sse: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - xi).powi(2)).sum();
    let r = inv_gamma(prior.r_shape + 0.5 * n as f64, prior.r_rate + 0.5 * sse, rng)?;
    Ok((a, q, r))
}

/// Scalar LGSS as a learnable family.
#[derive(Debug, Clone)]
pub struct LgssParameterModel {
    pub y: Vec<f64>,
    pub prior: LgssPrior,
}

impl LgssParameterModel {
    pub fn new(y: Vec<f64>, prior: LgssPrior) -> Self {
        Self { y, prior }
    }

    /// Exact conditional draw: a conjugate proposal corrected by an
    /// independence MH step for the stationary initial-state density.
    pub fn conditional<R: Rng + ?Sized>(&self, theta: &LgssParams, x: &[f64], rng: &mut R) -> Result<(LgssParams, Acceptance)> {
        let (a, q, r) = lgss_conjugate_posterior(x, &self.y, &self.prior, rng)?;
        let acc = Acceptance { accepted: 0, proposed: 1 };
        if a.abs() >= 1.0 {
            return Ok((*theta, acc));
        }
        let proposal = LgssParams { a, q, r };
        let x0 = x.first().copied().unwrap_or(0.0);
        let log_alpha = log_normal(x0, 0.0, proposal.initial_variance()) - log_normal(x0, 0.0, theta.initial_variance());
        if log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha {
            Ok((proposal, Acceptance { accepted: 1, proposed: 1 }))
        } else {
            Ok((*theta, acc))
        }
    }
}

impl ParameterModel for LgssParameterModel {
    type Params = LgssParams;
    type Target = Lgss;

    fn build(&self, theta: &LgssParams) -> Result<Lgss> {
        Lgss::from_params(*theta, self.y.clone())
    }

    fn sample_posterior<R: Rng + ?Sized>(&self, theta: &LgssParams, x: &[f64], rng: &mut R) -> Result<(LgssParams, Acceptance)> {
        self.conditional(theta, x, rng)
    }

    fn param_names(&self) -> Vec<String> {
        vec!["a".into(), "q".into(), "r".into()]
    }

    fn to_vec(&self, theta: &LgssParams) -> Vec<f64> {
        theta.to_vec()
    }
}

/// Largest `|a|` the M-step returns.
pub const MAX_ABS_A: f64 = 0.999;

/// Statistics `[Σ x_t², Σ x_t x_{t+1}, Σ x_{t+1}², Σ (y_t − x_t)²]`; the
/// first three over consecutive pairs.
pub fn lgss_statistics(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut s = vec![0.0; 4];
    for w in x.windows(2) {
        s[0] += w[0] * w[0];
        s[1] += w[0] * w[1];
        s[2] += w[1] * w[1];
    }
    s[3] = x.iter().zip(y).map(|(a, b)| (b - a).powi(2)).sum();
    s
}

/// Closed-form maximizer of the complete-data log-likelihood without the
/// initial-state term.
pub fn lgss_maximize(stats: &[f64], horizon: usize) -> Result<LgssParams> {
    if stats.len() != 4 || stats.iter().any(|v| !v.is_finite()) || !(stats[0] > 0.0) || horizon < 2 {
        return Err(Error::Numerical {
            t: 0,
            msg: format!("cannot maximize with statistics {stats:?}"),
        });
    }
    let a = (stats[1] / stats[0]).clamp(-MAX_ABS_A, MAX_ABS_A);
    let q = (stats[2] - 2.0 * a * stats[1] + a * a * stats[0]) / (horizon - 1) as f64;
    let r = stats[3] / horizon as f64;
    LgssParams::new(a, q.max(1e-12), r.max(1e-12))
}

/// Expected statistics under the exact smoothing distribution at `theta`.
pub fn lgss_expected_statistics(theta: &LgssParams, y: &[f64]) -> Vec<f64> {
    let sc = ScalarLgss::stationary(theta.a, theta.q, theta.r);
    let (m, p, lag) = sc.smooth_with_lag(y);
    let n = y.len();
    let mut s = vec![0.0; 4];
    for t in 0..n.saturating_sub(1) {
        s[0] += m[t] * m[t] + p[t];
        s[1] += m[t] * m[t + 1] + lag[t];
        s[2] += m[t + 1] * m[t + 1] + p[t + 1];
    }
    s[3] = (0..n).map(|t| (y[t] - m[t]).powi(2) + p[t]).sum();
    s
}

/// Exact EM with the same M-step: iterates until the parameter change is
/// below `tol` or `max_iter` is reached.
pub fn lgss_em(y: &[f64], theta0: LgssParams, max_iter: usize, tol: f64) -> Result<LgssParams> {
    let mut theta = theta0;
    for _ in 0..max_iter {
        let next = lgss_maximize(&lgss_expected_statistics(&theta, y), y.len())?;
        let change = (next.a - theta.a).abs().max((next.q - theta.q).abs()).max((next.r - theta.r).abs());
        theta = next;
        if change < tol {
            break;
        }
    }
    Ok(theta)
}

impl SaemModel for LgssParameterModel {
    fn sufficient_statistics(&self, x: &[f64]) -> Vec<f64> {
        lgss_statistics(x, &self.y)
    }

    fn maximize(&self, stats: &[f64]) -> Result<LgssParams> {
        lgss_maximize(stats, self.y.len())
    }
}
