//! Metropolis-within-Gibbs parameter updates for the SIR model.
//!
//! `(γ, R₀, α, F)` get flat priors on the positive axis and are moved by a
//! random walk on their logarithms; `(ρ, σ²)` have a conjugate
//! normal–inverse-gamma prior and are drawn exactly.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::gauss::normal;
use crate::learning::mh::{pilot_tune, rw_mh_step};
use crate::learning::{Acceptance, ParameterModel};
use crate::models::sir::{logit, SirModel, SirParams};

/// `ρ | σ² ∼ N(rho_mean, rho_scale · σ²)`, `σ² ∼ IG(sigma_shape, sigma_rate)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirPrior {
    pub rho_mean: f64,
    pub rho_scale: f64,
    pub sigma_shape: f64,
    pub sigma_rate: f64,
}

impl Default for SirPrior {
    fn default() -> Self {
        Self {
            rho_mean: 1.0,
            rho_scale: 0.5,
            sigma_shape: 0.01,
            sigma_rate: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SirParameterModel {
    /// Supplies the fixed quantities (population, μ, Δ, m, initial state).
    pub base: SirParams,
    pub y: Vec<f64>,
    pub prior: SirPrior,
    /// Random-walk scales on `(ln γ, ln R₀, ln α, ln F)`.
    pub scales: Vec<f64>,
    pub mh_steps: usize,
}

fn block(theta: &SirParams) -> Vec<f64> {
    vec![theta.gamma.ln(), theta.r0.ln(), theta.alpha.ln(), theta.noise.ln()]
}

fn with_block(theta: &SirParams, phi: &[f64]) -> SirParams {
    SirParams {
        gamma: phi[0].exp(),
        r0: phi[1].exp(),
        alpha: phi[2].exp(),
        noise: phi[3].exp(),
        ..theta.clone()
    }
}

impl SirParameterModel {
    pub fn new(base: SirParams, y: Vec<f64>) -> Self {
        Self {
            base,
            y,
            prior: SirPrior::default(),
            scales: vec![0.02; 4],
            mh_steps: 10,
        }
    }

    /// Log target of the random-walk block in log coordinates, Jacobian
    /// included.
    fn log_block_target(&self, theta: &SirParams, x: &[Vec<f64>], phi: &[f64]) -> f64 {
        if phi.iter().any(|v| !v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let cand = with_block(theta, phi);
        match SirModel::new(cand, self.y.clone()) {
            Ok(m) => m.log_likelihood(x) + phi.iter().sum::<f64>(),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    /// Conjugate draw of `(ρ, σ)` given the latent log-odds series.
    fn draw_observation_params<R: Rng + ?Sized>(&self, theta: &SirParams, x: &[Vec<f64>], rng: &mut R) -> Result<SirParams> {
        let model = SirModel::new(theta.clone(), self.y.clone())?;
        let traj = model.trajectory(x);
        let n = theta.population;
        let z: Vec<f64> = traj.mean_infected.iter().map(|ib| logit(ib / n)).collect();
        if z.iter().any(|v| !v.is_finite()) {
            return Ok(theta.clone());
        }
        let p = &self.prior;
        let lam0 = 1.0 / p.rho_scale;
        let szz: f64 = z.iter().map(|v| v * v).sum();
        let szy: f64 = z.iter().zip(&self.y).map(|(a, b)| a * b).sum();
        let syy: f64 = self.y.iter().map(|v| v * v).sum();
        let lam = lam0 + szz;
        let mean = (lam0 * p.rho_mean + szy) / lam;
        let shape = p.sigma_shape + 0.5 * self.y.len() as f64;
        let rate = p.sigma_rate + 0.5 * (syy + lam0 * p.rho_mean * p.rho_mean - lam * mean * mean).max(0.0);
        let g = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::Numerical {
            t: 0,
            msg: format!("sigma conditional: {e}"),
        })?;
        let var = 1.0 / g.sample(rng);
        let rho = normal(rng, mean, (var / lam).sqrt());
        Ok(SirParams {
            rho,
            sigma: var.sqrt(),
            ..theta.clone()
        })
    }

    /// Pilot phase: adapts the random-walk scales at fixed `x` until the
    /// acceptance rate is within 25–40%.
    pub fn tune<R: Rng + ?Sized>(&mut self, theta: &SirParams, x: &[Vec<f64>], rng: &mut R) -> f64 {
        let target = |phi: &[f64]| self.log_block_target(theta, x, phi);
        let (scales, rate) = pilot_tune(&block(theta), target, self.scales.clone(), 30, 50, (0.25, 0.40), rng);
        self.scales = scales;
        rate
    }
}

impl ParameterModel for SirParameterModel {
    type Params = SirParams;
    type Target = SirModel;

    fn build(&self, theta: &SirParams) -> Result<SirModel> {
        SirModel::new(theta.clone(), self.y.clone())
    }

    fn sample_posterior<R: Rng + ?Sized>(&self, theta: &SirParams, x: &[Vec<f64>], rng: &mut R) -> Result<(SirParams, Acceptance)> {
        let mut phi = block(theta);
        let mut lp = self.log_block_target(theta, x, &phi);
        let mut acc = Acceptance::default();
        for _ in 0..self.mh_steps {
            let (step, lp_new) = rw_mh_step(&phi, lp, |p| self.log_block_target(theta, x, p), &self.scales, rng);
            acc.accepted += step.accepted as usize;
            acc.proposed += 1;
            phi = step.value;
            lp = lp_new;
        }
        let moved = with_block(theta, &phi);
        Ok((self.draw_observation_params(&moved, x, rng)?, acc))
    }

    fn param_names(&self) -> Vec<String> {
        ["gamma", "r0", "alpha", "noise", "rho", "sigma"].iter().map(|s| s.to_string()).collect()
    }

    fn to_vec(&self, theta: &SirParams) -> Vec<f64> {
        vec![theta.gamma, theta.r0, theta.alpha, theta.noise, theta.rho, theta.sigma]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::sir::sir_simulate;
    use crate::rng::seeded;

    #[test]
    fn block_roundtrip() {
        let p = SirParams::default();
        let q = with_block(&p, &block(&p));
        assert!((q.gamma - p.gamma).abs() < 1e-12 && (q.noise - p.noise).abs() < 1e-15);
    }

    #[test]
    fn observation_params_concentrate_near_truth() {
        let truth = SirParams::default();
        let weeks = truth.weeks_in_years(4.0);
        let sim = sir_simulate(&truth, weeks, &mut seeded(1));
        let pm = SirParameterModel::new(truth.clone(), sim.y.clone());
        let mut rng = seeded(2);
        let n = 2000;
        let (mut rho, mut sigma) = (0.0, 0.0);
        for _ in 0..n {
            let d = pm.draw_observation_params(&truth, &sim.innovations, &mut rng).unwrap();
            rho += d.rho;
            sigma += d.sigma;
        }
        assert!((rho / n as f64 - 1.1).abs() < 0.1);
        assert!((sigma / n as f64 - 0.224).abs() < 0.05);
    }

    #[test]
    fn sample_posterior_keeps_positive_block() {
        let truth = SirParams::default();
        let sim = sir_simulate(&truth, 30, &mut seeded(3));
        let pm = SirParameterModel::new(truth.clone(), sim.y.clone());
        let mut rng = seeded(4);
        let mut theta = truth;
        for _ in 0..5 {
            theta = pm.sample_posterior(&theta, &sim.innovations, &mut rng).unwrap().0;
            assert!(theta.gamma > 0.0 && theta.r0 > 0.0 && theta.alpha > 0.0 && theta.noise > 0.0);
        }
    }
}
