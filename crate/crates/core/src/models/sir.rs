//! Seasonal SIR epidemic with environmental noise, discretized by
//! Euler–Maruyama, observed through log-odds of weekly query proportions.
//!
//! Time is measured in months. Week `k` covers `(Δk, Δ(k+1)]` and is split into
//! `m` sub-steps of length `dt = Δ / m`. The collapsed model treats the weekly
//! innovation block `V_k ∈ R^m`, `V_k ∼ N(0, I / √dt)`, as the latent state;
//! compartments are reconstructed by re-simulating from cached week-end
//! checkpoints.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gauss::{log_normal, normal, LN_2PI};
use crate::model::{MarkovOrder, Model};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Compartments {
    pub s: f64,
    pub i: f64,
    pub r: f64,
}

impl Compartments {
    pub fn total(&self) -> f64 {
        self.s + self.i + self.r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SirParams {
    pub population: f64,
    /// Birth/death rate.
    pub mu: f64,
    /// Recovery rate.
    pub gamma: f64,
    /// Basic reproductive ratio.
    pub r0: f64,
    /// Strength of seasonality.
    pub alpha: f64,
    /// Environmental noise strength.
    pub noise: f64,
    /// Slope of the log-odds observation map.
    pub rho: f64,
    /// Observation noise standard deviation.
    pub sigma: f64,
    /// Observation interval in months.
    pub delta: f64,
    /// Euler sub-steps per observation interval.
    pub substeps: usize,
    pub initial: Compartments,
}

impl Default for SirParams {
    /// The reference configuration: γ = 3, R₀ = 10, α = 0.16, F = 0.03,
    /// ρ = 1.1, σ = 0.224, weekly observations with seven sub-steps.
    fn default() -> Self {
        let population = 1e6;
        Self {
            population,
            mu: 0.0012,
            gamma: 3.0,
            r0: 10.0,
            alpha: 0.16,
            noise: 0.03,
            rho: 1.1,
            sigma: 0.224,
            delta: 7.0 / 30.0,
            substeps: 7,
            initial: Compartments {
                s: 0.9 * population,
                i: 0.05 * population,
                r: 0.05 * population,
            },
        }
    }
}

impl SirParams {
    pub fn dt(&self) -> f64 {
        self.delta / self.substeps as f64
    }

    /// Transmission rate at time `t` (months).
    pub fn beta(&self, t: f64) -> f64 {
        self.r0 * (self.gamma + self.mu) * (1.0 + self.alpha * (2.0 * PI * t / 12.0).sin())
    }

    /// Variance of one innovation `v_t`.
    pub fn innovation_variance(&self) -> f64 {
        1.0 / self.dt().sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("population", self.population),
            ("gamma", self.gamma),
            ("r0", self.r0),
            ("delta", self.delta),
            ("sigma", self.sigma),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("SIR parameter {name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("mu", self.mu), ("alpha", self.alpha), ("noise", self.noise)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("SIR parameter {name} must be non-negative, got {v}")));
            }
        }
        if self.substeps == 0 {
            return Err(Error::InvalidArgument("SIR needs at least one sub-step".into()));
        }
        let c = self.initial;
        if c.s < 0.0 || c.i < 0.0 || c.r < 0.0 {
            return Err(Error::InvalidArgument("SIR initial compartments must be non-negative".into()));
        }
        Ok(())
    }

    /// Weeks covered by `years` of data, with 30-day months.
    pub fn weeks_in_years(&self, years: f64) -> usize {
        (years * 12.0 / self.delta).floor() as usize
    }
}

/// Outcome of one Euler–Maruyama step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirStep {
    pub state: Compartments,
    /// A compartment went negative and was clipped.
    pub clipped: bool,
}

/// One Euler–Maruyama step from time `t` with innovation `v`.
///
/// Negative compartments are clipped to zero and `R` absorbs the difference so
/// the total is unchanged.
#[inline]
pub fn sir_step(state: Compartments, v: f64, t: f64, params: &SirParams) -> SirStep {
    sir_step_with_beta(state, v, params.beta(t), params)
}

#[inline]
fn sir_step_with_beta(state: Compartments, v: f64, beta: f64, p: &SirParams) -> SirStep {
    let dt = p.dt();
    let Compartments { s, i, r } = state;
    let infection = (1.0 + p.noise * v) * beta * s / p.population * i * dt;
    let mut next = Compartments {
        s: s + p.mu * p.population * dt - p.mu * s * dt - infection,
        i: i - (p.gamma + p.mu) * i * dt + infection,
        r: r + p.gamma * i * dt - p.mu * r * dt,
    };
    let mut clipped = false;
    if next.s < 0.0 || next.i < 0.0 || next.r < 0.0 {
        clipped = true;
        let total = next.total();
        next.s = next.s.max(0.0);
        next.i = next.i.max(0.0);
        next.r = (total - next.s - next.i).max(0.0);
    }
    SirStep { state: next, clipped }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Observation mean `ρ logit(Ī / N)`.
pub fn observation_mean(mean_infected: f64, params: &SirParams) -> f64 {
    params.rho * logit(mean_infected / params.population)
}

/// A full simulated data set.
#[derive(Debug, Clone)]
pub struct SirSimulation {
    pub innovations: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    /// Weekly mean of `I`.
    pub mean_infected: Vec<f64>,
    /// Week-end compartments.
    pub week_end: Vec<Compartments>,
    /// Every sub-step state, starting with the initial condition.
    pub path: Vec<Compartments>,
    pub clipped_steps: usize,
}

pub fn sir_simulate<R: Rng + ?Sized>(params: &SirParams, weeks: usize, rng: &mut R) -> SirSimulation {
    let m = params.substeps;
    let sd = params.innovation_variance().sqrt();
    let innovations: Vec<Vec<f64>> = (0..weeks).map(|_| (0..m).map(|_| normal(rng, 0.0, sd)).collect()).collect();
    let model = SirModel::new(params.clone(), vec![0.0; weeks]).expect("valid SIR parameters");
    let traj = model.trajectory(&innovations);
    if traj.clipped_steps > 0 {
        log::warn!("SIR simulation clipped {} sub-steps to keep compartments non-negative", traj.clipped_steps);
    }
    let y = traj
        .mean_infected
        .iter()
        .map(|ib| normal(rng, observation_mean(*ib, params), params.sigma))
        .collect();
    SirSimulation {
        innovations,
        y,
        mean_infected: traj.mean_infected,
        week_end: traj.week_end,
        path: traj.path,
        clipped_steps: traj.clipped_steps,
    }
}

/// Deterministic reconstruction of compartments from innovations.
#[derive(Debug, Clone)]
pub struct SirTrajectory {
    pub mean_infected: Vec<f64>,
    pub week_end: Vec<Compartments>,
    pub path: Vec<Compartments>,
    pub clipped_steps: usize,
}

/// Collapsed SIR model over innovation blocks.
#[derive(Debug, Clone)]
pub struct SirModel {
    params: SirParams,
    y: Vec<f64>,
    /// `β` at the start of every sub-step, `[k * m + j]`.
    beta: Vec<f64>,
    log_prior_const: f64,
}

/// Week-end checkpoint carried by every particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirCarry {
    pub state: Compartments,
    pub mean_infected: f64,
}

impl SirModel {
    pub fn new(params: SirParams, y: Vec<f64>) -> Result<Self> {
        params.validate()?;
        let m = params.substeps;
        let dt = params.dt();
        let beta = (0..y.len() * m)
            .map(|n| {
                let t = (n / m) as f64 * params.delta + (n % m) as f64 * dt;
                params.beta(t)
            })
            .collect();
        let var = params.innovation_variance();
        let log_prior_const = -0.5 * m as f64 * (LN_2PI + var.ln());
        Ok(Self {
            params,
            y,
            beta,
            log_prior_const,
        })
    }

    pub fn params(&self) -> &SirParams {
        &self.params
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Simulates week `k` from `start`; returns the week-end state, the
    /// weekly mean of `I` and the number of clipped sub-steps.
    #[inline]
    pub fn simulate_week(&self, k: usize, start: Compartments, v: &[f64]) -> (Compartments, f64, usize) {
        let m = self.params.substeps;
        let mut state = start;
        let mut acc = 0.0;
        let mut clipped = 0;
        for (j, vj) in v.iter().enumerate().take(m) {
            let step = sir_step_with_beta(state, *vj, self.beta[k * m + j], &self.params);
            state = step.state;
            clipped += step.clipped as usize;
            acc += state.i;
        }
        (state, acc / m as f64, clipped)
    }

    pub fn trajectory(&self, innovations: &[Vec<f64>]) -> SirTrajectory {
        let m = self.params.substeps;
        let mut state = self.params.initial;
        let mut path = Vec::with_capacity(innovations.len() * m + 1);
        path.push(state);
        let mut mean_infected = Vec::with_capacity(innovations.len());
        let mut week_end = Vec::with_capacity(innovations.len());
        let mut clipped_steps = 0;
        for (k, v) in innovations.iter().enumerate() {
            let mut acc = 0.0;
            for (j, vj) in v.iter().enumerate() {
                let step = sir_step_with_beta(state, *vj, self.beta[k * m + j], &self.params);
                state = step.state;
                clipped_steps += step.clipped as usize;
                acc += state.i;
                path.push(state);
            }
            mean_infected.push(acc / m as f64);
            week_end.push(state);
        }
        SirTrajectory {
            mean_infected,
            week_end,
            path,
            clipped_steps,
        }
    }

    pub fn log_obs(&self, k: usize, mean_infected: f64) -> f64 {
        let n = self.params.population;
        if !(mean_infected > 0.0 && mean_infected < n) {
            return f64::NEG_INFINITY;
        }
        log_normal(self.y[k], observation_mean(mean_infected, &self.params), self.params.sigma * self.params.sigma)
    }

    fn log_prior(&self, v: &[f64]) -> f64 {
        let var = self.params.innovation_variance();
        self.log_prior_const - 0.5 * v.iter().map(|x| x * x).sum::<f64>() / var
    }

    /// `Σ_k log g(y_k | V_{1:k})`.
    pub fn log_likelihood(&self, innovations: &[Vec<f64>]) -> f64 {
        let traj = self.trajectory(innovations);
        traj.mean_infected.iter().enumerate().map(|(k, ib)| self.log_obs(k, *ib)).sum()
    }
}

pub fn sir_collapsed_model(params: SirParams, y: Vec<f64>) -> Result<SirModel> {
    SirModel::new(params, y)
}

impl Model for SirModel {
    type State = Vec<f64>;
    type Carry = SirCarry;

    fn horizon(&self) -> usize {
        self.y.len()
    }

    fn markov_order(&self) -> MarkovOrder {
        MarkovOrder::NonMarkov
    }

    fn initial_carry(&self) -> SirCarry {
        SirCarry {
            state: self.params.initial,
            mean_infected: f64::NAN,
        }
    }

    fn advance(&self, t: usize, carry: &mut SirCarry, x: &Vec<f64>) -> f64 {
        self.log_prior(x) + self.log_weight_advance(t, carry, x)
    }

    fn sample_proposal<R: Rng + ?Sized>(&self, _t: usize, _carry: &SirCarry, rng: &mut R) -> Vec<f64> {
        let sd = self.params.innovation_variance().sqrt();
        (0..self.params.substeps).map(|_| normal(rng, 0.0, sd)).collect()
    }

    fn log_proposal_density(&self, _t: usize, _carry: &SirCarry, x: &Vec<f64>) -> f64 {
        self.log_prior(x)
    }

    fn log_weight_advance(&self, t: usize, carry: &mut SirCarry, x: &Vec<f64>) -> f64 {
        let (state, ib, _) = self.simulate_week(t, carry.state, x);
        carry.state = state;
        carry.mean_infected = ib;
        self.log_obs(t, ib)
    }
}
