//! Stochastic volatility model `x_{t+1} = a x_t + v_t`, `y_t = e_t exp(x_t / 2)`
//! with `v ∼ N(0, σ²)`, `e ∼ N(0, 1)` and a stationary initial state.

use rand::Rng;

use crate::error::{Error, Result};
use crate::gauss::{log_normal, normal};
use crate::model::{MarkovOrder, Model};

#[derive(Debug, Clone)]
pub struct StochasticVolatility {
    pub a: f64,
    pub sigma: f64,
    pub y: Vec<f64>,
}

impl StochasticVolatility {
    pub fn new(a: f64, sigma: f64, y: Vec<f64>) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("SV needs sigma > 0, got {sigma}")));
        }
        if !(a.abs() < 1.0) {
            return Err(Error::InvalidArgument(format!("SV needs |a| < 1, got {a}")));
        }
        Ok(Self { a, sigma, y })
    }

    fn initial_variance(&self) -> f64 {
        self.sigma * self.sigma / (1.0 - self.a * self.a)
    }

    pub fn simulate<R: Rng + ?Sized>(&self, horizon: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::with_capacity(horizon);
        let mut ys = Vec::with_capacity(horizon);
        let mut x = normal(rng, 0.0, self.initial_variance().sqrt());
        for t in 0..horizon {
            if t > 0 {
                x = normal(rng, self.a * x, self.sigma);
            }
            xs.push(x);
            ys.push(normal(rng, 0.0, (0.5 * x).exp()));
        }
        (xs, ys)
    }

    fn log_obs(&self, t: usize, x: f64) -> f64 {
        log_normal(self.y[t], 0.0, x.exp())
    }
}

pub fn sv_model(a: f64, sigma: f64, y: Vec<f64>) -> Result<StochasticVolatility> {
    StochasticVolatility::new(a, sigma, y)
}

impl Model for StochasticVolatility {
    type State = f64;
    type Carry = f64;

    fn horizon(&self) -> usize {
        self.y.len()
    }

    fn markov_order(&self) -> MarkovOrder {
        MarkovOrder::StateSpace
    }

    fn initial_carry(&self) -> f64 {
        0.0
    }

    fn advance(&self, t: usize, carry: &mut f64, x: &f64) -> f64 {
        let prior = self.log_proposal_density(t, carry, x);
        *carry = *x;
        prior + self.log_obs(t, *x)
    }

    fn sample_proposal<R: Rng + ?Sized>(&self, t: usize, carry: &f64, rng: &mut R) -> f64 {
        if t == 0 {
            normal(rng, 0.0, self.initial_variance().sqrt())
        } else {
            normal(rng, self.a * carry, self.sigma)
        }
    }

    fn log_proposal_density(&self, t: usize, carry: &f64, x: &f64) -> f64 {
        if t == 0 {
            log_normal(*x, 0.0, self.initial_variance())
        } else {
            log_normal(*x, self.a * carry, self.sigma * self.sigma)
        }
    }

    fn log_weight_advance(&self, t: usize, carry: &mut f64, x: &f64) -> f64 {
        *carry = *x;
        self.log_obs(t, *x)
    }

    fn log_transition(&self, _t: usize, carry: &f64, x: &f64) -> f64 {
        log_normal(*x, self.a * carry, self.sigma * self.sigma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_observation_weight_is_finite_everywhere() {
        let m = StochasticVolatility::new(0.9, 0.5, vec![0.0]).unwrap();
        for x in [-50.0, -3.0, 0.0, 2.0, 40.0] {
            let w = m.log_weight(&[x]);
            assert!(w.is_finite());
            // log N(0; 0, e^x) = −½ log 2π − x/2
            assert!((w - (-0.5 * crate::gauss::LN_2PI - 0.5 * x)).abs() < 1e-12);
        }
    }

    #[test]
    fn weight_depends_only_on_current_state() {
        let m = StochasticVolatility::new(0.9, 0.5, vec![0.2, -0.4, 1.1]).unwrap();
        assert_eq!(m.log_weight(&[0.0, 1.0, -0.3]), m.log_weight(&[4.0, -2.0, -0.3]));
    }
}
