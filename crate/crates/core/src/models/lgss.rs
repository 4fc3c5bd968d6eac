//! First-order linear Gaussian state-space model
//! `x_{t+1} = a x_t + v_t`, `y_t = x_t + e_t`, `v ∼ N(0, q)`, `e ∼ N(0, r)`,
//! with the stationary initial law `x_1 ∼ N(0, q / (1 − a²))`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::gauss::{log_normal, normal};
use crate::model::{MarkovOrder, Model};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LgssParams {
    pub a: f64,
    pub q: f64,
    pub r: f64,
}

impl LgssParams {
    pub fn new(a: f64, q: f64, r: f64) -> Result<Self> {
        let p = Self { a, q, r };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.abs() < 1.0) {
            return Err(Error::InvalidArgument(format!("LGSS needs |a| < 1, got a = {}", self.a)));
        }
        if !(self.q > 0.0 && self.r > 0.0 && self.q.is_finite() && self.r.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "LGSS needs q, r > 0, got q = {}, r = {}",
                self.q, self.r
            )));
        }
        Ok(())
    }

    pub fn initial_variance(&self) -> f64 {
        self.q / (1.0 - self.a * self.a)
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.a, self.q, self.r]
    }

    /// Draws `(x_{1:T}, y_{1:T})` from the generative model.
    pub fn simulate<R: Rng + ?Sized>(&self, horizon: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::with_capacity(horizon);
        let mut ys = Vec::with_capacity(horizon);
        let mut x = normal(rng, 0.0, self.initial_variance().sqrt());
        for t in 0..horizon {
            if t > 0 {
                x = normal(rng, self.a * x, self.q.sqrt());
            }
            xs.push(x);
            ys.push(normal(rng, x, self.r.sqrt()));
        }
        (xs, ys)
    }
}

pub fn lgss_simulate<R: Rng + ?Sized>(theta: &LgssParams, horizon: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    theta.simulate(horizon, rng)
}

/// The LGSS joint smoothing target with a bootstrap proposal.
#[derive(Debug, Clone)]
pub struct Lgss {
    pub params: LgssParams,
    pub y: Vec<f64>,
}

impl Lgss {
    pub fn new(a: f64, q: f64, r: f64, y: Vec<f64>) -> Result<Self> {
        Ok(Self {
            params: LgssParams::new(a, q, r)?,
            y,
        })
    }

    pub fn from_params(params: LgssParams, y: Vec<f64>) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, y })
    }

    pub fn simulate<R: Rng + ?Sized>(&self, horizon: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        self.params.simulate(horizon, rng)
    }
}

pub fn lgss_model(a: f64, q: f64, r: f64, y: Vec<f64>) -> Result<Lgss> {
    Lgss::new(a, q, r, y)
}

impl Model for Lgss {
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
        let LgssParams { a, q, r } = self.params;
        let prior = if t == 0 {
            log_normal(*x, 0.0, self.params.initial_variance())
        } else {
            log_normal(*x, a * *carry, q)
        };
        *carry = *x;
        prior + log_normal(self.y[t], *x, r)
    }

    fn sample_proposal<R: Rng + ?Sized>(&self, t: usize, carry: &f64, rng: &mut R) -> f64 {
        if t == 0 {
            normal(rng, 0.0, self.params.initial_variance().sqrt())
        } else {
            normal(rng, self.params.a * carry, self.params.q.sqrt())
        }
    }

    fn log_proposal_density(&self, t: usize, carry: &f64, x: &f64) -> f64 {
        if t == 0 {
            log_normal(*x, 0.0, self.params.initial_variance())
        } else {
            log_normal(*x, self.params.a * carry, self.params.q)
        }
    }

    fn log_weight_advance(&self, t: usize, carry: &mut f64, x: &f64) -> f64 {
        *carry = *x;
        log_normal(self.y[t], *x, self.params.r)
    }

    fn log_transition(&self, _t: usize, carry: &f64, x: &f64) -> f64 {
        log_normal(*x, self.params.a * carry, self.params.q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn rejects_explosive_dynamics() {
        assert!(Lgss::new(1.0, 1.0, 1.0, vec![]).is_err());
        assert!(Lgss::new(-1.2, 1.0, 1.0, vec![]).is_err());
        assert!(Lgss::new(0.5, 0.0, 1.0, vec![]).is_err());
    }

    #[test]
    fn stationary_variance_matches_closed_form() {
        let p = LgssParams::new(0.8, 1.0, 0.5).unwrap();
        let mut rng = seeded(12);
        let n = 100_000;
        // Independent prefixes of length 5; x_5 is stationary.
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let (x, _) = p.simulate(5, &mut rng);
            sum += x[4];
            sum2 += x[4] * x[4];
        }
        let mean = sum / n as f64;
        let var = sum2 / n as f64 - mean * mean;
        let target = p.initial_variance();
        assert!((var / target - 1.0).abs() < 0.02, "var {var} vs {target}");
    }

    #[test]
    fn weight_consistency_on_random_points() {
        let mut rng = seeded(13);
        let p = LgssParams::new(0.8, 1.0, 0.5).unwrap();
        let (_, y) = p.simulate(10, &mut rng);
        let m = Lgss::from_params(p, y).unwrap();
        for _ in 0..1000 {
            let len = 1 + (crate::gauss::std_normal(&mut rng).abs() * 3.0) as usize % 10;
            let path: Vec<f64> = (0..len).map(|_| normal(&mut rng, 0.0, 2.0)).collect();
            let lhs = m.log_weight(&path);
            let prev = if len > 1 { m.log_gamma(&path[..len - 1]) } else { 0.0 };
            let mut c = m.carry_of(&path[..len - 1]);
            let rhs = m.log_gamma(&path) - prev - m.log_proposal_density(len - 1, &c, &path[len - 1]);
            assert!((lhs - rhs).abs() < 1e-9);
        }
    }

    #[test]
    fn bootstrap_weight_ignores_history() {
        let m = Lgss::new(0.8, 1.0, 0.5, vec![0.3, -1.0, 2.0]).unwrap();
        let w1 = m.log_weight(&[0.1, 5.0, 0.7]);
        let w2 = m.log_weight(&[-3.0, -2.0, 0.7]);
        assert_eq!(w1, w2);
    }
}
