//! Tiny discrete hidden Markov models used as exact test vehicles.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{MarkovOrder, Model};
use crate::weights::sample_categorical;

/// Finite-state HMM with fixed observations folded into per-time likelihood
/// tables and an explicit (possibly non-bootstrap) proposal.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteToyModel {
    pub states: usize,
    pub horizon: usize,
    pub initial: Vec<f64>,
    /// `transition[x][x']`.
    pub transition: Vec<Vec<f64>>,
    /// `likelihood[t][x] = g_t(y_t | x)`.
    pub likelihood: Vec<Vec<f64>>,
    pub proposal_initial: Vec<f64>,
    pub proposal: Vec<Vec<f64>>,
}

fn check_row(row: &[f64], len: usize, what: &str) -> Result<()> {
    if row.len() != len || row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidArgument(format!("{what}: malformed row {row:?}")));
    }
    if (row.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("{what}: row does not sum to one")));
    }
    Ok(())
}

impl DiscreteToyModel {
    /// Bootstrap-proposal model.
    pub fn bootstrap(initial: Vec<f64>, transition: Vec<Vec<f64>>, likelihood: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_proposal(initial.clone(), transition.clone(), likelihood, initial, transition)
    }

    pub fn with_proposal(
        initial: Vec<f64>,
        transition: Vec<Vec<f64>>,
        likelihood: Vec<Vec<f64>>,
        proposal_initial: Vec<f64>,
        proposal: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let states = initial.len();
        let horizon = likelihood.len();
        if states == 0 || horizon == 0 {
            return Err(Error::InvalidArgument("empty toy model".into()));
        }
        check_row(&initial, states, "initial")?;
        check_row(&proposal_initial, states, "proposal_initial")?;
        if transition.len() != states || proposal.len() != states {
            return Err(Error::InvalidArgument("transition tables must be square".into()));
        }
        for row in &transition {
            check_row(row, states, "transition")?;
        }
        for row in &proposal {
            check_row(row, states, "proposal")?;
        }
        for row in &likelihood {
            if row.len() != states || row.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
                return Err(Error::InvalidArgument("likelihood entries must be positive".into()));
            }
        }
        // Support containment: the proposal must cover the prior.
        let covered = |p: &[f64], q: &[f64]| p.iter().zip(q).all(|(a, b)| *a == 0.0 || *b > 0.0);
        if !covered(&initial, &proposal_initial) || transition.iter().zip(&proposal).any(|(f, r)| !covered(f, r)) {
            return Err(Error::InvalidArgument("proposal does not cover the prior".into()));
        }
        Ok(Self {
            states,
            horizon,
            initial,
            transition,
            likelihood,
            proposal_initial,
            proposal,
        })
    }

    /// Two-state chain with sticky dynamics and a noisy sensor, `T = 2`.
    pub fn two_state() -> Self {
        Self::bootstrap(
            vec![0.6, 0.4],
            vec![vec![0.8, 0.2], vec![0.3, 0.7]],
            vec![vec![0.9, 0.2], vec![0.25, 0.75]],
        )
        .expect("valid tables")
    }

    /// The same dynamics with a proposal that ignores the prior.
    pub fn two_state_perturbed() -> Self {
        let base = Self::two_state();
        Self::with_proposal(
            base.initial,
            base.transition,
            base.likelihood,
            vec![0.3, 0.7],
            vec![vec![0.5, 0.5], vec![0.6, 0.4]],
        )
        .expect("valid tables")
    }

    /// Random model with strictly positive tables.
    pub fn random<R: Rng + ?Sized>(states: usize, horizon: usize, bootstrap: bool, rng: &mut R) -> Self {
        let row = |rng: &mut R| {
            let v: Vec<f64> = (0..states).map(|_| 0.1 + rng.random::<f64>()).collect();
            let s: f64 = v.iter().sum();
            let mut v: Vec<f64> = v.iter().map(|x| x / s).collect();
            // Exact unit sum, as the validator is strict.
            let rest: f64 = v[1..].iter().sum();
            v[0] = 1.0 - rest;
            v
        };
        let initial = row(rng);
        let transition: Vec<Vec<f64>> = (0..states).map(|_| row(rng)).collect();
        let likelihood: Vec<Vec<f64>> = (0..horizon)
            .map(|_| (0..states).map(|_| 0.05 + rng.random::<f64>()).collect())
            .collect();
        if bootstrap {
            Self::bootstrap(initial, transition, likelihood).expect("valid tables")
        } else {
            let pi = row(rng);
            let pr = (0..states).map(|_| row(rng)).collect();
            Self::with_proposal(initial, transition, likelihood, pi, pr).expect("valid tables")
        }
    }

    pub fn is_bootstrap(&self) -> bool {
        self.initial == self.proposal_initial && self.transition == self.proposal
    }

    /// Number of trajectories `|X|^T`.
    pub fn num_paths(&self) -> usize {
        self.states.pow(self.horizon as u32)
    }

    /// Trajectory index with `x_0` as the least significant digit.
    pub fn encode(&self, path: &[usize]) -> usize {
        path.iter().rev().fold(0, |acc, &x| acc * self.states + x)
    }

    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        (0..self.horizon)
            .map(|_| {
                let x = index % self.states;
                index /= self.states;
                x
            })
            .collect()
    }

    /// Unnormalized joint `γ_T(x_{1:T})` in linear scale.
    pub fn joint(&self, path: &[usize]) -> f64 {
        let mut p = self.initial[path[0]] * self.likelihood[0][path[0]];
        for t in 1..path.len() {
            p *= self.transition[path[t - 1]][path[t]] * self.likelihood[t][path[t]];
        }
        p
    }

    /// Normalized posterior over all trajectories.
    pub fn posterior(&self) -> Vec<f64> {
        let joint: Vec<f64> = (0..self.num_paths()).map(|k| self.joint(&self.decode(k))).collect();
        let z: f64 = joint.iter().sum();
        joint.into_iter().map(|p| p / z).collect()
    }

    /// Importance weight `W_t` in linear scale; `prev` is `None` at `t = 0`.
    pub fn weight(&self, t: usize, prev: Option<usize>, x: usize) -> f64 {
        match prev {
            None => self.initial[x] * self.likelihood[0][x] / self.proposal_initial[x],
            Some(p) => self.transition[p][x] * self.likelihood[t][x] / self.proposal[p][x],
        }
    }

    pub fn proposal_row(&self, prev: Option<usize>) -> &[f64] {
        match prev {
            None => &self.proposal_initial,
            Some(p) => &self.proposal[p],
        }
    }
}

impl Model for DiscreteToyModel {
    type State = usize;
    /// Previous state; `None` before the first step.
    type Carry = Option<usize>;

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn markov_order(&self) -> MarkovOrder {
        MarkovOrder::StateSpace
    }

    fn initial_carry(&self) -> Option<usize> {
        None
    }

    fn advance(&self, t: usize, carry: &mut Option<usize>, x: &usize) -> f64 {
        let prior = match *carry {
            None => self.initial[*x],
            Some(p) => self.transition[p][*x],
        };
        *carry = Some(*x);
        prior.ln() + self.likelihood[t][*x].ln()
    }

    fn sample_proposal<R: Rng + ?Sized>(&self, _t: usize, carry: &Option<usize>, rng: &mut R) -> usize {
        sample_categorical(self.proposal_row(*carry), rng)
    }

    fn log_proposal_density(&self, _t: usize, carry: &Option<usize>, x: &usize) -> f64 {
        self.proposal_row(*carry)[*x].ln()
    }

    fn log_weight_advance(&self, t: usize, carry: &mut Option<usize>, x: &usize) -> f64 {
        let w = self.weight(t, *carry, *x).ln();
        *carry = Some(*x);
        w
    }

    fn log_transition(&self, _t: usize, carry: &Option<usize>, x: &usize) -> f64 {
        match *carry {
            None => self.initial[*x].ln(),
            Some(p) => self.transition[p][*x].ln(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn encode_decode_roundtrip() {
        let m = DiscreteToyModel::random(3, 3, true, &mut seeded(1));
        for k in 0..m.num_paths() {
            assert_eq!(m.encode(&m.decode(k)), k);
        }
    }

    #[test]
    fn posterior_is_normalized_and_matches_log_gamma() {
        let m = DiscreteToyModel::random(3, 3, false, &mut seeded(2));
        let post = m.posterior();
        assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        for k in 0..m.num_paths() {
            let path = m.decode(k);
            assert!((m.log_gamma(&path) - m.joint(&path).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn weight_matches_gamma_ratio_over_proposal() {
        let m = DiscreteToyModel::two_state_perturbed();
        for path in [[0usize, 1], [1, 1], [1, 0]] {
            let lhs = m.log_weight(&path);
            let rhs = m.log_gamma(&path) - m.log_gamma(&path[..1]) - m.log_proposal_density(1, &Some(path[0]), &path[1]);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(DiscreteToyModel::bootstrap(vec![0.5, 0.4], vec![vec![1.0, 0.0]; 2], vec![vec![1.0, 1.0]]).is_err());
    }
}
