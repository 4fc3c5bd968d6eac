//! The sequential target abstraction.
//!
//! A [`Model`] describes a sequence of unnormalized log-densities
//! `log γ_t(x_{1:t})`, `t = 0..T`, together with a proposal kernel. Histories
//! are never passed around as slices of states: each model keeps a
//! [`Model::Carry`], a sufficient summary of `x_{1:t}` that is advanced one
//! state at a time. For a state-space model the carry is just the last
//! state; for collapsed (non-Markovian) models it holds whatever the future
//! densities need, e.g. the deterministic part of a degenerate state vector.

use std::fmt::Debug;

use rand::Rng;

/// Values that can live in a latent trajectory.
pub trait StateValue: Clone + PartialEq + Debug + Send + Sync {
    fn is_finite(&self) -> bool;
    /// Appends the numeric coordinates of this state (used for output files).
    fn push_coords(&self, out: &mut Vec<f64>);
    fn dim(&self) -> usize;
}

impl StateValue for f64 {
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    fn push_coords(&self, out: &mut Vec<f64>) {
        out.push(*self);
    }
    fn dim(&self) -> usize {
        1
    }
}

impl StateValue for usize {
    fn is_finite(&self) -> bool {
        true
    }
    fn push_coords(&self, out: &mut Vec<f64>) {
        out.push(*self as f64);
    }
    fn dim(&self) -> usize {
        1
    }
}

impl StateValue for Vec<f64> {
    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
    fn push_coords(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(self);
    }
    fn dim(&self) -> usize {
        self.len()
    }
}

/// One point `x_{1:T}` of the latent space.
pub type Trajectory<S> = Vec<S>;

/// Flattens a trajectory into its numeric coordinates.
pub fn trajectory_coords<S: StateValue>(path: &[S]) -> Vec<f64> {
    let mut out = Vec::new();
    for x in path {
        x.push_coords(&mut out);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkovOrder {
    /// Densities may depend on the whole latent history.
    NonMarkov,
    /// A state-space model: `γ_t / γ_{t-1} = f(x_t | x_{t-1}) g(y_t | x_t)`.
    StateSpace,
}

/// An unnormalized sequential target with its proposal kernel.
///
/// Time indices are zero-based: `t = 0` is the first state. Models are
/// immutable and shared across threads.
pub trait Model: Sync {
    type State: StateValue;
    type Carry: Clone + Send + Sync;

    /// Horizon `T`.
    fn horizon(&self) -> usize;

    fn markov_order(&self) -> MarkovOrder;

    /// Summary of the empty history.
    fn initial_carry(&self) -> Self::Carry;

    /// Returns `log γ_t(x_{1:t}) − log γ_{t−1}(x_{1:t−1})` and folds `x` into
    /// the carry. At `t = 0` the increment is `log γ_0(x_0)`.
    fn advance(&self, t: usize, carry: &mut Self::Carry, x: &Self::State) -> f64;

    /// Draws `x_t ∼ r_t(· | history)`.
    fn sample_proposal<R: Rng + ?Sized>(&self, t: usize, carry: &Self::Carry, rng: &mut R)
        -> Self::State;

    fn log_proposal_density(&self, t: usize, carry: &Self::Carry, x: &Self::State) -> f64;

    /// Log weight `W_t` of extending the history in `carry` by `x`; also
    /// advances the carry.
    ///
    /// The default is the increment minus the proposal density. Bootstrap
    /// models override it with the observation density alone.
    fn log_weight_advance(&self, t: usize, carry: &mut Self::Carry, x: &Self::State) -> f64 {
        let lq = self.log_proposal_density(t, carry, x);
        let inc = self.advance(t, carry, x);
        if inc == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            inc - lq
        }
    }

    /// `log f(x_t | x_{t−1})` up to a term that does not depend on the
    /// history. Only consulted for [`MarkovOrder::StateSpace`] models, where
    /// it is the whole ancestor-sampling weight.
    fn log_transition(&self, t: usize, carry: &Self::Carry, x: &Self::State) -> f64 {
        let mut c = carry.clone();
        self.advance(t, &mut c, x)
    }

    /// `log γ_{t}(x_{1:t})` with `t = path.len() - 1`, evaluated directly.
    fn log_gamma(&self, path: &[Self::State]) -> f64 {
        let mut carry = self.initial_carry();
        let mut total = 0.0;
        for (t, x) in path.iter().enumerate() {
            total += self.advance(t, &mut carry, x);
            if total == f64::NEG_INFINITY {
                break;
            }
        }
        total
    }

    /// The log weight as a free function of a full prefix; for tests.
    fn log_weight(&self, path: &[Self::State]) -> f64 {
        let (last, prefix) = path.split_last().expect("log_weight: empty path");
        let mut carry = self.carry_of(prefix);
        self.log_weight_advance(prefix.len(), &mut carry, last)
    }

    /// Carry summarizing `path`.
    fn carry_of(&self, path: &[Self::State]) -> Self::Carry {
        let mut carry = self.initial_carry();
        for (t, x) in path.iter().enumerate() {
            self.advance(t, &mut carry, x);
        }
        carry
    }
}
