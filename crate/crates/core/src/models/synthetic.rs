//! A non-Markovian toy whose influence of the past decays geometrically.
//!
//! `x_1 ∼ N(0, 1)` sets a particle "type" `u = x_1`; every later step
//! contributes `amplitude · e^{−decay·s} · tanh(u)` on top of a standard
//! normal prior, so the ancestor-weight factors `h_s(k)` satisfy
//! `max_{k,l} h_s(k)/h_s(l) − 1 ≤ A e^{−c s}`.

use rand::Rng;

use crate::gauss::{log_normal, normal};
use crate::model::{MarkovOrder, Model};

#[derive(Debug, Clone)]
pub struct GeometricDecay {
    pub horizon: usize,
    pub amplitude: f64,
    pub decay: f64,
}

impl GeometricDecay {
    pub fn new(horizon: usize, amplitude: f64, decay: f64) -> Self {
        Self {
            horizon,
            amplitude,
            decay,
        }
    }

    /// Log of the history-dependent part of factor `s` (steps after the first).
    pub fn log_factor(&self, s: usize, u: f64) -> f64 {
        self.amplitude * (-self.decay * s as f64).exp() * u.tanh()
    }
}

impl Model for GeometricDecay {
    type State = f64;
    type Carry = f64;

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn markov_order(&self) -> MarkovOrder {
        MarkovOrder::NonMarkov
    }

    fn initial_carry(&self) -> f64 {
        0.0
    }

    fn advance(&self, t: usize, carry: &mut f64, x: &f64) -> f64 {
        if t == 0 {
            *carry = *x;
            log_normal(*x, 0.0, 1.0)
        } else {
            log_normal(*x, 0.0, 1.0) + self.log_factor(t, *carry)
        }
    }

    fn sample_proposal<R: Rng + ?Sized>(&self, _t: usize, _carry: &f64, rng: &mut R) -> f64 {
        normal(rng, 0.0, 1.0)
    }

    fn log_proposal_density(&self, _t: usize, _carry: &f64, x: &f64) -> f64 {
        log_normal(*x, 0.0, 1.0)
    }
}
