//! Mixing and accuracy metrics for MCMC output.

use crate::error::{Error, Result};

/// Biased autocorrelation of `series` centered at `center`, lags
/// `0..=max_lag`.
pub fn acf(series: &[f64], max_lag: usize, center: f64) -> Result<Vec<f64>> {
    let n = series.len();
    if n <= max_lag {
        return Err(Error::InvalidArgument(format!("series of length {n} too short for lag {max_lag}")));
    }
    let c: Vec<f64> = series.iter().map(|x| x - center).collect();
    let var: f64 = c.iter().map(|x| x * x).sum();
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::InvalidArgument("series has zero variance about the center".into()));
    }
    Ok((0..=max_lag)
        .map(|k| c[..n - k].iter().zip(&c[k..]).map(|(a, b)| a * b).sum::<f64>() / var)
        .collect())
}

pub fn mean(series: &[f64]) -> f64 {
    series.iter().sum::<f64>() / series.len() as f64
}

/// Sample standard deviation.
pub fn std_dev(series: &[f64]) -> f64 {
    let m = mean(series);
    let n = series.len() as f64;
    (series.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Fraction of consecutive iterations in which the value changed.
/// Comparison is exact.
pub fn update_rate<T: PartialEq>(chain: &[T]) -> f64 {
    if chain.len() < 2 {
        return 0.0;
    }
    let moves = chain.windows(2).filter(|w| w[0] != w[1]).count();
    moves as f64 / (chain.len() - 1) as f64
}

/// Update rate of every coordinate of a trajectory chain.
pub fn update_rates(states: &[Vec<f64>]) -> Vec<f64> {
    let Some(first) = states.first() else {
        return Vec::new();
    };
    (0..first.len())
        .map(|t| {
            if states.len() < 2 {
                return 0.0;
            }
            let moves = states.windows(2).filter(|w| w[0][t] != w[1][t]).count();
            moves as f64 / (states.len() - 1) as f64
        })
        .collect()
}

/// `ε_n = sqrt(mean_t (x̄_{n,t} − truth_t)²)` where `x̄_n` averages the first
/// `n` draws.
pub fn running_rmse(draws: &[Vec<f64>], truth: &[f64]) -> Vec<f64> {
    let mut sum = vec![0.0; truth.len()];
    draws
        .iter()
        .enumerate()
        .map(|(k, x)| {
            assert_eq!(x.len(), truth.len(), "draw length differs from truth");
            let n = (k + 1) as f64;
            let mut sq = 0.0;
            for ((s, xi), ti) in sum.iter_mut().zip(x).zip(truth) {
                *s += xi;
                sq += (*s / n - ti).powi(2);
            }
            (sq / truth.len() as f64).sqrt()
        })
        .collect()
}

/// `1 / Σ p_i²`.
pub fn ess(p: &[f64]) -> f64 {
    1.0 / p.iter().map(|v| v * v).sum::<f64>()
}

/// Per-iteration output of a chain.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChainRecord {
    pub seed: u64,
    pub param_names: Vec<String>,
    /// One row per iteration.
    pub params: Vec<Vec<f64>>,
    /// Trajectory coordinates per iteration; empty when not recorded.
    pub states: Vec<Vec<f64>>,
    /// Iterations at the start treated as burn-in.
    pub burnin: usize,
    /// Mean truncation level of each sweep.
    pub levels: Vec<f64>,
    /// Reference-ancestor switches per sweep.
    pub ancestor_switches: Vec<usize>,
    pub mh_accepted: usize,
    pub mh_proposed: usize,
    pub param_accepted: usize,
    pub param_proposed: usize,
}

impl ChainRecord {
    pub fn len(&self) -> usize {
        self.params.len().max(self.states.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn param_column(&self, j: usize) -> Vec<f64> {
        self.params.iter().map(|row| row[j]).collect()
    }

    /// Parameter column after burn-in.
    pub fn kept_param(&self, j: usize) -> Vec<f64> {
        self.params.iter().skip(self.burnin).map(|row| row[j]).collect()
    }

    pub fn kept_states(&self) -> &[Vec<f64>] {
        &self.states[self.burnin.min(self.states.len())..]
    }

    /// Post-burn-in mean of each state coordinate.
    pub fn state_means(&self) -> Vec<f64> {
        let kept = self.kept_states();
        let Some(first) = kept.first() else {
            return Vec::new();
        };
        let mut m = vec![0.0; first.len()];
        for row in kept {
            for (a, b) in m.iter_mut().zip(row) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|v| *v /= kept.len() as f64);
        m
    }

    pub fn mean_level(&self) -> f64 {
        if self.levels.is_empty() {
            0.0
        } else {
            mean(&self.levels)
        }
    }

    pub fn param_acceptance(&self) -> f64 {
        if self.param_proposed == 0 {
            0.0
        } else {
            self.param_accepted as f64 / self.param_proposed as f64
        }
    }

    pub fn mh_acceptance(&self) -> f64 {
        if self.mh_proposed == 0 {
            0.0
        } else {
            self.mh_accepted as f64 / self.mh_proposed as f64
        }
    }
}
