//! Particle stochastic-approximation EM.

use rand::Rng;

use crate::error::{Error, Result};
use crate::kernel::{apply_kernel, initial_trajectory, KernelConfig};
use crate::learning::ParameterModel;
use crate::model::Model;

/// A parameter family with a complete-data sufficient statistic and its
/// closed-form maximizer.
pub trait SaemModel: ParameterModel {
    fn sufficient_statistics(&self, x: &[<Self::Target as Model>::State]) -> Vec<f64>;

    fn maximize(&self, stats: &[f64]) -> Result<Self::Params>;
}

/// Step sizes `γ_n` for `n = 1, 2, ...`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    /// `γ_n = n^{−κ}`.
    Power(f64),
    /// `γ_n = c` for all `n` (`c = 1` is Monte Carlo EM with one draw).
    Constant(f64),
    /// `γ_n = 1` for the first `warmup` steps, then `(n − warmup)^{−κ}`.
    WarmPower { warmup: usize, exponent: f64 },
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule::Power(0.7)
    }
}

impl StepSchedule {
    pub fn gamma(&self, n: usize) -> f64 {
        assert!(n >= 1, "step sizes start at n = 1");
        match *self {
            StepSchedule::Power(k) => (n as f64).powf(-k),
            StepSchedule::Constant(c) => c,
            StepSchedule::WarmPower { warmup, exponent } => {
                if n <= warmup {
                    1.0
                } else {
                    ((n - warmup) as f64).powf(-exponent)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaemState {
    pub stats: Vec<f64>,
    pub n: usize,
}

impl SaemState {
    pub fn new(dim: usize) -> Self {
        Self {
            stats: vec![0.0; dim],
            n: 0,
        }
    }
}

/// `Ŝ_n = (1 − γ) Ŝ_{n−1} + γ s_n`.
pub fn saem_update(state: &SaemState, s: &[f64], gamma: f64) -> Result<SaemState> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidArgument(format!("step size must lie in (0, 1], got {gamma}")));
    }
    if s.len() != state.stats.len() {
        return Err(Error::InvalidArgument("statistic dimension mismatch".into()));
    }
    let stats: Vec<f64> = state.stats.iter().zip(s).map(|(a, b)| (1.0 - gamma) * a + gamma * b).collect();
    if stats.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            t: 0,
            msg: "non-finite averaged statistic".into(),
        });
    }
    Ok(SaemState { stats, n: state.n + 1 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaemTrace {
    pub param_names: Vec<String>,
    /// `θ[n]` for `n = 1..=iterations`.
    pub params: Vec<Vec<f64>>,
}

impl SaemTrace {
    pub fn last(&self) -> &[f64] {
        self.params.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

/// Runs `iterations` PSAEM steps from `theta0`. The kernel config's flavor
/// decides the conditional kernel (PGAS in the standard algorithm).
pub fn psaem_run<P, R>(
    pm: &P,
    cfg: &KernelConfig,
    schedule: StepSchedule,
    iterations: usize,
    theta0: P::Params,
    rng: &mut R,
) -> Result<SaemTrace>
where
    P: SaemModel,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    let mut theta = theta0;
    let mut x = initial_trajectory(&pm.build(&theta)?, cfg.n.max(2), rng).map_err(|e| e.at_iteration(0))?;
    let mut state: Option<SaemState> = None;
    let mut trace = SaemTrace {
        param_names: pm.param_names(),
        params: Vec::with_capacity(iterations),
    };
    for n in 1..=iterations {
        let mut step = || -> Result<_> {
            let model = pm.build(&theta)?;
            let (x_new, _) = apply_kernel(&model, &x, cfg, rng)?;
            let s = pm.sufficient_statistics(&x_new);
            let prev = state.clone().unwrap_or_else(|| SaemState::new(s.len()));
            let next = saem_update(&prev, &s, schedule.gamma(n))?;
            let theta_new = pm.maximize(&next.stats)?;
            Ok((x_new, next, theta_new))
        };
        let (x_new, next, theta_new) = step().map_err(|e| e.at_iteration(n))?;
        x = x_new;
        state = Some(next);
        theta = theta_new;
        trace.params.push(pm.to_vec(&theta));
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn update_arithmetic() {
        let s0 = SaemState::new(1);
        let s1 = saem_update(&s0, &[2.0], 1.0).unwrap();
        assert_eq!(s1.stats, vec![2.0]);
        let s2 = saem_update(&s1, &[4.0], 0.5).unwrap();
        assert_eq!(s2.stats, vec![3.0]);
        assert_eq!(s2.n, 2);
        assert!(saem_update(&s1, &[4.0], 0.0).is_err());
    }

    #[test]
    fn default_schedule() {
        let s = StepSchedule::default();
        assert_eq!(s.gamma(1), 1.0);
        assert!((s.gamma(10) - 10f64.powf(-0.7)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn recursion_is_linear(
            stats in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 3), 1..20),
        ) {
            let sched = StepSchedule::default();
            let mut a = SaemState::new(3);
            let mut b = SaemState::new(3);
            for (n, s) in stats.iter().enumerate() {
                let doubled: Vec<f64> = s.iter().map(|v| 2.0 * v).collect();
                a = saem_update(&a, s, sched.gamma(n + 1)).unwrap();
                b = saem_update(&b, &doubled, sched.gamma(n + 1)).unwrap();
            }
            for (x, y) in a.stats.iter().zip(&b.stats) {
                prop_assert!((2.0 * x - y).abs() <= 1e-9 * (1.0 + y.abs()));
            }
        }

        #[test]
        fn full_step_replaces(prev in prop::collection::vec(-10.0f64..10.0, 2), s in prop::collection::vec(-10.0f64..10.0, 2)) {
            let st = SaemState { stats: prev, n: 3 };
            prop_assert_eq!(saem_update(&st, &s, 1.0).unwrap().stats, s);
        }
    }
}
