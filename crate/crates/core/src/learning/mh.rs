//! Gaussian random-walk Metropolis–Hastings on a parameter block.

use rand::Rng;

use crate::gauss::std_normal;

#[derive(Debug, Clone, PartialEq)]
pub struct MhStep {
    pub value: Vec<f64>,
    pub accepted: bool,
    /// `log π(proposal) − log π(current)`; with a symmetric proposal this is
    /// the whole log Hastings ratio.
    pub log_ratio: f64,
}

/// One random-walk step `φ' = φ + scale ⊙ ε`. `current_log_target` avoids
/// re-evaluating the target at `φ`. A NaN target value is rejected.
pub fn rw_mh_step<F, R>(current: &[f64], current_log_target: f64, log_target: F, scales: &[f64], rng: &mut R) -> (MhStep, f64)
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    assert_eq!(current.len(), scales.len());
    assert!(scales.iter().all(|s| *s >= 0.0), "proposal scales must be non-negative");
    let proposal: Vec<f64> = current.iter().zip(scales).map(|(c, s)| c + s * std_normal(rng)).collect();
    let lp = log_target(&proposal);
    let log_ratio = lp - current_log_target;
    if lp.is_nan() {
        log::warn!("random-walk MH: target evaluated to NaN at {proposal:?}; rejecting");
        return (
            MhStep {
                value: current.to_vec(),
                accepted: false,
                log_ratio,
            },
            current_log_target,
        );
    }
    let u: f64 = rng.random();
    let accept = log_ratio >= 0.0 || u.ln() < log_ratio;
    if accept {
        (
            MhStep {
                value: proposal,
                accepted: true,
                log_ratio,
            },
            lp,
        )
    } else {
        (
            MhStep {
                value: current.to_vec(),
                accepted: false,
                log_ratio,
            },
            current_log_target,
        )
    }
}

/// Adjusts `scales` over short pilot rounds until the acceptance rate of
/// `steps_per_round` steps falls in `[low, high]` or `rounds` run out.
/// Returns the final scales and the last observed rate.
pub fn pilot_tune<F, R>(
    start: &[f64],
    log_target: F,
    mut scales: Vec<f64>,
    rounds: usize,
    steps_per_round: usize,
    (low, high): (f64, f64),
    rng: &mut R,
) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let mut x = start.to_vec();
    let mut lp = log_target(&x);
    let mut rate = 0.0;
    for _ in 0..rounds {
        let mut acc = 0;
        for _ in 0..steps_per_round {
            let (step, lp_new) = rw_mh_step(&x, lp, &log_target, &scales, rng);
            acc += step.accepted as usize;
            x = step.value;
            lp = lp_new;
        }
        rate = acc as f64 / steps_per_round as f64;
        if rate < low {
            scales.iter_mut().for_each(|s| *s *= 0.6);
        } else if rate > high {
            scales.iter_mut().for_each(|s| *s *= 1.5);
        } else {
            break;
        }
    }
    (scales, rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn zero_scale_never_moves() {
        let mut rng = seeded(1);
        let target = |v: &[f64]| -0.5 * v[0] * v[0];
        let mut x = vec![0.7];
        let mut lp = target(&x);
        for _ in 0..100 {
            let (s, l) = rw_mh_step(&x, lp, target, &[0.0], &mut rng);
            x = s.value;
            lp = l;
        }
        assert_eq!(x, vec![0.7]);
    }

    #[test]
    fn log_ratio_is_target_ratio() {
        let target = |v: &[f64]| -0.5 * (v[0] * v[0] + v[1] * v[1]);
        let x = [0.3, -0.4];
        let (s, _) = rw_mh_step(&x, target(&x), target, &[0.5, 0.5], &mut seeded(2));
        let proposal = {
            let mut rng = seeded(2);
            [x[0] + 0.5 * std_normal(&mut rng), x[1] + 0.5 * std_normal(&mut rng)]
        };
        assert!((s.log_ratio - (target(&proposal) - target(&x))).abs() < 1e-15);
    }

    #[test]
    fn flat_target_always_accepts() {
        let mut rng = seeded(3);
        let mut x = vec![0.0, 1.0];
        let mut acc = 0;
        for _ in 0..10_000 {
            let (s, _) = rw_mh_step(&x, 0.0, |_| 0.0, &[1.0, 2.0], &mut rng);
            acc += s.accepted as usize;
            x = s.value;
        }
        assert!(acc as f64 / 10_000.0 > 0.99);
    }

    #[test]
    fn nan_target_is_rejected() {
        let (s, lp) = rw_mh_step(&[1.0], -1.0, |_| f64::NAN, &[1.0], &mut seeded(4));
        assert!(!s.accepted);
        assert_eq!(s.value, vec![1.0]);
        assert_eq!(lp, -1.0);
    }

    #[test]
    fn pilot_reaches_target_band() {
        let target = |v: &[f64]| -0.5 * v[0] * v[0] / 0.01;
        let (scales, rate) = pilot_tune(&[0.0], target, vec![10.0], 40, 400, (0.25, 0.4), &mut seeded(5));
        assert!((0.25..=0.4).contains(&rate), "rate {rate}, scale {scales:?}");
    }
}
