//! Log-scale weight handling and categorical draws.

use rand::Rng;

use crate::error::{Error, Result};

/// `log Σ exp(lw_i)`, or `-inf` when every entry is `-inf` or NaN.
pub fn log_sum_exp(lw: &[f64]) -> f64 {
    let max = lw
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = lw
        .iter()
        .filter(|v| !v.is_nan())
        .map(|&v| (v - max).exp())
        .sum();
    max + sum.ln()
}

/// Normalizes log-weights into a probability vector.
///
/// `t` is only used to label the error. NaN entries are treated as zero
/// probability; `+inf` entries are not accepted.
pub fn normalize_log_weights(lw: &[f64], t: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; lw.len()];
    normalize_log_weights_into(lw, t, &mut out)?;
    Ok(out)
}

pub fn normalize_log_weights_into(lw: &[f64], t: usize, out: &mut [f64]) -> Result<()> {
    debug_assert_eq!(lw.len(), out.len());
    let lse = log_sum_exp(lw);
    if !lse.is_finite() {
        return Err(Error::DegenerateWeights { t });
    }
    let mut total = 0.0;
    for (p, &v) in out.iter_mut().zip(lw) {
        *p = if v.is_nan() { 0.0 } else { (v - lse).exp() };
        total += *p;
    }
    // One more pass removes the last ulps of drift from the exp/ln round trip.
    for p in out.iter_mut() {
        *p /= total;
    }
    Ok(())
}

/// Inverse-CDF sampler over a fixed probability vector.
///
/// Ties follow the inversion rule: the first index whose cumulative sum
/// exceeds the uniform draw.
#[derive(Debug, Clone)]
pub struct CategoricalTable {
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl CategoricalTable {
    /// Panics if `p` is not a probability vector (negative, non-finite, or a
    /// total further than 1e-9 from one).
    pub fn new(p: &[f64]) -> Self {
        assert!(!p.is_empty(), "categorical: empty probability vector");
        let mut cumulative = Vec::with_capacity(p.len());
        let mut acc = 0.0;
        let mut last_positive = None;
        for (i, &pi) in p.iter().enumerate() {
            assert!(
                pi.is_finite() && pi >= 0.0,
                "categorical: invalid probability {pi} at index {i}"
            );
            if pi > 0.0 {
                last_positive = Some(i);
            }
            acc += pi;
            cumulative.push(acc);
        }
        assert!(
            (acc - 1.0).abs() < 1e-9,
            "categorical: probabilities sum to {acc}"
        );
        Self {
            cumulative,
            last_positive: last_positive.expect("categorical: no positive mass"),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>() * self.cumulative[self.cumulative.len() - 1];
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.last_positive)
    }

    pub fn len(&self) -> usize {
        self.cumulative.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cumulative.is_empty()
    }
}

/// Draws `i` with probability `p[i]`.
pub fn sample_categorical<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    CategoricalTable::new(p).sample(rng)
}

/// Draws from unnormalized log-weights.
pub fn sample_log_categorical<R: Rng + ?Sized>(lw: &[f64], t: usize, rng: &mut R) -> Result<usize> {
    let p = normalize_log_weights(lw, t)?;
    Ok(sample_categorical(&p, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;

    #[test]
    fn equal_entries_normalize_to_uniform() {
        let p = normalize_log_weights(&[-3.7; 5], 0).unwrap();
        for v in p {
            assert!((v - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn point_mass_and_arithmetic() {
        assert_eq!(
            normalize_log_weights(&[0.0, f64::NEG_INFINITY], 0).unwrap(),
            vec![1.0, 0.0]
        );
        let p = normalize_log_weights(&[1f64.ln(), 3f64.ln()], 0).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn all_neg_inf_is_degenerate_with_time_index() {
        let err = normalize_log_weights(&[f64::NEG_INFINITY; 3], 17).unwrap_err();
        assert_eq!(err, Error::DegenerateWeights { t: 17 });
    }

    #[test]
    fn point_mass_always_drawn() {
        let mut rng = seeded(1);
        for _ in 0..1000 {
            assert_eq!(sample_categorical(&[0.0, 0.0, 1.0], &mut rng), 2);
        }
    }

    #[test]
    fn uniform_frequencies_within_binomial_band() {
        let mut rng = seeded(2);
        let table = CategoricalTable::new(&[0.25; 4]);
        let mut counts = [0usize; 4];
        let n = 100_000;
        for _ in 0..n {
            counts[table.sample(&mut rng)] += 1;
        }
        for c in counts {
            let f = c as f64 / n as f64;
            assert!((0.24..=0.26).contains(&f), "frequency {f}");
        }
    }

    #[test]
    fn fixed_seed_gives_identical_sequence() {
        let p = [0.1, 0.2, 0.3, 0.4];
        let a: Vec<usize> = {
            let mut rng = seeded(9);
            (0..50).map(|_| sample_categorical(&p, &mut rng)).collect()
        };
        let b: Vec<usize> = {
            let mut rng = seeded(9);
            (0..50).map(|_| sample_categorical(&p, &mut rng)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    #[should_panic]
    fn invalid_vector_panics() {
        sample_categorical(&[0.5, 0.6], &mut seeded(0));
    }

    proptest! {
        #[test]
        fn normalized_weights_sum_to_one(lw in proptest::collection::vec(-700.0f64..700.0, 1..50)) {
            let p = normalize_log_weights(&lw, 0).unwrap();
            let s: f64 = p.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        }

        #[test]
        fn normalization_is_shift_invariant(lw in proptest::collection::vec(-50.0f64..50.0, 1..20), c in -100.0f64..100.0) {
            let shifted: Vec<f64> = lw.iter().map(|v| v + c).collect();
            let p = normalize_log_weights(&lw, 0).unwrap();
            let q = normalize_log_weights(&shifted, 0).unwrap();
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
