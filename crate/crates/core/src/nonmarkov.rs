//! Ancestor-sampling weights for non-Markovian targets.
//!
//! For a reference tail `x'_{t:T}` and particle `i` at `t − 1`, the exact
//! ancestor weight is `w^i_{t−1} · γ_T((x^i_{1:t−1}, x'_{t:T})) / γ_{t−1}(x^i_{1:t−1})`,
//! a product of `T − t + 1` per-step factors. Truncating the product after
//! `ℓ` factors gives `P̃_ℓ`; the adaptive rule grows `ℓ` until the
//! moving average of `TV(P̃_ℓ, P̃_{ℓ−1})` drops below a threshold. The law of
//! the ancestor index can also be targeted by a Metropolis–Hastings chain
//! that only evaluates weights at proposed indices.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{MarkovOrder, Model};
use crate::par;
use crate::weights::{normalize_log_weights, sample_categorical};

/// How many factors of the ancestor-weight product are kept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruncationPolicy {
    Full,
    Fixed(usize),
    /// Grow `ℓ` until the moving average of successive TV distances, with
    /// forgetting factor `upsilon`, falls below `tau`.
    Adaptive { upsilon: f64, tau: f64 },
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TruncationPolicy::Full => Ok(()),
            TruncationPolicy::Fixed(l) if l >= 1 => Ok(()),
            TruncationPolicy::Fixed(l) => Err(Error::Config(format!("truncation level must be >= 1, got {l}"))),
            TruncationPolicy::Adaptive { upsilon, tau } => {
                if !(0.0..=1.0).contains(&upsilon) || !(0.0..=1.0).contains(&tau) {
                    Err(Error::Config(format!(
                        "adaptive truncation needs upsilon, tau in [0, 1], got upsilon = {upsilon}, tau = {tau}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Metropolis–Hastings treatment of the ancestor draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AncestorMh {
    /// Sample the index directly from the (possibly truncated) weights.
    Off,
    /// Forced-move MH with a uniform proposal over the other indices; weights
    /// in the acceptance ratio are truncated per the truncation policy.
    ForcedMove { n_inner: usize },
    /// Independence MH proposing from the truncated distribution and
    /// correcting with exact weights.
    TruncatedProposal { n_inner: usize },
}

impl AncestorMh {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AncestorMh::Off => Ok(()),
            AncestorMh::ForcedMove { n_inner } | AncestorMh::TruncatedProposal { n_inner } if n_inner >= 1 => Ok(()),
            _ => Err(Error::Config("MH inner step count must be >= 1".into())),
        }
    }
}

/// Probability vector over particle indices: the law of the reference's
/// ancestor index.
pub type AncestorDistribution = Vec<f64>;

/// Incremental evaluator of ancestor-sampling log-weights at time `t`.
///
/// Level `ℓ` means the first `ℓ` factors (`s = t .. t + ℓ − 1`) have been
/// multiplied in. Level 0 is the forward weight alone.
pub struct AncestorEvaluator<'a, M: Model> {
    model: &'a M,
    t: usize,
    reference: &'a [M::State],
    prior: &'a [f64],
    base: &'a [M::Carry],
    slots: Vec<(M::Carry, f64)>,
    level: usize,
    evaluations: AtomicUsize,
}

impl<'a, M: Model> AncestorEvaluator<'a, M> {
    /// `log_w` and `carries` describe the particles at `t − 1`.
    pub fn new(model: &'a M, t: usize, reference: &'a [M::State], log_w: &'a [f64], carries: &'a [M::Carry]) -> Self {
        assert!(t >= 1 && t < reference.len(), "ancestor weights need 1 <= t < T");
        assert_eq!(log_w.len(), carries.len());
        Self {
            model,
            t,
            reference,
            prior: log_w,
            base: carries,
            slots: carries.iter().map(|c| (c.clone(), 0.0)).collect(),
            level: 0,
            evaluations: AtomicUsize::new(0),
        }
    }

    pub fn num_particles(&self) -> usize {
        self.prior.len()
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// `ℓ_max = T − t`: the untruncated level.
    pub fn max_level(&self) -> usize {
        self.reference.len() - self.t
    }

    /// Number of single-factor evaluations performed so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }

    /// Multiplies in one more factor for every particle.
    pub fn advance(&mut self) {
        assert!(self.level < self.max_level(), "already at the untruncated level");
        let s = self.t + self.level;
        let x = &self.reference[s];
        let model = self.model;
        let n = self.slots.len();
        let work = |_: usize, slot: &mut (M::Carry, f64)| {
            if slot.1 != f64::NEG_INFINITY {
                slot.1 += model.advance(s, &mut slot.0, x);
            }
        };
        if n >= 2 && n * 16 >= par::MIN_PARALLEL_WORK {
            par::par_for_each_mut(&mut self.slots, work);
        } else {
            self.slots.iter_mut().enumerate().for_each(|(i, slot)| work(i, slot));
        }
        self.evaluations.fetch_add(n, Ordering::Relaxed);
        self.level += 1;
    }

    pub fn advance_to(&mut self, level: usize) {
        while self.level < level.min(self.max_level()) {
            self.advance();
        }
    }

    pub fn log_weights(&self) -> Vec<f64> {
        self.prior
            .iter()
            .zip(&self.slots)
            .map(|(w, (_, c))| if *w == f64::NEG_INFINITY { *w } else { w + c })
            .collect()
    }

    pub fn distribution(&self) -> Result<AncestorDistribution> {
        normalize_log_weights(&self.log_weights(), self.t).map_err(|_| Error::UnreachableReference { t: self.t })
    }

    /// Log-weight of one particle at truncation level `level`, computed from
    /// scratch in `O(level)`.
    pub fn single(&self, i: usize, level: usize) -> f64 {
        let level = level.min(self.max_level());
        let mut carry = self.base[i].clone();
        let mut acc = self.prior[i];
        for s in self.t..self.t + level {
            if acc == f64::NEG_INFINITY {
                break;
            }
            acc += self.model.advance(s, &mut carry, &self.reference[s]);
            self.evaluations.fetch_add(1, Ordering::Relaxed);
        }
        acc
    }
}

/// `log γ_{t−1+ℓ}((x_{1:t−1}, x'_{t:t−1+ℓ})) − log γ_{t−1}(x_{1:t−1})` with
/// `t = prefix.len()`.
///
/// Panics on NaN or if `ℓ` is outside `1..=T − t`.
pub fn nonmarkov_ratio<M: Model>(model: &M, prefix: &[M::State], reference: &[M::State], level: usize) -> f64 {
    let t = prefix.len();
    assert!(t >= 1, "prefix must be non-empty");
    assert!(
        level >= 1 && t + level <= reference.len(),
        "truncation level {level} outside 1..={}",
        reference.len() - t
    );
    let mut carry = model.carry_of(prefix);
    let mut acc = 0.0;
    for s in t..t + level {
        acc += model.advance(s, &mut carry, &reference[s]);
        if acc == f64::NEG_INFINITY {
            return acc;
        }
    }
    assert!(!acc.is_nan(), "NaN ancestor-weight ratio");
    acc
}

/// Adaptive truncation: returns the chosen level and `P̃_ℓ` at that level.
///
/// Starts at `ℓ = 1`; from `ℓ = 2` on, `ε_ℓ = TV(P̃_ℓ, P̃_{ℓ−1})` feeds the
/// moving average `MA ← υ·MA + (1 − υ)·ε_ℓ` (initialized at 1), and the
/// search stops once `MA < τ` or the untruncated level is reached.
pub fn adaptive_level<M: Model>(
    eval: &mut AncestorEvaluator<'_, M>,
    upsilon: f64,
    tau: f64,
) -> Result<(usize, AncestorDistribution)> {
    eval.advance_to(1);
    let mut prev = eval.distribution()?;
    let mut average = 1.0;
    while eval.level() < eval.max_level() {
        eval.advance();
        let next = eval.distribution()?;
        let eps = tv_distance(&next, &prev);
        average = upsilon * average + (1.0 - upsilon) * eps;
        prev = next;
        if average < tau {
            break;
        }
    }
    Ok((eval.level(), prev))
}

/// Result of an MH run on the ancestor index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MhOutcome {
    pub index: usize,
    pub accepted: usize,
    pub proposed: usize,
}

/// Forced-move MH on `0..n` targeting `P(k) ∝ exp(log_weight(k))`.
///
/// Proposals are uniform over the indices other than the current one, so the
/// Hastings ratio reduces to the weight ratio. The current weight is cached.
pub fn forced_move_mh<F, R>(current: usize, n: usize, mut log_weight: F, n_inner: usize, rng: &mut R) -> Result<MhOutcome>
where
    F: FnMut(usize) -> f64,
    R: Rng + ?Sized,
{
    if n < 2 {
        return Err(Error::Config("forced-move MH needs at least two particles".into()));
    }
    if current >= n {
        return Err(Error::InvalidArgument(format!("index {current} outside 0..{n}")));
    }
    let mut k = current;
    let mut lw_k = log_weight(k);
    let mut accepted = 0;
    for _ in 0..n_inner {
        let u = rng.random_range(0..n - 1);
        let proposal = if u < k { u } else { u + 1 };
        let lw_p = log_weight(proposal);
        let log_alpha = forced_move_log_acceptance(lw_k, lw_p, n);
        if log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha {
            k = proposal;
            lw_k = lw_p;
            accepted += 1;
        }
    }
    Ok(MhOutcome {
        index: k,
        accepted,
        proposed: n_inner,
    })
}

/// `log(1 ∧ (w̃_{k'} / w̃_k) · q(k | k') / q(k' | k))` for the uniform forced
/// move, where the proposal ratio is one.
pub fn forced_move_log_acceptance(lw_current: f64, lw_proposal: f64, _n: usize) -> f64 {
    if lw_proposal == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if lw_current == f64::NEG_INFINITY {
        return 0.0;
    }
    (lw_proposal - lw_current).min(0.0)
}

/// Independence MH on `0..n` proposing from `proposal` and targeting
/// `exp(log_weight)`.
pub fn independence_mh<F, R>(current: usize, proposal: &[f64], mut log_weight: F, n_inner: usize, rng: &mut R) -> MhOutcome
where
    F: FnMut(usize) -> f64,
    R: Rng + ?Sized,
{
    let mut k = current;
    let mut lw_k = log_weight(k);
    let mut accepted = 0;
    for _ in 0..n_inner {
        let cand = sample_categorical(proposal, rng);
        if cand == k {
            accepted += 1;
            continue;
        }
        let lw_c = log_weight(cand);
        let log_alpha = if lw_c == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else if lw_k == f64::NEG_INFINITY {
            0.0
        } else {
            lw_c - lw_k + proposal[k].ln() - proposal[cand].ln()
        };
        if log_alpha >= 0.0 || rng.random::<f64>().ln() < log_alpha {
            k = cand;
            lw_k = lw_c;
            accepted += 1;
        }
    }
    MhOutcome {
        index: k,
        accepted,
        proposed: n_inner,
    }
}

/// `KL(P ‖ Q) = Σ P log(P / Q)` with `0 log 0 = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    assert_eq!(p.len(), q.len());
    let mut kl = 0.0;
    for (k, (&pk, &qk)) in p.iter().zip(q).enumerate() {
        if pk == 0.0 {
            continue;
        }
        if qk == 0.0 {
            return Err(Error::SupportViolation { index: k });
        }
        kl += pk * (pk / qk).ln();
    }
    Ok(kl.max(0.0))
}

/// `½ Σ |P − Q|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Record of one reference-ancestor draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AncestorDraw {
    pub index: usize,
    /// Truncation level used (1 for state-space models).
    pub level: usize,
    pub mh_accepted: usize,
    pub mh_proposed: usize,
    pub evaluations: usize,
}

/// Unnormalized ancestor log-weights at `t` for state-space models:
/// `log w^i_{t−1} + log f(x'_t | x^i_{t−1})`.
pub fn markov_ancestor_log_weights<M: Model>(
    model: &M,
    t: usize,
    reference: &[M::State],
    log_w: &[f64],
    carries: &[M::Carry],
) -> Vec<f64> {
    log_w
        .iter()
        .zip(carries)
        .map(|(w, c)| {
            if *w == f64::NEG_INFINITY {
                *w
            } else {
                w + model.log_transition(t, c, &reference[t])
            }
        })
        .collect()
}

/// Draws the ancestor of the reference state `x'_t` among the particles at
/// `t − 1`. `current` is the index the reference would keep without ancestor
/// sampling.
#[allow(clippy::too_many_arguments)]
pub fn draw_reference_ancestor<M, R>(
    model: &M,
    t: usize,
    reference: &[M::State],
    log_w: &[f64],
    carries: &[M::Carry],
    current: usize,
    truncation: TruncationPolicy,
    mh: AncestorMh,
    rng: &mut R,
) -> Result<AncestorDraw>
where
    M: Model,
    R: Rng + ?Sized,
{
    let n = log_w.len();
    if model.markov_order() == MarkovOrder::StateSpace {
        let lw = markov_ancestor_log_weights(model, t, reference, log_w, carries);
        let (index, mh_accepted, mh_proposed) = match mh {
            AncestorMh::Off => {
                let p = normalize_log_weights(&lw, t).map_err(|_| Error::UnreachableReference { t })?;
                (sample_categorical(&p, rng), 0, 0)
            }
            AncestorMh::ForcedMove { n_inner } => {
                let o = forced_move_mh(current, n, |k| lw[k], n_inner, rng)?;
                (o.index, o.accepted, o.proposed)
            }
            AncestorMh::TruncatedProposal { n_inner } => {
                let p = normalize_log_weights(&lw, t).map_err(|_| Error::UnreachableReference { t })?;
                let o = independence_mh(current, &p, |k| lw[k], n_inner, rng);
                (o.index, o.accepted, o.proposed)
            }
        };
        return Ok(AncestorDraw {
            index,
            level: 1,
            mh_accepted,
            mh_proposed,
            evaluations: n,
        });
    }

    let mut eval = AncestorEvaluator::new(model, t, reference, log_w, carries);
    let max = eval.max_level();
    let fixed_level = |eval: &mut AncestorEvaluator<'_, M>| -> Result<(usize, Option<AncestorDistribution>)> {
        match truncation {
            TruncationPolicy::Full => Ok((max, None)),
            TruncationPolicy::Fixed(l) => Ok((l.min(max), None)),
            TruncationPolicy::Adaptive { upsilon, tau } => {
                let (l, p) = adaptive_level(eval, upsilon, tau)?;
                Ok((l, Some(p)))
            }
        }
    };

    match mh {
        AncestorMh::Off => {
            let (level, p) = fixed_level(&mut eval)?;
            let p = match p {
                Some(p) => p,
                None => {
                    eval.advance_to(level);
                    eval.distribution()?
                }
            };
            Ok(AncestorDraw {
                index: sample_categorical(&p, rng),
                level,
                mh_accepted: 0,
                mh_proposed: 0,
                evaluations: eval.evaluations(),
            })
        }
        AncestorMh::ForcedMove { n_inner } => {
            let (level, _) = fixed_level(&mut eval)?;
            let o = forced_move_mh(current, n, |k| eval.single(k, level), n_inner, rng)?;
            Ok(AncestorDraw {
                index: o.index,
                level,
                mh_accepted: o.accepted,
                mh_proposed: o.proposed,
                evaluations: eval.evaluations(),
            })
        }
        AncestorMh::TruncatedProposal { n_inner } => {
            let (level, p) = fixed_level(&mut eval)?;
            let p = match p {
                Some(p) => p,
                None => {
                    eval.advance_to(level);
                    eval.distribution()?
                }
            };
            let o = independence_mh(current, &p, |k| eval.single(k, max), n_inner, rng);
            Ok(AncestorDraw {
                index: o.index,
                level,
                mh_accepted: o.accepted,
                mh_proposed: o.proposed,
                evaluations: eval.evaluations(),
            })
        }
    }
}
