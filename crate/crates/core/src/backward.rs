//! Backward simulation: PG with backward simulation (PGBS) and the
//! forward-filter/backward-simulator (FFBSi) smoother.

use rand::Rng;

use crate::error::{Error, Result};
use crate::kernel::{conditional_sweep, KernelConfig, SweepDiagnostics};
use crate::model::{MarkovOrder, Model, Trajectory};
use crate::nonmarkov::{adaptive_level, markov_ancestor_log_weights, AncestorEvaluator, TruncationPolicy};
use crate::par;
use crate::rng::{fork_seed, stream};
use crate::smc::{smc_sweep, ParticleSystem};
use crate::weights::{normalize_log_weights, sample_categorical};

/// Normalized backward probabilities `P(j_t = i | x̃_{t+1:T})`.
///
/// `tail` holds the already-drawn backward states at positions `t + 1..T`;
/// entries at or before `t` are ignored. Returns the distribution and the
/// truncation level used.
pub fn backward_probabilities<M: Model>(
    model: &M,
    ps: &ParticleSystem<M::State, M::Carry>,
    t: usize,
    tail: &[M::State],
    truncation: TruncationPolicy,
) -> Result<(Vec<f64>, usize)> {
    let lw = &ps.log_weights[t];
    let carries = &ps.carries[t];
    let degenerate = |_| Error::DegenerateBackwardWeights { t };
    if model.markov_order() == MarkovOrder::StateSpace {
        let w = markov_ancestor_log_weights(model, t + 1, tail, lw, carries);
        return Ok((normalize_log_weights(&w, t).map_err(degenerate)?, 1));
    }
    let mut eval = AncestorEvaluator::new(model, t + 1, tail, lw, carries);
    let max = eval.max_level();
    match truncation {
        TruncationPolicy::Adaptive { upsilon, tau } => {
            let (level, p) = adaptive_level(&mut eval, upsilon, tau).map_err(degenerate)?;
            Ok((p, level))
        }
        TruncationPolicy::Full => {
            eval.advance_to(max);
            Ok((eval.distribution().map_err(degenerate)?, max))
        }
        TruncationPolicy::Fixed(l) => {
            eval.advance_to(l);
            Ok((eval.distribution().map_err(degenerate)?, l.min(max)))
        }
    }
}

/// Draws backward indices `j_{1:T}` through a completed particle system.
/// Returns the indices and the truncation level used at each `t < T − 1`.
pub fn backward_simulate<M, R>(
    model: &M,
    ps: &ParticleSystem<M::State, M::Carry>,
    truncation: TruncationPolicy,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<usize>)>
where
    M: Model,
    R: Rng + ?Sized,
{
    let horizon = ps.len();
    let last = horizon - 1;
    let p = normalize_log_weights(&ps.log_weights[last], last).map_err(|_| Error::DegenerateBackwardWeights { t: last })?;
    let mut j = vec![0; horizon];
    let mut levels = vec![0; horizon];
    j[last] = sample_categorical(&p, rng);
    // Positions `t + 1..` are filled as the backward pass proceeds; earlier
    // entries are placeholders.
    let mut tail: Vec<M::State> = (0..horizon).map(|s| ps.particles[s][0].clone()).collect();
    tail[last] = ps.particles[last][j[last]].clone();
    for t in (0..last).rev() {
        let (p, level) = backward_probabilities(model, ps, t, &tail, truncation)?;
        j[t] = sample_categorical(&p, rng);
        levels[t] = level;
        tail[t] = ps.particles[t][j[t]].clone();
    }
    Ok((j, levels))
}

fn path_of<S: Clone, C>(ps: &ParticleSystem<S, C>, j: &[usize]) -> Trajectory<S> {
    j.iter().enumerate().map(|(t, &i)| ps.particles[t][i].clone()).collect()
}

/// PG forward pass (reference keeps its lineage) followed by one backward
/// trajectory.
pub fn pgbs_sweep<M, R>(
    model: &M,
    reference: &[M::State],
    cfg: &KernelConfig,
    rng: &mut R,
) -> Result<(Trajectory<M::State>, SweepDiagnostics)>
where
    M: Model,
    R: Rng + ?Sized,
{
    let (ps, mut diag) = conditional_sweep(model, reference, cfg, false, rng)?;
    let (j, levels) = backward_simulate(model, &ps, cfg.truncation, rng)?;
    diag.output_index = *j.last().expect("non-empty horizon");
    diag.levels = levels;
    Ok((path_of(&ps, &j), diag))
}

/// Unconditional sweep with `n` particles followed by `m` backward
/// trajectories. Backward paths use independent sub-streams of one seed
/// drawn from `rng` and may run in parallel.
pub fn ffbsi_smooth<M, R>(
    model: &M,
    n: usize,
    m: usize,
    truncation: TruncationPolicy,
    rng: &mut R,
) -> Result<Vec<Trajectory<M::State>>>
where
    M: Model,
    R: Rng + ?Sized,
{
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one backward trajectory".into()));
    }
    let ps = smc_sweep(model, n, rng)?;
    let seed = fork_seed(rng);
    let cost = n * ps.len();
    par::map_auto(m, cost, |k| {
        let mut sub = stream(seed, k as u64);
        backward_simulate(model, &ps, truncation, &mut sub).map(|(j, _)| path_of(&ps, &j))
    })
    .into_iter()
    .collect()
}
