//! The standard SMC sampler and the particle-system container shared by the
//! conditional kernels.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{Model, Trajectory};
use crate::par;
use crate::weights::{normalize_log_weights, CategoricalTable};

/// All particles, ancestor indices and log-weights of one sweep.
///
/// Indexing is `[t][i]` with zero-based `t` and particle `i`. `ancestors[0]`
/// is empty; for `t ≥ 1`, `ancestors[t][i]` is the index at `t − 1` that
/// particle `i` at `t` descends from. `carries[t][i]` summarizes the ancestral
/// path `x^i_{1:t}`.
#[derive(Debug, Clone)]
pub struct ParticleSystem<S, C> {
    n: usize,
    pub particles: Vec<Vec<S>>,
    pub ancestors: Vec<Vec<usize>>,
    pub log_weights: Vec<Vec<f64>>,
    pub carries: Vec<Vec<C>>,
}

impl<S: Clone, C: Clone> ParticleSystem<S, C> {
    pub(crate) fn with_capacity(n: usize, horizon: usize) -> Self {
        Self {
            n,
            particles: Vec::with_capacity(horizon),
            ancestors: Vec::with_capacity(horizon),
            log_weights: Vec::with_capacity(horizon),
            carries: Vec::with_capacity(horizon),
        }
    }

    pub fn num_particles(&self) -> usize {
        self.n
    }

    /// Number of completed time steps.
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Index path `b_{0:t}` of the ancestral line ending in particle `k` at `t`.
    pub fn lineage(&self, k: usize, t: usize) -> Vec<usize> {
        assert!(k < self.n, "particle index {k} out of range 0..{}", self.n);
        assert!(t < self.len(), "time index {t} out of range");
        let mut b = vec![0; t + 1];
        b[t] = k;
        for s in (1..=t).rev() {
            b[s - 1] = self.ancestors[s][b[s]];
        }
        b
    }

    /// The ancestral path `x^k_{1:T}` of particle `k` at the final time.
    pub fn extract_path(&self, k: usize) -> Trajectory<S> {
        self.extract_path_at(k, self.len() - 1)
    }

    /// The ancestral path of particle `k` at time `t`.
    pub fn extract_path_at(&self, k: usize, t: usize) -> Trajectory<S> {
        self.lineage(k, t)
            .into_iter()
            .enumerate()
            .map(|(s, i)| self.particles[s][i].clone())
            .collect()
    }

    /// Normalized final-time weights.
    pub fn final_probabilities(&self) -> Result<Vec<f64>> {
        let t = self.len() - 1;
        normalize_log_weights(&self.log_weights[t], t)
    }

    /// Drops every step after `t`; used to check the recursion of
    /// [`Self::extract_path`].
    pub fn truncated(&self, t: usize) -> Self {
        let keep = t + 1;
        Self {
            n: self.n,
            particles: self.particles[..keep].to_vec(),
            ancestors: self.ancestors[..keep].to_vec(),
            log_weights: self.log_weights[..keep].to_vec(),
            carries: self.carries[..keep].to_vec(),
        }
    }
}

impl<S, C> ParticleSystem<S, C>
where
    S: crate::model::StateValue,
    C: Clone + Send + Sync,
{
    /// Time 0: draws `free` particles from `r_0` and appends `fixed` (the
    /// reference state) when given, then weights all of them.
    pub(crate) fn initialize<M, R>(
        &mut self,
        model: &M,
        free: usize,
        fixed: Option<&S>,
        rng: &mut R,
    ) -> Result<()>
    where
        M: Model<State = S, Carry = C>,
        R: Rng + ?Sized,
    {
        debug_assert!(self.is_empty());
        let root = model.initial_carry();
        let mut xs = Vec::with_capacity(self.n);
        for _ in 0..free {
            let x = model.sample_proposal(0, &root, rng);
            if !x.is_finite() {
                return Err(Error::NonFiniteState { t: 0 });
            }
            xs.push(x);
        }
        if let Some(x) = fixed {
            xs.push(x.clone());
        }
        debug_assert_eq!(xs.len(), self.n);
        let (lw, carries): (Vec<f64>, Vec<C>) = par::map_auto(self.n, 8, |i| {
            let mut c = root.clone();
            let w = model.log_weight_advance(0, &mut c, &xs[i]);
            (w, c)
        })
        .into_iter()
        .unzip();
        self.push_step(xs, Vec::new(), lw, carries, 0)
    }

    /// Draws `(a_t^i, x_t^i)` for the first `free` particles from the
    /// resampling/proposal kernel. Returns the draws without committing them.
    pub(crate) fn draw_free<M, R>(
        &self,
        model: &M,
        t: usize,
        free: usize,
        rng: &mut R,
    ) -> Result<(Vec<usize>, Vec<S>)>
    where
        M: Model<State = S, Carry = C>,
        R: Rng + ?Sized,
    {
        let p = normalize_log_weights(&self.log_weights[t - 1], t - 1)?;
        let table = CategoricalTable::new(&p);
        let mut ancestors = Vec::with_capacity(self.n);
        let mut xs = Vec::with_capacity(self.n);
        let prev = &self.carries[t - 1];
        for _ in 0..free {
            let a = table.sample(rng);
            let x = model.sample_proposal(t, &prev[a], rng);
            if !x.is_finite() {
                return Err(Error::NonFiniteState { t });
            }
            ancestors.push(a);
            xs.push(x);
        }
        Ok((ancestors, xs))
    }

    /// Weights the new particles and commits step `t`.
    pub(crate) fn commit<M>(&mut self, model: &M, t: usize, ancestors: Vec<usize>, xs: Vec<S>) -> Result<()>
    where
        M: Model<State = S, Carry = C>,
    {
        debug_assert_eq!(xs.len(), self.n);
        let prev = &self.carries[t - 1];
        let (lw, carries): (Vec<f64>, Vec<C>) = par::map_auto(self.n, 8, |i| {
            let mut c = prev[ancestors[i]].clone();
            let w = model.log_weight_advance(t, &mut c, &xs[i]);
            (w, c)
        })
        .into_iter()
        .unzip();
        self.push_step(xs, ancestors, lw, carries, t)
    }

    fn push_step(&mut self, xs: Vec<S>, ancestors: Vec<usize>, lw: Vec<f64>, carries: Vec<C>, t: usize) -> Result<()> {
        if lw.iter().any(|w| w.is_nan()) {
            return Err(Error::Numerical {
                t,
                msg: "NaN log-weight".into(),
            });
        }
        if lw.iter().all(|&w| w == f64::NEG_INFINITY) {
            return Err(Error::DegenerateWeights { t });
        }
        self.particles.push(xs);
        self.ancestors.push(ancestors);
        self.log_weights.push(lw);
        self.carries.push(carries);
        Ok(())
    }
}

/// Runs the standard (unconditional) SMC sampler with `n` particles.
pub fn smc_sweep<M, R>(model: &M, n: usize, rng: &mut R) -> Result<ParticleSystem<M::State, M::Carry>>
where
    M: Model,
    R: Rng + ?Sized,
{
    if n == 0 {
        return Err(Error::InvalidArgument("particle count must be at least 1".into()));
    }
    let horizon = model.horizon();
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let mut ps = ParticleSystem::with_capacity(n, horizon);
    ps.initialize(model, n, None, rng)?;
    for t in 1..horizon {
        let (ancestors, xs) = ps.draw_free(model, t, n, rng)?;
        ps.commit(model, t, ancestors, xs)?;
    }
    Ok(ps)
}

/// Ancestral path `x^k_{1:T}` of particle `k` in a completed system.
pub fn extract_path<S: Clone, C: Clone>(ps: &ParticleSystem<S, C>, k: usize) -> Trajectory<S> {
    ps.extract_path(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::lgss::Lgss;
    use crate::models::sv::StochasticVolatility;
    use crate::rng::seeded;

    #[test]
    fn single_particle_has_trivial_ancestry() {
        let (_, y) = Lgss::new(0.8, 1.0, 0.5, vec![]).unwrap().simulate(30, &mut seeded(3));
        let model = Lgss::new(0.8, 1.0, 0.5, y).unwrap();
        let ps = smc_sweep(&model, 1, &mut seeded(4)).unwrap();
        for t in 1..30 {
            assert_eq!(ps.ancestors[t], vec![0]);
        }
        let path = ps.extract_path(0);
        let stored: Vec<f64> = ps.particles.iter().map(|v| v[0]).collect();
        assert_eq!(path, stored);
    }

    #[test]
    fn hand_traced_two_step_lineage() {
        let mut ps: ParticleSystem<f64, ()> = ParticleSystem::with_capacity(2, 2);
        ps.particles = vec![vec![10.0, 20.0], vec![1.0, 2.0]];
        ps.ancestors = vec![vec![], vec![1, 0]];
        ps.log_weights = vec![vec![0.0; 2]; 2];
        ps.carries = vec![vec![(); 2]; 2];
        assert_eq!(ps.extract_path(0), vec![20.0, 1.0]);
        assert_eq!(ps.extract_path(1), vec![10.0, 2.0]);
    }

    #[test]
    fn path_prefix_matches_truncated_system() {
        let (_, y) = Lgss::new(0.8, 1.0, 0.5, vec![]).unwrap().simulate(25, &mut seeded(5));
        let model = Lgss::new(0.8, 1.0, 0.5, y).unwrap();
        let ps = smc_sweep(&model, 7, &mut seeded(6)).unwrap();
        for k in 0..7 {
            let full = ps.extract_path(k);
            let b = ps.lineage(k, 24);
            for t in [0, 3, 12, 24] {
                let short = ps.truncated(t).extract_path(b[t]);
                assert_eq!(&full[..=t], &short[..]);
            }
        }
    }

    #[test]
    fn sweep_is_bit_reproducible() {
        let (_, y) = Lgss::new(0.8, 1.0, 0.5, vec![]).unwrap().simulate(40, &mut seeded(7));
        let model = Lgss::new(0.8, 1.0, 0.5, y).unwrap();
        let a = smc_sweep(&model, 16, &mut seeded(8)).unwrap();
        let b = smc_sweep(&model, 16, &mut seeded(8)).unwrap();
        assert_eq!(a.particles, b.particles);
        assert_eq!(a.ancestors, b.ancestors);
        assert_eq!(a.log_weights, b.log_weights);
    }

    #[test]
    fn sv_sweep_runs_with_finite_weights() {
        let sv = StochasticVolatility::new(0.9, 0.5, vec![]).unwrap();
        let (_, y) = sv.simulate(400, &mut seeded(10));
        let model = StochasticVolatility::new(0.9, 0.5, y).unwrap();
        let ps = smc_sweep(&model, 100, &mut seeded(11)).unwrap();
        assert_eq!(ps.len(), 400);
        assert!(ps.log_weights.iter().flatten().all(|w| w.is_finite()));
        for t in 1..400 {
            assert!(ps.ancestors[t].iter().all(|&a| a < 100));
        }
    }

    #[test]
    fn zero_particles_rejected() {
        let model = Lgss::new(0.8, 1.0, 0.5, vec![0.0; 3]).unwrap();
        assert!(smc_sweep(&model, 0, &mut seeded(0)).is_err());
    }
}
