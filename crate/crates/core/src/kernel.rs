//! Conditional SMC kernels: particle Gibbs (PG), PG with ancestor sampling
//! (PGAS) and PG with backward simulation (PGBS).
//!
//! The reference trajectory sits in the last particle slot (`N − 1`) at every
//! time step.

use rand::Rng;

use crate::backward::pgbs_sweep;
use crate::error::{Error, Result};
use crate::model::{Model, StateValue, Trajectory};
use crate::nonmarkov::{draw_reference_ancestor, AncestorMh, TruncationPolicy};
use crate::smc::ParticleSystem;
use crate::weights::sample_categorical;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    Pg,
    Pgas,
    Pgbs,
}

impl Flavor {
    pub fn name(&self) -> &'static str {
        match self {
            Flavor::Pg => "pg",
            Flavor::Pgas => "pgas",
            Flavor::Pgbs => "pgbs",
        }
    }
}

impl std::str::FromStr for Flavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pg" => Ok(Flavor::Pg),
            "pgas" => Ok(Flavor::Pgas),
            "pgbs" => Ok(Flavor::Pgbs),
            other => Err(Error::Config(format!("unknown kernel flavor {other:?} (expected pg, pgas or pgbs)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    /// Number of particles, reference included.
    pub n: usize,
    pub flavor: Flavor,
    pub truncation: TruncationPolicy,
    pub mh: AncestorMh,
}

impl KernelConfig {
    pub fn new(n: usize, flavor: Flavor) -> Self {
        Self {
            n,
            flavor,
            truncation: TruncationPolicy::Full,
            mh: AncestorMh::Off,
        }
    }

    pub fn pgas(n: usize) -> Self {
        Self::new(n, Flavor::Pgas)
    }

    pub fn pg(n: usize) -> Self {
        Self::new(n, Flavor::Pg)
    }

    pub fn pgbs(n: usize) -> Self {
        Self::new(n, Flavor::Pgbs)
    }

    pub fn with_truncation(mut self, truncation: TruncationPolicy) -> Self {
        self.truncation = truncation;
        self
    }

    pub fn with_mh(mut self, mh: AncestorMh) -> Self {
        self.mh = mh;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("particle count N must be at least 1".into()));
        }
        self.truncation.validate()?;
        self.mh.validate()?;
        if self.mh != AncestorMh::Off && self.n < 2 && self.flavor == Flavor::Pgas {
            return Err(Error::Config("ancestor MH needs at least two particles".into()));
        }
        Ok(())
    }
}

/// What happened during one kernel application.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepDiagnostics {
    /// Index of the particle whose lineage was returned (PG/PGAS) or
    /// `j_T` (PGBS).
    pub output_index: usize,
    /// `a_t` of the reference slot for `t ≥ 1`; entry 0 holds the slot
    /// itself (`N − 1`).
    pub reference_ancestors: Vec<usize>,
    /// Truncation level used per ancestor or backward draw; 0 where none.
    pub levels: Vec<usize>,
    pub mh_accepted: usize,
    pub mh_proposed: usize,
    /// Single-factor weight evaluations spent on ancestor weights.
    pub evaluations: usize,
}

impl SweepDiagnostics {
    /// Number of steps where the reference's ancestor left its own lineage.
    pub fn ancestor_switches(&self) -> usize {
        let last = self.reference_ancestors.len();
        if last == 0 {
            return 0;
        }
        let n_minus_1 = self.reference_slot();
        self.reference_ancestors[1..].iter().filter(|&&a| a != n_minus_1).count()
    }

    fn reference_slot(&self) -> usize {
        self.reference_ancestors.first().copied().unwrap_or(0)
    }

    /// Mean truncation level over steps where one was chosen.
    pub fn mean_level(&self) -> f64 {
        let used: Vec<usize> = self.levels.iter().copied().filter(|&l| l > 0).collect();
        if used.is_empty() {
            0.0
        } else {
            used.iter().sum::<usize>() as f64 / used.len() as f64
        }
    }
}

fn check_reference<M: Model>(model: &M, reference: &[M::State]) -> Result<()> {
    if reference.len() != model.horizon() {
        return Err(Error::InvalidArgument(format!(
            "reference has length {}, model horizon is {}",
            reference.len(),
            model.horizon()
        )));
    }
    if let Some(t) = reference.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteState { t });
    }
    Ok(())
}

/// Forward pass of the conditional SMC sampler. With `ancestor_sampling`
/// off the reference keeps its own lineage (`a_t^N = N`).
pub fn conditional_sweep<M, R>(
    model: &M,
    reference: &[M::State],
    cfg: &KernelConfig,
    ancestor_sampling: bool,
    rng: &mut R,
) -> Result<(ParticleSystem<M::State, M::Carry>, SweepDiagnostics)>
where
    M: Model,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    check_reference(model, reference)?;
    let n = cfg.n;
    let horizon = model.horizon();
    let slot = n - 1;
    let mut ps = ParticleSystem::with_capacity(n, horizon);
    ps.initialize(model, slot, Some(&reference[0]), rng)?;
    let mut diag = SweepDiagnostics {
        reference_ancestors: vec![slot; horizon],
        levels: vec![0; horizon],
        ..Default::default()
    };
    for t in 1..horizon {
        let (mut ancestors, mut xs) = ps.draw_free(model, t, slot, rng)?;
        let a = if ancestor_sampling {
            let draw = draw_reference_ancestor(
                model,
                t,
                reference,
                &ps.log_weights[t - 1],
                &ps.carries[t - 1],
                slot,
                cfg.truncation,
                cfg.mh,
                rng,
            )?;
            diag.levels[t] = draw.level;
            diag.mh_accepted += draw.mh_accepted;
            diag.mh_proposed += draw.mh_proposed;
            diag.evaluations += draw.evaluations;
            draw.index
        } else {
            slot
        };
        diag.reference_ancestors[t] = a;
        ancestors.push(a);
        xs.push(reference[t].clone());
        ps.commit(model, t, ancestors, xs)?;
    }
    Ok((ps, diag))
}

/// One application of the kernel selected by `cfg.flavor`.
pub fn apply_kernel<M, R>(
    model: &M,
    reference: &[M::State],
    cfg: &KernelConfig,
    rng: &mut R,
) -> Result<(Trajectory<M::State>, SweepDiagnostics)>
where
    M: Model,
    R: Rng + ?Sized,
{
    match cfg.flavor {
        Flavor::Pgbs => pgbs_sweep(model, reference, cfg, rng),
        Flavor::Pg | Flavor::Pgas => {
            let (ps, mut diag) = conditional_sweep(model, reference, cfg, cfg.flavor == Flavor::Pgas, rng)?;
            let p = ps.final_probabilities()?;
            let k = sample_categorical(&p, rng);
            diag.output_index = k;
            Ok((ps.extract_path(k), diag))
        }
    }
}

/// PGAS kernel. A config with another flavor is run as given.
pub fn pgas_sweep<M, R>(
    model: &M,
    reference: &[M::State],
    cfg: &KernelConfig,
    rng: &mut R,
) -> Result<(Trajectory<M::State>, SweepDiagnostics)>
where
    M: Model,
    R: Rng + ?Sized,
{
    apply_kernel(model, reference, cfg, rng)
}

/// Particle Gibbs without ancestor sampling.
pub fn pg_sweep<M, R>(
    model: &M,
    reference: &[M::State],
    n: usize,
    rng: &mut R,
) -> Result<(Trajectory<M::State>, SweepDiagnostics)>
where
    M: Model,
    R: Rng + ?Sized,
{
    apply_kernel(model, reference, &KernelConfig::pg(n), rng)
}

/// Starting trajectory for a chain: one path of an unconditional sweep.
pub fn initial_trajectory<M, R>(model: &M, n: usize, rng: &mut R) -> Result<Trajectory<M::State>>
where
    M: Model,
    R: Rng + ?Sized,
{
    let ps = crate::smc::smc_sweep(model, n, rng)?;
    let p = ps.final_probabilities()?;
    Ok(ps.extract_path(sample_categorical(&p, rng)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::lgss::Lgss;
    use crate::models::sv::StochasticVolatility;
    use crate::rng::seeded;

    fn lgss(t: usize, seed: u64) -> Lgss {
        let (_, y) = Lgss::new(0.8, 1.0, 0.5, vec![]).unwrap().simulate(t, &mut seeded(seed));
        Lgss::new(0.8, 1.0, 0.5, y).unwrap()
    }

    #[test]
    fn single_particle_returns_reference() {
        let m = lgss(25, 1);
        let reference: Vec<f64> = (0..25).map(|i| (i as f64 * 0.3).sin()).collect();
        for cfg in [KernelConfig::pgas(1), KernelConfig::pg(1), KernelConfig::pgbs(1)] {
            let (out, _) = apply_kernel(&m, &reference, &cfg, &mut seeded(2)).unwrap();
            assert_eq!(out, reference);
        }
    }

    #[test]
    fn reference_occupies_last_slot() {
        let m = lgss(30, 3);
        let reference = initial_trajectory(&m, 10, &mut seeded(4)).unwrap();
        for flag in [false, true] {
            let (ps, diag) = conditional_sweep(&m, &reference, &KernelConfig::pgas(7), flag, &mut seeded(5)).unwrap();
            for t in 0..30 {
                assert_eq!(ps.particles[t][6], reference[t]);
            }
            if !flag {
                assert_eq!(diag.ancestor_switches(), 0);
            }
            assert!(ps.ancestors.iter().flatten().all(|&a| a < 7));
            assert!(ps.log_weights.iter().flatten().all(|w| w.is_finite()));
        }
    }

    #[test]
    fn pgas_moves_away_from_reference() {
        let m = lgss(20, 6);
        let reference = initial_trajectory(&m, 10, &mut seeded(7)).unwrap();
        let mut rng = seeded(8);
        let moved = (0..50)
            .filter(|_| pgas_sweep(&m, &reference, &KernelConfig::pgas(3), &mut rng).unwrap().0 != reference)
            .count();
        assert!(moved > 0);
    }

    #[test]
    fn sweeps_are_reproducible() {
        let m = lgss(40, 9);
        let reference = initial_trajectory(&m, 10, &mut seeded(10)).unwrap();
        for cfg in [KernelConfig::pgas(5), KernelConfig::pg(5), KernelConfig::pgbs(5)] {
            let a = apply_kernel(&m, &reference, &cfg, &mut seeded(11)).unwrap();
            let b = apply_kernel(&m, &reference, &cfg, &mut seeded(11)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn sv_pgas_runs_on_long_series() {
        let sv = StochasticVolatility::new(0.9, 0.5, vec![]).unwrap();
        let (_, y) = sv.simulate(400, &mut seeded(12));
        let m = StochasticVolatility::new(0.9, 0.5, y).unwrap();
        let mut x = initial_trajectory(&m, 20, &mut seeded(13)).unwrap();
        let mut rng = seeded(14);
        for _ in 0..5 {
            x = pgas_sweep(&m, &x, &KernelConfig::pgas(20), &mut rng).unwrap().0;
        }
        assert!(x.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn config_validation() {
        assert!(KernelConfig::pgas(0).validate().is_err());
        assert!(KernelConfig::pgas(1).with_mh(AncestorMh::ForcedMove { n_inner: 1 }).validate().is_err());
        assert!(KernelConfig::pgas(3).with_truncation(TruncationPolicy::Fixed(0)).validate().is_err());
        assert!("pgx".parse::<Flavor>().is_err());
        assert_eq!("PGAS".parse::<Flavor>().unwrap(), Flavor::Pgas);
    }

    #[test]
    fn wrong_reference_length_is_rejected() {
        let m = lgss(10, 15);
        assert!(pgas_sweep(&m, &[0.0; 9], &KernelConfig::pgas(3), &mut seeded(0)).is_err());
    }
}
