//! Parameter learning around the PGAS kernel: Bayesian Gibbs sampling and
//! particle stochastic-approximation EM.

pub mod lgss;
pub mod mh;
pub mod saem;
pub mod sir;

use rand::Rng;

use crate::diagnostics::ChainRecord;
use crate::error::Result;
use crate::kernel::{apply_kernel, initial_trajectory, KernelConfig};
use crate::model::{trajectory_coords, Model, Trajectory};

pub use lgss::{lgss_conjugate_posterior, lgss_em, LgssParameterModel, LgssPrior};
pub use mh::{rw_mh_step, MhStep};
pub use saem::{psaem_run, saem_update, SaemModel, SaemState, SaemTrace, StepSchedule};
pub use sir::{SirParameterModel, SirPrior};

/// Accept/propose counts of an MH-within-Gibbs parameter update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Acceptance {
    pub accepted: usize,
    pub proposed: usize,
}

/// Family of targets indexed by a parameter, with its parameter conditional.
pub trait ParameterModel: Sync {
    type Params: Clone + Send + Sync;
    type Target: Model;

    /// The latent-variable target at `theta`.
    fn build(&self, theta: &Self::Params) -> Result<Self::Target>;

    /// Draws from (or leaves invariant) `p(θ | x_{1:T}, y_{1:T})`.
    fn sample_posterior<R: Rng + ?Sized>(
        &self,
        theta: &Self::Params,
        x: &[<Self::Target as Model>::State],
        rng: &mut R,
    ) -> Result<(Self::Params, Acceptance)>;

    fn param_names(&self) -> Vec<String>;

    fn to_vec(&self, theta: &Self::Params) -> Vec<f64>;
}

/// Point-mass prior: the model never changes.
#[derive(Debug, Clone)]
pub struct FixedParams<M>(pub M);

impl<M: Model + Clone> ParameterModel for FixedParams<M> {
    type Params = ();
    type Target = M;

    fn build(&self, _: &()) -> Result<M> {
        Ok(self.0.clone())
    }

    fn sample_posterior<R: Rng + ?Sized>(&self, _: &(), _: &[M::State], _: &mut R) -> Result<((), Acceptance)> {
        Ok(((), Acceptance::default()))
    }

    fn param_names(&self) -> Vec<String> {
        Vec::new()
    }

    fn to_vec(&self, _: &()) -> Vec<f64> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GibbsOptions {
    pub iterations: usize,
    pub burnin: usize,
    /// Keep every trajectory in the record.
    pub record_states: bool,
}

impl GibbsOptions {
    pub fn new(iterations: usize, burnin: usize) -> Self {
        Self {
            iterations,
            burnin,
            record_states: true,
        }
    }
}

/// Alternates a kernel draw of `x_{1:T}` at the current `θ` with a draw of
/// `θ` given `x_{1:T}`. Iteration `n` of the record holds `(θ[n], x[n])`.
pub fn gibbs_run<P, R>(
    pm: &P,
    cfg: &KernelConfig,
    opts: GibbsOptions,
    theta0: P::Params,
    x0: Option<Trajectory<<P::Target as Model>::State>>,
    rng: &mut R,
) -> Result<ChainRecord>
where
    P: ParameterModel,
    R: Rng + ?Sized,
{
    if opts.iterations <= opts.burnin {
        return Err(crate::Error::Config(format!(
            "iterations ({}) must exceed burn-in ({})",
            opts.iterations, opts.burnin
        )));
    }
    cfg.validate()?;
    let mut theta = theta0;
    let mut x = match x0 {
        Some(x) => x,
        None => initial_trajectory(&pm.build(&theta)?, cfg.n.max(2), rng).map_err(|e| e.at_iteration(0))?,
    };
    let mut rec = ChainRecord {
        param_names: pm.param_names(),
        burnin: opts.burnin,
        ..Default::default()
    };
    for n in 0..opts.iterations {
        let step = |x: &Trajectory<_>, theta: &P::Params, rng: &mut R| -> Result<_> {
            let model = pm.build(theta)?;
            let (x_new, diag) = apply_kernel(&model, x, cfg, rng)?;
            let (theta_new, acc) = pm.sample_posterior(theta, &x_new, rng)?;
            Ok((x_new, diag, theta_new, acc))
        };
        let (x_new, diag, theta_new, acc) = step(&x, &theta, rng).map_err(|e| e.at_iteration(n))?;
        x = x_new;
        theta = theta_new;
        rec.params.push(pm.to_vec(&theta));
        if opts.record_states {
            rec.states.push(trajectory_coords(&x));
        }
        rec.levels.push(diag.mean_level());
        rec.ancestor_switches.push(diag.ancestor_switches());
        rec.mh_accepted += diag.mh_accepted;
        rec.mh_proposed += diag.mh_proposed;
        rec.param_accepted += acc.accepted;
        rec.param_proposed += acc.proposed;
    }
    Ok(rec)
}
