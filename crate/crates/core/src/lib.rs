//! Particle MCMC with ancestor sampling.
//!
//! The crate provides a generic sequential-target abstraction ([`Model`]),
//! the standard SMC sampler, conditional SMC kernels (PG, PGAS, PGBS),
//! truncated and adaptive ancestor weights for non-Markovian models, Gibbs
//! and SAEM learning drivers, a set of bundled models and exact oracles.
//!
//! Per-particle work inside a sweep and independent chains run on rayon
//! when the `parallel` feature is on (the default). Random draws are always
//! made in a fixed sequential order, so results do not depend on the feature
//! or the thread count.

pub mod backward;
pub mod diagnostics;
pub mod error;
pub mod gauss;
pub mod kernel;
pub mod learning;
pub mod model;
pub mod models;
pub mod nonmarkov;
pub mod oracles;
pub mod par;
pub mod rng;
pub mod smc;
pub mod weights;

pub use backward::{backward_simulate, ffbsi_smooth, pgbs_sweep};
pub use error::{Error, Result};
pub use kernel::{apply_kernel, conditional_sweep, initial_trajectory, pg_sweep, pgas_sweep, Flavor, KernelConfig, SweepDiagnostics};
pub use model::{MarkovOrder, Model, StateValue, Trajectory};
pub use nonmarkov::{AncestorMh, TruncationPolicy};
pub use smc::{extract_path, smc_sweep, ParticleSystem};
