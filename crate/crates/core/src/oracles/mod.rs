//! Ground truth for testing the samplers: Kalman smoothing, exact kernel
//! enumeration on tiny discrete models and an exact Gibbs sampler.

pub mod enumerate;
pub mod ideal_gibbs;
pub mod kalman;
pub mod toy;

pub use enumerate::{enumerate_kernel, fit_geometric_rate, max_entry_diff, ExactKernel, Neumaier};
pub use ideal_gibbs::ideal_gibbs_lgss;
pub use kalman::{kalman_filter, kalman_smoother, LinearGaussianSystem, ScalarLgss};
pub use toy::DiscreteToyModel;
