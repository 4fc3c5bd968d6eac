//! Bundled targets.

pub mod degenerate;
pub mod lgss;
pub mod sir;
pub mod sv;
pub mod synthetic;

pub use degenerate::{degenerate_collapse, random_stable_system, DegenerateCollapsed, DegenerateLgss};
pub use lgss::{lgss_model, lgss_simulate, Lgss, LgssParams};
pub use sir::{sir_collapsed_model, sir_simulate, sir_step, Compartments, SirModel, SirParams};
pub use sv::{sv_model, StochasticVolatility};
pub use synthetic::GeometricDecay;
