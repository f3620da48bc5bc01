//! Parameter transforms, MAP optimization, MCMC sampling and diagnostics
//! over an arbitrary log-posterior on a bounded parameter space.
//!
//! MAP reports the constrained-space posterior value (no Jacobian term) so
//! values compare across parameterizations; sampling targets the posterior
//! plus the log-Jacobian of the unconstraining transform.

pub mod diagnostics;
pub mod map;
pub mod mcmc;
pub mod transform;

pub use diagnostics::{effective_sample_size, split_rhat};
pub use map::{map_fit, MapResult};
pub use mcmc::{mcmc_sample, PosteriorDraws};
pub use transform::{Bound, ParamDef, ParamSpec};
