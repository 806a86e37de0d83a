//! Posterior samplers: ABC rejection and particle-marginal
//! Metropolis-Hastings with pilot tuning or adaptive covariance.

pub mod abc;
pub mod pilot;
pub mod pmmh;
pub mod prior;
pub mod proposal;
pub mod target;

pub use abc::{abc_rejection, AbcConfig, AbcResult};
pub use pilot::{pilot_tune, PilotBatch, PilotConfig, PilotResult};
pub use pmmh::{mh_acceptance, pmmh_chains, pmmh_run, Chain, ChainMeta, TuningRecord};
pub use prior::Prior;
pub use proposal::{default_h, Proposal, ProposalMode};
pub use target::{ParamLayout, ParamName, PmmhTarget};
