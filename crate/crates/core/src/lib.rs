//! Stochastic SIR/SEIR epidemics: exact simulation, hidden-Markov
//! observation models, particle filtering, and posterior inference by ABC
//! rejection and particle-marginal Metropolis-Hastings, with the usual
//! chain diagnostics.

pub mod diagnostics;
pub mod error;
pub mod gillespie;
pub mod inference;
pub mod io;
pub mod model;
pub mod observation;
pub mod rng;
pub mod smc;

pub use error::{Error, Result};
