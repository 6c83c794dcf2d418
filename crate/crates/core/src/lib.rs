//! Compton form factor extraction from unpolarized DVCS cross sections with
//! classical and simulated-quantum regressors.

pub mod data;
pub mod error;
pub mod globalfit;
pub mod io;
pub mod metrics;
pub mod models;
pub mod optim;
pub mod physics;
pub mod pseudodata;
pub mod qsim;
pub mod seeds;
pub mod training;

pub use error::{Error, Result};
