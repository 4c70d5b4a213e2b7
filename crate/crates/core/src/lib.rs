//! Mean offered load, peak timing, lag and capacity flattening for
//! infinite-server queues fed by unimodal (Gaussian or Gamma) arrival rates.

pub mod arrival;
pub mod empirics;
pub mod error;
pub mod flatten;
pub mod format;
pub mod load;
pub mod optimize;
pub mod peak;
pub mod quadrature;
pub mod service;
pub mod sim;
pub mod special;
pub mod tables;

pub use arrival::{ArrivalModel, GammaRate, GaussianRate};
pub use error::{Error, Result};
pub use service::{ExcessLaw, ServiceModel};
