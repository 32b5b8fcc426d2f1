//! Matrix normal mixture regression for car-following trajectories.
//!
//! Windows of a follower/leader trajectory are `D×τ` matrices. A mixture of
//! matrix normal distributions is fitted to them with penalized EM, and
//! conditioning each component on the observed past columns gives a
//! Gaussian mixture over the follower's future accelerations.

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod gaussian;
pub mod linalg;
pub mod matnorm;
pub mod mnmm;
pub mod mnmr;
pub mod pipeline;

pub use error::{Error, Result};
