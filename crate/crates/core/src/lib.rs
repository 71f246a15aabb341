//! Human-guided deep reinforcement learning on a lane-change micro-simulator.
//!
//! The numeric core ([`nn`], [`agents`]) is generic over the scalar type; the
//! aliases below fix it to `f64`, which is what the simulator, harness and
//! CLI use.

pub mod agents;
pub mod env;
pub mod error;
pub mod guidance;
pub mod harness;
pub mod imitation;
pub mod nn;
pub mod replay;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor = nn::Tensor<f64>;
pub type Network = nn::Network<f64>;
pub type Adam = nn::Adam<f64>;
