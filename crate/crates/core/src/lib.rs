//! Differentiable dynamics of a planar-base mobile manipulator with geared SPMSM joint motors.

pub mod autodiff;
pub mod config;
pub mod dual;
pub mod dynamics;
pub mod error;
pub mod motor;
pub mod robot;
pub mod scalar;
pub mod spatial;

pub use error::CoreError;
pub use scalar::Scalar;
