//! Direct-collocation trajectory planning and motor co-design.

pub mod codesign;
pub mod collocation;
pub mod error;
pub mod planning;

pub use error::PlanError;
