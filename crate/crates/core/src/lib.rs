//! Hierarchical equations of motion for a driven qubit in a bosonic reservoir.
//!
//! Units: ħ = 1 and the qubit frequency ω_q = 1.

pub mod baseline;
pub mod bath;
pub mod control;
pub mod error;
pub mod experiments;
pub mod hierarchy;
pub mod quad;
pub mod qubit;
pub mod scalar;

pub use error::{HeomError, Result};
pub use scalar::Real;

pub type Bloch = qubit::Bloch4<f64>;
pub type State = hierarchy::HierarchyState<f64>;
pub type Heom = hierarchy::Propagator<f64>;
