//! Simulation of entanglement generation in qubit registers through repeated
//! collisions with a shuttle qubit, together with the entanglement measures
//! used to analyse it.

pub mod collision;
pub mod densemath;
pub mod ensemble;
pub mod entanglement;
pub mod error;
pub mod measures;
pub mod qstate;
pub mod sdpsolver;

pub use error::{Error, Result};
