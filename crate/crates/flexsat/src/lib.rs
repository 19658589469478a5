//! Simulation and verification toolkit for a gravity-gradient satellite
//! carrying a flexible boom.
//!
//! The model couples the rigid carrier (angular rate and attitude
//! quaternion) with an Euler-Bernoulli cantilever boom reduced to an
//! orthonormal modal basis. A boom-damping feedback torque renders the boom
//! energy nonincreasing; the crate ships the dynamics assemblies, a
//! fixed-step integrator with diagnostics, scenario and CSV I/O, and a
//! verification suite for the algebraic identities the design rests on.

pub mod beam;
pub mod cli;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod output;
pub mod quad;
pub mod scenario;
pub mod sim;
pub mod tol;
pub mod verify;

pub use error::{Error, Result};
