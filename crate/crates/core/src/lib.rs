//! Finite-element solver for the time-dependent Stokes–Darcy problem in diffuse-interface
//! (phase-field) form, with a sharp-interface reference solver and convergence sweeps.

pub mod analysis;
pub mod config;
pub mod driver;
pub mod error;
pub mod fem;
pub mod forms;
pub mod levelset;
pub mod mesh;
pub mod output;
pub mod model;
pub mod phasefield;
pub mod problem;
pub mod sharp;
pub mod sparse;
pub mod stepper;

pub use error::{Error, Result};
