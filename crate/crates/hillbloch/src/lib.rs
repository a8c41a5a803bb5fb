//! Bloch spectra and eigenfunction expansions for non-self-adjoint Hill
//! operators with complex periodic potentials.

pub mod bloch;
pub mod cli;
pub mod config;
pub mod discriminant;
pub mod error;
pub mod expansion;
pub mod monodromy;
pub mod ode;
pub mod potential;
pub mod quad;
pub mod report;
pub mod rootfind;
pub mod singularity;

pub use error::{Error, Result};
