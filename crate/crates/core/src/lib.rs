//! Compile a boolean function's truth table into a two-reflection quantum
//! query algorithm and check its spectral guarantees numerically.
//!
//! Pipeline: [`boolfn`] truth tables, [`advsdp`] dual adversary SDP,
//! [`graphrefl`] graph and reflections, [`spectral`] eigen-analysis and gap
//! checks, [`algsim`] exact algorithm simulation, [`report`] aggregation.

pub mod advsdp;
pub mod algsim;
pub mod boolfn;
pub mod config;
pub mod error;
pub mod graphrefl;
pub mod io;
pub mod report;
pub mod spectral;

pub use error::{Error, Result};
