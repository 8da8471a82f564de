//! Quantum-optical theory of high-harmonic generation from correlated emitters.

pub mod atom;
pub mod bloch;
mod error;
pub mod io;
pub mod linalg;
pub mod modes;
mod par;
#[cfg(feature = "pipeline")]
pub mod pipeline;
pub mod propagation;
pub mod pulse;
pub mod spin;
pub mod stats;
pub mod svg;
pub mod twa;
pub mod units;

pub use error::{Error, Result};
