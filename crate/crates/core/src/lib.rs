//! Optical loading of a trapped Bose condensate by spontaneous emission in
//! the boson-accumulation regime.
//!
//! Units throughout: `ħ = 1`, energies in units of the trap quantum `ω`,
//! temperatures as `k_B T/ω`, times in `1/ω`.

pub mod basis;
pub mod coupling;
pub mod decay;
pub mod dynamics;
pub mod error;
pub mod frontend;
pub mod loading;
pub mod oracle;

pub use error::{Error, Result};
