pub mod cli;
pub mod error;
pub mod fock;
pub mod kraus;
pub mod phase_space;
mod repr;
pub mod verify;

pub use error::{Error, Result};
