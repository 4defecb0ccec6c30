//! Steady states of multistable Lindblad master equations, predicted
//! directly from the initial state.

pub mod algebra;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod lindblad;
pub mod metrology;
pub mod models;
pub mod scenarios;
pub mod spins;
pub mod state;
pub mod steady;

pub use error::{Error, Result};
