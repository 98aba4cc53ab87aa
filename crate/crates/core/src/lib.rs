//! Two-phase exploration toolkit for a stochastic spatial predator-prey model.

pub mod analysis;
pub mod cart;
pub mod error;
pub mod forest;
pub mod io;
pub mod runner;
pub mod screening;
pub mod sim;
pub mod space;
pub mod stats;
pub mod surrogate;

pub use error::{Error, Result};
