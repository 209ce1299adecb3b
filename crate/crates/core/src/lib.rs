//! Superradiant lasing in a pair of tunneling-coupled lossy cavities.
//!
//! Parameters are cyclic frequencies in Hz ([`model::SystemParams`]); the
//! equations of motion run in rad/s with time in seconds.

pub mod clock;
pub mod collective;
pub mod cumulant;
pub mod field;
pub mod filtercav;
pub mod model;
pub mod ode;
pub mod oracle;
pub mod ptsym;
pub mod spectrum;
pub mod sweep;

pub use cumulant::{CumulantState, SteadyOptions, SteadyReport};
pub use model::{DerivedParams, SystemParams};
