//! Open-boundary matrix product states.

pub mod bounds;
pub mod env;
pub mod io;
pub mod rdm;
pub mod state;

pub use rdm::{hs_distance2, hs_distance2_mps, hs_distance2_pure, ReducedDensity};
pub use state::{Mps, Sweep, DEFAULT_SVD_CUTOFF};
