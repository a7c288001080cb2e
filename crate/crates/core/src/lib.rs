//! Random dynamical systems driven by decomposable bounded noise, coupling
//! constructions between pairs of trajectories, and dual-Lipschitz mixing
//! diagnostics.

pub mod coupling;
pub mod error;
pub mod io;
pub mod noise;
pub mod par;
pub mod rds;
pub mod rng;
pub mod stabiliser;
pub mod state;
pub mod stats;
pub mod toybench;
pub mod transport;

pub use error::{Error, Result};
pub use noise::{ModeDensity, NoiseModel, NoiseVector};
pub use par::Exec;
pub use rds::SystemMap;
pub use rng::RngState;
pub use state::{Norm, StateVector};
