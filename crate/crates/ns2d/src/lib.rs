//! Two-dimensional incompressible Navier–Stokes on the unit square with a
//! random tangential velocity imposed on part of the boundary.
//!
//! The velocity is split as `u = zeta + v`: `zeta` lifts the boundary data
//! into the interior as a divergence-free field, `v` vanishes on the wall
//! and is advanced by a projection method on a MAC grid. The time-one map
//! `u(0) -> u(1)` is exposed as a [`ctrlmix_core::SystemMap`].

pub mod elliptic;
pub mod extension;
pub mod feedback;
pub mod grid;
pub mod hopf;
pub mod io;
pub mod leray;
pub mod noise;
pub mod probe;
pub mod solver;
pub mod system;

pub use extension::{extend_boundary_field, tangential_antiderivative, BoundaryData};
pub use grid::{MacField, SquareDomain};
pub use noise::{BoundaryNoise, BoundaryTrace};
pub use solver::{NsParams, NsSolver};
pub use system::NsSystem;
