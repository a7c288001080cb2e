//! Coupled pairs of trajectories and the verifiers built on them.

mod control;
mod mixing;
mod pair;
mod verify;

pub use control::{approx_controllability_probe, ControlBox, ControlRoute, ControllabilityReport};
pub use mixing::{mixing_rate, LagRow, MixMode, MixingConfig, MixingReport, Observable};
pub use pair::{CouplingConfig, PairBuilder, PairDraw, PairMode, Regime};
pub use verify::{
    contraction_probability, hitting_time_stats, hitting_times, independence_on_tm_test, squeezing_from_sigmas,
    squeezing_stats, ContractionReport, ContractionRow, HittingReport, SqueezingReport,
};
