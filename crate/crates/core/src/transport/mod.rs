//! Distances and couplings between probability measures.

pub mod cost;
pub mod density;
pub mod dual_lipschitz;
pub mod grid;
pub mod maxflow;
pub mod maximal;
pub mod measure;
pub mod shift;
pub mod simplex;

pub use cost::{d_eps, optimal_plan, transport_cost};
pub use density::{Density, GridSampler, ProductDensity, Sampler, UniformBox};
pub use dual_lipschitz::{dual_lipschitz, dual_lipschitz_with, BlRoute, MAX_ATOMS};
pub use grid::{tv_distance_grid, DensityGrid, GridSpec};
pub use maximal::{maximal_coupling_densities, CoupledDraw};
pub use measure::{CouplingPlan, DiscreteMeasure};
pub use shift::{
    cost_tv_inequality_check, pushforward_density, verify_shift_tv_bound, CostTvReport, Pushforward, ShiftMap,
    ShiftTvReport,
};
