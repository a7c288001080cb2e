//! The time-one resolving map `u(0) -> u(1)` as a random dynamical system.

use std::sync::Arc;

use ctrlmix_core::coupling::Observable;
use ctrlmix_core::{Norm, Result, SystemMap};

use crate::grid::{MacField, SquareDomain};
use crate::noise::BoundaryNoise;
use crate::solver::{low_modes, NsParams, NsSolver, Run, RunOptions};

/// Full path and endpoint of one unit interval.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub run: Run,
    pub end: Vec<f64>,
}

/// `S(u, eta)`: states are the interior MAC faces of `u` at integer times,
/// where the lift vanishes and `u = v`.
#[derive(Debug, Clone)]
pub struct NsSystem {
    pub solver: Arc<NsSolver>,
    norm: Norm,
    radius: f64,
}

impl NsSystem {
    /// `radius` bounds the phase set in the discrete `L^2` norm.
    pub fn new(params: NsParams, noise: BoundaryNoise, radius: f64) -> Result<Self> {
        let solver = NsSolver::new(params, noise)?;
        let h = solver.dom.h;
        Ok(Self {
            solver: Arc::new(solver),
            norm: Norm::DiscreteL2 { weight: h * h },
            radius,
        })
    }

    pub fn dom(&self) -> &SquareDomain {
        &self.solver.dom
    }

    pub fn field(&self, u: &[f64]) -> Result<MacField> {
        MacField::from_interior(self.dom().n, u)
    }

    /// Solves on `[0, 1]` and returns the whole run.
    pub fn resolve(&self, u: &[f64], a: &[f64], opts: &RunOptions) -> Result<Resolved> {
        let run = self.solver.run(&self.field(u)?, a, opts)?;
        let end = run.end.interior();
        Ok(Resolved { run, end })
    }

    /// `|u|_1`: discrete `H^1_0` seminorm.
    pub fn h1_norm(&self, u: &[f64]) -> Result<f64> {
        Ok(self.field(u)?.h1_sq(self.dom().h).sqrt())
    }

    /// Energies at `t = 1/4, 1/2, 3/4, 1` from the path, then the four
    /// lowest stream-function modes of the endpoint. Always 8 entries.
    pub fn observable(&self) -> Box<Observable> {
        let dom = self.dom().clone();
        Box::new(move |u: &[f64], path: &[f64]| {
            let Ok(f) = MacField::from_interior(dom.n, u) else {
                return vec![f64::NAN; 8];
            };
            // Initial states carry no path; their energy stands in for it.
            let mut out = if path.is_empty() {
                vec![f.l2_sq(dom.h); 4]
            } else {
                path.to_vec()
            };
            out.extend(low_modes(&dom, &f));
            out
        })
    }
}

impl SystemMap for NsSystem {
    fn state_dim(&self) -> usize {
        self.solver.state_dim()
    }

    fn noise_dim(&self) -> usize {
        self.solver.noise.modes
    }

    fn norm(&self) -> &Norm {
        &self.norm
    }

    fn phase_radius(&self) -> f64 {
        self.radius
    }

    fn step(&self, u: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        Ok(self.resolve(u, a, &RunOptions::default())?.end)
    }

    fn step_with_path(&self, u: &[f64], a: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let r = self.resolve(u, a, &RunOptions::default())?;
        Ok((r.end, r.run.quarter_energies))
    }
}
