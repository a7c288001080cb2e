//! Boundary noise: tangential modes on a window `Gamma` of the top edge
//! times a smooth temporal profile.

use std::f64::consts::PI;

use ctrlmix_core::stabiliser::ControlWindow;
use ctrlmix_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::extension::BoundaryData;
use crate::grid::{Side, SquareDomain};

/// `psi_j(xi) = sin(pi xi) sin(j pi xi)` for `xi` the relative position in
/// `Gamma = [x0, x1] x {1}`, times `beta(t)` from the control window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryNoise {
    pub modes: usize,
    pub x0: f64,
    pub x1: f64,
    pub window: ControlWindow,
}

impl Default for BoundaryNoise {
    fn default() -> Self {
        Self {
            modes: 4,
            x0: 0.2,
            x1: 0.8,
            window: ControlWindow::default(),
        }
    }
}

impl BoundaryNoise {
    pub fn validate(&self) -> Result<()> {
        self.window.validate()?;
        if self.modes == 0 {
            return Err(Error::Config("at least one noise mode is required".into()));
        }
        if !(0.0 < self.x0 && self.x0 < self.x1 && self.x1 < 1.0) {
            return Err(Error::Config(format!(
                "noise window must satisfy 0 < x0 < x1 < 1, got [{}, {}]",
                self.x0, self.x1
            )));
        }
        Ok(())
    }

    /// Spatial shape of mode `j` (1-based) at abscissa `x` of the top edge.
    pub fn shape(&self, j: usize, x: f64) -> f64 {
        let xi = (x - self.x0) / (self.x1 - self.x0);
        if !(0.0..=1.0).contains(&xi) {
            return 0.0;
        }
        (PI * xi).sin() * (j as f64 * PI * xi).sin()
    }

    /// `(beta(t), beta'(t))`.
    pub fn profile(&self, t: f64) -> (f64, f64) {
        self.window.profile(t)
    }

    /// Boundary data of mode `j` (1-based) at unit amplitude, `beta = 1`.
    pub fn mode_data(&self, dom: &SquareDomain, j: usize) -> BoundaryData {
        let mut d = BoundaryData::zero(dom);
        for k in 0..dom.boundary_len() {
            if dom.side_of_segment(k) == Side::Top && !dom.is_corner(k) {
                let (i, _) = dom.boundary_node(k);
                d.vt[k] = self.shape(j, i as f64 * dom.h);
            }
        }
        d
    }

    /// Boundary data for realised coefficients `a` at time `t`.
    pub fn data_at(&self, dom: &SquareDomain, a: &[f64], t: f64) -> BoundaryData {
        let beta = self.profile(t).0;
        let mut d = BoundaryData::zero(dom);
        for (j, aj) in a.iter().enumerate() {
            let m = self.mode_data(dom, j + 1);
            for (x, y) in d.vt.iter_mut().zip(&m.vt) {
                *x += beta * aj * y;
            }
        }
        d
    }

    pub fn trace(&self, dom: &SquareDomain, a: &[f64], times: &[f64]) -> BoundaryTrace {
        BoundaryTrace {
            times: times.to_vec(),
            data: times.iter().map(|&t| self.data_at(dom, a, t)).collect(),
        }
    }
}

/// Space-time boundary data sampled at a list of times.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub times: Vec<f64>,
    pub data: Vec<BoundaryData>,
}

impl BoundaryTrace {
    pub fn max_flux(&self, h: f64) -> f64 {
        self.data.iter().map(|d| d.flux(h).abs()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_vanish_off_gamma_and_at_rest_times() {
        let d = SquareDomain::new(32).unwrap();
        let b = BoundaryNoise::default();
        let tr = b.trace(&d, &[1.0, -0.5, 0.3, 0.2], &[0.0, 0.3, 0.8, 1.0]);
        assert!(tr.data[0].is_zero() && tr.data[2].is_zero() && tr.data[3].is_zero());
        assert!(!tr.data[1].is_zero());
        assert_eq!(tr.max_flux(d.h), 0.0);
        assert_eq!(b.shape(1, 0.1), 0.0);
        assert!(b.shape(2, b.x0).abs() < 1e-15 && b.shape(2, b.x1).abs() < 1e-15);
    }
}
