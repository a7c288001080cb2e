//! Boundary velocity data and their divergence-free extension to the square.

use ctrlmix_core::{Error, Result};
use nalgebra::DMatrix;

use crate::elliptic::{normal_derivative, solve_clamped_biharmonic, solve_dirichlet_laplace};
use crate::grid::{MacField, Side, SquareDomain, WallValues};

/// Largest admissible net flux `|oint v_n ds|`.
pub const FLUX_TOL: f64 = 1e-10;

/// Boundary velocity at one instant: normal component per boundary segment
/// (outward, at the segment midpoint) and tangential component per boundary
/// node (counter-clockwise tangent). Tangential values at corners are
/// unused.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub vn: Vec<f64>,
    pub vt: Vec<f64>,
}

impl BoundaryData {
    pub fn zero(dom: &SquareDomain) -> Self {
        let m = dom.boundary_len();
        Self {
            vn: vec![0.0; m],
            vt: vec![0.0; m],
        }
    }

    /// Samples `v_n` at segment midpoints and `v_tau` at nodes from
    /// functions of arclength.
    pub fn from_fns(dom: &SquareDomain, vn: impl Fn(f64) -> f64, vt: impl Fn(f64) -> f64) -> Self {
        let m = dom.boundary_len();
        Self {
            vn: (0..m).map(|k| vn((k as f64 + 0.5) * dom.h)).collect(),
            vt: (0..m).map(|k| vt(dom.node_s(k))).collect(),
        }
    }

    pub fn flux(&self, h: f64) -> f64 {
        self.vn.iter().sum::<f64>() * h
    }

    pub fn is_zero(&self) -> bool {
        self.vn.iter().chain(&self.vt).all(|x| *x == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            vn: self.vn.iter().map(|x| c * x).collect(),
            vt: self.vt.iter().map(|x| c * x).collect(),
        }
    }

    /// Tangential wall values as seen by the ghost faces of the grid.
    pub fn wall_values(&self, dom: &SquareDomain) -> WallValues {
        let n = dom.n;
        let mut w = WallValues::zero(n);
        for k in 0..dom.boundary_len() {
            if dom.is_corner(k) {
                continue;
            }
            let (i, j) = dom.boundary_node(k);
            let t = dom.side_of_segment(k).tangent();
            match dom.side_of_segment(k) {
                Side::Bottom => w.bottom[i] = t[0] * self.vt[k],
                Side::Top => w.top[i] = t[0] * self.vt[k],
                Side::Right => w.right[j] = t[1] * self.vt[k],
                Side::Left => w.left[j] = t[1] * self.vt[k],
            }
        }
        w
    }

    /// Discrete `H^1` norm along the boundary; stands in for the trace norm
    /// `|v|_{3/2}` in the Hopf estimate.
    pub fn h1_norm(&self, h: f64) -> f64 {
        let m = self.vt.len();
        let mut s = 0.0;
        for k in 0..m {
            s += h * (self.vn[k].powi(2) + self.vt[k].powi(2));
            let dt = self.vt[(k + 1) % m] - self.vt[k];
            let dn = self.vn[(k + 1) % m] - self.vn[k];
            s += (dt * dt + dn * dn) / h;
        }
        s.sqrt()
    }
}

/// `w` on boundary nodes with `dw/ds = -v_n`, normalised to zero mean.
pub fn tangential_antiderivative(dom: &SquareDomain, vn: &[f64]) -> Result<Vec<f64>> {
    let m = dom.boundary_len();
    if vn.len() != m {
        return Err(Error::InvalidInput("normal data has the wrong length".into()));
    }
    let flux = vn.iter().sum::<f64>() * dom.h;
    if flux.abs() > FLUX_TOL {
        return Err(Error::InvalidInput(format!("boundary data carry net flux {flux:e}")));
    }
    let mut w = Vec::with_capacity(m);
    let mut acc = 0.0;
    for v in vn {
        w.push(acc);
        acc -= dom.h * v;
    }
    let mean = w.iter().sum::<f64>() / m as f64;
    for x in &mut w {
        *x -= mean;
    }
    Ok(w)
}

/// Potentials of the extension: `E v = curl^perp (p + q)`.
#[derive(Debug, Clone)]
pub struct StreamData {
    /// Boundary antiderivative of `v_n`.
    pub w: Vec<f64>,
    /// Harmonic, `p = w` on the boundary.
    pub p: DMatrix<f64>,
    /// Clamped biharmonic, `q = 0`, `dq/dn = v_tau - dp/dn`.
    pub q: DMatrix<f64>,
    pub laplace_residual: f64,
    pub biharmonic_residual: f64,
}

impl StreamData {
    pub fn stream(&self) -> DMatrix<f64> {
        &self.p + &self.q
    }
}

pub fn stream_potentials(dom: &SquareDomain, data: &BoundaryData) -> Result<StreamData> {
    let w = tangential_antiderivative(dom, &data.vn)?;
    let (p, laplace_residual) = solve_dirichlet_laplace(dom, &w)?;
    let g: Vec<f64> = (0..dom.boundary_len())
        .map(|k| {
            if dom.is_corner(k) {
                0.0
            } else {
                data.vt[k] - normal_derivative(dom, &p, k)
            }
        })
        .collect();
    let bi = solve_clamped_biharmonic(dom, &g, None)?;
    Ok(StreamData {
        w,
        p,
        q: bi.q,
        laplace_residual,
        biharmonic_residual: bi.residual,
    })
}

/// Divergence-free field whose boundary trace reproduces `data` to `O(h)`.
pub fn extend_boundary_field(dom: &SquareDomain, data: &BoundaryData) -> Result<MacField> {
    if data.is_zero() {
        tangential_antiderivative(dom, &data.vn)?;
        return Ok(MacField::zeros(dom.n));
    }
    let s = stream_potentials(dom, data)?;
    Ok(MacField::from_stream(&s.stream(), dom.h))
}

/// Boundary restriction of a grid field: normal faces per segment and the
/// wall value of the tangential component per non-corner node (corners
/// report 0).
pub fn boundary_trace(dom: &SquareDomain, f: &MacField) -> BoundaryData {
    let n = dom.n;
    let m = dom.boundary_len();
    let mut vn = vec![0.0; m];
    let mut vt = vec![0.0; m];
    for k in 0..m {
        let side = dom.side_of_segment(k);
        let off = k % n;
        vn[k] = match side {
            Side::Bottom => -f.v[(0, off)],
            Side::Right => f.u[(off, n)],
            Side::Top => f.v[(n, n - 1 - off)],
            Side::Left => -f.u[(n - 1 - off, 0)],
        };
        if dom.is_corner(k) {
            continue;
        }
        let (i, j) = dom.boundary_node(k);
        // Linear extrapolation of the two nearest tangential faces (at h/2
        // and 3h/2) to the wall.
        let ex = |a: f64, b: f64| 1.5 * a - 0.5 * b;
        vt[k] = match side {
            Side::Bottom => ex(f.u[(0, i)], f.u[(1, i)]),
            Side::Right => ex(f.v[(j, n - 1)], f.v[(j, n - 2)]),
            Side::Top => -ex(f.u[(n - 1, i)], f.u[(n - 2, i)]),
            Side::Left => -ex(f.v[(j, 0)], f.v[(j, 1)]),
        };
    }
    BoundaryData { vn, vt }
}

/// Largest trace mismatch `max |R E v - v|` over segments and non-corner
/// nodes.
pub fn trace_error(dom: &SquareDomain, f: &MacField, data: &BoundaryData) -> f64 {
    let tr = boundary_trace(dom, f);
    let mut e: f64 = 0.0;
    for k in 0..dom.boundary_len() {
        e = e.max((tr.vn[k] - data.vn[k]).abs());
        if !dom.is_corner(k) {
            e = e.max((tr.vt[k] - data.vt[k]).abs());
        }
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn antiderivative_of_zero_and_flux_check() {
        let d = SquareDomain::new(16).unwrap();
        let w = tangential_antiderivative(&d, &vec![0.0; 64]).unwrap();
        assert!(w.iter().all(|x| *x == 0.0));
        assert!(tangential_antiderivative(&d, &vec![1.0; 64]).is_err());
    }

    #[test]
    fn antiderivative_of_a_sine_is_second_order() {
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let d = SquareDomain::new(n).unwrap();
            let vn: Vec<f64> = (0..4 * n)
                .map(|k| (2.0 * PI * (k as f64 + 0.5) * d.h / 4.0).sin())
                .collect();
            let w = tangential_antiderivative(&d, &vn).unwrap();
            let exact: Vec<f64> = (0..4 * n)
                .map(|k| 4.0 / (2.0 * PI) * (2.0 * PI * d.node_s(k) / 4.0).cos())
                .collect();
            let shift = (w.iter().sum::<f64>() - exact.iter().sum::<f64>()) / (4 * n) as f64;
            errs.push(
                w.iter()
                    .zip(&exact)
                    .map(|(a, b)| (a - b - shift).abs())
                    .fold(0.0, f64::max),
            );
        }
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
    }

    #[test]
    fn zero_data_extend_to_zero() {
        let d = SquareDomain::new(16).unwrap();
        let f = extend_boundary_field(&d, &BoundaryData::zero(&d)).unwrap();
        assert_eq!(f.max_abs(), 0.0);
    }
}
