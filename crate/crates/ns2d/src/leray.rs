//! Discrete Leray projection onto solenoidal fields tangent to the wall.

use nalgebra::DMatrix;

use crate::grid::{MacField, SquareDomain};

/// `f - grad phi` with `D_h phi = div f` and `d phi / dn = f . n` on the
/// boundary: boundary-normal faces are set to zero, the cell Poisson problem
/// is solved with homogeneous Neumann data and the gradient is removed from
/// interior faces. The result is divergence-free to round-off.
pub fn leray_project(dom: &SquareDomain, f: &MacField) -> MacField {
    let n = dom.n;
    let h = dom.h;
    let mut out = f.clone();
    for j in 0..n {
        out.u[(j, 0)] = 0.0;
        out.u[(j, n)] = 0.0;
    }
    for i in 0..n {
        out.v[(0, i)] = 0.0;
        out.v[(n, i)] = 0.0;
    }
    let mut div = out.divergence(h);
    let mean = div.mean();
    div.add_scalar_mut(-mean);
    let phi = dom.poisson_cells(&div);
    subtract_gradient(&mut out, &phi, h);
    out
}

fn subtract_gradient(f: &mut MacField, phi: &DMatrix<f64>, h: f64) {
    let n = phi.nrows();
    for j in 0..n {
        for i in 1..n {
            f.u[(j, i)] -= (phi[(j, i)] - phi[(j, i - 1)]) / h;
        }
    }
    for j in 1..n {
        for i in 0..n {
            f.v[(j, i)] -= (phi[(j, i)] - phi[(j - 1, i)]) / h;
        }
    }
}

/// Discrete gradient of cell values on interior faces (zero normal faces).
pub fn cell_gradient(phi: &DMatrix<f64>, h: f64) -> MacField {
    let mut f = MacField::zeros(phi.nrows());
    subtract_gradient(&mut f, phi, h);
    f.scaled(-1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::node_grid;

    #[test]
    fn solenoidal_fields_are_fixed() {
        let d = SquareDomain::new(24).unwrap();
        let psi = node_grid(24, |x, y| (x * (1.0 - x) * y * (1.0 - y)).powi(2) * (3.0 * x + y).sin());
        let f = MacField::from_stream(&psi, d.h);
        let p = leray_project(&d, &f);
        assert!((&p.u - &f.u).amax() < 1e-11 && (&p.v - &f.v).amax() < 1e-11);
    }
}
