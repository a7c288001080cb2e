//! Harmonic and clamped-biharmonic potentials on nodes.

use ctrlmix_core::{Error, Result};
use nalgebra::DMatrix;

use crate::grid::SquareDomain;

pub const LAPLACE_TOL: f64 = 1e-9;
pub const BIHARMONIC_TOL: f64 = 1e-8;
const PCG_MAX_ITER: usize = 200;

/// Node grid with `p = g` on boundary node `k` and `D_h p = 0` inside.
/// Returns the grid and the scaled residual `max |h^2 D_h p| / max(1, |g|)`.
pub fn solve_dirichlet_laplace(dom: &SquareDomain, g: &[f64]) -> Result<(DMatrix<f64>, f64)> {
    let n = dom.n;
    if g.len() != dom.boundary_len() {
        return Err(Error::InvalidInput(format!(
            "boundary data has {} values, expected {}",
            g.len(),
            dom.boundary_len()
        )));
    }
    let mut p = DMatrix::zeros(n + 1, n + 1);
    for (k, gk) in g.iter().enumerate() {
        let (i, j) = dom.boundary_node(k);
        p[(j, i)] = *gk;
    }
    let h2 = dom.h * dom.h;
    // Move the boundary contributions to the right-hand side.
    let rhs = DMatrix::from_fn(n - 1, n - 1, |jj, ii| {
        let (i, j) = (ii + 1, jj + 1);
        let mut s = 0.0;
        if i == 1 {
            s += p[(j, 0)];
        }
        if i == n - 1 {
            s += p[(j, n)];
        }
        if j == 1 {
            s += p[(0, i)];
        }
        if j == n - 1 {
            s += p[(n, i)];
        }
        -s / h2
    });
    let x = dom.poisson_nodes(&rhs);
    for jj in 0..n - 1 {
        for ii in 0..n - 1 {
            p[(jj + 1, ii + 1)] = x[(jj, ii)];
        }
    }
    let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let res = node_laplacian(&p).amax() * h2 / scale;
    if !(res <= LAPLACE_TOL) {
        return Err(Error::NoConvergence(format!("Laplace residual {res:e}")));
    }
    Ok((p, res))
}

/// `D_h p` at interior nodes, `(n-1) x (n-1)`, unscaled (times `h^2`).
fn node_laplacian(p: &DMatrix<f64>) -> DMatrix<f64> {
    let n = p.nrows() - 1;
    DMatrix::from_fn(n - 1, n - 1, |jj, ii| {
        let (i, j) = (ii + 1, jj + 1);
        p[(j, i + 1)] + p[(j, i - 1)] + p[(j + 1, i)] + p[(j - 1, i)] - 4.0 * p[(j, i)]
    })
}

/// Outward normal derivative at a non-corner boundary node, one-sided and
/// second order.
pub fn normal_derivative(dom: &SquareDomain, p: &DMatrix<f64>, k: usize) -> f64 {
    let (i0, j0) = dom.boundary_node(k);
    let (i1, j1) = dom.inward(k, 1);
    let (i2, j2) = dom.inward(k, 2);
    (3.0 * p[(j0, i0)] - 4.0 * p[(j1, i1)] + p[(j2, i2)]) / (2.0 * dom.h)
}

#[derive(Debug, Clone)]
pub struct BiharmonicSolution {
    pub q: DMatrix<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Clamped plate: `D_h^2 q = f` inside, `q = 0` and `dq/dn = g` on the
/// boundary (`g` per boundary node; corners ignored).
///
/// The Neumann condition enters through ghost nodes `q_ghost = q_in + 2 h g`,
/// which turns the problem into `(L^2 + 2/h^4 B) q = f - 2/h^3 G` for the
/// Dirichlet Laplacian `L` and the boundary-adjacency counts `B`. It is
/// solved by conjugate gradients preconditioned with `L^-2`.
pub fn solve_clamped_biharmonic(
    dom: &SquareDomain,
    g: &[f64],
    source: Option<&DMatrix<f64>>,
) -> Result<BiharmonicSolution> {
    let n = dom.n;
    let m = n - 1;
    let h = dom.h;
    if g.len() != dom.boundary_len() {
        return Err(Error::InvalidInput("Neumann data has the wrong length".into()));
    }
    let mut rhs = match source {
        Some(f) if f.nrows() == m && f.ncols() == m => f.clone(),
        Some(_) => return Err(Error::InvalidInput("biharmonic source must be (n-1)x(n-1)".into())),
        None => DMatrix::zeros(m, m),
    };
    let mut adj = DMatrix::<f64>::zeros(m, m);
    for k in 0..dom.boundary_len() {
        if dom.is_corner(k) {
            continue;
        }
        let (i, j) = dom.inward(k, 1);
        rhs[(j - 1, i - 1)] -= 2.0 * g[k] / (h * h * h);
        adj[(j - 1, i - 1)] += 2.0 / (h * h * h * h);
    }
    let apply = |x: &DMatrix<f64>| -> DMatrix<f64> {
        let l = dirichlet_apply(x, h);
        dirichlet_apply(&l, h) + adj.component_mul(x)
    };
    let precond = |r: &DMatrix<f64>| -> DMatrix<f64> { dom.poisson_nodes(&dom.poisson_nodes(r)) };

    let bnorm = rhs.norm();
    let mut q = DMatrix::zeros(m, m);
    let mut iterations = 0;
    let mut residual = 0.0;
    if bnorm > 0.0 {
        let mut r = rhs.clone();
        let mut z = precond(&r);
        let mut d = z.clone();
        let mut rz = r.dot(&z);
        while iterations < PCG_MAX_ITER {
            iterations += 1;
            let ad = apply(&d);
            let alpha = rz / d.dot(&ad);
            q += &d * alpha;
            r -= &ad * alpha;
            // Iterate to round-off so the solve is linear in the data to
            // machine precision.
            if r.norm() / bnorm < 1e-15 {
                break;
            }
            z = precond(&r);
            let rz2 = r.dot(&z);
            d = &z + &d * (rz2 / rz);
            rz = rz2;
        }
        // True residual, guarding against drift in the recurrence.
        residual = (&rhs - apply(&q)).norm() / bnorm;
        if !(residual <= BIHARMONIC_TOL) {
            return Err(Error::NoConvergence(format!(
                "biharmonic residual {residual:e} after {iterations} iterations"
            )));
        }
    }
    let mut full = DMatrix::zeros(n + 1, n + 1);
    full.view_mut((1, 1), (m, m)).copy_from(&q);
    Ok(BiharmonicSolution {
        q: full,
        residual,
        iterations,
    })
}

fn dirichlet_apply(x: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let m = x.nrows();
    let h2 = h * h;
    DMatrix::from_fn(m, m, |j, i| {
        let at = |jj: isize, ii: isize| {
            if jj < 0 || ii < 0 || jj >= m as isize || ii >= m as isize {
                0.0
            } else {
                x[(jj as usize, ii as usize)]
            }
        };
        let (j, i) = (j as isize, i as isize);
        (at(j + 1, i) + at(j - 1, i) + at(j, i + 1) + at(j, i - 1) - 4.0 * at(j, i)) / h2
    })
}
