//! Dense tableau simplex for `max c.x  s.t.  A x <= b, x >= 0` with `b >= 0`.
//! Bland's rule keeps degenerate problems from cycling.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub objective: f64,
    pub x: Vec<f64>,
}

pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution> {
    let m = a.len();
    let n = c.len();
    if b.len() != m || a.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidInput("inconsistent LP dimensions".into()));
    }
    if b.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidInput("origin must be feasible (b >= 0)".into()));
    }
    let w = n + m + 1;
    let mut t = vec![0.0; (m + 1) * w];
    for i in 0..m {
        t[i * w..i * w + n].copy_from_slice(&a[i]);
        t[i * w + n + i] = 1.0;
        t[i * w + w - 1] = b[i];
    }
    for j in 0..n {
        t[m * w + j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    const TOL: f64 = 1e-12;
    const PIV_TOL: f64 = 1e-9;
    let max_iter = 100 * (n + m) + 1000;
    for _ in 0..max_iter {
        let Some(enter) = (0..n + m).find(|&j| t[m * w + j] < -TOL) else {
            let mut x = vec![0.0; n];
            for (i, &bv) in basis.iter().enumerate() {
                if bv < n {
                    x[bv] = t[i * w + w - 1];
                }
            }
            return Ok(LpSolution {
                objective: t[m * w + w - 1],
                x,
            });
        };
        // Minimum ratio over pivots that are safely nonzero, ties broken by
        // the smallest basic index.
        let ratios: Vec<(usize, f64)> = (0..m)
            .filter(|&i| t[i * w + enter] > PIV_TOL)
            .map(|i| (i, t[i * w + w - 1].max(0.0) / t[i * w + enter]))
            .collect();
        let best = ratios.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        let Some(r) = ratios
            .iter()
            .filter(|(_, q)| *q <= best + TOL * (1.0 + best.abs()))
            .map(|(i, _)| *i)
            .min_by_key(|&i| basis[i])
        else {
            return Err(Error::NoConvergence("LP is unbounded".into()));
        };
        let piv = t[r * w + enter];
        for k in 0..w {
            t[r * w + k] /= piv;
        }
        for i in 0..=m {
            if i != r {
                let f = t[i * w + enter];
                if f != 0.0 {
                    for k in 0..w {
                        t[i * w + k] -= f * t[r * w + k];
                    }
                }
            }
        }
        for i in 0..m {
            let v = &mut t[i * w + w - 1];
            if *v < 0.0 && *v > -1e-10 {
                *v = 0.0;
            }
        }
        basis[r] = enter;
    }
    Err(Error::NoConvergence("simplex iteration cap reached".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_lp() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6)
        let s = maximize(
            &[3.0, 5.0],
            &[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]],
            &[4.0, 12.0, 18.0],
        )
        .unwrap();
        assert!((s.objective - 36.0).abs() < 1e-12);
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 6.0).abs() < 1e-12);
    }
}
