//! Small systems with known behaviour and slow, simple oracles.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::ModeDensity;
use crate::rds::SystemMap;
use crate::stabiliser::{toy_affine_stabiliser, LinearFeedback, Precompose};
use crate::state::Norm;
use crate::transport::{DensityGrid, DiscreteMeasure, GridSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ToySystem {
    /// `S(u, a) = c u + a` on `R^dim`, noise bounded by `noise_bound` per
    /// coordinate.
    ContractingAffine { c: f64, dim: usize, noise_bound: f64 },
    /// `S(u, a) = (growth tanh u_1 + a, damping u_2)`: an unstable direction
    /// that only the noise reaches.
    UnstableControlled {
        growth: f64,
        damping: f64,
        noise_bound: f64,
    },
}

impl ToySystem {
    pub fn halving() -> Self {
        ToySystem::ContractingAffine {
            c: 0.5,
            dim: 1,
            noise_bound: 1.0,
        }
    }

    pub fn unstable() -> Self {
        ToySystem::UnstableControlled {
            growth: 1.2,
            damping: 0.3,
            noise_bound: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ToySystem::ContractingAffine { c, dim, .. } => {
                if !(c.abs() < 1.0) || dim == 0 {
                    return Err(Error::Config(format!("contracting-affine needs |c| < 1, got {c}")));
                }
            }
            ToySystem::UnstableControlled { growth, damping, .. } => {
                if !(growth > 1.0) || !(damping.abs() < 1.0) {
                    return Err(Error::Config(
                        "unstable-controlled needs growth > 1 and |damping| < 1".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Half-widths of the box `X`.
    pub fn phase_box(&self) -> Vec<f64> {
        match *self {
            ToySystem::ContractingAffine { c, dim, noise_bound } => vec![noise_bound / (1.0 - c.abs()); dim],
            ToySystem::UnstableControlled {
                growth, noise_bound, ..
            } => {
                // growth * tanh(R) + b <= R at R = growth + b
                vec![growth + noise_bound, 1.0]
            }
        }
    }

    /// The exact feedback for the unstable system (target `q`).
    pub fn stabiliser(&self, q: f64) -> Result<LinearFeedback> {
        match *self {
            ToySystem::UnstableControlled { growth, damping, .. } => {
                let a = DMatrix::from_diagonal(&DVector::from_vec(vec![growth, damping]));
                let b = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
                Ok(toy_affine_stabiliser(&a, &b, q)?.with_sigma(Precompose::Tanh { coords: vec![0] }))
            }
            ToySystem::ContractingAffine { c, dim, .. } => {
                let a = DMatrix::from_diagonal(&DVector::from_element(dim, c));
                let b = DMatrix::identity(dim, dim);
                toy_affine_stabiliser(&a, &b, q)
            }
        }
    }
}

static EUCLID: Norm = Norm::Euclidean;

impl SystemMap for ToySystem {
    fn state_dim(&self) -> usize {
        match *self {
            ToySystem::ContractingAffine { dim, .. } => dim,
            ToySystem::UnstableControlled { .. } => 2,
        }
    }

    fn noise_dim(&self) -> usize {
        match *self {
            ToySystem::ContractingAffine { dim, .. } => dim,
            ToySystem::UnstableControlled { .. } => 1,
        }
    }

    fn norm(&self) -> &Norm {
        &EUCLID
    }

    fn phase_radius(&self) -> f64 {
        self.phase_box().iter().map(|r| r * r).sum::<f64>().sqrt()
    }

    fn contains(&self, u: &[f64]) -> bool {
        u.iter()
            .zip(self.phase_box())
            .all(|(x, r)| x.abs() <= r * (1.0 + 1e-12))
    }

    fn sample_phase(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        Some(
            self.phase_box()
                .iter()
                .map(|r| r * (2.0 * rng.random::<f64>() - 1.0))
                .collect(),
        )
    }

    fn step(&self, u: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        Ok(match *self {
            ToySystem::ContractingAffine { c, .. } => u.iter().zip(a).map(|(x, e)| c * x + e).collect(),
            ToySystem::UnstableControlled { growth, damping, .. } => {
                vec![growth * u[0].tanh() + a[0], damping * u[1]]
            }
        })
    }
}

/// Density of `sum_{j < k_terms} c^j eta_j` with `eta = b xi`, `xi ~ density`,
/// by repeated grid convolution. Returns the grid and the truncation bound
/// `|c|^k_terms diam / (1 - |c|)`.
pub fn exact_stationary_density_1d(
    c: f64,
    density: &ModeDensity,
    b: f64,
    k_terms: usize,
    cells: usize,
) -> Result<(DensityGrid, f64)> {
    if !(c.abs() < 1.0) {
        return Err(Error::InvalidInput("need |c| < 1".into()));
    }
    if b == 0.0 {
        // point mass at the origin
        let spec = GridSpec::new(vec![-0.5e-3], vec![0.5e-3], vec![1])?;
        return Ok((DensityGrid::new(spec, vec![1e3])?, 0.0));
    }
    let k_terms = k_terms.max(1);
    let reach: f64 = b * (0..k_terms).map(|j| c.abs().powi(j as i32)).sum::<f64>();
    let h = 2.0 * reach / cells as f64;
    // Centres sit on multiples of h, matching the lattice of the noise kernel.
    let m = (reach / h).ceil() as usize + 1;
    let n = 2 * m + 1;
    let lo = -(m as f64 + 0.5) * h;
    let centre = |i: usize| lo + (i as f64 + 0.5) * h;
    // Cell averages of the noise density on the same spacing.
    let half = (b / h).ceil() as isize + 1;
    let noise: Vec<f64> = (-half..=half)
        .map(|k| {
            let x0 = k as f64 * h;
            (0..16)
                .map(|s| density.pdf((x0 + (s as f64 + 0.5) / 16.0 * h - 0.5 * h) / b) / b)
                .sum::<f64>()
                / 16.0
        })
        .collect();
    let interp = |p: &[f64], x: f64| -> f64 {
        let t = (x - lo) / h - 0.5;
        if t < 0.0 || t > (n - 1) as f64 {
            return 0.0;
        }
        let i = (t.floor() as usize).min(n - 2);
        let w = t - i as f64;
        p[i] * (1.0 - w) + p[i + 1] * w
    };
    let conv_noise = |q: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let mut s = 0.0;
                for (k, nv) in noise.iter().enumerate() {
                    let off = k as isize - half;
                    let j = i as isize - off;
                    if j >= 0 && (j as usize) < n {
                        s += nv * q[j as usize];
                    }
                }
                s * h
            })
            .collect()
    };
    // eta alone
    let mut p: Vec<f64> = (0..n)
        .map(|i| {
            let x = centre(i);
            let k = (x / h).round() as isize;
            if k.abs() <= half {
                noise[(k + half) as usize]
            } else {
                0.0
            }
        })
        .collect();
    for _ in 1..k_terms {
        if c == 0.0 {
            break;
        }
        let scaled: Vec<f64> = (0..n).map(|i| interp(&p, centre(i) / c) / c.abs()).collect();
        p = conv_noise(&scaled);
    }
    let mass: f64 = p.iter().sum::<f64>() * h;
    p.iter_mut().for_each(|v| *v /= mass);
    let spec = GridSpec::new(vec![lo], vec![lo + n as f64 * h], vec![n])?;
    let bound = c.abs().powi(k_terms as i32) * 2.0 * b / (1.0 - c.abs());
    Ok((DensityGrid::new(spec, p)?, bound))
}

/// `min(2, |c|^k |u0 - u0'|)`: the distance reached by driving both copies
/// with the same noise.
pub fn synchronous_coupling_bound(c: f64, u0: f64, u0p: f64, k: usize) -> f64 {
    (c.abs().powi(k as i32) * (u0 - u0p).abs()).min(2.0)
}

/// Exhaustive search of the dual-Lipschitz value over `f` on a `1e-3` grid
/// and `M` on a `1e-3` grid. Sizes are limited to five atoms per measure.
pub fn brute_force_bl_distance_1d(mu1: &DiscreteMeasure, mu2: &DiscreteMeasure) -> Result<f64> {
    if mu1.dim() != 1 || mu2.dim() != 1 || mu1.len() > 5 || mu2.len() > 5 {
        return Err(Error::InvalidInput(
            "oracle takes 1-D measures with at most five atoms".into(),
        ));
    }
    let mut atoms: Vec<(f64, f64)> = (0..mu1.len())
        .map(|i| (mu1.atom(i)[0], mu1.weights()[i]))
        .chain((0..mu2.len()).map(|j| (mu2.atom(j)[0], -mu2.weights()[j])))
        .collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let step = 1e-3;
    let steps = 1000usize;
    let mut best: f64 = 0.0;
    let mut f = Vec::new();
    let mut g = Vec::new();
    let mut window = std::collections::VecDeque::new();
    for mi in 0..=steps {
        let m = mi;
        let mass = mi as f64 * step;
        let lip = 1.0 - mass;
        let width = 2 * m + 1;
        f.clear();
        f.resize(width, 0.0f64);
        for (k, &(x, w)) in atoms.iter().enumerate() {
            if k > 0 {
                let gap = x - atoms[k - 1].0;
                let r = ((lip * gap) / step + 1e-9).floor() as usize;
                if r > 0 {
                    // sliding-window maximum of radius r
                    g.clear();
                    g.resize(width, 0.0);
                    window.clear();
                    let mut next = 0usize;
                    for i in 0..width {
                        let hi = (i + r).min(width - 1);
                        while next <= hi {
                            while let Some(&b) = window.back() {
                                if f[b] <= f[next] {
                                    window.pop_back();
                                } else {
                                    break;
                                }
                            }
                            window.push_back(next);
                            next += 1;
                        }
                        while let Some(&a) = window.front() {
                            if a + r < i {
                                window.pop_front();
                            } else {
                                break;
                            }
                        }
                        g[i] = f[*window.front().unwrap()];
                    }
                    std::mem::swap(&mut f, &mut g);
                }
            }
            for (i, v) in f.iter_mut().enumerate() {
                *v += w * (i as f64 - m as f64) * step;
            }
        }
        best = best.max(f.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    }
    Ok(best)
}

/// Minimum of the threshold cost over the vertices of the coupling polytope,
/// enumerated as all feasible bases. Intended for at most four atoms each.
pub fn brute_force_transport_cost(mu1: &DiscreteMeasure, mu2: &DiscreteMeasure, eps: f64) -> Result<f64> {
    let (m, n) = (mu1.len(), mu2.len());
    if m > 4 || n > 4 {
        return Err(Error::InvalidInput(
            "oracle takes at most four atoms per measure".into(),
        ));
    }
    let cells = m * n;
    let k = m + n - 1;
    let cost: Vec<f64> = (0..cells)
        .map(|c| f64::from(u8::from(mu1.distance(c / n, mu2, c % n) > eps)))
        .collect();
    let rhs: Vec<f64> = mu1.weights().iter().chain(mu2.weights()).cloned().collect();
    let mut best = f64::INFINITY;
    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        if let Some(x) = solve_basis(&subset, m, n, &rhs) {
            let c: f64 = subset.iter().zip(&x).map(|(&s, v)| cost[s] * v).sum();
            best = best.min(c);
        }
        // next combination
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(best.clamp(0.0, 1.0));
            }
            i -= 1;
            if subset[i] < cells - k + i {
                subset[i] += 1;
                for j in i + 1..k {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Solves the marginal equations restricted to `cols`; `None` unless the
/// solution is unique and non-negative.
fn solve_basis(cols: &[usize], m: usize, n: usize, rhs: &[f64]) -> Option<Vec<f64>> {
    let rows = m + n;
    let k = cols.len();
    let mut a = vec![vec![0.0; k + 1]; rows];
    for (c, &cell) in cols.iter().enumerate() {
        a[cell / n][c] = 1.0;
        a[m + cell % n][c] = 1.0;
    }
    for r in 0..rows {
        a[r][k] = rhs[r];
    }
    let mut piv_row = 0;
    let mut pivots = Vec::new();
    for c in 0..k {
        let p = (piv_row..rows).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))?;
        if a[p][c].abs() < 1e-12 {
            return None;
        }
        a.swap(p, piv_row);
        let pv = a[piv_row][c];
        for v in a[piv_row].iter_mut() {
            *v /= pv;
        }
        for r in 0..rows {
            if r != piv_row && a[r][c] != 0.0 {
                let f = a[r][c];
                for cc in 0..=k {
                    a[r][cc] -= f * a[piv_row][cc];
                }
            }
        }
        pivots.push(c);
        piv_row += 1;
    }
    if (piv_row..rows).any(|r| a[r][k].abs() > 1e-12) {
        return None;
    }
    let x: Vec<f64> = (0..k).map(|c| a[c][k]).collect();
    if x.iter().any(|&v| v < -1e-12) {
        return None;
    }
    Some(x.into_iter().map(|v| v.max(0.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_steps() {
        let s = ToySystem::halving();
        assert_eq!(s.step(&[1.0], &[0.0]).unwrap(), vec![0.5]);
        assert_eq!(s.step(&[0.0], &[0.3]).unwrap(), vec![0.3]);
    }

    #[test]
    fn synchronous_bound_arithmetic() {
        assert_eq!(synchronous_coupling_bound(0.5, -1.0, 1.0, 0), 2.0);
        assert_eq!(synchronous_coupling_bound(0.5, -1.0, 1.0, 5), 1.0 / 16.0);
    }

    #[test]
    fn convolution_oracle_zero_coefficient_is_noise() {
        let (g, _) = exact_stationary_density_1d(0.0, &ModeDensity::Uniform, 1.0, 10, 400).unwrap();
        assert!((g.mass() - 1.0).abs() < 1e-6);
        assert!((g.value_at(&[0.2]) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn convolution_oracle_point_noise() {
        let (g, _) = exact_stationary_density_1d(0.5, &ModeDensity::Uniform, 0.0, 10, 400).unwrap();
        assert_eq!(g.values.len(), 1);
        assert!((g.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn brute_force_bl_reference_values() {
        let z = DiscreteMeasure::dirac(&[0.0]);
        assert_eq!(brute_force_bl_distance_1d(&z, &z).unwrap(), 0.0);
        let h = DiscreteMeasure::dirac(&[0.5]);
        assert!((brute_force_bl_distance_1d(&z, &h).unwrap() - 0.4).abs() < 1e-2);
    }

    #[test]
    fn vertex_oracle_small_case() {
        let a = DiscreteMeasure::new(1, vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let b = DiscreteMeasure::new(1, vec![0.05, 5.0], vec![0.75, 0.25]).unwrap();
        // 0.5 can stay near 0; 0.25 of b's first atom must come from 1.0
        assert!((brute_force_transport_cost(&a, &b, 0.1).unwrap() - 0.5).abs() < 1e-12);
    }
}
