//! Decomposable bounded noise: `eta = sum_j b_j xi_j phi_j` with independent
//! coefficients `xi_j` on `[-1, 1]` drawn from per-mode densities.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngState;

/// Number of nodes of the cached inverse-CDF table.
pub const CDF_NODES: usize = 4096;

/// Density of a single mode coefficient, supported on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModeDensity {
    /// `1/2` on `[-1, 1]`.
    Uniform,
    /// `3/4 (1 - r^2)`.
    Parabolic,
    /// `15/16 (1 - r^2)^2`, continuously differentiable on the real line.
    Biweight,
    /// Piecewise-linear density through equally spaced samples on `[-1, 1]`,
    /// normalised on construction.
    Tabulated { values: Vec<f64> },
}

impl ModeDensity {
    pub fn pdf(&self, r: f64) -> f64 {
        if !(-1.0..=1.0).contains(&r) {
            return 0.0;
        }
        match self {
            ModeDensity::Uniform => 0.5,
            ModeDensity::Parabolic => 0.75 * (1.0 - r * r),
            ModeDensity::Biweight => {
                let s = 1.0 - r * r;
                15.0 / 16.0 * s * s
            }
            ModeDensity::Tabulated { values } => {
                let m = values.len() - 1;
                let pos = (r + 1.0) * 0.5 * m as f64;
                let k = (pos.floor() as usize).min(m - 1);
                let w = pos - k as f64;
                values[k] * (1.0 - w) + values[k + 1] * w
            }
        }
    }

    /// Derivative of the density (one-sided slope at table kinks).
    pub fn dpdf(&self, r: f64) -> f64 {
        if !(-1.0..=1.0).contains(&r) {
            return 0.0;
        }
        match self {
            ModeDensity::Uniform => 0.0,
            ModeDensity::Parabolic => -1.5 * r,
            ModeDensity::Biweight => -15.0 / 4.0 * r * (1.0 - r * r),
            ModeDensity::Tabulated { values } => {
                let m = values.len() - 1;
                let pos = (r + 1.0) * 0.5 * m as f64;
                let k = (pos.floor() as usize).min(m - 1);
                (values[k + 1] - values[k]) * 0.5 * m as f64
            }
        }
    }

    /// Closed-form CDF where one exists.
    pub fn cdf(&self, r: f64) -> f64 {
        let r = r.clamp(-1.0, 1.0);
        match self {
            ModeDensity::Uniform => 0.5 * (r + 1.0),
            ModeDensity::Parabolic => 0.5 + 0.75 * (r - r * r * r / 3.0),
            ModeDensity::Biweight => 0.5 + 15.0 / 16.0 * (r - 2.0 * r.powi(3) / 3.0 + r.powi(5) / 5.0),
            ModeDensity::Tabulated { values } => {
                let m = values.len() - 1;
                let dx = 2.0 / m as f64;
                let pos = (r + 1.0) / dx;
                let k = (pos.floor() as usize).min(m - 1);
                let mut acc = 0.0;
                for i in 0..k {
                    acc += 0.5 * (values[i] + values[i + 1]) * dx;
                }
                let w = (pos - k as f64) * dx;
                let slope = (values[k + 1] - values[k]) / dx;
                acc + values[k] * w + 0.5 * slope * w * w
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            ModeDensity::Uniform => 1.0 / 3.0,
            ModeDensity::Parabolic => 0.2,
            ModeDensity::Biweight => 1.0 / 7.0,
            ModeDensity::Tabulated { .. } => {
                let n = 20_000;
                let h = 2.0 / n as f64;
                (0..n)
                    .map(|i| {
                        let r = -1.0 + (i as f64 + 0.5) * h;
                        r * r * self.pdf(r) * h
                    })
                    .sum()
            }
        }
    }

    fn validated(self) -> Result<Self> {
        let out = match self {
            ModeDensity::Tabulated { values } => {
                if values.len() < 2 {
                    return Err(Error::Config("tabulated density needs at least two samples".into()));
                }
                if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::Config(
                        "tabulated density has negative or non-finite samples".into(),
                    ));
                }
                let dx = 2.0 / (values.len() - 1) as f64;
                let mass: f64 = values.windows(2).map(|w| 0.5 * (w[0] + w[1]) * dx).sum();
                if !(mass > 0.0) || !mass.is_finite() {
                    return Err(Error::Config("density table is not normalizable".into()));
                }
                ModeDensity::Tabulated {
                    values: values.into_iter().map(|v| v / mass).collect(),
                }
            }
            other => other,
        };
        if out.pdf(0.0) == 0.0 {
            return Err(Error::Config("mode density must not vanish at the origin".into()));
        }
        Ok(out)
    }
}

/// Inverse-CDF table on `CDF_NODES` equally spaced nodes of `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct CdfTable {
    cdf: Vec<f64>,
}

impl CdfTable {
    pub fn build(density: &ModeDensity) -> Result<Self> {
        let m = CDF_NODES - 1;
        let dx = 2.0 / m as f64;
        let mut cdf = Vec::with_capacity(CDF_NODES);
        cdf.push(0.0);
        let mut acc = 0.0;
        for k in 0..m {
            let a = -1.0 + k as f64 * dx;
            // Simpson on each table cell; exact for the polynomial families.
            let mid = density.pdf(a + 0.5 * dx);
            acc += dx / 6.0 * (density.pdf(a) + 4.0 * mid + density.pdf(a + dx));
            cdf.push(acc);
        }
        if !(acc > 0.0) || !acc.is_finite() {
            return Err(Error::Config("density table is not normalizable".into()));
        }
        if (acc - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "density integrates to {acc}, expected 1 within 1e-9"
            )));
        }
        for c in &mut cdf {
            *c /= acc;
        }
        Ok(Self { cdf })
    }

    /// Quantile of `u` in `[0, 1]`, linear between table nodes.
    pub fn quantile(&self, u: f64) -> f64 {
        let m = CDF_NODES - 1;
        let dx = 2.0 / m as f64;
        let u = u.clamp(0.0, 1.0);
        // first index with cdf >= u
        let k = self.cdf.partition_point(|&c| c < u);
        if k == 0 {
            return -1.0;
        }
        if k > m {
            return 1.0;
        }
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let w = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        (-1.0 + (k - 1) as f64 * dx + w * dx).clamp(-1.0, 1.0)
    }
}

/// Coefficients `xi_j` of one noise realisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseVector {
    pub xi: Vec<f64>,
}

impl NoiseVector {
    pub fn zeros(dim: usize) -> Self {
        Self { xi: vec![0.0; dim] }
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }
}

/// Law of the noise: amplitudes `b_j` and coefficient densities `p_j`.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    amplitudes: Vec<f64>,
    densities: Vec<ModeDensity>,
    tables: Vec<Arc<CdfTable>>,
}

impl NoiseModel {
    pub fn new(amplitudes: Vec<f64>, densities: Vec<ModeDensity>) -> Result<Self> {
        if amplitudes.len() != densities.len() {
            return Err(Error::Config(format!(
                "{} amplitudes but {} densities",
                amplitudes.len(),
                densities.len()
            )));
        }
        if amplitudes.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::Config("amplitudes must be finite and non-negative".into()));
        }
        let densities = densities
            .into_iter()
            .map(ModeDensity::validated)
            .collect::<Result<Vec<_>>>()?;
        let tables = densities
            .iter()
            .map(|d| CdfTable::build(d).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            amplitudes,
            densities,
            tables,
        })
    }

    /// All modes share one density family.
    pub fn iid(amplitudes: Vec<f64>, density: ModeDensity) -> Result<Self> {
        let n = amplitudes.len();
        Self::new(amplitudes, vec![density; n])
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn densities(&self) -> &[ModeDensity] {
        &self.densities
    }

    /// `sum_j b_j^2`.
    pub fn total_variance_budget(&self) -> f64 {
        self.amplitudes.iter().map(|b| b * b).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> NoiseVector {
        let xi = self.tables.iter().map(|t| t.quantile(rng.random::<f64>())).collect();
        NoiseVector { xi }
    }

    pub fn sample_from(&self, state: RngState) -> NoiseVector {
        self.sample(&mut state.generator())
    }

    /// Realised mode coefficients `b_j xi_j`.
    pub fn realize(&self, eta: &NoiseVector) -> Vec<f64> {
        self.amplitudes.iter().zip(&eta.xi).map(|(b, x)| b * x).collect()
    }

    /// Joint density of the coefficients `xi_j` for `j` in `block`.
    pub fn block_density(&self, block: std::ops::Range<usize>, xi: &[f64]) -> f64 {
        self.densities[block].iter().zip(xi).map(|(d, x)| d.pdf(*x)).product()
    }

    pub fn mode_quantile(&self, j: usize, u: f64) -> f64 {
        self.tables[j].quantile(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_families_normalised() {
        for d in [ModeDensity::Uniform, ModeDensity::Parabolic, ModeDensity::Biweight] {
            assert!((d.cdf(1.0) - 1.0).abs() < 1e-12);
            assert!(CdfTable::build(&d).is_ok());
        }
    }

    #[test]
    fn tabulated_is_normalised_and_matches_uniform() {
        let d = ModeDensity::Tabulated { values: vec![3.0; 11] }.validated().unwrap();
        assert!((d.pdf(0.3) - 0.5).abs() < 1e-12);
        assert!((d.cdf(0.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bad_tables_are_rejected() {
        let zero = NoiseModel::new(vec![1.0], vec![ModeDensity::Tabulated { values: vec![0.0; 5] }]);
        assert!(matches!(zero, Err(Error::Config(_))));
        let neg = NoiseModel::new(
            vec![1.0],
            vec![ModeDensity::Tabulated {
                values: vec![1.0, -1.0, 1.0],
            }],
        );
        assert!(matches!(neg, Err(Error::Config(_))));
        // vanishes at the origin
        let hole = NoiseModel::new(
            vec![1.0],
            vec![ModeDensity::Tabulated {
                values: vec![1.0, 0.0, 1.0],
            }],
        );
        assert!(matches!(hole, Err(Error::Config(_))));
    }

    #[test]
    fn quantile_inverts_cdf() {
        let d = ModeDensity::Parabolic;
        let t = CdfTable::build(&d).unwrap();
        for &u in &[0.01, 0.2, 0.5, 0.77, 0.99] {
            let x = t.quantile(u);
            assert!((d.cdf(x) - u).abs() < 1e-6, "u={u} x={x}");
        }
        assert_eq!(t.quantile(0.0), -1.0);
        assert_eq!(t.quantile(1.0), 1.0);
    }

    #[test]
    fn zero_amplitudes_give_zero_noise() {
        let m = NoiseModel::iid(vec![0.0; 4], ModeDensity::Uniform).unwrap();
        let eta = m.sample_from(RngState::new(3));
        assert!(m.realize(&eta).iter().all(|&a| a == 0.0));
    }
}
