use rand::{Rng, RngCore};

use super::grid::DensityGrid;
use crate::error::Result;
use crate::noise::{CdfTable, ModeDensity};

pub trait Density: Send + Sync {
    fn dim(&self) -> usize;
    fn pdf(&self, x: &[f64]) -> f64;
}

pub trait Sampler: Send + Sync {
    fn draw(&self, rng: &mut dyn RngCore) -> Vec<f64>;
}

/// Independent coordinates on `[-1, 1]^d`.
#[derive(Debug, Clone)]
pub struct ProductDensity {
    modes: Vec<ModeDensity>,
    tables: Vec<CdfTable>,
}

impl ProductDensity {
    pub fn new(modes: Vec<ModeDensity>) -> Result<Self> {
        let tables = modes.iter().map(CdfTable::build).collect::<Result<Vec<_>>>()?;
        Ok(Self { modes, tables })
    }

    pub fn modes(&self) -> &[ModeDensity] {
        &self.modes
    }

    /// Gradient of the density, used for analytic TV bounds.
    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let vals: Vec<f64> = self.modes.iter().zip(x).map(|(m, v)| m.pdf(*v)).collect();
        (0..x.len())
            .map(|k| {
                let mut g = self.modes[k].dpdf(x[k]);
                for (j, v) in vals.iter().enumerate() {
                    if j != k {
                        g *= v;
                    }
                }
                g
            })
            .collect()
    }
}

impl Density for ProductDensity {
    fn dim(&self) -> usize {
        self.modes.len()
    }

    fn pdf(&self, x: &[f64]) -> f64 {
        self.modes.iter().zip(x).map(|(m, v)| m.pdf(*v)).product()
    }
}

impl Sampler for ProductDensity {
    fn draw(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.tables.iter().map(|t| t.quantile(rng.random::<f64>())).collect()
    }
}

/// Uniform law on an axis-aligned box.
#[derive(Debug, Clone)]
pub struct UniformBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl UniformBox {
    pub fn interval(a: f64, b: f64) -> Self {
        Self {
            lo: vec![a],
            hi: vec![b],
        }
    }
}

impl Density for UniformBox {
    fn dim(&self) -> usize {
        self.lo.len()
    }

    fn pdf(&self, x: &[f64]) -> f64 {
        let mut v = 1.0;
        for k in 0..self.lo.len() {
            if x[k] < self.lo[k] || x[k] > self.hi[k] {
                return 0.0;
            }
            v /= self.hi[k] - self.lo[k];
        }
        v
    }
}

impl Sampler for UniformBox {
    fn draw(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| a + (b - a) * rng.random::<f64>())
            .collect()
    }
}

impl Density for DensityGrid {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn pdf(&self, x: &[f64]) -> f64 {
        self.value_at(x)
    }
}

/// Draws cells proportionally to mass, then uniformly inside the cell.
pub struct GridSampler {
    grid: DensityGrid,
    cumulative: Vec<f64>,
}

impl GridSampler {
    pub fn new(grid: DensityGrid) -> Self {
        let mut acc = 0.0;
        let cumulative = grid
            .values
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        Self { grid, cumulative }
    }
}

impl Sampler for GridSampler {
    fn draw(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let total = *self.cumulative.last().unwrap();
        let u = rng.random::<f64>() * total;
        let cell = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1);
        let spec = &self.grid.spec;
        let mut x = spec.center(cell);
        for (k, xk) in x.iter_mut().enumerate() {
            *xk += (rng.random::<f64>() - 0.5) * spec.spacing(k);
        }
        x
    }
}
