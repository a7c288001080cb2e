use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box with per-axis cell counts; cells are row-major with the
/// last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub shape: Vec<usize>,
}

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != shape.len() || lo.is_empty() {
            return Err(Error::InvalidInput("grid box and shape disagree in dimension".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(b > a)) || shape.contains(&0) {
            return Err(Error::InvalidInput("grid box must be non-degenerate".into()));
        }
        Ok(Self { lo, hi, shape })
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn cells(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / self.shape[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.spacing(k)).product()
    }

    pub fn center(&self, mut index: usize) -> Vec<f64> {
        let d = self.dim();
        let mut x = vec![0.0; d];
        for k in (0..d).rev() {
            let i = index % self.shape[k];
            index /= self.shape[k];
            x[k] = self.lo[k] + (i as f64 + 0.5) * self.spacing(k);
        }
        x
    }

    /// Cell containing `x`, if inside the box.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let mut idx = 0;
        for k in 0..self.dim() {
            let t = (x[k] - self.lo[k]) / self.spacing(k);
            if !(t >= 0.0) || t >= self.shape[k] as f64 {
                if t == self.shape[k] as f64 && x[k] == self.hi[k] {
                    idx = idx * self.shape[k] + self.shape[k] - 1;
                    continue;
                }
                return None;
            }
            idx = idx * self.shape[k] + t as usize;
        }
        Some(idx)
    }
}

/// Probability density sampled at cell centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridHeader {
    #[serde(rename = "box")]
    bounds: [Vec<f64>; 2],
    shape: Vec<usize>,
}

impl DensityGrid {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.cells() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} cells",
                values.len(),
                spec.cells()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput(
                "density values must be finite and non-negative".into(),
            ));
        }
        let mass = values.iter().sum::<f64>() * spec.cell_volume();
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidInput(format!("grid density has mass {mass}")));
        }
        Ok(Self { spec, values })
    }

    /// Samples `f` at the cell centres and rescales to unit mass.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(spec: GridSpec, f: F) -> Result<Self> {
        let mut values: Vec<f64> = (0..spec.cells()).map(|i| f(&spec.center(i))).collect();
        let mass = values.iter().sum::<f64>() * spec.cell_volume();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::Config("density is not normalizable on this grid".into()));
        }
        values.iter_mut().for_each(|v| *v /= mass);
        Self::new(spec, values)
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.cell_volume()
    }

    pub fn value_at(&self, x: &[f64]) -> f64 {
        self.spec.locate(x).map_or(0.0, |i| self.values[i])
    }

    pub fn write(&self, bin: &Path, header: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.values.iter().flat_map(|v| v.to_le_bytes()).collect();
        std::fs::write(bin, bytes)?;
        let h = GridHeader {
            bounds: [self.spec.lo.clone(), self.spec.hi.clone()],
            shape: self.spec.shape.clone(),
        };
        std::fs::write(header, serde_json::to_string_pretty(&h)?)?;
        Ok(())
    }

    pub fn read(bin: &Path, header: &Path) -> Result<Self> {
        let h: GridHeader = serde_json::from_str(&std::fs::read_to_string(header)?)?;
        let [lo, hi] = h.bounds;
        let spec = GridSpec::new(lo, hi, h.shape)?;
        let bytes = std::fs::read(bin)?;
        if bytes.len() % 8 != 0 {
            return Err(Error::GridMismatch("binary length is not a multiple of 8".into()));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(spec, values)
    }
}

/// `(1/2) sum |p - q| * cell volume` on a common grid.
pub fn tv_distance_grid(p: &DensityGrid, q: &DensityGrid) -> Result<f64> {
    if p.spec != q.spec {
        return Err(Error::GridMismatch("densities live on different grids".into()));
    }
    let s: f64 = p.values.iter().zip(&q.values).map(|(a, b)| (a - b).abs()).sum();
    Ok((0.5 * s * p.spec.cell_volume()).clamp(0.0, 1.0))
}
