//! Phase-space points and the norms used to compare them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A rectangular block `rows x cols` (row-major) inside a flat state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridBlock {
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Norm {
    Euclidean,
    /// `sqrt(w * sum v_i^2)`, `w` the cell volume.
    DiscreteL2 {
        weight: f64,
    },
    /// Concatenated 2-D arrays with spacing `h`: `h^2 sum v^2` plus the sum
    /// of squared neighbour differences inside each block.
    DiscreteH1 {
        blocks: Vec<GridBlock>,
        h: f64,
    },
}

impl Norm {
    pub fn eval(&self, v: &[f64]) -> f64 {
        match self {
            Norm::Euclidean => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Norm::DiscreteL2 { weight } => (weight * v.iter().map(|x| x * x).sum::<f64>()).sqrt(),
            Norm::DiscreteH1 { blocks, h } => {
                let mut l2 = 0.0;
                let mut grad = 0.0;
                let mut off = 0;
                for b in blocks {
                    let a = &v[off..off + b.rows * b.cols];
                    for r in 0..b.rows {
                        for c in 0..b.cols {
                            let x = a[r * b.cols + c];
                            l2 += x * x;
                            if r + 1 < b.rows {
                                let d = a[(r + 1) * b.cols + c] - x;
                                grad += d * d;
                            }
                            if c + 1 < b.cols {
                                let d = a[r * b.cols + c + 1] - x;
                                grad += d * d;
                            }
                        }
                    }
                    off += b.rows * b.cols;
                }
                (h * h * l2 + grad).sqrt()
            }
        }
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        self.eval(&diff)
    }

    /// Length of vectors this norm accepts, if it is fixed.
    pub fn expected_len(&self) -> Option<usize> {
        match self {
            Norm::DiscreteH1 { blocks, .. } => Some(blocks.iter().map(|b| b.rows * b.cols).sum()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub coords: Vec<f64>,
    pub norm: Norm,
}

impl StateVector {
    pub fn new(coords: Vec<f64>, norm: Norm) -> Result<Self> {
        if let Some(i) = coords.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("state entry {i} is not finite")));
        }
        if let Some(n) = norm.expected_len() {
            if n != coords.len() {
                return Err(Error::InvalidInput(format!(
                    "state has {} entries, norm expects {n}",
                    coords.len()
                )));
            }
        }
        Ok(Self { coords, norm })
    }

    pub fn euclidean(coords: Vec<f64>) -> Result<Self> {
        Self::new(coords, Norm::Euclidean)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm_value(&self) -> f64 {
        self.norm.eval(&self.coords)
    }

    pub fn distance(&self, other: &StateVector) -> f64 {
        self.norm.distance(&self.coords, &other.coords)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_rejected() {
        assert!(StateVector::euclidean(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn h1_of_constant_block_is_scaled_l2() {
        let n = Norm::DiscreteH1 {
            blocks: vec![GridBlock { rows: 2, cols: 3 }],
            h: 0.5,
        };
        let v = vec![1.0; 6];
        assert!((n.eval(&v) - (0.25f64 * 6.0).sqrt()).abs() < 1e-15);
    }
}
