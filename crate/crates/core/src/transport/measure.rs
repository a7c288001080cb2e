use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite-support probability measure on `R^dim`, atoms stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Weights are renormalised to sum to one; they must already do so
    /// within `1e-6`.
    pub fn new(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("measure dimension must be positive".into()));
        }
        if weights.is_empty() || points.len() != dim * weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} coordinates do not form {} atoms of dimension {dim}",
                points.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || points.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(
                "weights and atoms must be finite, weights non-negative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidInput(format!("weights sum to {total}")));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { dim, points, weights })
    }

    pub fn uniform(dim: usize, points: Vec<f64>) -> Result<Self> {
        let n = points.len() / dim.max(1);
        Self::new(dim, points, vec![1.0 / n as f64; n])
    }

    pub fn dirac(point: &[f64]) -> Self {
        Self {
            dim: point.len(),
            points: point.to_vec(),
            weights: vec![1.0],
        }
    }

    /// Weighted histogram on `bins` equal cells per axis of the bounding box
    /// `[lo, hi]`; atoms sit at occupied cell centres.
    pub fn binned(&self, lo: &[f64], hi: &[f64], bins: usize) -> Result<Self> {
        let d = self.dim;
        let mut acc = std::collections::BTreeMap::<Vec<usize>, f64>::new();
        for (i, w) in self.weights.iter().enumerate() {
            let key: Vec<usize> = (0..d)
                .map(|k| {
                    let span = (hi[k] - lo[k]).max(f64::MIN_POSITIVE);
                    let t = ((self.atom(i)[k] - lo[k]) / span * bins as f64).floor();
                    (t.max(0.0) as usize).min(bins - 1)
                })
                .collect();
            *acc.entry(key).or_insert(0.0) += w;
        }
        let mut pts = Vec::with_capacity(acc.len() * d);
        let mut ws = Vec::with_capacity(acc.len());
        for (key, w) in acc {
            for k in 0..d {
                pts.push(lo[k] + (key[k] as f64 + 0.5) * (hi[k] - lo[k]) / bins as f64);
            }
            ws.push(w);
        }
        Self::new(d, pts, ws)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn distance(&self, i: usize, other: &DiscreteMeasure, j: usize) -> f64 {
        euclid(self.atom(i), other.atom(j))
    }

    /// Per-axis bounding box.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for i in 0..self.len() {
            for (k, x) in self.atom(i).iter().enumerate() {
                lo[k] = lo[k].min(*x);
                hi[k] = hi[k].max(*x);
            }
        }
        (lo, hi)
    }

    pub fn to_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (0..self.dim).map(|k| format!("x{k}")).collect();
        header.push("weight".into());
        wr.write_record(&header).map_err(csv_err)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.atom(i).iter().map(|x| format!("{x:e}")).collect();
            rec.push(format!("{:e}", self.weights[i]));
            wr.write_record(&rec).map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn from_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let dim = rd.headers().map_err(csv_err)?.len().saturating_sub(1);
        let mut pts = Vec::new();
        let mut ws = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(csv_err)?;
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidInput(format!("bad number in measure CSV: {e}")))?;
            if vals.len() != dim + 1 {
                return Err(Error::InvalidInput("ragged measure CSV".into()));
            }
            pts.extend_from_slice(&vals[..dim]);
            ws.push(vals[dim]);
        }
        Self::new(dim, pts, ws)
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::InvalidInput(format!("csv: {e}"))
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Sparse joint weights `(i, j, mass)` of a coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingPlan {
    pub entries: Vec<(usize, usize, f64)>,
}

impl CouplingPlan {
    pub fn row_sums(&self, n: usize) -> Vec<f64> {
        let mut s = vec![0.0; n];
        for &(i, _, w) in &self.entries {
            s[i] += w;
        }
        s
    }

    pub fn col_sums(&self, n: usize) -> Vec<f64> {
        let mut s = vec![0.0; n];
        for &(_, j, w) in &self.entries {
            s[j] += w;
        }
        s
    }

    /// Mass on pairs farther apart than `eps`.
    pub fn cost(&self, mu1: &DiscreteMeasure, mu2: &DiscreteMeasure, eps: f64) -> f64 {
        self.entries
            .iter()
            .filter(|&&(i, j, _)| mu1.distance(i, mu2, j) > eps)
            .map(|e| e.2)
            .sum()
    }
}
