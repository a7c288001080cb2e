//! Shift maps `Psi(z) = z + Phi(z)` and the densities they push forward.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::cost::transport_cost;
use super::density::{Density, Sampler};
use super::grid::{DensityGrid, GridSpec};
use super::measure::DiscreteMeasure;
use crate::error::{Error, Result};

pub type VecFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// `Phi` acting on a coordinate block of dimension `dim`, with size and
/// Lipschitz budget `kappa`.
#[derive(Clone)]
pub struct ShiftMap {
    dim: usize,
    kappa: f64,
    phi: VecFn,
    /// Row-major `dim x dim` Jacobian, if known analytically.
    jac: Option<VecFn>,
}

impl std::fmt::Debug for ShiftMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShiftMap")
            .field("dim", &self.dim)
            .field("kappa", &self.kappa)
            .field("analytic_jacobian", &self.jac.is_some())
            .finish()
    }
}

impl ShiftMap {
    pub fn new(dim: usize, kappa: f64, phi: VecFn) -> Self {
        Self {
            dim,
            kappa,
            phi,
            jac: None,
        }
    }

    pub fn with_jacobian(mut self, jac: VecFn) -> Self {
        self.jac = Some(jac);
        self
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, 0.0, Arc::new(move |_| vec![0.0; dim])).with_jacobian(Arc::new(move |_| vec![0.0; dim * dim]))
    }

    pub fn constant(c: Vec<f64>) -> Self {
        let dim = c.len();
        let kappa = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        Self::new(dim, kappa, Arc::new(move |_| c.clone())).with_jacobian(Arc::new(move |_| vec![0.0; dim * dim]))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn phi(&self, z: &[f64]) -> Vec<f64> {
        (self.phi)(z)
    }

    pub fn psi(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(self.phi(z)).map(|(a, b)| a + b).collect()
    }

    /// `D Phi(z)`, analytic when available, else central differences with
    /// step `1e-6`.
    pub fn jacobian(&self, z: &[f64]) -> Vec<f64> {
        if let Some(j) = &self.jac {
            return j(z);
        }
        let d = self.dim;
        let h = 1e-6;
        let mut out = vec![0.0; d * d];
        let mut zp = z.to_vec();
        for c in 0..d {
            zp[c] = z[c] + h;
            let fp = self.phi(&zp);
            zp[c] = z[c] - h;
            let fm = self.phi(&zp);
            zp[c] = z[c];
            for r in 0..d {
                out[r * d + c] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        out
    }

    /// Empirical `(sup |Phi|, sup Lipschitz quotient)` over sampled pairs.
    pub fn check_budget(&self, points: &[Vec<f64>]) -> (f64, f64) {
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let vals: Vec<Vec<f64>> = points.iter().map(|p| self.phi(p)).collect();
        let size = vals.iter().map(|v| norm(v)).fold(0.0, f64::max);
        let mut lip: f64 = 0.0;
        for i in 0..points.len() {
            let j = (i + 1) % points.len();
            let dz: Vec<f64> = points[i].iter().zip(&points[j]).map(|(a, b)| a - b).collect();
            let dp: Vec<f64> = vals[i].iter().zip(&vals[j]).map(|(a, b)| a - b).collect();
            let nz = norm(&dz);
            if nz > 0.0 {
                lip = lip.max(norm(&dp) / nz);
            }
        }
        (size, lip)
    }
}

/// Density of `Psi_* base`.
#[derive(Clone)]
pub struct Pushforward {
    base: Arc<dyn Density>,
    shift: ShiftMap,
}

/// Builds the evaluator of `Psi_* base`; requires `kappa < 1` so that `Psi`
/// is invertible.
pub fn pushforward_density(base: Arc<dyn Density>, shift: ShiftMap) -> Result<Pushforward> {
    if !(shift.kappa() < 1.0) {
        return Err(Error::SingularMap(format!(
            "shift budget {} must be below one",
            shift.kappa()
        )));
    }
    if base.dim() != shift.dim() {
        return Err(Error::InvalidInput("shift and base density differ in dimension".into()));
    }
    Ok(Pushforward { base, shift })
}

impl Pushforward {
    /// Skips the budget check; the caller vouches for invertibility.
    pub(crate) fn unchecked(base: Arc<dyn Density>, shift: ShiftMap) -> Self {
        Self { base, shift }
    }

    pub fn shift(&self) -> &ShiftMap {
        &self.shift
    }

    /// `|det(I + D Phi(z))|`.
    pub fn jacobian_factor(&self, z: &[f64]) -> f64 {
        let d = self.shift.dim();
        let j = self.shift.jacobian(z);
        let m = DMatrix::from_fn(d, d, |r, c| j[r * d + c] + if r == c { 1.0 } else { 0.0 });
        m.determinant().abs()
    }

    /// Newton solve of `z + Phi(z) = y`.
    pub fn preimage(&self, y: &[f64]) -> Result<Vec<f64>> {
        let d = self.shift.dim();
        let mut z: Vec<f64> = y.iter().zip(self.shift.phi(y)).map(|(a, b)| a - b).collect();
        let scale = 1.0 + y.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for _ in 0..50 {
            let r: Vec<f64> = self.shift.psi(&z).iter().zip(y).map(|(a, b)| a - b).collect();
            if r.iter().all(|v| v.abs() <= 1e-12 * scale) {
                return Ok(z);
            }
            let j = self.shift.jacobian(&z);
            let m = DMatrix::from_fn(d, d, |rr, c| j[rr * d + c] + if rr == c { 1.0 } else { 0.0 });
            let Some(step) = m.lu().solve(&DVector::from_vec(r)) else {
                return Err(Error::SingularMap("singular Jacobian in Newton inversion".into()));
            };
            for k in 0..d {
                z[k] -= step[k];
            }
        }
        Err(Error::SingularMap(
            "Newton inversion did not converge in 50 iterations".into(),
        ))
    }

    pub fn try_pdf(&self, y: &[f64]) -> Result<f64> {
        let z = self.preimage(y)?;
        Ok(self.pdf_at_preimage(&z))
    }

    /// Density at `Psi(z)` for a known preimage `z`.
    pub fn pdf_at_preimage(&self, z: &[f64]) -> f64 {
        let rho = self.base.pdf(z);
        if rho == 0.0 {
            return 0.0;
        }
        rho / self.jacobian_factor(z)
    }

    pub fn grid(&self, spec: GridSpec) -> Result<DensityGrid> {
        let vals = (0..spec.cells())
            .map(|i| self.try_pdf(&spec.center(i)))
            .collect::<Result<Vec<f64>>>()?;
        let mass = vals.iter().sum::<f64>() * spec.cell_volume();
        if !(mass > 0.0) {
            return Err(Error::Config("pushforward has no mass on this grid".into()));
        }
        DensityGrid::new(spec, vals.into_iter().map(|v| v / mass).collect())
    }
}

impl Density for Pushforward {
    fn dim(&self) -> usize {
        self.shift.dim()
    }

    /// NaN when the inversion fails; samplers treat that as an error.
    fn pdf(&self, x: &[f64]) -> f64 {
        self.try_pdf(x).unwrap_or(f64::NAN)
    }
}

/// Samples `Psi(z)` with `z` from the base sampler.
pub struct PushforwardSampler<S: Sampler> {
    pub base: S,
    pub shift: ShiftMap,
}

impl<S: Sampler> Sampler for PushforwardSampler<S> {
    fn draw(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.shift.psi(&self.base.draw(rng))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShiftTvRow {
    pub kappa: f64,
    pub tv: f64,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShiftTvReport {
    pub rows: Vec<ShiftTvRow>,
    pub max_ratio: f64,
    pub min_ratio: f64,
    pub band: f64,
    pub pass: bool,
}

/// TV between `base` and its pushforward on a grid, per budget `kappa`.
/// Passes when `TV / kappa` stays inside a band of width `band` (max/min).
pub fn verify_shift_tv_bound(
    base: Arc<dyn Density>,
    family: &dyn Fn(f64) -> ShiftMap,
    kappas: &[f64],
    spec: &GridSpec,
    band: f64,
) -> Result<ShiftTvReport> {
    let vol = spec.cell_volume();
    let centers: Vec<Vec<f64>> = (0..spec.cells()).map(|i| spec.center(i)).collect();
    let p: Vec<f64> = centers.iter().map(|c| base.pdf(c)).collect();
    let mut rows = Vec::new();
    for &kappa in kappas {
        let tv = if kappa == 0.0 {
            0.0
        } else {
            let push = pushforward_density(base.clone(), family(kappa))?;
            let mut s = 0.0;
            for (c, pv) in centers.iter().zip(&p) {
                s += (pv - push.try_pdf(c)?).abs();
            }
            0.5 * s * vol
        };
        rows.push(ShiftTvRow {
            kappa,
            tv,
            ratio: (kappa > 0.0).then(|| tv / kappa),
        });
    }
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    let min_ratio = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let pass = ratios.is_empty() || (min_ratio > 0.0 && max_ratio / min_ratio < band);
    Ok(ShiftTvReport {
        rows,
        max_ratio,
        min_ratio,
        band,
        pass,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostTvReport {
    pub cost: f64,
    pub tv: f64,
    pub bound: f64,
    pub max_mismatch: f64,
    pub pass: bool,
}

/// Checks `C_eps(U1_* P, U2_* P) <= 2 TV(P, Psi_* P) + tol` on empirical
/// measures. `omega1` and `omega2` are independent samples of `P`; the
/// mapping condition `|U1 - U2 o Psi| <= eps` is verified on `omega1`.
#[allow(clippy::too_many_arguments)]
pub fn cost_tv_inequality_check(
    omega1: &[Vec<f64>],
    omega2: &[Vec<f64>],
    u1: &dyn Fn(&[f64]) -> Vec<f64>,
    u2: &dyn Fn(&[f64]) -> Vec<f64>,
    psi: &dyn Fn(&[f64]) -> Vec<f64>,
    eps: f64,
    tv: f64,
    tol: f64,
) -> Result<CostTvReport> {
    let mut max_mismatch: f64 = 0.0;
    for w in omega1 {
        let a = u1(w);
        let b = u2(&psi(w));
        max_mismatch = max_mismatch.max(super::measure::euclid(&a, &b));
    }
    if max_mismatch > eps {
        return Err(Error::InvalidInput(format!(
            "|U1 - U2 o Psi| reaches {max_mismatch} > eps = {eps}"
        )));
    }
    let build = |om: &[Vec<f64>], u: &dyn Fn(&[f64]) -> Vec<f64>| -> Result<DiscreteMeasure> {
        let pts: Vec<Vec<f64>> = om.iter().map(|w| u(w)).collect();
        let dim = pts[0].len();
        DiscreteMeasure::uniform(dim, pts.concat())
    };
    let mu1 = build(omega1, u1)?;
    let mu2 = build(omega2, u2)?;
    let cost = transport_cost(&mu1, &mu2, eps)?;
    Ok(CostTvReport {
        cost,
        tv,
        bound: 2.0 * tv,
        max_mismatch,
        pass: cost <= 2.0 * tv + tol,
    })
}
