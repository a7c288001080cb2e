//! Local stabilisers: finite-block noise corrections `Phi(u, u', eta)` that
//! make the trajectory from `u'` contract towards the one from `u`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rds::SystemMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabiliserConstants {
    /// Hölder constant: `|Phi| <= c d(u, u')^alpha`.
    pub c: f64,
    /// Largest distance `d(u, u')` the stabiliser is valid for.
    pub delta: f64,
    pub alpha: f64,
    /// Certified contraction factor.
    pub q: f64,
}

pub trait Stabiliser: Send + Sync {
    /// Number `N` of leading noise modes the correction acts on.
    fn block_dim(&self) -> usize;

    fn constants(&self) -> StabiliserConstants;

    /// Correction to the realised coefficients `a_0..a_{N-1}` driving `u'`.
    fn correction(&self, u: &[f64], u2: &[f64], a: &[f64]) -> Result<Vec<f64>>;

    /// `d Phi / d a_F`, row-major `N x N`, when known in closed form.
    fn correction_jacobian(&self, _u: &[f64], _u2: &[f64], _a: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// Adds a block correction to realised coefficients.
pub fn corrected(a: &[f64], phi: &[f64]) -> Vec<f64> {
    let mut out = a.to_vec();
    for (x, p) in out.iter_mut().zip(phi) {
        *x += p;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Precompose {
    Identity,
    /// `tanh` on the listed coordinates.
    Tanh {
        coords: Vec<usize>,
    },
}

impl Precompose {
    fn apply(&self, u: &[f64]) -> Vec<f64> {
        match self {
            Precompose::Identity => u.to_vec(),
            Precompose::Tanh { coords } => {
                let mut v = u.to_vec();
                for &k in coords {
                    v[k] = v[k].tanh();
                }
                v
            }
        }
    }
}

/// `Phi(u, u', eta) = K (sigma(u) - sigma(u'))`, independent of `eta`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearFeedback {
    /// Row-major `N x n` gain.
    pub gain: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    pub sigma: Precompose,
    pub constants: StabiliserConstants,
}

impl LinearFeedback {
    pub fn with_delta(mut self, delta: f64) -> Self {
        self.constants.delta = delta;
        self
    }

    pub fn with_sigma(mut self, sigma: Precompose) -> Self {
        self.sigma = sigma;
        self
    }

    /// The same gain with its sign flipped; a deliberately wrong stabiliser.
    pub fn negated(mut self) -> Self {
        self.gain.iter_mut().for_each(|k| *k = -*k);
        self
    }

    pub fn gain_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.gain)
    }
}

impl Stabiliser for LinearFeedback {
    fn block_dim(&self) -> usize {
        self.rows
    }

    fn constants(&self) -> StabiliserConstants {
        self.constants
    }

    fn correction(&self, u: &[f64], u2: &[f64], _a: &[f64]) -> Result<Vec<f64>> {
        let su = self.sigma.apply(u);
        let sv = self.sigma.apply(u2);
        Ok((0..self.rows)
            .map(|r| {
                (0..self.cols)
                    .map(|c| self.gain[r * self.cols + c] * (su[c] - sv[c]))
                    .sum()
            })
            .collect())
    }

    fn correction_jacobian(&self, _u: &[f64], _u2: &[f64], _a: &[f64]) -> Option<Vec<f64>> {
        Some(vec![0.0; self.rows * self.rows])
    }
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Gain `K` with `|A - B K| <= q` for `S(u, eta) = A u + B eta`, found as
/// the smallest multiple of `B^+ A` that reaches the target.
pub fn toy_affine_stabiliser(a: &DMatrix<f64>, b: &DMatrix<f64>, q: f64) -> Result<LinearFeedback> {
    if a.nrows() != a.ncols() || b.nrows() != a.nrows() {
        return Err(Error::InvalidInput(
            "A must be square and B must have as many rows".into(),
        ));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Config(format!("target contraction must lie in (0, 1), got {q}")));
    }
    let n = a.nrows();
    let nb = b.ncols();
    let make = |k: DMatrix<f64>| LinearFeedback {
        gain: k.transpose().as_slice().to_vec(),
        rows: nb,
        cols: n,
        sigma: Precompose::Identity,
        constants: StabiliserConstants {
            c: spectral_norm(&k),
            delta: f64::INFINITY,
            alpha: 1.0,
            q,
        },
    };
    if spectral_norm(a) <= q {
        return Ok(make(DMatrix::zeros(nb, n)));
    }
    let b_pinv = b
        .clone()
        .pseudo_inverse(1e-12)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let k_full = &b_pinv * a;
    let proj_a = b * &k_full;
    let closed = |s: f64| spectral_norm(&(a - &proj_a * s));
    let floor = closed(1.0);
    if floor > q {
        return Err(Error::Infeasible(format!(
            "best achievable closed-loop norm {floor} exceeds {q}"
        )));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if closed(mid) <= q {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(make(k_full * hi))
}

/// Control window `0 < a < b < c < tau < 1` with a smooth cutoff that is one
/// up to `b` and zero from `c` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlWindow {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub tau: f64,
}

impl Default for ControlWindow {
    fn default() -> Self {
        Self {
            a: 0.1,
            b: 0.5,
            c: 0.7,
            tau: 0.8,
        }
    }
}

fn bump_tail(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

/// `C^inf` step from 0 (x <= 0) to 1 (x >= 1) and its derivative.
pub fn smooth_step(x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 0.0);
    }
    if x >= 1.0 {
        return (1.0, 0.0);
    }
    let f = bump_tail(x);
    let g = bump_tail(1.0 - x);
    let fp = f / (x * x);
    let gp = g / ((1.0 - x) * (1.0 - x));
    let den = f + g;
    (f / den, (fp * g + f * gp) / (den * den))
}

impl ControlWindow {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.a && self.a < self.b && self.b < self.c && self.c < self.tau && self.tau < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "control window needs 0 < a < b < c < tau < 1, got {self:?}"
            )))
        }
    }

    /// Cutoff `chi(t)` and `chi'(t)`.
    pub fn chi(&self, t: f64) -> (f64, f64) {
        let w = self.c - self.b;
        let (s, ds) = smooth_step((t - self.b) / w);
        (1.0 - s, -ds / w)
    }

    /// Temporal profile of the noise and the controls: a smooth rise on
    /// `[a, b]` times the cutoff; supported in `(a, c)`.
    pub fn profile(&self, t: f64) -> (f64, f64) {
        let w = self.b - self.a;
        let (r, dr) = smooth_step((t - self.a) / w);
        let (x, dx) = self.chi(t);
        (r * x, dr / w * x + r * dx)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub samples: usize,
    /// `sup |Phi| / d^alpha`.
    pub holder_constant: f64,
    /// `sup |D_eta Phi|` by finite differences.
    pub derivative_sup: f64,
    /// `sup d(S(u, eta), S(u', eta + Phi)) / d(u, u')`.
    pub contraction: f64,
    pub pass: bool,
}

/// Empirical check of the stabilisation contract on sample pairs and noise
/// realisations (realised coefficients).
pub fn verify_stabilisability(
    stab: &dyn Stabiliser,
    system: &dyn SystemMap,
    pairs: &[(Vec<f64>, Vec<f64>)],
    noise: &[Vec<f64>],
) -> Result<StabilityReport> {
    let consts = stab.constants();
    let nb = stab.block_dim();
    let mut holder: f64 = 0.0;
    let mut deriv: f64 = 0.0;
    let mut contraction: f64 = 0.0;
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for (k, (u, u2)) in pairs.iter().enumerate() {
        let a = &noise[k % noise.len()];
        let d = system.distance(u, u2);
        if d > consts.delta {
            return Err(Error::StabiliserDomain {
                distance: d,
                delta: consts.delta,
            });
        }
        let phi = stab.correction(u, u2, a)?;
        if phi.len() != nb {
            return Err(Error::InvalidInput("correction has the wrong block size".into()));
        }
        if d > 0.0 {
            holder = holder.max(norm(&phi) / d.powf(consts.alpha));
        }
        let h = 1e-5;
        for j in 0..nb.min(a.len()) {
            let mut ap = a.clone();
            ap[j] += h;
            let pp = stab.correction(u, u2, &ap)?;
            let diff: Vec<f64> = pp.iter().zip(&phi).map(|(x, y)| (x - y) / h).collect();
            deriv = deriv.max(norm(&diff));
        }
        let r = system.step(u, a)?;
        let r2 = system.step(u2, &corrected(a, &phi))?;
        let ratio = if d > 0.0 { system.distance(&r, &r2) / d } else { 0.0 };
        contraction = contraction.max(ratio);
    }
    Ok(StabilityReport {
        samples: pairs.len(),
        holder_constant: holder,
        derivative_sup: deriv,
        contraction,
        pass: contraction < 1.0,
    })
}
