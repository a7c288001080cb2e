//! Dissipativity diagnostics for the time-one map: unforced decay of the
//! `H^1` norm and bounds along forced trajectories.

use ctrlmix_core::par::{try_map_indexed, Exec};
use ctrlmix_core::stats::linear_fit;
use ctrlmix_core::{Error, NoiseModel, Result, RngState, SystemMap};
use serde::{Deserialize, Serialize};

use crate::solver::{stokes_like_mode, to_state};
use crate::system::NsSystem;

/// Norms below this fraction of the initial one are round-off and excluded
/// from the fit.
const DECAY_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// `|S_k(u0, 0)|_1` for `k = 0..=k_max`.
    pub norms: Vec<f64>,
    /// `|S_k|_1 ~ c9 exp(-alpha k)`.
    pub alpha: f64,
    pub c9: f64,
    pub r2: f64,
    /// Lags that entered the fit.
    pub fit_lags: usize,
}

impl DecayFit {
    /// Smallest `m` with `c9 exp(-alpha m) <= eps`.
    pub fn steps_to(&self, eps: f64) -> usize {
        if self.c9 <= eps {
            return 0;
        }
        ((self.c9 / eps).ln() / self.alpha).ceil() as usize
    }
}

/// The Stokes-like mode scaled to `|u|_1 = h1`, as a state.
pub fn scaled_mode(sys: &NsSystem, h1: f64) -> Result<Vec<f64>> {
    let u = to_state(&stokes_like_mode(sys.dom()));
    if h1 == 0.0 {
        // Avoid signed zeros from scaling negative entries.
        return Ok(vec![0.0; u.len()]);
    }
    let n = sys.h1_norm(&u)?;
    Ok(u.iter().map(|x| x * h1 / n).collect())
}

/// Iterates `S(., 0)` from `u0` and fits `log |S_k|_1` linearly in `k`.
pub fn decay_probe(sys: &NsSystem, u0: &[f64], k_max: usize) -> Result<DecayFit> {
    let zero = vec![0.0; sys.noise_dim()];
    let mut u = u0.to_vec();
    let mut norms = vec![sys.h1_norm(&u)?];
    for _ in 0..k_max {
        u = sys.step(&u, &zero)?;
        norms.push(sys.h1_norm(&u)?);
    }
    let floor = DECAY_FLOOR * norms[0];
    let kept: Vec<(f64, f64)> = norms
        .iter()
        .enumerate()
        .take_while(|(_, x)| **x > floor)
        .map(|(k, x)| (k as f64, x.ln()))
        .collect();
    if kept.len() < 3 {
        return Err(Error::Inconclusive(format!(
            "only {} lags above the round-off floor",
            kept.len()
        )));
    }
    let (ks, ys): (Vec<f64>, Vec<f64>) = kept.into_iter().unzip();
    let fit = linear_fit(&ks, &ys)?;
    Ok(DecayFit {
        norms,
        alpha: -fit.slope,
        c9: fit.intercept.exp(),
        r2: fit.r2,
        fit_lags: fit.points,
    })
}

/// Measured vs predicted time to enter the absorbing ball from far away.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryCheck {
    pub initial_norm: f64,
    /// `|u0|_1 / R`.
    pub r: f64,
    /// `ln(r + 1) / alpha`.
    pub predicted: f64,
    /// First integer time with `|u_k|_1 <= R`.
    pub measured: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipativityReport {
    pub alpha: f64,
    /// Smallest `C1` with `|u_k|_1 <= C1 (exp(-alpha k) |u0|_1 + 1)` on all
    /// samples.
    pub c1: f64,
    /// `R = 2 C1`.
    pub absorbing_radius: f64,
    /// `sup_k |u_k|_1` per trajectory.
    pub sup_norms: Vec<f64>,
    pub k_max: usize,
    pub entry: Option<EntryCheck>,
}

impl DissipativityReport {
    pub fn sup_norm(&self) -> f64 {
        self.sup_norms.iter().cloned().fold(0.0, f64::max)
    }

    /// `ln(r + 1) / alpha`.
    pub fn entry_time(&self, r: f64) -> f64 {
        (r + 1.0).ln() / self.alpha
    }
}

fn trajectory_norms(sys: &NsSystem, model: &NoiseModel, u0: &[f64], k_max: usize, rng: RngState) -> Result<Vec<f64>> {
    let mut g = rng.generator();
    let mut u = u0.to_vec();
    let mut out = vec![sys.h1_norm(&u)?];
    for _ in 0..k_max {
        let eta = model.sample(&mut g);
        u = sys.step(&u, &model.realize(&eta))?;
        out.push(sys.h1_norm(&u)?);
    }
    Ok(out)
}

/// Forced trajectories from each start (`per_start` each, independent
/// streams), with `alpha` taken from an unforced [`decay_probe`].
#[allow(clippy::too_many_arguments)]
pub fn dissipativity_probe(
    sys: &NsSystem,
    model: &NoiseModel,
    starts: &[Vec<f64>],
    per_start: usize,
    k_max: usize,
    alpha: f64,
    rng: RngState,
    exec: Exec,
) -> Result<DissipativityReport> {
    if !(alpha > 0.0) {
        return Err(Error::Inconclusive(format!(
            "decay rate {alpha} is not positive; not dissipative here"
        )));
    }
    if starts.is_empty() || per_start == 0 {
        return Err(Error::InvalidInput("no trajectories requested".into()));
    }
    let total = starts.len() * per_start;
    let paths = try_map_indexed(total, exec, |i| {
        trajectory_norms(sys, model, &starts[i / per_start], k_max, rng.substream(i as u64))
    })?;
    let mut c1: f64 = 0.0;
    for p in &paths {
        for (k, x) in p.iter().enumerate() {
            c1 = c1.max(x / ((-alpha * k as f64).exp() * p[0] + 1.0));
        }
    }
    Ok(DissipativityReport {
        alpha,
        c1,
        absorbing_radius: 2.0 * c1,
        sup_norms: paths.iter().map(|p| p.iter().cloned().fold(0.0, f64::max)).collect(),
        k_max,
        entry: None,
    })
}

/// Starts at `scale` times the absorbing radius and records when the forced
/// trajectory first enters the ball.
pub fn entry_check(
    sys: &NsSystem,
    model: &NoiseModel,
    report: &DissipativityReport,
    scale: f64,
    k_max: usize,
    rng: RngState,
) -> Result<EntryCheck> {
    let radius = report.absorbing_radius;
    let u0 = scaled_mode(sys, scale * radius)?;
    let norms = trajectory_norms(sys, model, &u0, k_max, rng)?;
    let r = norms[0] / radius;
    Ok(EntryCheck {
        initial_norm: norms[0],
        r,
        predicted: report.entry_time(r),
        measured: norms.iter().position(|x| *x <= radius),
    })
}
