//! Random dynamical systems `u_k = S(u_{k-1}, eta_k)`.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::noise::{NoiseModel, NoiseVector};
use crate::par::{try_map_indexed, Exec};
use crate::rng::RngState;
use crate::state::{Norm, StateVector};
use crate::transport::DiscreteMeasure;

/// The map `S`. Noise enters through realised mode coefficients
/// `a_j = b_j xi_j`.
pub trait SystemMap: Send + Sync {
    fn state_dim(&self) -> usize;
    fn noise_dim(&self) -> usize;
    fn norm(&self) -> &Norm;

    /// Radius of the phase set `X` in the system norm.
    fn phase_radius(&self) -> f64;

    fn contains(&self, u: &[f64]) -> bool {
        self.norm().eval(u) <= self.phase_radius() * (1.0 + 1e-12)
    }

    /// A random point of `X`, when the system knows how to draw one.
    fn sample_phase(&self, _rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        None
    }

    fn step(&self, u: &[f64], a: &[f64]) -> Result<Vec<f64>>;

    /// Step together with observables recorded along the way (empty unless
    /// the system produces a path).
    fn step_with_path(&self, u: &[f64], a: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((self.step(u, a)?, Vec::new()))
    }

    fn distance(&self, u: &[f64], v: &[f64]) -> f64 {
        self.norm().distance(u, v)
    }
}

fn guard(out: Vec<f64>, step: usize) -> Result<Vec<f64>> {
    if let Some(i) = out.iter().position(|x| !x.is_finite()) {
        return Err(Error::Blowup {
            step,
            detail: format!("state entry {i} is {}", out[i]),
        });
    }
    Ok(out)
}

/// `S(u, eta)` with a finiteness check.
pub fn step(system: &dyn SystemMap, u: &StateVector, model: &NoiseModel, eta: &NoiseVector) -> Result<StateVector> {
    let out = guard(system.step(&u.coords, &model.realize(eta))?, 1)?;
    Ok(StateVector {
        coords: out,
        norm: u.norm.clone(),
    })
}

/// `u_0, ..., u_k` driven by i.i.d. noise from one stream.
pub fn simulate_trajectory(
    system: &dyn SystemMap,
    u0: &[f64],
    model: &NoiseModel,
    k: usize,
    rng: RngState,
) -> Result<Vec<Vec<f64>>> {
    let mut g = rng.generator();
    let mut out = Vec::with_capacity(k + 1);
    out.push(u0.to_vec());
    for i in 1..=k {
        let eta = model.sample(&mut g);
        let next = guard(system.step(&out[i - 1], &model.realize(&eta))?, i)?;
        out.push(next);
    }
    Ok(out)
}

/// Empirical law of `n` independent draws of `S(u, eta)`; member `i` uses
/// substream `i`.
pub fn transition_ensemble(
    system: &dyn SystemMap,
    u: &[f64],
    model: &NoiseModel,
    n: usize,
    rng: RngState,
    exec: Exec,
) -> Result<DiscreteMeasure> {
    if n == 0 {
        return Err(Error::InvalidInput("ensemble size must be positive".into()));
    }
    let pts = try_map_indexed(n, exec, |i| {
        let eta = model.sample_from(rng.substream(i as u64));
        guard(system.step(u, &model.realize(&eta))?, 1)
    })?;
    DiscreteMeasure::uniform(system.state_dim(), pts.concat())
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct CompactnessReport {
    pub samples: usize,
    pub max_norm: f64,
    pub radius: f64,
    pub violations: usize,
}

/// Samples `(u, eta)` in `X x K` and counts images leaving `X`.
pub fn compactness_guard(
    system: &dyn SystemMap,
    model: &NoiseModel,
    samples: usize,
    rng: RngState,
) -> Result<CompactnessReport> {
    let mut g = rng.generator();
    let mut max_norm: f64 = 0.0;
    let mut violations = 0;
    for _ in 0..samples {
        let u = system
            .sample_phase(&mut g)
            .ok_or_else(|| Error::InvalidInput("system cannot sample its phase set".into()))?;
        let eta = model.sample(&mut g);
        let v = guard(system.step(&u, &model.realize(&eta))?, 1)?;
        max_norm = max_norm.max(system.norm().eval(&v));
        if !system.contains(&v) {
            violations += 1;
        }
    }
    Ok(CompactnessReport {
        samples,
        max_norm,
        radius: system.phase_radius(),
        violations,
    })
}
