//! Approximate controllability to a target state.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rds::SystemMap;
use crate::rng::RngState;

/// Admissible controls: a box of realised noise coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ControlBox {
    pub fn symmetric(amplitudes: &[f64]) -> Self {
        Self {
            lo: amplitudes.iter().map(|b| -b).collect(),
            hi: amplitudes.to_vec(),
        }
    }

    pub fn contains_zero(&self) -> bool {
        self.lo.iter().zip(&self.hi).all(|(l, h)| *l <= 0.0 && 0.0 <= *h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlRoute {
    ZeroControl,
    Shooting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllabilityReport {
    pub m: usize,
    pub route: ControlRoute,
    /// Worst distance to the target after `m` steps over the starts.
    pub worst_distance: f64,
    /// Per start, the control sequence found by shooting (empty for the
    /// zero-control route).
    pub controls: Vec<Vec<Vec<f64>>>,
}

fn run(system: &dyn SystemMap, u: &[f64], controls: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut u = u.to_vec();
    for a in controls {
        u = system.step(&u, a)?;
    }
    Ok(u)
}

/// Smallest `m <= max_m` after which every start is within `eps` of the
/// target. Tries the zero control first, then random shooting with `budget`
/// sequences per start and horizon.
pub fn approx_controllability_probe(
    system: &dyn SystemMap,
    controls: &ControlBox,
    target: &[f64],
    eps: f64,
    starts: &[Vec<f64>],
    max_m: usize,
    budget: usize,
    rng: RngState,
) -> Result<ControllabilityReport> {
    if controls.lo.len() != system.noise_dim() || controls.hi.len() != system.noise_dim() {
        return Err(Error::InvalidInput(
            "control box does not match the noise dimension".into(),
        ));
    }
    if !system.contains(target) {
        return Err(Error::InvalidInput("target lies outside the phase set".into()));
    }
    let worst = |us: &[Vec<f64>]| us.iter().map(|u| system.distance(u, target)).fold(0.0, f64::max);
    if controls.contains_zero() {
        let zero = vec![0.0; system.noise_dim()];
        let mut us: Vec<Vec<f64>> = starts.to_vec();
        for m in 0..=max_m {
            let w = worst(&us);
            if w <= eps {
                return Ok(ControllabilityReport {
                    m,
                    route: ControlRoute::ZeroControl,
                    worst_distance: w,
                    controls: Vec::new(),
                });
            }
            us = us.iter().map(|u| system.step(u, &zero)).collect::<Result<_>>()?;
        }
    }
    let mut g = rng.generator();
    for m in 1..=max_m {
        let mut found = Vec::with_capacity(starts.len());
        let mut w = 0.0f64;
        for u in starts {
            let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
            for _ in 0..budget {
                let seq: Vec<Vec<f64>> = (0..m)
                    .map(|_| {
                        controls
                            .lo
                            .iter()
                            .zip(&controls.hi)
                            .map(|(l, h)| g.random_range(*l..=*h))
                            .collect()
                    })
                    .collect();
                let d = system.distance(&run(system, u, &seq)?, target);
                if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                    best = Some((d, seq));
                }
                if d <= eps {
                    break;
                }
            }
            let Some((d, seq)) = best else { break };
            w = w.max(d);
            if d > eps {
                break;
            }
            found.push(seq);
        }
        if found.len() == starts.len() {
            return Ok(ControllabilityReport {
                m,
                route: ControlRoute::Shooting,
                worst_distance: w,
                controls: found,
            });
        }
    }
    Err(Error::Inconclusive(format!(
        "no control sequence of length <= {max_m} reached the target within {eps}"
    )))
}
