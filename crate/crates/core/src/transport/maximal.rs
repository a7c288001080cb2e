//! Maximal (gamma-) coupling of two densities.

use rand::{Rng, RngCore};

use super::density::{Density, Sampler};
use crate::error::{Error, Result};

/// Proposals allowed when sampling the residual law.
pub const REJECTION_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledDraw {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub coalesced: bool,
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::SingularMap(format!("{what} density is not finite")))
    }
}

/// Draws `(x, y)` with `x ~ p`, `y ~ q` and `P{x = y} = 1 - TV(p, q)`.
pub fn maximal_coupling_densities(
    p: &dyn Density,
    p_sampler: &dyn Sampler,
    q: &dyn Density,
    q_sampler: &dyn Sampler,
    rng: &mut dyn RngCore,
) -> Result<CoupledDraw> {
    let x = p_sampler.draw(rng);
    let px = finite(p.pdf(&x), "first")?;
    couple_at(x, px, p, q, q_sampler, rng)
}

/// Completes the coupling for an `x ~ p` already drawn, with `p(x)` known.
pub fn couple_at(
    x: Vec<f64>,
    px: f64,
    p: &dyn Density,
    q: &dyn Density,
    q_sampler: &dyn Sampler,
    rng: &mut dyn RngCore,
) -> Result<CoupledDraw> {
    let qx = finite(q.pdf(&x), "second")?;
    let u: f64 = rng.random();
    if u * px <= qx && qx > 0.0 {
        return Ok(CoupledDraw {
            y: x.clone(),
            x,
            coalesced: true,
        });
    }
    let y = residual_draw(p, q, q_sampler, rng)?;
    Ok(CoupledDraw { x, y, coalesced: false })
}

/// Sample of `(q - min(p, q))^+`, normalised, by thinning draws of `q`.
pub fn residual_draw(
    p: &dyn Density,
    q: &dyn Density,
    q_sampler: &dyn Sampler,
    rng: &mut dyn RngCore,
) -> Result<Vec<f64>> {
    for _ in 0..REJECTION_CAP {
        let y = q_sampler.draw(rng);
        let qy = finite(q.pdf(&y), "second")?;
        if qy <= 0.0 {
            continue;
        }
        let py = finite(p.pdf(&y), "first")?;
        let accept = 1.0 - py / qy;
        if accept > 0.0 && rng.random::<f64>() < accept {
            return Ok(y);
        }
    }
    Err(Error::RejectionCap(REJECTION_CAP))
}
