use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::par::{try_map_indexed, Exec};
use crate::rds::SystemMap;
use crate::rng::RngState;
use crate::stabiliser::Stabiliser;
use crate::transport::density::{Density, ProductDensity};
use crate::transport::maximal::couple_at;
use crate::transport::shift::{Pushforward, ShiftMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingConfig {
    /// Radius of the diagonal neighbourhood `B = {d(u, u') <= delta}`.
    pub delta: f64,
    /// Target contraction, `q < r < 1`.
    pub r: f64,
    /// Contraction of the stabiliser.
    pub q: f64,
    pub alpha: f64,
    /// Steps followed by the recurrence and squeezing verifiers.
    pub horizon: usize,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self {
            delta: 0.2,
            r: 0.7,
            q: 0.5,
            alpha: 1.0,
            horizon: 50,
        }
    }
}

impl CouplingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::Config(format!("delta must be positive, got {}", self.delta)));
        }
        if !(0.0 < self.q && self.q < self.r && self.r < 1.0) {
            return Err(Error::Config(format!(
                "need 0 < q < r < 1, got q = {}, r = {}",
                self.q, self.r
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Off the diagonal neighbourhood: independent noises.
    Independent,
    /// On it, and the maximal coupling made the corrected noise coincide.
    Coalesced,
    /// On it, but the second noise came from the residual law.
    Residual,
}

/// How the builder treats pairs; the non-standard modes serve as controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    #[default]
    Standard,
    AlwaysIndependent,
    /// Same noise on both sides everywhere (dependent by construction).
    Synchronized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairDraw {
    pub r: Vec<f64>,
    pub r2: Vec<f64>,
    pub regime: Regime,
}

pub struct PairBuilder<'a> {
    pub system: &'a dyn SystemMap,
    pub model: &'a NoiseModel,
    pub stabiliser: Option<Arc<dyn Stabiliser>>,
    pub cfg: CouplingConfig,
    pub mode: PairMode,
    block: Arc<ProductDensity>,
}

impl<'a> PairBuilder<'a> {
    pub fn new(
        system: &'a dyn SystemMap,
        model: &'a NoiseModel,
        stabiliser: Option<Arc<dyn Stabiliser>>,
        cfg: CouplingConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if model.dim() != system.noise_dim() {
            return Err(Error::Config(format!(
                "noise model has {} modes, system expects {}",
                model.dim(),
                system.noise_dim()
            )));
        }
        let n = stabiliser.as_ref().map_or(0, |s| s.block_dim());
        if n > model.dim() {
            return Err(Error::Config("stabiliser block exceeds the noise dimension".into()));
        }
        if model.amplitudes()[..n].iter().any(|&b| b <= 0.0) {
            return Err(Error::Config("stabiliser block needs positive amplitudes".into()));
        }
        let block = Arc::new(ProductDensity::new(model.densities()[..n].to_vec())?);
        Ok(Self {
            system,
            model,
            stabiliser,
            cfg,
            mode: PairMode::Standard,
            block,
        })
    }

    pub fn with_mode(mut self, mode: PairMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn distance(&self, u: &[f64], u2: &[f64]) -> f64 {
        self.system.distance(u, u2)
    }

    /// One draw of `(R(u, u'), R'(u, u'))`.
    pub fn draw(&self, u: &[f64], u2: &[f64], rng: RngState) -> Result<PairDraw> {
        let d = self.distance(u, u2);
        let on_diag = d <= self.cfg.delta;
        match self.mode {
            PairMode::Synchronized => {
                let a = self.model.realize(&self.model.sample_from(rng.substream(0)));
                return Ok(PairDraw {
                    r: self.system.step(u, &a)?,
                    r2: self.system.step(u2, &a)?,
                    regime: Regime::Coalesced,
                });
            }
            PairMode::AlwaysIndependent => return self.independent(u, u2, rng),
            PairMode::Standard if !on_diag => return self.independent(u, u2, rng),
            PairMode::Standard => {}
        }
        let Some(stab) = &self.stabiliser else {
            // No correction: the identity shift always coalesces.
            let a = self.model.realize(&self.model.sample_from(rng.substream(0)));
            return Ok(PairDraw {
                r: self.system.step(u, &a)?,
                r2: self.system.step(u2, &a)?,
                regime: Regime::Coalesced,
            });
        };
        let consts = stab.constants();
        if d > consts.delta {
            return Err(Error::StabiliserDomain {
                distance: d,
                delta: consts.delta,
            });
        }
        let mut g = rng.substream(0).generator();
        let xi = self.model.sample(&mut g).xi;
        let n = stab.block_dim();
        let amps: Arc<[f64]> = self.model.amplitudes().into();
        let rest: Arc<[f64]> = xi[n..].into();
        let realize = {
            let (amps, rest) = (amps.clone(), rest.clone());
            move |zeta: &[f64]| -> Vec<f64> {
                zeta.iter()
                    .chain(rest.iter())
                    .zip(amps.iter())
                    .map(|(x, b)| x * b)
                    .collect()
            }
        };
        // Correction expressed in the coefficients of the block.
        let phi_xi = {
            let (u, u2): (Arc<[f64]>, Arc<[f64]>) = (u.into(), u2.into());
            let stab = stab.clone();
            let realize = realize.clone();
            let amps = amps.clone();
            move |zeta: &[f64]| -> Vec<f64> {
                match stab.correction(&u, &u2, &realize(zeta)) {
                    Ok(phi) => phi.iter().zip(amps.iter()).map(|(p, b)| p / b).collect(),
                    Err(_) => vec![f64::NAN; zeta.len()],
                }
            }
        };
        let zeta = xi[..n].to_vec();
        let shift_here = phi_xi(&zeta);
        if shift_here.iter().any(|v| !v.is_finite()) {
            stab.correction(u, u2, &realize(&zeta))?;
            return Err(Error::SingularMap("stabiliser returned a non-finite correction".into()));
        }
        let x: Vec<f64> = zeta.iter().zip(&shift_here).map(|(a, b)| a + b).collect();
        let shift = ShiftMap::new(n, consts.c * d.powf(consts.alpha), Arc::new(phi_xi));
        let push = Pushforward::unchecked(self.block.clone() as Arc<dyn Density>, shift);
        let px = push.pdf_at_preimage(&zeta);
        let draw = couple_at(x, px, &push, self.block.as_ref(), self.block.as_ref(), &mut g)?;
        let a = realize(&zeta);
        let a2 = realize(&draw.y);
        Ok(PairDraw {
            r: self.system.step(u, &a)?,
            r2: self.system.step(u2, &a2)?,
            regime: if draw.coalesced {
                Regime::Coalesced
            } else {
                Regime::Residual
            },
        })
    }

    fn independent(&self, u: &[f64], u2: &[f64], rng: RngState) -> Result<PairDraw> {
        let a = self.model.realize(&self.model.sample_from(rng.substream(0)));
        let a2 = self.model.realize(&self.model.sample_from(rng.substream(1)));
        Ok(PairDraw {
            r: self.system.step(u, &a)?,
            r2: self.system.step(u2, &a2)?,
            regime: Regime::Independent,
        })
    }

    /// `(R_j, R'_j)` for `j = 0..=k` with fresh randomness per step.
    pub fn extension_chain(&self, u: &[f64], u2: &[f64], k: usize, rng: RngState) -> Result<Vec<PairDraw>> {
        let mut out = Vec::with_capacity(k + 1);
        out.push(PairDraw {
            r: u.to_vec(),
            r2: u2.to_vec(),
            regime: Regime::Independent,
        });
        for j in 1..=k {
            let prev = &out[j - 1];
            let next = self.draw(&prev.r, &prev.r2, rng.substream(j as u64))?;
            out.push(next);
        }
        Ok(out)
    }

    /// Many chains in parallel, chain `i` on substream `i`.
    pub fn chains(
        &self,
        starts: &[(Vec<f64>, Vec<f64>)],
        k: usize,
        rng: RngState,
        exec: Exec,
    ) -> Result<Vec<Vec<PairDraw>>> {
        try_map_indexed(starts.len(), exec, |i| {
            let (u, u2) = &starts[i];
            self.extension_chain(u, u2, k, rng.substream(i as u64))
        })
    }
}
