//! Exponential mixing estimated from the laws of an observable along
//! ensembles started at different initial conditions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::par::{try_map_indexed, Exec};
use crate::rds::SystemMap;
use crate::rng::RngState;
use crate::stats::linear_fit;
use crate::transport::{dual_lipschitz, DiscreteMeasure, MAX_ATOMS};

/// Maps a state and the path observables of the step that produced it to a
/// short feature vector.
pub type Observable = dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync;

/// Numerical floor of common-noise distances.
const CRN_FLOOR: f64 = 1e-10;
/// Bins per ensemble when one-dimensional laws are too large to compare atom
/// by atom.
const LINE_BINS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixMode {
    /// Ensembles drawn with independent noise.
    #[default]
    Independent,
    /// Member `j` of every ensemble sees the same noise sequence.
    CommonNoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingConfig {
    pub k_max: usize,
    /// Ensemble size per initial condition.
    pub n: usize,
    pub mode: MixMode,
    /// Lags enter the fit while the distance exceeds this multiple of the floor.
    pub floor_factor: f64,
    /// First lag of the fit.
    pub fit_from: usize,
    /// Compare against a pooled long-run law from lag `k_burn` on.
    pub stationary_burn: Option<usize>,
}

impl Default for MixingConfig {
    fn default() -> Self {
        Self {
            k_max: 12,
            n: 10_000,
            mode: MixMode::Independent,
            floor_factor: 3.0,
            fit_from: 1,
            stationary_burn: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagRow {
    pub k: usize,
    pub distance: f64,
    pub stderr: f64,
    pub floor: f64,
    pub stationary: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    pub rows: Vec<LagRow>,
    pub gamma: Option<f64>,
    /// Half-width of the 95% interval on `gamma`.
    pub gamma_ci: Option<f64>,
    pub c: Option<f64>,
    pub r2: Option<f64>,
    /// Lags used in the fit, inclusive.
    pub fit_range: Option<(usize, usize)>,
    pub conclusive: bool,
    pub note: String,
}

/// `obs[k][member]` for one initial condition.
type Paths = Vec<Vec<Vec<f64>>>;

fn run_ensemble(
    system: &dyn SystemMap,
    model: &NoiseModel,
    u0: &[f64],
    obs: &Observable,
    k_max: usize,
    n: usize,
    rng: RngState,
    exec: Exec,
) -> Result<Paths> {
    let members = try_map_indexed(n, exec, |j| {
        let mut g = rng.substream(j as u64).generator();
        let mut u = u0.to_vec();
        let mut out = Vec::with_capacity(k_max + 1);
        out.push(obs(&u, &[]));
        for k in 1..=k_max {
            let a = model.realize(&model.sample(&mut g));
            let (next, path) = system.step_with_path(&u, &a)?;
            if let Some(i) = next.iter().position(|x| !x.is_finite()) {
                return Err(Error::Blowup {
                    step: k,
                    detail: format!("member {j}, entry {i}"),
                });
            }
            u = next;
            out.push(obs(&u, &path));
        }
        Ok::<_, Error>(out)
    })?;
    Ok((0..=k_max)
        .map(|k| members.iter().map(|m| m[k].clone()).collect())
        .collect())
}

fn measure(samples: &[Vec<f64>]) -> Result<DiscreteMeasure> {
    let dim = samples.first().map_or(0, Vec::len);
    DiscreteMeasure::uniform(dim, samples.concat())
}

/// Distance between two empirical laws, binning one-dimensional laws onto a
/// shared grid when they are too large.
fn law_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    let (ma, mb) = (measure(a)?, measure(b)?);
    if ma.len() + mb.len() <= MAX_ATOMS {
        return dual_lipschitz(&ma, &mb);
    }
    if ma.dim() != 1 {
        return Err(Error::SupportTooLarge {
            atoms: ma.len() + mb.len(),
            limit: MAX_ATOMS,
        });
    }
    let (la, ha) = ma.bounds();
    let (lb, hb) = mb.bounds();
    let lo = [la[0].min(lb[0])];
    let hi = [ha[0].max(hb[0]) + 1e-12];
    dual_lipschitz(&ma.binned(&lo, &hi, LINE_BINS)?, &mb.binned(&lo, &hi, LINE_BINS)?)
}

fn halves(xs: &[Vec<f64>]) -> (&[Vec<f64>], &[Vec<f64>]) {
    xs.split_at(xs.len() / 2)
}

/// Runs one ensemble per initial condition (the first two are compared) and
/// fits `log d_k = log C - gamma k` on the lags above the sampling floor.
pub fn mixing_rate(
    system: &dyn SystemMap,
    model: &NoiseModel,
    u0_list: &[Vec<f64>],
    obs: &Observable,
    cfg: &MixingConfig,
    rng: RngState,
    exec: Exec,
) -> Result<MixingReport> {
    if u0_list.len() < 2 {
        return Err(Error::InvalidInput("need two initial conditions".into()));
    }
    if cfg.n < 4 {
        return Err(Error::InvalidInput("ensemble size must be at least 4".into()));
    }
    let stream = |i: u64| match cfg.mode {
        MixMode::Independent => rng.substream(i),
        MixMode::CommonNoise => rng.substream(0),
    };
    let a = run_ensemble(system, model, &u0_list[0], obs, cfg.k_max, cfg.n, stream(0), exec)?;
    let b = run_ensemble(system, model, &u0_list[1], obs, cfg.k_max, cfg.n, stream(1), exec)?;
    let pooled = match cfg.stationary_burn {
        Some(burn) if burn <= cfg.k_max => {
            // Independent third ensemble, thinned so the pooled law has `n` atoms.
            let c = run_ensemble(
                system,
                model,
                &u0_list[0],
                obs,
                cfg.k_max,
                cfg.n,
                rng.substream(2),
                exec,
            )?;
            let lags = cfg.k_max - burn + 1;
            let all: Vec<Vec<f64>> = c[burn..].iter().flatten().cloned().collect();
            Some(all.into_iter().step_by(lags).collect::<Vec<_>>())
        }
        Some(_) => return Err(Error::Config("burn-in exceeds the last lag".into())),
        None => None,
    };

    let rows = try_map_indexed(cfg.k_max + 1, exec, |k| {
        let distance = law_distance(&a[k], &b[k])?;
        let (a1, a2) = halves(&a[k]);
        let (b1, b2) = halves(&b[k]);
        let (floor, stderr) = match cfg.mode {
            MixMode::Independent => {
                let f = 0.5 * (law_distance(a1, a2)? + law_distance(b1, b2)?) / 2f64.sqrt();
                (f, f)
            }
            MixMode::CommonNoise => {
                let spread = (law_distance(a1, b1)? - law_distance(a2, b2)?).abs();
                (CRN_FLOOR, 0.5 * spread)
            }
        };
        let stationary = match &pooled {
            Some(p) => Some(law_distance(&a[k], p)?),
            None => None,
        };
        Ok::<_, Error>(LagRow {
            k,
            distance,
            stderr,
            floor,
            stationary,
        })
    })?;

    let fit_rows: Vec<LagRow> = rows
        .iter()
        .skip(cfg.fit_from)
        .take_while(|r| r.distance > cfg.floor_factor * r.floor && r.distance > 0.0)
        .cloned()
        .collect();
    if fit_rows.len() < 3 {
        return Ok(MixingReport {
            rows,
            gamma: None,
            gamma_ci: None,
            c: None,
            r2: None,
            fit_range: None,
            conclusive: false,
            note: format!(
                "floor-limited: only {} lag(s) above {}x the sampling floor",
                fit_rows.len(),
                cfg.floor_factor
            ),
        });
    }
    let ks: Vec<f64> = fit_rows.iter().map(|r| r.k as f64).collect();
    let ls: Vec<f64> = fit_rows.iter().map(|r| r.distance.ln()).collect();
    let fit = linear_fit(&ks, &ls)?;
    let range = (fit_rows[0].k, fit_rows[fit_rows.len() - 1].k);
    Ok(MixingReport {
        gamma: Some(-fit.slope),
        gamma_ci: Some(1.96 * fit.slope_se),
        c: Some(fit.intercept.exp()),
        r2: Some(fit.r2),
        fit_range: Some(range),
        conclusive: true,
        note: format!("fit over lags {}..={}", range.0, range.1),
        rows,
    })
}
