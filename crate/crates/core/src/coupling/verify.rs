//! Recurrence, squeezing and conditional-independence checks on ensembles of
//! coupled chains.

use serde::{Deserialize, Serialize};

use super::pair::{PairBuilder, PairDraw};
use crate::error::{Error, Result};
use crate::par::{try_map_indexed, Exec};
use crate::rng::RngState;
use crate::stats::{bin_index, chi_square_independence, fit_through_origin, linear_fit, quantile_edges, ChiSquareTest};

/// Survivor count below which a lag is left out of the survival fit.
const MIN_SURVIVORS: usize = 30;
/// Fraction of never-hitting chains above which the fit is inconclusive.
const MAX_NEVER_HIT: f64 = 0.05;
/// Ratio of late to early squeezing failures above which the horizon is
/// considered too short.
const MAX_LATE_FAILURES: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingReport {
    pub chains: usize,
    pub never_hit_fraction: f64,
    /// Decay rate of `P{tau > k}`; `None` when there is nothing to fit.
    pub beta: Option<f64>,
    pub survival_r2: Option<f64>,
    /// `E exp(beta tau / 2)`.
    pub c1: f64,
    /// Median hitting time and `P{tau <= m}` there.
    pub m: usize,
    pub p: f64,
    pub conclusive: bool,
}

/// First index at which each chain lies within `delta`; `None` if never.
pub fn hitting_times(builder: &PairBuilder<'_>, chains: &[Vec<PairDraw>]) -> Vec<Option<usize>> {
    chains
        .iter()
        .map(|c| {
            c.iter()
                .position(|d| builder.distance(&d.r, &d.r2) <= builder.cfg.delta)
        })
        .collect()
}

pub fn hitting_time_stats(taus: &[Option<usize>]) -> Result<HittingReport> {
    let n = taus.len();
    if n == 0 {
        return Err(Error::InvalidInput("no chains".into()));
    }
    let never = taus.iter().filter(|t| t.is_none()).count() as f64 / n as f64;
    let horizon = taus.iter().flatten().copied().max().unwrap_or(0);
    let (mut ks, mut ls) = (Vec::new(), Vec::new());
    for k in 0..=horizon {
        let surv = taus.iter().filter(|t| t.is_none_or(|t| t > k)).count();
        if surv < MIN_SURVIVORS {
            break;
        }
        ks.push(k as f64);
        ls.push((surv as f64 / n as f64).ln());
    }
    let (beta, r2) = if ks.len() >= 2 {
        let fit = linear_fit(&ks, &ls)?;
        (Some(-fit.slope), Some(fit.r2))
    } else {
        (None, None)
    };
    let hit: Vec<usize> = taus.iter().flatten().copied().collect();
    let c1 = match beta {
        Some(b) if b > 0.0 && !hit.is_empty() => {
            hit.iter().map(|&t| (0.5 * b * t as f64).exp()).sum::<f64>() / hit.len() as f64
        }
        _ => 1.0,
    };
    let mut sorted = hit.clone();
    sorted.sort_unstable();
    let m = sorted.get(sorted.len().saturating_sub(1) / 2).copied().unwrap_or(0);
    let p = taus.iter().filter(|t| t.is_some_and(|t| t <= m)).count() as f64 / n as f64;
    let conclusive = never <= MAX_NEVER_HIT && beta.is_none_or(|b| b.is_finite());
    Ok(HittingReport {
        chains: n,
        never_hit_fraction: never,
        beta,
        survival_r2: r2,
        c1,
        m,
        p,
        conclusive,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqueezingReport {
    pub chains: usize,
    pub horizon: usize,
    /// Chains that never left the shrinking tube, censored at the horizon.
    pub p_infinite: f64,
    pub p_infinite_stderr: f64,
    pub delta2: f64,
    /// `E exp(delta2 sigma) 1{sigma < inf}`.
    pub moment: f64,
    /// `P{H/2 < sigma <= H} / P{sigma > H/2}`: the share of chains still in
    /// the tube at mid-horizon that fail later.
    pub late_failure_ratio: f64,
    pub conclusive: bool,
}

pub fn squeezing_from_sigmas(sigmas: &[Option<usize>], horizon: usize, alpha: f64, r: f64) -> Result<SqueezingReport> {
    let n = sigmas.len();
    if n == 0 {
        return Err(Error::InvalidInput("no chains".into()));
    }
    let nf = n as f64;
    let p_inf = sigmas.iter().filter(|s| s.is_none()).count() as f64 / nf;
    let delta2 = 0.5 * alpha * (1.0 / r).ln();
    let moment = sigmas.iter().flatten().map(|&s| (delta2 * s as f64).exp()).sum::<f64>() / nf;
    let half = horizon / 2;
    let alive_half = sigmas.iter().filter(|s| s.is_none_or(|s| s > half)).count();
    let late = sigmas.iter().filter(|s| s.is_some_and(|s| s > half)).count();
    let late_ratio = if alive_half == 0 {
        1.0
    } else {
        late as f64 / alive_half as f64
    };
    Ok(SqueezingReport {
        chains: n,
        horizon,
        p_infinite: p_inf,
        p_infinite_stderr: (p_inf * (1.0 - p_inf) / nf).sqrt(),
        delta2,
        moment,
        late_failure_ratio: late_ratio,
        conclusive: late_ratio <= MAX_LATE_FAILURES && moment.is_finite(),
    })
}

/// First `k` with `d(R_k, R'_k) > r^k delta` along each chain started in the
/// diagonal neighbourhood.
pub fn squeezing_stats(
    builder: &PairBuilder<'_>,
    starts: &[(Vec<f64>, Vec<f64>)],
    horizon: usize,
    rng: RngState,
    exec: Exec,
) -> Result<SqueezingReport> {
    let cfg = builder.cfg;
    if let Some((u, u2)) = starts.iter().find(|(u, u2)| builder.distance(u, u2) > cfg.delta) {
        return Err(Error::StabiliserDomain {
            distance: builder.distance(u, u2),
            delta: cfg.delta,
        });
    }
    let sigmas = try_map_indexed(starts.len(), exec, |i| {
        let (u, u2) = &starts[i];
        let chain_rng = rng.substream(i as u64);
        let (mut a, mut b) = (u.clone(), u2.clone());
        let mut tube = cfg.delta;
        for k in 1..=horizon {
            let d = builder.draw(&a, &b, chain_rng.substream(k as u64))?;
            tube *= cfg.r;
            if builder.distance(&d.r, &d.r2) > tube {
                return Ok(Some(k));
            }
            (a, b) = (d.r, d.r2);
        }
        Ok::<_, Error>(None)
    })?;
    squeezing_from_sigmas(&sigmas, horizon, cfg.alpha, cfg.r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionRow {
    pub distance: f64,
    pub chains: usize,
    /// `P{d(R_j, R'_j) <= r^j d(u, u') for all j <= horizon}`.
    pub p_all: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    pub horizon: usize,
    pub rows: Vec<ContractionRow>,
    /// Least-squares `C1` in `1 - p = C1 d^alpha` across all rows.
    pub c1: f64,
    /// Every row satisfies `p >= 1 - C1 d^alpha - 3 stderr`.
    pub pass: bool,
}

/// All-lag contraction probability along extension chains started at each
/// pair, with one constant `C1` fitted across the starting distances.
pub fn contraction_probability(
    builder: &PairBuilder<'_>,
    pairs: &[(Vec<f64>, Vec<f64>)],
    chains: usize,
    horizon: usize,
    rng: RngState,
    exec: Exec,
) -> Result<ContractionReport> {
    let cfg = builder.cfg;
    if chains == 0 || pairs.is_empty() {
        return Err(Error::InvalidInput("no chains requested".into()));
    }
    let mut rows = Vec::with_capacity(pairs.len());
    for (p, (u, u2)) in pairs.iter().enumerate() {
        let d0 = builder.distance(u, u2);
        if !(d0 > 0.0) {
            return Err(Error::InvalidInput("contraction needs distinct starts".into()));
        }
        let stream = rng.substream(p as u64);
        let ok = try_map_indexed(chains, exec, |i| {
            let chain_rng = stream.substream(i as u64);
            let (mut a, mut b) = (u.clone(), u2.clone());
            let mut tube = d0;
            for k in 1..=horizon {
                let d = builder.draw(&a, &b, chain_rng.substream(k as u64))?;
                tube *= cfg.r;
                if builder.distance(&d.r, &d.r2) > tube {
                    return Ok(false);
                }
                (a, b) = (d.r, d.r2);
            }
            Ok::<_, Error>(true)
        })?;
        let n = chains as f64;
        let p_all = ok.iter().filter(|x| **x).count() as f64 / n;
        rows.push(ContractionRow {
            distance: d0,
            chains,
            p_all,
            stderr: (p_all * (1.0 - p_all) / n).sqrt(),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.distance.powf(cfg.alpha)).collect();
    let ys: Vec<f64> = rows.iter().map(|r| 1.0 - r.p_all).collect();
    let c1 = fit_through_origin(&xs, &ys).max(0.0);
    let pass = rows
        .iter()
        .zip(&xs)
        .all(|(r, x)| r.p_all >= 1.0 - c1 * x - 3.0 * r.stderr - 1e-12);
    Ok(ContractionReport {
        horizon,
        rows,
        c1,
        pass,
    })
}

/// Chi-square test of independence between binned first coordinates of
/// `R_m` and `R'_m` over the chains that have not entered the diagonal
/// neighbourhood before step `m`.
pub fn independence_on_tm_test(
    builder: &PairBuilder<'_>,
    chains: &[Vec<PairDraw>],
    m: usize,
    bins: usize,
) -> Result<ChiSquareTest> {
    if m == 0 {
        return Ok(ChiSquareTest {
            statistic: 0.0,
            dof: 0,
            p_value: 1.0,
        });
    }
    let bins = bins.max(2);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for c in chains {
        if c.len() <= m {
            return Err(Error::InvalidInput(format!(
                "chain of length {} has no step {m}",
                c.len()
            )));
        }
        if c[..m].iter().all(|d| builder.distance(&d.r, &d.r2) > builder.cfg.delta) {
            xs.push(c[m].r[0]);
            ys.push(c[m].r2[0]);
        }
    }
    let needed = 5 * bins * bins;
    if xs.len() < needed {
        return Err(Error::Inconclusive(format!(
            "only {} chains stay off the diagonal until step {m}; need {needed}",
            xs.len()
        )));
    }
    let (ex, ey) = (quantile_edges(&xs, bins), quantile_edges(&ys, bins));
    let mut table = vec![vec![0.0; bins]; bins];
    for (x, y) in xs.iter().zip(&ys) {
        table[bin_index(&ex, *x)][bin_index(&ey, *y)] += 1.0;
    }
    chi_square_independence(&table)
}
