//! Verification suites. Each check compares a fast routine against an
//! independent slow computation or a structural property, and records the
//! numbers it saw.

use std::sync::Arc;
use std::time::Instant;

use ctrlmix_core::coupling::{
    contraction_probability, hitting_time_stats, hitting_times, squeezing_stats, CouplingConfig, PairBuilder,
};
use ctrlmix_core::par::try_map_indexed;
use ctrlmix_core::stabiliser::{verify_stabilisability, Stabiliser};
use ctrlmix_core::toybench::{brute_force_bl_distance_1d, brute_force_transport_cost, ToySystem};
use ctrlmix_core::transport::{
    dual_lipschitz, maximal_coupling_densities, transport_cost, verify_shift_tv_bound, Density, DiscreteMeasure,
    GridSpec, ProductDensity, ShiftMap, UniformBox,
};
use ctrlmix_core::{Error, Exec, ModeDensity, NoiseModel, Result, RngState, SystemMap};
use ctrlmix_ns2d::extension::trace_error;
use ctrlmix_ns2d::feedback::{FeedbackConfig, NsFeedback};
use ctrlmix_ns2d::hopf::hopf_ratios;
use ctrlmix_ns2d::probe::{decay_probe, scaled_mode};
use ctrlmix_ns2d::solver::{stokes_like_mode, summarize_audit, RunOptions};
use ctrlmix_ns2d::{extend_boundary_field, BoundaryNoise, NsParams, NsSolver, NsSystem, SquareDomain};
use rand::{Rng, RngCore};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: Value,
}

impl Check {
    fn new(name: &str, pass: bool, detail: Value) -> Self {
        Self {
            name: name.into(),
            pass,
            detail,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub suite: String,
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl Verdict {
    pub fn new(suite: &str, checks: Vec<Check>) -> Self {
        Self {
            suite: suite.into(),
            pass: checks.iter().all(|c| c.pass),
            checks,
        }
    }
}

fn random_measure(g: &mut dyn RngCore, dim: usize, max_atoms: usize, spread: f64) -> Result<DiscreteMeasure> {
    let n = g.random_range(1..=max_atoms);
    let pts: Vec<f64> = (0..n * dim).map(|_| g.random_range(-spread..spread)).collect();
    let w: Vec<f64> = (0..n).map(|_| g.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    DiscreteMeasure::new(dim, pts, w.iter().map(|x| x / s).collect())
}

// ---------------------------------------------------------------- transport

/// Threshold cost against vertex enumeration on small random instances.
pub fn transport_cost_oracle(instances: usize, seed: u64) -> Result<Check> {
    let start = Instant::now();
    let mut g = RngState::new(seed).generator();
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let dim = g.random_range(1..=2);
        let a = random_measure(&mut g, dim, 4, 1.0)?;
        let b = random_measure(&mut g, dim, 4, 1.0)?;
        let eps = g.random_range(0.05..1.5);
        worst = worst.max((transport_cost(&a, &b, eps)? - brute_force_transport_cost(&a, &b, eps)?).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(Check::new(
        "transport cost = vertex enumeration",
        worst <= 1e-9 && secs < 10.0,
        json!({ "instances": instances, "max_abs_error": worst, "seconds": secs }),
    ))
}

/// Dual-Lipschitz distance against an exhaustive grid search in 1-D.
pub fn dual_lipschitz_oracle(instances: usize, seed: u64) -> Result<Check> {
    let mut g = RngState::new(seed).generator();
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let a = random_measure(&mut g, 1, 5, 1.5)?;
        let b = random_measure(&mut g, 1, 5, 1.5)?;
        worst = worst.max((dual_lipschitz(&a, &b)? - brute_force_bl_distance_1d(&a, &b)?).abs());
    }
    Ok(Check::new(
        "dual-Lipschitz = grid search",
        worst <= 1.5e-2,
        json!({ "instances": instances, "max_abs_error": worst, "tolerance": 1.5e-2 }),
    ))
}

/// Symmetry, identity and triangle inequality on random triples.
pub fn metric_axioms(triples: usize, seed: u64) -> Result<Check> {
    let mut g = RngState::new(seed).generator();
    let (mut asym, mut self_d, mut triangle): (f64, f64, f64) = (0.0, 0.0, f64::NEG_INFINITY);
    for _ in 0..triples {
        let dim = g.random_range(1..=2);
        let m = [
            random_measure(&mut g, dim, 5, 1.5)?,
            random_measure(&mut g, dim, 5, 1.5)?,
            random_measure(&mut g, dim, 5, 1.5)?,
        ];
        let d = |i: usize, j: usize| dual_lipschitz(&m[i], &m[j]);
        asym = asym.max((d(0, 1)? - d(1, 0)?).abs());
        self_d = self_d.max(d(0, 0)?.abs());
        triangle = triangle.max(d(0, 2)? - d(0, 1)? - d(1, 2)?);
    }
    Ok(Check::new(
        "dual-Lipschitz metric axioms",
        asym <= 1e-9 && self_d <= 1e-12 && triangle <= 1e-7,
        json!({ "triples": triples, "max_asymmetry": asym, "max_self_distance": self_d, "max_triangle_excess": triangle }),
    ))
}

/// Coalescence frequency of the maximal coupling against `1 - TV` for
/// uniform laws with known overlap.
pub fn coalescence_frequency(draws: usize, seed: u64) -> Result<Check> {
    let base = UniformBox::interval(0.0, 1.0);
    let cases = [
        (0.0, 1.0, 0.0),
        (0.3, 1.3, 0.3),
        (0.0, 2.0, 0.5),
        (0.9, 1.9, 0.9),
        (2.0, 3.0, 1.0),
    ];
    let mut rows = Vec::new();
    let mut pass = true;
    for (k, (a, b, tv)) in cases.into_iter().enumerate() {
        let q = UniformBox::interval(a, b);
        let mut g = RngState::new(seed).substream(k as u64).generator();
        let mut hits = 0usize;
        for _ in 0..draws {
            if maximal_coupling_densities(&base, &base, &q, &q, &mut g)?.coalesced {
                hits += 1;
            }
        }
        let freq = hits as f64 / draws as f64;
        let se = (tv * (1.0 - tv) / draws as f64).sqrt();
        let ok = (freq - (1.0 - tv)).abs() <= 3.0 * se + 1e-12;
        pass &= ok;
        rows.push(json!({ "q": [a, b], "tv": tv, "frequency": freq, "stderr": se, "pass": ok }));
    }
    Ok(Check::new(
        "coalescence frequency = 1 - TV",
        pass,
        json!({ "draws": draws, "pairs": rows }),
    ))
}

/// `TV(P, Psi_* P) / kappa` stays in a bounded band for three shift families.
pub fn shift_tv_scaling() -> Result<Check> {
    let base: Arc<dyn Density> = Arc::new(ProductDensity::new(vec![ModeDensity::Biweight; 2])?);
    let spec = GridSpec::new(vec![-1.3, -1.3], vec![1.3, 1.3], vec![130, 130])?;
    let kappas = [0.01, 0.02, 0.05, 0.1, 0.2];
    let families: [(&str, &dyn Fn(f64) -> ShiftMap); 3] = [
        ("constant", &|k| ShiftMap::constant(vec![0.8 * k, 0.6 * k])),
        ("rotation", &|k| {
            ShiftMap::new(
                2,
                k,
                Arc::new(move |z: &[f64]| vec![0.5 * k * z[1], -0.5 * k * z[0] + 0.5 * k]),
            )
        }),
        ("nonlinear", &|k| {
            ShiftMap::new(
                2,
                k,
                Arc::new(move |z: &[f64]| vec![0.7 * k * z[0].sin(), 0.7 * k * z[1].tanh()]),
            )
        }),
    ];
    let mut pass = true;
    let mut out = Vec::new();
    for (name, f) in families {
        let rep = verify_shift_tv_bound(base.clone(), f, &kappas, &spec, 3.0)?;
        pass &= rep.pass;
        out.push(json!({ "family": name, "report": rep }));
    }
    Ok(Check::new(
        "shifted-noise TV is linear in kappa",
        pass,
        Value::Array(out),
    ))
}

pub fn transport_suite(seed: u64) -> Result<Verdict> {
    Ok(Verdict::new(
        "transport",
        vec![
            transport_cost_oracle(100, seed)?,
            dual_lipschitz_oracle(100, seed.wrapping_add(1))?,
            metric_axioms(200, seed.wrapping_add(2))?,
            coalescence_frequency(100_000, seed.wrapping_add(3))?,
            shift_tv_scaling()?,
        ],
    ))
}

// ----------------------------------------------------------------- coupling

/// The toy system, its noise and its exact feedback.
pub struct ToyBench {
    pub system: ToySystem,
    pub noise: NoiseModel,
    pub stabiliser: Arc<dyn Stabiliser>,
    pub coupling: CouplingConfig,
}

impl ToyBench {
    pub fn new(system: ToySystem, noise: NoiseModel, coupling: CouplingConfig) -> Result<Self> {
        let stabiliser: Arc<dyn Stabiliser> = Arc::new(system.stabiliser(coupling.q)?);
        Ok(Self {
            system,
            noise,
            stabiliser,
            coupling,
        })
    }

    pub fn builder(&self) -> Result<PairBuilder<'_>> {
        PairBuilder::new(&self.system, &self.noise, Some(self.stabiliser.clone()), self.coupling)
    }

    fn near_pairs(&self, ds: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
        let dim = self.system.state_dim();
        ds.iter()
            .map(|d| {
                let mut u2 = vec![0.0; dim];
                u2[0] = *d;
                (vec![0.0; dim], u2)
            })
            .collect()
    }
}

/// `P{d(R_k, R'_k) <= r^k d for all k} >= 1 - C d^alpha` at three distances.
pub fn contraction_check(bench: &ToyBench, chains: usize, seed: u64, exec: Exec) -> Result<Check> {
    let b = bench.builder()?;
    let pairs = bench.near_pairs(&[0.01, 0.05, 0.1]);
    let rep = contraction_probability(&b, &pairs, chains, 20, RngState::new(seed), exec)?;
    Ok(Check::new(
        "contraction probability 1 - O(d^alpha)",
        rep.pass,
        serde_json::to_value(&rep)?,
    ))
}

/// Exponential tail of the time to reach the diagonal neighbourhood.
pub fn hitting_check(
    bench: &ToyBench,
    start: (Vec<f64>, Vec<f64>),
    chains: usize,
    seed: u64,
    exec: Exec,
) -> Result<Check> {
    let b = bench.builder()?;
    let starts = vec![start; chains];
    let paths = b.chains(&starts, bench.coupling.horizon, RngState::new(seed), exec)?;
    let rep = hitting_time_stats(&hitting_times(&b, &paths))?;
    let pass = rep.beta.is_some_and(|x| x > 0.0) && rep.survival_r2.is_some_and(|r| r >= 0.95);
    Ok(Check::new(
        "hitting time has an exponential tail",
        pass,
        serde_json::to_value(&rep)?,
    ))
}

/// Chains started near the diagonal stay in the shrinking tube with
/// probability at least one half.
pub fn squeezing_check(bench: &ToyBench, chains: usize, seed: u64, exec: Exec) -> Result<Check> {
    let b = bench.builder()?;
    let base = bench.near_pairs(&[0.0, 0.05, 0.1, 0.15]);
    let starts: Vec<_> = (0..chains).map(|i| base[i % base.len()].clone()).collect();
    let rep = squeezing_stats(&b, &starts, bench.coupling.horizon, RngState::new(seed), exec)?;
    let pass = rep.p_infinite >= 0.5 && rep.moment.is_finite();
    Ok(Check::new(
        "squeezing succeeds with probability >= 1/2",
        pass,
        serde_json::to_value(&rep)?,
    ))
}

pub fn coupling_suite(bench: &ToyBench, far: (Vec<f64>, Vec<f64>), seed: u64, exec: Exec) -> Result<Verdict> {
    Ok(Verdict::new(
        "coupling",
        vec![
            contraction_check(bench, 4000, seed, exec)?,
            hitting_check(bench, far, 4000, seed.wrapping_add(1), exec)?,
            squeezing_check(bench, 2000, seed.wrapping_add(2), exec)?,
        ],
    ))
}

// --------------------------------------------------------------- stabiliser

fn noise_samples(model: &NoiseModel, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut g = RngState::new(seed).generator();
    (0..count).map(|_| model.realize(&model.sample(&mut g))).collect()
}

/// The toy feedback on random pairs inside its domain.
pub fn toy_stabiliser_check(bench: &ToyBench, pairs: usize, seed: u64) -> Result<Check> {
    let sys = &bench.system;
    let delta = bench.stabiliser.constants().delta.min(bench.coupling.delta);
    let mut g = RngState::new(seed).generator();
    let sample: Vec<(Vec<f64>, Vec<f64>)> = (0..pairs)
        .map(|_| {
            let u = sys.sample_phase(&mut g).unwrap_or_else(|| vec![0.0; sys.state_dim()]);
            let dir: Vec<f64> = (0..u.len()).map(|_| g.random_range(-1.0..1.0)).collect();
            let len = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            let d = 0.99 * delta * g.random::<f64>();
            let u2 = u.iter().zip(&dir).map(|(x, e)| x + d * e / len).collect();
            (u, u2)
        })
        .collect();
    let noise = noise_samples(&bench.noise, pairs, seed.wrapping_add(1));
    let rep = verify_stabilisability(bench.stabiliser.as_ref(), sys, &sample, &noise)?;
    let pass = rep.pass && rep.holder_constant.is_finite() && rep.derivative_sup.is_finite();
    Ok(Check::new(
        "toy feedback contracts pairs",
        pass,
        serde_json::to_value(&rep)?,
    ))
}

/// A state near `u` at distance `d`: `u` mixed with its quarter-turn rotation.
pub fn ns_pair(sys: &NsSystem, h1: f64, d: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let u = scaled_mode(sys, h1)?;
    let l2 = sys.norm().eval(&u);
    let w = sys.field(&u)?.quarter_turn().interior();
    let dir: Vec<f64> = u.iter().zip(&w).map(|(a, b)| b - a).collect();
    let dn = sys.norm().eval(&dir).max(l2 * 1e-12);
    let u2 = u.iter().zip(&dir).map(|(a, e)| a + d * e / dn).collect();
    Ok((u, u2))
}

/// The optimisation-based feedback on pairs around a smooth mode.
pub fn ns_stabiliser_check(sys: &NsSystem, model: &NoiseModel, cfg: FeedbackConfig, seed: u64) -> Result<Check> {
    let fb = NsFeedback::new(sys.clone(), cfg)?;
    let ds = [0.25 * cfg.delta, 0.1 * cfg.delta];
    let pairs: Vec<_> = ds.iter().map(|d| ns_pair(sys, 1.0, *d)).collect::<Result<_>>()?;
    let noise = noise_samples(model, pairs.len(), seed);
    let mut outcomes = Vec::new();
    for ((u, u2), a) in pairs.iter().zip(&noise) {
        outcomes.push(fb.solve(u, u2, a)?);
    }
    let rep = verify_stabilisability(&fb, sys, &pairs, &noise)?;
    let met = outcomes.iter().all(|o| o.met_target);
    let factors: Vec<f64> = outcomes.iter().map(|o| o.factor()).collect();
    let traces: Vec<&Vec<f64>> = outcomes.iter().map(|o| &o.trace).collect();
    Ok(Check::new(
        "NS feedback reaches its target factor",
        rep.pass && met,
        json!({ "report": rep, "factors": factors, "target": cfg.eps_target, "objective_traces": traces }),
    ))
}

// ------------------------------------------------------------ NS operators

/// Divergence, flux and first-order trace convergence of the boundary lift.
pub fn extension_check(sizes: &[usize]) -> Result<Check> {
    let noise = BoundaryNoise::default();
    let a = [1.0, 0.5, -0.5, 0.25];
    let mut errs = Vec::new();
    let (mut div, mut flux): (f64, f64) = (0.0, 0.0);
    for &n in sizes {
        let d = SquareDomain::new(n)?;
        let data = noise.data_at(&d, &a, 0.5);
        let f = extend_boundary_field(&d, &data)?;
        div = div.max(f.max_divergence(d.h));
        flux = flux.max(f.boundary_flux(d.h).abs());
        errs.push(trace_error(&d, &f, &data));
    }
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    let pass = div <= 1e-10 && flux <= 1e-10 && ratios.iter().all(|r| *r >= 1.8);
    Ok(Check::new(
        "boundary lift is solenoidal with O(h) trace error",
        pass,
        json!({ "sizes": sizes, "max_divergence": div, "max_flux": flux, "trace_errors": errs, "ratios": ratios }),
    ))
}

/// Audit residual and the divergence of the end state.
fn audit_residual(dt: f64, forced: bool) -> Result<(f64, f64)> {
    let p = NsParams {
        n: 32,
        dt,
        ..NsParams::default()
    };
    let s = NsSolver::new(p, BoundaryNoise::default())?;
    let a = if forced { [1.0, -0.5, 0.3, 0.2] } else { [0.0; 4] };
    let run = s.run(
        &stokes_like_mode(&s.dom),
        &a,
        &RunOptions {
            audit: true,
            ..Default::default()
        },
    )?;
    Ok((
        summarize_audit(&run.audit).relative_residual,
        run.end.max_divergence(s.dom.h),
    ))
}

/// Energy balance closes to first order in `dt`.
pub fn energy_audit_check() -> Result<Check> {
    let mut rows = Vec::new();
    let mut pass = true;
    for forced in [false, true] {
        let (coarse, div_c) = audit_residual(1e-3, forced)?;
        let (fine, div_f) = audit_residual(5e-4, forced)?;
        let ratio = coarse / fine;
        let div = div_c.max(div_f);
        let ok = coarse <= 0.05 && (1.7..=2.3).contains(&ratio) && div <= 1e-10;
        pass &= ok;
        rows.push(
            json!({ "forced": forced, "residual_dt": coarse, "residual_dt_half": fine, "ratio": ratio,
                          "end_divergence": div, "pass": ok }),
        );
    }
    Ok(Check::new(
        "energy audit is first order in dt",
        pass,
        Value::Array(rows),
    ))
}

/// The normalised trilinear term of the cut-off extension shrinks with delta.
pub fn hopf_check(seed: u64) -> Result<Check> {
    let d = SquareDomain::new(64)?;
    let data = BoundaryNoise::default().mode_data(&d, 1);
    let mut g = RngState::new(seed).generator();
    let rows = hopf_ratios(&d, &data, &[0.3, 0.2, 0.1], 100, &mut g)?;
    let pass = rows.windows(2).all(|w| w[0].ratio > w[1].ratio);
    let out: Vec<Value> = rows
        .iter()
        .map(|r| json!({ "delta": r.delta, "ratio": r.ratio }))
        .collect();
    Ok(Check::new(
        "cut-off extension trilinear ratio decreases with delta",
        pass,
        Value::Array(out),
    ))
}

pub fn ns_operator_suite(seed: u64) -> Result<Verdict> {
    Ok(Verdict::new(
        "ns-operators",
        vec![
            extension_check(&[32, 64, 128])?,
            energy_audit_check()?,
            hopf_check(seed)?,
        ],
    ))
}

// ------------------------------------------------------------- NS dynamics

/// Unforced exponential decay and boundedness of forced trajectories.
pub fn ns_dissipativity_check(
    sys: &NsSystem,
    model: &NoiseModel,
    trajectories: usize,
    k_max: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<Check>> {
    let fit = decay_probe(sys, &scaled_mode(sys, 1.0)?, 20)?;
    let decay = Check::new(
        "unforced H1 norm decays exponentially",
        fit.alpha > 0.0 && fit.r2 >= 0.95,
        serde_json::to_value(&fit)?,
    );
    let starts = [vec![0.0; sys.state_dim()], scaled_mode(sys, 2.0)?];
    let rng = RngState::new(seed);
    let paths = try_map_indexed(trajectories, exec, |i| {
        let mut g = rng.substream(i as u64).generator();
        let mut u = starts[i % 2].clone();
        let mut norms = vec![sys.h1_norm(&u)?];
        for _ in 0..k_max {
            u = sys.step(&u, &model.realize(&model.sample(&mut g)))?;
            norms.push(sys.h1_norm(&u)?);
        }
        Ok::<_, Error>(norms)
    })?;
    let third = (k_max + 1) / 3;
    let sup = |xs: &[f64]| xs.iter().cloned().fold(0.0, f64::max);
    let early = paths.iter().map(|p| sup(&p[..third.max(1)])).fold(0.0, f64::max);
    let late = paths
        .iter()
        .map(|p| sup(&p[p.len() - third.max(1)..]))
        .fold(0.0, f64::max);
    let finite = paths.iter().flatten().all(|x| x.is_finite());
    let bounded = Check::new(
        "forced trajectories stay bounded",
        finite && late <= 2.0 * early,
        json!({ "trajectories": trajectories, "k_max": k_max, "early_sup": early, "late_sup": late,
                "sup": paths.iter().map(|p| sup(p)).fold(0.0, f64::max) }),
    );
    Ok(vec![decay, bounded])
}
