//! The four subcommands. Each writes its artifacts under `out` and reports
//! whether its own acceptance test passed.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use ctrlmix_core::coupling::{mixing_rate, MixingConfig, MixingReport, Observable};
use ctrlmix_core::io::{write_csv_file, write_json, write_lag_csv};
use ctrlmix_core::stats::{ks_statistic, mean, variance};
use ctrlmix_core::toybench::{exact_stationary_density_1d, ToySystem};
use ctrlmix_core::transport::DiscreteMeasure;
use ctrlmix_core::{Error, Exec, Result, RngState, SystemMap};
use ctrlmix_ns2d::io::{write_boundary_trace, write_snapshot};
use ctrlmix_ns2d::probe::scaled_mode;
use ctrlmix_ns2d::solver::RunOptions;
use ctrlmix_ns2d::{BoundaryTrace, NsSystem};
use serde_json::json;

use crate::config::{ExperimentConfig, SystemConfig};
use crate::suites::{self, ToyBench, Verdict};
use crate::svg::{line_plot, Series};

/// What a command concluded.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub pass: bool,
    pub summary: String,
}

fn toy_of(cfg: &ExperimentConfig) -> Option<&ToySystem> {
    match &cfg.system {
        SystemConfig::Toy(t) => Some(t),
        SystemConfig::Ns(_) => None,
    }
}

fn ns_state(sys: &NsSystem, h1: f64) -> Result<Vec<f64>> {
    scaled_mode(sys, h1)
}

// ----------------------------------------------------------------- simulate

pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let model = cfg.noise_model()?;
    let mut g = RngState::new(cfg.seed).substream(0).generator();
    let steps = cfg.simulate.steps;
    match &cfg.system {
        SystemConfig::Toy(sys) => {
            let mut u = cfg.simulate.initial.clone();
            let dim = u.len();
            let header: Vec<String> = std::iter::once("k".to_string())
                .chain((0..dim).map(|i| format!("u_{i}")))
                .collect();
            let mut rows = Vec::with_capacity(steps + 1);
            let row = |k: usize, u: &[f64]| {
                std::iter::once(k.to_string())
                    .chain(u.iter().map(f64::to_string))
                    .collect()
            };
            rows.push(row(0, &u));
            for k in 1..=steps {
                u = sys.step(&u, &model.realize(&model.sample(&mut g)))?;
                if u.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Blowup {
                        step: k,
                        detail: "non-finite toy state".into(),
                    });
                }
                rows.push(row(k, &u));
            }
            let hdr: Vec<&str> = header.iter().map(String::as_str).collect();
            write_csv_file(&out.join("trajectory.csv"), &hdr, rows)?;
            Ok(Outcome {
                pass: true,
                summary: format!("{steps} steps of the toy system written to trajectory.csv"),
            })
        }
        SystemConfig::Ns(ns) => {
            let sys = ns.system()?;
            let dom = sys.dom().clone();
            let snaps = out.join("snapshots");
            fs::create_dir_all(&snaps)?;
            let mut u = ns_state(&sys, cfg.simulate.initial[0])?;
            let mut energy_rows = Vec::with_capacity(steps + 1);
            let mut noise_rows = Vec::with_capacity(steps);
            let mut trace = BoundaryTrace {
                times: Vec::new(),
                data: Vec::new(),
            };
            let ts = cfg.simulate.trace_samples;
            let local: Vec<f64> = (0..ts).map(|j| j as f64 / ts as f64).collect();
            let energy_row = |k: usize, u: &[f64]| -> Result<Vec<String>> {
                let f = sys.field(u)?;
                Ok(vec![
                    k.to_string(),
                    f.l2_sq(dom.h).to_string(),
                    sys.h1_norm(u)?.to_string(),
                ])
            };
            energy_rows.push(energy_row(0, &u)?);
            write_snapshot(&snaps.join("u_0000"), &sys.field(&u)?, 0.0)?;
            for k in 1..=steps {
                let a = model.realize(&model.sample(&mut g));
                let piece = sys.solver.noise.trace(&dom, &a, &local);
                trace.times.extend(piece.times.iter().map(|t| t + (k - 1) as f64));
                trace.data.extend(piece.data);
                let r = sys.resolve(&u, &a, &RunOptions::default())?;
                if !r.run.end.is_finite() {
                    return Err(Error::Blowup {
                        step: k,
                        detail: "non-finite velocity".into(),
                    });
                }
                u = r.end;
                noise_rows.push(
                    std::iter::once(k.to_string())
                        .chain(a.iter().map(f64::to_string))
                        .collect(),
                );
                energy_rows.push(energy_row(k, &u)?);
                write_snapshot(&snaps.join(format!("u_{k:04}")), &sys.field(&u)?, k as f64)?;
            }
            write_csv_file(&out.join("energies.csv"), &["k", "energy", "h1_norm"], energy_rows)?;
            let noise_header: Vec<String> = std::iter::once("k".to_string())
                .chain((1..=ns.modes).map(|j| format!("a_{j}")))
                .collect();
            let nh: Vec<&str> = noise_header.iter().map(String::as_str).collect();
            write_csv_file(&out.join("noise.csv"), &nh, noise_rows)?;
            write_boundary_trace(&out.join("boundary_trace.csv"), &dom, &trace)?;
            Ok(Outcome {
                pass: true,
                summary: format!("{steps} unit intervals of Navier–Stokes at n = {}", ns.n),
            })
        }
    }
}

// ----------------------------------------------------------------- mix-rate

fn identity(u: &[f64], _: &[f64]) -> Vec<f64> {
    u.to_vec()
}

/// Runs the mixing-rate estimator described by the config.
pub fn mixing(cfg: &ExperimentConfig, exec: Exec) -> Result<MixingReport> {
    let model = cfg.noise_model()?;
    let m = &cfg.mixing;
    let mc = MixingConfig {
        k_max: m.k_max,
        n: m.ensemble,
        mode: m.mode,
        floor_factor: m.floor_factor,
        fit_from: m.fit_from,
        stationary_burn: m.stationary_burn,
    };
    let rng = RngState::new(cfg.seed).substream(1);
    match &cfg.system {
        SystemConfig::Toy(sys) => mixing_rate(sys, &model, &m.initial, &identity, &mc, rng, exec),
        SystemConfig::Ns(ns) => {
            let sys = ns.system()?;
            let u0: Vec<Vec<f64>> = m.initial.iter().map(|h| ns_state(&sys, h[0])).collect::<Result<_>>()?;
            let obs: Box<Observable> = sys.observable();
            mixing_rate(&sys, &model, &u0, &*obs, &mc, rng, exec)
        }
    }
}

pub fn mix_rate(cfg: &ExperimentConfig, out: &Path, exec: Exec) -> Result<Outcome> {
    let rep = mixing(cfg, exec)?;
    write_lag_csv(BufWriter::new(File::create(out.join("mixing.csv"))?), &rep.rows)?;
    write_json(&out.join("mixing.json"), &rep)?;
    let mut series = vec![
        Series {
            name: "distance".into(),
            points: rep.rows.iter().map(|r| (r.k as f64, r.distance)).collect(),
            dashed: false,
        },
        Series {
            name: "floor".into(),
            points: rep.rows.iter().map(|r| (r.k as f64, r.floor)).collect(),
            dashed: true,
        },
    ];
    if let (Some(g), Some(c), Some((k0, k1))) = (rep.gamma, rep.c, rep.fit_range) {
        series.push(Series {
            name: format!("fit, gamma = {g:.4}"),
            points: (k0..=k1).map(|k| (k as f64, c * (-g * k as f64).exp())).collect(),
            dashed: true,
        });
    }
    fs::write(
        out.join("mixing.svg"),
        line_plot("Mixing rate", "k", "distance", &series, true),
    )?;
    let summary = match (rep.gamma, rep.r2) {
        (Some(g), Some(r2)) if rep.conclusive => format!(
            "gamma = {g:.4} ± {:.4}, R² = {r2:.4}, lags {:?}",
            rep.gamma_ci.unwrap_or(f64::NAN),
            rep.fit_range.unwrap_or((0, 0))
        ),
        _ => format!("inconclusive: {}", rep.note),
    };
    Ok(Outcome {
        pass: rep.conclusive,
        summary,
    })
}

// ------------------------------------------------------------------- verify

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Coupling,
    Stabiliser,
    Transport,
    NsOperators,
}

fn toy_bench(cfg: &ExperimentConfig, suite: &str) -> Result<ToyBench> {
    let sys = toy_of(cfg).ok_or_else(|| Error::Config(format!("the {suite} suite runs on a toy system")))?;
    ToyBench::new(sys.clone(), cfg.noise_model()?, cfg.coupling)
}

pub fn verify(cfg: &ExperimentConfig, suite: Suite, out: &Path, exec: Exec) -> Result<Outcome> {
    let verdict = match suite {
        Suite::Transport => suites::transport_suite(cfg.seed)?,
        Suite::NsOperators => suites::ns_operator_suite(cfg.seed)?,
        Suite::Coupling => {
            let bench = toy_bench(cfg, "coupling")?;
            let far = (cfg.mixing.initial[0].clone(), cfg.mixing.initial[1].clone());
            suites::coupling_suite(&bench, far, cfg.seed, exec)?
        }
        Suite::Stabiliser => match &cfg.system {
            SystemConfig::Toy(_) => {
                let bench = toy_bench(cfg, "stabiliser")?;
                Verdict::new("stabiliser", vec![suites::toy_stabiliser_check(&bench, 500, cfg.seed)?])
            }
            SystemConfig::Ns(ns) => {
                let sys = ns.system()?;
                let check = suites::ns_stabiliser_check(&sys, &cfg.noise_model()?, cfg.stabiliser, cfg.seed)?;
                Verdict::new("stabiliser", vec![check])
            }
        },
    };
    write_json(&out.join(format!("verify_{}.json", verdict.suite)), &verdict)?;
    let failed: Vec<&str> = verdict
        .checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| c.name.as_str())
        .collect();
    Ok(Outcome {
        pass: verdict.pass,
        summary: if failed.is_empty() {
            format!("{}: all {} checks passed", verdict.suite, verdict.checks.len())
        } else {
            format!("{}: failed {}", verdict.suite, failed.join("; "))
        },
    })
}

// --------------------------------------------------------------- toy-oracle

/// Stationary law of the one-dimensional contracting toy: the exact density
/// by convolution, its variance against the closed form, and an empirical
/// sample against both.
pub fn toy_oracle(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let (c, b) = match toy_of(cfg) {
        Some(ToySystem::ContractingAffine { c, dim: 1, .. }) => (*c, cfg.noise.amplitudes[0]),
        _ => {
            return Err(Error::Config(
                "toy-oracle needs the one-dimensional contracting toy".into(),
            ))
        }
    };
    let density = &cfg.noise.density;
    let tol = 1e-8;
    // |c|^k * 2b / (1 - |c|) <= tol
    let k_terms = if c == 0.0 || b == 0.0 {
        1
    } else {
        ((tol * (1.0 - c.abs()) / (2.0 * b)).ln() / c.abs().ln())
            .ceil()
            .max(1.0) as usize
    };
    let (grid, bound) = exact_stationary_density_1d(c, density, b, k_terms, 4000)?;
    grid.write(&out.join("stationary.bin"), &out.join("stationary.json"))?;

    let h = grid.spec.spacing(0);
    let xs: Vec<f64> = (0..grid.spec.cells()).map(|i| grid.spec.center(i)[0]).collect();
    let m1: f64 = xs.iter().zip(&grid.values).map(|(x, p)| x * p * h).sum();
    let m2: f64 = xs.iter().zip(&grid.values).map(|(x, p)| x * x * p * h).sum();
    let grid_var = m2 - m1 * m1;
    let exact_var = b * b * density.variance() / (1.0 - c * c);
    // Midpoint quadrature of a piecewise-smooth density: O(h^2) plus the
    // cell-width term h^2/12 of binning.
    let grid_ok = (grid_var - exact_var).abs() <= 2.0 * h * h + 1e-3 * exact_var;

    let model = cfg.noise_model()?;
    let samples = cfg.mixing.ensemble.max(1000);
    let burn = k_terms.max(10);
    let root = RngState::new(cfg.seed).substream(2);
    let draws: Vec<f64> = (0..samples)
        .map(|i| {
            let mut g = root.substream(i as u64).generator();
            let mut u = 0.0;
            for _ in 0..burn {
                u = c * u + model.realize(&model.sample(&mut g))[0];
            }
            u
        })
        .collect();
    let emp_var = variance(&draws);
    let emp_mean = mean(&draws);
    let m4 = draws.iter().map(|x| (x - emp_mean).powi(4)).sum::<f64>() / samples as f64;
    let var_se = ((m4 - emp_var * emp_var) / samples as f64).sqrt();
    let var_ok = (emp_var - exact_var).abs() <= 4.0 * var_se;
    let mut cum = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    for p in &grid.values {
        acc += p * h;
        cum.push(acc);
    }
    let lo = grid.spec.lo[0];
    let cdf = |x: f64| {
        let t = (x - lo) / h;
        if t <= 0.0 {
            return 0.0;
        }
        let i = t.floor() as usize;
        if i >= cum.len() {
            return 1.0;
        }
        let before = if i == 0 { 0.0 } else { cum[i - 1] };
        before + (cum[i] - before) * (t - i as f64)
    };
    let ks = ks_statistic(&draws, cdf);
    // 1% critical value of the one-sample KS test.
    let ks_crit = 1.63 / (samples as f64).sqrt();
    let ks_ok = ks <= ks_crit;
    DiscreteMeasure::uniform(1, draws)?.to_csv(BufWriter::new(File::create(out.join("empirical.csv"))?))?;
    let pass = grid_ok && var_ok && ks_ok;
    write_json(
        &out.join("oracle.json"),
        &json!({
            "c": c, "b": b, "k_terms": k_terms, "truncation_bound": bound,
            "exact_variance": exact_var, "grid_variance": grid_var, "grid_pass": grid_ok,
            "samples": samples, "empirical_variance": emp_var, "variance_stderr": var_se, "variance_pass": var_ok,
            "ks_statistic": ks, "ks_critical": ks_crit, "ks_pass": ks_ok, "pass": pass
        }),
    )?;
    Ok(Outcome {
        pass,
        summary: format!(
            "variance exact {exact_var:.6}, grid {grid_var:.6}, empirical {emp_var:.6} ± {var_se:.1e}; KS {ks:.4} (crit {ks_crit:.4})"
        ),
    })
}
