use std::sync::Arc;

use ctrlmix_core::coupling::*;
use ctrlmix_core::rds::transition_ensemble;
use ctrlmix_core::stabiliser::Stabiliser;
use ctrlmix_core::stats::{ks_statistic, ks_uniform_pvalue};
use ctrlmix_core::toybench::ToySystem;
use ctrlmix_core::{Exec, ModeDensity, NoiseModel, RngState, SystemMap};
use rand::Rng;

fn unstable() -> (ToySystem, NoiseModel, Arc<dyn Stabiliser>) {
    let sys = ToySystem::unstable();
    let model = NoiseModel::iid(vec![1.0], ModeDensity::Uniform).unwrap();
    let stab: Arc<dyn Stabiliser> = Arc::new(sys.stabiliser(0.5).unwrap());
    (sys, model, stab)
}

fn cfg() -> CouplingConfig {
    CouplingConfig::default()
}

#[test]
fn config_rejects_bad_contractions() {
    for (q, r) in [(0.5, 0.4), (0.0, 0.5), (0.5, 1.0)] {
        let c = CouplingConfig { q, r, ..cfg() };
        assert!(c.validate().is_err());
    }
    assert!(CouplingConfig { delta: 0.0, ..cfg() }.validate().is_err());
    assert!(CouplingConfig { alpha: 1.5, ..cfg() }.validate().is_err());
}

#[test]
fn identical_starts_always_coalesce() {
    let (sys, model, stab) = unstable();
    let b = PairBuilder::new(&sys, &model, Some(stab), cfg()).unwrap();
    let u = [0.3, -0.2];
    for i in 0..2000 {
        let d = b.draw(&u, &u, RngState::new(4).substream(i)).unwrap();
        assert_eq!(d.r, d.r2);
        assert_eq!(d.regime, Regime::Coalesced);
    }
}

fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[test]
fn off_diagonal_draws_are_uncorrelated() {
    let (sys, model, stab) = unstable();
    let b = PairBuilder::new(&sys, &model, Some(stab), cfg()).unwrap();
    let (u, u2) = ([1.0, 0.0], [-1.0, 0.5]);
    let n = 10_000;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for i in 0..n {
        let d = b.draw(&u, &u2, RngState::new(5).substream(i)).unwrap();
        assert_eq!(d.regime, Regime::Independent);
        xs.push(d.r[0]);
        ys.push(d.r2[0]);
    }
    assert!(correlation(&xs, &ys).abs() < 4.0 / (n as f64).sqrt());
}

/// CDF of `growth tanh(u) + U[-1, 1]`.
fn step_cdf(u: f64) -> impl Fn(f64) -> f64 {
    let m = 1.2 * u.tanh();
    move |x| ((x - m + 1.0) / 2.0).clamp(0.0, 1.0)
}

#[test]
fn marginals_are_the_transition_laws() {
    let (sys, model, stab) = unstable();
    let b = PairBuilder::new(&sys, &model, Some(stab), cfg()).unwrap();
    for (u, u2) in [([0.4, 0.1], [0.5, 0.1]), ([1.0, 0.0], [-1.0, 0.0])] {
        let draws: Vec<_> = (0..10_000)
            .map(|i| b.draw(&u, &u2, RngState::new(6).substream(i)).unwrap())
            .collect();
        let r: Vec<f64> = draws.iter().map(|d| d.r[0]).collect();
        let r2: Vec<f64> = draws.iter().map(|d| d.r2[0]).collect();
        assert!(ks_statistic(&r, step_cdf(u[0])) < 0.02);
        assert!(ks_statistic(&r2, step_cdf(u2[0])) < 0.02);
        let direct = transition_ensemble(&sys, &u2, &model, 10_000, RngState::new(7), Exec::Parallel).unwrap();
        let direct: Vec<f64> = (0..direct.len()).map(|i| direct.atom(i)[0]).collect();
        assert!(ks_statistic(&direct, step_cdf(u2[0])) < 0.02);
    }
}

#[test]
fn on_diagonal_failure_bounded_by_shift_tv() {
    let (sys, model, stab) = unstable();
    let b = PairBuilder::new(&sys, &model, Some(stab.clone()), cfg()).unwrap();
    let (u, u2) = ([0.2, 0.0], [0.3, 0.05]);
    let d0 = sys.distance(&u, &u2);
    // A constant shift s of U[-1, 1] has total variation s / 2.
    let shift = stab.correction(&u, &u2, &[0.0]).unwrap()[0];
    let t0 = shift.abs() / 2.0;
    let n = 20_000;
    let fails = (0..n)
        .filter(|&i| {
            let d = b.draw(&u, &u2, RngState::new(8).substream(i)).unwrap();
            sys.distance(&d.r, &d.r2) > cfg().r * d0
        })
        .count() as f64
        / n as f64;
    let sigma = (t0 * (1.0 - t0) / n as f64).sqrt();
    assert!(fails <= 2.0 * t0 + 3.0 * sigma, "{fails} vs {t0}");
    assert!(fails > 0.0);
}

#[test]
fn extension_chain_shapes() {
    let (sys, model, stab) = unstable();
    let b = PairBuilder::new(&sys, &model, Some(stab), cfg()).unwrap();
    let c = b
        .extension_chain(&[0.1, 0.2], &[0.5, 0.0], 0, RngState::new(1))
        .unwrap();
    assert_eq!(c.len(), 1);
    assert_eq!(c[0].r, vec![0.1, 0.2]);

    let zero = PairBuilder::new(&sys, &model, None, cfg()).unwrap();
    let c = zero
        .extension_chain(&[0.3, 0.3], &[0.3, 0.3], 25, RngState::new(2))
        .unwrap();
    assert!(c.iter().all(|d| d.r == d.r2));
}

#[test]
fn stabiliser_domain_is_enforced() {
    let (sys, model, _) = unstable();
    let stab: Arc<dyn Stabiliser> = Arc::new(sys.stabiliser(0.5).unwrap().with_delta(0.01));
    let b = PairBuilder::new(&sys, &model, Some(stab), cfg()).unwrap();
    assert!(b.draw(&[0.0, 0.0], &[0.1, 0.0], RngState::new(1)).is_err());
}

#[test]
fn geometric_survival_recovers_rate() {
    let mut g = RngState::new(11).generator();
    let taus: Vec<Option<usize>> = (0..100_000)
        .map(|_| {
            let mut k = 0;
            while g.random::<f64>() < 0.7 {
                k += 1;
            }
            Some(k)
        })
        .collect();
    let rep = hitting_time_stats(&taus).unwrap();
    let beta = rep.beta.unwrap();
    let truth = (1.0f64 / 0.7).ln();
    assert!((beta - truth).abs() < 0.05 * truth, "{beta}");
    assert!(rep.conclusive);
    assert!(rep.p >= 0.5 && rep.p <= 1.0);
}

#[test]
fn starts_inside_hit_at_zero() {
    let (sys, model, stab) = unstable();
    let b = PairBuilder::new(&sys, &model, Some(stab), cfg()).unwrap();
    let starts = vec![(vec![0.0, 0.0], vec![0.1, 0.0]); 1000];
    let chains = b.chains(&starts, 3, RngState::new(3), Exec::Parallel).unwrap();
    let taus = hitting_times(&b, &chains);
    assert!(taus.iter().all(|t| *t == Some(0)));
    let rep = hitting_time_stats(&taus).unwrap();
    assert_eq!((rep.m, rep.p), (0, 1.0));
}

#[test]
fn contraction_hits_within_deterministic_bound() {
    let sys = ToySystem::ContractingAffine {
        c: 0.5,
        dim: 2,
        noise_bound: 0.01,
    };
    let model = NoiseModel::iid(vec![0.01, 0.01], ModeDensity::Uniform).unwrap();
    let c = CouplingConfig { delta: 0.5, ..cfg() };
    let b = PairBuilder::new(&sys, &model, None, c).unwrap();
    let mut g = RngState::new(9).generator();
    let mut corner = || vec![g.random_range(-1.0..1.0), g.random_range(-1.0..1.0)];
    let starts: Vec<_> = (0..1000).map(|_| (corner(), corner())).collect();
    let chains = b.chains(&starts, 10, RngState::new(10), Exec::Parallel).unwrap();
    let bound = (4.0f64 / 0.5).log2().ceil() as usize;
    assert!(hitting_times(&b, &chains).iter().all(|t| t.is_some_and(|t| t <= bound)));
}

#[test]
fn synthetic_squeezing_matches_product() {
    let f = 0.02;
    let h = 50;
    let mut g = RngState::new(12).generator();
    let n = 20_000;
    let sigmas: Vec<Option<usize>> = (0..n).map(|_| (1..=h).find(|_| g.random::<f64>() < f)).collect();
    let rep = squeezing_from_sigmas(&sigmas, h, 1.0, 0.7).unwrap();
    let truth = (1.0 - f).powi(h as i32);
    assert!((rep.p_infinite - truth).abs() < 3.0 * rep.p_infinite_stderr + 1e-3);
    assert!((rep.delta2 - 0.5 * (1.0f64 / 0.7).ln()).abs() < 1e-15);
}

#[test]
fn synchronous_contraction_never_leaves_the_tube() {
    let sys = ToySystem::halving();
    let model = NoiseModel::iid(vec![0.5], ModeDensity::Uniform).unwrap();
    let b = PairBuilder::new(&sys, &model, None, cfg())
        .unwrap()
        .with_mode(PairMode::Synchronized);
    let starts = vec![(vec![0.0], vec![0.2]); 500];
    let rep = squeezing_stats(&b, &starts, 50, RngState::new(1), Exec::Parallel).unwrap();
    assert_eq!(rep.p_infinite, 1.0);
    assert!(rep.conclusive);
}

#[test]
fn controlled_toy_squeezes_with_probability_above_half() {
    let (sys, model, stab) = unstable();
    let b = PairBuilder::new(&sys, &model, Some(stab), cfg()).unwrap();
    let starts: Vec<_> = (0..2000)
        .map(|i| (vec![0.0, 0.0], vec![0.05 * (i % 4) as f64, 0.0]))
        .collect();
    let rep = squeezing_stats(&b, &starts, 50, RngState::new(2), Exec::Parallel).unwrap();
    assert!(rep.p_infinite >= 0.5, "{rep:?}");
    assert!(rep.moment.is_finite());
}

fn far_starts(n: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    vec![(vec![-1.0], vec![1.0]); n]
}

#[test]
fn independence_test_behaviour() {
    let sys = ToySystem::halving();
    let model = NoiseModel::iid(vec![0.5], ModeDensity::Uniform).unwrap();
    let c = CouplingConfig { delta: 0.2, ..cfg() };

    let b = PairBuilder::new(&sys, &model, None, c).unwrap();
    let chains = b.chains(&far_starts(50), 2, RngState::new(1), Exec::Parallel).unwrap();
    assert_eq!(independence_on_tm_test(&b, &chains, 0, 4).unwrap().p_value, 1.0);

    let sync = PairBuilder::new(&sys, &model, None, c)
        .unwrap()
        .with_mode(PairMode::Synchronized);
    let chains = sync
        .chains(&far_starts(1000), 3, RngState::new(2), Exec::Parallel)
        .unwrap();
    assert!(independence_on_tm_test(&sync, &chains, 3, 4).unwrap().p_value < 1e-3);

    let indep = PairBuilder::new(&sys, &model, None, c)
        .unwrap()
        .with_mode(PairMode::AlwaysIndependent);
    let ps: Vec<f64> = (0..50)
        .map(|s| {
            let chains = indep
                .chains(&far_starts(400), 2, RngState::new(100 + s), Exec::Parallel)
                .unwrap();
            independence_on_tm_test(&indep, &chains, 2, 4).unwrap().p_value
        })
        .collect();
    assert!(ks_uniform_pvalue(&ps) > 0.05, "{ps:?}");
}

#[test]
fn halving_controllability() {
    let sys = ToySystem::ContractingAffine {
        c: 0.5,
        dim: 1,
        noise_bound: 0.5,
    };
    let controls = ControlBox::symmetric(&[0.5]);
    let starts: Vec<Vec<f64>> = (0..=20).map(|i| vec![-1.0 + 0.1 * i as f64]).collect();
    let rep = approx_controllability_probe(&sys, &controls, &[0.0], 0.1, &starts, 10, 100, RngState::new(1)).unwrap();
    assert_eq!(rep.m, 4);
    assert_eq!(rep.route, ControlRoute::ZeroControl);
    let rep = approx_controllability_probe(&sys, &controls, &[0.0], 2.0, &starts, 10, 100, RngState::new(1)).unwrap();
    assert_eq!(rep.m, 0);
}

#[test]
fn shooting_reaches_target_without_zero_control() {
    let sys = ToySystem::ContractingAffine {
        c: 0.5,
        dim: 1,
        noise_bound: 0.5,
    };
    let controls = ControlBox {
        lo: vec![0.1],
        hi: vec![0.5],
    };
    let starts = vec![vec![-1.0], vec![1.0]];
    let rep = approx_controllability_probe(&sys, &controls, &[0.6], 0.1, &starts, 6, 2000, RngState::new(3)).unwrap();
    assert_eq!(rep.route, ControlRoute::Shooting);
    assert_eq!(rep.controls.len(), 2);
}

#[test]
fn contraction_probability_is_linear_in_the_distance() {
    let (sys, model, stab) = unstable();
    let b = PairBuilder::new(&sys, &model, Some(stab), cfg()).unwrap();
    let pairs: Vec<_> = [0.01, 0.05, 0.1]
        .iter()
        .map(|d| (vec![0.0, 0.0], vec![*d, 0.0]))
        .collect();
    let rep = contraction_probability(&b, &pairs, 4000, 20, RngState::new(13), Exec::Parallel).unwrap();
    println!("{rep:?}");
    assert!(rep.pass);
    assert!(rep.c1 > 0.0);
    assert!(rep.rows[0].p_all >= rep.rows[2].p_all);
}
