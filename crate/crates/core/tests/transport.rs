use std::sync::Arc;

use ctrlmix_core::toybench::{brute_force_bl_distance_1d, brute_force_transport_cost};
use ctrlmix_core::transport::maximal::maximal_coupling_densities;
use ctrlmix_core::transport::*;
use ctrlmix_core::{ModeDensity, RngState};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn random_measure(g: &mut ChaCha8Rng, dim: usize, max_atoms: usize, spread: f64) -> DiscreteMeasure {
    let n = g.random_range(1..=max_atoms);
    let pts: Vec<f64> = (0..n * dim).map(|_| g.random_range(-spread..spread)).collect();
    let w: Vec<f64> = (0..n).map(|_| g.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    DiscreteMeasure::new(dim, pts, w.iter().map(|x| x / s).collect()).unwrap()
}

#[test]
fn transport_cost_matches_vertex_enumeration() {
    let mut g = RngState::new(1).generator();
    for _ in 0..100 {
        let dim = g.random_range(1..=2);
        let a = random_measure(&mut g, dim, 4, 1.0);
        let b = random_measure(&mut g, dim, 4, 1.0);
        let eps = g.random_range(0.05..1.5);
        let fast = transport_cost(&a, &b, eps).unwrap();
        let slow = brute_force_transport_cost(&a, &b, eps).unwrap();
        assert!((fast - slow).abs() < 1e-9, "{fast} vs {slow}");
    }
}

#[test]
fn optimal_plan_has_the_right_marginals() {
    let mut g = RngState::new(2).generator();
    for _ in 0..50 {
        let a = random_measure(&mut g, 2, 12, 1.0);
        let b = random_measure(&mut g, 2, 12, 1.0);
        let plan = optimal_plan(&a, &b, 0.4).unwrap();
        for (x, y) in plan.row_sums(a.len()).iter().zip(a.weights()) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in plan.col_sums(b.len()).iter().zip(b.weights()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((plan.cost(&a, &b, 0.4) - transport_cost(&a, &b, 0.4).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn dual_lipschitz_matches_grid_search() {
    let mut g = RngState::new(3).generator();
    for _ in 0..100 {
        let a = random_measure(&mut g, 1, 5, 1.5);
        let b = random_measure(&mut g, 1, 5, 1.5);
        let lp = dual_lipschitz(&a, &b).unwrap();
        let slow = brute_force_bl_distance_1d(&a, &b).unwrap();
        assert!((lp - slow).abs() < 1.5e-2, "{lp} vs {slow}");
        let simplex = dual_lipschitz_with(&a, &b, BlRoute::Simplex).unwrap();
        assert!((lp - simplex).abs() < 1e-7, "{lp} vs {simplex}");
    }
}

#[test]
fn dual_lipschitz_is_a_metric() {
    let mut g = RngState::new(4).generator();
    for _ in 0..200 {
        let dim = g.random_range(1..=2);
        let m: Vec<_> = (0..3).map(|_| random_measure(&mut g, dim, 5, 1.5)).collect();
        let d = |i: usize, j: usize| dual_lipschitz(&m[i], &m[j]).unwrap();
        assert_eq!(d(0, 1), d(1, 0));
        assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-7);
        assert!(d(0, 0).abs() < 1e-12);
    }
}

#[test]
fn diracs_two_apart_are_at_distance_one() {
    let a = DiscreteMeasure::dirac(&[0.0]);
    let b = DiscreteMeasure::dirac(&[2.0]);
    assert!((dual_lipschitz(&a, &b).unwrap() - 1.0).abs() < 1e-9);
    let c = DiscreteMeasure::dirac(&[0.5]);
    assert!((dual_lipschitz(&a, &c).unwrap() - 0.4).abs() < 1e-9);
}

#[test]
fn coalescence_frequency_is_one_minus_tv() {
    let base = UniformBox::interval(0.0, 1.0);
    let cases = [
        (0.0, 1.0, 0.0),
        (0.3, 1.3, 0.3),
        (0.0, 2.0, 0.5),
        (0.9, 1.9, 0.9),
        (2.0, 3.0, 1.0),
    ];
    let n = 20_000;
    for (k, (a, b, tv)) in cases.into_iter().enumerate() {
        let q = UniformBox::interval(a, b);
        let mut g = RngState::new(10 + k as u64).generator();
        let hits = (0..n)
            .filter(|_| {
                maximal_coupling_densities(&base, &base, &q, &q, &mut g)
                    .unwrap()
                    .coalesced
            })
            .count() as f64
            / n as f64;
        let se = (tv * (1.0 - tv) / n as f64).sqrt().max(1e-12);
        assert!((hits - (1.0 - tv)).abs() <= 3.0 * se, "{hits} vs {}", 1.0 - tv);
    }
}

#[test]
fn coupled_draws_keep_their_marginals() {
    let p = UniformBox::interval(0.0, 1.0);
    let q = UniformBox::interval(0.5, 1.5);
    let mut g = RngState::new(20).generator();
    let ys: Vec<f64> = (0..20_000)
        .map(|_| maximal_coupling_densities(&p, &p, &q, &q, &mut g).unwrap().y[0])
        .collect();
    let ks = ctrlmix_core::stats::ks_statistic(&ys, |y| (y - 0.5).clamp(0.0, 1.0));
    assert!(ks < 0.015, "{ks}");
}

#[test]
fn shift_tv_scales_linearly() {
    let base: Arc<dyn Density> = Arc::new(ProductDensity::new(vec![ModeDensity::Biweight; 2]).unwrap());
    let spec = GridSpec::new(vec![-1.3, -1.3], vec![1.3, 1.3], vec![130, 130]).unwrap();
    let kappas = [0.01, 0.02, 0.05, 0.1, 0.2];
    let families: [&dyn Fn(f64) -> ShiftMap; 3] = [
        &|k| ShiftMap::constant(vec![0.8 * k, 0.6 * k]),
        &|k| {
            ShiftMap::new(
                2,
                k,
                Arc::new(move |z: &[f64]| vec![0.5 * k * z[1], -0.5 * k * z[0] + 0.5 * k]),
            )
        },
        &|k| {
            ShiftMap::new(
                2,
                k,
                Arc::new(move |z: &[f64]| vec![0.7 * k * z[0].sin(), 0.7 * k * z[1].tanh()]),
            )
        },
    ];
    for f in families {
        let rep = verify_shift_tv_bound(base.clone(), f, &kappas, &spec, 3.0).unwrap();
        assert!(rep.pass, "{rep:?}");
    }
}

#[test]
fn cost_is_bounded_by_twice_tv() {
    let c = 0.2;
    let mut g = RngState::new(30).generator();
    let mut draw = |n: usize| (0..n).map(|_| vec![g.random::<f64>()]).collect::<Vec<_>>();
    let (w1, w2) = (draw(2000), draw(2000));
    let rep = cost_tv_inequality_check(
        &w1,
        &w2,
        &|w| w.to_vec(),
        &|w| vec![w[0] - c],
        &|w| vec![w[0] + c],
        // Independent samples only match up to the sampling scale.
        0.05,
        c,
        0.02,
    )
    .unwrap();
    assert!(rep.pass, "{rep:?}");
}

#[test]
fn measure_csv_round_trip() {
    let mut g = RngState::new(40).generator();
    let m = random_measure(&mut g, 3, 10, 2.0);
    let mut buf = Vec::new();
    m.to_csv(&mut buf).unwrap();
    let back = DiscreteMeasure::from_csv(buf.as_slice()).unwrap();
    assert_eq!(m, back);
}

#[test]
fn density_grid_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = GridSpec::new(vec![-1.0, 0.0], vec![1.0, 2.0], vec![8, 5]).unwrap();
    let grid = DensityGrid::from_fn(spec, |x| 1.0 + x[0] * x[0] + x[1]).unwrap();
    let (bin, hdr) = (dir.path().join("p.bin"), dir.path().join("p.json"));
    grid.write(&bin, &hdr).unwrap();
    let back = DensityGrid::read(&bin, &hdr).unwrap();
    assert_eq!(grid.values, back.values);
    assert!(tv_distance_grid(&grid, &back).unwrap() == 0.0);
}
