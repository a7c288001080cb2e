use ctrlmix_core::coupling::{mixing_rate, MixMode, MixingConfig};
use ctrlmix_core::toybench::{synchronous_coupling_bound, ToySystem};
use ctrlmix_core::{Exec, ModeDensity, NoiseModel, RngState};

fn toy() -> (ToySystem, NoiseModel) {
    let sys = ToySystem::ContractingAffine {
        c: 0.5,
        dim: 1,
        noise_bound: 0.5,
    };
    (sys, NoiseModel::iid(vec![0.5], ModeDensity::Uniform).unwrap())
}

fn ident(u: &[f64], _: &[f64]) -> Vec<f64> {
    u.to_vec()
}

#[test]
fn halving_rate_is_ln2() {
    let (sys, model) = toy();
    let cfg = MixingConfig {
        k_max: 12,
        n: 40_000,
        ..MixingConfig::default()
    };
    let rep = mixing_rate(
        &sys,
        &model,
        &[vec![-1.0], vec![1.0]],
        &ident,
        &cfg,
        RngState::new(3),
        Exec::Parallel,
    )
    .unwrap();
    let gamma = rep.gamma.unwrap();
    assert!((gamma - 2f64.ln()).abs() < 0.15 * 2f64.ln(), "{gamma} {rep:?}");
    for row in &rep.rows {
        let bound = synchronous_coupling_bound(0.5, -1.0, 1.0, row.k);
        assert!(row.distance <= bound + 3.0 * row.floor + 1e-12, "{row:?}");
    }
}

#[test]
fn identical_starts_are_floor_limited() {
    let (sys, model) = toy();
    let cfg = MixingConfig {
        k_max: 6,
        n: 4000,
        ..MixingConfig::default()
    };
    let rep = mixing_rate(
        &sys,
        &model,
        &[vec![0.3], vec![0.3]],
        &ident,
        &cfg,
        RngState::new(4),
        Exec::Parallel,
    )
    .unwrap();
    assert!(!rep.conclusive);
    assert!(rep.gamma.is_none());
    for row in rep.rows.iter().skip(1) {
        assert!(row.distance < 4.0 * row.floor + 0.05, "{row:?}");
    }
}

#[test]
fn floor_shrinks_with_ensemble_size() {
    let (sys, model) = toy();
    let floor = |n| {
        let cfg = MixingConfig {
            k_max: 8,
            n,
            ..MixingConfig::default()
        };
        let rep = mixing_rate(
            &sys,
            &model,
            &[vec![-1.0], vec![1.0]],
            &ident,
            &cfg,
            RngState::new(5),
            Exec::Parallel,
        )
        .unwrap();
        rep.rows[5..].iter().map(|r| r.floor).sum::<f64>()
    };
    // Quadrupling n halves the floor.
    let ratio = floor(2000) / floor(8000);
    assert!((1.4..=2.6).contains(&ratio), "{ratio}");
}

#[test]
fn common_noise_contracts_exactly() {
    let (sys, model) = toy();
    let cfg = MixingConfig {
        k_max: 10,
        n: 500,
        mode: MixMode::CommonNoise,
        ..MixingConfig::default()
    };
    let rep = mixing_rate(
        &sys,
        &model,
        &[vec![-1.0], vec![1.0]],
        &ident,
        &cfg,
        RngState::new(6),
        Exec::Parallel,
    )
    .unwrap();
    // Shared noise is itself a coupling, so it bounds every lag.
    for row in &rep.rows {
        assert!(
            row.distance <= synchronous_coupling_bound(0.5, -1.0, 1.0, row.k) + 1e-12,
            "{row:?}"
        );
    }
    assert!((rep.gamma.unwrap() - 2f64.ln()).abs() < 0.15 * 2f64.ln());
    assert!(rep.r2.unwrap() > 0.99);
}

#[test]
fn sequential_and_parallel_agree() {
    let (sys, model) = toy();
    let cfg = MixingConfig {
        k_max: 5,
        n: 3000,
        stationary_burn: Some(3),
        ..MixingConfig::default()
    };
    let u0 = [vec![-1.0], vec![1.0]];
    let a = mixing_rate(&sys, &model, &u0, &ident, &cfg, RngState::new(7), Exec::Sequential).unwrap();
    let b = mixing_rate(&sys, &model, &u0, &ident, &cfg, RngState::new(7), Exec::Parallel).unwrap();
    assert_eq!(a, b);
    assert!(a.rows.iter().all(|r| r.stationary.is_some()));
}
