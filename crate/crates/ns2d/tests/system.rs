use ctrlmix_core::rng::RngState;
use ctrlmix_core::stabiliser::verify_stabilisability;
use ctrlmix_core::{Exec, ModeDensity, NoiseModel, SystemMap};
use ctrlmix_ns2d::feedback::{FeedbackConfig, NsFeedback};
use ctrlmix_ns2d::io::{read_snapshot, write_boundary_trace, write_snapshot};
use ctrlmix_ns2d::probe::{decay_probe, dissipativity_probe, entry_check, scaled_mode};
use ctrlmix_ns2d::solver::RunOptions;
use ctrlmix_ns2d::{BoundaryNoise, NsParams, NsSystem};

fn system(n: usize, dt: f64, nu: f64) -> NsSystem {
    let p = NsParams {
        n,
        dt,
        nu,
        ..NsParams::default()
    };
    NsSystem::new(p, BoundaryNoise::default(), 10.0).unwrap()
}

fn model() -> NoiseModel {
    NoiseModel::iid(vec![1.0, 0.5, 0.25, 0.125], ModeDensity::Uniform).unwrap()
}

#[test]
fn rest_state_and_observable_shape() {
    let s = system(16, 0.02, 0.05);
    let zero = vec![0.0; s.state_dim()];
    let (end, path) = s.step_with_path(&zero, &[0.0; 4]).unwrap();
    assert!(end.iter().all(|x| *x == 0.0));
    assert_eq!(path, vec![0.0; 4]);
    let obs = s.observable();
    assert_eq!(obs(&zero, &[]).len(), 8);
    assert_eq!(obs(&end, &path).len(), 8);
}

#[test]
fn unforced_decay_fits_an_exponential() {
    let s = system(32, 0.01, 0.05);
    let fit = decay_probe(&s, &scaled_mode(&s, 1.0).unwrap(), 20).unwrap();
    println!(
        "alpha {:.4} c9 {:.4} r2 {:.5} over {} lags",
        fit.alpha, fit.c9, fit.r2, fit.fit_lags
    );
    assert!(fit.alpha > 0.0 && fit.r2 >= 0.95);
    assert!(fit.norms.windows(2).all(|w| w[1] <= w[0]));
    // Steps to reach eps follow from the fit.
    let m = fit.steps_to(1e-3);
    assert!(fit.c9 * (-fit.alpha * m as f64).exp() <= 1e-3);
    assert!(m == 0 || fit.c9 * (-fit.alpha * (m - 1) as f64).exp() > 1e-3);
}

#[test]
fn forced_trajectories_stay_bounded_and_enter_the_ball() {
    let s = system(16, 0.02, 0.05);
    let fit = decay_probe(&s, &scaled_mode(&s, 1.0).unwrap(), 20).unwrap();
    let starts = vec![vec![0.0; s.state_dim()], scaled_mode(&s, 2.0).unwrap()];
    let rep = dissipativity_probe(
        &s,
        &model(),
        &starts,
        4,
        12,
        fit.alpha,
        RngState::new(9),
        Exec::Sequential,
    )
    .unwrap();
    println!(
        "c1 {:.4} R {:.4} sup {:.4}",
        rep.c1,
        rep.absorbing_radius,
        rep.sup_norm()
    );
    println!("sup norms {:?}", rep.sup_norms);
    assert!(rep.sup_norm().is_finite() && rep.sup_norm() <= rep.c1 * (2.0 + 1.0) * (1.0 + 1e-12));
    let e = entry_check(&s, &model(), &rep, 10.0, 12, RngState::new(10)).unwrap();
    println!("entry {e:?}");
    let m = e.measured.expect("entered the absorbing ball") as f64;
    assert!(m <= 2.0 * e.predicted.max(1.0) && m >= 0.5 * e.predicted);
    // Without noise the probe reduces to the decay fit: C1 is at most the
    // fit's own constant relative to the start.
    let zero = NoiseModel::iid(vec![0.0; 4], ModeDensity::Uniform).unwrap();
    let quiet = dissipativity_probe(
        &s,
        &zero,
        &starts[1..],
        1,
        12,
        fit.alpha,
        RngState::new(9),
        Exec::Sequential,
    )
    .unwrap();
    assert!(quiet.c1 <= 1.0 + 1e-12);
}

#[test]
fn dissipativity_rejects_non_positive_rates() {
    let s = system(16, 0.02, 0.05);
    let starts = vec![vec![0.0; s.state_dim()]];
    assert!(dissipativity_probe(&s, &model(), &starts, 1, 2, 0.0, RngState::new(1), Exec::Sequential).is_err());
}

fn pair(s: &NsSystem, d: f64) -> (Vec<f64>, Vec<f64>) {
    let u = scaled_mode(s, 1.0).unwrap();
    let l2 = s.norm().eval(&u);
    // Rotate a copy of the mode by a quarter turn to get a different shape.
    let w = s.field(&u).unwrap().quarter_turn().interior();
    let u2: Vec<f64> = u
        .iter()
        .zip(&w)
        .map(|(a, b)| a + d / l2 * (b - a) / 2f64.sqrt())
        .collect();
    (u, u2)
}

#[test]
fn feedback_is_zero_on_the_diagonal() {
    let s = system(16, 0.02, 0.05);
    let fb = NsFeedback::new(s.clone(), FeedbackConfig::default()).unwrap();
    let u = scaled_mode(&s, 1.0).unwrap();
    let out = fb.solve(&u, &u, &[0.3, -0.2, 0.1, 0.0]).unwrap();
    assert_eq!(out.phi, vec![0.0; 4]);
}

#[test]
fn feedback_contracts_nearby_pairs() {
    let s = system(16, 0.02, 0.05);
    let fb = NsFeedback::new(s.clone(), FeedbackConfig::default()).unwrap();
    let (u, u2) = pair(&s, 1e-2);
    println!("pair distance {:.3e}", s.distance(&u, &u2));
    let out = fb.solve(&u, &u2, &[0.5, -0.3, 0.2, 0.1]).unwrap();
    println!(
        "factor {:.3e} uncontrolled {:.3e} trace {:?}",
        out.factor(),
        out.uncontrolled / out.initial,
        out.trace
    );
    assert!(out.factor() < 1.0);
    assert!(out.controlled <= out.uncontrolled);
    // One Gauss–Newton step does most of the work; later ones only polish.
    assert!(out.trace.iter().skip(1).all(|x| *x <= 0.5 * out.trace[0]));

    let pairs: Vec<_> = [5e-3, 1e-2, 2e-2].iter().map(|d| pair(&s, *d)).collect();
    let noise = vec![vec![0.5, -0.3, 0.2, 0.1], vec![-0.8, 0.1, 0.0, 0.05], vec![0.0; 4]];
    let rep = verify_stabilisability(&fb, &s, &pairs, &noise).unwrap();
    println!("{rep:?}");
    assert!(rep.pass && rep.holder_constant.is_finite() && rep.derivative_sup.is_finite());
}

#[test]
fn strong_viscosity_needs_almost_no_control() {
    let s = system(16, 0.02, 0.5);
    let fb = NsFeedback::new(s.clone(), FeedbackConfig::default()).unwrap();
    let (u, u2) = pair(&s, 1e-2);
    let out = fb.solve(&u, &u2, &[0.5, -0.3, 0.2, 0.1]).unwrap();
    println!(
        "phi {:?} uncontrolled factor {:.3e}",
        out.phi,
        out.uncontrolled / out.initial
    );
    assert!(out.uncontrolled <= 0.1 * out.initial);
    assert!(out.phi.iter().all(|x| x.abs() <= 1e-2 * out.initial));
}

#[test]
fn snapshot_and_trace_files_round_trip() {
    let s = system(16, 0.02, 0.05);
    let dir = tempfile::tempdir().unwrap();
    let a = [0.7, -0.2, 0.1, 0.3];
    let opts = RunOptions {
        snapshot_times: vec![0.5, 1.0],
        ..Default::default()
    };
    let r = s.resolve(&scaled_mode(&s, 1.0).unwrap(), &a, &opts).unwrap();
    assert_eq!(r.run.snapshots.len(), 2);
    let (t, f) = &r.run.snapshots[0];
    let stem = dir.path().join("snap");
    write_snapshot(&stem, f, *t).unwrap();
    let (hdr, back) = read_snapshot(&stem).unwrap();
    assert_eq!(hdr.time, *t);
    assert_eq!(&back, f);

    let tr = s.solver.noise.trace(s.dom(), &a, &[0.0, 0.5]);
    let p = dir.path().join("trace.csv");
    write_boundary_trace(&p, s.dom(), &tr).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.starts_with("t,s,v_n,v_tau\n"));
    assert_eq!(text.lines().count(), 1 + 2 * s.dom().boundary_len());
}
