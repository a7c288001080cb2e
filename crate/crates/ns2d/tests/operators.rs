use std::f64::consts::PI;

use ctrlmix_core::RngState;
use ctrlmix_ns2d::elliptic::{solve_clamped_biharmonic, solve_dirichlet_laplace};
use ctrlmix_ns2d::extension::{boundary_trace, trace_error};
use ctrlmix_ns2d::grid::node_grid;
use ctrlmix_ns2d::hopf::{cutoff_gradient_bound, hopf_cutoff, hopf_extension, hopf_ratios, Cutoff};
use ctrlmix_ns2d::leray::{cell_gradient, leray_project};
use ctrlmix_ns2d::{extend_boundary_field, BoundaryData, BoundaryNoise, MacField, SquareDomain};
use nalgebra::DMatrix;
use rand::Rng;

/// Tangential bump on the top edge plus a zero-flux normal profile on the
/// right edge, both vanishing near corners.
fn mixed_data(dom: &SquareDomain) -> BoundaryData {
    let bump = |a: f64, b: f64, x: f64| {
        if x <= a || x >= b {
            0.0
        } else {
            let t = (x - a) / (b - a);
            (PI * t).sin().powi(2)
        }
    };
    BoundaryData::from_fns(
        dom,
        |s| {
            if (1.0..2.0).contains(&s) {
                0.5 * bump(1.2, 1.8, s) * (2.0 * PI * (s - 1.2) / 0.6).sin()
            } else {
                0.0
            }
        },
        |s| {
            if (2.0..3.0).contains(&s) {
                bump(2.2, 2.8, s)
            } else {
                0.0
            }
        },
    )
}

#[test]
fn random_laplace_data_obey_the_maximum_principle() {
    let d = SquareDomain::new(32).unwrap();
    let mut rng = RngState::new(3).generator();
    let g: Vec<f64> = (0..d.boundary_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (p, res) = solve_dirichlet_laplace(&d, &g).unwrap();
    let (lo, hi) = g.iter().fold((f64::MAX, f64::MIN), |(a, b), x| (a.min(*x), b.max(*x)));
    assert!(res <= 1e-9);
    assert!(p.iter().all(|x| *x >= lo - 1e-12 && *x <= hi + 1e-12));
}

#[test]
fn harmonic_polynomial_is_recovered() {
    let d = SquareDomain::new(32).unwrap();
    let exact = node_grid(32, |x, y| x * x - y * y + 0.3 * x * y);
    let g: Vec<f64> = (0..d.boundary_len())
        .map(|k| {
            let (i, j) = d.boundary_node(k);
            exact[(j, i)]
        })
        .collect();
    let (p, _) = solve_dirichlet_laplace(&d, &g).unwrap();
    assert!((p - exact).amax() < 1e-10);
}

#[test]
fn manufactured_plate_converges_at_second_order() {
    let q = |x: f64, y: f64| (x * (1.0 - x) * y * (1.0 - y)).powi(2);
    // Delta^2 of (x(1-x))^2 (y(1-y))^2 in closed form.
    let f = |x: f64, y: f64| {
        let a = (x * (1.0 - x)).powi(2);
        let b = (y * (1.0 - y)).powi(2);
        let a2 = 2.0 - 12.0 * x + 12.0 * x * x;
        let b2 = 2.0 - 12.0 * y + 12.0 * y * y;
        24.0 * b + 2.0 * a2 * b2 + 24.0 * a
    };
    let mut errs = Vec::new();
    for n in [16, 32, 64] {
        let d = SquareDomain::new(n).unwrap();
        let src = DMatrix::from_fn(n - 1, n - 1, |j, i| f((i + 1) as f64 * d.h, (j + 1) as f64 * d.h));
        let s = solve_clamped_biharmonic(&d, &vec![0.0; d.boundary_len()], Some(&src)).unwrap();
        assert!(s.residual <= 1e-8);
        let exact = node_grid(n, q);
        errs.push((s.q - exact).amax());
    }
    println!("plate errors {errs:?}");
    assert!(errs[0] / errs[1] >= 3.0 && errs[1] / errs[2] >= 3.0, "{errs:?}");
}

#[test]
fn symmetric_neumann_data_give_a_symmetric_plate() {
    let d = SquareDomain::new(32).unwrap();
    let data = BoundaryNoise::default().mode_data(&d, 1);
    // shape(1) is symmetric about x = 1/2 on the top edge.
    let g: Vec<f64> = data.vt.clone();
    let s = solve_clamped_biharmonic(&d, &g, None).unwrap();
    let n = d.n;
    let mut asym: f64 = 0.0;
    for j in 0..=n {
        for i in 0..=n {
            asym = asym.max((s.q[(j, i)] - s.q[(j, n - i)]).abs());
        }
    }
    assert!(asym < 1e-9, "{asym}");
}

#[test]
fn extension_is_solenoidal_linear_and_trace_consistent() {
    let mut errs = Vec::new();
    for n in [32, 64, 128] {
        let d = SquareDomain::new(n).unwrap();
        let data = mixed_data(&d);
        let f = extend_boundary_field(&d, &data).unwrap();
        assert!(f.max_divergence(d.h) <= 1e-10, "divergence {}", f.max_divergence(d.h));
        assert!(f.boundary_flux(d.h).abs() <= 1e-10);
        errs.push(trace_error(&d, &f, &data));
    }
    println!("trace errors {errs:?}");
    assert!(errs[1] <= 0.05);
    assert!(errs[0] / errs[1] >= 1.8 && errs[1] / errs[2] >= 1.8, "{errs:?}");

    let d = SquareDomain::new(32).unwrap();
    let a = mixed_data(&d);
    let b = BoundaryNoise::default().mode_data(&d, 2);
    let combo = BoundaryData {
        vn: a.vn.iter().zip(&b.vn).map(|(x, y)| 2.0 * x - 3.0 * y).collect(),
        vt: a.vt.iter().zip(&b.vt).map(|(x, y)| 2.0 * x - 3.0 * y).collect(),
    };
    let lhs = extend_boundary_field(&d, &combo).unwrap();
    let mut rhs = extend_boundary_field(&d, &a).unwrap().scaled(2.0);
    rhs.axpy(-3.0, &extend_boundary_field(&d, &b).unwrap());
    let diff = (&lhs.u - &rhs.u).amax().max((&lhs.v - &rhs.v).amax());
    assert!(diff < 1e-12, "linearity defect {diff:e}");
}

#[test]
fn normal_faces_reproduce_normal_data_exactly() {
    let d = SquareDomain::new(32).unwrap();
    let data = mixed_data(&d);
    let f = extend_boundary_field(&d, &data).unwrap();
    let tr = boundary_trace(&d, &f);
    for k in 0..d.boundary_len() {
        assert!((tr.vn[k] - data.vn[k]).abs() < 1e-12);
    }
}

#[test]
fn net_flux_is_rejected() {
    let d = SquareDomain::new(16).unwrap();
    let data = BoundaryData::from_fns(&d, |_| 1.0, |_| 0.0);
    assert!(extend_boundary_field(&d, &data).is_err());
}

#[test]
fn cutoff_examples() {
    let d = SquareDomain::new(64).unwrap();
    for delta in [0.25, 0.3] {
        let th = hopf_cutoff(&d, delta).unwrap();
        for k in 0..d.boundary_len() {
            let (i, j) = d.boundary_node(k);
            assert_eq!(th[(j, i)], 1.0);
        }
        assert_eq!(th[(32, 32)], 0.0);
        let g = cutoff_gradient_bound(&d, delta).unwrap();
        assert!(g <= delta * (1.0 + 5.0 * d.h), "{g}");
    }
    // The support of the ramp shrinks below the grid for small delta.
    match hopf_cutoff(&d, 0.1) {
        Err(ctrlmix_core::Error::Resolution { min_n, .. }) => assert!(min_n > 64),
        other => panic!("expected a resolution error, got {other:?}"),
    }
}

#[test]
fn hopf_extension_support_and_trace() {
    // delta = 0.49 has a plateau of ~8.4e-3, resolved from n = 238 on.
    let d = SquareDomain::new(256).unwrap();
    let noise = BoundaryNoise::default();
    let data = noise.mode_data(&d, 1);
    let delta = 0.49;
    let c = Cutoff::new(delta).unwrap();
    let f = hopf_extension(&d, &data, delta).unwrap();
    assert!(f.max_divergence(d.h) <= 1e-10);
    let n = d.n;
    for j in 0..n {
        for i in 1..n {
            let (x, y) = (i as f64 * d.h, (j as f64 + 0.5) * d.h);
            // A face is zero once both nodes it differences are outside the layer.
            if SquareDomain::dist(x, y) > c.r_out + d.h {
                assert_eq!(f.u[(j, i)], 0.0);
            }
        }
    }
    let plain = extend_boundary_field(&d, &data).unwrap();
    let e_hopf = trace_error(&d, &f, &data);
    let e_plain = trace_error(&d, &plain, &data);
    assert!(e_hopf <= 1.5 * e_plain + 1e-3, "{e_hopf} vs {e_plain}");
    assert!(hopf_extension(&d, &BoundaryData::zero(&d), delta).unwrap().max_abs() == 0.0);
    assert!(hopf_extension(&SquareDomain::new(64).unwrap(), &data, delta).is_err());
}

#[test]
fn hopf_trilinear_ratio_decreases_with_delta() {
    let d = SquareDomain::new(64).unwrap();
    let data = BoundaryNoise::default().mode_data(&d, 1);
    let mut rng = RngState::new(11).generator();
    let rows = hopf_ratios(&d, &data, &[0.3, 0.2, 0.1], 100, &mut rng).unwrap();
    for r in &rows {
        println!("delta {} ratio {:.3e} raw {:.3e}", r.delta, r.ratio, r.max_trilinear);
    }
    assert!(rows[0].ratio > rows[1].ratio && rows[1].ratio > rows[2].ratio);
}

#[test]
fn leray_examples() {
    let d = SquareDomain::new(32).unwrap();
    // Pure gradient with zero normal derivative.
    let phi = DMatrix::from_fn(32, 32, |j, i| {
        let (x, y) = ((i as f64 + 0.5) * d.h, (j as f64 + 0.5) * d.h);
        (PI * x).cos() * (2.0 * PI * y).cos()
    });
    let g = cell_gradient(&phi, d.h);
    assert!(leray_project(&d, &g).max_abs() <= 1e-9);

    let mut rng = RngState::new(5).generator();
    let mut f = MacField::zeros(32);
    f.u.iter_mut()
        .chain(f.v.iter_mut())
        .for_each(|x| *x = rng.random_range(-1.0..1.0));
    let p = leray_project(&d, &f);
    assert!(p.max_divergence(d.h) <= 1e-10);
    let pp = leray_project(&d, &p);
    assert!((&pp.u - &p.u).amax() <= 1e-10 && (&pp.v - &p.v).amax() <= 1e-10);
}
