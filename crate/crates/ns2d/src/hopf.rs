//! Hopf's boundary-layer cutoff and the trilinear-form check.
//!
//! `theta_delta(d) = 1` for `d <= r_in = e^{-2/delta} / 2`, `0` for
//! `d >= r_out = 2 e^{-1/delta}`, linear in `ln d` in between, so that
//! `|theta'| d = 1 / ln(r_out / r_in) <= delta`.

use std::f64::consts::PI;

use ctrlmix_core::{Error, Result};
use nalgebra::DMatrix;
use rand::Rng;

use crate::extension::{stream_potentials, BoundaryData};
use crate::grid::{MacField, SquareDomain};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    pub delta: f64,
    pub r_in: f64,
    pub r_out: f64,
}

impl Cutoff {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::Config(format!("Hopf delta must lie in (0, 0.5), got {delta}")));
        }
        Ok(Self {
            delta,
            r_in: 0.5 * (-2.0 / delta).exp(),
            r_out: 2.0 * (-1.0 / delta).exp(),
        })
    }

    /// `(theta(d), theta'(d))`.
    pub fn eval(&self, d: f64) -> (f64, f64) {
        if d <= self.r_in {
            (1.0, 0.0)
        } else if d >= self.r_out {
            (0.0, 0.0)
        } else {
            let span = (self.r_out / self.r_in).ln();
            ((self.r_out / d).ln() / span, -1.0 / (span * d))
        }
    }
}

/// `theta_delta` on nodes. The ramp must span at least two cells.
pub fn hopf_cutoff(dom: &SquareDomain, delta: f64) -> Result<DMatrix<f64>> {
    let c = Cutoff::new(delta)?;
    if c.r_out < 2.0 * dom.h {
        return Err(Error::Resolution {
            detail: format!("cutoff support {:.3e} is below two cells at delta = {delta}", c.r_out),
            min_n: (2.0 / c.r_out).ceil() as usize,
        });
    }
    let n = dom.n;
    Ok(DMatrix::from_fn(n + 1, n + 1, |j, i| {
        c.eval(SquareDomain::dist(i as f64 * dom.h, j as f64 * dom.h)).0
    }))
}

/// Largest `|grad theta| * dist` over nodes off the boundary.
pub fn cutoff_gradient_bound(dom: &SquareDomain, delta: f64) -> Result<f64> {
    let c = Cutoff::new(delta)?;
    hopf_cutoff(dom, delta)?;
    let n = dom.n;
    let mut worst: f64 = 0.0;
    for j in 1..n {
        for i in 1..n {
            let d = SquareDomain::dist(i as f64 * dom.h, j as f64 * dom.h);
            worst = worst.max(c.eval(d).1.abs() * d);
        }
    }
    Ok(worst)
}

/// `E_delta v = curl^perp(p + theta_delta q)`: the harmonic (normal-flux)
/// part is kept whole, only the tangential potential is cut off. The
/// discrete trace is right only when the plateau `r_in` covers the two
/// node rows next to the wall.
pub fn hopf_extension(dom: &SquareDomain, data: &BoundaryData, delta: f64) -> Result<MacField> {
    let theta = hopf_cutoff(dom, delta)?;
    let c = Cutoff::new(delta)?;
    if c.r_in < 2.0 * dom.h {
        return Err(Error::Resolution {
            detail: format!(
                "cutoff plateau {:.3e} is thinner than two cells at delta = {delta}",
                c.r_in
            ),
            min_n: (2.0 / c.r_in).ceil() as usize,
        });
    }
    if data.is_zero() {
        return Ok(MacField::zeros(dom.n));
    }
    let s = stream_potentials(dom, data)?;
    let psi = &s.p + s.q.component_mul(&theta);
    Ok(MacField::from_stream(&psi, dom.h))
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(m);
    for k in 0..m {
        let mut x = (PI * (k as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for l in 2..=m {
                let p2 = ((2 * l - 1) as f64 * x * p1 - (l - 1) as f64 * p0) / l as f64;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { 1.0 } else { p0 };
            let pn = if m == 1 { x } else { p1 };
            dp = m as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// A smooth velocity field in `V` (divergence-free, zero on the boundary),
/// `u = curl^perp phi` with `phi = sum c_kl X_k(x) X_l(y)` and
/// `X_k(x) = x^2 (1-x)^2 cos((k-1) pi x)`.
#[derive(Debug, Clone)]
pub struct TestField {
    pub coeffs: Vec<Vec<f64>>,
}

fn basis(k: usize, x: f64) -> [f64; 3] {
    let f = x * x * (1.0 - x) * (1.0 - x);
    let f1 = 2.0 * x * (1.0 - x) * (1.0 - 2.0 * x);
    let f2 = 2.0 * (1.0 - 6.0 * x + 6.0 * x * x);
    let w = (k as f64 - 1.0) * PI;
    let (g, g1, g2) = ((w * x).cos(), -w * (w * x).sin(), -w * w * (w * x).cos());
    [f * g, f1 * g + f * g1, f2 * g + 2.0 * f1 * g1 + f * g2]
}

impl TestField {
    pub fn random<R: Rng + ?Sized>(modes: usize, rng: &mut R) -> Self {
        Self {
            coeffs: (0..modes)
                .map(|_| (0..modes).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect(),
        }
    }

    /// `(u, grad u)` with `grad u = [[du1/dx, du1/dy], [du2/dx, du2/dy]]`.
    pub fn eval(&self, x: f64, y: f64) -> ([f64; 2], [[f64; 2]; 2]) {
        let (mut px, mut py, mut pxx, mut pxy, mut pyy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (k, row) in self.coeffs.iter().enumerate() {
            let bx = basis(k + 1, x);
            for (l, c) in row.iter().enumerate() {
                let by = basis(l + 1, y);
                px += c * bx[1] * by[0];
                py += c * bx[0] * by[1];
                pxx += c * bx[2] * by[0];
                pxy += c * bx[1] * by[1];
                pyy += c * bx[0] * by[2];
            }
        }
        ([-py, px], [[-pxy, -pyy], [pxx, pxy]])
    }

    /// `|grad u|_{L^2}^2` by tensor Gauss quadrature.
    pub fn h1_sq(&self) -> f64 {
        let gl = gauss_legendre(48);
        let mut s = 0.0;
        for &(a, wa) in &gl {
            for &(b, wb) in &gl {
                let (_, g) = self.eval(0.5 * (a + 1.0), 0.5 * (b + 1.0));
                let sq: f64 = g.iter().flatten().map(|v| v * v).sum();
                s += 0.25 * wa * wb * sq;
            }
        }
        s
    }
}

/// Bilinear interpolation of node values and its gradient.
fn bilinear(psi: &DMatrix<f64>, h: f64, x: f64, y: f64) -> (f64, [f64; 2]) {
    let n = psi.nrows() - 1;
    let i = ((x / h).floor() as usize).min(n - 1);
    let j = ((y / h).floor() as usize).min(n - 1);
    let a = x / h - i as f64;
    let b = y / h - j as f64;
    let (p00, p10, p01, p11) = (psi[(j, i)], psi[(j, i + 1)], psi[(j + 1, i)], psi[(j + 1, i + 1)]);
    let val = p00 * (1.0 - a) * (1.0 - b) + p10 * a * (1.0 - b) + p01 * (1.0 - a) * b + p11 * a * b;
    let dx = ((p10 - p00) * (1.0 - b) + (p11 - p01) * b) / h;
    let dy = ((p01 - p00) * (1.0 - a) + (p11 - p10) * a) / h;
    (val, [dx, dy])
}

/// `b(u, zeta, u) = ((u . grad) zeta, u) = -((u . grad) u, zeta)` for
/// `zeta = curl^perp(theta_delta q)`, with the tangential potential `q`
/// interpolated bilinearly from the grid and the cutoff evaluated exactly.
/// The quadrature runs over the layer `dist <= r_out` edge by edge, with
/// Gauss panels in `ln d` across the ramp so sub-cell layers are resolved.
pub fn trilinear_layer(dom: &SquareDomain, q: &DMatrix<f64>, cutoff: &Cutoff, u: &TestField) -> f64 {
    let gl = gauss_legendre(12);
    let s_points = 8 * dom.n;
    let mut panels: Vec<(f64, f64, bool)> = vec![(0.0, cutoff.r_in, false)];
    let decades = ((cutoff.r_out / cutoff.r_in).ln() / 2.0).ceil().max(1.0) as usize;
    let (l0, l1) = (cutoff.r_in.ln(), cutoff.r_out.ln());
    for p in 0..decades {
        let a = l0 + (l1 - l0) * p as f64 / decades as f64;
        let b = l0 + (l1 - l0) * (p + 1) as f64 / decades as f64;
        panels.push((a, b, true));
    }
    let mut total = 0.0;
    for side in 0..4 {
        for si in 0..s_points {
            let s = (si as f64 + 0.5) / s_points as f64;
            let ds = 1.0 / s_points as f64;
            for &(a, b, log) in &panels {
                for &(t, w) in &gl {
                    let z = 0.5 * (a + b) + 0.5 * (b - a) * t;
                    let (d, jac) = if log { (z.exp(), z.exp()) } else { (z, 1.0) };
                    // Only the nearest edge owns a point.
                    if d > s.min(1.0 - s) {
                        continue;
                    }
                    let (x, y, grad_d) = match side {
                        0 => (s, d, [0.0, 1.0]),
                        1 => (1.0 - d, s, [-1.0, 0.0]),
                        2 => (s, 1.0 - d, [0.0, -1.0]),
                        _ => (d, s, [1.0, 0.0]),
                    };
                    let (th, dth) = cutoff.eval(d);
                    let (qv, gq) = bilinear(q, dom.h, x, y);
                    // grad(theta q)
                    let gx = dth * grad_d[0] * qv + th * gq[0];
                    let gy = dth * grad_d[1] * qv + th * gq[1];
                    let zeta = [-gy, gx];
                    let (uu, gu) = u.eval(x, y);
                    let adv = [uu[0] * gu[0][0] + uu[1] * gu[0][1], uu[0] * gu[1][0] + uu[1] * gu[1][1]];
                    total -= (adv[0] * zeta[0] + adv[1] * zeta[1]) * w * 0.5 * (b - a) * jac * ds;
                }
            }
        }
    }
    total
}

#[derive(Debug, Clone)]
pub struct HopfRow {
    pub delta: f64,
    pub ratio: f64,
    /// Raw `max |b(u, zeta, u)|` before normalisation.
    pub max_trilinear: f64,
}

/// `sup_u |b(u, zeta_delta, u)| / (|v|_proxy |u|_1^2)` over random smooth
/// `u` in `V`, for each `delta`.
pub fn hopf_ratios<R: Rng + ?Sized>(
    dom: &SquareDomain,
    data: &BoundaryData,
    deltas: &[f64],
    samples: usize,
    rng: &mut R,
) -> Result<Vec<HopfRow>> {
    if data.vn.iter().any(|x| *x != 0.0) {
        return Err(Error::InvalidInput(
            "the Hopf check takes purely tangential data".into(),
        ));
    }
    let s = stream_potentials(dom, data)?;
    let vnorm = data.h1_norm(dom.h);
    let fields: Vec<(TestField, f64)> = (0..samples)
        .map(|_| {
            let f = TestField::random(3, rng);
            let n1 = f.h1_sq();
            (f, n1)
        })
        .collect();
    deltas
        .iter()
        .map(|&delta| {
            let c = Cutoff::new(delta)?;
            let mut ratio: f64 = 0.0;
            let mut raw: f64 = 0.0;
            for (f, n1) in &fields {
                let b = trilinear_layer(dom, &s.q, &c, f).abs();
                raw = raw.max(b);
                ratio = ratio.max(b / (vnorm * n1));
            }
            Ok(HopfRow {
                delta,
                ratio,
                max_trilinear: raw,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let gl = gauss_legendre(6);
        let s: f64 = gl.iter().map(|(x, w)| w * x.powi(10)).sum();
        assert!((s - 2.0 / 11.0).abs() < 1e-13);
        assert!((gl.iter().map(|p| p.1).sum::<f64>() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn cutoff_plateau_and_support() {
        let c = Cutoff::new(0.3).unwrap();
        assert_eq!(c.eval(0.0).0, 1.0);
        assert_eq!(c.eval(0.5).0, 0.0);
        let mid = (c.r_in * c.r_out).sqrt();
        assert!((c.eval(mid).0 - 0.5).abs() < 1e-12);
        assert!(c.eval(mid).1.abs() * mid <= 0.3);
    }

    #[test]
    fn test_fields_vanish_on_the_wall() {
        let mut rng = ctrlmix_core::RngState::new(1).generator();
        let f = TestField::random(3, &mut rng);
        for t in [0.0, 0.3, 0.9] {
            let (u, _) = f.eval(t, 0.0);
            assert!(u[0].abs() < 1e-14 && u[1].abs() < 1e-14);
        }
    }
}
