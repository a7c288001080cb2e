//! Projection-method time stepping for `u = zeta + v` on one unit interval.

use ctrlmix_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::extension::extend_boundary_field;
use crate::grid::{MacField, SquareDomain, WallValues};
use crate::hopf::hopf_extension;
use crate::leray::leray_project;
use crate::noise::BoundaryNoise;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NsParams {
    pub nu: f64,
    /// Cells per side.
    pub n: usize,
    /// Nominal time step; steps are subdivided when the CFL cap binds.
    pub dt: f64,
    pub cfl: f64,
    /// Hopf cutoff parameter for the lift; `None` uses the plain extension.
    pub hopf_delta: Option<f64>,
}

impl Default for NsParams {
    fn default() -> Self {
        Self {
            nu: 0.05,
            n: 64,
            dt: 1e-3,
            cfl: 0.5,
            hopf_delta: None,
        }
    }
}

impl NsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::Config(format!("viscosity must be positive, got {}", self.nu)));
        }
        if self.n < 16 {
            return Err(Error::Config(format!("grid needs n >= 16, got {}", self.n)));
        }
        if !(self.dt > 0.0 && self.dt <= 0.1) {
            return Err(Error::Config(format!(
                "time step must lie in (0, 0.1], got {}",
                self.dt
            )));
        }
        let steps = 1.0 / self.dt;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(Error::Config(format!("1/dt must be an integer, got dt = {}", self.dt)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return Err(Error::Config(format!("CFL cap must lie in (0, 0.5], got {}", self.cfl)));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (1.0 / self.dt).round() as usize
    }
}

/// Per-step terms of the energy balance
/// `d/dt |v|^2 + 2 nu |grad v|^2 = 2 (h, v) - 2 (A(zeta + v), v)`,
/// each evaluated with the scheme's own discrete operators at the start of
/// the step. `A` is the full discrete advection, so the balance does not
/// rely on skew-symmetry of the upwind stencil.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub t: f64,
    pub dt: f64,
    pub energy_rate: f64,
    pub dissipation: f64,
    pub forcing: f64,
    pub advection: f64,
}

impl AuditRow {
    pub fn residual(&self) -> f64 {
        self.energy_rate + self.dissipation - self.forcing - self.advection
    }

    pub fn scale(&self) -> f64 {
        self.energy_rate
            .abs()
            .max(self.dissipation.abs())
            .max(self.forcing.abs())
            .max(self.advection.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    /// `sum |residual| dt / sum scale dt`.
    pub relative_residual: f64,
    /// Largest per-step `|residual| / scale`.
    pub max_step_residual: f64,
    pub steps: usize,
}

pub fn summarize_audit(rows: &[AuditRow]) -> AuditSummary {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut worst: f64 = 0.0;
    for r in rows {
        num += r.residual().abs() * r.dt;
        den += r.scale() * r.dt;
        if r.scale() > 0.0 {
            worst = worst.max(r.residual().abs() / r.scale());
        }
    }
    AuditSummary {
        relative_residual: if den > 0.0 { num / den } else { 0.0 },
        max_step_residual: worst,
        steps: rows.len(),
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub audit: bool,
    /// Times at which the full field `zeta + v` is stored.
    pub snapshot_times: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Run {
    /// `v(1) = u(1)`, since the lift vanishes at integer times.
    pub end: MacField,
    /// `|u(t)|^2` at the step ends nearest `t = 1/4, 1/2, 3/4, 1`.
    pub quarter_energies: Vec<f64>,
    pub audit: Vec<AuditRow>,
    pub snapshots: Vec<(f64, MacField)>,
    pub steps: usize,
    pub max_courant: f64,
}

/// Lift of each noise mode at unit amplitude and `beta = 1`.
#[derive(Debug, Clone)]
struct ModeLift {
    field: MacField,
    lap: MacField,
    wall: WallValues,
}

#[derive(Debug, Clone)]
pub struct NsSolver {
    pub dom: SquareDomain,
    pub params: NsParams,
    pub noise: BoundaryNoise,
    lifts: Vec<ModeLift>,
}

impl NsSolver {
    pub fn new(params: NsParams, noise: BoundaryNoise) -> Result<Self> {
        params.validate()?;
        noise.validate()?;
        let dom = SquareDomain::new(params.n)?;
        let lifts = (1..=noise.modes)
            .map(|j| {
                let data = noise.mode_data(&dom, j);
                let field = match params.hopf_delta {
                    Some(delta) => hopf_extension(&dom, &data, delta)?,
                    None => extend_boundary_field(&dom, &data)?,
                };
                let wall = data.wall_values(&dom);
                let lap = field.laplacian(dom.h, &wall);
                Ok(ModeLift { field, lap, wall })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dom,
            params,
            noise,
            lifts,
        })
    }

    pub fn state_dim(&self) -> usize {
        2 * self.dom.n * (self.dom.n - 1)
    }

    /// `zeta(t)` and its tangential wall values for coefficients `a`.
    pub fn lift(&self, a: &[f64], t: f64) -> (MacField, WallValues) {
        let beta = self.noise.profile(t).0;
        let n = self.dom.n;
        let mut z = MacField::zeros(n);
        let mut w = WallValues::zero(n);
        if beta != 0.0 {
            for (aj, l) in a.iter().zip(&self.lifts) {
                z.axpy(beta * aj, &l.field);
                w.add_scaled(beta * aj, &l.wall);
            }
        }
        (z, w)
    }

    /// `h = (nu D - d/dt) zeta` with the time derivative of the profile by
    /// centred differences of width `dt`.
    fn forcing(&self, a: &[f64], t: f64, dt: f64) -> MacField {
        let beta = self.noise.profile(t).0;
        let dbeta = (self.noise.profile(t + dt).0 - self.noise.profile(t - dt).0) / (2.0 * dt);
        let mut f = MacField::zeros(self.dom.n);
        if beta == 0.0 && dbeta == 0.0 {
            return f;
        }
        for (aj, l) in a.iter().zip(&self.lifts) {
            f.axpy(self.params.nu * beta * aj, &l.lap);
            f.axpy(-dbeta * aj, &l.field);
        }
        f
    }

    /// One projection step of length `dt` from time `t`.
    fn step(&self, v: &MacField, a: &[f64], t: f64, dt: f64, audit: Option<&mut Vec<AuditRow>>) -> Result<MacField> {
        let n = self.dom.n;
        let h = self.dom.h;
        let nu = self.params.nu;
        let (zeta, wall) = self.lift(a, t);
        let mut full = zeta;
        full.axpy(1.0, v);
        let adv = full.advection(h, &wall);
        let force = self.forcing(a, t, dt);
        let zero = WallValues::zero(n);
        let lap = v.laplacian(h, &zero);
        let c = 0.5 * dt * nu;
        let mut rhs = v.clone();
        rhs.axpy(-dt, &adv);
        rhs.axpy(dt, &force);
        rhs.axpy(c, &lap);
        let su = self.dom.helmholtz_u(&rhs.u.columns(1, n - 1).into_owned(), c);
        let sv = self.dom.helmholtz_v(&rhs.v.rows(1, n - 1).into_owned(), c);
        let mut star = MacField::zeros(n);
        star.u.columns_mut(1, n - 1).copy_from(&su);
        star.v.rows_mut(1, n - 1).copy_from(&sv);
        let next = leray_project(&self.dom, &star);

        let e0 = v.l2_sq(h);
        let e1 = next.l2_sq(h);
        let push = dt * (adv.dot(&adv, h).sqrt() + force.dot(&force, h).sqrt());
        if !next.is_finite() || e1.sqrt() > 2.0 * e0.sqrt() + 2.0 * push + 1e-300 {
            return Err(Error::Blowup {
                step: (t / self.params.dt).round() as usize,
                detail: format!(
                    "|v| jumped from {:.3e} to {:.3e} at t = {t:.4}; reduce dt",
                    e0.sqrt(),
                    e1.sqrt()
                ),
            });
        }
        if let Some(rows) = audit {
            rows.push(AuditRow {
                t,
                dt,
                energy_rate: (e1 - e0) / dt,
                dissipation: 2.0 * nu * v.h1_sq(h),
                forcing: 2.0 * force.dot(v, h),
                advection: -2.0 * adv.dot(v, h),
            });
        }
        Ok(next)
    }

    fn courant(&self, v: &MacField, a: &[f64], t: f64) -> f64 {
        let (z, w) = self.lift(a, t);
        let wmax = [&w.bottom, &w.top, &w.left, &w.right]
            .iter()
            .flat_map(|x| x.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()));
        let mut full = z;
        full.axpy(1.0, v);
        full.max_abs().max(wmax) / self.dom.h
    }

    /// Solves on `[0, 1]` from `v0` (solenoidal, zero trace) with realised
    /// noise coefficients `a`.
    pub fn run(&self, v0: &MacField, a: &[f64], opts: &RunOptions) -> Result<Run> {
        let n = self.dom.n;
        if v0.n() != n {
            return Err(Error::InvalidInput(format!(
                "initial field is {}x{}, grid is {n}",
                v0.n(),
                v0.n()
            )));
        }
        if a.len() != self.noise.modes {
            return Err(Error::InvalidInput(format!(
                "{} noise coefficients for {} modes",
                a.len(),
                self.noise.modes
            )));
        }
        let h = self.dom.h;
        let nominal = self.params.dt;
        let m = self.params.steps();
        let mut v = v0.clone();
        let mut audit = Vec::new();
        let mut snapshots = Vec::new();
        let mut quarter = Vec::with_capacity(4);
        let mut steps = 0;
        let mut max_courant: f64 = 0.0;
        let quarter_steps: Vec<usize> = (1..=4)
            .map(|q| ((q * m) as f64 / 4.0).round().max(1.0) as usize)
            .collect();
        let mut snap_idx = 0;
        let mut snap_times = opts.snapshot_times.clone();
        snap_times.sort_by(f64::total_cmp);
        while snap_idx < snap_times.len() && snap_times[snap_idx] <= 0.5 * nominal {
            snapshots.push((snap_times[snap_idx], self.full_field(&v, a, 0.0)));
            snap_idx += 1;
        }
        for s in 0..m {
            let t0 = s as f64 * nominal;
            let rate = self.courant(&v, a, t0);
            let pieces = if rate * nominal > self.params.cfl {
                (rate * nominal / self.params.cfl).ceil() as usize
            } else {
                1
            };
            let dt = nominal / pieces as f64;
            for p in 0..pieces {
                let t = t0 + p as f64 * dt;
                if p > 0 {
                    let r = self.courant(&v, a, t);
                    max_courant = max_courant.max(r * dt);
                } else {
                    max_courant = max_courant.max(rate * dt);
                }
                v = self.step(&v, a, t, dt, if opts.audit { Some(&mut audit) } else { None })?;
                steps += 1;
            }
            let t1 = (s + 1) as f64 * nominal;
            if quarter_steps.contains(&(s + 1)) {
                quarter.push(self.full_field(&v, a, t1).l2_sq(h));
            }
            while snap_idx < snap_times.len() && snap_times[snap_idx] <= t1 + 0.5 * nominal {
                snapshots.push((t1, self.full_field(&v, a, t1)));
                snap_idx += 1;
            }
        }
        Ok(Run {
            end: v,
            quarter_energies: quarter,
            audit,
            snapshots,
            steps,
            max_courant,
        })
    }

    /// `zeta(t) + v`.
    pub fn full_field(&self, v: &MacField, a: &[f64], t: f64) -> MacField {
        let (mut z, _) = self.lift(a, t);
        z.axpy(1.0, v);
        z
    }
}

/// `curl^perp` of `sin^2(pi x) sin^2(pi y)`, scaled to unit `L^2` norm: a
/// smooth solenoidal field vanishing on the wall.
pub fn stokes_like_mode(dom: &SquareDomain) -> MacField {
    let psi = crate::grid::node_grid(dom.n, |x, y| {
        let s = (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin();
        s * s
    });
    let f = MacField::from_stream(&psi, dom.h);
    let norm = f.l2_sq(dom.h).sqrt();
    f.scaled(1.0 / norm)
}

/// `L^2` projections of `u` on `curl^perp sin(k pi x) sin(l pi y)` for
/// `(k, l)` in `(1,1), (1,2), (2,1), (2,2)`.
pub fn low_modes(dom: &SquareDomain, u: &MacField) -> Vec<f64> {
    [(1, 1), (1, 2), (2, 1), (2, 2)]
        .iter()
        .map(|&(k, l)| {
            let psi = crate::grid::node_grid(dom.n, |x, y| {
                (k as f64 * std::f64::consts::PI * x).sin() * (l as f64 * std::f64::consts::PI * y).sin()
            });
            MacField::from_stream(&psi, dom.h).dot(u, dom.h)
        })
        .collect()
}

/// Interior arrays as the state vector.
pub fn to_state(f: &MacField) -> Vec<f64> {
    f.interior()
}
