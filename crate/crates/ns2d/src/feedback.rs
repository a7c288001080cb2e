//! Optimisation-based local stabiliser for the time-one map.
//!
//! The correction `Phi(u, u', a)` is the vector of mode coefficients that,
//! added to the first `N` realised coefficients driving `u'`, minimises
//! `|S(u', a + Phi) - S(u, a)|^2`. The correction inherits the temporal
//! profile of the noise, so it vanishes before the window opens and fades
//! out with the profile. Gauss–Newton runs from `Phi = 0` for a fixed
//! number of iterations, with a finite-difference Jacobian; both choices
//! keep `Phi` a deterministic function of its arguments.

use ctrlmix_core::stabiliser::{Stabiliser, StabiliserConstants};
use ctrlmix_core::{Error, Result, SystemMap};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::system::NsSystem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedbackConfig {
    /// Number `N` of leading modes the correction acts on.
    pub modes: usize,
    /// Target contraction `|w(1)| <= eps_target |w(0)|`.
    pub eps_target: f64,
    /// Gauss–Newton iterations.
    pub budget: usize,
    /// Largest `d(u, u')` the stabiliser accepts.
    pub delta: f64,
    /// Finite-difference step in mode coefficients.
    pub fd_step: f64,
    /// Declared bound on `|Phi| / d(u, u')`.
    pub holder_bound: f64,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self {
            modes: 4,
            eps_target: 0.1,
            budget: 3,
            delta: 0.5,
            fd_step: 1e-4,
            holder_bound: 1e3,
        }
    }
}

impl FeedbackConfig {
    pub fn validate(&self, noise_dim: usize) -> Result<()> {
        if self.modes == 0 || self.modes > noise_dim {
            return Err(Error::Config(format!(
                "stabiliser acts on {} modes but the noise has {noise_dim}",
                self.modes
            )));
        }
        if !(self.eps_target > 0.0 && self.eps_target < 1.0) {
            return Err(Error::Config(format!(
                "target factor must lie in (0, 1), got {}",
                self.eps_target
            )));
        }
        if !(self.delta > 0.0 && self.fd_step > 0.0 && self.holder_bound > 0.0) {
            return Err(Error::Config("delta, fd_step and holder_bound must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackOutcome {
    pub phi: Vec<f64>,
    /// `|w(1)|^2` before each iteration and after the last.
    pub trace: Vec<f64>,
    /// `d(u, u')`.
    pub initial: f64,
    /// `|S(u', a) - S(u, a)|`.
    pub uncontrolled: f64,
    /// `|S(u', a + Phi) - S(u, a)|`.
    pub controlled: f64,
    pub met_target: bool,
}

impl FeedbackOutcome {
    /// Measured contraction factor (0 for coincident starts).
    pub fn factor(&self) -> f64 {
        if self.initial > 0.0 {
            self.controlled / self.initial
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone)]
pub struct NsFeedback {
    pub system: NsSystem,
    pub cfg: FeedbackConfig,
}

impl NsFeedback {
    pub fn new(system: NsSystem, cfg: FeedbackConfig) -> Result<Self> {
        cfg.validate(system.noise_dim())?;
        Ok(Self { system, cfg })
    }

    fn with_block(&self, a: &[f64], c: &[f64]) -> Vec<f64> {
        let mut out = a.to_vec();
        for (x, y) in out.iter_mut().zip(c) {
            *x += y;
        }
        out
    }

    /// Weighted residual so that its Euclidean norm is the system norm.
    fn residual(&self, u2: &[f64], a: &[f64], c: &[f64], target: &[f64]) -> Result<DVector<f64>> {
        let end = self.system.step(u2, &self.with_block(a, c))?;
        let w = self.system.dom().h;
        Ok(DVector::from_iterator(
            end.len(),
            end.iter().zip(target).map(|(x, y)| w * (x - y)),
        ))
    }

    /// Runs the optimisation and reports its trace.
    pub fn solve(&self, u: &[f64], u2: &[f64], a: &[f64]) -> Result<FeedbackOutcome> {
        let nb = self.cfg.modes;
        let initial = self.system.distance(u, u2);
        if initial > self.cfg.delta {
            return Err(Error::StabiliserDomain {
                distance: initial,
                delta: self.cfg.delta,
            });
        }
        if u == u2 {
            return Ok(FeedbackOutcome {
                phi: vec![0.0; nb],
                trace: vec![0.0],
                initial,
                uncontrolled: 0.0,
                controlled: 0.0,
                met_target: true,
            });
        }
        let target = self.system.step(u, a)?;
        let mut c = vec![0.0; nb];
        let mut r = self.residual(u2, a, &c, &target)?;
        let uncontrolled = r.norm();
        let mut trace = vec![r.norm_squared()];
        let eps = self.cfg.fd_step;
        for _ in 0..self.cfg.budget {
            let mut jac = DMatrix::zeros(r.len(), nb);
            for j in 0..nb {
                let mut cp = c.clone();
                cp[j] += eps;
                let rp = self.residual(u2, a, &cp, &target)?;
                jac.set_column(j, &((rp - &r) / eps));
            }
            let jtj = jac.transpose() * &jac;
            let damping = 1e-12 * jtj.trace().max(f64::MIN_POSITIVE);
            let lhs = jtj + DMatrix::identity(nb, nb) * damping;
            let rhs = -(jac.transpose() * &r);
            let step = lhs
                .cholesky()
                .ok_or_else(|| Error::SingularMap("Gauss–Newton normal matrix is not positive definite".into()))?
                .solve(&rhs);
            for (x, d) in c.iter_mut().zip(step.iter()) {
                *x += d;
            }
            r = self.residual(u2, a, &c, &target)?;
            trace.push(r.norm_squared());
        }
        let controlled = r.norm();
        Ok(FeedbackOutcome {
            phi: c,
            trace,
            initial,
            uncontrolled,
            controlled,
            met_target: controlled <= self.cfg.eps_target * initial,
        })
    }
}

impl Stabiliser for NsFeedback {
    fn block_dim(&self) -> usize {
        self.cfg.modes
    }

    fn constants(&self) -> StabiliserConstants {
        StabiliserConstants {
            c: self.cfg.holder_bound,
            delta: self.cfg.delta,
            alpha: 1.0,
            q: self.cfg.eps_target,
        }
    }

    fn correction(&self, u: &[f64], u2: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve(u, u2, a)?.phi)
    }
}
