//! Versioned experiment configuration.

use std::path::Path;

use ctrlmix_core::coupling::{CouplingConfig, MixMode};
use ctrlmix_core::stabiliser::ControlWindow;
use ctrlmix_core::toybench::ToySystem;
use ctrlmix_core::{Error, ModeDensity, NoiseModel, Result};
use ctrlmix_ns2d::feedback::FeedbackConfig;
use ctrlmix_ns2d::{BoundaryNoise, NsParams, NsSystem};
use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NsConfig {
    pub nu: f64,
    pub n: usize,
    pub dt: f64,
    pub cfl: f64,
    pub hopf_delta: Option<f64>,
    /// Number `N` of boundary noise modes.
    pub modes: usize,
    /// Extent of the noise window on the top edge.
    pub gamma: [f64; 2],
    pub window: ControlWindow,
    /// Phase-set radius in the discrete `L^2` norm.
    pub radius: f64,
}

impl Default for NsConfig {
    fn default() -> Self {
        let p = NsParams::default();
        Self {
            nu: p.nu,
            n: p.n,
            dt: 1e-2,
            cfl: p.cfl,
            hopf_delta: None,
            modes: 4,
            gamma: [0.2, 0.8],
            window: ControlWindow::default(),
            radius: 10.0,
        }
    }
}

impl NsConfig {
    pub fn params(&self) -> NsParams {
        NsParams {
            nu: self.nu,
            n: self.n,
            dt: self.dt,
            cfl: self.cfl,
            hopf_delta: self.hopf_delta,
        }
    }

    pub fn noise(&self) -> BoundaryNoise {
        BoundaryNoise {
            modes: self.modes,
            x0: self.gamma[0],
            x1: self.gamma[1],
            window: self.window,
        }
    }

    pub fn system(&self) -> Result<NsSystem> {
        NsSystem::new(self.params(), self.noise(), self.radius)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemConfig {
    Toy(ToySystem),
    Ns(NsConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// `b_j`; the realised coefficient is `b_j xi_j`.
    pub amplitudes: Vec<f64>,
    pub density: ModeDensity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixingSection {
    pub k_max: usize,
    pub ensemble: usize,
    pub mode: MixMode,
    pub floor_factor: f64,
    pub fit_from: usize,
    pub stationary_burn: Option<usize>,
    /// Initial conditions. For the NS system each entry is a single number:
    /// the `H^1` norm of a scaled Stokes-like mode.
    pub initial: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub steps: usize,
    /// Initial state, in the same convention as `mixing.initial`.
    pub initial: Vec<f64>,
    /// Boundary-trace samples per unit time (NS only).
    pub trace_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub version: u32,
    pub seed: u64,
    pub system: SystemConfig,
    pub noise: NoiseConfig,
    pub coupling: CouplingConfig,
    pub stabiliser: FeedbackConfig,
    pub mixing: MixingSection,
    pub simulate: SimulateSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Preset::Toy.config()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// `S(u, eta) = u/2 + eta` started at `-1` and `+1`.
    Toy,
    /// The toy system started twice at the same point.
    Identical,
    /// `S(u, a) = (1.2 tanh u_1 + a, 0.3 u_2)` with its linear feedback.
    ToyUnstable,
    /// Navier–Stokes, `nu = 0.05`, `n = 64`, four boundary modes.
    Ns,
}

impl Preset {
    pub fn config(self) -> ExperimentConfig {
        let toy_noise = NoiseConfig {
            amplitudes: vec![0.5],
            density: ModeDensity::Uniform,
        };
        let toy_mixing = MixingSection {
            k_max: 12,
            ensemble: 100_000,
            mode: MixMode::Independent,
            floor_factor: 3.0,
            fit_from: 1,
            stationary_burn: None,
            initial: vec![vec![-1.0], vec![1.0]],
        };
        let toy_sim = SimulateSection {
            steps: 30,
            initial: vec![1.0],
            trace_samples: 10,
        };
        let base = ExperimentConfig {
            version: CONFIG_VERSION,
            seed: 1,
            system: SystemConfig::Toy(ToySystem::ContractingAffine {
                c: 0.5,
                dim: 1,
                noise_bound: 0.5,
            }),
            noise: toy_noise,
            coupling: CouplingConfig::default(),
            stabiliser: FeedbackConfig::default(),
            mixing: toy_mixing,
            simulate: toy_sim,
        };
        match self {
            Preset::Toy => base,
            Preset::Identical => ExperimentConfig {
                mixing: MixingSection {
                    k_max: 6,
                    ensemble: 4000,
                    initial: vec![vec![0.3], vec![0.3]],
                    ..base.mixing.clone()
                },
                ..base
            },
            Preset::ToyUnstable => ExperimentConfig {
                system: SystemConfig::Toy(ToySystem::unstable()),
                noise: NoiseConfig {
                    amplitudes: vec![1.0],
                    density: ModeDensity::Uniform,
                },
                mixing: MixingSection {
                    initial: vec![vec![-2.0, 0.5], vec![2.0, -0.5]],
                    ensemble: 20_000,
                    ..base.mixing.clone()
                },
                simulate: SimulateSection {
                    initial: vec![0.5, 0.5],
                    ..base.simulate.clone()
                },
                ..base
            },
            Preset::Ns => ExperimentConfig {
                system: SystemConfig::Ns(NsConfig::default()),
                noise: NoiseConfig {
                    amplitudes: vec![1.0, 0.5, 0.25, 0.125],
                    density: ModeDensity::Uniform,
                },
                mixing: MixingSection {
                    k_max: 30,
                    ensemble: 512,
                    mode: MixMode::CommonNoise,
                    floor_factor: 3.0,
                    fit_from: 1,
                    stationary_burn: None,
                    initial: vec![vec![0.0], vec![3.0]],
                },
                simulate: SimulateSection {
                    steps: 5,
                    initial: vec![1.0],
                    trace_samples: 10,
                },
                ..base
            },
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Range checks on every parameter, run before any computation.
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.coupling.validate()?;
        let noise = self.noise_model()?;
        match &self.system {
            SystemConfig::Toy(t) => {
                t.validate()?;
                let dim = self.toy_dim();
                let nd = self.toy_noise_dim();
                if noise.dim() != nd {
                    return Err(Error::Config(format!(
                        "toy system has {nd} noise modes, config gives {}",
                        noise.dim()
                    )));
                }
                for u in self
                    .mixing
                    .initial
                    .iter()
                    .chain(std::iter::once(&self.simulate.initial))
                {
                    if u.len() != dim {
                        return Err(Error::Config(format!("initial states must have {dim} entries")));
                    }
                }
            }
            SystemConfig::Ns(ns) => {
                ns.params().validate()?;
                ns.noise().validate()?;
                if let Some(d) = ns.hopf_delta {
                    if !(d > 0.0 && d < 0.5) {
                        return Err(Error::Config(format!("Hopf delta must lie in (0, 0.5), got {d}")));
                    }
                }
                if noise.dim() != ns.modes {
                    return Err(Error::Config(format!(
                        "{} boundary modes but {} noise amplitudes",
                        ns.modes,
                        noise.dim()
                    )));
                }
                if !(ns.radius > 0.0) {
                    return Err(Error::Config("phase radius must be positive".into()));
                }
                for u in self
                    .mixing
                    .initial
                    .iter()
                    .chain(std::iter::once(&self.simulate.initial))
                {
                    if u.len() != 1 || !(u[0] >= 0.0) {
                        return Err(Error::Config(
                            "NS initial states are one non-negative H^1 norm each".into(),
                        ));
                    }
                }
                self.stabiliser.validate(ns.modes)?;
            }
        }
        let m = &self.mixing;
        if m.initial.len() < 2 {
            return Err(Error::Config("mixing needs two initial conditions".into()));
        }
        if m.ensemble < 4 || m.k_max == 0 || !(m.floor_factor > 0.0) {
            return Err(Error::Config(
                "mixing needs ensemble >= 4, k_max >= 1 and a positive floor factor".into(),
            ));
        }
        if self.simulate.trace_samples == 0 {
            return Err(Error::Config("trace_samples must be positive".into()));
        }
        Ok(())
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        let n = &self.noise;
        NoiseModel::iid(n.amplitudes.clone(), n.density.clone()).map_err(|e| Error::Config(e.to_string()))
    }

    fn toy_dim(&self) -> usize {
        match &self.system {
            SystemConfig::Toy(ToySystem::ContractingAffine { dim, .. }) => *dim,
            SystemConfig::Toy(ToySystem::UnstableControlled { .. }) => 2,
            SystemConfig::Ns(_) => 0,
        }
    }

    fn toy_noise_dim(&self) -> usize {
        match &self.system {
            SystemConfig::Toy(ToySystem::UnstableControlled { .. }) => 1,
            _ => self.toy_dim(),
        }
    }
}
