//! TOML scenario files.
//!
//! ```toml
//! mode = "simulate"            # simulate | optimize | rate-study | oracle-1d | sweep
//!
//! [mesh]
//! nx = 8
//! ny = 8                       # omit for the unit interval
//! dirichlet = ["left", "right"]
//!
//! [material]
//! lame_lambda = 1.0
//! lame_mu = 1.0
//! sigma_y = 0.5
//!
//! [time]
//! t_end = 1.0
//! steps = 50
//!
//! [solver]
//! scheme = "implicit"          # explicit | implicit
//! lambda = 0.0
//!
//! [loading]                    # u_D(t, x) = t (G x + b + Q(x)),  f(t, x) = t f
//! gradient = [[0.2, 0.0], [0.0, -0.1]]
//! ```
//!
//! Unknown keys are rejected. See the README for the full key list.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fem::LinearSolverKind;
use crate::mesh::{DirichletRule, FieldP1, LoadVector, Mesh, Side};
use crate::solver::{Scheme, SolverConfig, TimeGrid};
use crate::tensor::ElasticityTensor;
use crate::yield_set::{RegularizationParams, YieldSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, serde::Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Simulate,
    Optimize,
    RateStudy,
    #[serde(rename = "oracle-1d")]
    #[value(name = "oracle-1d")]
    Oracle1d,
    Sweep,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Simulate => "simulate",
            Mode::Optimize => "optimize",
            Mode::RateStudy => "rate-study",
            Mode::Oracle1d => "oracle-1d",
            Mode::Sweep => "sweep",
        })
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub mesh: Option<MeshSection>,
    pub material: Option<MaterialSection>,
    pub time: Option<TimeSection>,
    pub solver: Option<SolverSection>,
    #[serde(default)]
    pub loading: LoadingSection,
    pub output: Option<OutputSection>,
    pub control: Option<ControlSection>,
    pub rate_study: Option<RateStudySection>,
    pub oracle: Option<OracleSection>,
    pub sweep: Option<SweepSection>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub nx: usize,
    pub ny: Option<usize>,
    pub dirichlet: Vec<Side>,
    /// Mesh file in the text format of [`crate::io`]; replaces `nx`/`ny`.
    pub file: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    pub lame_lambda: f64,
    pub lame_mu: f64,
    pub sigma_y: f64,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub t_end: f64,
    pub steps: usize,
}

fn default_tol() -> f64 {
    1e-12
}

fn default_max_iter() -> usize {
    5000
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub scheme: Scheme,
    pub lambda: f64,
    #[serde(default)]
    pub huber_eps: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_true")]
    pub substep: bool,
    #[serde(default)]
    pub linear_solver: LinearSolverKind,
}

/// Affine-plus-quadratic Dirichlet data and a uniform body force, both
/// scaled linearly in time.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadingSection {
    #[serde(default)]
    pub gradient: [[f64; 2]; 2],
    #[serde(default)]
    pub offset: [f64; 2],
    /// Row `i` holds the coefficients of `x^2, x y, y^2` in component `i`.
    #[serde(default)]
    pub quadratic: [[f64; 3]; 2],
    #[serde(default)]
    pub body_force: [f64; 2],
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Time-step indices whose fields are written.
    #[serde(default)]
    pub snapshots: Vec<usize>,
    #[serde(default)]
    pub write_mesh: bool,
}

fn default_alpha() -> f64 {
    1e-3
}
fn default_theta() -> f64 {
    0.5
}
fn default_one() -> f64 {
    1.0
}
fn default_huber_obj() -> f64 {
    1e-3
}
fn default_r() -> f64 {
    1e3
}
fn default_opt_iter() -> usize {
    50
}
fn default_grad_tol() -> f64 {
    1e-8
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_one")]
    pub load_rate_weight: f64,
    #[serde(default = "default_huber_obj")]
    pub huber_eps_obj: f64,
    #[serde(default = "default_r")]
    pub r_monitor: f64,
    #[serde(default = "default_one")]
    pub strain_weight: f64,
    #[serde(default = "default_one")]
    pub velocity_weight: f64,
    /// Continuation sequence; defaults to `[solver.lambda]`.
    pub lambdas: Option<Vec<f64>>,
    #[serde(default = "default_opt_iter")]
    pub max_iter: usize,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    /// Directory with `mu_<k>.csv` and `v_<k>.csv` for `k = 0..=steps`.
    /// Without it the targets come from a forward run with the `[loading]` data.
    pub targets: Option<PathBuf>,
}

fn default_rate_lambdas() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5]
}
fn default_rate_steps() -> usize {
    2000
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateStudySection {
    #[serde(default = "default_rate_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_rate_steps")]
    pub steps: usize,
    #[serde(default = "default_scheme_implicit")]
    pub scheme: Scheme,
}

fn default_scheme_implicit() -> Scheme {
    Scheme::Implicit
}

impl Default for RateStudySection {
    fn default() -> Self {
        RateStudySection {
            lambdas: default_rate_lambdas(),
            steps: default_rate_steps(),
            scheme: Scheme::Implicit,
        }
    }
}

fn default_resolution() -> usize {
    400
}
fn default_samples() -> usize {
    20
}
fn default_profile_times() -> Vec<f64> {
    vec![0.25, 0.75]
}
fn default_alpha_1d() -> f64 {
    1.0
}
fn default_beta_1d() -> f64 {
    0.5
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Number of time intervals in the stress table.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_profile_times")]
    pub profile_times: Vec<f64>,
    #[serde(default = "default_alpha_1d")]
    pub alpha: f64,
    #[serde(default = "default_beta_1d")]
    pub beta: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection {
            resolution: default_resolution(),
            samples: default_samples(),
            profile_times: default_profile_times(),
            alpha: default_alpha_1d(),
            beta: default_beta_1d(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub steps: Vec<usize>,
    #[serde(default)]
    pub schemes: Vec<Scheme>,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
        let mut s = Self::from_toml(&text)?;
        // relative paths inside the file are relative to the file
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(m) = s.mesh.as_mut() {
            if let Some(f) = m.file.as_mut() {
                if f.is_relative() {
                    *f = base.join(&*f);
                }
            }
        }
        if let Some(c) = s.control.as_mut() {
            if let Some(t) = c.targets.as_mut() {
                if t.is_relative() {
                    *t = base.join(&*t);
                }
            }
        }
        Ok(s)
    }

    /// Checks that every key needed by `mode` is present.
    pub fn validate(&self, mode: Mode) -> Result<()> {
        let need = |present: bool, section: &str| {
            if present {
                Ok(())
            } else {
                Err(cfg_err(format!("mode {mode} needs a [{section}] section")))
            }
        };
        match mode {
            Mode::Simulate | Mode::Optimize | Mode::Sweep => {
                need(self.mesh.is_some(), "mesh")?;
                need(self.material.is_some(), "material")?;
                need(self.time.is_some(), "time")?;
                need(self.solver.is_some(), "solver")?;
                if mode == Mode::Optimize {
                    need(self.control.is_some(), "control")?;
                }
                if mode == Mode::Sweep {
                    need(self.sweep.is_some(), "sweep")?;
                }
                self.mesh()?;
                self.elasticity()?;
                self.yield_set()?;
                self.grid()?;
                self.solver_config()?;
            }
            Mode::RateStudy => {
                let rs = self.rate_study.clone().unwrap_or_default();
                if rs.lambdas.len() < 2 || rs.lambdas.iter().any(|&l| !(l > 0.0)) {
                    return Err(cfg_err("rate_study.lambdas needs at least two positive values"));
                }
                if rs.steps == 0 {
                    return Err(cfg_err("rate_study.steps must be >= 1"));
                }
            }
            Mode::Oracle1d => {
                let o = self.oracle.clone().unwrap_or_default();
                if o.resolution < 4 || o.samples == 0 {
                    return Err(cfg_err("oracle.resolution must be >= 4 and oracle.samples >= 1"));
                }
                if o.profile_times.iter().any(|t| !(0.0..=1.0).contains(t)) {
                    return Err(cfg_err("oracle.profile_times must lie in [0, 1]"));
                }
            }
        }
        Ok(())
    }

    pub fn mesh(&self) -> Result<Mesh> {
        let m = self.mesh.as_ref().ok_or_else(|| cfg_err("missing [mesh]"))?;
        if let Some(path) = &m.file {
            let f = std::fs::File::open(path).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
            return crate::io::read_mesh(f);
        }
        let rule = DirichletRule::new(&m.dirichlet);
        match m.ny {
            Some(ny) => Mesh::rect(m.nx, ny, &rule),
            None => Mesh::interval(m.nx, &rule),
        }
        .map_err(|e| cfg_err(e.to_string()))
    }

    pub fn elasticity(&self) -> Result<ElasticityTensor> {
        let m = self.material.ok_or_else(|| cfg_err("missing [material]"))?;
        ElasticityTensor::new(m.lame_lambda, m.lame_mu).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn yield_set(&self) -> Result<YieldSet> {
        let m = self.material.ok_or_else(|| cfg_err("missing [material]"))?;
        YieldSet::new(m.sigma_y).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        let t = self.time.ok_or_else(|| cfg_err("missing [time]"))?;
        TimeGrid::new(t.t_end, t.steps).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let s = self.solver.ok_or_else(|| cfg_err("missing [solver]"))?;
        let rp = RegularizationParams::new(s.lambda, s.huber_eps).map_err(|e| cfg_err(e.to_string()))?;
        let cfg = SolverConfig {
            scheme: s.scheme,
            rp,
            tol: s.tol,
            max_iter: s.max_iter,
            smoothed: s.huber_eps > 0.0,
            substep: s.substep,
        };
        cfg.validate(&self.yield_set()?).map_err(|e| cfg_err(e.to_string()))?;
        Ok(cfg)
    }

    pub fn linear_solver(&self) -> LinearSolverKind {
        self.solver.map(|s| s.linear_solver).unwrap_or_default()
    }

    /// Dirichlet data and loads at every node of `grid`.
    pub fn paths(&self, mesh: &Mesh, grid: &TimeGrid) -> (Vec<FieldP1>, Vec<LoadVector>) {
        self.loading.paths(mesh, grid)
    }
}

impl LoadingSection {
    pub fn dirichlet(&self, mesh: &Mesh, t: f64) -> FieldP1 {
        let g = self.gradient;
        let b = self.offset;
        let q = self.quadratic;
        FieldP1::interpolate(mesh, |x| {
            let (x0, x1) = (x[0], x.get(1).copied().unwrap_or(0.0));
            let mut v = [0.0; 2];
            for i in 0..2 {
                v[i] = t * (g[i][0] * x0 + g[i][1] * x1 + b[i] + q[i][0] * x0 * x0 + q[i][1] * x0 * x1 + q[i][2] * x1 * x1);
            }
            v
        })
    }

    pub fn paths(&self, mesh: &Mesh, grid: &TimeGrid) -> (Vec<FieldP1>, Vec<LoadVector>) {
        let ud = grid.times().iter().map(|&t| self.dirichlet(mesh, t)).collect();
        let base = LoadVector::from_density(mesh, |_| self.body_force);
        let ell = grid.times().iter().map(|&t| base.scaled(t)).collect();
        (ud, ell)
    }
}
