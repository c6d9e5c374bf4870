//! Time stepping for the regularized plasticity system
//!
//! ```text
//! -div sigma = l,   sigma = C (E u - z),   dz/dt = dI_lambda(sigma),   u = u_D on Gamma_D
//! ```
//!
//! and for the strain-rate driven flow rule `A dsigma/dt + dI_lambda(sigma) = w`.
//!
//! The explicit scheme updates `z` with the stress of the previous node and then
//! re-solves equilibrium. It is only contractive for `dt <= lambda * gamma_A`;
//! larger steps are split into equal substeps with linearly interpolated data.
//!
//! The implicit scheme alternates equilibrium solves and cellwise radial
//! returns until the stress iterates settle. With `lambda = 0` the radial
//! return is the closest-point projection onto the yield set.
//!
//! For isotropic `C` the projection onto `K` in the `A`-inner product agrees
//! with the Frobenius radial return on deviators: `A` scales deviators by
//! `1 / (2 mu)` and spherical tensors by `1 / (2 mu + n lambda)`, the two
//! subspaces are `A`-orthogonal, and `K` only restricts the deviator. The
//! `A`-closest point therefore keeps the spherical part and minimizes the
//! deviatoric distance, which is a multiple of the Frobenius one.

use crate::error::{Error, Result};
use crate::fem::ElasticSystem;
use crate::mesh::{FieldP0, FieldP1, LoadVector, Mesh};
use crate::tensor::{num_components, ElasticityTensor, SymTensor};
use crate::yield_set::{yield_part, RegularizationParams, YieldSet};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub t_end: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, steps: usize) -> Result<Self> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!("final time must be > 0, got {t_end}")));
        }
        if steps == 0 {
            return Err(Error::InvalidParameter("number of time steps must be >= 1".into()));
        }
        Ok(TimeGrid { t_end, steps })
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Explicit,
    Implicit,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::Explicit => write!(f, "explicit"),
            Scheme::Implicit => write!(f, "implicit"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub scheme: Scheme,
    pub rp: RegularizationParams,
    /// Fixed-point tolerance on successive stress iterates (implicit scheme).
    pub tol: f64,
    pub max_iter: usize,
    /// Use the Huber-smoothed Yosida derivative in the flow rule.
    pub smoothed: bool,
    /// Split explicit steps that violate `dt <= lambda * gamma_A`.
    pub substep: bool,
}

impl SolverConfig {
    pub fn explicit(lambda: f64) -> Self {
        SolverConfig {
            scheme: Scheme::Explicit,
            rp: RegularizationParams {
                lambda,
                huber_eps: 0.0,
            },
            tol: 1e-12,
            max_iter: 5000,
            smoothed: false,
            substep: true,
        }
    }

    pub fn implicit(lambda: f64) -> Self {
        SolverConfig {
            scheme: Scheme::Implicit,
            ..Self::explicit(lambda)
        }
    }

    pub fn with_smoothing(mut self, huber_eps: f64) -> Self {
        self.rp.huber_eps = huber_eps;
        self.smoothed = true;
        self
    }

    pub fn validate(&self, ys: &YieldSet) -> Result<()> {
        RegularizationParams::new(self.rp.lambda, self.rp.huber_eps)?;
        if self.scheme == Scheme::Explicit && self.rp.lambda <= 0.0 {
            return Err(Error::InvalidParameter("the explicit scheme needs lambda > 0".into()));
        }
        if self.smoothed {
            if self.rp.lambda <= 0.0 {
                return Err(Error::InvalidParameter("smoothing needs lambda > 0".into()));
            }
            if !(self.rp.huber_eps > 0.0 && self.rp.huber_eps < ys.sigma_y) {
                return Err(Error::InvalidParameter(format!(
                    "huber_eps must lie in (0, sigma_y), got {}",
                    self.rp.huber_eps
                )));
            }
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidParameter("tolerance and iteration limit must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub u: FieldP1,
    pub sigma: FieldP0,
    pub z: FieldP0,
}

impl State {
    pub fn zero(mesh: &Mesh) -> Self {
        State {
            u: FieldP1::zeros(mesh),
            sigma: FieldP0::zeros(mesh),
            z: FieldP0::zeros(mesh),
        }
    }
}

/// Per-run diagnostics, all computed from the time-grid nodes.
#[derive(Clone, Debug, Default)]
pub struct Diagnostics {
    /// `||sigma_k - sigma_{k-1}||_{L2} / dt`, entry 0 is zero.
    pub sigma_rate: Vec<f64>,
    /// Discrete `||dsigma/dt||_{L2(L2)}`.
    pub sigma_rate_l2l2: f64,
    /// `(||sigma_k||^2 + ||grad R sigma_k||^2)^{1/2}` per node, `R` the patch recovery.
    pub stress_regularity: Vec<f64>,
    pub stress_regularity_sup: f64,
    /// Complementary elastic energy `1/2 <A sigma, sigma>` per node.
    pub energy: Vec<f64>,
    /// Integrated plastic dissipation `<sigma, z_k - z_{k-1}>` per step, entry 0 is zero.
    pub dissipation: Vec<f64>,
    /// Smallest cellwise dissipation increment over all (sub)steps.
    pub min_cell_dissipation: f64,
    pub max_trace_z: f64,
    /// `max(|sigma^D| - sigma_y)` over all nodes and cells (negative when strictly inside).
    pub max_yield_excess: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub states: Vec<State>,
    /// Explicit substeps per time step (1 when no splitting was needed).
    pub substeps: usize,
    /// Fixed-point iterations per implicit step.
    pub iterations: Vec<usize>,
    pub diagnostics: Diagnostics,
}

impl Trajectory {
    pub fn sigma(&self, k: usize) -> &FieldP0 {
        &self.states[k].sigma
    }
}

/// Stresses before every explicit micro step, kept for the adjoint sweep.
pub(crate) struct ExplicitTape {
    pub substeps: usize,
    /// `pre_sigma[j]` is the stress used by micro step `j + 1`.
    pub pre_sigma: Vec<FieldP0>,
}

/// Elastic system plus yield set: everything the time steppers need.
#[derive(Clone, Debug)]
pub struct PlasticityModel {
    pub system: ElasticSystem,
    pub yield_set: YieldSet,
}

impl PlasticityModel {
    pub fn new(mesh: &Mesh, elasticity: ElasticityTensor, yield_set: YieldSet) -> Result<Self> {
        Ok(PlasticityModel {
            system: ElasticSystem::new(mesh, elasticity)?,
            yield_set,
        })
    }

    pub fn from_system(system: ElasticSystem, yield_set: YieldSet) -> Self {
        PlasticityModel { system, yield_set }
    }

    #[inline]
    pub fn mesh(&self) -> &Mesh {
        &self.system.mesh
    }

    #[inline]
    pub fn elasticity(&self) -> &ElasticityTensor {
        &self.system.elasticity
    }

    /// Builds `(u_0, sigma_0, z_0)` with `z_0 = E u_0 - A sigma_0`, checking that
    /// `sigma_0` is admissible and equilibrated and `z_0` is trace free.
    pub fn initial_state(&self, u0: FieldP1, sigma0: FieldP0) -> Result<State> {
        let mesh = self.mesh();
        u0.check(mesh)?;
        sigma0.check(mesh)?;
        let el = self.elasticity();
        let z0 = FieldP0 {
            data: (0..mesh.num_cells())
                .map(|c| mesh.cell_strain(c, &u0.data) - el.apply_a(&sigma0.data[c]))
                .collect(),
        };
        let scale = 1.0 + z0.data.iter().map(|t| t.norm()).fold(0.0, f64::max);
        if mesh.dim() > 1 && z0.max_abs_trace() > 1e-12 * scale {
            return Err(Error::Precondition(format!(
                "initial plastic strain is not trace free (|tr z0| = {:e})",
                z0.max_abs_trace()
            )));
        }
        let sy = self.yield_set.sigma_y;
        if sigma0.data.iter().any(|s| yield_part(s).norm() > sy * (1.0 + 1e-12)) {
            return Err(Error::Precondition("initial stress violates the yield condition".into()));
        }
        let r = self.system.residual(&sigma0, &LoadVector::zeros(mesh));
        let smax = 1.0 + sigma0.data.iter().map(|t| t.norm()).fold(0.0, f64::max);
        if r.iter().any(|v| v.abs() > 1e-8 * smax) {
            return Err(Error::Precondition("initial stress is not in equilibrium".into()));
        }
        Ok(State {
            u: u0,
            sigma: sigma0,
            z: z0,
        })
    }

    /// Explicit substeps needed for `dt` under the contraction bound.
    pub fn explicit_substeps(&self, cfg: &SolverConfig, dt: f64) -> usize {
        let limit = cfg.rp.lambda * self.elasticity().gamma_a(self.mesh().dim());
        if !cfg.substep || dt <= limit {
            return 1;
        }
        ((dt / limit) * (1.0 - 1e-12)).ceil().max(1.0) as usize
    }

    fn flow_increment(&self, cfg: &SolverConfig, sigma: &FieldP0, dt: f64) -> Result<Vec<SymTensor>> {
        sigma
            .data
            .iter()
            .map(|s| Ok(self.yield_set.flow_direction(&cfg.rp, s, cfg.smoothed)? * dt))
            .collect()
    }

    /// One explicit Euler step of length `dt`:
    /// `z_k = z_{k-1} + dt dI_lambda(sigma_{k-1})`, then equilibrium.
    pub fn step_explicit(
        &self,
        prev: &State,
        ud: &FieldP1,
        ell: &LoadVector,
        cfg: &SolverConfig,
        dt: f64,
    ) -> Result<State> {
        if cfg.rp.lambda <= 0.0 {
            return Err(Error::InvalidParameter("the explicit scheme needs lambda > 0".into()));
        }
        let limit = cfg.rp.lambda * self.elasticity().gamma_a(self.mesh().dim());
        if dt > limit * (1.0 + 1e-12) {
            log::warn!("explicit step dt = {dt:e} exceeds the stability bound {limit:e}");
        }
        self.explicit_update(prev, ud, ell, cfg, dt)
    }

    fn explicit_update(
        &self,
        prev: &State,
        ud: &FieldP1,
        ell: &LoadVector,
        cfg: &SolverConfig,
        dt: f64,
    ) -> Result<State> {
        let inc = self.flow_increment(cfg, &prev.sigma, dt)?;
        let z = FieldP0 {
            data: prev.z.data.iter().zip(&inc).map(|(z, d)| *z + *d).collect(),
        };
        let (u, sigma) = self.system.solve(&z, ud, ell)?;
        Ok(State { u, sigma, z })
    }

    /// One implicit Euler step, returning the new state and the number of
    /// fixed-point iterations used.
    pub fn step_implicit(
        &self,
        prev: &State,
        ud: &FieldP1,
        ell: &LoadVector,
        cfg: &SolverConfig,
        dt: f64,
    ) -> Result<(State, usize)> {
        let mesh = self.mesh();
        let el = self.elasticity();
        let k = dt * el.yield_modulus(mesh.dim());
        let lambda = cfg.rp.lambda;
        let mut z = prev.z.clone();
        let mut sigma = prev.sigma.clone();
        let mut last_change = f64::INFINITY;
        for it in 1..=cfg.max_iter {
            let u = self.system.solve_displacement(&z, ud, ell)?;
            let mut change = 0.0;
            for c in 0..mesh.num_cells() {
                let trial = el.apply_c(&(mesh.cell_strain(c, &u.data) - prev.z.data[c]));
                let s = if cfg.smoothed {
                    self.smoothed_implicit_local(cfg, &trial, k)?
                } else {
                    self.yield_set.radial_return(&trial, k, lambda)
                };
                let diff = s - sigma.data[c];
                change += mesh.geometry(c).measure * diff.ddot(&diff);
                sigma.data[c] = s;
                z.data[c] = prev.z.data[c] + el.apply_a(&(trial - s));
            }
            last_change = change.sqrt();
            if last_change <= cfg.tol {
                return Ok((State { u, sigma, z }, it));
            }
        }
        Err(Error::NotConverged {
            what: "implicit plasticity step",
            iterations: cfg.max_iter,
            residual: last_change,
        })
    }

    /// Local implicit update with the smoothed flow rule: solves
    /// `r + k m_eps(r) = r_trial` for the deviatoric radius by bisection.
    fn smoothed_implicit_local(&self, cfg: &SolverConfig, trial: &SymTensor, k: f64) -> Result<SymTensor> {
        let d = yield_part(trial);
        let r_tr = d.norm();
        let g = |r: f64| -> Result<f64> {
            let t = if r_tr > 0.0 { d * (r / r_tr) } else { d };
            Ok(r + k * self.yield_set.yosida_deriv_smoothed(&cfg.rp, &t)?.norm() - r_tr)
        };
        if r_tr == 0.0 || g(r_tr)? <= 0.0 {
            return Ok(*trial);
        }
        let (mut lo, mut hi) = (0.0, r_tr);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid)? > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-16 * r_tr {
                break;
            }
        }
        let r = 0.5 * (lo + hi);
        Ok(*trial - d * ((r_tr - r) / r_tr))
    }

    /// Runs the full discrete trajectory on `grid`.
    ///
    /// `ud_path` and `ell_path` hold the Dirichlet data and loads at every grid
    /// node (`steps + 1` entries each) and are interpolated linearly in between.
    pub fn run_trajectory(
        &self,
        cfg: &SolverConfig,
        grid: &TimeGrid,
        ud_path: &[FieldP1],
        ell_path: &[LoadVector],
        init: &State,
    ) -> Result<Trajectory> {
        self.run_inner(cfg, grid, ud_path, ell_path, init, false)
            .map(|(t, _)| t)
    }

    pub(crate) fn run_inner(
        &self,
        cfg: &SolverConfig,
        grid: &TimeGrid,
        ud_path: &[FieldP1],
        ell_path: &[LoadVector],
        init: &State,
        record: bool,
    ) -> Result<(Trajectory, Option<ExplicitTape>)> {
        cfg.validate(&self.yield_set)?;
        self.check_run_inputs(grid, ud_path, ell_path, init)?;
        let mesh = self.mesh();
        let dt = grid.dt();
        let substeps = match cfg.scheme {
            Scheme::Explicit => self.explicit_substeps(cfg, dt),
            Scheme::Implicit => 1,
        };
        let h = dt / substeps as f64;
        let mut states = Vec::with_capacity(grid.steps + 1);
        states.push(init.clone());
        let mut iterations = Vec::new();
        let mut min_cell_diss = f64::INFINITY;
        let mut tape = record.then(|| ExplicitTape {
            substeps,
            pre_sigma: Vec::with_capacity(grid.steps * substeps),
        });
        for k in 1..=grid.steps {
            let prev = &states[k - 1];
            let next = match cfg.scheme {
                Scheme::Explicit => {
                    let mut cur = prev.clone();
                    for s in 1..=substeps {
                        let w = s as f64 / substeps as f64;
                        let (ud, ell) = if substeps == 1 {
                            (ud_path[k].clone(), ell_path[k].clone())
                        } else {
                            (
                                FieldP1::lerp(&ud_path[k - 1], &ud_path[k], w),
                                LoadVector {
                                    data: ell_path[k - 1]
                                        .data
                                        .iter()
                                        .zip(&ell_path[k].data)
                                        .map(|(a, b)| (1.0 - w) * a + w * b)
                                        .collect(),
                                },
                            )
                        };
                        let new = self.explicit_update(&cur, &ud, &ell, cfg, h)?;
                        for c in 0..mesh.num_cells() {
                            let dz = new.z.data[c] - cur.z.data[c];
                            min_cell_diss = min_cell_diss.min(cur.sigma.data[c].ddot(&dz));
                        }
                        if let Some(t) = tape.as_mut() {
                            t.pre_sigma.push(std::mem::replace(&mut cur, new).sigma);
                        } else {
                            cur = new;
                        }
                    }
                    cur
                }
                Scheme::Implicit => {
                    let (new, its) = self.step_implicit(prev, &ud_path[k], &ell_path[k], cfg, dt)?;
                    iterations.push(its);
                    for c in 0..mesh.num_cells() {
                        let dz = new.z.data[c] - prev.z.data[c];
                        min_cell_diss = min_cell_diss.min(new.sigma.data[c].ddot(&dz));
                    }
                    new
                }
            };
            states.push(next);
        }
        let mut diagnostics = compute_diagnostics(self.mesh(), self.elasticity(), &self.yield_set, grid, &states);
        diagnostics.min_cell_dissipation = if min_cell_diss.is_finite() { min_cell_diss } else { 0.0 };
        Ok((
            Trajectory {
                grid: *grid,
                states,
                substeps,
                iterations,
                diagnostics,
            },
            tape,
        ))
    }

    fn check_run_inputs(
        &self,
        grid: &TimeGrid,
        ud_path: &[FieldP1],
        ell_path: &[LoadVector],
        init: &State,
    ) -> Result<()> {
        let mesh = self.mesh();
        if ud_path.len() != grid.steps + 1 || ell_path.len() != grid.steps + 1 {
            return Err(Error::Precondition(format!(
                "expected {} Dirichlet and load snapshots, got {} and {}",
                grid.steps + 1,
                ud_path.len(),
                ell_path.len()
            )));
        }
        for ud in ud_path {
            ud.check(mesh)?;
        }
        for ell in ell_path {
            ell.check(mesh)?;
        }
        init.u.check(mesh)?;
        init.sigma.check(mesh)?;
        init.z.check(mesh)?;
        if self
            .system
            .free_dofs()
            .iter()
            .any(|&i| ell_path[0].data[i] != 0.0)
        {
            return Err(Error::Precondition("the load must vanish at t = 0".into()));
        }
        let scale = 1.0 + init.u.data.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if self
            .system
            .fixed_dofs()
            .iter()
            .any(|&i| (ud_path[0].data[i] - init.u.data[i]).abs() > 1e-12 * scale)
        {
            return Err(Error::Precondition(
                "Dirichlet data at t = 0 must match the initial displacement on Gamma_D".into(),
            ));
        }
        Ok(())
    }
}

/// `(||s||^2_{L2} + ||grad R s||^2_{L2})^{1/2}`: a W^{1,2}-type norm of a P0
/// tensor field using patch recovery of every component.
pub fn stress_regularity_norm(mesh: &Mesh, s: &FieldP0) -> f64 {
    let d = mesh.dim();
    let nc = num_components(d);
    let mut total = 0.0;
    for k in 0..nc {
        let weight = if k < d { 1.0 } else { 2.0 };
        let vals: Vec<f64> = s.data.iter().map(|t| t.components()[k]).collect();
        let nodal = mesh.recover_nodal(&vals);
        for c in 0..mesh.num_cells() {
            let g = mesh.cell_gradient(c, &nodal);
            let meas = mesh.geometry(c).measure;
            total += weight * meas * (vals[c] * vals[c] + g[0] * g[0] + g[1] * g[1]);
        }
    }
    total.sqrt()
}

fn compute_diagnostics(
    mesh: &Mesh,
    el: &ElasticityTensor,
    ys: &YieldSet,
    grid: &TimeGrid,
    states: &[State],
) -> Diagnostics {
    let dt = grid.dt();
    let mut d = Diagnostics {
        sigma_rate: vec![0.0],
        dissipation: vec![0.0],
        max_yield_excess: f64::NEG_INFINITY,
        ..Default::default()
    };
    let mut rate_sq = 0.0;
    for (k, st) in states.iter().enumerate() {
        let energy: f64 = st
            .sigma
            .data
            .iter()
            .enumerate()
            .map(|(c, s)| 0.5 * mesh.geometry(c).measure * el.apply_a(s).ddot(s))
            .sum();
        d.energy.push(energy);
        let reg = stress_regularity_norm(mesh, &st.sigma);
        d.stress_regularity.push(reg);
        d.stress_regularity_sup = d.stress_regularity_sup.max(reg);
        d.max_trace_z = d.max_trace_z.max(st.z.max_abs_trace());
        for s in &st.sigma.data {
            d.max_yield_excess = d.max_yield_excess.max(yield_part(s).norm() - ys.sigma_y);
        }
        if k > 0 {
            let prev = &states[k - 1];
            let rate = st.sigma.sub(&prev.sigma).l2_norm(mesh) / dt;
            rate_sq += dt * rate * rate;
            d.sigma_rate.push(rate);
            let diss: f64 = (0..mesh.num_cells())
                .map(|c| mesh.geometry(c).measure * st.sigma.data[c].ddot(&(st.z.data[c] - prev.z.data[c])))
                .sum();
            d.dissipation.push(diss);
        }
    }
    if mesh.dim() == 1 {
        // the plastic strain of a bar is not trace free; nothing to monitor
        d.max_trace_z = 0.0;
    }
    d.sigma_rate_l2l2 = rate_sq.sqrt();
    d
}

/// Exact `||v||_{H1(0,T; H1)}` of a field that is piecewise linear in time
/// and P1 in space.
pub fn h1_h1_norm(mesh: &Mesh, grid: &TimeGrid, path: &[FieldP1]) -> f64 {
    let dt = grid.dt();
    let mut total = 0.0;
    for k in 1..path.len() {
        let a = &path[k - 1].data;
        let b = &path[k].data;
        let aa = h1_inner(mesh, a, a);
        let ab = h1_inner(mesh, a, b);
        let bb = h1_inner(mesh, b, b);
        total += dt / 3.0 * (aa + ab + bb);
        total += (aa - 2.0 * ab + bb) / dt;
    }
    total.sqrt()
}

/// Full `H1` inner product of two P1 vector fields (consistent mass).
pub fn h1_inner(mesh: &Mesh, a: &[f64], b: &[f64]) -> f64 {
    let d = mesh.dim();
    let k = d + 1;
    let mut s = 0.0;
    for c in 0..mesh.num_cells() {
        let g = mesh.geometry(c);
        let nodes = mesh.cell_nodes(c);
        let mass = g.measure / ((k * (k + 1)) as f64);
        for i in 0..d {
            let mut ga = [0.0; 2];
            let mut gb = [0.0; 2];
            for (p, &np) in nodes.iter().enumerate() {
                for q in 0..d {
                    ga[q] += g.grads[p][q] * a[np * d + i];
                    gb[q] += g.grads[p][q] * b[np * d + i];
                }
                for (r, &nr) in nodes.iter().enumerate() {
                    let m = if p == r { 2.0 * mass } else { mass };
                    s += m * a[np * d + i] * b[nr * d + i];
                }
            }
            s += g.measure * (ga[0] * gb[0] + ga[1] * gb[1]);
        }
    }
    s
}

/// Integrates `A dsigma/dt + dI_lambda(sigma) = w` cellwise.
///
/// The explicit scheme evaluates `w` and `dI_lambda` at the left node; the
/// implicit scheme at the right node, where for `lambda = 0` the update is
/// the `A`-projection of the trial stress onto the yield set.
pub fn evolve_flow_rule(
    elasticity: &ElasticityTensor,
    yield_set: &YieldSet,
    rp: &RegularizationParams,
    scheme: Scheme,
    grid: &TimeGrid,
    w_path: &[FieldP0],
    sigma0: &FieldP0,
) -> Result<Vec<FieldP0>> {
    if w_path.len() != grid.steps + 1 {
        return Err(Error::Precondition(format!(
            "expected {} strain-rate snapshots, got {}",
            grid.steps + 1,
            w_path.len()
        )));
    }
    if w_path.iter().any(|w| w.data.len() != sigma0.data.len()) {
        return Err(Error::MeshMismatch("strain-rate snapshots differ in length".into()));
    }
    if sigma0
        .data
        .iter()
        .any(|s| yield_part(s).norm() > yield_set.sigma_y * (1.0 + 1e-12))
    {
        return Err(Error::Precondition("initial stress violates the yield condition".into()));
    }
    if scheme == Scheme::Explicit && rp.lambda <= 0.0 {
        return Err(Error::InvalidParameter("the explicit scheme needs lambda > 0".into()));
    }
    let dt = grid.dt();
    let mut out = Vec::with_capacity(grid.steps + 1);
    out.push(sigma0.clone());
    for k in 1..=grid.steps {
        let prev = &out[k - 1];
        let next = match scheme {
            Scheme::Explicit => FieldP0 {
                data: prev
                    .data
                    .iter()
                    .zip(&w_path[k - 1].data)
                    .map(|(s, w)| Ok(*s + elasticity.apply_c(&(*w - yield_set.yosida_deriv(rp, s)?)) * dt))
                    .collect::<Result<_>>()?,
            },
            Scheme::Implicit => {
                let kk = dt * elasticity.yield_modulus(sigma0.data.first().map_or(1, |s| s.dim()));
                FieldP0 {
                    data: prev
                        .data
                        .iter()
                        .zip(&w_path[k].data)
                        .map(|(s, w)| {
                            let trial = *s + elasticity.apply_c(w) * dt;
                            yield_set.radial_return(&trial, kk, rp.lambda)
                        })
                        .collect(),
                }
            }
        };
        out.push(next);
    }
    Ok(out)
}

/// `max_k ||a_k - b_k||_{L2}` between two stress histories on the same mesh.
pub fn c_l2_gap(measures: &[f64], a: &[FieldP0], b: &[FieldP0]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            x.data
                .iter()
                .zip(&y.data)
                .zip(measures)
                .map(|((p, q), m)| {
                    let d = *p - *q;
                    m * d.ddot(&d)
                })
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// `(sum_k dt ||a_k - b_k||^2_{L2})^{1/2}` over nodes `1..=N`.
pub fn l2_l2_gap(measures: &[f64], dt: f64, a: &[FieldP0], b: &[FieldP0]) -> f64 {
    a.iter()
        .zip(b)
        .skip(1)
        .map(|(x, y)| {
            dt * x
                .data
                .iter()
                .zip(&y.data)
                .zip(measures)
                .map(|((p, q), m)| {
                    let d = *p - *q;
                    m * d.ddot(&d)
                })
                .sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{DirichletRule, Side};

    fn bar(cells: usize) -> PlasticityModel {
        let mesh = Mesh::interval(cells, &DirichletRule::new(&[Side::Left, Side::Right])).unwrap();
        PlasticityModel::new(&mesh, ElasticityTensor::uniaxial(1.0).unwrap(), YieldSet::new(1.0).unwrap()).unwrap()
    }

    fn bar_paths(model: &PlasticityModel, grid: &TimeGrid) -> (Vec<FieldP1>, Vec<LoadVector>) {
        let mesh = model.mesh();
        let ud = grid
            .times()
            .iter()
            .map(|&t| FieldP1::interpolate(mesh, |x| [2.0 * t * x[0], 0.0]))
            .collect();
        let ell = vec![LoadVector::zeros(mesh); grid.steps + 1];
        (ud, ell)
    }

    #[test]
    fn time_grid() {
        let g = TimeGrid::new(2.0, 4).unwrap();
        assert_eq!(g.dt(), 0.5);
        assert_eq!(g.time(3), 1.5);
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert!(TimeGrid::new(0.0, 3).is_err());
    }

    #[test]
    fn elastic_explicit_step_keeps_z() {
        let model = bar(4);
        let mesh = model.mesh().clone();
        let cfg = SolverConfig::explicit(0.1);
        let prev = State::zero(&mesh);
        let ud = FieldP1::interpolate(&mesh, |x| [0.5 * x[0], 0.0]);
        let next = model.step_explicit(&prev, &ud, &LoadVector::zeros(&mesh), &cfg, 0.01).unwrap();
        assert_eq!(next.z, prev.z);
        assert!((next.sigma.data[0].get(0, 0) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn elastic_implicit_step_matches_elastic_solve() {
        let model = bar(4);
        let mesh = model.mesh().clone();
        let cfg = SolverConfig::implicit(0.0);
        let prev = State::zero(&mesh);
        let ud = FieldP1::interpolate(&mesh, |x| [0.3 * x[0], 0.0]);
        let (next, _) = model.step_implicit(&prev, &ud, &LoadVector::zeros(&mesh), &cfg, 0.1).unwrap();
        let (u, s) = model.system.solve(&prev.z, &ud, &LoadVector::zeros(&mesh)).unwrap();
        assert_eq!(next.z, prev.z);
        assert!(next.u.data.iter().zip(&u.data).all(|(a, b)| (a - b).abs() < 1e-14));
        assert!((next.sigma.data[2].get(0, 0) - s.data[2].get(0, 0)).abs() < 1e-14);
    }

    #[test]
    fn constant_inputs_give_constant_trajectory() {
        let mesh = Mesh::rect(3, 3, &DirichletRule::new(&[Side::Left, Side::Right])).unwrap();
        let model = PlasticityModel::new(&mesh, ElasticityTensor::new(1.0, 1.0).unwrap(), YieldSet::new(1.0).unwrap()).unwrap();
        let grid = TimeGrid::new(1.0, 5).unwrap();
        let init = State::zero(&mesh);
        let ud = vec![FieldP1::zeros(&mesh); 6];
        let ell = vec![LoadVector::zeros(&mesh); 6];
        for cfg in [SolverConfig::explicit(0.05), SolverConfig::implicit(0.0)] {
            let tr = model.run_trajectory(&cfg, &grid, &ud, &ell, &init).unwrap();
            assert!(tr.states.iter().all(|s| s == &init));
            assert_eq!(tr.diagnostics.sigma_rate_l2l2, 0.0);
        }
    }

    #[test]
    fn implicit_bar_hits_exact_stress() {
        let model = bar(5);
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let (ud, ell) = bar_paths(&model, &grid);
        let tr = model
            .run_trajectory(&SolverConfig::implicit(0.0), &grid, &ud, &ell, &State::zero(model.mesh()))
            .unwrap();
        for (k, st) in tr.states.iter().enumerate() {
            let expect = (2.0 * grid.time(k)).min(1.0);
            for s in &st.sigma.data {
                assert!((s.get(0, 0) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn explicit_bar_substeps() {
        let model = bar(2);
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let (ud, ell) = bar_paths(&model, &grid);
        let cfg = SolverConfig::explicit(1e-3);
        let tr = model.run_trajectory(&cfg, &grid, &ud, &ell, &State::zero(model.mesh())).unwrap();
        assert_eq!(tr.substeps, 10);
        let last = tr.states.last().unwrap().sigma.data[0].get(0, 0);
        assert!((last - 1.0).abs() < 5e-3, "sigma(1) = {last}");
    }

    #[test]
    fn run_rejects_bad_initial_data() {
        let model = bar(3);
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let (ud, mut ell) = bar_paths(&model, &grid);
        ell[0].data[1] = 1.0;
        let init = State::zero(model.mesh());
        let err = model.run_trajectory(&SolverConfig::implicit(0.0), &grid, &ud, &ell, &init);
        assert!(matches!(err, Err(Error::Precondition(_))));
        let (mut ud, ell) = bar_paths(&model, &grid);
        ud[0].data[3] = 0.5;
        let err = model.run_trajectory(&SolverConfig::implicit(0.0), &grid, &ud, &ell, &init);
        assert!(matches!(err, Err(Error::Precondition(_))));
        let err = model.run_trajectory(&SolverConfig::implicit(0.0), &grid, &ud[..3], &ell, &init);
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn explicit_needs_positive_lambda() {
        let model = bar(3);
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let (ud, ell) = bar_paths(&model, &grid);
        let init = State::zero(model.mesh());
        assert!(model.run_trajectory(&SolverConfig::explicit(0.0), &grid, &ud, &ell, &init).is_err());
    }

    #[test]
    fn initial_state_checks() {
        let mesh = Mesh::rect(2, 2, &DirichletRule::all()).unwrap();
        let el = ElasticityTensor::new(1.0, 1.0).unwrap();
        let model = PlasticityModel::new(&mesh, el, YieldSet::new(1.0).unwrap()).unwrap();
        // affine u0 with matching elastic stress: z0 = 0
        let u0 = FieldP1::interpolate(&mesh, |x| [0.1 * x[0], -0.05 * x[1]]);
        let s0 = FieldP0::constant(&mesh, el.apply_c(&SymTensor::diag(&[0.1, -0.05])));
        let st = model.initial_state(u0.clone(), s0).unwrap();
        assert!(st.z.data.iter().all(|z| z.norm() < 1e-15));
        // zero stress with volumetric strain: z0 = E u0 has a trace
        let u_vol = FieldP1::interpolate(&mesh, |x| [0.1 * x[0], 0.1 * x[1]]);
        assert!(model.initial_state(u_vol, FieldP0::zeros(&mesh)).is_err());
        // inadmissible stress
        let big = FieldP0::constant(&mesh, SymTensor::diag(&[3.0, -3.0]));
        assert!(model.initial_state(FieldP1::zeros(&mesh), big).is_err());
    }

    #[test]
    fn flow_rule_with_zero_rate_is_constant() {
        let el = ElasticityTensor::new(1.0, 1.0).unwrap();
        let ys = YieldSet::new(1.0).unwrap();
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let s0 = FieldP0 {
            data: vec![SymTensor::from_components(2, &[0.3, -0.1, 0.2]).unwrap(); 3],
        };
        let w = vec![
            FieldP0 {
                data: vec![SymTensor::zeros(2); 3]
            };
            11
        ];
        for (scheme, lam) in [(Scheme::Explicit, 0.1), (Scheme::Implicit, 0.1), (Scheme::Implicit, 0.0)] {
            let rp = RegularizationParams::new(lam, 0.0).unwrap();
            let out = evolve_flow_rule(&el, &ys, &rp, scheme, &grid, &w, &s0).unwrap();
            assert!(out.iter().all(|s| s == &s0));
        }
    }

    #[test]
    fn flow_rule_1d_projected() {
        let el = ElasticityTensor::uniaxial(1.0).unwrap();
        let ys = YieldSet::new(1.0).unwrap();
        let grid = TimeGrid::new(1.0, 40).unwrap();
        let w = vec![
            FieldP0 {
                data: vec![SymTensor::diag(&[2.0])]
            };
            41
        ];
        let s0 = FieldP0 {
            data: vec![SymTensor::diag(&[0.0])],
        };
        let rp = RegularizationParams::new(0.0, 0.0).unwrap();
        let out = evolve_flow_rule(&el, &ys, &rp, Scheme::Implicit, &grid, &w, &s0).unwrap();
        for (k, s) in out.iter().enumerate() {
            assert!((s.data[0].get(0, 0) - (2.0 * grid.time(k)).min(1.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn h1_norm_of_constant_field() {
        let mesh = Mesh::rect(3, 3, &DirichletRule::all()).unwrap();
        let one = FieldP1::interpolate(&mesh, |_| [1.0, 0.0]);
        // mass of a constant equals the area
        assert!((h1_inner(&mesh, &one.data, &one.data) - 1.0).abs() < 1e-14);
        let lin = FieldP1::interpolate(&mesh, |x| [x[0], 0.0]);
        // int x^2 + 1 = 4/3
        assert!((h1_inner(&mesh, &lin.data, &lin.data) - 4.0 / 3.0).abs() < 1e-14);
    }
}
