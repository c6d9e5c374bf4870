//! Regularized Dirichlet boundary control.
//!
//! The controls are the nodal Dirichlet data `u_D` on the whole mesh and an
//! auxiliary load `l`, both piecewise linear on the time grid. The state is
//! computed with the explicit scheme, the gradient by a discrete adjoint
//! sweep through every (sub)step of that scheme.

mod adjoint;
mod continuation;
mod lbfgs;
mod objective;

pub use adjoint::eval_gradient;
pub use continuation::{lambda_continuation, optimize, OptReport};
pub use lbfgs::{minimize, IterationRecord, LbfgsOptions, LbfgsResult, OptStatus};
pub use objective::{
    eval_objective, huber, load_norms, tikhonov_surrogate, x_norm_sq, Evaluation, ObjectiveParts,
};

use crate::error::{Error, Result};
use crate::mesh::{FieldP0, FieldP1, LoadVector, Mesh};
use crate::solver::{PlasticityModel, SolverConfig, State, TimeGrid};
use crate::yield_set::RegularizationParams;

#[derive(Clone, Debug)]
pub struct ObjectiveSpec {
    /// Desired strain rate at every time node (entry 0 unused).
    pub mu_target: Vec<FieldP0>,
    /// Desired velocity at every time node (entry 0 unused).
    pub v_target: Vec<FieldP1>,
    pub alpha: f64,
    pub theta: f64,
    pub load_rate_weight: f64,
    pub huber_eps_obj: f64,
    /// Yosida parameter and flow-rule smoothing width of the state equation.
    pub rp: RegularizationParams,
    /// Budget for the stress-regularity monitor.
    pub r_monitor: f64,
    pub strain_weight: f64,
    pub velocity_weight: f64,
}

impl ObjectiveSpec {
    /// Zero targets with default weights.
    pub fn new(mesh: &Mesh, grid: &TimeGrid, rp: RegularizationParams) -> Self {
        ObjectiveSpec {
            mu_target: vec![FieldP0::zeros(mesh); grid.steps + 1],
            v_target: vec![FieldP1::zeros(mesh); grid.steps + 1],
            alpha: 1e-3,
            theta: 0.5,
            load_rate_weight: 1.0,
            huber_eps_obj: 1e-3,
            rp,
            r_monitor: 1e3,
            strain_weight: 1.0,
            velocity_weight: 1.0,
        }
    }

    pub fn validate(&self, mesh: &Mesh, grid: &TimeGrid) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return bad(format!("theta must lie in (0, 1), got {}", self.theta));
        }
        if !(self.alpha > 0.0) {
            return bad(format!("alpha must be > 0, got {}", self.alpha));
        }
        if !(self.huber_eps_obj > 0.0) {
            return bad(format!("huber_eps_obj must be > 0, got {}", self.huber_eps_obj));
        }
        if !(self.load_rate_weight >= 0.0) || !(self.strain_weight >= 0.0) || !(self.velocity_weight >= 0.0) {
            return bad("weights must be >= 0".into());
        }
        if !(self.r_monitor > 0.0) {
            return bad(format!("r_monitor must be > 0, got {}", self.r_monitor));
        }
        if !(self.rp.lambda > 0.0) {
            return bad("the control problem needs lambda > 0".into());
        }
        if self.mu_target.len() != grid.steps + 1 || self.v_target.len() != grid.steps + 1 {
            return Err(Error::Precondition(format!(
                "targets need {} time snapshots, got {} and {}",
                grid.steps + 1,
                self.mu_target.len(),
                self.v_target.len()
            )));
        }
        for m in &self.mu_target {
            m.check(mesh)?;
        }
        for v in &self.v_target {
            v.check(mesh)?;
        }
        Ok(())
    }

    /// `lambda^(-theta)`, the weight of the load penalty.
    pub fn penalty_coefficient(&self) -> f64 {
        self.rp.lambda.powf(-self.theta)
    }
}

/// Dirichlet data and auxiliary loads at every time node.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlParam {
    pub ud: Vec<FieldP1>,
    pub ell: Vec<LoadVector>,
}

impl ControlParam {
    pub fn zeros_like(&self) -> Self {
        ControlParam {
            ud: self.ud.iter().map(|u| FieldP1 { dim: u.dim, data: vec![0.0; u.data.len()] }).collect(),
            ell: self.ell.iter().map(|l| LoadVector { data: vec![0.0; l.data.len()] }).collect(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ControlProblem {
    pub model: PlasticityModel,
    pub grid: TimeGrid,
    pub init: State,
    pub spec: ObjectiveSpec,
}

impl ControlProblem {
    pub fn new(model: PlasticityModel, grid: TimeGrid, init: State, spec: ObjectiveSpec) -> Result<Self> {
        spec.validate(model.mesh(), &grid)?;
        init.u.check(model.mesh())?;
        init.sigma.check(model.mesh())?;
        init.z.check(model.mesh())?;
        Ok(ControlProblem { model, grid, init, spec })
    }

    pub fn mesh(&self) -> &Mesh {
        self.model.mesh()
    }

    pub fn solver_config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::explicit(self.spec.rp.lambda);
        cfg.rp = self.spec.rp;
        cfg.smoothed = self.spec.rp.huber_eps > 0.0;
        cfg
    }

    /// Same problem with a different Yosida parameter.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let mut p = self.clone();
        p.spec.rp = RegularizationParams::new(lambda, self.spec.rp.huber_eps)?;
        p.spec.validate(p.mesh(), &p.grid)?;
        Ok(p)
    }

    /// The constant control `(u_0, 0)`.
    pub fn initial_control(&self) -> ControlParam {
        ControlParam {
            ud: vec![self.init.u.clone(); self.grid.steps + 1],
            ell: vec![LoadVector::zeros(self.mesh()); self.grid.steps + 1],
        }
    }

    pub fn check_control(&self, cp: &ControlParam) -> Result<()> {
        let n = self.grid.steps + 1;
        if cp.ud.len() != n || cp.ell.len() != n {
            return Err(Error::Precondition(format!("controls need {n} time snapshots")));
        }
        for u in &cp.ud {
            u.check(self.mesh())?;
        }
        for l in &cp.ell {
            l.check(self.mesh())?;
        }
        let sys = &self.model.system;
        if sys.fixed_dofs().iter().any(|&i| cp.ud[0].data[i] != self.init.u.data[i]) {
            return Err(Error::Precondition("u_D(0) must equal u_0 on the Dirichlet boundary".into()));
        }
        if cp.ell[0].data.iter().any(|&v| v != 0.0) {
            return Err(Error::Precondition("the load must vanish at t = 0".into()));
        }
        Ok(())
    }

    fn ud_free(&self, k: usize, dof: usize) -> bool {
        k > 0 || !self.model.system.is_fixed(dof)
    }

    fn ell_free(&self, k: usize, dof: usize) -> bool {
        k > 0 && !self.model.system.is_fixed(dof)
    }

    /// Zeroes the entries of `g` that belong to pinned coefficients.
    pub fn zero_pinned(&self, g: &mut ControlParam) {
        for (k, u) in g.ud.iter_mut().enumerate() {
            for (i, v) in u.data.iter_mut().enumerate() {
                if !self.ud_free(k, i) {
                    *v = 0.0;
                }
            }
        }
        for (k, l) in g.ell.iter_mut().enumerate() {
            for (i, v) in l.data.iter_mut().enumerate() {
                if !self.ell_free(k, i) {
                    *v = 0.0;
                }
            }
        }
    }

    pub fn num_free(&self) -> usize {
        let nd = self.mesh().num_dofs();
        let nfix = self.model.system.fixed_dofs().len();
        let n = self.grid.steps;
        (n + 1) * nd - nfix + n * (nd - nfix)
    }

    /// Free coefficients in a flat vector.
    pub fn pack(&self, cp: &ControlParam) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.num_free());
        for (k, u) in cp.ud.iter().enumerate() {
            x.extend(u.data.iter().enumerate().filter(|(i, _)| self.ud_free(k, *i)).map(|(_, v)| *v));
        }
        for (k, l) in cp.ell.iter().enumerate() {
            x.extend(l.data.iter().enumerate().filter(|(i, _)| self.ell_free(k, *i)).map(|(_, v)| *v));
        }
        x
    }

    /// Inverse of [`pack`](Self::pack); pinned coefficients take their fixed values.
    pub fn unpack(&self, x: &[f64]) -> Result<ControlParam> {
        if x.len() != self.num_free() {
            return Err(Error::DimensionMismatch {
                expected: self.num_free(),
                found: x.len(),
            });
        }
        let mut cp = self.initial_control();
        let mut it = x.iter();
        for k in 0..cp.ud.len() {
            for i in 0..cp.ud[k].data.len() {
                if self.ud_free(k, i) {
                    cp.ud[k].data[i] = *it.next().unwrap();
                }
            }
        }
        for k in 0..cp.ell.len() {
            for i in 0..cp.ell[k].data.len() {
                if self.ell_free(k, i) {
                    cp.ell[k].data[i] = *it.next().unwrap();
                }
            }
        }
        Ok(cp)
    }
}
