use super::{ControlParam, ControlProblem};
use crate::error::Result;
use crate::mesh::{FieldP1, Mesh};
use crate::solver::{ExplicitTape, TimeGrid, Trajectory};
use crate::tensor::SymTensor;

/// Huber function `r^2 / (2 eps)` for `r <= eps`, `r - eps / 2` beyond.
#[inline]
pub fn huber(r: f64, eps: f64) -> f64 {
    if r <= eps {
        r * r / (2.0 * eps)
    } else {
        r - 0.5 * eps
    }
}

/// Scale factor `h'(r) / r` so that the gradient of `h(|x|)` is `x * factor`.
#[inline]
fn huber_factor(r: f64, eps: f64) -> f64 {
    if r <= eps {
        1.0 / eps
    } else {
        1.0 / r
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ObjectiveParts {
    pub strain: f64,
    pub velocity: f64,
    /// `alpha / 2` times the Tikhonov surrogate.
    pub tikhonov: f64,
    /// `lambda^(-theta) ||l||^2`.
    pub load: f64,
    /// `load_rate_weight ||dl/dt||^2`.
    pub load_rate: f64,
}

impl ObjectiveParts {
    pub fn total(&self) -> f64 {
        self.strain + self.velocity + self.tikhonov + self.load + self.load_rate
    }
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub value: f64,
    pub parts: ObjectiveParts,
    pub trajectory: Trajectory,
    /// `||l||_{L2(H^-1)}`.
    pub load_norm: f64,
    /// `||dsigma/dt||_{L2(L2)} + sup_t` of the recovered stress norm.
    pub r_monitor: f64,
    pub r_monitor_ok: bool,
}

/// Per-node and per-cell weights shared by all X-norm evaluations.
pub(super) struct XNorm<'a> {
    mesh: &'a Mesh,
    lumped: Vec<f64>,
    patch_weight: Vec<f64>,
}

impl<'a> XNorm<'a> {
    pub(super) fn new(mesh: &'a Mesh) -> Self {
        let mut patch_weight = vec![0.0; mesh.num_nodes()];
        for c in 0..mesh.num_cells() {
            let m = mesh.geometry(c).measure;
            for &n in mesh.cell_nodes(c) {
                patch_weight[n] += m;
            }
        }
        XNorm {
            mesh,
            lumped: mesh.lumped_node_measure(),
            patch_weight,
        }
    }

    fn grad_transpose_add(&self, c: usize, g: [f64; 2], out: &mut [f64]) {
        let geo = self.mesh.geometry(c);
        for (a, &n) in self.mesh.cell_nodes(c).iter().enumerate() {
            out[n] += geo.grads[a][0] * g[0] + geo.grads[a][1] * g[1];
        }
    }

    /// `Q a` for the quadratic form
    /// `||a||^2_X = sum_n m_n |a_n|^2 + ||grad a||^2 + ||grad R grad a||^2`.
    pub(super) fn apply(&self, a: &[f64]) -> Vec<f64> {
        let mesh = self.mesh;
        let d = mesh.dim();
        let nn = mesh.num_nodes();
        let nc = mesh.num_cells();
        let mut out = vec![0.0; a.len()];
        for n in 0..nn {
            for i in 0..d {
                out[n * d + i] += self.lumped[n] * a[n * d + i];
            }
        }
        let mut comp = vec![0.0; nn];
        let mut comp_bar = vec![0.0; nn];
        for i in 0..d {
            for n in 0..nn {
                comp[n] = a[n * d + i];
                comp_bar[n] = 0.0;
            }
            let grads: Vec<[f64; 2]> = (0..nc).map(|c| mesh.cell_gradient(c, &comp)).collect();
            let mut gbar: Vec<[f64; 2]> = (0..nc)
                .map(|c| {
                    let m = mesh.geometry(c).measure;
                    [m * grads[c][0], m * grads[c][1]]
                })
                .collect();
            for q in 0..d {
                let vals: Vec<f64> = grads.iter().map(|g| g[q]).collect();
                let rec = mesh.recover_nodal(&vals);
                let mut rec_bar = vec![0.0; nn];
                for c in 0..nc {
                    let h = mesh.cell_gradient(c, &rec);
                    let m = mesh.geometry(c).measure;
                    self.grad_transpose_add(c, [m * h[0], m * h[1]], &mut rec_bar);
                }
                for (c, gb) in gbar.iter_mut().enumerate() {
                    let m = mesh.geometry(c).measure;
                    gb[q] += mesh
                        .cell_nodes(c)
                        .iter()
                        .map(|&n| m * rec_bar[n] / self.patch_weight[n])
                        .sum::<f64>();
                }
            }
            for (c, gb) in gbar.iter().enumerate() {
                self.grad_transpose_add(c, *gb, &mut comp_bar);
            }
            for n in 0..nn {
                out[n * d + i] += comp_bar[n];
            }
        }
        out
    }
}

/// `||a||^2_X` of a single P1 field.
pub fn x_norm_sq(mesh: &Mesh, a: &FieldP1) -> f64 {
    let qa = XNorm::new(mesh).apply(&a.data);
    dot(&a.data, &qa)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Value and gradient of `c0 int ||f||^2 + c1 int ||df/dt||^2` for a path that
/// is piecewise linear in time, given the images `q_k = Q f_k` of a symmetric
/// quadratic form.
fn path_quadratic(dt: f64, f: &[&[f64]], q: &[Vec<f64>], c0: f64, c1: f64) -> (f64, f64, Vec<Vec<f64>>) {
    let mut level = 0.0;
    let mut rate = 0.0;
    let mut grad: Vec<Vec<f64>> = f.iter().map(|v| vec![0.0; v.len()]).collect();
    for k in 1..f.len() {
        let (a, b) = (f[k - 1], f[k]);
        let (qa, qb) = (&q[k - 1], &q[k]);
        let aa = dot(a, qa);
        let ab = dot(a, qb);
        let bb = dot(b, qb);
        level += dt / 3.0 * (aa + ab + bb);
        rate += (aa - 2.0 * ab + bb) / dt;
        for i in 0..a.len() {
            let ga = c0 * dt / 3.0 * (2.0 * qa[i] + qb[i]) + c1 * 2.0 * (qa[i] - qb[i]) / dt;
            let gb = c0 * dt / 3.0 * (qa[i] + 2.0 * qb[i]) + c1 * 2.0 * (qb[i] - qa[i]) / dt;
            grad[k - 1][i] += ga;
            grad[k][i] += gb;
        }
    }
    (level, rate, grad)
}

/// Discrete `||u_D||^2_{H1(0,T; X)}`.
pub fn tikhonov_surrogate(mesh: &Mesh, grid: &TimeGrid, ud: &[FieldP1]) -> f64 {
    let (v, _) = tikhonov_with_grad(mesh, grid, ud, 1.0);
    v
}

fn tikhonov_with_grad(mesh: &Mesh, grid: &TimeGrid, ud: &[FieldP1], scale: f64) -> (f64, Vec<Vec<f64>>) {
    let x = XNorm::new(mesh);
    let q: Vec<Vec<f64>> = ud.iter().map(|u| x.apply(&u.data)).collect();
    let f: Vec<&[f64]> = ud.iter().map(|u| u.data.as_slice()).collect();
    let (level, rate, grad) = path_quadratic(grid.dt(), &f, &q, scale, scale);
    (level + rate, grad)
}

/// `(||l||^2_{L2(H^-1)}, ||dl/dt||^2_{L2(H^-1)})` in the discrete dual norm.
pub fn load_norms(problem: &ControlProblem, ell: &[crate::mesh::LoadVector]) -> Result<(f64, f64)> {
    let (l, r, _) = load_terms(problem, ell, 1.0, 1.0)?;
    Ok((l, r))
}

fn load_terms(
    problem: &ControlProblem,
    ell: &[crate::mesh::LoadVector],
    c0: f64,
    c1: f64,
) -> Result<(f64, f64, Vec<Vec<f64>>)> {
    let sys = &problem.model.system;
    let q = ell
        .iter()
        .map(|l| sys.dual_solve(&l.data))
        .collect::<Result<Vec<_>>>()?;
    let f: Vec<&[f64]> = ell.iter().map(|l| l.data.as_slice()).collect();
    Ok(path_quadratic(problem.grid.dt(), &f, &q, c0, c1))
}

/// Tracking terms and their derivatives with respect to the coarse
/// displacements `u_k`.
pub(super) fn tracking(problem: &ControlProblem, traj: &Trajectory, with_grad: bool) -> (f64, f64, Vec<Vec<f64>>) {
    let mesh = problem.mesh();
    let spec = &problem.spec;
    let dt = problem.grid.dt();
    let eps = spec.huber_eps_obj;
    let d = mesh.dim();
    let lumped = mesh.lumped_node_measure();
    let nd = mesh.num_dofs();
    let mut strain = 0.0;
    let mut velocity = 0.0;
    let mut grad = if with_grad {
        vec![vec![0.0; nd]; traj.states.len()]
    } else {
        Vec::new()
    };
    for k in 1..traj.states.len() {
        let rate: Vec<f64> = traj.states[k]
            .u
            .data
            .iter()
            .zip(&traj.states[k - 1].u.data)
            .map(|(a, b)| (a - b) / dt)
            .collect();
        let mut hs = 0.0;
        let mut hs_dir: Vec<SymTensor> = Vec::with_capacity(mesh.num_cells());
        for c in 0..mesh.num_cells() {
            let r = mesh.cell_strain(c, &rate) - spec.mu_target[k].data[c];
            let rn = r.norm();
            let m = mesh.geometry(c).measure;
            hs += m * huber(rn, eps);
            if with_grad {
                hs_dir.push(r * (m * huber_factor(rn, eps)));
            }
        }
        let mut hv = 0.0;
        let mut hv_dir = vec![0.0; if with_grad { nd } else { 0 }];
        for n in 0..mesh.num_nodes() {
            let mut r = [0.0; 2];
            let mut rn2 = 0.0;
            for i in 0..d {
                r[i] = rate[n * d + i] - spec.v_target[k].data[n * d + i];
                rn2 += r[i] * r[i];
            }
            let rn = rn2.sqrt();
            hv += lumped[n] * huber(rn, eps);
            if with_grad {
                let f = lumped[n] * huber_factor(rn, eps);
                for i in 0..d {
                    hv_dir[n * d + i] = f * r[i];
                }
            }
        }
        strain += dt * spec.strain_weight * hs * hs;
        velocity += dt * spec.velocity_weight * hv * hv;
        if with_grad {
            // d/d(rate) of dt w H^2 is 2 dt w H dH; d(rate)/du_k = 1/dt
            let mut g = vec![0.0; nd];
            mesh.strain_transpose_add(&hs_dir, &mut g);
            let cs = 2.0 * spec.strain_weight * hs;
            let cv = 2.0 * spec.velocity_weight * hv;
            for i in 0..nd {
                let v = cs * g[i] + cv * hv_dir[i];
                grad[k][i] += v;
                grad[k - 1][i] -= v;
            }
        }
    }
    (strain, velocity, grad)
}

pub(super) fn forward(problem: &ControlProblem, cp: &ControlParam, record: bool) -> Result<(Evaluation, Option<ExplicitTape>)> {
    problem.check_control(cp)?;
    let cfg = problem.solver_config();
    let (traj, tape) = problem
        .model
        .run_inner(&cfg, &problem.grid, &cp.ud, &cp.ell, &problem.init, record)?;
    let spec = &problem.spec;
    let (strain, velocity, _) = tracking(problem, &traj, false);
    let tik = tikhonov_surrogate(problem.mesh(), &problem.grid, &cp.ud);
    let (l2, rate) = load_norms(problem, &cp.ell)?;
    let parts = ObjectiveParts {
        strain,
        velocity,
        tikhonov: 0.5 * spec.alpha * tik,
        load: spec.penalty_coefficient() * l2,
        load_rate: spec.load_rate_weight * rate,
    };
    let r_monitor = traj.diagnostics.sigma_rate_l2l2 + traj.diagnostics.stress_regularity_sup;
    Ok((
        Evaluation {
            value: parts.total(),
            parts,
            trajectory: traj,
            load_norm: l2.sqrt(),
            r_monitor,
            r_monitor_ok: r_monitor <= spec.r_monitor,
        },
        tape,
    ))
}

/// Runs the state equation for `cp` and evaluates the regularized objective.
pub fn eval_objective(problem: &ControlProblem, cp: &ControlParam) -> Result<Evaluation> {
    forward(problem, cp, false).map(|(e, _)| e)
}

/// Gradients of the control-only terms (Tikhonov and load penalties).
pub(super) fn direct_gradient(problem: &ControlProblem, cp: &ControlParam) -> Result<ControlParam> {
    let spec = &problem.spec;
    let (_, gu) = tikhonov_with_grad(problem.mesh(), &problem.grid, &cp.ud, 0.5 * spec.alpha);
    let (_, _, gl) = load_terms(problem, &cp.ell, spec.penalty_coefficient(), spec.load_rate_weight)?;
    let mut g = cp.zeros_like();
    for (dst, src) in g.ud.iter_mut().zip(gu) {
        dst.data = src;
    }
    for (dst, src) in g.ell.iter_mut().zip(gl) {
        dst.data = src;
    }
    Ok(g)
}
