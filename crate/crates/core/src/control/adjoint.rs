//! Reverse sweep through the explicit scheme.
//!
//! Each micro step `j` of length `h` computes
//!
//! ```text
//! z_j = z_{j-1} + h g(sigma_{j-1}),   u_j = U(z_j, d_j, l_j),   sigma_j = C (E u_j - z_j)
//! ```
//!
//! with `U` the linear equilibrium solve and `(d_j, l_j)` the data interpolated
//! between the neighbouring coarse nodes. Transposing gives, from the last
//! step backwards,
//!
//! ```text
//! sigma_bar_j = h Dg(sigma_j) z_bar_{j+1}
//! u_bar_j     = dJ/du_j + E^T C sigma_bar_j
//! z_bar_j     = z_bar_{j+1} - C sigma_bar_j + U_z^T u_bar_j
//! ```
//!
//! and the data adjoints `U_d^T u_bar_j`, `U_l^T u_bar_j` are split onto the
//! coarse nodes with the interpolation weights.

use super::objective::{direct_gradient, forward, tracking, Evaluation};
use super::{ControlParam, ControlProblem};
use crate::error::{Error, Result};
use crate::tensor::SymTensor;

/// Objective and its exact gradient with respect to every control coefficient.
/// Pinned coefficients (`u_D(0)` on the Dirichlet boundary, `l(0)`, loads on
/// fixed dofs) get a zero gradient.
pub fn eval_gradient(problem: &ControlProblem, cp: &ControlParam) -> Result<(Evaluation, ControlParam)> {
    if !(problem.spec.rp.huber_eps > 0.0) {
        return Err(Error::InvalidParameter(
            "the adjoint gradient needs the smoothed flow rule (huber_eps > 0)".into(),
        ));
    }
    let (eval, tape) = forward(problem, cp, true)?;
    let tape = tape.expect("tape requested");
    let mut grad = direct_gradient(problem, cp)?;
    let (_, _, track) = tracking(problem, &eval.trajectory, true);

    let model = &problem.model;
    let mesh = model.mesh();
    let el = model.elasticity();
    let ys = &model.yield_set;
    let rp = &problem.spec.rp;
    let cells = mesh.num_cells();
    let dim = mesh.dim();
    let s_per = tape.substeps;
    let h = problem.grid.dt() / s_per as f64;
    let m = problem.grid.steps * s_per;

    let mut z_bar = vec![SymTensor::zeros(dim); cells];
    let mut c_sigma_bar = vec![SymTensor::zeros(dim); cells];
    for j in (1..=m).rev() {
        if j < m {
            let sigma = &tape.pre_sigma[j];
            for c in 0..cells {
                let sb = ys.yosida_deriv_smoothed_jvp(rp, &sigma.data[c], &z_bar[c])? * h;
                c_sigma_bar[c] = el.apply_c(&sb);
            }
        }
        let mut u_bar = if j % s_per == 0 {
            track[j / s_per].clone()
        } else {
            vec![0.0; mesh.num_dofs()]
        };
        if j < m {
            mesh.strain_transpose_add(&c_sigma_bar, &mut u_bar);
        }
        let (zb, db, lb) = model.system.displacement_adjoint(&u_bar)?;
        for c in 0..cells {
            z_bar[c] += zb[c];
            if j < m {
                z_bar[c] -= c_sigma_bar[c];
            }
        }
        let k = (j - 1) / s_per + 1;
        let w = (j - (k - 1) * s_per) as f64 / s_per as f64;
        for i in 0..db.len() {
            grad.ud[k].data[i] += w * db[i];
            grad.ell[k].data[i] += w * lb[i];
            if w < 1.0 {
                grad.ud[k - 1].data[i] += (1.0 - w) * db[i];
                grad.ell[k - 1].data[i] += (1.0 - w) * lb[i];
            }
        }
    }
    problem.zero_pinned(&mut grad);
    Ok((eval, grad))
}
