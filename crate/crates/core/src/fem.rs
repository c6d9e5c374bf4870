//! Elastic equilibrium with prescribed plastic strain, Dirichlet data and load.
//!
//! For P1 displacements and P0 plastic strain the discrete problem is: find
//! `u` with `u = u_D` on Dirichlet dofs such that
//!
//! ```text
//! int C (E u - z) : E phi dx = <l, phi>   for all P1 phi vanishing on Gamma_D
//! ```
//!
//! and `sigma = C (E u - z)` cellwise. The free-dof stiffness block does not
//! depend on `z`, `u_D` or `l`, so it is factorized once per mesh and material.

use crate::error::{Error, Result};
use crate::linalg::{conjugate_gradient, BandCholesky, CsrMatrix};
use crate::mesh::{basis_strain, FieldP0, FieldP1, LoadVector, Mesh};
use crate::tensor::{ElasticityTensor, SymTensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearSolverKind {
    #[default]
    Cholesky,
    Cg,
}

#[derive(Clone, Debug)]
enum Factor {
    Cholesky(BandCholesky),
    Cg,
}

/// Assembled and factorized elastic system on a mesh.
#[derive(Clone, Debug)]
pub struct ElasticSystem {
    pub mesh: Mesh,
    pub elasticity: ElasticityTensor,
    stiffness: CsrMatrix,
    free: Vec<usize>,
    fixed: Vec<usize>,
    /// Position of each dof in `free` or `fixed`.
    slot: Vec<usize>,
    is_fixed: Vec<bool>,
    k_ff: CsrMatrix,
    k_fd: CsrMatrix,
    factor: Factor,
}

/// Assembles the full stiffness matrix `K_ab = int C E phi_a : E phi_b`.
pub fn assemble_stiffness(mesh: &Mesh, el: &ElasticityTensor) -> CsrMatrix {
    let d = mesh.dim();
    let nloc = (d + 1) * d;
    let mut trips = Vec::with_capacity(mesh.num_cells() * nloc * nloc);
    let mut eps = Vec::with_capacity(nloc);
    let mut dofs = Vec::with_capacity(nloc);
    for c in 0..mesh.num_cells() {
        let g = mesh.geometry(c);
        eps.clear();
        dofs.clear();
        for (a, &n) in mesh.cell_nodes(c).iter().enumerate() {
            for i in 0..d {
                eps.push(basis_strain(d, i, &g.grads[a]));
                dofs.push(n * d + i);
            }
        }
        for p in 0..nloc {
            let ce = el.apply_c(&eps[p]);
            for q in 0..nloc {
                trips.push((dofs[p], dofs[q], g.measure * ce.ddot(&eps[q])));
            }
        }
    }
    let n = mesh.num_dofs();
    CsrMatrix::from_triplets(n, n, trips)
}

impl ElasticSystem {
    pub fn new(mesh: &Mesh, elasticity: ElasticityTensor) -> Result<Self> {
        Self::with_solver(mesh, elasticity, LinearSolverKind::Cholesky)
    }

    pub fn with_solver(mesh: &Mesh, elasticity: ElasticityTensor, kind: LinearSolverKind) -> Result<Self> {
        let is_fixed = mesh.dirichlet_dof_mask();
        let free: Vec<usize> = (0..mesh.num_dofs()).filter(|&i| !is_fixed[i]).collect();
        let fixed: Vec<usize> = (0..mesh.num_dofs()).filter(|&i| is_fixed[i]).collect();
        if fixed.is_empty() {
            return Err(Error::Singular(
                "empty Dirichlet boundary: rigid motions are not controlled".into(),
            ));
        }
        let mut slot = vec![0; mesh.num_dofs()];
        for (k, &i) in free.iter().enumerate() {
            slot[i] = k;
        }
        for (k, &i) in fixed.iter().enumerate() {
            slot[i] = k;
        }
        let stiffness = assemble_stiffness(mesh, &elasticity);
        let k_ff = stiffness.submatrix(&free, &free);
        let k_fd = stiffness.submatrix(&free, &fixed);
        let factor = match kind {
            LinearSolverKind::Cholesky if free.is_empty() => Factor::Cg,
            LinearSolverKind::Cholesky => Factor::Cholesky(BandCholesky::factor(&k_ff)?),
            LinearSolverKind::Cg => Factor::Cg,
        };
        Ok(ElasticSystem {
            mesh: mesh.clone(),
            elasticity,
            stiffness,
            free,
            fixed,
            slot,
            is_fixed,
            k_ff,
            k_fd,
            factor,
        })
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn fixed_dofs(&self) -> &[usize] {
        &self.fixed
    }

    pub fn is_fixed(&self, dof: usize) -> bool {
        self.is_fixed[dof]
    }

    pub fn num_free(&self) -> usize {
        self.free.len()
    }

    /// Solves `K_ff x = b` on the free dofs.
    pub fn solve_free(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.is_empty() {
            return Ok(Vec::new());
        }
        match &self.factor {
            Factor::Cholesky(f) => Ok(f.solve(b)),
            Factor::Cg => conjugate_gradient(&self.k_ff, b, 1e-12, 10 * b.len() + 100),
        }
    }

    /// Plastic-strain load `F(z)_a = int C z : E phi_a dx`.
    pub fn plastic_load(&self, z: &FieldP0) -> Vec<f64> {
        let mesh = &self.mesh;
        let weighted: Vec<SymTensor> = z
            .data
            .iter()
            .enumerate()
            .map(|(c, zc)| self.elasticity.apply_c(zc) * mesh.geometry(c).measure)
            .collect();
        let mut out = vec![0.0; mesh.num_dofs()];
        mesh.strain_transpose_add(&weighted, &mut out);
        out
    }

    /// Cellwise stress `C (E u - z)`.
    pub fn stress(&self, u: &FieldP1, z: &FieldP0) -> FieldP0 {
        FieldP0 {
            data: (0..self.mesh.num_cells())
                .map(|c| self.elasticity.apply_c(&(self.mesh.cell_strain(c, &u.data) - z.data[c])))
                .collect(),
        }
    }

    /// Displacement for the given plastic strain, Dirichlet data and load.
    pub fn solve_displacement(&self, z: &FieldP0, ud: &FieldP1, ell: &LoadVector) -> Result<FieldP1> {
        z.check(&self.mesh)?;
        ud.check(&self.mesh)?;
        ell.check(&self.mesh)?;
        let fz = self.plastic_load(z);
        let dvals: Vec<f64> = self.fixed.iter().map(|&i| ud.data[i]).collect();
        let lift = self.k_fd.mul_vec(&dvals);
        let rhs: Vec<f64> = self
            .free
            .iter()
            .enumerate()
            .map(|(k, &i)| ell.data[i] + fz[i] - lift[k])
            .collect();
        let uf = self.solve_free(&rhs)?;
        let mut u = vec![0.0; self.mesh.num_dofs()];
        for (k, &i) in self.free.iter().enumerate() {
            u[i] = uf[k];
        }
        for (k, &i) in self.fixed.iter().enumerate() {
            u[i] = dvals[k];
        }
        Ok(FieldP1 {
            dim: self.mesh.dim(),
            data: u,
        })
    }

    pub fn solve(&self, z: &FieldP0, ud: &FieldP1, ell: &LoadVector) -> Result<(FieldP1, FieldP0)> {
        let u = self.solve_displacement(z, ud, ell)?;
        let sigma = self.stress(&u, z);
        Ok((u, sigma))
    }

    /// Equilibrium residual `int sigma : E phi_a - <l, phi_a>` on free dofs.
    pub fn residual(&self, sigma: &FieldP0, ell: &LoadVector) -> Vec<f64> {
        let mesh = &self.mesh;
        let weighted: Vec<SymTensor> = sigma
            .data
            .iter()
            .enumerate()
            .map(|(c, s)| *s * mesh.geometry(c).measure)
            .collect();
        let mut r = vec![0.0; mesh.num_dofs()];
        mesh.strain_transpose_add(&weighted, &mut r);
        self.free.iter().map(|&i| r[i] - ell.data[i]).collect()
    }

    /// Discrete dual norm squared `l_f^T K_ff^{-1} l_f`.
    pub fn dual_norm_sq(&self, ell: &LoadVector) -> Result<f64> {
        let lf: Vec<f64> = self.free.iter().map(|&i| ell.data[i]).collect();
        let x = self.solve_free(&lf)?;
        Ok(lf.iter().zip(&x).map(|(a, b)| a * b).sum())
    }

    /// Dual inner product `a_f^T K_ff^{-1} b_f` and the vector `K_ff^{-1} b_f`
    /// scattered to all dofs (zeros on fixed dofs).
    pub fn dual_solve(&self, ell: &[f64]) -> Result<Vec<f64>> {
        let lf: Vec<f64> = self.free.iter().map(|&i| ell[i]).collect();
        let x = self.solve_free(&lf)?;
        let mut out = vec![0.0; ell.len()];
        for (k, &i) in self.free.iter().enumerate() {
            out[i] = x[k];
        }
        Ok(out)
    }

    /// Adjoint of [`solve_displacement`](Self::solve_displacement).
    ///
    /// Given `u_bar = dJ/du`, returns `(z_bar, d_bar, l_bar)` with `z_bar` in the
    /// Frobenius pairing per cell, `d_bar` over all dofs (nonzero on fixed dofs
    /// only) and `l_bar` over all dofs (nonzero on free dofs only).
    pub fn displacement_adjoint(&self, u_bar: &[f64]) -> Result<(Vec<SymTensor>, Vec<f64>, Vec<f64>)> {
        let mesh = &self.mesh;
        let rhs: Vec<f64> = self.free.iter().map(|&i| u_bar[i]).collect();
        let p = self.solve_free(&rhs)?;
        let mut p_full = vec![0.0; mesh.num_dofs()];
        let mut l_bar = vec![0.0; mesh.num_dofs()];
        for (k, &i) in self.free.iter().enumerate() {
            p_full[i] = p[k];
            l_bar[i] = p[k];
        }
        let z_bar = (0..mesh.num_cells())
            .map(|c| self.elasticity.apply_c(&mesh.cell_strain(c, &p_full)) * mesh.geometry(c).measure)
            .collect();
        let mut d_bar = vec![0.0; mesh.num_dofs()];
        let mut kdf_p = vec![0.0; self.fixed.len()];
        self.k_fd.mul_transpose_add(&p, &mut kdf_p);
        for (k, &i) in self.fixed.iter().enumerate() {
            d_bar[i] = u_bar[i] - kdf_p[k];
        }
        Ok((z_bar, d_bar, l_bar))
    }

    /// Position of `dof` within the free or fixed list.
    pub fn slot(&self, dof: usize) -> usize {
        self.slot[dof]
    }
}

/// One-shot equilibrium solve; assembles and factorizes on every call.
pub fn solve_equilibrium(
    mesh: &Mesh,
    elasticity: &ElasticityTensor,
    z: &FieldP0,
    ud: &FieldP1,
    ell: &LoadVector,
) -> Result<(FieldP1, FieldP0)> {
    ElasticSystem::new(mesh, *elasticity)?.solve(z, ud, ell)
}
