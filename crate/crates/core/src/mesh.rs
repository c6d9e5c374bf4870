//! Structured simplicial meshes and the discrete fields living on them.
//!
//! Rectangular meshes cover the unit square with `nx x ny` squares, each split
//! into two triangles. The diagonal alternates in a checkerboard pattern
//! (square `(i, j)` uses the `(0,0)-(1,1)` diagonal when `i + j` is even and the
//! `(1,0)-(0,1)` diagonal otherwise), giving `(nx+1)(ny+1)` nodes and
//! `2 nx ny` cells. Nodes are numbered row by row, `j (nx+1) + i`.
//!
//! Interval meshes split `[0, 1]` into `nx` equal cells with nodes `0..=nx`.
//!
//! Displacements are continuous piecewise linear ([`FieldP1`]); strains,
//! stresses and plastic strains are cellwise constant ([`FieldP0`]).

use crate::error::{Error, Result};
use crate::tensor::SymTensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FacetTag {
    Dirichlet,
    Neumann,
}

/// Which sides of the domain carry Dirichlet data. All other boundary facets
/// are traction free.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirichletRule {
    pub sides: Vec<Side>,
}

impl DirichletRule {
    pub fn new(sides: &[Side]) -> Self {
        DirichletRule {
            sides: sides.to_vec(),
        }
    }

    pub fn all() -> Self {
        Self::new(&[Side::Left, Side::Right, Side::Bottom, Side::Top])
    }

    fn tag(&self, side: Side) -> FacetTag {
        if self.sides.contains(&side) {
            FacetTag::Dirichlet
        } else {
            FacetTag::Neumann
        }
    }
}

/// Measure and basis-function gradients of one cell.
#[derive(Clone, Copy, Debug)]
pub struct CellGeometry {
    pub measure: f64,
    /// `grads[a][k]` is `d phi_a / d x_k`.
    pub grads: [[f64; 2]; 3],
}

#[derive(Clone, Debug)]
pub struct Mesh {
    dim: usize,
    coords: Vec<f64>,
    cells: Vec<usize>,
    facets: Vec<usize>,
    facet_tags: Vec<FacetTag>,
    geometry: Vec<CellGeometry>,
}

impl Mesh {
    /// Builds a mesh from raw arrays, validating indices and orientation.
    ///
    /// `cells` has stride `dim + 1`, `facets` stride `dim`. An empty Dirichlet
    /// boundary is accepted here; the elastic solve reports it as singular.
    pub fn from_parts(
        dim: usize,
        coords: Vec<f64>,
        cells: Vec<usize>,
        facets: Vec<usize>,
        facet_tags: Vec<FacetTag>,
    ) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidMesh(format!("unsupported mesh dimension {dim}")));
        }
        if !coords.len().is_multiple_of(dim) || !cells.len().is_multiple_of(dim + 1) || !facets.len().is_multiple_of(dim) {
            return Err(Error::InvalidMesh("array lengths do not match the stride".into()));
        }
        let nn = coords.len() / dim;
        if cells.iter().chain(facets.iter()).any(|&n| n >= nn) {
            return Err(Error::InvalidMesh("node index out of range".into()));
        }
        if facet_tags.len() != facets.len() / dim {
            return Err(Error::InvalidMesh(format!(
                "{} facets but {} tags",
                facets.len() / dim,
                facet_tags.len()
            )));
        }
        let mut mesh = Mesh {
            dim,
            coords,
            cells,
            facets,
            facet_tags,
            geometry: Vec::new(),
        };
        mesh.geometry = (0..mesh.num_cells())
            .map(|c| mesh.compute_geometry(c))
            .collect::<Result<_>>()?;
        Ok(mesh)
    }

    /// Uniform triangulation of the unit square.
    pub fn rect(nx: usize, ny: usize, rule: &DirichletRule) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidMesh("subdivisions must be >= 1".into()));
        }
        if rule.sides.is_empty() {
            return Err(Error::InvalidMesh("the Dirichlet boundary must not be empty".into()));
        }
        let node = |i: usize, j: usize| j * (nx + 1) + i;
        let mut coords = Vec::with_capacity(2 * (nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                coords.push(i as f64 / nx as f64);
                coords.push(j as f64 / ny as f64);
            }
        }
        let mut cells = Vec::with_capacity(6 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (n00, n10, n01, n11) = (node(i, j), node(i + 1, j), node(i, j + 1), node(i + 1, j + 1));
                if (i + j) % 2 == 0 {
                    cells.extend_from_slice(&[n00, n10, n11, n00, n11, n01]);
                } else {
                    cells.extend_from_slice(&[n00, n10, n01, n10, n11, n01]);
                }
            }
        }
        let mut facets = Vec::new();
        let mut tags = Vec::new();
        for i in 0..nx {
            facets.extend_from_slice(&[node(i, 0), node(i + 1, 0)]);
            tags.push(rule.tag(Side::Bottom));
        }
        for j in 0..ny {
            facets.extend_from_slice(&[node(nx, j), node(nx, j + 1)]);
            tags.push(rule.tag(Side::Right));
        }
        for i in (0..nx).rev() {
            facets.extend_from_slice(&[node(i + 1, ny), node(i, ny)]);
            tags.push(rule.tag(Side::Top));
        }
        for j in (0..ny).rev() {
            facets.extend_from_slice(&[node(0, j + 1), node(0, j)]);
            tags.push(rule.tag(Side::Left));
        }
        Self::from_parts(2, coords, cells, facets, tags)
    }

    /// Uniform mesh of `[0, 1]`; only `Left` (x = 0) and `Right` (x = 1) apply.
    pub fn interval(nx: usize, rule: &DirichletRule) -> Result<Self> {
        if nx == 0 {
            return Err(Error::InvalidMesh("subdivisions must be >= 1".into()));
        }
        let tags = [rule.tag(Side::Left), rule.tag(Side::Right)];
        if !tags.contains(&FacetTag::Dirichlet) {
            return Err(Error::InvalidMesh("the Dirichlet boundary must not be empty".into()));
        }
        let coords = (0..=nx).map(|i| i as f64 / nx as f64).collect();
        let cells = (0..nx).flat_map(|i| [i, i + 1]).collect();
        Self::from_parts(1, coords, cells, vec![0, nx], tags.to_vec())
    }

    fn compute_geometry(&self, c: usize) -> Result<CellGeometry> {
        let nodes = self.cell_nodes(c);
        let mut grads = [[0.0; 2]; 3];
        let measure;
        if self.dim == 1 {
            let h = self.coord(nodes[1])[0] - self.coord(nodes[0])[0];
            measure = h;
            grads[0][0] = -1.0 / h;
            grads[1][0] = 1.0 / h;
        } else {
            let p: Vec<&[f64]> = nodes.iter().map(|&n| self.coord(n)).collect();
            let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
            measure = 0.5 * det;
            grads[0] = [(p[1][1] - p[2][1]) / det, (p[2][0] - p[1][0]) / det];
            grads[1] = [(p[2][1] - p[0][1]) / det, (p[0][0] - p[2][0]) / det];
            grads[2] = [(p[0][1] - p[1][1]) / det, (p[1][0] - p[0][0]) / det];
        }
        if !(measure > 0.0) {
            return Err(Error::InvalidMesh(format!("cell {c} is degenerate or negatively oriented")));
        }
        Ok(CellGeometry { measure, grads })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.coords.len() / self.dim
    }

    #[inline]
    pub fn num_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn num_facets(&self) -> usize {
        self.facet_tags.len()
    }

    /// Displacement degrees of freedom, `num_nodes * dim`.
    pub fn num_dofs(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn coord(&self, n: usize) -> &[f64] {
        &self.coords[n * self.dim..(n + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    #[inline]
    pub fn cell_nodes(&self, c: usize) -> &[usize] {
        let k = self.dim + 1;
        &self.cells[c * k..(c + 1) * k]
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn facet_nodes(&self, f: usize) -> &[usize] {
        &self.facets[f * self.dim..(f + 1) * self.dim]
    }

    pub fn facet_tag(&self, f: usize) -> FacetTag {
        self.facet_tags[f]
    }

    #[inline]
    pub fn geometry(&self, c: usize) -> &CellGeometry {
        &self.geometry[c]
    }

    pub fn cell_measures(&self) -> Vec<f64> {
        self.geometry.iter().map(|g| g.measure).collect()
    }

    pub fn total_measure(&self) -> f64 {
        self.geometry.iter().map(|g| g.measure).sum()
    }

    pub fn centroid(&self, c: usize) -> [f64; 2] {
        let nodes = self.cell_nodes(c);
        let mut x = [0.0; 2];
        for &n in nodes {
            for (k, v) in self.coord(n).iter().enumerate() {
                x[k] += v / nodes.len() as f64;
            }
        }
        x
    }

    /// Sorted, deduplicated nodes lying on a Dirichlet facet.
    pub fn dirichlet_nodes(&self) -> Vec<usize> {
        let mut nodes: Vec<usize> = (0..self.num_facets())
            .filter(|&f| self.facet_tags[f] == FacetTag::Dirichlet)
            .flat_map(|f| self.facet_nodes(f).to_vec())
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    /// Boolean mask over dofs, true on Dirichlet-constrained dofs.
    pub fn dirichlet_dof_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.num_dofs()];
        for n in self.dirichlet_nodes() {
            for i in 0..self.dim {
                mask[n * self.dim + i] = true;
            }
        }
        mask
    }

    /// Lumped (row-sum) mass per node.
    pub fn lumped_node_measure(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.num_nodes()];
        let k = (self.dim + 1) as f64;
        for c in 0..self.num_cells() {
            let w = self.geometry[c].measure / k;
            for &n in self.cell_nodes(c) {
                m[n] += w;
            }
        }
        m
    }

    /// Measure-weighted average of cell values at each node (patch recovery).
    pub fn recover_nodal(&self, cell_values: &[f64]) -> Vec<f64> {
        assert_eq!(cell_values.len(), self.num_cells());
        let mut acc = vec![0.0; self.num_nodes()];
        let mut wsum = vec![0.0; self.num_nodes()];
        for c in 0..self.num_cells() {
            let w = self.geometry[c].measure;
            for &n in self.cell_nodes(c) {
                acc[n] += w * cell_values[c];
                wsum[n] += w;
            }
        }
        acc.iter().zip(&wsum).map(|(a, w)| a / w).collect()
    }

    /// Gradient of a scalar P1 field on cell `c`.
    #[inline]
    pub fn cell_gradient(&self, c: usize, nodal: &[f64]) -> [f64; 2] {
        let g = &self.geometry[c];
        let mut out = [0.0; 2];
        for (a, &n) in self.cell_nodes(c).iter().enumerate() {
            for k in 0..self.dim {
                out[k] += g.grads[a][k] * nodal[n];
            }
        }
        out
    }

    /// Symmetric gradient of a P1 displacement on cell `c`.
    #[inline]
    pub fn cell_strain(&self, c: usize, u: &[f64]) -> SymTensor {
        let d = self.dim;
        let g = &self.geometry[c];
        let mut m = [0.0; 4];
        for (a, &n) in self.cell_nodes(c).iter().enumerate() {
            for i in 0..d {
                let ui = u[n * d + i];
                for k in 0..d {
                    m[i * d + k] += ui * g.grads[a][k];
                }
            }
        }
        SymTensor::sym_from_matrix(d, &m[..d * d])
    }

    /// `out += E^T s`: transpose of the strain operator for the pairing
    /// `sum_c s_c : (E u)_c` (no measure weighting).
    pub fn strain_transpose_add(&self, s: &[SymTensor], out: &mut [f64]) {
        let d = self.dim;
        for (c, sc) in s.iter().enumerate() {
            let g = &self.geometry[c];
            for (a, &n) in self.cell_nodes(c).iter().enumerate() {
                for i in 0..d {
                    let mut v = 0.0;
                    for k in 0..d {
                        v += sc.get(i, k) * g.grads[a][k];
                    }
                    out[n * d + i] += v;
                }
            }
        }
    }
}

/// Free-function form of [`Mesh::rect`] / [`Mesh::interval`]: omit `ny` for an interval mesh.
pub fn build_rect_mesh(nx: usize, ny: Option<usize>, rule: &DirichletRule) -> Result<Mesh> {
    match ny {
        Some(ny) => Mesh::rect(nx, ny, rule),
        None => Mesh::interval(nx, rule),
    }
}

/// Symmetric gradient of the basis function `phi_a e_i`.
#[inline]
pub fn basis_strain(dim: usize, i: usize, grad: &[f64; 2]) -> SymTensor {
    let mut t = SymTensor::zeros(dim);
    for k in 0..dim {
        if k == i {
            t.set(i, i, grad[i]);
        } else {
            t.set(i, k, 0.5 * grad[k]);
        }
    }
    t
}

/// Continuous piecewise-linear vector field, `dim` values per node.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldP1 {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl FieldP1 {
    pub fn zeros(mesh: &Mesh) -> Self {
        FieldP1 {
            dim: mesh.dim(),
            data: vec![0.0; mesh.num_dofs()],
        }
    }

    /// Nodal interpolant of `f(x)`; only the first `dim` entries of the result are used.
    pub fn interpolate(mesh: &Mesh, f: impl Fn(&[f64]) -> [f64; 2]) -> Self {
        let d = mesh.dim();
        let mut data = Vec::with_capacity(mesh.num_dofs());
        for n in 0..mesh.num_nodes() {
            let v = f(mesh.coord(n));
            data.extend_from_slice(&v[..d]);
        }
        FieldP1 { dim: d, data }
    }

    pub fn node(&self, n: usize) -> &[f64] {
        &self.data[n * self.dim..(n + 1) * self.dim]
    }

    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        if self.dim != mesh.dim() || self.data.len() != mesh.num_dofs() {
            return Err(Error::MeshMismatch(format!(
                "P1 field of length {} (dim {}) on a mesh with {} dofs",
                self.data.len(),
                self.dim,
                mesh.num_dofs()
            )));
        }
        Ok(())
    }

    pub fn lerp(a: &FieldP1, b: &FieldP1, w: f64) -> FieldP1 {
        FieldP1 {
            dim: a.dim,
            data: a.data.iter().zip(&b.data).map(|(x, y)| (1.0 - w) * x + w * y).collect(),
        }
    }
}

/// Cellwise-constant symmetric tensor field.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldP0 {
    pub data: Vec<SymTensor>,
}

impl FieldP0 {
    pub fn zeros(mesh: &Mesh) -> Self {
        FieldP0 {
            data: vec![SymTensor::zeros(mesh.dim()); mesh.num_cells()],
        }
    }

    pub fn constant(mesh: &Mesh, t: SymTensor) -> Self {
        FieldP0 {
            data: vec![t; mesh.num_cells()],
        }
    }

    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        if self.data.len() != mesh.num_cells() || self.data.iter().any(|t| t.dim() != mesh.dim()) {
            return Err(Error::MeshMismatch(format!(
                "P0 field of length {} on a mesh with {} cells",
                self.data.len(),
                mesh.num_cells()
            )));
        }
        Ok(())
    }

    /// `L^2` norm with the mesh cell measures.
    pub fn l2_norm(&self, mesh: &Mesh) -> f64 {
        self.data
            .iter()
            .enumerate()
            .map(|(c, t)| mesh.geometry(c).measure * t.ddot(t))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs_trace(&self) -> f64 {
        self.data.iter().map(|t| t.trace().abs()).fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &FieldP0) -> FieldP0 {
        FieldP0 {
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a - *b).collect(),
        }
    }
}

/// Assembled dual load: one value per displacement dof. Values on Dirichlet
/// dofs are ignored by the solver.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadVector {
    pub data: Vec<f64>,
}

impl LoadVector {
    pub fn zeros(mesh: &Mesh) -> Self {
        LoadVector {
            data: vec![0.0; mesh.num_dofs()],
        }
    }

    /// Assembles `<l, phi> = int f . phi dx` for a volumetric density, using
    /// one-point (centroid) quadrature per cell. Exact for constant `f`.
    pub fn from_density(mesh: &Mesh, f: impl Fn(&[f64]) -> [f64; 2]) -> Self {
        let d = mesh.dim();
        let mut data = vec![0.0; mesh.num_dofs()];
        let k = (d + 1) as f64;
        for c in 0..mesh.num_cells() {
            let x = mesh.centroid(c);
            let fv = f(&x[..d]);
            let w = mesh.geometry(c).measure / k;
            for &n in mesh.cell_nodes(c) {
                for i in 0..d {
                    data[n * d + i] += w * fv[i];
                }
            }
        }
        LoadVector { data }
    }

    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        if self.data.len() != mesh.num_dofs() {
            return Err(Error::MeshMismatch(format!(
                "load vector of length {} on a mesh with {} dofs",
                self.data.len(),
                mesh.num_dofs()
            )));
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> LoadVector {
        LoadVector {
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }
}

/// Cellwise symmetric gradient of `u`.
pub fn strain(mesh: &Mesh, u: &FieldP1) -> Result<FieldP0> {
    u.check(mesh)?;
    Ok(FieldP0 {
        data: (0..mesh.num_cells()).map(|c| mesh.cell_strain(c, &u.data)).collect(),
    })
}
