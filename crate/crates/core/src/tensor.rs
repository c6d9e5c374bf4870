//! Small symmetric tensors and the isotropic elasticity pair `C` / `A = C^{-1}`.
//!
//! A [`SymTensor`] of dimension `n` stores its `n(n+1)/2` independent entries in
//! a fixed canonical order: the diagonal first, then the strict upper triangle
//! row by row.
//!
//! | dim | order                              |
//! |-----|------------------------------------|
//! | 1   | `s11`                              |
//! | 2   | `s11, s22, s12`                    |
//! | 3   | `s11, s22, s33, s12, s13, s23`     |
//!
//! All file formats in the crate use this ordering.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use crate::error::{Error, Result};

/// Symmetric `dim x dim` tensor, `dim` in `{1, 2, 3}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymTensor {
    dim: usize,
    c: [f64; 6],
}

/// Number of stored components for a given dimension.
pub const fn num_components(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Canonical component index of entry `(i, j)`.
fn index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    if i == j {
        return i;
    }
    match (dim, i, j) {
        (2, 0, 1) => 2,
        (3, 0, 1) => 3,
        (3, 0, 2) => 4,
        (3, 1, 2) => 5,
        _ => unreachable!("index ({i},{j}) out of range for dim {dim}"),
    }
}

impl SymTensor {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=3).contains(&dim), "tensor dimension must be 1, 2 or 3");
        SymTensor { dim, c: [0.0; 6] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            t.c[i] = 1.0;
        }
        t
    }

    /// Builds a tensor from its canonical components.
    pub fn from_components(dim: usize, comps: &[f64]) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!("tensor dimension {dim}")));
        }
        if comps.len() != num_components(dim) {
            return Err(Error::DimensionMismatch {
                expected: num_components(dim),
                found: comps.len(),
            });
        }
        let mut t = Self::zeros(dim);
        t.c[..comps.len()].copy_from_slice(comps);
        Ok(t)
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut t = Self::zeros(values.len());
        t.c[..values.len()].copy_from_slice(values);
        t
    }

    /// Symmetric part of a full row-major `dim x dim` matrix.
    pub fn sym_from_matrix(dim: usize, m: &[f64]) -> Self {
        assert_eq!(m.len(), dim * dim);
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                t.c[index(dim, i, j)] = 0.5 * (m[i * dim + j] + m[j * dim + i]);
            }
        }
        t
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn components(&self) -> &[f64] {
        &self.c[..num_components(self.dim)]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.c[index(self.dim, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.c[index(self.dim, i, j)] = v;
    }

    #[inline]
    pub fn trace(&self) -> f64 {
        self.c[..self.dim].iter().sum()
    }

    /// Trace-free part `t - (tr t / n) I`.
    pub fn deviator(&self) -> Self {
        let mean = self.trace() / self.dim as f64;
        let mut d = *self;
        for i in 0..self.dim {
            d.c[i] -= mean;
        }
        d
    }

    /// Spherical part `(tr t / n) I`.
    pub fn spherical(&self) -> Self {
        Self::identity(self.dim) * (self.trace() / self.dim as f64)
    }

    /// Frobenius product `a : b`, off-diagonal entries counted twice.
    pub fn frob_inner(&self, other: &Self) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(self.ddot(other))
    }

    /// Unchecked Frobenius product; panics on dimension mismatch.
    #[inline]
    pub fn ddot(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "tensor dimension mismatch");
        let n = self.dim;
        let m = num_components(n);
        let mut s = 0.0;
        for k in 0..n {
            s += self.c[k] * other.c[k];
        }
        for k in n..m {
            s += 2.0 * self.c[k] * other.c[k];
        }
        s
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|v| v.is_finite())
    }
}

impl Add for SymTensor {
    type Output = SymTensor;
    fn add(mut self, rhs: SymTensor) -> SymTensor {
        self += rhs;
        self
    }
}

impl AddAssign for SymTensor {
    fn add_assign(&mut self, rhs: SymTensor) {
        assert_eq!(self.dim, rhs.dim, "tensor dimension mismatch");
        for k in 0..6 {
            self.c[k] += rhs.c[k];
        }
    }
}

impl Sub for SymTensor {
    type Output = SymTensor;
    fn sub(mut self, rhs: SymTensor) -> SymTensor {
        self -= rhs;
        self
    }
}

impl SubAssign for SymTensor {
    fn sub_assign(&mut self, rhs: SymTensor) {
        assert_eq!(self.dim, rhs.dim, "tensor dimension mismatch");
        for k in 0..6 {
            self.c[k] -= rhs.c[k];
        }
    }
}

impl Mul<f64> for SymTensor {
    type Output = SymTensor;
    fn mul(mut self, s: f64) -> SymTensor {
        for k in 0..6 {
            self.c[k] *= s;
        }
        self
    }
}

impl Mul<SymTensor> for f64 {
    type Output = SymTensor;
    fn mul(self, t: SymTensor) -> SymTensor {
        t * self
    }
}

impl Neg for SymTensor {
    type Output = SymTensor;
    fn neg(self) -> SymTensor {
        self * -1.0
    }
}

/// Isotropic elasticity tensor in Lamé form, `C e = 2 mu e + lambda (tr e) I`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElasticityTensor {
    pub lame_lambda: f64,
    pub lame_mu: f64,
}

impl ElasticityTensor {
    pub fn new(lame_lambda: f64, lame_mu: f64) -> Result<Self> {
        if !(lame_lambda >= 0.0 && lame_lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lame_lambda must be >= 0, got {lame_lambda}"
            )));
        }
        if !(lame_mu > 0.0 && lame_mu.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lame_mu must be > 0, got {lame_mu}"
            )));
        }
        Ok(ElasticityTensor {
            lame_lambda,
            lame_mu,
        })
    }

    /// The scalar modulus `C = c` in one dimension.
    pub fn uniaxial(modulus: f64) -> Result<Self> {
        Self::new(0.0, 0.5 * modulus)
    }

    pub fn apply_c(&self, e: &SymTensor) -> SymTensor {
        let n = e.dim();
        *e * (2.0 * self.lame_mu) + SymTensor::identity(n) * (self.lame_lambda * e.trace())
    }

    pub fn apply_a(&self, s: &SymTensor) -> SymTensor {
        let n = s.dim() as f64;
        let two_mu = 2.0 * self.lame_mu;
        let vol = self.lame_lambda * s.trace() / (two_mu * (two_mu + n * self.lame_lambda));
        *s * (1.0 / two_mu) - SymTensor::identity(s.dim()) * vol
    }

    /// Bulk-like eigenvalue `2 mu + n lambda` (spherical tensors). Equals `||C||`.
    pub fn spherical_modulus(&self, dim: usize) -> f64 {
        2.0 * self.lame_mu + dim as f64 * self.lame_lambda
    }

    /// Operator norm of `C` on `R^{n x n}_sym` with the Frobenius norm.
    pub fn norm_c(&self, dim: usize) -> f64 {
        self.spherical_modulus(dim)
    }

    /// Coercivity constant of `C`. In one dimension there are no deviators and
    /// `C` is the scalar `2 mu + lambda`.
    pub fn gamma_c(&self, dim: usize) -> f64 {
        if dim == 1 {
            self.spherical_modulus(1)
        } else {
            2.0 * self.lame_mu
        }
    }

    /// Coercivity constant of `A`, i.e. `1 / ||C||`.
    pub fn gamma_a(&self, dim: usize) -> f64 {
        1.0 / self.spherical_modulus(dim)
    }

    /// Stiffness of `C` restricted to the subspace the yield set acts on
    /// (deviators for `dim >= 2`, the whole line for `dim == 1`).
    pub fn yield_modulus(&self, dim: usize) -> f64 {
        self.gamma_c(dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn offdiag01(dim: usize) -> SymTensor {
        let mut t = SymTensor::zeros(dim);
        t.set(0, 1, 1.0);
        t
    }

    #[test]
    fn deviator_examples() {
        assert_eq!(SymTensor::identity(2).deviator(), SymTensor::zeros(2));
        assert_eq!(SymTensor::diag(&[2.0, 0.0]).deviator(), SymTensor::diag(&[1.0, -1.0]));
        let t = SymTensor::from_components(3, &[1.0, -3.0, 2.0, 0.5, 0.1, -0.2]).unwrap();
        assert_eq!(t.deviator(), t);
    }

    #[test]
    fn frob_examples() {
        let i3 = SymTensor::identity(3);
        assert_eq!(i3.frob_inner(&i3).unwrap(), 3.0);
        let o = offdiag01(2);
        assert_eq!(o.frob_inner(&o).unwrap(), 2.0);
        assert!(matches!(
            i3.frob_inner(&SymTensor::identity(2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn frob_matches_full_matrix_sum() {
        let a = SymTensor::from_components(3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = SymTensor::from_components(3, &[-1.0, 0.5, 2.0, 1.5, -2.0, 0.25]).unwrap();
        let mut full = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                full += a.get(i, j) * b.get(i, j);
            }
        }
        assert!((a.ddot(&b) - full).abs() < 1e-14);
    }

    #[test]
    fn apply_c_identity_2d() {
        let e = ElasticityTensor::new(1.0, 1.0).unwrap();
        assert_eq!(e.apply_c(&SymTensor::identity(2)), SymTensor::identity(2) * 4.0);
    }

    #[test]
    fn apply_c_preserves_deviators() {
        let e = ElasticityTensor::new(0.7, 1.3).unwrap();
        let t = SymTensor::from_components(3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert!(e.apply_c(&t.deviator()).trace().abs() < 1e-14);
    }

    #[test]
    fn invalid_lame() {
        assert!(ElasticityTensor::new(-1.0, 1.0).is_err());
        assert!(ElasticityTensor::new(1.0, 0.0).is_err());
    }

    #[test]
    fn constants_1d() {
        let e = ElasticityTensor::uniaxial(1.0).unwrap();
        let s = SymTensor::diag(&[2.5]);
        assert_eq!(e.apply_c(&s), s);
        assert_eq!(e.gamma_c(1), 1.0);
        assert_eq!(e.gamma_a(1), 1.0);
    }
}
