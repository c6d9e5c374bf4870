//! Von Mises yield set, its projection, and the Yosida regularization of the
//! indicator function.
//!
//! For `dim >= 2` the yield set constrains the deviator only:
//! `K = { t : |t^D|_F <= sigma_y }`, and the spherical part is left untouched.
//! In one dimension the deviator of a scalar vanishes, so the set acts on the
//! scalar itself and reduces to the interval `[-sigma_y, sigma_y]`.
//!
//! The Huber-smoothed derivative replaces the radial magnitude
//! `m(r) = (r - sigma_y)_+ / lambda` by the C^1 blend
//!
//! ```text
//! m_eps(r) = 0                                    r <= sigma_y - eps
//!          = (r - sigma_y + eps)^2 / (4 eps lambda)  |r - sigma_y| < eps
//!          = (r - sigma_y) / lambda               r >= sigma_y + eps
//! ```
//!
//! applied along the direction `t^D / |t^D|_F`.

use crate::error::{Error, Result};
use crate::tensor::SymTensor;

/// Part of `t` seen by the yield condition.
#[inline]
pub fn yield_part(t: &SymTensor) -> SymTensor {
    if t.dim() == 1 {
        *t
    } else {
        t.deviator()
    }
}

/// Rewrites the last diagonal entry of a deviatoric tensor so that its trace
/// sums to exactly zero in floating point.
fn close_trace(mut t: SymTensor) -> SymTensor {
    let n = t.dim();
    if n > 1 {
        let rest: f64 = t.components()[..n - 1].iter().sum();
        t.set(n - 1, n - 1, -rest);
    }
    t
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct YieldSet {
    pub sigma_y: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegularizationParams {
    /// Yosida parameter; zero selects the unregularized indicator.
    pub lambda: f64,
    /// Width of the Huber blend; zero disables smoothing.
    pub huber_eps: f64,
}

impl RegularizationParams {
    pub fn new(lambda: f64, huber_eps: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
        }
        if !(huber_eps >= 0.0 && huber_eps.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "huber_eps must be >= 0, got {huber_eps}"
            )));
        }
        Ok(RegularizationParams { lambda, huber_eps })
    }

    fn require_positive_lambda(&self) -> Result<()> {
        if self.lambda > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "Yosida regularization needs lambda > 0, got {}",
                self.lambda
            )))
        }
    }
}

impl YieldSet {
    pub fn new(sigma_y: f64) -> Result<Self> {
        if !(sigma_y > 0.0 && sigma_y.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma_y must be > 0, got {sigma_y}")));
        }
        Ok(YieldSet { sigma_y })
    }

    /// Radii `(rho, R)` of the inner and outer balls; both equal `sigma_y`.
    pub fn ball_radii(&self) -> (f64, f64) {
        (self.sigma_y, self.sigma_y)
    }

    pub fn contains(&self, t: &SymTensor) -> bool {
        yield_part(t).norm() <= self.sigma_y
    }

    /// `t - pi_K(t)`: the radial excess of the deviator beyond the yield radius.
    pub fn excess(&self, t: &SymTensor) -> SymTensor {
        let d = yield_part(t);
        let r = d.norm();
        if r <= self.sigma_y {
            SymTensor::zeros(t.dim())
        } else {
            d * ((r - self.sigma_y) / r)
        }
    }

    pub fn project_k(&self, t: &SymTensor) -> SymTensor {
        let d = yield_part(t);
        let r = d.norm();
        if r <= self.sigma_y {
            *t
        } else {
            *t - d * ((r - self.sigma_y) / r)
        }
    }

    /// `I_lambda(t) = |t - pi_K(t)|^2 / (2 lambda)`.
    pub fn yosida_value(&self, rp: &RegularizationParams, t: &SymTensor) -> Result<f64> {
        rp.require_positive_lambda()?;
        let e = self.excess(t);
        Ok(e.ddot(&e) / (2.0 * rp.lambda))
    }

    /// `dI_lambda(t) = (t - pi_K(t)) / lambda`.
    pub fn yosida_deriv(&self, rp: &RegularizationParams, t: &SymTensor) -> Result<SymTensor> {
        rp.require_positive_lambda()?;
        Ok(close_trace(self.excess(t) * (1.0 / rp.lambda)))
    }

    fn smoothing_width(&self, rp: &RegularizationParams) -> Result<f64> {
        rp.require_positive_lambda()?;
        let eps = rp.huber_eps;
        if !(eps > 0.0 && eps < self.sigma_y) {
            return Err(Error::InvalidParameter(format!(
                "huber_eps must lie in (0, sigma_y), got {eps}"
            )));
        }
        Ok(eps)
    }

    /// Radial magnitude of the smoothed derivative and its slope.
    fn smoothed_magnitude(&self, r: f64, lambda: f64, eps: f64) -> (f64, f64) {
        let s = r - self.sigma_y;
        if s <= -eps {
            (0.0, 0.0)
        } else if s >= eps {
            (s / lambda, 1.0 / lambda)
        } else {
            let q = s + eps;
            (q * q / (4.0 * eps * lambda), q / (2.0 * eps * lambda))
        }
    }

    pub fn yosida_deriv_smoothed(
        &self,
        rp: &RegularizationParams,
        t: &SymTensor,
    ) -> Result<SymTensor> {
        let eps = self.smoothing_width(rp)?;
        let d = yield_part(t);
        let r = d.norm();
        let (m, _) = self.smoothed_magnitude(r, rp.lambda, eps);
        if m == 0.0 {
            return Ok(SymTensor::zeros(t.dim()));
        }
        Ok(close_trace(d * (m / r)))
    }

    /// Directional derivative of [`yosida_deriv_smoothed`](Self::yosida_deriv_smoothed)
    /// at `t` along `h`. The Jacobian is self-adjoint for the Frobenius product,
    /// so this also applies its transpose.
    pub fn yosida_deriv_smoothed_jvp(
        &self,
        rp: &RegularizationParams,
        t: &SymTensor,
        h: &SymTensor,
    ) -> Result<SymTensor> {
        let eps = self.smoothing_width(rp)?;
        let d = yield_part(t);
        let r = d.norm();
        let (m, dm) = self.smoothed_magnitude(r, rp.lambda, eps);
        if m == 0.0 && dm == 0.0 {
            return Ok(SymTensor::zeros(t.dim()));
        }
        let n = d * (1.0 / r);
        let ph = yield_part(h);
        let nh = n.ddot(&ph);
        // dm n (n:h) + m/r (P h - n (n:h))
        Ok(close_trace(n * (dm * nh) + (ph - n * nh) * (m / r)))
    }

    /// Flow-rule derivative used by the solvers: exact or smoothed.
    pub fn flow_direction(
        &self,
        rp: &RegularizationParams,
        t: &SymTensor,
        smoothed: bool,
    ) -> Result<SymTensor> {
        if smoothed {
            self.yosida_deriv_smoothed(rp, t)
        } else {
            self.yosida_deriv(rp, t)
        }
    }

    /// Closed-form implicit update for a radial relaxation.
    ///
    /// Solves `s = trial - k * dI_lambda(s)` for `s`, where `k = dt * c` with
    /// `c` the stiffness on the yield subspace. For `lambda = 0` this is the
    /// classical radial return onto `K`.
    pub fn radial_return(&self, trial: &SymTensor, k: f64, lambda: f64) -> SymTensor {
        let d = yield_part(trial);
        let r = d.norm();
        if r <= self.sigma_y {
            return *trial;
        }
        let r_new = if lambda > 0.0 {
            self.sigma_y + (r - self.sigma_y) / (1.0 + k / lambda)
        } else {
            self.sigma_y
        };
        *trial - d * ((r - r_new) / r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rp(lambda: f64) -> RegularizationParams {
        RegularizationParams::new(lambda, 0.0).unwrap()
    }

    #[test]
    fn projection_examples() {
        let ys = YieldSet::new(1.0).unwrap();
        let inside = SymTensor::from_components(2, &[0.3, -0.2, 0.1]).unwrap();
        assert_eq!(ys.project_k(&inside), inside);
        assert_eq!(ys.project_k(&SymTensor::diag(&[1.5])), SymTensor::diag(&[1.0]));
        assert_eq!(ys.project_k(&SymTensor::diag(&[-2.0])), SymTensor::diag(&[-1.0]));
        let sph = SymTensor::identity(3) * 17.0;
        assert_eq!(ys.project_k(&sph), sph);
    }

    #[test]
    fn projection_preserves_spherical_part() {
        let ys = YieldSet::new(0.5).unwrap();
        let t = SymTensor::from_components(3, &[3.0, -1.0, 0.4, 2.0, -0.7, 1.1]).unwrap();
        let p = ys.project_k(&t);
        assert!((p.trace() - t.trace()).abs() < 1e-14);
        assert!((yield_part(&p).norm() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn yosida_value_examples() {
        let ys = YieldSet::new(1.0).unwrap();
        let t = SymTensor::diag(&[1.5]);
        assert!((ys.yosida_value(&rp(0.1), &t).unwrap() - 1.25).abs() < 1e-14);
        assert_eq!(ys.yosida_value(&rp(0.1), &SymTensor::diag(&[0.5])).unwrap(), 0.0);
        let v1 = ys.yosida_value(&rp(0.2), &t).unwrap();
        let v2 = ys.yosida_value(&rp(0.4), &t).unwrap();
        assert!((v1 - 2.0 * v2).abs() < 1e-14);
    }

    #[test]
    fn derivative_trace_is_exactly_zero() {
        let ys = YieldSet::new(1.0).unwrap();
        let t = SymTensor::from_components(3, &[7.3, -0.1, 2.9, 4.4, -3.3, 0.7]).unwrap();
        assert_eq!(ys.yosida_deriv(&rp(1e-4), &t).unwrap().trace(), 0.0);
        assert_eq!(ys.yosida_deriv_smoothed(&RegularizationParams::new(1e-4, 0.1).unwrap(), &t).unwrap().trace(), 0.0);
    }

    #[test]
    fn yosida_deriv_examples() {
        let ys = YieldSet::new(1.0).unwrap();
        let d = ys.yosida_deriv(&rp(0.1), &SymTensor::diag(&[1.5])).unwrap();
        assert!((d.get(0, 0) - 5.0).abs() < 1e-13);
        let zero = ys.yosida_deriv(&rp(0.1), &SymTensor::diag(&[0.2, -0.1])).unwrap();
        assert_eq!(zero, SymTensor::zeros(2));

        let t = SymTensor::from_components(2, &[2.0, -1.0, 0.5]).unwrap();
        let d = ys.yosida_deriv(&rp(0.25), &t).unwrap();
        let expect = (t.deviator().norm() - 1.0) / 0.25;
        assert!((d.norm() - expect).abs() < 1e-13);
    }

    #[test]
    fn lambda_must_be_positive() {
        let ys = YieldSet::new(1.0).unwrap();
        let t = SymTensor::diag(&[2.0]);
        assert!(ys.yosida_value(&rp(0.0), &t).is_err());
        assert!(ys.yosida_deriv(&rp(0.0), &t).is_err());
        assert!(RegularizationParams::new(-1.0, 0.0).is_err());
    }

    #[test]
    fn smoothed_needs_width() {
        let ys = YieldSet::new(1.0).unwrap();
        let t = SymTensor::diag(&[2.0]);
        assert!(ys.yosida_deriv_smoothed(&rp(0.1), &t).is_err());
        let bad = RegularizationParams::new(0.1, 1.5).unwrap();
        assert!(ys.yosida_deriv_smoothed(&bad, &t).is_err());
    }

    #[test]
    fn smoothed_regions() {
        let ys = YieldSet::new(1.0).unwrap();
        let p = RegularizationParams::new(0.1, 0.05).unwrap();
        // deep inside
        let inside = SymTensor::from_components(2, &[0.3, -0.3, 0.0]).unwrap();
        assert_eq!(ys.yosida_deriv_smoothed(&p, &inside).unwrap(), SymTensor::zeros(2));
        // far outside: |t^D| = sigma_y + 10 eps
        let dir = SymTensor::from_components(2, &[1.0, -1.0, 0.5]).unwrap();
        let dir = dir * (1.0 / dir.norm());
        let t = dir * (1.0 + 10.0 * 0.05) + SymTensor::identity(2) * 3.0;
        let a = ys.yosida_deriv_smoothed(&p, &t).unwrap();
        let b = ys.yosida_deriv(&p, &t).unwrap();
        assert!((a - b).norm() <= 1e-14);
    }

    #[test]
    fn smoothed_magnitude_is_c1() {
        let ys = YieldSet::new(1.0).unwrap();
        let (lam, eps) = (0.3, 0.1);
        for r in [1.0 - eps, 1.0 + eps] {
            let (m_lo, d_lo) = ys.smoothed_magnitude(r - 1e-12, lam, eps);
            let (m_hi, d_hi) = ys.smoothed_magnitude(r + 1e-12, lam, eps);
            assert!((m_lo - m_hi).abs() < 1e-10);
            assert!((d_lo - d_hi).abs() < 1e-9);
        }
    }

    #[test]
    fn jvp_matches_finite_differences() {
        let ys = YieldSet::new(1.0).unwrap();
        let p = RegularizationParams::new(0.2, 0.1).unwrap();
        let h = SymTensor::from_components(3, &[0.3, -0.1, 0.2, 0.05, -0.4, 0.7]).unwrap();
        for scale in [0.95, 1.02, 1.5] {
            let base = SymTensor::from_components(3, &[1.0, -0.5, 0.2, 0.3, 0.1, -0.2]).unwrap();
            let t = yield_part(&base) * (scale / yield_part(&base).norm())
                + SymTensor::identity(3) * 0.4;
            let step = 1e-6;
            let fd = (ys.yosida_deriv_smoothed(&p, &(t + h * step)).unwrap()
                - ys.yosida_deriv_smoothed(&p, &(t - h * step)).unwrap())
                * (0.5 / step);
            let jv = ys.yosida_deriv_smoothed_jvp(&p, &t, &h).unwrap();
            assert!((fd - jv).norm() < 1e-7 * (1.0 + jv.norm()), "scale {scale}");
        }
    }

    #[test]
    fn radial_return_matches_implicit_equation() {
        let ys = YieldSet::new(1.0).unwrap();
        let trial = SymTensor::from_components(2, &[2.0, -1.0, 0.8]).unwrap();
        let (k, lam) = (0.3, 0.05);
        let s = ys.radial_return(&trial, k, lam);
        let resid = s + ys.yosida_deriv(&rp(lam), &s).unwrap() * k - trial;
        assert!(resid.norm() < 1e-13);
        let s0 = ys.radial_return(&trial, k, 0.0);
        assert!((yield_part(&s0).norm() - 1.0).abs() < 1e-14);
    }
}
