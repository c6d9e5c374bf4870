//! Closed-form 1D benchmark: a bar on (0, 1) clamped at both ends, stretched by
//! `u_D(t, x) = 2 t x` with `C = 1`, `K = [-1, 1]` and zero initial data.
//!
//! The stress is unique, `sigma(t) = min(2t, 1)`, while the displacement is
//! not once the bar yields at `t = 1/2`.

use crate::error::{Error, Result};
use crate::mesh::{DirichletRule, FieldP0, FieldP1, LoadVector, Mesh, Side};
use crate::solver::{c_l2_gap, evolve_flow_rule, PlasticityModel, Scheme, TimeGrid};
use crate::tensor::{ElasticityTensor, SymTensor};
use crate::yield_set::{RegularizationParams, YieldSet};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OneDScenario;

impl OneDScenario {
    pub const T_END: f64 = 1.0;
    pub const SIGMA_Y: f64 = 1.0;
    pub const MODULUS: f64 = 1.0;
    pub const LOAD_RATE: f64 = 2.0;

    pub fn mesh(&self, cells: usize) -> Result<Mesh> {
        Mesh::interval(cells, &DirichletRule::new(&[Side::Left, Side::Right]))
    }

    pub fn elasticity(&self) -> ElasticityTensor {
        ElasticityTensor::uniaxial(Self::MODULUS).expect("positive modulus")
    }

    pub fn yield_set(&self) -> YieldSet {
        YieldSet::new(Self::SIGMA_Y).expect("positive yield stress")
    }

    pub fn model(&self, cells: usize) -> Result<PlasticityModel> {
        PlasticityModel::new(&self.mesh(cells)?, self.elasticity(), self.yield_set())
    }

    pub fn grid(&self, steps: usize) -> Result<TimeGrid> {
        TimeGrid::new(Self::T_END, steps)
    }

    pub fn dirichlet(&self, mesh: &Mesh, t: f64) -> FieldP1 {
        FieldP1::interpolate(mesh, |x| [Self::LOAD_RATE * t * x[0], 0.0])
    }

    /// Dirichlet data and (zero) loads at every node of `grid`.
    pub fn paths(&self, mesh: &Mesh, grid: &TimeGrid) -> (Vec<FieldP1>, Vec<LoadVector>) {
        let ud = grid.times().iter().map(|&t| self.dirichlet(mesh, t)).collect();
        (ud, vec![LoadVector::zeros(mesh); grid.steps + 1])
    }
}

pub fn exact_stress(t: f64) -> Result<f64> {
    if !(0.0..=OneDScenario::T_END).contains(&t) {
        return Err(Error::InvalidParameter(format!("time {t} outside [0, 1]")));
    }
    Ok((OneDScenario::LOAD_RATE * t).min(OneDScenario::SIGMA_Y))
}

/// The three displacement fields compatible with the exact stress.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DisplacementVariant {
    Linear,
    /// Slip spread over `[0, beta]`, rigid on `[beta, 1]`.
    TwoPhase { beta: f64 },
    /// Frozen on `[0, beta]`, a jump at `beta` and slip at `x = 1`.
    Frozen { alpha: f64, beta: f64 },
}

impl DisplacementVariant {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        match *self {
            DisplacementVariant::Linear => Ok(()),
            DisplacementVariant::TwoPhase { beta } => {
                if beta > 0.0 && beta <= 1.0 {
                    Ok(())
                } else {
                    bad("two-phase variant needs beta in (0, 1]")
                }
            }
            DisplacementVariant::Frozen { alpha, beta } => {
                if !(0.0..=2.0).contains(&alpha) {
                    bad("frozen variant needs alpha in [0, 2]")
                } else if !(0.0..=1.0).contains(&beta) {
                    bad("frozen variant needs beta in [0, 1]")
                } else {
                    Ok(())
                }
            }
        }
    }

    fn interface(&self) -> Option<f64> {
        match *self {
            DisplacementVariant::Linear => None,
            DisplacementVariant::TwoPhase { beta } | DisplacementVariant::Frozen { beta, .. } => Some(beta),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            DisplacementVariant::Linear => "linear".into(),
            DisplacementVariant::TwoPhase { beta } => format!("two-phase(beta={beta})"),
            DisplacementVariant::Frozen { alpha, beta } => format!("frozen(alpha={alpha},beta={beta})"),
        }
    }
}

fn check_point(t: f64, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) || !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!("point ({t}, {x}) outside [0, 1]^2")));
    }
    Ok(())
}

pub fn displacement_family(variant: DisplacementVariant, t: f64, x: f64) -> Result<f64> {
    variant.validate()?;
    check_point(t, x)?;
    if t <= 0.5 {
        return Ok(2.0 * t * x);
    }
    Ok(match variant {
        DisplacementVariant::Linear => 2.0 * t * x,
        DisplacementVariant::TwoPhase { beta } => {
            if x <= beta {
                2.0 * t * x / beta + x - x / beta
            } else {
                2.0 * t + x - 1.0
            }
        }
        DisplacementVariant::Frozen { alpha, beta } => {
            if x <= beta {
                x
            } else {
                alpha * t + x - 0.5 * alpha
            }
        }
    })
}

/// Piecewise analytic time derivative of [`displacement_family`]; at
/// `t = 1/2` the right derivative is returned.
pub fn displacement_rate(variant: DisplacementVariant, t: f64, x: f64) -> Result<f64> {
    variant.validate()?;
    check_point(t, x)?;
    if t < 0.5 {
        return Ok(2.0 * x);
    }
    Ok(match variant {
        DisplacementVariant::Linear => 2.0 * x,
        DisplacementVariant::TwoPhase { beta } => {
            if x <= beta {
                2.0 * x / beta
            } else {
                2.0
            }
        }
        DisplacementVariant::Frozen { alpha, beta } => {
            if x <= beta {
                0.0
            } else {
                alpha
            }
        }
    })
}

/// Largest violation of each condition of the weak formulation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WeakSolutionReport {
    /// Spatial variation of the stress.
    pub equilibrium: f64,
    /// `max(|sigma| - 1, 0)`.
    pub admissibility: f64,
    /// Distance of `du/dt_x - dsigma/dt` from the normal cone at `sigma`.
    pub flow_rule: f64,
    /// Same for the jump of `du/dt` across the interface.
    pub jump: f64,
    /// Same for the boundary slip `(du_D/dt - du/dt) nu`.
    pub boundary_slip: f64,
    /// Points skipped by the exclusion window around the interface.
    pub excluded: usize,
}

impl WeakSolutionReport {
    pub fn max_violation(&self) -> f64 {
        self.equilibrium
            .max(self.admissibility)
            .max(self.flow_rule)
            .max(self.jump)
            .max(self.boundary_slip)
    }
}

/// Distance of a scalar plastic rate from the normal cone of `[-1, 1]` at `sigma`.
fn cone_violation(sigma: f64, rate: f64) -> f64 {
    let tol = 1e-12;
    if sigma >= OneDScenario::SIGMA_Y - tol {
        (-rate).max(0.0)
    } else if sigma <= -OneDScenario::SIGMA_Y + tol {
        rate.max(0.0)
    } else {
        rate.abs()
    }
}

/// Checks the variant against the exact stress on a `resolution x resolution` grid.
pub fn verify_weak_solution(variant: DisplacementVariant, resolution: usize) -> Result<WeakSolutionReport> {
    verify_with_stress(variant, resolution, |t, _x| {
        let s = exact_stress(t).expect("t in range");
        let ds = if t < 0.5 { OneDScenario::LOAD_RATE } else { 0.0 };
        (s, ds)
    })
}

/// As [`verify_weak_solution`] with a user-supplied stress history
/// `(t, x) -> (sigma, dsigma/dt)`.
pub fn verify_with_stress<F>(variant: DisplacementVariant, resolution: usize, stress: F) -> Result<WeakSolutionReport>
where
    F: Fn(f64, f64) -> (f64, f64),
{
    variant.validate()?;
    if resolution < 4 {
        return Err(Error::InvalidParameter("resolution must be at least 4".into()));
    }
    let h = 1.0 / resolution as f64;
    let rate = |t: f64, x: f64| displacement_rate(variant, t, x.clamp(0.0, 1.0));
    let mut rep = WeakSolutionReport::default();
    for i in 0..resolution {
        // midpoints in time avoid the kink at t = 1/2
        let t = (i as f64 + 0.5) * h;
        let (sigma, _) = stress(t, 0.0);
        for j in 0..resolution {
            let x = (j as f64 + 0.5) * h;
            let (sigma_x, dsigma) = stress(t, x);
            rep.equilibrium = rep.equilibrium.max((sigma_x - sigma).abs());
            rep.admissibility = rep.admissibility.max(sigma_x.abs() - OneDScenario::SIGMA_Y);
            if let Some(beta) = variant.interface() {
                if (x - beta).abs() < h {
                    rep.excluded += 1;
                    continue;
                }
            }
            let grad = (rate(t, x + 0.5 * h)? - rate(t, x - 0.5 * h)?) / h;
            rep.flow_rule = rep.flow_rule.max(cone_violation(sigma_x, grad - dsigma / OneDScenario::MODULUS));
        }
        if let Some(beta) = variant.interface() {
            if beta > 0.0 && beta < 1.0 {
                let d = 0.25 * h;
                let right = 2.0 * rate(t, beta + d)? - rate(t, beta + 2.0 * d)?;
                let left = 2.0 * rate(t, beta - d)? - rate(t, beta - 2.0 * d)?;
                rep.jump = rep.jump.max(cone_violation(sigma, right - left));
            }
        }
        let ud_rate = |x: f64| OneDScenario::LOAD_RATE * x;
        for (x, normal) in [(0.0, -1.0), (1.0, 1.0)] {
            let slip = (ud_rate(x) - rate(t, x)?) * normal;
            rep.boundary_slip = rep.boundary_slip.max(cone_violation(sigma, slip));
        }
    }
    Ok(rep)
}

/// One row of the Yosida rate study.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateRow {
    pub lambda: f64,
    /// `max_k ||sigma_lambda(t_k) - sigma_0(t_k)||_{L2}`.
    pub gap: f64,
    /// `(lambda ||C||^2 / gamma_C)^{1/2} ||w - A dsigma_0/dt||_{L2(L2)}`.
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateStudy {
    pub rows: Vec<RateRow>,
    /// Least-squares slope of `log gap` against `log sqrt(lambda)`.
    pub order: f64,
    /// `||w - A dsigma_0/dt||_{L2(L2)}` of the limit solution.
    pub residual_norm: f64,
}

/// Slope of the least-squares line through `(log x, log y)`.
pub fn fit_log_log(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Distance between the regularized and the projected flow rule of the bar,
/// driven by the constant strain rate `w = 2`, for each `lambda`.
pub fn yosida_rate_study(lambdas: &[f64], steps: usize, scheme: Scheme) -> Result<RateStudy> {
    if lambdas.len() < 2 || lambdas.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidParameter("need at least two positive lambdas".into()));
    }
    let sc = OneDScenario;
    let el = sc.elasticity();
    let ys = sc.yield_set();
    let grid = sc.grid(steps)?;
    let dt = grid.dt();
    let w = vec![
        FieldP0 {
            data: vec![SymTensor::diag(&[OneDScenario::LOAD_RATE])]
        };
        steps + 1
    ];
    let s0 = FieldP0 {
        data: vec![SymTensor::zeros(1)],
    };
    let limit = evolve_flow_rule(&el, &ys, &RegularizationParams::new(0.0, 0.0)?, Scheme::Implicit, &grid, &w, &s0)?;
    // difference quotients are exact for the piecewise linear limit when t = 1/2 is a node
    let residual_sq: f64 = (1..=steps)
        .map(|k| {
            let rate = (limit[k].data[0] - limit[k - 1].data[0]) * (1.0 / dt);
            let r = w[k].data[0] - el.apply_a(&rate);
            dt * r.ddot(&r)
        })
        .sum();
    let residual_norm = residual_sq.sqrt();
    let factor = el.norm_c(1).powi(2) / el.gamma_c(1);
    let measures = [1.0];
    let rows = lambdas
        .iter()
        .map(|&lambda| {
            let rp = RegularizationParams::new(lambda, 0.0)?;
            let sol = evolve_flow_rule(&el, &ys, &rp, scheme, &grid, &w, &s0)?;
            Ok(RateRow {
                lambda,
                gap: c_l2_gap(&measures, &sol, &limit),
                bound: (lambda * factor).sqrt() * residual_norm,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sq: Vec<f64> = rows.iter().map(|r| r.lambda.sqrt()).collect();
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    Ok(RateStudy {
        order: fit_log_log(&sq, &gaps),
        rows,
        residual_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_stress_values() {
        assert_eq!(exact_stress(0.25).unwrap(), 0.5);
        assert_eq!(exact_stress(0.75).unwrap(), 1.0);
        assert_eq!(exact_stress(0.0).unwrap(), 0.0);
        assert!(exact_stress(1.5).is_err());
        assert!(exact_stress(-0.1).is_err());
    }

    #[test]
    fn family_values() {
        assert_eq!(displacement_family(DisplacementVariant::Linear, 0.75, 0.5).unwrap(), 0.75);
        let tp = DisplacementVariant::TwoPhase { beta: 0.5 };
        assert!((displacement_family(tp, 0.75, 1.0).unwrap() - 1.5).abs() < 1e-15);
        let fr = DisplacementVariant::Frozen { alpha: 0.0, beta: 0.5 };
        assert_eq!(displacement_family(fr, 0.9, 0.25).unwrap(), 0.25);
        assert!(displacement_family(DisplacementVariant::Frozen { alpha: 3.0, beta: 0.5 }, 0.6, 0.1).is_err());
        assert!(displacement_family(DisplacementVariant::TwoPhase { beta: 0.0 }, 0.6, 0.1).is_err());
        assert!(displacement_family(DisplacementVariant::Linear, 0.6, 1.1).is_err());
    }

    #[test]
    fn variants_continuous_at_half_and_match_boundary() {
        for v in [
            DisplacementVariant::Linear,
            DisplacementVariant::TwoPhase { beta: 0.3 },
            DisplacementVariant::Frozen { alpha: 1.0, beta: 0.6 },
        ] {
            for k in 0..=10 {
                let x = k as f64 / 10.0;
                let a = displacement_family(v, 0.5, x).unwrap();
                let b = displacement_family(v, 0.5 + 1e-12, x).unwrap();
                assert!((a - b).abs() < 1e-10, "{v:?} at x={x}");
            }
            assert_eq!(displacement_family(v, 0.8, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn weak_solutions_verified() {
        let lin = verify_weak_solution(DisplacementVariant::Linear, 200).unwrap();
        assert!(lin.max_violation() <= 1e-12, "{lin:?}");
        let fr = verify_weak_solution(DisplacementVariant::Frozen { alpha: 0.0, beta: 0.5 }, 200).unwrap();
        assert!(fr.max_violation() <= 1e-10, "{fr:?}");
        assert!(fr.excluded > 0);
        let tp = verify_weak_solution(DisplacementVariant::TwoPhase { beta: 0.4 }, 200).unwrap();
        assert!(tp.max_violation() <= 1e-10, "{tp:?}");
    }

    #[test]
    fn corrupted_stress_flagged() {
        let rep = verify_with_stress(DisplacementVariant::Linear, 100, |t, _| {
            if t < 0.5 {
                (2.0 * t, 2.0)
            } else {
                (1.1, 0.0)
            }
        })
        .unwrap();
        assert!((rep.admissibility - 0.1).abs() < 1e-12);
    }

    #[test]
    fn wrong_displacement_flagged() {
        // a displacement that keeps stretching elastically violates the flow rule
        let rep = verify_with_stress(DisplacementVariant::Frozen { alpha: 2.0, beta: 1.0 }, 100, |t, _| {
            (exact_stress(t).unwrap(), if t < 0.5 { 2.0 } else { 0.0 })
        })
        .unwrap();
        assert!(rep.max_violation() <= 1e-12);
        let rep = verify_with_stress(DisplacementVariant::Linear, 100, |t, _| (0.5 * t, 0.5)).unwrap();
        assert!(rep.flow_rule > 1.0);
        let rep = verify_with_stress(DisplacementVariant::Linear, 100, |t, x| (2.0 * t * x, 2.0 * x)).unwrap();
        assert!(rep.equilibrium > 0.5);
    }

    #[test]
    fn rate_study_respects_bound() {
        let rs = yosida_rate_study(&[1e-1, 1e-2, 1e-3, 1e-4, 1e-5], 2000, Scheme::Implicit).unwrap();
        assert!((rs.residual_norm - 2f64.sqrt()).abs() < 1e-12);
        for r in &rs.rows {
            assert!(r.gap <= r.bound, "{r:?}");
        }
        assert!(rs.order >= 0.45, "order {}", rs.order);
    }

    #[test]
    fn log_log_slope() {
        let x = [1.0, 2.0, 4.0];
        let y = [3.0, 12.0, 48.0];
        assert!((fit_log_log(&x, &y) - 2.0).abs() < 1e-12);
    }
}
