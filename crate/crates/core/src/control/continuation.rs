use super::objective::ObjectiveParts;
use super::{eval_gradient, minimize, ControlParam, ControlProblem, IterationRecord, LbfgsOptions, OptStatus};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct OptReport {
    pub lambda: f64,
    pub history: Vec<IterationRecord>,
    pub status: OptStatus,
    pub control: ControlParam,
    pub objective: f64,
    pub parts: ObjectiveParts,
    /// `||l||_{L2(H^-1)}` at the final control.
    pub load_norm: f64,
    /// Discrete `||dsigma/dt||_{L2(L2)}` at the final control.
    pub sigma_rate: f64,
    pub r_monitor: f64,
    pub r_monitor_ok: bool,
    /// Euclidean distance of the free coefficients to the previous solution
    /// in a continuation run (zero otherwise).
    pub drift: f64,
    /// Set when this run failed; the remaining fields then describe the start point.
    pub error: Option<String>,
}

/// Minimizes the regularized objective from `cp0` with L-BFGS.
pub fn optimize(problem: &ControlProblem, cp0: &ControlParam, opts: &LbfgsOptions) -> Result<OptReport> {
    problem.check_control(cp0)?;
    let x0 = problem.pack(cp0);
    let res = minimize(
        |x| {
            let cp = problem.unpack(x)?;
            let (eval, g) = eval_gradient(problem, &cp)?;
            Ok((eval.value, problem.pack(&g)))
        },
        x0,
        opts,
    )?;
    let control = problem.unpack(&res.x)?;
    let eval = super::eval_objective(problem, &control)?;
    Ok(OptReport {
        lambda: problem.spec.rp.lambda,
        history: res.history,
        status: res.status,
        control,
        objective: eval.value,
        parts: eval.parts,
        load_norm: eval.load_norm,
        sigma_rate: eval.trajectory.diagnostics.sigma_rate_l2l2,
        r_monitor: eval.r_monitor,
        r_monitor_ok: eval.r_monitor_ok,
        drift: 0.0,
        error: None,
    })
}

/// Solves the regularized problem for each `lambda` in a strictly
/// decreasing sequence, warm-starting from the previous solution.
///
/// A failing `lambda` is recorded with its error and skipped; the next one
/// starts from the last successful control.
pub fn lambda_continuation(
    base: &ControlProblem,
    cp0: &ControlParam,
    lambdas: &[f64],
    opts: &LbfgsOptions,
) -> Result<Vec<OptReport>> {
    if lambdas.is_empty() || lambdas.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidParameter("lambda sequence must be non-empty and positive".into()));
    }
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter("lambda sequence must be strictly decreasing".into()));
    }
    let mut warm = cp0.clone();
    let mut reports = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let problem = base.with_lambda(lambda)?;
        match optimize(&problem, &warm, opts) {
            Ok(mut rep) => {
                let a = problem.pack(&warm);
                let b = problem.pack(&rep.control);
                rep.drift = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                log::info!(
                    "lambda = {lambda:e}: J = {:.6e}, |l| = {:.3e}, status {}",
                    rep.objective,
                    rep.load_norm,
                    rep.status
                );
                warm = rep.control.clone();
                reports.push(rep);
            }
            Err(e) => {
                log::warn!("lambda = {lambda:e} failed: {e}");
                reports.push(OptReport {
                    lambda,
                    history: Vec::new(),
                    status: OptStatus::LineSearchFailed,
                    control: warm.clone(),
                    objective: f64::NAN,
                    parts: ObjectiveParts::default(),
                    load_norm: f64::NAN,
                    sigma_rate: f64::NAN,
                    r_monitor: f64::NAN,
                    r_monitor_ok: false,
                    drift: 0.0,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    Ok(reports)
}
