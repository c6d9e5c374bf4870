use std::collections::VecDeque;

use crate::error::Result;
use crate::linalg::{dot, norm};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LbfgsOptions {
    pub max_iter: usize,
    /// Stop once `||g|| <= grad_tol`.
    pub grad_tol: f64,
    pub memory: usize,
    /// Armijo sufficient-decrease constant.
    pub c1: f64,
    pub max_backtracks: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            max_iter: 100,
            grad_tol: 1e-8,
            memory: 10,
            c1: 1e-4,
            max_backtracks: 40,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptStatus {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

impl std::fmt::Display for OptStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            OptStatus::Converged => "converged",
            OptStatus::MaxIterations => "max-iterations",
            OptStatus::LineSearchFailed => "line-search-failed",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub grad_norm: f64,
    /// Step halvings in the line search that produced this iterate.
    pub backtracks: usize,
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub history: Vec<IterationRecord>,
    pub status: OptStatus,
}

/// Two-loop recursion: `-H g` for the stored pairs.
fn direction(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Limited-memory BFGS with backtracking Armijo line search (halving).
///
/// Evaluation errors and non-finite values during the line search count as
/// failed trials. Accepted iterates strictly decrease `f`.
pub fn minimize<F>(mut fg: F, x0: Vec<f64>, opts: &LbfgsOptions) -> Result<LbfgsResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut x = x0;
    let (mut f, mut g) = fg(&x)?;
    let mut history = vec![IterationRecord {
        iteration: 0,
        objective: f,
        grad_norm: norm(&g),
        backtracks: 0,
        step: 0.0,
    }];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    for iter in 1..=opts.max_iter {
        let gnorm = norm(&g);
        if gnorm <= opts.grad_tol {
            return Ok(LbfgsResult {
                x,
                f,
                grad: g,
                history,
                status: OptStatus::Converged,
            });
        }
        let mut accepted = None;
        loop {
            let mut d = direction(&g, &pairs);
            let mut slope = dot(&g, &d);
            if pairs.is_empty() || !(slope < 0.0) {
                pairs.clear();
                let scale = if history.len() == 1 { 1.0 / gnorm } else { 1.0 };
                d = g.iter().map(|v| -v * scale).collect();
                slope = dot(&g, &d);
            }
            let mut t = 1.0;
            for bt in 0..=opts.max_backtracks {
                let xt: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                if let Ok((ft, gt)) = fg(&xt) {
                    if ft.is_finite() && ft < f && ft <= f + opts.c1 * t * slope {
                        accepted = Some((xt, ft, gt, bt, t));
                        break;
                    }
                }
                t *= 0.5;
            }
            if accepted.is_some() || pairs.is_empty() {
                break;
            }
            pairs.clear();
        }
        let Some((xn, fnew, gn, bt, t)) = accepted else {
            return Ok(LbfgsResult {
                x,
                f,
                grad: g,
                history,
                status: OptStatus::LineSearchFailed,
            });
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        f = fnew;
        g = gn;
        history.push(IterationRecord {
            iteration: iter,
            objective: f,
            grad_norm: norm(&g),
            backtracks: bt,
            step: t,
        });
    }
    let status = if norm(&g) <= opts.grad_tol {
        OptStatus::Converged
    } else {
        OptStatus::MaxIterations
    };
    Ok(LbfgsResult {
        x,
        f,
        grad: g,
        history,
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let fg = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            Ok((f, g))
        };
        let opts = LbfgsOptions {
            max_iter: 200,
            grad_tol: 1e-10,
            ..Default::default()
        };
        let r = minimize(fg, vec![-1.2, 1.0], &opts).unwrap();
        assert_eq!(r.status, OptStatus::Converged);
        assert!((r.x[0] - 1.0).abs() < 1e-8 && (r.x[1] - 1.0).abs() < 1e-8);
        assert!(r.history.windows(2).all(|w| w[1].objective < w[0].objective));
    }

    #[test]
    fn ill_conditioned_quadratic() {
        let diag: Vec<f64> = (0..30).map(|i| 10f64.powf(i as f64 / 10.0)).collect();
        let fg = |x: &[f64]| {
            let f = 0.5 * x.iter().zip(&diag).map(|(v, d)| d * v * v).sum::<f64>();
            Ok((f, x.iter().zip(&diag).map(|(v, d)| d * v).collect()))
        };
        let opts = LbfgsOptions {
            max_iter: 500,
            grad_tol: 1e-8,
            ..Default::default()
        };
        let r = minimize(fg, vec![1.0; 30], &opts).unwrap();
        assert_eq!(r.status, OptStatus::Converged);
    }

    #[test]
    fn starts_at_optimum() {
        let fg = |x: &[f64]| Ok((x[0] * x[0], vec![2.0 * x[0]]));
        let r = minimize(fg, vec![0.0], &LbfgsOptions::default()).unwrap();
        assert_eq!(r.status, OptStatus::Converged);
        assert_eq!(r.history.len(), 1);
    }

    #[test]
    fn reports_line_search_failure() {
        // gradient points the wrong way: no descent is ever found
        let fg = |x: &[f64]| Ok((x[0], vec![-1.0]));
        let r = minimize(fg, vec![0.0], &LbfgsOptions::default()).unwrap();
        assert_eq!(r.status, OptStatus::LineSearchFailed);
        assert_eq!(r.x, vec![0.0]);
    }
}
