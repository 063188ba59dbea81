//! Slow, independent solvers and brute-force evaluators used to check the
//! coordinate ascent machinery.
//!
//! Nothing here calls into the solver: the batch methods use only loss
//! values, loss derivatives, and conjugate gradients of regularizers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::Loss;
use crate::model::{Dataset, DualMatrix, Problem};
use crate::regularizers::Regularizer;

/// A uniform grid `lo, lo + step, ..., hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, step: f64) -> Self {
        assert!(hi > lo && step > 0.0, "degenerate grid");
        Grid { lo, hi, step }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let count = ((self.hi - self.lo) / self.step).round() as usize;
        (0..=count).map(move |k| self.lo + k as f64 * self.step)
    }
}

/// `max_z (z u - phi(z))` over the grid, for a scalar loss with label `y`.
pub fn brute_force_conjugate(loss: &Loss, y: f64, u: f64, grid: &Grid) -> f64 {
    grid.points()
        .map(|z| z * u - loss.eval_scalar(y, z))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub max_iters: usize,
    /// Duality gap at which smooth problems stop.
    pub tol: f64,
    /// Relative primal improvement per check window below which nonsmooth
    /// problems stop.
    pub stall_tol: f64,
    /// `c` in the subgradient step `c / sqrt(t)`.
    pub step_scale: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            max_iters: 200_000,
            tol: 1e-8,
            stall_tol: 1e-6,
            step_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution {
    pub w: Vec<f64>,
    pub primal: f64,
    /// Certified duality gap, when one is available.
    pub gap: Option<f64>,
    pub iterations: usize,
}

/// Smooth data-fit term `(1/n) sum_i phi_i(x_i^T w)` of a scalar-loss dataset.
struct DataFit<'a> {
    data: &'a Dataset,
    loss: &'a Loss,
}

impl DataFit<'_> {
    fn margins(&self, w: &[f64]) -> Vec<f64> {
        self.data.examples().iter().map(|ex| ex.column(0).dot(w)).collect()
    }

    fn value(&self, margins: &[f64]) -> f64 {
        let n = self.data.n() as f64;
        margins
            .iter()
            .zip(self.data.labels())
            .map(|(&a, &y)| self.loss.eval_scalar(y, a))
            .sum::<f64>()
            / n
    }

    /// Per-example derivatives `phi_i'(x_i^T w)`.
    fn derivatives(&self, margins: &[f64]) -> Vec<f64> {
        margins
            .iter()
            .zip(self.data.labels())
            .map(|(&a, &y)| self.loss.derivative_scalar(y, a))
            .collect()
    }

    /// `(1/n) sum_i c_i x_i`
    fn combine(&self, coeffs: &[f64]) -> Vec<f64> {
        let n = self.data.n() as f64;
        let mut out = vec![0.0; self.data.dim()];
        for (ex, &c) in self.data.examples().iter().zip(coeffs) {
            ex.column(0).axpy_into(c / n, &mut out);
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_scalar(data: &Dataset, loss: &Loss) -> Result<()> {
    if data.arity() != 1 || loss.arity() != 1 {
        return Err(Error::invalid("reference solvers handle scalar losses only"));
    }
    Ok(())
}

/// Euclidean proximal gradient with Barzilai-Borwein steps and backtracking on
/// `f(w) + (mu/2)||w||^2 + rho ||w||_1`. `certify` maps an iterate and its
/// loss derivatives to a duality gap; the run stops once it is below `tol`.
fn euclidean_prox_grad(
    fit: &DataFit,
    mu: f64,
    rho: f64,
    cfg: &OracleConfig,
    certify: &dyn Fn(&[f64], &[f64]) -> Result<f64>,
) -> Result<ReferenceSolution> {
    let d = fit.data.dim();
    let composite = |w: &[f64]| 0.5 * mu * dot(w, w) + rho * w.iter().map(|x| x.abs()).sum::<f64>();
    let prox = |y: &[f64], eta: f64| -> Vec<f64> {
        let shrink = 1.0 + eta * mu;
        let scaled: Vec<f64> = y.iter().map(|x| x / shrink).collect();
        Regularizer::l1l2(eta * rho / shrink)
            .expect("nonnegative threshold")
            .conj_grad(&scaled)
    };
    let mut w = vec![0.0; d];
    let mut margins = fit.margins(&w);
    let mut derivs = fit.derivatives(&margins);
    let mut grad = fit.combine(&derivs);
    let mut value = fit.value(&margins);
    let mut eta = 1.0;
    let mut gap = f64::INFINITY;
    for it in 0..cfg.max_iters {
        if it % 10 == 0 || eta < 1e-12 {
            gap = certify(&w, &derivs)?;
            if gap <= cfg.tol {
                return Ok(ReferenceSolution {
                    primal: value + composite(&w),
                    w,
                    gap: Some(gap),
                    iterations: it,
                });
            }
        }
        let (next, next_margins, next_value) = loop {
            let trial: Vec<f64> = w.iter().zip(&grad).map(|(x, g)| x - eta * g).collect();
            let cand = prox(&trial, eta);
            let step: Vec<f64> = cand.iter().zip(&w).map(|(a, b)| a - b).collect();
            let cand_margins = fit.margins(&cand);
            let cand_value = fit.value(&cand_margins);
            let bound = value + dot(&grad, &step) + dot(&step, &step) / (2.0 * eta);
            if cand_value <= bound + 1e-15 * value.abs().max(1.0) || eta < 1e-14 {
                break (cand, cand_margins, cand_value);
            }
            eta *= 0.5;
        };
        let next_derivs = fit.derivatives(&next_margins);
        let next_grad = fit.combine(&next_derivs);
        let s: Vec<f64> = next.iter().zip(&w).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        eta = if sy > 0.0 { (dot(&s, &s) / sy).clamp(1e-10, 1e10) } else { eta * 2.0 };
        w = next;
        margins = next_margins;
        derivs = next_derivs;
        grad = next_grad;
        value = next_value;
    }
    let _ = margins;
    Err(Error::NonConvergence {
        iterations: cfg.max_iters,
        gap,
    })
}

/// High-accuracy minimizer of `(1/n) sum_i phi_i(x_i^T w) + sigma ||w||_1`.
/// Requires a smooth loss; the gap certificate scales the gradient-induced
/// dual point into the feasible box `||(1/n) sum_i x_i alpha_i||_inf <= sigma`.
pub fn l1_reference(data: &Dataset, loss: &Loss, sigma: f64, cfg: &OracleConfig) -> Result<ReferenceSolution> {
    check_scalar(data, loss)?;
    if loss.smoothness().is_none() {
        return Err(Error::invalid("the l1 reference needs a smooth loss"));
    }
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma must be positive"));
    }
    let fit = DataFit { data, loss };
    let certify = |w: &[f64], derivs: &[f64]| -> Result<f64> {
        let alpha: Vec<f64> = derivs.iter().map(|g| -g).collect();
        let c = fit.combine(&alpha);
        let norm = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let t = if norm > sigma { sigma / norm } else { 1.0 };
        let n = data.n() as f64;
        let dual = -alpha
            .iter()
            .zip(data.labels())
            .map(|(&a, &y)| loss.conjugate_scalar(y, -t * a))
            .sum::<f64>()
            / n;
        let primal = l1_objective(data, loss, sigma, w);
        Ok(primal - dual)
    };
    euclidean_prox_grad(&fit, 0.0, sigma, cfg, &certify)
}

/// `(1/n) sum_i phi_i(x_i^T w) + sigma ||w||_1`
pub fn l1_objective(data: &Dataset, loss: &Loss, sigma: f64, w: &[f64]) -> f64 {
    let fit = DataFit { data, loss };
    fit.value(&fit.margins(w)) + sigma * w.iter().map(|x| x.abs()).sum::<f64>()
}

/// High-accuracy minimizer of a scalar-loss problem.
///
/// Smooth losses use proximal gradient (Euclidean for the l2-based
/// regularizers, Bregman in the regularizer's own geometry for the q-norm) and
/// stop at a certified duality gap of `cfg.tol`, with the dual point
/// `alpha_i = -phi_i'(x_i^T w)`. Nonsmooth losses use a proximal subgradient
/// method with steps `c / sqrt(t)` and stop when the best primal value stalls.
pub fn prox_grad_reference(problem: &Problem, cfg: &OracleConfig) -> Result<ReferenceSolution> {
    let data = problem.data();
    check_scalar(data, problem.loss())?;
    let fit = DataFit {
        data,
        loss: problem.loss(),
    };
    if problem.loss().smoothness().is_none() {
        return subgradient_reference(problem, &fit, cfg);
    }
    let certify = |_: &[f64], derivs: &[f64]| -> Result<f64> {
        let alpha = DualMatrix::from_columns(1, derivs.iter().map(|g| vec![-g]).collect())?;
        Ok(problem.duality_gap(&alpha)?.gap)
    };
    let lambda = problem.lambda();
    match problem.regularizer() {
        Regularizer::L2 => euclidean_prox_grad(&fit, lambda, 0.0, cfg, &certify),
        Regularizer::L1L2 { threshold } => {
            euclidean_prox_grad(&fit, lambda, lambda * threshold, cfg, &certify)
        }
        Regularizer::L1QNorm { .. } => bregman_prox_grad(problem, &fit, cfg, &certify),
    }
}

/// Proximal gradient with the Bregman divergence of `g`: the dual-space
/// iterate moves as `v <- (v - eta grad f(w)) / (1 + eta lambda)` and
/// `w = grad g*(v)`. Steps are accepted under the l1 smoothness bound.
fn bregman_prox_grad(
    problem: &Problem,
    fit: &DataFit,
    cfg: &OracleConfig,
    certify: &dyn Fn(&[f64], &[f64]) -> Result<f64>,
) -> Result<ReferenceSolution> {
    let reg = problem.regularizer();
    let lambda = problem.lambda();
    let d = problem.dim();
    let mut v = vec![0.0; d];
    let mut w = reg.conj_grad(&v);
    let mut margins = fit.margins(&w);
    let mut derivs = fit.derivatives(&margins);
    let mut grad = fit.combine(&derivs);
    let mut value = fit.value(&margins);
    let mut eta = 1.0;
    let mut gap = f64::INFINITY;
    for it in 0..cfg.max_iters {
        if it % 10 == 0 {
            gap = certify(&w, &derivs)?;
            if gap <= cfg.tol {
                return Ok(ReferenceSolution {
                    primal: problem.primal_objective(&w),
                    w,
                    gap: Some(gap),
                    iterations: it,
                });
            }
        }
        loop {
            let cand_v: Vec<f64> = v
                .iter()
                .zip(&grad)
                .map(|(x, g)| (x - eta * g) / (1.0 + eta * lambda))
                .collect();
            let cand = reg.conj_grad(&cand_v);
            let step: Vec<f64> = cand.iter().zip(&w).map(|(a, b)| a - b).collect();
            let l1: f64 = step.iter().map(|x| x.abs()).sum();
            let cand_margins = fit.margins(&cand);
            let cand_value = fit.value(&cand_margins);
            let bound = value + dot(&grad, &step) + l1 * l1 / (2.0 * eta);
            if cand_value <= bound + 1e-15 * value.abs().max(1.0) || eta < 1e-14 {
                v = cand_v;
                w = cand;
                margins = cand_margins;
                value = cand_value;
                break;
            }
            eta *= 0.5;
        }
        derivs = fit.derivatives(&margins);
        grad = fit.combine(&derivs);
        eta *= 1.5;
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_iters,
        gap,
    })
}

fn subgradient_reference(problem: &Problem, fit: &DataFit, cfg: &OracleConfig) -> Result<ReferenceSolution> {
    const WINDOW: usize = 1000;
    let reg = problem.regularizer();
    let lambda = problem.lambda();
    let mut w = vec![0.0; problem.dim()];
    let mut best = (problem.primal_objective(&w), w.clone());
    let mut window_start = best.0;
    for t in 1..=cfg.max_iters {
        let derivs = fit.derivatives(&fit.margins(&w));
        let grad = fit.combine(&derivs);
        let eta = cfg.step_scale / (t as f64).sqrt();
        // prox of eta * lambda * g for the strongly convex l2-based g, or a
        // Bregman step for the q-norm
        w = match reg {
            Regularizer::L1QNorm { .. } => {
                let v = reg.conj_grad(&w);
                let _ = v;
                return Err(Error::invalid(
                    "the subgradient reference does not support the q-norm regularizer",
                ));
            }
            _ => {
                let shrink = 1.0 + eta * lambda;
                let y: Vec<f64> = w.iter().zip(&grad).map(|(x, g)| (x - eta * g) / shrink).collect();
                Regularizer::l1l2(eta * lambda * reg.threshold() / shrink)?.conj_grad(&y)
            }
        };
        let p = problem.primal_objective(&w);
        if p < best.0 {
            best = (p, w.clone());
        }
        if t % WINDOW == 0 {
            if window_start - best.0 <= cfg.stall_tol * best.0.abs().max(1.0) {
                return Ok(ReferenceSolution {
                    w: best.1,
                    primal: best.0,
                    gap: None,
                    iterations: t,
                });
            }
            window_start = best.0;
        }
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_iters,
        gap: f64::NAN,
    })
}

/// Exact expectation over the example index of the dual increase from the
/// step `alpha_i += s (u_i - alpha_i)`, against the per-step improvement bound
/// `(s/n)(P - D) - (s/n)^2 G / (2 lambda)` with
/// `G = (1/n) sum_i (||X_i||^2 - gamma (1 - s) lambda n / s) ||u_i - alpha_i||_D^2`.
/// Returns `(lhs, rhs)`.
pub fn expected_increase_check(problem: &Problem, alpha: &DualMatrix, s: f64) -> Result<(f64, f64)> {
    let n = problem.n();
    if n > 64 {
        return Err(Error::invalid("exact expectation is limited to n <= 64"));
    }
    let (_, w) = problem.dual_to_primal(alpha)?;
    let primal = problem.primal_objective(&w);
    let dual = problem.dual_objective(alpha)?;
    let nf = n as f64;
    let gamma = problem.loss().conjugate_strong_convexity();
    let ln = problem.lambda() * nf;
    let mut lhs = 0.0;
    let mut g_term = 0.0;
    for i in 0..n {
        let scores = problem.data().example(i).scores(&w);
        let sub = problem.loss().subgradient(problem.data().label(i), &scores);
        let z: Vec<f64> = sub.iter().zip(alpha.col(i)).map(|(g, a)| -g - a).collect();
        let zn = problem.loss().dual_norm().eval(&z).powi(2);
        let mut next = alpha.clone();
        for (a, zj) in next.col_mut(i).iter_mut().zip(&z) {
            *a += s * zj;
        }
        lhs += problem.dual_objective(&next)? - dual;
        // (s/n)^2 times the G summand, without dividing by s
        g_term += ((s / nf).powi(2) * problem.op_norm(i).powi(2)
            - s * (1.0 - s) * gamma * ln / (nf * nf))
            * zn;
    }
    lhs /= nf;
    let rhs = s / nf * (primal - dual) - g_term / nf / (2.0 * problem.lambda());
    Ok((lhs, rhs))
}
