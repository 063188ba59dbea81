//! l1-regularized problems `min_w (1/n) sum_i phi_i(x_i^T w) + sigma ||w||_1`,
//! solved by adding a small strongly convex term and running the dual solver
//! to half the target accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::Loss;
use crate::model::{Dataset, Problem};
use crate::regularizers::Regularizer;
use crate::solver::schedule::{lipschitz_schedule, smooth_iterations};
use crate::solver::{self, RunOutput, SolverConfig, UpdateOption};

/// Which strongly convex term is added, matched to how the instances are bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum L1Variant {
    /// `||x_i||_2` bounded, `||w*||_2 <= B`; adds `(lambda/2)||w||_2^2`.
    L2Instances,
    /// `||x_i||_inf` bounded, `||w*||_1 <= B`; adds a q-norm term.
    LinfInstances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1Config {
    pub sigma: f64,
    pub eps: f64,
    /// Norm bound on the minimizer; `1/sigma` when absent.
    pub b: Option<f64>,
    pub option: UpdateOption,
    pub seed: u64,
    /// Instance bound `R`; computed from the data when absent.
    pub radius: Option<f64>,
    /// Hard cap on iterations; the rate schedule when absent.
    pub max_iterations: Option<u64>,
    pub gap_every: Option<u64>,
}

impl L1Config {
    pub fn new(sigma: f64, eps: f64) -> Self {
        L1Config {
            sigma,
            eps,
            b: None,
            option: UpdateOption::ClosedForm,
            seed: 0,
            radius: None,
            max_iterations: None,
            gap_every: None,
        }
    }

    pub fn bound(&self) -> f64 {
        self.b.unwrap_or(1.0 / self.sigma)
    }

    fn validate(&self) -> Result<()> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.sigma) || !positive(self.eps) || !positive(self.bound()) {
            return Err(Error::Config(format!(
                "sigma, eps and B must be positive (got {}, {}, {})",
                self.sigma,
                self.eps,
                self.bound()
            )));
        }
        Ok(())
    }

    /// `lambda` for the chosen variant on `dim` features.
    pub fn lambda(&self, variant: L1Variant, dim: usize) -> Result<f64> {
        self.validate()?;
        let b = self.bound();
        match variant {
            L1Variant::L2Instances => Ok(self.eps / (b * b)),
            L1Variant::LinfInstances => {
                if dim < 3 {
                    return Err(Error::Dimension(format!(
                        "the q-norm variant needs d >= 3, got {dim}"
                    )));
                }
                Ok(self.eps / (3.0 * (dim as f64).ln() * b * b))
            }
        }
    }

    /// The regularizer `g` with `lambda g(w) = sigma ||w||_1 + (strongly convex term)`.
    pub fn regularizer(&self, variant: L1Variant, dim: usize) -> Result<Regularizer> {
        let lambda = self.lambda(variant, dim)?;
        let threshold = self.sigma / lambda;
        match variant {
            L1Variant::L2Instances => Regularizer::l1l2(threshold),
            L1Variant::LinfInstances => Regularizer::l1qnorm(threshold, dim),
        }
    }
}

#[derive(Debug, Clone)]
pub struct L1Solution {
    pub w: Vec<f64>,
    pub lambda: f64,
    pub variant: L1Variant,
    pub run: RunOutput,
}

/// Solves with `||x_i||_2`-bounded instances.
pub fn solve_l1_l2(data: &Dataset, loss: &Loss, config: &L1Config) -> Result<L1Solution> {
    solve(data, loss, config, L1Variant::L2Instances)
}

/// Solves with `||x_i||_inf`-bounded instances.
pub fn solve_l1_linf(data: &Dataset, loss: &Loss, config: &L1Config) -> Result<L1Solution> {
    solve(data, loss, config, L1Variant::LinfInstances)
}

pub fn solve(data: &Dataset, loss: &Loss, config: &L1Config, variant: L1Variant) -> Result<L1Solution> {
    if loss.arity() != 1 {
        return Err(Error::invalid("l1 problems take scalar losses"));
    }
    let lambda = config.lambda(variant, data.dim())?;
    let reg = config.regularizer(variant, data.dim())?;
    log::info!(
        "{variant:?}: lambda = {lambda:e}, threshold sigma/lambda = {:e}",
        config.sigma / lambda
    );
    let mut problem = Problem::new(data, loss.clone(), reg, lambda)?;
    if let Some(r) = config.radius {
        problem = problem.with_radius(r)?;
    }
    let radius = problem.radius();
    let target = config.eps / 2.0;
    let cap = match config.max_iterations {
        Some(t) => t,
        None => match loss.smoothness() {
            Some(gamma) => smooth_iterations(data.n(), radius, lambda, gamma, target),
            None => {
                let lip = loss.lipschitz().ok_or_else(|| Error::invalid("loss is neither smooth nor Lipschitz"))?;
                lipschitz_schedule(data.n(), radius, lip, lambda, target)
            }.total,
        },
    }
    .max(1);
    let mut cfg = SolverConfig::new(config.option, cap);
    cfg.seed = config.seed;
    cfg.target_gap = Some(target);
    cfg.gap_every = config.gap_every;
    let run = solver::run(&problem, cfg)?;
    if run.reached_target != Some(true) {
        log::warn!(
            "stopped after {} iterations with gap {:e} above {target:e}",
            run.iterations,
            run.report.gap
        );
    }
    let norm = match variant {
        L1Variant::L2Instances => run.w.iter().map(|x| x * x).sum::<f64>().sqrt(),
        L1Variant::LinfInstances => run.w.iter().map(|x| x.abs()).sum(),
    };
    if norm > config.bound() {
        log::warn!("||w|| = {norm} exceeds B = {}; the accuracy guarantee may not hold", config.bound());
    }
    Ok(L1Solution {
        w: run.w.clone(),
        lambda,
        variant,
        run,
    })
}

pub use crate::reference::l1_objective;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L1Certificate {
    pub objective: f64,
    pub reference: f64,
    /// `objective - reference`
    pub difference: f64,
    pub eps: f64,
    pub passed: bool,
}

/// Compares the l1 objective of `w` against a high-accuracy reference point.
pub fn certify_l1(data: &Dataset, loss: &Loss, sigma: f64, w: &[f64], w_ref: &[f64], eps: f64) -> L1Certificate {
    let objective = l1_objective(data, loss, sigma, w);
    let reference = l1_objective(data, loss, sigma, w_ref);
    let difference = objective - reference;
    L1Certificate {
        objective,
        reference,
        difference,
        eps,
        passed: difference <= eps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_rules() {
        let cfg = L1Config {
            b: Some(10.0),
            ..L1Config::new(0.1, 0.01)
        };
        let l2 = cfg.lambda(L1Variant::L2Instances, 5).unwrap();
        assert!((l2 - 1e-4).abs() < 1e-18);
        assert!((cfg.sigma / l2 - 1000.0).abs() < 1e-9);
        let linf = cfg.lambda(L1Variant::LinfInstances, 100).unwrap();
        assert_eq!(linf, 0.01 / (3.0 * 100f64.ln() * 100.0));
        assert!((linf - 7.238e-6).abs() < 1e-9);
        match cfg.regularizer(L1Variant::LinfInstances, 100).unwrap() {
            Regularizer::L1QNorm { .. } => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn default_bound() {
        let cfg = L1Config::new(0.1, 0.01);
        assert!((cfg.bound() - 10.0).abs() < 1e-12);
        assert!((cfg.lambda(L1Variant::L2Instances, 5).unwrap() - 1e-4).abs() < 1e-15);
    }

    #[test]
    fn small_dimension_rejected() {
        let cfg = L1Config::new(0.1, 0.01);
        assert!(matches!(
            cfg.lambda(L1Variant::LinfInstances, 2),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn bad_config() {
        assert!(matches!(
            L1Config::new(0.0, 0.01).lambda(L1Variant::L2Instances, 5),
            Err(Error::Config(_))
        ));
    }
}
