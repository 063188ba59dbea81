//! Strongly convex regularizers with closed-form conjugates.
//!
//! Every regularizer here has a conjugate of the form `F(sum_j m(v_j))` for a
//! per-coordinate mass `m`, and a conjugate gradient whose `j`-th coordinate
//! depends only on `v_j` and that sum. Solvers exploit this to update `g*(v)`
//! and `grad g*(v)` on the support of a sparse change to `v`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::Norm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Regularizer {
    /// `||w||_2^2 / 2`
    L2,
    /// `||w||_2^2 / 2 + threshold * ||w||_1`
    L1L2 { threshold: f64 },
    /// `(3 ln d / 2) ||w||_q^2 + threshold * ||w||_1` with `q = ln d / (ln d - 1)`;
    /// 1-strongly convex with respect to the l1 norm.
    L1QNorm { threshold: f64, dim: usize },
}

impl Regularizer {
    pub fn l1l2(threshold: f64) -> Result<Self> {
        check_threshold(threshold)?;
        Ok(Regularizer::L1L2 { threshold })
    }

    pub fn l1qnorm(threshold: f64, dim: usize) -> Result<Self> {
        check_threshold(threshold)?;
        if dim < 3 {
            return Err(Error::Dimension(format!(
                "the q-norm regularizer needs d >= 3, got {dim}"
            )));
        }
        if dim < 8 {
            log::warn!("q-norm regularizer with d = {dim} < 8 is not 1-smooth in the max norm");
        }
        Ok(Regularizer::L1QNorm { threshold, dim })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regularizer::L2 => "l2",
            Regularizer::L1L2 { .. } => "l1l2",
            Regularizer::L1QNorm { .. } => "l1qnorm",
        }
    }

    pub fn threshold(&self) -> f64 {
        match self {
            Regularizer::L2 => 0.0,
            Regularizer::L1L2 { threshold } | Regularizer::L1QNorm { threshold, .. } => *threshold,
        }
    }

    /// Norm on `R^d` in which the conjugate is 1-smooth.
    pub fn weight_dual(&self) -> Norm {
        match self {
            Regularizer::L2 | Regularizer::L1L2 { .. } => Norm::L2,
            Regularizer::L1QNorm { .. } => Norm::Linf,
        }
    }

    /// Dimension the regularizer was built for, if it is dimension-specific.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Regularizer::L1QNorm { dim, .. } => Some(*dim),
            _ => None,
        }
    }

    /// `q` for the q-norm variant.
    pub fn q(&self) -> Option<f64> {
        self.log_dim().map(|l| l / (l - 1.0))
    }

    fn log_dim(&self) -> Option<f64> {
        match self {
            Regularizer::L1QNorm { dim, .. } => Some((*dim as f64).ln()),
            _ => None,
        }
    }

    /// Per-coordinate contribution to the aggregate that determines `g*`.
    pub fn coord_mass(&self, vj: f64) -> f64 {
        match self {
            Regularizer::L2 => 0.5 * vj * vj,
            Regularizer::L1L2 { threshold } => {
                let e = (vj.abs() - threshold).max(0.0);
                0.5 * e * e
            }
            Regularizer::L1QNorm { threshold, .. } => {
                let e = (vj.abs() - threshold).max(0.0);
                // the dual exponent q / (q - 1) equals ln d
                e.powf(self.log_dim().unwrap())
            }
        }
    }

    /// `g*` as a function of the summed coordinate masses.
    pub fn conj_from_mass(&self, mass: f64) -> f64 {
        match self {
            Regularizer::L2 | Regularizer::L1L2 { .. } => mass,
            Regularizer::L1QNorm { .. } => {
                if mass <= 0.0 {
                    return 0.0;
                }
                let l = self.log_dim().unwrap();
                mass.powf(2.0 / l) / (6.0 * l)
            }
        }
    }

    /// Change of `g*` when the summed masses move from `mass` by `change`.
    pub fn conj_change(&self, mass: f64, change: f64) -> f64 {
        match self {
            Regularizer::L2 | Regularizer::L1L2 { .. } => change,
            Regularizer::L1QNorm { .. } => {
                self.conj_from_mass(mass + change) - self.conj_from_mass(mass)
            }
        }
    }

    /// Coordinate `j` of `grad g*(v)` up to the factor [`Self::grad_scale`].
    pub fn coord_direction(&self, vj: f64) -> f64 {
        match self {
            Regularizer::L2 => vj,
            Regularizer::L1L2 { threshold } => soft_threshold(vj, *threshold),
            Regularizer::L1QNorm { threshold, .. } => {
                let e = (vj.abs() - threshold).max(0.0);
                if e == 0.0 {
                    return 0.0;
                }
                vj.signum() * e.powf(self.log_dim().unwrap() - 1.0)
            }
        }
    }

    /// Factor shared by all coordinates of `grad g*(v)`; 1 for separable kinds.
    pub fn grad_scale(&self, mass: f64) -> f64 {
        match self {
            Regularizer::L2 | Regularizer::L1L2 { .. } => 1.0,
            Regularizer::L1QNorm { .. } => {
                if mass <= 0.0 {
                    return 0.0;
                }
                let l = self.log_dim().unwrap();
                mass.powf((2.0 - l) / l) / (3.0 * l)
            }
        }
    }

    /// Coordinate `j` of `grad g*(v)` given `v_j` and the summed masses.
    pub fn coord_grad(&self, vj: f64, mass: f64) -> f64 {
        self.grad_scale(mass) * self.coord_direction(vj)
    }

    pub fn total_mass(&self, v: &[f64]) -> f64 {
        v.iter().map(|&x| self.coord_mass(x)).sum()
    }

    /// `grad g*(v)`, the maximizer of `w^T v - g(w)`.
    pub fn conj_grad(&self, v: &[f64]) -> Vec<f64> {
        let scale = self.grad_scale(self.total_mass(v));
        v.iter().map(|&x| scale * self.coord_direction(x)).collect()
    }

    pub fn conj_value(&self, v: &[f64]) -> f64 {
        self.conj_from_mass(self.total_mass(v))
    }

    pub fn primal_value(&self, w: &[f64]) -> f64 {
        let l1: f64 = w.iter().map(|x| x.abs()).sum();
        match self {
            Regularizer::L2 => 0.5 * dot(w, w),
            Regularizer::L1L2 { threshold } => 0.5 * dot(w, w) + threshold * l1,
            Regularizer::L1QNorm { threshold, .. } => {
                let l = self.log_dim().unwrap();
                let qn = q_norm(w, self.q().unwrap());
                1.5 * l * qn * qn + threshold * l1
            }
        }
    }

    /// Largest violation of the optimality conditions for `w = grad g*(v)`.
    pub fn stationarity_residual(&self, v: &[f64], w: &[f64]) -> f64 {
        let theta = self.threshold();
        let smooth_part: Box<dyn Fn(f64) -> f64> = match self {
            Regularizer::L2 | Regularizer::L1L2 { .. } => Box::new(|wi| wi),
            Regularizer::L1QNorm { .. } => {
                let q = self.q().unwrap();
                let l = self.log_dim().unwrap();
                let norm = q_norm(w, q);
                Box::new(move |wi: f64| {
                    wi.signum() * 3.0 * l * wi.abs().powf(q - 1.0) / norm.powf(q - 2.0)
                })
            }
        };
        v.iter()
            .zip(w)
            .map(|(&vi, &wi)| {
                if wi == 0.0 {
                    (vi.abs() - theta).max(0.0)
                } else {
                    (vi - smooth_part(wi) - theta * wi.signum()).abs()
                }
            })
            .fold(0.0, f64::max)
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(threshold.is_finite() && threshold >= 0.0) {
        return Err(Error::invalid(format!("l1 threshold {threshold} must be nonnegative")));
    }
    Ok(())
}

pub fn soft_threshold(x: f64, theta: f64) -> f64 {
    x.signum() * (x.abs() - theta).max(0.0)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn q_norm(w: &[f64], q: f64) -> f64 {
    let m = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if m == 0.0 {
        return 0.0;
    }
    m * w.iter().map(|x| (x.abs() / m).powf(q)).sum::<f64>().powf(1.0 / q)
}
