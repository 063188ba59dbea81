//! Per-coordinate update rules.

use crate::error::{Error, Result};
use crate::losses::Loss;
use crate::model::Problem;

use super::state::DualState;
use super::UpdateOption;

const BISECTION_ITERATIONS: usize = 200;

/// A candidate change of one dual column, before it is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub delta: Vec<f64>,
    /// Step along `z = u - alpha_i`; absent for the exact rule.
    pub s: Option<f64>,
    /// `z = u - alpha_i` for the direction-based rules.
    pub direction: Option<Vec<f64>>,
    /// `||z||_D^2` as observed (before any configured bound replaces it).
    pub z_norm_sq: Option<f64>,
    /// `phi_i(X_i^T w) + phi_i*(-alpha_i) + w^T X_i alpha_i`
    pub example_gap: f64,
}

/// Quantities shared by all rules at a fixed state and example.
pub(crate) struct Local<'p, 'a> {
    pub problem: &'p Problem<'a>,
    pub i: usize,
    pub y: f64,
    pub scores: Vec<f64>,
    pub alpha: Vec<f64>,
    /// `lambda n`
    pub ln: f64,
}

impl<'p, 'a> Local<'p, 'a> {
    pub fn new(problem: &'p Problem<'a>, state: &DualState, i: usize) -> Self {
        Local {
            problem,
            i,
            y: problem.data().label(i),
            scores: state.scores(problem.data().example(i)),
            alpha: state.alpha().col(i).to_vec(),
            ln: problem.lambda() * problem.n() as f64,
        }
    }

    fn loss(&self) -> &Loss {
        self.problem.loss()
    }

    /// `phi_i*(-(alpha_i + delta))`
    fn conj_after(&self, delta: &[f64]) -> f64 {
        let neg: Vec<f64> = self.alpha.iter().zip(delta).map(|(a, d)| -(a + d)).collect();
        self.loss().conjugate(self.y, &neg)
    }

    fn example_gap(&self) -> f64 {
        let inner: f64 = self.scores.iter().zip(&self.alpha).map(|(s, a)| s * a).sum();
        self.loss().eval(self.y, &self.scores) + self.conj_after(&vec![0.0; self.alpha.len()]) + inner
    }

    /// `||X_i delta||_{D'}^2`
    fn weighted_sq(&self, delta: &[f64]) -> f64 {
        let block = self.problem.data().example(self.i);
        if block.arity() == 1 {
            let r = self.problem.op_norm(self.i);
            delta[0] * delta[0] * r * r
        } else {
            block.combine(delta).norm2_sq()
        }
    }

    /// The proximal lower bound on `n` times the dual increase of adding `delta`.
    pub fn surrogate(&self, delta: &[f64]) -> f64 {
        let before = self.conj_after(&vec![0.0; delta.len()]);
        let lin: f64 = self.scores.iter().zip(delta).map(|(s, d)| s * d).sum();
        -self.conj_after(delta) + before - lin - self.weighted_sq(delta) / (2.0 * self.ln)
    }

    /// `u` with `-u` in the subdifferential at `X_i^T w`, and `z = u - alpha_i`.
    fn direction(&self) -> Vec<f64> {
        let g = self.loss().subgradient(self.y, &self.scores);
        g.iter().zip(&self.alpha).map(|(gj, a)| -gj - a).collect()
    }

    fn z_norm_sq(&self, z: &[f64]) -> f64 {
        self.loss().dual_norm().eval(z).powi(2)
    }
}

pub(crate) fn propose(
    local: &Local,
    option: UpdateOption,
    radius: f64,
    z_bound: Option<f64>,
) -> Result<Proposal> {
    match option {
        UpdateOption::Exact => exact(local),
        UpdateOption::LineSearch => line_search(local),
        UpdateOption::ClosedForm => closed_form(local, local.problem.op_norm(local.i).powi(2), None),
        UpdateOption::UniformRadius => closed_form(local, radius * radius, z_bound),
        UpdateOption::SmoothFixed => smooth_fixed(local, radius),
    }
}

fn exact(local: &Local) -> Result<Proposal> {
    let unsupported = |reason: &str| Error::UnsupportedOption {
        option: "I".into(),
        reason: reason.into(),
    };
    if local.alpha.len() != 1 {
        return Err(unsupported("needs a scalar loss"));
    }
    let (y, a, alpha) = (local.y, local.scores[0], local.alpha[0]);
    let curvature = local.problem.op_norm(local.i).powi(2) / local.ln;
    let target = match local.loss() {
        Loss::Squared => alpha + (y - a - alpha) / (1.0 + curvature),
        Loss::Hinge | Loss::SmoothedHinge { .. } => {
            let gamma = local.loss().conjugate_strong_convexity();
            // maximize y b - gamma b^2 / 2 - a (y b - alpha) - curvature (y b - alpha)^2 / 2
            // over b = y beta in [0, 1]
            let denom = gamma + curvature;
            let b = if denom > 0.0 {
                y * (y - a + curvature * alpha) / denom
            } else {
                let slope = 1.0 - y * a;
                if slope > 0.0 {
                    1.0
                } else if slope < 0.0 {
                    0.0
                } else {
                    y * alpha
                }
            };
            y * b.clamp(0.0, 1.0)
        }
        Loss::Logistic | Loss::Multiclass(_) => {
            return Err(unsupported("no closed-form maximizer for this loss"))
        }
    };
    Ok(Proposal {
        delta: vec![target - alpha],
        s: None,
        direction: None,
        z_norm_sq: None,
        example_gap: local.example_gap(),
    })
}

fn line_search(local: &Local) -> Result<Proposal> {
    let z = local.direction();
    let zn = local.z_norm_sq(&z);
    let example_gap = local.example_gap();
    if zn == 0.0 {
        return Ok(no_move(z, zn, example_gap));
    }
    let lin: f64 = local.scores.iter().zip(&z).map(|(s, zj)| s * zj).sum();
    let quad = local.weighted_sq(&z) / (2.0 * local.ln);
    let objective = |s: f64| {
        let delta: Vec<f64> = z.iter().map(|zj| s * zj).collect();
        -local.conj_after(&delta) - s * lin - s * s * quad
    };
    // Both ends of the segment are dual feasible in exact arithmetic; rounding
    // can push the far end out, so shrink it onto the domain if needed.
    let mut hi = 1.0;
    if !objective(hi).is_finite() {
        let mut lo = 0.0;
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if objective(mid).is_finite() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi = lo;
    }
    // the objective is concave in s: bisect on the sign of its derivative
    let slope = |s: f64| {
        let u: Vec<f64> = local.alpha.iter().zip(&z).map(|(a, zj)| -(a + s * zj)).collect();
        let grad = local.loss().conjugate_gradient(local.y, &u);
        grad.iter().zip(&z).map(|(g, zj)| g * zj).sum::<f64>() - lin - 2.0 * s * quad
    };
    let inner = bisect_decreasing(&slope, 0.0, hi);
    let s = [inner, hi, 0.0]
        .into_iter()
        .map(|s| (s, objective(s)))
        .fold((0.0, f64::NEG_INFINITY), |best, cand| if cand.1 > best.1 { cand } else { best })
        .0;
    Ok(Proposal {
        delta: z.iter().map(|zj| s * zj).collect(),
        s: Some(s),
        direction: Some(z),
        z_norm_sq: Some(zn),
        example_gap,
    })
}

/// Zero of a nonincreasing function on `[lo, hi]`, or the end where it has
/// no sign change.
fn bisect_decreasing(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    if f(lo) <= 0.0 {
        return lo;
    }
    if f(hi) >= 0.0 {
        return hi;
    }
    for _ in 0..BISECTION_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v > 0.0 {
            lo = mid;
        } else if v < 0.0 {
            hi = mid;
        } else {
            return mid;
        }
    }
    0.5 * (lo + hi)
}

fn closed_form(local: &Local, op_norm_sq: f64, z_bound: Option<f64>) -> Result<Proposal> {
    let z = local.direction();
    let zn = local.z_norm_sq(&z);
    let example_gap = local.example_gap();
    if zn == 0.0 {
        return Ok(no_move(z, zn, example_gap));
    }
    let used = match z_bound {
        Some(bound) if zn > bound * (1.0 + 1e-12) => {
            return Err(Error::Config(format!(
                "step norm bound {bound} is below the observed ||z||^2 = {zn}"
            )))
        }
        Some(bound) => bound,
        None => zn,
    };
    let gamma = local.loss().conjugate_strong_convexity();
    let s = (example_gap + 0.5 * gamma * used) / (used * (gamma + op_norm_sq / local.ln));
    let s = if s.is_nan() { 0.0 } else { s.clamp(0.0, 1.0) };
    Ok(Proposal {
        delta: z.iter().map(|zj| s * zj).collect(),
        s: Some(s),
        direction: Some(z),
        z_norm_sq: Some(zn),
        example_gap,
    })
}

fn smooth_fixed(local: &Local, radius: f64) -> Result<Proposal> {
    let Some(gamma) = local.loss().smoothness() else {
        return Err(Error::UnsupportedOption {
            option: "V".into(),
            reason: "smooth losses only".into(),
        });
    };
    let z = local.direction();
    let zn = local.z_norm_sq(&z);
    let s = local.ln * gamma / (radius * radius + local.ln * gamma);
    Ok(Proposal {
        delta: z.iter().map(|zj| s * zj).collect(),
        s: Some(s),
        direction: Some(z),
        z_norm_sq: Some(zn),
        example_gap: local.example_gap(),
    })
}

fn no_move(z: Vec<f64>, zn: f64, example_gap: f64) -> Proposal {
    Proposal {
        delta: vec![0.0; z.len()],
        s: Some(0.0),
        direction: Some(z),
        z_norm_sq: Some(zn),
        example_gap,
    }
}
