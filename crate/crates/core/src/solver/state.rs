//! Dual iterate with incrementally maintained aggregate and primal image.

use crate::error::Result;
use crate::model::{DualMatrix, Problem};
use crate::sparse::ExampleBlock;

/// `alpha`, `v = (lambda n)^{-1} sum_i X_i alpha_i`, and `w = grad g*(v)`.
///
/// `w` is stored as a direction and a global factor (the factor is 1 for
/// separable regularizers), so a step touches only the support of `X_i`.
#[derive(Debug, Clone)]
pub struct DualState {
    alpha: DualMatrix,
    v: Vec<f64>,
    direction: Vec<f64>,
    mass: f64,
    scale: f64,
}

impl DualState {
    pub fn zeros(problem: &Problem) -> Self {
        let alpha = DualMatrix::zeros(problem.arity(), problem.n());
        Self::build(problem, alpha, vec![0.0; problem.dim()])
    }

    pub fn from_alpha(problem: &Problem, alpha: DualMatrix) -> Result<Self> {
        let v = problem.aggregate(&alpha)?;
        Ok(Self::build(problem, alpha, v))
    }

    fn build(problem: &Problem, alpha: DualMatrix, v: Vec<f64>) -> Self {
        let reg = problem.regularizer();
        let mass = reg.total_mass(&v);
        let direction = v.iter().map(|&x| reg.coord_direction(x)).collect();
        DualState {
            alpha,
            v,
            direction,
            mass,
            scale: reg.grad_scale(mass),
        }
    }

    pub fn alpha(&self) -> &DualMatrix {
        &self.alpha
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    /// `w = grad g*(v)`, materialized.
    pub fn w(&self) -> Vec<f64> {
        self.direction.iter().map(|&u| self.scale * u).collect()
    }

    /// Sum of the regularizer's coordinate masses at `v`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `X_i^T w`
    pub fn scores(&self, block: &ExampleBlock) -> Vec<f64> {
        block
            .columns()
            .iter()
            .map(|c| self.scale * c.dot(&self.direction))
            .collect()
    }

    /// Adds `delta` to `alpha_i` and returns the resulting change of `g*(v)`.
    pub(crate) fn apply(&mut self, problem: &Problem, i: usize, delta: &[f64]) -> f64 {
        for (a, d) in self.alpha.col_mut(i).iter_mut().zip(delta) {
            *a += d;
        }
        let reg = problem.regularizer();
        let inv = 1.0 / (problem.lambda() * problem.n() as f64);
        let block = problem.data().example(i);
        let change = if block.arity() == 1 {
            let step = delta[0] * inv;
            let mut change = 0.0;
            for (j, x) in block.column(0).iter() {
                change += self.move_coord(problem, j, x * step);
            }
            change
        } else {
            let scaled: Vec<f64> = delta.iter().map(|d| d * inv).collect();
            let mut change = 0.0;
            for (j, x) in block.combine(&scaled).iter() {
                change += self.move_coord(problem, j, x);
            }
            change
        };
        let before = self.mass;
        self.mass += change;
        self.scale = reg.grad_scale(self.mass);
        reg.conj_change(before, change)
    }

    fn move_coord(&mut self, problem: &Problem, j: usize, dv: f64) -> f64 {
        let reg = problem.regularizer();
        let old = reg.coord_mass(self.v[j]);
        self.v[j] += dv;
        self.direction[j] = reg.coord_direction(self.v[j]);
        reg.coord_mass(self.v[j]) - old
    }

    /// Recomputes `v` and `w` from `alpha`; returns the relative drift of the
    /// maintained `v` in the max norm.
    pub fn refresh(&mut self, problem: &Problem) -> Result<f64> {
        let fresh = problem.aggregate(&self.alpha)?;
        let drift = relative_difference(&self.v, &fresh);
        let alpha = std::mem::replace(&mut self.alpha, DualMatrix::zeros(0, 0));
        *self = Self::build(problem, alpha, fresh);
        Ok(drift)
    }

    /// Relative max-norm difference between the maintained and a fresh `v`.
    pub fn drift(&self, problem: &Problem) -> Result<f64> {
        Ok(relative_difference(&self.v, &problem.aggregate(&self.alpha)?))
    }
}

fn relative_difference(a: &[f64], b: &[f64]) -> f64 {
    let norm = |x: &[f64]| x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = norm(a).max(norm(b)).max(f64::MIN_POSITIVE);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}
