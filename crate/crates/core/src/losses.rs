//! Loss families with closed-form conjugates.
//!
//! Binary losses fold the label into the argument: with `y` in `{-1, +1}` they
//! are `phi(a) = psi(y a)` and therefore `phi*(u) = psi*(y u)`. The squared loss
//! keeps its real-valued target. The multiclass loss is the cost-augmented
//! hinge over `k` class scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::Norm;

/// Slack allowed when deciding whether a dual point lies in a conjugate domain.
/// Iterates built from convex combinations can land a few ulps outside.
pub const DOMAIN_TOL: f64 = 1e-10;

/// Misclassification costs `delta(j, y)`, stored by true label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    k: usize,
    // entries[y * k + j] = delta(j, y)
    entries: Vec<f64>,
}

impl CostMatrix {
    /// `rows[y][j]` is the cost of predicting `j` when the truth is `y`.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        if k < 2 {
            return Err(Error::invalid("cost matrix needs at least two classes"));
        }
        let mut entries = Vec::with_capacity(k * k);
        for (y, row) in rows.into_iter().enumerate() {
            if row.len() != k {
                return Err(Error::invalid(format!(
                    "cost matrix row {y} has {} entries, expected {k}",
                    row.len()
                )));
            }
            for (j, &c) in row.iter().enumerate() {
                if !c.is_finite() || c < 0.0 {
                    return Err(Error::invalid(format!("cost ({y}, {j}) = {c} is invalid")));
                }
                if j == y && c != 0.0 {
                    return Err(Error::invalid(format!("cost of the true label {y} must be 0")));
                }
            }
            entries.extend(row);
        }
        Ok(CostMatrix { k, entries })
    }

    pub fn zero_one(k: usize) -> Result<Self> {
        Self::new(
            (0..k)
                .map(|y| (0..k).map(|j| if j == y { 0.0 } else { 1.0 }).collect())
                .collect(),
        )
    }

    pub fn classes(&self) -> usize {
        self.k
    }

    /// `delta(predicted, truth)`
    pub fn cost(&self, predicted: usize, truth: usize) -> f64 {
        self.entries[truth * self.k + predicted]
    }

    /// Loss-augmented decoding over explicit scores: the maximizer of
    /// `delta(j, y) - s_y + s_j` (smallest index on ties) and the maximum.
    pub fn augmented_argmax(&self, truth: usize, scores: &[f64]) -> (usize, f64) {
        let sy = scores[truth];
        let mut best = (0, f64::NEG_INFINITY);
        for (j, &sj) in scores.iter().enumerate() {
            let val = self.cost(j, truth) - sy + sj;
            if val > best.1 {
                best = (j, val);
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Loss {
    /// `max(0, 1 - y a)`
    Hinge,
    /// Hinge with a quadratic corner of width `gamma`; `(1/gamma)`-smooth.
    SmoothedHinge { gamma: f64 },
    /// `log(1 + exp(-y a))`
    Logistic,
    /// `(a - y)^2 / 2`
    Squared,
    /// `max_j (delta(j, y) - a_y + a_j)`
    Multiclass(CostMatrix),
}

impl Loss {
    pub fn smoothed_hinge(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::invalid(format!("smoothing parameter {gamma} must be positive")));
        }
        Ok(Loss::SmoothedHinge { gamma })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Loss::Hinge => "hinge",
            Loss::SmoothedHinge { .. } => "smoothed-hinge",
            Loss::Logistic => "logistic",
            Loss::Squared => "squared",
            Loss::Multiclass(_) => "multiclass",
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            Loss::Multiclass(cost) => cost.classes(),
            _ => 1,
        }
    }

    /// `gamma` such that the loss is `(1/gamma)`-smooth; `None` if nonsmooth.
    pub fn smoothness(&self) -> Option<f64> {
        match self {
            Loss::SmoothedHinge { gamma } => Some(*gamma),
            Loss::Logistic => Some(4.0),
            Loss::Squared => Some(1.0),
            Loss::Hinge | Loss::Multiclass(_) => None,
        }
    }

    /// Strong convexity of the conjugate (0 for nonsmooth losses).
    pub fn conjugate_strong_convexity(&self) -> f64 {
        self.smoothness().unwrap_or(0.0)
    }

    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            Loss::Hinge | Loss::SmoothedHinge { .. } | Loss::Logistic => Some(1.0),
            Loss::Multiclass(_) => Some(2.0),
            Loss::Squared => None,
        }
    }

    /// Radius (in the dual norm) outside of which the conjugate is infinite.
    pub fn conjugate_domain_radius(&self) -> Option<f64> {
        self.lipschitz()
    }

    /// Norm on `R^k` that measures dual vectors.
    pub fn dual_norm(&self) -> Norm {
        match self {
            Loss::Multiclass(_) => Norm::L1,
            _ => Norm::Abs,
        }
    }

    pub fn validate_label(&self, y: f64) -> Result<()> {
        match self {
            Loss::Hinge | Loss::SmoothedHinge { .. } | Loss::Logistic if y != 1.0 && y != -1.0 => {
                Err(Error::invalid(format!("{} loss needs labels in {{-1, +1}}, got {y}", self.name())))
            }
            Loss::Squared if !y.is_finite() => Err(Error::invalid("non-finite regression target")),
            Loss::Multiclass(cost)
                if !(y >= 0.0 && y.fract() == 0.0 && (y as usize) < cost.classes()) =>
            {
                Err(Error::invalid(format!("class label {y} out of range")))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, y: f64, a: &[f64]) -> f64 {
        match self {
            Loss::Multiclass(cost) => cost.augmented_argmax(y as usize, a).1,
            _ => self.eval_scalar(y, a[0]),
        }
    }

    /// Convex conjugate; `f64::INFINITY` outside the domain.
    pub fn conjugate(&self, y: f64, u: &[f64]) -> f64 {
        match self {
            Loss::Multiclass(cost) => multiclass_conjugate(cost, y as usize, u),
            _ => self.conjugate_scalar(y, u[0]),
        }
    }

    /// Gradient of the conjugate at a point `u` of its domain (one-sided at
    /// the domain boundary for the logistic loss, where it is infinite).
    pub fn conjugate_gradient(&self, y: f64, u: &[f64]) -> Vec<f64> {
        match self {
            Loss::Multiclass(cost) => {
                let truth = y as usize;
                (0..u.len()).map(|j| -cost.cost(j, truth)).collect()
            }
            Loss::Squared => vec![u[0] + y],
            _ => {
                let b = (y * u[0]).clamp(-1.0, 0.0);
                let db = match self {
                    Loss::Hinge => 1.0,
                    Loss::SmoothedHinge { gamma } => 1.0 + gamma * b,
                    Loss::Logistic => (1.0 + b).ln() - (-b).ln(),
                    _ => unreachable!(),
                };
                vec![y * db]
            }
        }
    }

    /// One element of the subdifferential at `a`.
    pub fn subgradient(&self, y: f64, a: &[f64]) -> Vec<f64> {
        match self {
            Loss::Multiclass(cost) => {
                let truth = y as usize;
                let (j, _) = cost.augmented_argmax(truth, a);
                let mut g = vec![0.0; a.len()];
                if j != truth {
                    g[j] = 1.0;
                    g[truth] = -1.0;
                }
                g
            }
            _ => vec![self.derivative_scalar(y, a[0])],
        }
    }

    pub fn eval_scalar(&self, y: f64, a: f64) -> f64 {
        let t = y * a;
        match self {
            Loss::Hinge => (1.0 - t).max(0.0),
            Loss::SmoothedHinge { gamma } => {
                if t >= 1.0 {
                    0.0
                } else if t <= 1.0 - gamma {
                    1.0 - t - 0.5 * gamma
                } else {
                    (1.0 - t) * (1.0 - t) / (2.0 * gamma)
                }
            }
            Loss::Logistic => {
                if t >= 0.0 {
                    (-t).exp().ln_1p()
                } else {
                    -t + t.exp().ln_1p()
                }
            }
            Loss::Squared => 0.5 * (a - y) * (a - y),
            Loss::Multiclass(_) => panic!("multiclass loss has no scalar form"),
        }
    }

    pub fn derivative_scalar(&self, y: f64, a: f64) -> f64 {
        let t = y * a;
        match self {
            Loss::Hinge => {
                if t < 1.0 {
                    -y
                } else {
                    0.0
                }
            }
            Loss::SmoothedHinge { gamma } => {
                if t >= 1.0 {
                    0.0
                } else if t <= 1.0 - gamma {
                    -y
                } else {
                    -y * (1.0 - t) / gamma
                }
            }
            Loss::Logistic => {
                let sig = if t >= 0.0 {
                    let e = (-t).exp();
                    e / (1.0 + e)
                } else {
                    1.0 / (1.0 + t.exp())
                };
                -y * sig
            }
            Loss::Squared => a - y,
            Loss::Multiclass(_) => panic!("multiclass loss has no scalar form"),
        }
    }

    pub fn conjugate_scalar(&self, y: f64, u: f64) -> f64 {
        if let Loss::Squared = self {
            return 0.5 * u * u + u * y;
        }
        let b = y * u;
        if !(-1.0 - DOMAIN_TOL..=DOMAIN_TOL).contains(&b) {
            return f64::INFINITY;
        }
        let b = b.clamp(-1.0, 0.0);
        match self {
            Loss::Hinge => b,
            Loss::SmoothedHinge { gamma } => b + 0.5 * gamma * b * b,
            Loss::Logistic => xlogx(-b) + xlogx(1.0 + b),
            Loss::Squared | Loss::Multiclass(_) => unreachable!(),
        }
    }
}

fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

// The loss is a max of affine pieces `delta(j, y) + (e_j - e_y)^T v`, so its
// conjugate is the negated cost of the convex combination of `e_j - e_y`
// that produces `beta`.
fn multiclass_conjugate(cost: &CostMatrix, truth: usize, beta: &[f64]) -> f64 {
    let total: f64 = beta.iter().sum();
    let scale = 1.0 + beta.iter().map(|b| b.abs()).sum::<f64>();
    if total.abs() > DOMAIN_TOL * scale {
        return f64::INFINITY;
    }
    let mut mass = 0.0;
    let mut value = 0.0;
    for (j, &b) in beta.iter().enumerate() {
        if j == truth {
            continue;
        }
        if b < -DOMAIN_TOL {
            return f64::INFINITY;
        }
        mass += b;
        value += b * cost.cost(j, truth);
    }
    if mass > 1.0 + DOMAIN_TOL {
        return f64::INFINITY;
    }
    -value
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{brute_force_conjugate, Grid};
    use proptest::prelude::*;

    fn scalar_losses() -> Vec<Loss> {
        vec![
            Loss::Hinge,
            Loss::smoothed_hinge(1.0).unwrap(),
            Loss::smoothed_hinge(0.3).unwrap(),
            Loss::Logistic,
            Loss::Squared,
        ]
    }

    #[test]
    fn multiclass_evaluation() {
        let loss = Loss::Multiclass(CostMatrix::zero_one(3).unwrap());
        // class index 1 is the second class
        assert_eq!(loss.eval(1.0, &[0.0, 0.0, 0.0]), 1.0);
        let zero = Loss::Multiclass(CostMatrix::new(vec![vec![0.0; 3]; 3]).unwrap());
        assert_eq!(zero.eval(1.0, &[0.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn smoothed_hinge_boundary() {
        let loss = Loss::smoothed_hinge(1.0).unwrap();
        assert_eq!(loss.eval_scalar(1.0, 0.0), 0.5);
    }

    #[test]
    fn hinge_conjugate_values() {
        assert_eq!(Loss::Hinge.conjugate_scalar(1.0, -0.5), -0.5);
        assert_eq!(Loss::Hinge.conjugate_scalar(1.0, 0.5), f64::INFINITY);
        assert_eq!(Loss::Hinge.conjugate_scalar(-1.0, 0.5), -0.5);
        let oracle = brute_force_conjugate(&Loss::Hinge, 1.0, -0.5, &Grid::new(-10.0, 10.0, 1e-4));
        assert!((oracle + 0.5).abs() < 1e-3);
    }

    #[test]
    fn multiclass_conjugate_on_polytope() {
        let loss = Loss::Multiclass(CostMatrix::zero_one(3).unwrap());
        let val = loss.conjugate(1.0, &[0.3, -0.5, 0.2]);
        assert!((val + 0.5).abs() < 1e-15);
        assert_eq!(loss.conjugate(1.0, &[0.3, -0.2, 0.2]), f64::INFINITY);
        assert_eq!(loss.conjugate(1.0, &[-0.1, 0.0, 0.1]), f64::INFINITY);
        assert_eq!(loss.conjugate(1.0, &[0.7, -1.4, 0.7]), f64::INFINITY);
    }

    #[test]
    fn subgradients() {
        assert_eq!(Loss::Hinge.subgradient(1.0, &[0.0]), vec![-1.0]);
        assert_eq!(Loss::Hinge.subgradient(1.0, &[2.0]), vec![0.0]);
        let loss = Loss::Multiclass(CostMatrix::zero_one(3).unwrap());
        // augmented scores (0.7, 0, 0.6): class 0 wins
        assert_eq!(loss.subgradient(1.0, &[0.2, 0.5, 0.1]), vec![1.0, -1.0, 0.0]);
    }

    #[test]
    fn domain_radii() {
        assert_eq!(Loss::Hinge.conjugate_domain_radius(), Some(1.0));
        let mc = Loss::Multiclass(CostMatrix::zero_one(4).unwrap());
        assert_eq!(mc.conjugate_domain_radius(), Some(2.0));
        assert_eq!(Loss::Squared.conjugate_domain_radius(), None);
    }

    #[test]
    fn label_validation() {
        assert!(Loss::Hinge.validate_label(0.5).is_err());
        assert!(Loss::Logistic.validate_label(-1.0).is_ok());
        let mc = Loss::Multiclass(CostMatrix::zero_one(3).unwrap());
        assert!(mc.validate_label(2.0).is_ok());
        assert!(mc.validate_label(3.0).is_err());
        assert!(mc.validate_label(1.5).is_err());
    }

    #[test]
    fn cost_matrix_validation() {
        assert!(CostMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.5]]).is_err());
        assert!(CostMatrix::new(vec![vec![0.0, -1.0], vec![1.0, 0.0]]).is_err());
        assert!(CostMatrix::new(vec![vec![0.0]]).is_err());
    }

    #[test]
    fn conjugate_matches_grid_oracle() {
        let grid = Grid::new(-50.0, 50.0, 1e-4);
        for loss in scalar_losses() {
            for &y in &[1.0, -1.0] {
                for step in 0..=10 {
                    let b = -(step as f64) / 10.0;
                    let u = if let Loss::Squared = loss { 4.0 * b + 2.0 } else { y * b };
                    let exact = loss.conjugate_scalar(y, u);
                    let approx = brute_force_conjugate(&loss, y, u, &grid);
                    assert!(
                        (exact - approx).abs() < 1e-3,
                        "{} y={y} u={u}: {exact} vs {approx}",
                        loss.name()
                    );
                }
            }
        }
    }

    proptest! {
        #[test]
        fn fenchel_young_equality(a in -8.0f64..8.0, pos in any::<bool>(), li in 0usize..5) {
            let loss = &scalar_losses()[li];
            let y = if pos { 1.0 } else { -1.0 };
            let g = loss.derivative_scalar(y, a);
            let lhs = loss.eval_scalar(y, a) + loss.conjugate_scalar(y, g);
            prop_assert!((lhs - g * a).abs() <= 1e-9 * (1.0 + (g * a).abs()));
        }

        #[test]
        fn lipschitz_losses_have_bounded_conjugate_domain(u in 1.0f64 + 1e-5..50.0, neg in any::<bool>(), li in 0usize..4) {
            let loss = &scalar_losses()[li];
            let u = if neg { -u } else { u };
            let radius = loss.conjugate_domain_radius().unwrap();
            prop_assume!(u.abs() > radius * (1.0 + 1e-6));
            prop_assert_eq!(loss.conjugate_scalar(1.0, u), f64::INFINITY);
            prop_assert_eq!(loss.conjugate_scalar(-1.0, u), f64::INFINITY);
        }

        #[test]
        fn multiclass_conjugate_outside_l1_ball(raw in prop::collection::vec(-3.0f64..3.0, 4), y in 0usize..4) {
            let loss = Loss::Multiclass(CostMatrix::zero_one(4).unwrap());
            let norm: f64 = raw.iter().map(|x| x.abs()).sum();
            prop_assume!(norm > 2.0 * (1.0 + 1e-6));
            prop_assert_eq!(loss.conjugate(y as f64, &raw), f64::INFINITY);
        }

        #[test]
        fn smooth_gradients_are_lipschitz(a in -6.0f64..6.0, b in -6.0f64..6.0, li in 1usize..5) {
            let loss = &scalar_losses()[li];
            let gamma = loss.smoothness().unwrap();
            for y in [1.0, -1.0] {
                let diff = (loss.derivative_scalar(y, a) - loss.derivative_scalar(y, b)).abs();
                prop_assert!(diff <= (a - b).abs() / gamma * (1.0 + 1e-6) + 1e-15);
            }
        }

        #[test]
        fn multiclass_is_two_lipschitz_in_max_norm(
            u in prop::collection::vec(-5.0f64..5.0, 5),
            v in prop::collection::vec(-5.0f64..5.0, 5),
            y in 0usize..5,
        ) {
            let loss = Loss::Multiclass(CostMatrix::zero_one(5).unwrap());
            let dist = u.iter().zip(&v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            let diff = (loss.eval(y as f64, &u) - loss.eval(y as f64, &v)).abs();
            prop_assert!(diff <= 2.0 * dist + 1e-12);
        }

        #[test]
        fn multiclass_fenchel_young(a in prop::collection::vec(-3.0f64..3.0, 4), y in 0usize..4) {
            let loss = Loss::Multiclass(CostMatrix::zero_one(4).unwrap());
            let g = loss.subgradient(y as f64, &a);
            let ga: f64 = g.iter().zip(&a).map(|(x, y)| x * y).sum();
            let lhs = loss.eval(y as f64, &a) + loss.conjugate(y as f64, &g);
            prop_assert!((lhs - ga).abs() <= 1e-9);
        }
    }
}
