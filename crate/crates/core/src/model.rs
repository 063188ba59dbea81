//! Datasets, problem definitions, and exact primal/dual objectives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::Loss;
use crate::norms::{op_norm, NormPair};
use crate::regularizers::Regularizer;
use crate::sparse::{ExampleBlock, SparseVec};

/// Relative tolerance for agreement checks between equivalent computations.
pub const REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    dim: usize,
    arity: usize,
    examples: Vec<ExampleBlock>,
    labels: Vec<f64>,
}

impl Dataset {
    pub fn new(examples: Vec<ExampleBlock>, labels: Vec<f64>) -> Result<Self> {
        let Some(first) = examples.first() else {
            return Err(Error::invalid("a dataset needs at least one example"));
        };
        if labels.len() != examples.len() {
            return Err(Error::invalid(format!(
                "{} examples but {} labels",
                examples.len(),
                labels.len()
            )));
        }
        let (dim, arity) = (first.dim(), first.arity());
        for (i, ex) in examples.iter().enumerate() {
            if ex.dim() != dim || ex.arity() != arity {
                return Err(Error::Dimension(format!(
                    "example {i} is {}x{}, expected {dim}x{arity}",
                    ex.dim(),
                    ex.arity()
                )));
            }
        }
        Ok(Dataset {
            dim,
            arity,
            examples,
            labels,
        })
    }

    /// One column per example.
    pub fn from_rows(rows: Vec<SparseVec>, labels: Vec<f64>) -> Result<Self> {
        Self::new(rows.into_iter().map(ExampleBlock::single).collect(), labels)
    }

    /// Multiclass data where class `j` sees a copy of `x` placed in block `j`
    /// of a `d * k` dimensional weight vector. Labels are 0-based classes.
    pub fn class_blocked(rows: &[SparseVec], labels: Vec<usize>, classes: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::invalid("multiclass data needs at least two classes"));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::invalid(format!("class label {bad} out of range")));
        }
        let examples = rows
            .iter()
            .map(|x| ExampleBlock::new(class_features(x, classes)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(examples, labels.into_iter().map(|y| y as f64).collect())
    }

    pub fn n(&self) -> usize {
        self.examples.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn examples(&self) -> &[ExampleBlock] {
        &self.examples
    }

    pub fn example(&self, i: usize) -> &ExampleBlock {
        &self.examples[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }
}

/// `psi(x, j)` for `j = 0..classes`: `x` shifted into block `j`.
pub fn class_features(x: &SparseVec, classes: usize) -> Vec<SparseVec> {
    let d = x.dim();
    (0..classes)
        .map(|j| {
            SparseVec::new(d * classes, x.iter().map(|(idx, val)| (j * d + idx, val)))
                .expect("shifted indices stay sorted and in range")
        })
        .collect()
}

/// Dense `k x n` dual matrix stored column by column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualMatrix {
    k: usize,
    n: usize,
    data: Vec<f64>,
}

impl DualMatrix {
    pub fn zeros(k: usize, n: usize) -> Self {
        DualMatrix {
            k,
            n,
            data: vec![0.0; k * n],
        }
    }

    pub fn from_columns(k: usize, columns: Vec<Vec<f64>>) -> Result<Self> {
        let n = columns.len();
        let mut data = Vec::with_capacity(k * n);
        for (i, c) in columns.into_iter().enumerate() {
            if c.len() != k {
                return Err(Error::Dimension(format!("dual column {i} has length {}", c.len())));
            }
            data.extend(c);
        }
        Ok(DualMatrix { k, n, data })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn col(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn col_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Primal value, dual value, and their difference computed two ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub primal: f64,
    pub dual: f64,
    /// `primal - dual`
    pub gap: f64,
    /// The same difference as a sum of Fenchel-Young gaps: one per example plus
    /// one for the regularizer, which vanishes when `w = grad g*(v)`.
    pub decomposed: f64,
}

impl GapReport {
    pub fn consistent(&self) -> bool {
        let scale = 1.0_f64.max(self.primal.abs()).max(self.dual.abs());
        (self.gap - self.decomposed).abs() <= REL_TOL * scale
    }
}

/// A regularized loss minimization instance over a borrowed dataset.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    data: &'a Dataset,
    loss: Loss,
    reg: Regularizer,
    lambda: f64,
    radius: f64,
    norms: NormPair,
    op_norms: Vec<f64>,
    normalized: bool,
}

impl<'a> Problem<'a> {
    pub fn new(data: &'a Dataset, loss: Loss, reg: Regularizer, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
        }
        if loss.arity() != data.arity() {
            return Err(Error::Dimension(format!(
                "{} loss has arity {} but examples have {} columns",
                loss.name(),
                loss.arity(),
                data.arity()
            )));
        }
        if let Some(d) = reg.dim() {
            if d != data.dim() {
                return Err(Error::Dimension(format!(
                    "regularizer built for d = {d}, data has d = {}",
                    data.dim()
                )));
            }
        }
        for (i, &y) in data.labels().iter().enumerate() {
            loss.validate_label(y)
                .map_err(|e| Error::invalid(format!("example {i}: {e}")))?;
        }
        let norms = NormPair::from_duals(loss.dual_norm(), reg.weight_dual());
        let op_norms = data
            .examples()
            .iter()
            .map(|ex| op_norm(ex, &norms))
            .collect::<Result<Vec<_>>>()?;
        let radius = op_norms.iter().copied().fold(0.0, f64::max);

        let zero = vec![0.0; loss.arity()];
        let mean_at_zero = data
            .labels()
            .iter()
            .map(|&y| loss.eval(y, &zero))
            .sum::<f64>()
            / data.n() as f64;
        // every family here is nonnegative, so only the mean needs checking
        let normalized = mean_at_zero <= 1.0 + REL_TOL;
        if !normalized {
            log::warn!(
                "mean loss at w = 0 is {mean_at_zero:.4} > 1; iteration schedules are not certified"
            );
        }
        Ok(Problem {
            data,
            loss,
            reg,
            lambda,
            radius,
            norms,
            op_norms,
            normalized,
        })
    }

    /// Replaces the data-derived bound `R` by a larger one.
    pub fn with_radius(mut self, radius: f64) -> Result<Self> {
        let max = self.op_norms.iter().copied().fold(0.0, f64::max);
        if !(radius.is_finite() && radius >= max * (1.0 - REL_TOL)) {
            return Err(Error::Config(format!(
                "R = {radius} is below the largest example norm {max}"
            )));
        }
        self.radius = radius;
        Ok(self)
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }

    pub fn loss(&self) -> &Loss {
        &self.loss
    }

    pub fn regularizer(&self) -> &Regularizer {
        &self.reg
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn norms(&self) -> NormPair {
        self.norms
    }

    /// `||X_i||` for the problem's norm pair.
    pub fn op_norm(&self, i: usize) -> f64 {
        self.op_norms[i]
    }

    /// Whether the mean loss at zero is at most 1, which the iteration
    /// schedules assume.
    pub fn normalized(&self) -> bool {
        self.normalized
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    pub fn arity(&self) -> usize {
        self.data.arity()
    }

    /// `phi_i(X_i^T w)`
    pub fn loss_at(&self, i: usize, w: &[f64]) -> f64 {
        let scores = self.data.example(i).scores(w);
        self.loss.eval(self.data.label(i), &scores)
    }

    /// `phi_i*(-alpha_i)`
    pub fn conj_at(&self, i: usize, alpha_i: &[f64]) -> f64 {
        let neg: Vec<f64> = alpha_i.iter().map(|a| -a).collect();
        self.loss.conjugate(self.data.label(i), &neg)
    }

    fn check_dual_shape(&self, alpha: &DualMatrix) -> Result<()> {
        if alpha.k() != self.arity() || alpha.n() != self.n() {
            return Err(Error::Dimension(format!(
                "dual matrix is {}x{}, expected {}x{}",
                alpha.k(),
                alpha.n(),
                self.arity(),
                self.n()
            )));
        }
        Ok(())
    }

    pub fn primal_objective(&self, w: &[f64]) -> f64 {
        let n = self.n();
        let loss: f64 = (0..n).map(|i| self.loss_at(i, w)).sum::<f64>() / n as f64;
        loss + self.lambda * self.reg.primal_value(w)
    }

    /// `v = (lambda n)^{-1} sum_i X_i alpha_i`
    pub fn aggregate(&self, alpha: &DualMatrix) -> Result<Vec<f64>> {
        self.check_dual_shape(alpha)?;
        let mut v = vec![0.0; self.dim()];
        let scale = 1.0 / (self.lambda * self.n() as f64);
        for (i, ex) in self.data.examples().iter().enumerate() {
            ex.apply_into(alpha.col(i), scale, &mut v);
        }
        Ok(v)
    }

    pub fn dual_to_primal(&self, alpha: &DualMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
        let v = self.aggregate(alpha)?;
        let w = self.reg.conj_grad(&v);
        Ok((v, w))
    }

    pub fn dual_objective(&self, alpha: &DualMatrix) -> Result<f64> {
        let v = self.aggregate(alpha)?;
        let n = self.n();
        let mut acc = 0.0;
        for i in 0..n {
            let c = self.conj_at(i, alpha.col(i));
            if c == f64::INFINITY {
                return Err(Error::Domain { example: i });
            }
            acc -= c;
        }
        Ok(acc / n as f64 - self.lambda * self.reg.conj_value(&v))
    }

    /// `phi_i(X_i^T w) + phi_i*(-alpha_i) + w^T X_i alpha_i`
    pub fn example_gap(&self, i: usize, w: &[f64], alpha_i: &[f64]) -> f64 {
        let scores = self.data.example(i).scores(w);
        let inner: f64 = scores.iter().zip(alpha_i).map(|(s, a)| s * a).sum();
        self.loss.eval(self.data.label(i), &scores) + self.conj_at(i, alpha_i) + inner
    }

    /// Gap of the primal-dual pair `(w(alpha), alpha)`.
    pub fn duality_gap(&self, alpha: &DualMatrix) -> Result<GapReport> {
        let (_, w) = self.dual_to_primal(alpha)?;
        self.gap_at(&w, alpha)
    }

    /// `P(w) - D(alpha)` for an arbitrary primal point.
    pub fn gap_at(&self, w: &[f64], alpha: &DualMatrix) -> Result<GapReport> {
        let v = self.aggregate(alpha)?;
        let primal = self.primal_objective(w);
        let dual = self.dual_objective(alpha)?;
        let n = self.n();
        let examples =
            (0..n).map(|i| self.example_gap(i, w, alpha.col(i))).sum::<f64>() / n as f64;
        let wv: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        let reg = self.reg.primal_value(w) + self.reg.conj_value(&v) - wv;
        let report = GapReport {
            primal,
            dual,
            gap: primal - dual,
            decomposed: examples + self.lambda * reg,
        };
        if !report.consistent() {
            log::warn!(
                "duality gap {} disagrees with its Fenchel decomposition {}",
                report.gap,
                report.decomposed
            );
        }
        Ok(report)
    }
}
