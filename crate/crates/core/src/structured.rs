//! Structured-output training with `O(d)` state per example.
//!
//! The structured hinge loss `max_j (delta(j, y) - w^T psi(x, y) + w^T psi(x, j))`
//! with `g = ||w||^2 / 2` is trained by dual coordinate ascent without storing
//! the dual matrix. Per example the trainer keeps `w_i = (lambda n)^{-1} X_i alpha_i`
//! and the dual contribution `D_i = -phi_i*(-alpha_i) >= 0`, which is all the
//! closed-form step with `||z||_1^2 <= 4` needs.

use std::borrow::Cow;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::CostMatrix;
use crate::model::{Dataset, REL_TOL};
use crate::solver::schedule::structured_schedule;
use crate::solver::{output_draw, Checkpoint, RunTrace, Sampler};
use crate::sparse::SparseVec;

/// Result of loss-augmented decoding for one example.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded<'o> {
    /// The maximizing structure `j`.
    pub label: usize,
    /// `psi(x_i, y_i)`
    pub truth_features: Cow<'o, SparseVec>,
    /// `psi(x_i, j)`
    pub predicted_features: Cow<'o, SparseVec>,
    /// `delta(j, y_i)`
    pub cost: f64,
    /// `delta(j, y_i) - w^T psi(x_i, y_i) + w^T psi(x_i, j)`, the loss at `w`.
    pub loss: f64,
}

/// Exact loss-augmented decoding over a fixed training set.
pub trait DecodingOracle {
    fn n(&self) -> usize;
    fn dim(&self) -> usize;
    /// An upper bound on `||psi(x_i, j)||_2` over all examples and structures.
    fn radius(&self) -> f64;
    fn decode(&self, i: usize, w: &[f64]) -> Decoded<'_>;
}

/// Enumerating oracle over explicit per-class feature columns.
#[derive(Debug, Clone)]
pub struct MulticlassOracle<'a> {
    data: &'a Dataset,
    cost: CostMatrix,
    radius: f64,
}

impl<'a> MulticlassOracle<'a> {
    /// `data` holds one column `psi(x_i, j)` per class and 0-based labels.
    pub fn new(data: &'a Dataset, cost: CostMatrix) -> Result<Self> {
        if data.arity() != cost.classes() {
            return Err(Error::Dimension(format!(
                "{} feature columns per example but {} classes in the cost matrix",
                data.arity(),
                cost.classes()
            )));
        }
        for (i, &y) in data.labels().iter().enumerate() {
            if !(y >= 0.0 && y.fract() == 0.0 && (y as usize) < cost.classes()) {
                return Err(Error::invalid(format!("example {i}: class label {y} out of range")));
            }
        }
        let radius = data
            .examples()
            .iter()
            .flat_map(|ex| ex.columns().iter().map(|c| c.norm2()))
            .fold(0.0, f64::max);
        Ok(MulticlassOracle { data, cost, radius })
    }

    pub fn cost(&self) -> &CostMatrix {
        &self.cost
    }
}

impl DecodingOracle for MulticlassOracle<'_> {
    fn n(&self) -> usize {
        self.data.n()
    }

    fn dim(&self) -> usize {
        self.data.dim()
    }

    fn radius(&self) -> f64 {
        self.radius
    }

    fn decode(&self, i: usize, w: &[f64]) -> Decoded<'_> {
        let block = self.data.example(i);
        let truth = self.data.label(i) as usize;
        let (label, loss) = self.cost.augmented_argmax(truth, &block.scores(w));
        Decoded {
            label,
            truth_features: Cow::Borrowed(block.column(truth)),
            predicted_features: Cow::Borrowed(block.column(label)),
            cost: self.cost.cost(label, truth),
            loss,
        }
    }
}

/// `w`, the per-example parts `w_i`, and the per-example dual terms `D_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredState {
    pub w: Vec<f64>,
    pub parts: Vec<SparseVec>,
    pub dual_terms: Vec<f64>,
}

impl StructuredState {
    pub fn zeros(n: usize, dim: usize) -> Self {
        StructuredState {
            w: vec![0.0; dim],
            parts: vec![SparseVec::zeros(dim); n],
            dual_terms: vec![0.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.parts.len()
    }

    /// `(1/n) sum_i D_i - (lambda/2) ||w||^2`
    pub fn dual_objective(&self, lambda: f64) -> f64 {
        maintained_dual(&self.dual_terms, &self.w, lambda)
    }

    /// Primal value at `w`, one decoding per example.
    pub fn primal_objective(&self, oracle: &dyn DecodingOracle, lambda: f64) -> f64 {
        structured_primal(oracle, &self.w, lambda)
    }

    /// Rebuilds `w` as the sum of its parts; returns the relative drift.
    pub fn resum(&mut self) -> f64 {
        let mut fresh = vec![0.0; self.w.len()];
        for part in &self.parts {
            part.axpy_into(1.0, &mut fresh);
        }
        let scale = fresh.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        let drift = self
            .w
            .iter()
            .zip(&fresh)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            / scale;
        self.w = fresh;
        drift
    }
}

/// Dual objective `(1/n) sum_i D_i - (lambda/2) ||w||^2` from the dual terms
/// and the matching `w`.
pub fn maintained_dual(dual_terms: &[f64], w: &[f64], lambda: f64) -> f64 {
    dual_terms.iter().sum::<f64>() / dual_terms.len() as f64 - 0.5 * lambda * norm_sq(w)
}

fn norm_sq(w: &[f64]) -> f64 {
    w.iter().map(|x| x * x).sum()
}

/// `(1/n) sum_i max_j (delta(j, y_i) - w^T psi_i(y_i) + w^T psi_i(j)) + (lambda/2) ||w||^2`
pub fn structured_primal(oracle: &dyn DecodingOracle, w: &[f64], lambda: f64) -> f64 {
    let n = oracle.n();
    (0..n).map(|i| oracle.decode(i, w).loss).sum::<f64>() / n as f64 + 0.5 * lambda * norm_sq(w)
}

/// What one structured step did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuredStep {
    pub index: usize,
    /// Decoded structure `j`.
    pub label: usize,
    pub s: f64,
    /// Loss of example `i` before the step.
    pub loss: f64,
}

/// One dual step at example `i`.
pub fn structured_step(
    state: &mut StructuredState,
    oracle: &dyn DecodingOracle,
    i: usize,
    lambda: f64,
    radius: f64,
) -> StructuredStep {
    let ln = lambda * state.n() as f64;
    let dec = oracle.decode(i, &state.w);
    let part = &state.parts[i];
    // per-example gap: phi_i(X_i^T w) + phi_i*(-alpha_i) + w^T X_i alpha_i
    let gap = dec.loss - state.dual_terms[i] + ln * part.dot(&state.w);
    let s = gap / (4.0 * (radius * radius / ln));
    let s = if s.is_nan() { 0.0 } else { s.clamp(0.0, 1.0) };
    if s > 0.0 {
        state.dual_terms[i] = (1.0 - s) * state.dual_terms[i] + s * dec.cost;
        let diff = dec.truth_features.linear_combination(1.0, &dec.predicted_features, -1.0);
        let updated = part.linear_combination(1.0 - s, &diff, s / ln);
        part.axpy_into(-1.0, &mut state.w);
        updated.axpy_into(1.0, &mut state.w);
        state.parts[i] = updated;
    }
    StructuredStep {
        index: i,
        label: dec.label,
        s,
        loss: dec.loss,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredConfig {
    pub lambda: f64,
    /// Target gap; also sets the default schedule.
    pub eps: f64,
    pub seed: u64,
    /// Overrides the scheduled total iteration count.
    pub iterations: Option<u64>,
    /// Overrides the scheduled burn-in.
    pub burn_in: Option<u64>,
    /// Iterations between gap measurements; one epoch when absent.
    pub gap_every: Option<u64>,
    /// Overrides the oracle's feature norm bound.
    pub radius: Option<f64>,
}

impl StructuredConfig {
    pub fn new(lambda: f64, eps: f64, seed: u64) -> Self {
        StructuredConfig {
            lambda,
            eps,
            seed,
            iterations: None,
            burn_in: None,
            gap_every: None,
            radius: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StructuredOutput {
    pub w: Vec<f64>,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub trace: RunTrace,
    pub iterations: u64,
    pub reached_target: bool,
    /// Dual terms `D_i` belonging to the returned `w`.
    pub dual_terms: Vec<f64>,
    /// The trainer state at the end of the run.
    pub state: StructuredState,
}

/// Sequential trainer driving [`structured_step`] with uniform sampling.
pub struct StructuredTrainer<'o> {
    oracle: &'o dyn DecodingOracle,
    lambda: f64,
    radius: f64,
    state: StructuredState,
    sampler: Sampler,
    t: u64,
}

impl<'o> StructuredTrainer<'o> {
    pub fn new(oracle: &'o dyn DecodingOracle, lambda: f64, radius: f64, seed: u64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
        }
        if !(radius.is_finite() && radius >= oracle.radius() * (1.0 - REL_TOL)) {
            return Err(Error::Config(format!(
                "R = {radius} is below the feature norm bound {}",
                oracle.radius()
            )));
        }
        Ok(StructuredTrainer {
            oracle,
            lambda,
            radius,
            state: StructuredState::zeros(oracle.n(), oracle.dim()),
            sampler: Sampler::new(seed, oracle.n()),
            t: 0,
        })
    }

    pub fn state(&self) -> &StructuredState {
        &self.state
    }

    pub fn step(&mut self) -> StructuredStep {
        let i = self.sampler.next_index();
        let step = structured_step(&mut self.state, self.oracle, i, self.lambda, self.radius);
        self.t += 1;
        if self.t % self.oracle.n() as u64 == 0 {
            let drift = self.state.resum();
            if drift > REL_TOL {
                log::debug!("weight drift {drift:.3e} at iteration {}", self.t);
            }
        }
        step
    }

    fn checkpoint(&self, start: &Instant) -> Checkpoint {
        let primal = self.state.primal_objective(self.oracle, self.lambda);
        let dual = self.state.dual_objective(self.lambda);
        Checkpoint {
            t: self.t,
            primal,
            dual,
            gap: primal - dual,
            seconds: start.elapsed().as_secs_f64(),
        }
    }
}

/// Trains with random output over the scheduled window, stopping early once a
/// measured gap is at most `config.eps`.
pub fn train_structured(oracle: &dyn DecodingOracle, config: &StructuredConfig) -> Result<StructuredOutput> {
    if !(config.eps.is_finite() && config.eps > 0.0) {
        return Err(Error::Config(format!("target gap {} must be positive", config.eps)));
    }
    let radius = config.radius.unwrap_or(oracle.radius());
    let n = oracle.n();
    let schedule = structured_schedule(n, radius, config.lambda, config.eps);
    let total = config.iterations.unwrap_or(schedule.total);
    let burn_in = config.burn_in.unwrap_or(schedule.burn_in.min(total.saturating_sub(1)));
    if total == 0 || burn_in >= total {
        return Err(Error::Config(format!("burn-in {burn_in} must be below {total} iterations")));
    }
    let cadence = config.gap_every.unwrap_or(n as u64).max(1);
    let mut trainer = StructuredTrainer::new(oracle, config.lambda, radius, config.seed)?;
    let start = Instant::now();
    let mut trace = RunTrace::default();

    let snapshot_at = output_draw(config.seed, burn_in, total);
    let mut snapshot = None;
    let first = trainer.checkpoint(&start);
    trace.record(first)?;
    let mut stopped = first.gap <= config.eps;
    while !stopped && trainer.t < total {
        if trainer.t == snapshot_at {
            snapshot = Some((trainer.state.w.clone(), trainer.state.dual_terms.clone()));
        }
        trainer.step();
        if trainer.t % cadence == 0 || trainer.t == total {
            let cp = trainer.checkpoint(&start);
            trace.record(cp)?;
            stopped = cp.gap <= config.eps;
        }
    }

    let (w, dual_terms, primal, dual) = match snapshot {
        Some((w, dual_terms)) if !stopped => {
            let primal = structured_primal(oracle, &w, config.lambda);
            let dual = maintained_dual(&dual_terms, &w, config.lambda);
            (w, dual_terms, primal, dual)
        }
        _ => {
            let cp = trace.last().copied().expect("at least one checkpoint");
            (trainer.state.w.clone(), trainer.state.dual_terms.clone(), cp.primal, cp.dual)
        }
    };
    let gap = primal - dual;
    Ok(StructuredOutput {
        w,
        primal,
        dual,
        gap,
        trace,
        iterations: trainer.t,
        reached_target: gap <= config.eps,
        dual_terms,
        state: trainer.state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::ExampleBlock;

    fn two_class() -> Dataset {
        let block = ExampleBlock::new(vec![
            SparseVec::unit(2, 0, 1.0).unwrap(),
            SparseVec::unit(2, 1, 1.0).unwrap(),
        ])
        .unwrap();
        Dataset::new(vec![block], vec![0.0]).unwrap()
    }

    #[test]
    fn oracle_examples() {
        let data = two_class();
        let oracle = MulticlassOracle::new(&data, CostMatrix::zero_one(2).unwrap()).unwrap();
        let dec = oracle.decode(0, &[0.0, 0.0]);
        assert_eq!((dec.label, dec.loss, dec.cost), (1, 1.0, 1.0));

        let zero = CostMatrix::new(vec![vec![0.0; 2]; 2]).unwrap();
        let oracle = MulticlassOracle::new(&data, zero).unwrap();
        let dec = oracle.decode(0, &[0.0, 0.0]);
        assert_eq!((dec.label, dec.loss), (0, 0.0));
    }

    #[test]
    fn three_class_decoding() {
        let x = SparseVec::unit(1, 0, 1.0).unwrap();
        let data = Dataset::class_blocked(&[x], vec![1], 3).unwrap();
        let oracle = MulticlassOracle::new(&data, CostMatrix::zero_one(3).unwrap()).unwrap();
        let dec = oracle.decode(0, &[0.2, 0.5, 0.1]);
        assert_eq!(dec.label, 0);
        assert!((dec.loss - 0.7).abs() < 1e-15);
    }

    #[test]
    fn single_step_example() {
        let data = two_class();
        let oracle = MulticlassOracle::new(&data, CostMatrix::zero_one(2).unwrap()).unwrap();
        let mut state = StructuredState::zeros(1, 2);
        let step = structured_step(&mut state, &oracle, 0, 1.0, 1.0);
        assert_eq!(step.s, 0.25);
        assert_eq!(state.dual_terms[0], 0.25);
        assert_eq!(state.w, vec![0.25, -0.25]);
        assert_eq!(state.parts[0].to_dense(), vec![0.25, -0.25]);
        // D = 0.25 - 0.5 * 0.125
        assert_eq!(state.dual_objective(1.0), 0.1875);
    }

    #[test]
    fn repeated_steps_increase_dual_until_optimal() {
        let data = two_class();
        let oracle = MulticlassOracle::new(&data, CostMatrix::zero_one(2).unwrap()).unwrap();
        let mut state = StructuredState::zeros(1, 2);
        let mut dual = state.dual_objective(1.0);
        for _ in 0..200 {
            let step = structured_step(&mut state, &oracle, 0, 1.0, 1.0);
            let next = state.dual_objective(1.0);
            assert!(next >= dual - 1e-15);
            if step.s == 0.0 {
                break;
            }
            dual = next;
        }
        assert!((state.w[0] - 0.5).abs() < 1e-6 && (state.w[1] + 0.5).abs() < 1e-6);
    }

    #[test]
    fn zero_gap_is_a_no_op() {
        let data = two_class();
        let zero = CostMatrix::new(vec![vec![0.0; 2]; 2]).unwrap();
        let oracle = MulticlassOracle::new(&data, zero).unwrap();
        let mut state = StructuredState::zeros(1, 2);
        let step = structured_step(&mut state, &oracle, 0, 1.0, 1.0);
        assert_eq!(step.s, 0.0);
        assert_eq!(state, StructuredState::zeros(1, 2));
    }

    #[test]
    fn single_example_training_reaches_target() {
        let data = two_class();
        let oracle = MulticlassOracle::new(&data, CostMatrix::zero_one(2).unwrap()).unwrap();
        let out = train_structured(&oracle, &StructuredConfig::new(1.0, 0.05, 3)).unwrap();
        assert!(out.reached_target);
        assert!(out.gap <= 0.05 && out.gap >= -1e-12);
    }

    #[test]
    fn training_is_deterministic() {
        let data = two_class();
        let oracle = MulticlassOracle::new(&data, CostMatrix::zero_one(2).unwrap()).unwrap();
        let mut cfg = StructuredConfig::new(0.5, 1e-4, 11);
        cfg.iterations = Some(50);
        cfg.burn_in = Some(10);
        let a = train_structured(&oracle, &cfg).unwrap();
        let b = train_structured(&oracle, &cfg).unwrap();
        assert_eq!(a.w, b.w);
    }
}
