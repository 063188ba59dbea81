//! The generic dual coordinate ascent engine.
//!
//! Each iteration picks an example uniformly at random, changes its dual
//! column by one of five update rules, and moves `v` and `w` accordingly.
//! Duality gaps are measured at a fixed cadence and can stop the run early.

mod sampler;
pub mod schedule;
mod state;
mod steps;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::Loss;
use crate::model::{DualMatrix, GapReport, Problem, REL_TOL};

pub use sampler::{output_draw, Sampler};
pub use state::DualState;
pub use steps::Proposal;

/// How the change of the chosen dual column is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UpdateOption {
    /// (I) Exact maximizer of the proximal surrogate. Scalar squared, hinge and
    /// smoothed hinge losses only.
    Exact,
    /// (II) Best step toward the negated subgradient, by a one-dimensional search.
    LineSearch,
    /// (III) Closed-form step from the per-example gap and `||X_i||`.
    ClosedForm,
    /// (IV) As (III) with `||X_i||` replaced by the global bound `R`, and
    /// optionally `||z||_D^2` by a configured upper bound.
    UniformRadius,
    /// (V) Fixed step `lambda n gamma / (R^2 + lambda n gamma)`; smooth losses only.
    SmoothFixed,
}

impl UpdateOption {
    pub const ALL: [UpdateOption; 5] = [
        UpdateOption::Exact,
        UpdateOption::LineSearch,
        UpdateOption::ClosedForm,
        UpdateOption::UniformRadius,
        UpdateOption::SmoothFixed,
    ];

    /// Options are numbered 1 to 5 on the command line and in model files.
    pub fn from_number(k: u8) -> Result<Self> {
        match k {
            1..=5 => Ok(Self::ALL[k as usize - 1]),
            _ => Err(Error::Config(format!("update option must be 1..=5, got {k}"))),
        }
    }

    pub fn number(self) -> u8 {
        Self::ALL.iter().position(|&o| o == self).unwrap() as u8 + 1
    }

    /// Whether this option can run on `loss`.
    pub fn supports(self, loss: &Loss) -> Result<()> {
        let reason = match self {
            UpdateOption::Exact
                if !matches!(loss, Loss::Squared | Loss::Hinge | Loss::SmoothedHinge { .. }) =>
            {
                "no closed-form maximizer for this loss"
            }
            UpdateOption::SmoothFixed if loss.smoothness().is_none() => "smooth losses only",
            _ => return Ok(()),
        };
        Err(Error::UnsupportedOption {
            option: self.number().to_string(),
            reason: reason.into(),
        })
    }
}

/// Which iterate a run returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputMode {
    /// The last iterate.
    Final,
    /// The mean of the iterates after the burn-in.
    Average,
    /// One iterate after the burn-in, chosen uniformly with the run's seed.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub option: UpdateOption,
    /// Maximum number of iterations `T`.
    pub iterations: u64,
    /// Iterations excluded from averaged or random output, `T0 < T`.
    pub burn_in: u64,
    pub output: OutputMode,
    pub seed: u64,
    /// Iterations between gap measurements; one epoch when absent.
    pub gap_every: Option<u64>,
    /// Stop as soon as a measured gap is at most this value.
    pub target_gap: Option<f64>,
    /// Bound `R` used by options IV and V; the problem's bound when absent.
    pub radius: Option<f64>,
    /// Upper bound replacing `||z||_D^2` in option IV.
    pub z_bound: Option<f64>,
}

impl SolverConfig {
    pub fn new(option: UpdateOption, iterations: u64) -> Self {
        SolverConfig {
            option,
            iterations,
            burn_in: 0,
            output: OutputMode::Final,
            seed: 0,
            gap_every: None,
            target_gap: None,
            radius: None,
            z_bound: None,
        }
    }

    pub fn validate(&self, problem: &Problem) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("at least one iteration is required".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "burn-in {} must be below the iteration count {}",
                self.burn_in, self.iterations
            )));
        }
        if self.gap_every == Some(0) {
            return Err(Error::Config("gap cadence must be at least 1".into()));
        }
        if let Some(eps) = self.target_gap {
            if !(eps.is_finite() && eps > 0.0) {
                return Err(Error::Config(format!("target gap {eps} must be positive")));
            }
        }
        if let Some(r) = self.radius {
            if !(r.is_finite() && r >= problem.radius() * (1.0 - REL_TOL)) {
                return Err(Error::Config(format!(
                    "R = {r} is below the largest example norm {}",
                    problem.radius()
                )));
            }
        }
        if let Some(b) = self.z_bound {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::Config(format!("step norm bound {b} must be positive")));
            }
        }
        self.option.supports(problem.loss())
    }
}

/// What one iteration did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    /// Iteration number, starting at 1.
    pub t: u64,
    pub index: usize,
    pub s: Option<f64>,
    pub delta: Vec<f64>,
    pub direction: Option<Vec<f64>>,
    /// `||u - alpha_i||_D^2`
    pub z_norm_sq: Option<f64>,
    /// Per-example gap before the step.
    pub example_gap: f64,
    /// Lower bound on the dual increase certified by the proximal surrogate.
    pub surrogate_gain: f64,
    /// Exact change of the dual objective.
    pub dual_increase: f64,
    /// `(||X_i||^2 - gamma (1 - s) lambda n / s) ||z||_D^2`, the summand of the
    /// second-order term in the per-step improvement bound.
    pub curvature_term: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: u64,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub checkpoints: Vec<Checkpoint>,
}

impl RunTrace {
    pub fn last(&self) -> Option<&Checkpoint> {
        self.checkpoints.last()
    }

    /// Appends a checkpoint, refusing a dual value that fell by more than
    /// rounding since the previous one.
    pub fn record(&mut self, cp: Checkpoint) -> Result<()> {
        if let Some(prev) = self.checkpoints.last() {
            let tol = REL_TOL * prev.dual.abs().max(1.0);
            if cp.dual < prev.dual - tol {
                return Err(Error::Trace {
                    iteration: cp.t,
                    previous: prev.dual,
                    current: cp.dual,
                });
            }
        }
        self.checkpoints.push(cp);
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub w: Vec<f64>,
    pub alpha: DualMatrix,
    /// Gap of the returned pair.
    pub report: GapReport,
    pub trace: RunTrace,
    pub iterations: u64,
    /// Whether the target gap was met; absent when no target was set.
    pub reached_target: Option<bool>,
}

/// A run in progress over a borrowed problem.
pub struct Solver<'p, 'a> {
    problem: &'p Problem<'a>,
    config: SolverConfig,
    state: DualState,
    sampler: Sampler,
    radius: f64,
    t: u64,
}

impl<'p, 'a> Solver<'p, 'a> {
    pub fn new(problem: &'p Problem<'a>, config: SolverConfig) -> Result<Self> {
        config.validate(problem)?;
        let radius = config.radius.unwrap_or(problem.radius());
        Ok(Solver {
            problem,
            state: DualState::zeros(problem),
            sampler: Sampler::new(config.seed, problem.n()),
            config,
            radius,
            t: 0,
        })
    }

    /// Starts from a given dual point instead of zero.
    pub fn with_alpha(mut self, alpha: DualMatrix) -> Result<Self> {
        self.state = DualState::from_alpha(self.problem, alpha)?;
        Ok(self)
    }

    pub fn state(&self) -> &DualState {
        &self.state
    }

    pub fn iteration(&self) -> u64 {
        self.t
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// What `option` would do at example `i`, without changing the state.
    pub fn propose(&self, i: usize, option: UpdateOption) -> Result<Proposal> {
        option.supports(self.problem.loss())?;
        let local = steps::Local::new(self.problem, &self.state, i);
        steps::propose(&local, option, self.radius, self.config.z_bound)
    }

    /// `(1/n)` times the proximal lower bound on the dual increase of `delta` at `i`.
    pub fn surrogate_gain(&self, i: usize, delta: &[f64]) -> f64 {
        let local = steps::Local::new(self.problem, &self.state, i);
        local.surrogate(delta) / self.problem.n() as f64
    }

    /// One iteration at a sampled example.
    pub fn step(&mut self) -> Result<StepDiagnostics> {
        let i = self.sampler.next_index();
        self.step_at(i)
    }

    /// One iteration at example `i` (does not advance the sampler).
    pub fn step_at(&mut self, i: usize) -> Result<StepDiagnostics> {
        let problem = self.problem;
        let n = problem.n() as f64;
        let local = steps::Local::new(problem, &self.state, i);
        let proposal = steps::propose(&local, self.config.option, self.radius, self.config.z_bound)?;
        let surrogate_gain = local.surrogate(&proposal.delta) / n;
        let conj_before = problem.conj_at(i, &local.alpha);
        drop(local);

        let conj_change = self.state.apply(problem, i, &proposal.delta);
        let conj_after = problem.conj_at(i, self.state.alpha().col(i));
        if conj_after == f64::INFINITY {
            return Err(Error::Domain { example: i });
        }
        self.t += 1;
        if self.t % problem.n() as u64 == 0 {
            let drift = self.state.refresh(problem)?;
            if drift > REL_TOL {
                log::debug!("aggregate drift {drift:.3e} at iteration {}", self.t);
            }
        }
        let gamma = problem.loss().conjugate_strong_convexity();
        let ln = problem.lambda() * n;
        let curvature_term = match (proposal.s, proposal.z_norm_sq) {
            (Some(s), Some(zn)) if s > 0.0 => {
                Some((problem.op_norm(i).powi(2) - gamma * (1.0 - s) * ln / s) * zn)
            }
            _ => None,
        };
        Ok(StepDiagnostics {
            t: self.t,
            index: i,
            s: proposal.s,
            delta: proposal.delta,
            direction: proposal.direction,
            z_norm_sq: proposal.z_norm_sq,
            example_gap: proposal.example_gap,
            surrogate_gain,
            dual_increase: (conj_before - conj_after) / n - problem.lambda() * conj_change,
            curvature_term,
        })
    }

    /// Gap of the current iterate.
    pub fn gap(&self) -> Result<GapReport> {
        self.problem.gap_at(&self.state.w(), self.state.alpha())
    }

    /// Runs to the configured iteration cap or target gap.
    pub fn run(mut self) -> Result<RunOutput> {
        let start = Instant::now();
        let n = self.problem.n();
        let cfg = self.config.clone();
        let cadence = cfg.gap_every.unwrap_or(n as u64);
        let mut trace = RunTrace::default();
        let checkpoint = |solver: &Self, trace: &mut RunTrace| -> Result<GapReport> {
            let report = solver.gap()?;
            trace.record(Checkpoint {
                t: solver.t,
                primal: report.primal,
                dual: report.dual,
                gap: report.gap,
                seconds: start.elapsed().as_secs_f64(),
            })?;
            Ok(report)
        };
        let hit = |report: &GapReport| cfg.target_gap.is_some_and(|eps| report.gap <= eps);

        let first = checkpoint(&self, &mut trace)?;
        if hit(&first) {
            return Ok(self.finish(first, trace, Some(true)));
        }

        let mut averager = (cfg.output == OutputMode::Average)
            .then(|| Averager::new(cfg.burn_in, self.problem.dim(), self.state.alpha()));
        let snapshot_at = (cfg.output == OutputMode::Random)
            .then(|| output_draw(cfg.seed, cfg.burn_in, cfg.iterations));
        let mut snapshot = None;

        while self.t < cfg.iterations {
            // the state before step t + 1 is iterate t
            if let Some(avg) = averager.as_mut() {
                if self.t >= cfg.burn_in {
                    avg.add_w(&self.state.w());
                }
            }
            if snapshot_at == Some(self.t) {
                snapshot = Some((self.state.w(), self.state.alpha().clone()));
            }
            let i = self.sampler.next_index();
            if let Some(avg) = averager.as_mut() {
                avg.credit(i, self.t + 1, self.state.alpha().col(i));
            }
            self.step_at(i)?;
            if self.t % cadence == 0 || self.t == cfg.iterations {
                let report = checkpoint(&self, &mut trace)?;
                if hit(&report) {
                    return Ok(self.finish(report, trace, Some(true)));
                }
            }
        }

        let (w, alpha) = match (averager, snapshot) {
            (Some(mut avg), _) => avg.finish(self.t, self.state.alpha()),
            (None, Some(snap)) => snap,
            _ => (self.state.w(), self.state.alpha().clone()),
        };
        let report = self.problem.gap_at(&w, &alpha)?;
        let reached = cfg.target_gap.map(|eps| report.gap <= eps);
        Ok(RunOutput {
            w,
            alpha,
            report,
            trace,
            iterations: self.t,
            reached_target: reached,
        })
    }

    fn finish(self, report: GapReport, trace: RunTrace, reached: Option<bool>) -> RunOutput {
        RunOutput {
            w: self.state.w(),
            alpha: self.state.alpha().clone(),
            report,
            trace,
            iterations: self.t,
            reached_target: reached,
        }
    }
}

/// Runs the solver from the zero dual point.
pub fn run(problem: &Problem, config: SolverConfig) -> Result<RunOutput> {
    Solver::new(problem, config)?.run()
}

/// Running means of `w` and `alpha` over the iterates `burn_in..T`. Dual
/// columns are credited lazily, when they are about to change.
struct Averager {
    burn_in: u64,
    w_sum: Vec<f64>,
    w_count: u64,
    alpha_sum: DualMatrix,
    since: Vec<u64>,
}

impl Averager {
    fn new(burn_in: u64, dim: usize, alpha: &DualMatrix) -> Self {
        Averager {
            burn_in,
            w_sum: vec![0.0; dim],
            w_count: 0,
            alpha_sum: DualMatrix::zeros(alpha.k(), alpha.n()),
            since: vec![burn_in; alpha.n()],
        }
    }

    fn add_w(&mut self, w: &[f64]) {
        for (s, x) in self.w_sum.iter_mut().zip(w) {
            *s += x;
        }
        self.w_count += 1;
    }

    /// Credits the current value of column `i` to the iterates before `upto`.
    fn credit(&mut self, i: usize, upto: u64, column: &[f64]) {
        let from = self.since[i].max(self.burn_in);
        if upto > from {
            let weight = (upto - from) as f64;
            for (s, a) in self.alpha_sum.col_mut(i).iter_mut().zip(column) {
                *s += weight * a;
            }
            self.since[i] = upto;
        }
    }

    fn finish(&mut self, end: u64, alpha: &DualMatrix) -> (Vec<f64>, DualMatrix) {
        for i in 0..alpha.n() {
            self.credit(i, end, alpha.col(i));
        }
        let count = (end - self.burn_in) as f64;
        let w = self.w_sum.iter().map(|x| x / self.w_count as f64).collect();
        let mut mean = self.alpha_sum.clone();
        for i in 0..mean.n() {
            for a in mean.col_mut(i) {
                *a /= count;
            }
        }
        (w, mean)
    }
}
