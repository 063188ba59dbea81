//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use proxsdca::io::trace_csv;
use proxsdca::l1::{certify_l1, solve_l1_l2, solve_l1_linf, L1Config};
use proxsdca::reference::{brute_force_conjugate, l1_reference, expected_increase_check, Grid, OracleConfig};
use proxsdca::solver::schedule::{lipschitz_schedule, structured_schedule};
use proxsdca::solver::{self, Solver};
use proxsdca::structured::{train_structured, DecodingOracle, MulticlassOracle, StructuredConfig, StructuredTrainer};
use proxsdca::{
    CostMatrix, Dataset, DualMatrix, Loss, OutputMode, Problem, Regularizer, SolverConfig, SparseVec,
    UpdateOption,
};
use rand::Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn scalar_losses() -> Vec<Loss> {
    vec![
        Loss::Hinge,
        Loss::smoothed_hinge(1.0).unwrap(),
        Loss::Logistic,
        Loss::Squared,
    ]
}

fn data_for(loss: &Loss, seed: u64, n: usize, d: usize) -> Dataset {
    match loss {
        Loss::Squared => common::regression(seed, n, d),
        _ => common::binary(seed, n, d, 0.1),
    }
}

fn regularizers(d: usize) -> Vec<Regularizer> {
    vec![
        Regularizer::L2,
        Regularizer::l1l2(0.1).unwrap(),
        Regularizer::l1qnorm(0.1, d).unwrap(),
    ]
}

fn weak_duality_and_monotonicity() -> Outcome {
    let (n, d, seeds, epochs) = (200, 20, 10u64, 5u64);
    let mut combos = 0;
    let mut runs = 0;
    let mut worst_gap = f64::INFINITY;
    let mut worst_step = f64::INFINITY;
    for loss in scalar_losses() {
        for reg in regularizers(d) {
            for option in UpdateOption::ALL {
                if option.supports(&loss).is_err() {
                    continue;
                }
                combos += 1;
                for seed in 0..seeds {
                    let data = data_for(&loss, seed, n, d);
                    let problem = Problem::new(&data, loss.clone(), reg.clone(), 0.01).unwrap();
                    let mut cfg = SolverConfig::new(option, epochs * n as u64);
                    cfg.seed = seed;
                    let mut solver = Solver::new(&problem, cfg).unwrap();
                    worst_gap = worst_gap.min(solver.gap().unwrap().gap);
                    for t in 1..=epochs * n as u64 {
                        let step = solver.step().unwrap();
                        worst_step = worst_step.min(step.dual_increase);
                        if t % n as u64 == 0 {
                            worst_gap = worst_gap.min(solver.gap().unwrap().gap);
                        }
                    }
                    runs += 1;
                }
            }
        }
    }
    outcome(
        worst_gap >= -1e-9 && worst_step >= -1e-9,
        format!("{combos} combinations, {runs} runs; min gap {worst_gap:.3e}, min step increase {worst_step:.3e}"),
    )
}

fn smooth_rate() -> Outcome {
    const T: u64 = 15303;
    let mut good = 0;
    let mut gaps = Vec::new();
    for seed in 0..10 {
        let data = common::binary(100 + seed, 1000, 50, 0.1);
        let problem = Problem::new(&data, Loss::smoothed_hinge(1.0).unwrap(), Regularizer::L2, 0.01).unwrap();
        let mut cfg = SolverConfig::new(UpdateOption::SmoothFixed, T);
        cfg.seed = seed;
        let out = solver::run(&problem, cfg).unwrap();
        gaps.push(out.report.gap);
        if out.report.gap <= 1e-3 {
            good += 1;
        }
    }
    let worst = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    outcome(good >= 9, format!("T = {T}: {good}/10 seeds with gap <= 1e-3 (worst {worst:.3e})"))
}

fn lipschitz_rate() -> Outcome {
    let (n, d, lambda, eps) = (100, 20, 0.1, 0.1);
    let schedule = lipschitz_schedule(n, 1.0, 1.0, lambda, eps);
    let mut good = 0;
    let mut suboptimality = 0.0;
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..10u64 {
        let data = common::binary(200 + seed, n, d, 0.1);
        let problem = Problem::new(&data, Loss::Hinge, Regularizer::L2, lambda).unwrap();

        let mut cfg = SolverConfig::new(UpdateOption::UniformRadius, schedule.total);
        cfg.burn_in = schedule.burn_in;
        cfg.output = OutputMode::Random;
        cfg.seed = seed;
        cfg.radius = Some(1.0);
        let out = solver::run(&problem, cfg.clone()).unwrap();
        worst = worst.max(out.report.gap);
        if out.report.gap <= eps {
            good += 1;
        }

        let mut at_burn_in = Solver::new(&problem, cfg).unwrap();
        for _ in 0..schedule.burn_in {
            at_burn_in.step().unwrap();
        }
        let dual = at_burn_in.gap().unwrap().dual;

        let mut long = SolverConfig::new(UpdateOption::LineSearch, 100 * schedule.total);
        long.seed = seed + 1000;
        let reference = solver::run(&problem, long).unwrap();
        let best = reference
            .trace
            .checkpoints
            .iter()
            .map(|c| c.dual)
            .fold(reference.report.dual, f64::max);
        suboptimality += (best - dual).max(0.0) / 10.0;
    }
    outcome(
        good >= 9 && suboptimality <= eps / 2.0,
        format!(
            "(T0, T) = ({}, {}): {good}/10 outputs with gap <= {eps} (worst {worst:.3e}); mean dual sub-optimality at T0 {suboptimality:.3e}",
            schedule.burn_in, schedule.total
        ),
    )
}

/// A random point in the conjugate domain of `loss` at label `y`.
fn feasible_alpha(rng: &mut impl Rng, loss: &Loss, y: f64) -> f64 {
    match loss {
        Loss::Squared => 2.0 * rng.random::<f64>() - 1.0,
        Loss::Logistic => y * rng.random_range(0.01..0.99),
        _ => y * rng.random::<f64>(),
    }
}

fn per_step_bound() -> Outcome {
    let mut rng = common::rng(4);
    let mut checks = 0;
    let mut worst = f64::INFINITY;
    let losses = [
        Loss::Hinge,
        Loss::smoothed_hinge(1.0).unwrap(),
        Loss::smoothed_hinge(0.5).unwrap(),
        Loss::Logistic,
        Loss::Squared,
    ];
    for instance in 0..100u64 {
        let n = rng.random_range(2..=20);
        let d = rng.random_range(1..=5);
        let loss = losses[instance as usize % losses.len()].clone();
        let data = data_for(&loss, 400 + instance, n, d);
        let reg = if instance % 2 == 0 {
            Regularizer::L2
        } else {
            Regularizer::l1l2(rng.random_range(0.0..0.5)).unwrap()
        };
        let lambda = 10f64.powf(rng.random_range(-2.0..0.0));
        let problem = Problem::new(&data, loss.clone(), reg, lambda).unwrap();
        let alpha = if instance % 3 == 0 {
            DualMatrix::zeros(1, n)
        } else {
            let cols = (0..n).map(|i| vec![feasible_alpha(&mut rng, &loss, data.label(i))]).collect();
            DualMatrix::from_columns(1, cols).unwrap()
        };
        for k in 1..=10 {
            let s = k as f64 / 10.0;
            let (lhs, rhs) = expected_increase_check(&problem, &alpha, s).unwrap();
            worst = worst.min(lhs - rhs);
            checks += 1;
        }
    }
    outcome(
        worst >= -1e-9,
        format!("{checks} (instance, s) checks; min lhs - rhs {worst:.3e}"),
    )
}

fn oracles() -> Outcome {
    let grid = Grid::new(-50.0, 50.0, 1e-4);
    let mut worst_conj: f64 = 0.0;
    let losses = [
        Loss::Hinge,
        Loss::smoothed_hinge(1.0).unwrap(),
        Loss::smoothed_hinge(0.5).unwrap(),
        Loss::Logistic,
        Loss::Squared,
    ];
    for loss in &losses {
        for y in [-1.0, 1.0] {
            for k in 0..=10 {
                // yu in [-1, 0] for the classification losses
                let u = match loss {
                    Loss::Squared => -5.0 + k as f64,
                    Loss::Logistic => y * -(0.01 + 0.98 * k as f64 / 10.0),
                    _ => y * -(k as f64 / 10.0),
                };
                let exact = loss.conjugate_scalar(y, u);
                let brute = brute_force_conjugate(loss, y, u, &grid);
                worst_conj = worst_conj.max((exact - brute).abs());
            }
        }
    }
    let mut rng = common::rng(5);
    let mut worst_residual: f64 = 0.0;
    let mut cases = vec![(Regularizer::L2, 50), (Regularizer::l1l2(0.3).unwrap(), 50)];
    for d in [8, 100, 10000] {
        cases.push((Regularizer::l1qnorm(0.5, d).unwrap(), d));
    }
    for (reg, d) in &cases {
        for _ in 0..1000 {
            let scale = 10f64.powf(rng.random_range(-1.0..1.0));
            let v: Vec<f64> = (0..*d).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect();
            let w = reg.conj_grad(&v);
            worst_residual = worst_residual.max(reg.stationarity_residual(&v, &w));
        }
    }
    outcome(
        worst_conj <= 1e-3 && worst_residual <= 1e-8,
        format!("max conjugate error {worst_conj:.3e}; max stationarity residual {worst_residual:.3e}"),
    )
}

fn cross_option() -> Outcome {
    let data = Dataset::from_rows(vec![SparseVec::unit(1, 0, 1.0).unwrap()], vec![1.0]).unwrap();
    let problem = Problem::new(&data, Loss::Squared, Regularizer::L2, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    let mut seen = Vec::new();
    for option in [
        UpdateOption::Exact,
        UpdateOption::LineSearch,
        UpdateOption::ClosedForm,
        UpdateOption::SmoothFixed,
    ] {
        let mut solver = Solver::new(&problem, SolverConfig::new(option, 1)).unwrap();
        let delta = solver.step_at(0).unwrap().delta[0];
        worst = worst.max((delta - 0.5).abs());
        seen.push(format!("{}: {delta}", option.number()));
    }
    outcome(worst <= 1e-12, format!("{} (max discrepancy {worst:.1e})", seen.join(", ")))
}

fn l1_end_to_end() -> Outcome {
    let data = common::sparse_binary(7, 500, 200, 0.1, 10, 0.05);
    let loss = Loss::smoothed_hinge(1.0).unwrap();
    let (sigma, eps) = (0.05, 0.01);
    let reference = l1_reference(&data, &loss, sigma, &OracleConfig::default()).unwrap();
    let cfg = L1Config {
        seed: 7,
        ..L1Config::new(sigma, eps)
    };
    let l2 = solve_l1_l2(&data, &loss, &cfg).unwrap();
    let linf = solve_l1_linf(&data, &loss, &cfg).unwrap();
    let c2 = certify_l1(&data, &loss, sigma, &l2.w, &reference.w, eps);
    let cinf = certify_l1(&data, &loss, sigma, &linf.w, &reference.w, eps);
    outcome(
        c2.passed && cinf.passed,
        format!(
            "reference gap {:.1e}; l2 variant: lambda {:.3e}, {} iterations, excess {:.3e}; linf variant: lambda {:.3e}, {} iterations, excess {:.3e}",
            reference.gap.unwrap_or(f64::NAN),
            l2.lambda,
            l2.run.iterations,
            c2.difference,
            linf.lambda,
            linf.run.iterations,
            cinf.difference
        ),
    )
}

fn structured_equivalence() -> Outcome {
    let (n, d, k, lambda, eps) = (300, 50, 5, 0.01, 0.05);
    let data = common::multiclass(8, n, d, k);
    let cost = CostMatrix::zero_one(k).unwrap();
    let oracle = MulticlassOracle::new(&data, cost.clone()).unwrap();
    let radius = oracle.radius();

    let problem = Problem::new(&data, Loss::Multiclass(cost.clone()), Regularizer::L2, lambda).unwrap();
    let steps = 3 * n as u64;
    let mut cfg = SolverConfig::new(UpdateOption::UniformRadius, steps);
    cfg.seed = 8;
    cfg.radius = Some(radius);
    cfg.z_bound = Some(4.0);
    let mut generic = Solver::new(&problem, cfg).unwrap();
    let mut trainer = StructuredTrainer::new(&oracle, lambda, radius, 8).unwrap();
    let mut same_path = true;
    let mut bit_identical = 0;
    let mut max_ds: f64 = 0.0;
    for _ in 0..steps {
        let w = generic.state().w();
        let st = trainer.step();
        let i = st.index;
        let scores = data.example(i).scores(&w);
        let (j, _) = cost.augmented_argmax(data.label(i) as usize, &scores);
        let gs = generic.step_at(i).unwrap();
        let s = gs.s.unwrap_or(0.0);
        same_path &= j == st.label || st.s == 0.0 && s == 0.0;
        if s == st.s {
            bit_identical += 1;
        }
        max_ds = max_ds.max((s - st.s).abs());
    }
    let gw = generic.state().w();
    let max_dw = gw
        .iter()
        .zip(&trainer.state().w)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));

    let schedule = structured_schedule(n, radius, lambda, eps);
    let trained = train_structured(&oracle, &StructuredConfig::new(lambda, eps, 8)).unwrap();
    let equivalent = same_path && max_ds <= 1e-9 && max_dw <= 1e-9;
    outcome(
        equivalent && trained.reached_target && trained.iterations <= schedule.total,
        format!(
            "{steps} paired steps: same decoded path {same_path}, {bit_identical} bit-identical s, max |ds| {max_ds:.1e}, max |dw| {max_dw:.1e}; training gap {:.3e} after {} of {} scheduled iterations",
            trained.gap, trained.iterations, schedule.total
        ),
    )
}

fn strip_seconds(csv: &str) -> String {
    csv.lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
        .collect::<Vec<_>>()
        .join("\n")
}

fn determinism() -> Outcome {
    let mut identical = true;
    let data = common::binary(9, 200, 20, 0.1);
    for option in [UpdateOption::LineSearch, UpdateOption::ClosedForm, UpdateOption::UniformRadius] {
        let problem = Problem::new(&data, Loss::Hinge, Regularizer::l1l2(0.1).unwrap(), 0.01).unwrap();
        let traces: Vec<String> = (0..2)
            .map(|_| {
                let mut cfg = SolverConfig::new(option, 2000);
                cfg.seed = 99;
                cfg.gap_every = Some(50);
                cfg.burn_in = 1000;
                cfg.output = OutputMode::Average;
                strip_seconds(&trace_csv(&solver::run(&problem, cfg).unwrap().trace.checkpoints))
            })
            .collect();
        identical &= traces[0] == traces[1];
    }
    let mc = common::multiclass(9, 100, 10, 3);
    let oracle = MulticlassOracle::new(&mc, CostMatrix::zero_one(3).unwrap()).unwrap();
    let runs: Vec<String> = (0..2)
        .map(|_| {
            let mut cfg = StructuredConfig::new(0.05, 1e-3, 5);
            cfg.iterations = Some(3000);
            strip_seconds(&trace_csv(&train_structured(&oracle, &cfg).unwrap().trace.checkpoints))
        })
        .collect();
    identical &= runs[0] == runs[1];
    outcome(identical, "repeated seeded runs compared with the seconds column removed".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Outcome); 9] = [
        ("1 weak duality and monotonicity", Duration::from_secs(30), weak_duality_and_monotonicity),
        ("2 smooth rate", Duration::from_secs(5), smooth_rate),
        ("3 Lipschitz rate", Duration::from_secs(5), lipschitz_rate),
        ("4 per-step improvement bound", Duration::MAX, per_step_bound),
        ("5 conjugate and prox oracles", Duration::MAX, oracles),
        ("6 cross-option agreement", Duration::MAX, cross_option),
        ("7 l1 end-to-end", Duration::from_secs(60), l1_end_to_end),
        ("8 structured equivalence", Duration::from_secs(10), structured_equivalence),
        ("9 determinism", Duration::MAX, determinism),
    ];
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let passed = result.passed && in_time;
        if !passed {
            failed += 1;
        }
        let budget = if limit == Duration::MAX {
            String::new()
        } else {
            format!(" / {}s", limit.as_secs())
        };
        println!(
            "criterion {name}: {} [{:.2}s{budget}] {}",
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            result.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
