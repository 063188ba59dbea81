use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use proxsdca::io::{
    default_seed, gap_report, parse_cost_matrix, read_svmlight, write_trace, FinalStats, ModelFile, ModelHeader,
    Payload, SparseWeights, SEED_ENV,
};
use proxsdca::l1::{self, L1Config, L1Variant};
use proxsdca::solver::schedule::{lipschitz_schedule, smooth_iterations};
use proxsdca::solver::{self, Checkpoint};
use proxsdca::structured::{train_structured, MulticlassOracle, StructuredConfig};
use proxsdca::{CostMatrix, Dataset, Error, Loss, OutputMode, Problem, Regularizer, SolverConfig, UpdateOption};

#[derive(Parser)]
#[command(name = "proxsdca", version, about = "Regularized loss minimization by proximal dual coordinate ascent")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it with its trace.
    Train(TrainArgs),
    /// Recompute P, D and the duality gap of a saved model.
    GapReport(GapArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Task {
    Erm,
    L1l2,
    L1linf,
    Struct,
}

impl Task {
    fn name(self) -> &'static str {
        match self {
            Task::Erm => "erm",
            Task::L1l2 => "l1l2",
            Task::L1linf => "l1linf",
            Task::Struct => "struct",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LossArg {
    Hinge,
    SmoothedHinge,
    Logistic,
    Squared,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RegArg {
    L2,
    L1l2,
    L1qnorm,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputArg {
    Final,
    Average,
    Random,
}

#[derive(Args)]
struct TrainArgs {
    /// Training data in svmlight format.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "erm")]
    task: Task,
    #[arg(long, value_enum, default_value = "hinge")]
    loss: LossArg,
    /// Smoothing parameter of the smoothed hinge loss.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Update rule, 1 to 5.
    #[arg(long, default_value_t = 3)]
    option: u8,
    #[arg(long)]
    lambda: Option<f64>,
    /// Regularizer of the erm task.
    #[arg(long, value_enum, default_value = "l2")]
    regularizer: RegArg,
    /// l1 weight inside the erm regularizer.
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
    /// l1 weight of the l1l2 and l1linf tasks.
    #[arg(long)]
    sigma: Option<f64>,
    /// Target duality gap (the l1 tasks stop at half of it).
    #[arg(long)]
    eps: Option<f64>,
    /// Norm bound on the l1 minimizer; 1/sigma by default.
    #[arg(long = "B")]
    b: Option<f64>,
    /// Seed; falls back to the PROXSDCA_SEED environment variable, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Iteration cap.
    #[arg(long = "T")]
    t: Option<u64>,
    /// Burn-in before averaged or random output.
    #[arg(long = "T0")]
    t0: Option<u64>,
    #[arg(long, value_enum, default_value = "final")]
    output: OutputArg,
    /// Iterations between gap checkpoints; one epoch by default.
    #[arg(long)]
    gap_every: Option<u64>,
    /// Bound R on the example norms; computed from the data by default.
    #[arg(long = "R")]
    radius: Option<f64>,
    /// Feature dimension; the largest index in the data by default.
    #[arg(long)]
    dim: Option<usize>,
    /// Number of classes of the struct task; the largest label by default.
    #[arg(long)]
    classes: Option<usize>,
    /// Cost matrix of the struct task, one row per true label; 0/1 cost by default.
    #[arg(long)]
    cost_matrix: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct GapArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

/// A finished training run, ready to be written.
struct Trained {
    model: ModelFile,
    trace: Vec<Checkpoint>,
    reached: Option<bool>,
}

fn usage(message: impl Into<String>) -> Error {
    Error::Config(message.into())
}

fn build_loss(args: &TrainArgs) -> Result<Loss, Error> {
    match args.loss {
        LossArg::Hinge => Ok(Loss::Hinge),
        LossArg::SmoothedHinge => Loss::smoothed_hinge(args.gamma),
        LossArg::Logistic => Ok(Loss::Logistic),
        LossArg::Squared => Ok(Loss::Squared),
    }
}

fn require(value: Option<f64>, flag: &str, task: Task) -> Result<f64, Error> {
    value.ok_or_else(|| usage(format!("--{flag} is required for the {} task", task.name())))
}

fn option_arg(args: &TrainArgs, loss: &Loss) -> Result<UpdateOption, Error> {
    let option = UpdateOption::from_number(args.option)?;
    if let Err(Error::UnsupportedOption { reason, .. }) = option.supports(loss) {
        return Err(usage(format!("--option {} with the {} loss: {reason}", args.option, loss.name())));
    }
    Ok(option)
}

fn final_stats(primal: f64, dual: f64, iterations: u64) -> FinalStats {
    FinalStats {
        primal,
        dual,
        gap: primal - dual,
        iterations,
    }
}

fn train_erm(args: &TrainArgs, data: &Dataset, seed: u64) -> Result<Trained, Error> {
    let loss = build_loss(args)?;
    let option = option_arg(args, &loss)?;
    let lambda = require(args.lambda, "lambda", Task::Erm)?;
    let reg = match args.regularizer {
        RegArg::L2 => Regularizer::L2,
        RegArg::L1l2 => Regularizer::l1l2(args.threshold)?,
        RegArg::L1qnorm => Regularizer::l1qnorm(args.threshold, data.dim())?,
    };
    let mut problem = Problem::new(data, loss.clone(), reg.clone(), lambda)?;
    if let Some(r) = args.radius {
        problem = problem.with_radius(r)?;
    }
    let (n, radius) = (data.n(), problem.radius());
    let (total, scheduled_burn_in) = match (args.t, args.eps) {
        (Some(t), _) => (t, None),
        (None, Some(eps)) => match (loss.smoothness(), loss.lipschitz()) {
            (Some(gamma), _) => (smooth_iterations(n, radius, lambda, gamma, eps), None),
            (None, Some(l)) => {
                let s = lipschitz_schedule(n, radius, l, lambda, eps);
                (s.total, Some(s.burn_in))
            }
            (None, None) => return Err(usage("loss has no rate schedule; pass --T")),
        },
        (None, None) => return Err(usage("pass --T or --eps")),
    };
    let output = match args.output {
        OutputArg::Final => OutputMode::Final,
        OutputArg::Average => OutputMode::Average,
        OutputArg::Random => OutputMode::Random,
    };
    let mut cfg = SolverConfig::new(option, total);
    cfg.seed = seed;
    cfg.output = output;
    cfg.gap_every = args.gap_every;
    cfg.radius = args.radius;
    if output != OutputMode::Final {
        cfg.burn_in = args.t0.or(scheduled_burn_in).unwrap_or(total / 2);
        cfg.target_gap = None;
    } else {
        cfg.target_gap = args.eps;
    }
    info!("lambda = {lambda}, R = {radius}, T = {total}, T0 = {}", cfg.burn_in);
    let out = solver::run(&problem, cfg)?;
    let mut header = ModelHeader::new("erm", data.dim(), 1, loss, reg, lambda);
    header.seed = seed;
    header.option = Some(option.number());
    let reached = args.eps.map(|eps| out.report.gap <= eps);
    Ok(Trained {
        model: ModelFile {
            header,
            weights: SparseWeights::from_dense(&out.w),
            payload: Payload::Dual {
                k: 1,
                n,
                alpha: out.alpha.as_slice().to_vec(),
            },
            final_stats: final_stats(out.report.primal, out.report.dual, out.iterations),
        },
        trace: out.trace.checkpoints,
        reached,
    })
}

fn train_l1(args: &TrainArgs, data: &Dataset, seed: u64, variant: L1Variant) -> Result<Trained, Error> {
    let task = if variant == L1Variant::L2Instances { Task::L1l2 } else { Task::L1linf };
    let loss = build_loss(args)?;
    let option = option_arg(args, &loss)?;
    let sigma = require(args.sigma, "sigma", task)?;
    let eps = require(args.eps, "eps", task)?;
    let cfg = L1Config {
        b: args.b,
        option,
        seed,
        radius: args.radius,
        max_iterations: args.t,
        gap_every: args.gap_every,
        ..L1Config::new(sigma, eps)
    };
    let lambda = cfg.lambda(variant, data.dim())?;
    let solution = l1::solve(data, &loss, &cfg, variant)?;
    let reg = cfg.regularizer(variant, data.dim())?;
    let mut header = ModelHeader::new(task.name(), data.dim(), 1, loss, reg, lambda);
    header.sigma = Some(sigma);
    header.seed = seed;
    header.option = Some(option.number());
    let run = solution.run;
    Ok(Trained {
        model: ModelFile {
            header,
            weights: SparseWeights::from_dense(&run.w),
            payload: Payload::Dual {
                k: 1,
                n: data.n(),
                alpha: run.alpha.as_slice().to_vec(),
            },
            final_stats: final_stats(run.report.primal, run.report.dual, run.iterations),
        },
        trace: run.trace.checkpoints,
        reached: run.reached_target,
    })
}

fn load_cost(path: Option<&Path>, classes: usize) -> Result<CostMatrix, Error> {
    let cost = match path {
        Some(p) => parse_cost_matrix(BufReader::new(File::open(p)?))?,
        None => CostMatrix::zero_one(classes)?,
    };
    if cost.classes() != classes {
        return Err(usage(format!(
            "cost matrix has {} classes, data has {classes}",
            cost.classes()
        )));
    }
    Ok(cost)
}

fn train_struct(args: &TrainArgs, seed: u64) -> Result<Trained, Error> {
    let raw = read_svmlight(&args.data, args.dim)?;
    let (_, classes) = raw.multiclass_labels(args.classes)?;
    let data = raw.into_multiclass(Some(classes))?;
    let cost = load_cost(args.cost_matrix.as_deref(), classes)?;
    let lambda = require(args.lambda, "lambda", Task::Struct)?;
    let eps = require(args.eps, "eps", Task::Struct)?;
    let oracle = MulticlassOracle::new(&data, cost.clone())?;
    let cfg = StructuredConfig {
        iterations: args.t,
        burn_in: args.t0,
        gap_every: args.gap_every,
        radius: args.radius,
        ..StructuredConfig::new(lambda, eps, seed)
    };
    info!("lambda = {lambda}, {classes} classes, {} examples", data.n());
    let out = train_structured(&oracle, &cfg)?;
    let mut header = ModelHeader::new("struct", data.dim(), classes, Loss::Multiclass(cost), Regularizer::L2, lambda);
    header.seed = seed;
    Ok(Trained {
        model: ModelFile {
            header,
            weights: SparseWeights::from_dense(&out.w),
            payload: Payload::Structured {
                dual_terms: out.dual_terms,
            },
            final_stats: final_stats(out.primal, out.dual, out.iterations),
        },
        trace: out.trace.checkpoints,
        reached: Some(out.reached_target),
    })
}

fn train(args: &TrainArgs) -> Result<ExitCode, Error> {
    let seed = match args.seed {
        Some(s) => s,
        None => default_seed()?,
    };
    let trained = match args.task {
        Task::Struct => train_struct(args, seed)?,
        task => {
            let data = read_svmlight(&args.data, args.dim)?.into_binary()?;
            match task {
                Task::Erm => train_erm(args, &data, seed)?,
                Task::L1l2 => train_l1(args, &data, seed, L1Variant::L2Instances)?,
                _ => train_l1(args, &data, seed, L1Variant::LinfInstances)?,
            }
        }
    };
    trained.model.save(&args.out)?;
    if let Some(path) = &args.trace {
        write_trace(path, &trained.trace)?;
    }
    let s = &trained.model.final_stats;
    println!("P = {}", s.primal);
    println!("D = {}", s.dual);
    println!("gap = {}", s.gap);
    println!("T = {}", s.iterations);
    Ok(match trained.reached {
        Some(false) => {
            warn!("iteration cap reached before the target gap");
            ExitCode::from(2)
        }
        _ => ExitCode::SUCCESS,
    })
}

fn report(args: &GapArgs) -> Result<ExitCode, Error> {
    let model = ModelFile::load(&args.model)?;
    let raw = read_svmlight(&args.data, None)?;
    let data = match &model.header.loss {
        Loss::Multiclass(_) => {
            let classes = model.header.classes;
            let d = model.header.dim / classes;
            read_svmlight(&args.data, Some(d))?.into_multiclass(Some(classes))?
        }
        _ => read_svmlight(&args.data, Some(model.header.dim.max(raw.dim)))?.into_binary()?,
    };
    let cert = gap_report(&model, &data)?;
    println!("P = {}", cert.primal);
    println!("D = {}", cert.dual);
    println!("gap = {}", cert.gap);
    if cert.structured {
        println!("dual rebuilt from stored per-example dual terms");
    }
    println!(
        "stored: P = {}, D = {}, gap = {}, T = {}",
        cert.stored.primal, cert.stored.dual, cert.stored.gap, cert.stored.iterations
    );
    if !cert.consistent() {
        println!("integrity warning: stored values differ from recomputed ones by {:e}", cert.mismatch);
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Train(args) => train(args),
        Command::GapReport(args) => report(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Config(_)) && std::env::var_os(SEED_ENV).is_some() {
                eprintln!("note: {SEED_ENV} is set");
            }
            ExitCode::from(1)
        }
    }
}
