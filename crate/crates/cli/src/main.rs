use std::io::{self, Write as _};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ksys_cli::algorithms::{AlgorithmId, Params, DEFAULT_EPSILON};
use ksys_cli::experiment::{
    fitted_round_constant, run_experiment, summarize, write_outputs, ExperimentConfig, RunRecord, Source, Sweep,
};
use ksys_cli::generate::{generate_instance, Kind};
use ksys_cli::instance::{
    build_instance, read_json, AdaptiveBundle, AdaptiveSpec, ConstraintSpec, DataSource, InstanceBundle,
    InstanceSpec, ObjectiveSpec,
};
use ksys_core::adaptive::{adapt_random_greedy, adapt_random_greedy_average, adaptive_default_p, adaptive_ratio_bound};
use ksys_core::batched::{batched_default_p, batched_random_greedy, batched_ratio_bound, BatchedConfig};
use ksys_core::greedy::{
    accelerated_random_multi_greedy, random_multi_greedy, ratio_bound, standard_greedy, MultiGreedyConfig, Variant,
};
use ksys_core::objectives::SetFunction;
use ksys_core::rng::{derive_seed, stream, substream};
use ksys_core::systems::IndependenceSystem;
use ksys_core::verify::{
    adaptive_suite, exhaustive_max, exhaustive_optimal_policy, monte_carlo_ratio_check, ratio_suite, RatioCheckReport,
};

/// Randomized submodular maximization under k-system constraints.
#[derive(Parser)]
#[command(name = "ksys", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run algorithms over a sweep × trials grid.
    Run(RunArgs),
    /// Like `run`, with timing on, every applicable algorithm by default and
    /// a summary table on stdout.
    Bench(RunArgs),
    /// Check an algorithm's approximation ratio against exhaustive optima.
    Verify(VerifyArgs),
    /// Average adaptive random greedy over sampled realizations.
    Adaptive(AdaptiveArgs),
    /// Write a synthetic instance to a directory.
    Gen(GenArgs),
}

#[derive(Args, Clone)]
struct InstanceArgs {
    /// Instance spec (objective, constraint, optional adaptive model), as a
    /// JSON file or inline JSON.
    #[arg(long, conflicts_with_all = ["objective", "generate"])]
    instance: Option<String>,
    /// Objective spec, as a JSON file or inline JSON.
    #[arg(long, requires = "constraint")]
    objective: Option<String>,
    /// Constraint spec, as a JSON file or inline JSON.
    #[arg(long, requires = "objective")]
    constraint: Option<String>,
    /// Adaptive model spec to pair with --objective/--constraint.
    #[arg(long, requires = "objective")]
    adaptive_model: Option<String>,
    /// Generate an instance instead: movie, image, social or random-cut.
    #[arg(long, conflicts_with = "objective")]
    generate: Option<Kind>,
    /// Size of a generated instance.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Budget of a generated instance.
    #[arg(long)]
    cap: Option<usize>,
}

#[derive(Args, Clone)]
struct ParamArgs {
    #[arg(long)]
    l: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
}

impl ParamArgs {
    fn params(&self) -> Params {
        Params { l: self.l, p: self.p, epsilon: self.epsilon }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Algorithm ids, comma separated or repeated.
    #[arg(long, value_delimiter = ',')]
    algorithm: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trials per sweep point. Defaults to 20 when `arg` is selected and 1
    /// otherwise.
    #[arg(long)]
    trials: Option<usize>,
    /// `name=lo:hi:step` with name one of cap, n, p, epsilon, l.
    #[arg(long)]
    sweep: Option<Sweep>,
    /// Directory for runs.jsonl and summary.csv. Without it, runs go to
    /// stdout as JSON lines.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record wall-clock milliseconds per run.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// One of rmg, ramg, greedy, brg, arg.
    #[arg(long)]
    algorithm: String,
    #[command(flatten)]
    params: ParamArgs,
    /// Check a single small instance instead of a random suite.
    #[command(flatten)]
    instance: InstanceArgs,
    /// Number of random suite instances.
    #[arg(long, default_value_t = 10)]
    instances: usize,
    /// Values of k cycled through by the suite.
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    k: Vec<usize>,
    /// Use monotone objectives.
    #[arg(long)]
    monotone: bool,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct AdaptiveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    p: Option<f64>,
    /// Realizations to average over.
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also compute the optimal policy value (finite models only).
    #[arg(long)]
    exact: bool,
}

#[derive(Args)]
struct GenArgs {
    /// movie, image, social or random-cut.
    kind: Kind,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long)]
    cap: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn source_of(args: &InstanceArgs, seed: u64) -> Result<Source> {
    if let Some(kind) = args.generate {
        return Ok(Source::Generated { kind, n: args.n, cap: args.cap });
    }
    if let Some(inst) = &args.instance {
        let (spec, dir): (InstanceSpec, _) = read_json(inst)?;
        return Ok(Source::Spec { spec: Box::new(spec), dir });
    }
    match (&args.objective, &args.constraint) {
        (Some(o), Some(c)) => {
            let (objective, dir): (ObjectiveSpec, _) = read_json(o)?;
            let (constraint, _): (ConstraintSpec, _) = read_json(c)?;
            let adaptive = args.adaptive_model.as_deref().map(read_json::<AdaptiveSpec>).transpose()?.map(|(a, _)| a);
            Ok(Source::Spec { spec: Box::new(InstanceSpec { objective, constraint, adaptive, seed }), dir })
        }
        _ => bail!("give an instance with --instance, --objective and --constraint, or --generate"),
    }
}

fn bundle_of(source: &Source, seed: u64) -> Result<InstanceBundle> {
    match source {
        Source::Spec { spec, dir } => build_instance(spec, &DataSource::Dir(dir.clone())),
        Source::Generated { kind, n, cap } => generate_instance(*kind, *n, seed, *cap)?.bundle(),
    }
}

fn print_records(records: &[RunRecord]) -> Result<()> {
    let mut out = io::stdout().lock();
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn run(args: RunArgs, bench: bool) -> Result<()> {
    let source = source_of(&args.instance, args.seed)?;
    let mut algorithms: Vec<AlgorithmId> = args.algorithm.iter().map(|a| a.parse()).collect::<Result<_>>()?;
    if algorithms.is_empty() {
        if !bench {
            bail!("--algorithm is required");
        }
        let adaptive = bundle_of(&source, args.seed)?.adaptive.is_some();
        algorithms = [AlgorithmId::Ramg, AlgorithmId::Rmg, AlgorithmId::Greedy, AlgorithmId::Repg, AlgorithmId::Brg]
            .into_iter()
            .chain(adaptive.then_some(AlgorithmId::Arg))
            .collect();
    }
    let default_trials = if algorithms.contains(&AlgorithmId::Arg) { 20 } else { 1 };
    let cfg = ExperimentConfig {
        source,
        algorithms,
        params: args.params.params(),
        seed: args.seed,
        trials: args.trials.unwrap_or(default_trials),
        sweep: args.sweep,
        timing: args.timing || bench,
    };
    let records = run_experiment(&cfg)?;
    match &args.out {
        Some(dir) => {
            write_outputs(&records, dir)?;
            eprintln!("wrote {} runs to {}", records.len(), dir.join("runs.jsonl").display());
        }
        None if !bench => print_records(&records)?,
        None => {}
    }
    if bench {
        let mut csv = csv::Writer::from_writer(io::stdout().lock());
        for row in summarize(&records) {
            csv.serialize(row)?;
        }
        csv.flush()?;
        if let Some(c) = fitted_round_constant(&cfg, &records)? {
            eprintln!("brg round constant c = {c:.4}");
        }
    }
    Ok(())
}

type Runner<'a> = Box<dyn Fn(u64) -> ksys_core::Result<f64> + Sync + 'a>;

/// Per-seed value of `alg` and its guaranteed ratio.
fn offline_runner<'a>(
    alg: AlgorithmId,
    params: &Params,
    f: &'a dyn SetFunction,
    sys: &'a dyn IndependenceSystem,
    k: usize,
) -> Result<(Runner<'a>, f64)> {
    let eps = params.epsilon.unwrap_or(DEFAULT_EPSILON);
    let multi = {
        let mut cfg = MultiGreedyConfig::randomized(k).with_epsilon(eps);
        cfg.l = params.l.unwrap_or(cfg.l);
        cfg.p = params.p.unwrap_or(cfg.p);
        cfg
    };
    Ok(match alg {
        AlgorithmId::Rmg => (
            Box::new(move |s| Ok(random_multi_greedy(f, sys, &multi.with_seed(s))?.value)),
            ratio_bound(multi.l, multi.p, k, Variant::Plain)?,
        ),
        AlgorithmId::Ramg => (
            Box::new(move |s| Ok(accelerated_random_multi_greedy(f, sys, &multi.with_seed(s))?.value)),
            ratio_bound(multi.l, multi.p, k, Variant::Accelerated { epsilon: eps })?,
        ),
        AlgorithmId::Greedy => {
            (Box::new(move |_| Ok(standard_greedy(f, sys)?.value)), ratio_bound(1, 1.0, k, Variant::Monotone)?)
        }
        AlgorithmId::Brg => {
            let cfg = BatchedConfig::new(params.p.unwrap_or(batched_default_p(k)), eps);
            let bound = batched_ratio_bound(cfg.p, eps, k)?;
            (Box::new(move |s| Ok(batched_random_greedy(f, sys, &cfg.with_seed(s))?.value)), bound)
        }
        other => bail!("{other} has no ratio guarantee to verify"),
    })
}

fn verify(args: VerifyArgs) -> Result<()> {
    let alg: AlgorithmId = args.algorithm.parse()?;
    let params = args.params.params();
    let mut reports: Vec<(String, RatioCheckReport)> = Vec::new();
    let single = args.instance.instance.is_some() || args.instance.objective.is_some() || args.instance.generate.is_some();
    if alg == AlgorithmId::Arg {
        if single {
            bail!("verify arg runs on generated finite fixtures only");
        }
        for fx in adaptive_suite(args.instances, &args.k, args.monotone, args.seed)? {
            let k = fx.system.declared_k();
            let p = params.p.unwrap_or(adaptive_default_p(k));
            let bound = adaptive_ratio_bound(p, k)?;
            let report = monte_carlo_ratio_check(alg.name(), fx.optimum, bound, args.trials, args.seed, |s| {
                let phi = ksys_core::adaptive::AdaptiveModel::sample_realization(&fx.instance, &mut substream(s, &[0]));
                let mut coins = stream(derive_seed(s, &[1]));
                Ok(adapt_random_greedy(&fx.instance, &fx.system, p, &mut coins, &phi)?.value)
            })?;
            reports.push((fx.label, report));
        }
    } else if single {
        let source = source_of(&args.instance, args.seed)?;
        let bundle = bundle_of(&source, args.seed)?;
        let (f, sys) = (bundle.objective.as_ref(), bundle.system.as_ref());
        let optimum = exhaustive_max(f, sys)?.value;
        let (runner, bound) = offline_runner(alg, &params, f, sys, bundle.k())?;
        let report = monte_carlo_ratio_check(alg.name(), optimum, bound, args.trials, args.seed, runner)?;
        reports.push(("instance".into(), report));
    } else {
        for inst in ratio_suite(args.instances, &args.k, args.monotone, args.seed)? {
            let (runner, bound) = offline_runner(alg, &params, inst.objective.as_ref(), &inst.system, inst.k())?;
            let report = monte_carlo_ratio_check(alg.name(), inst.optimum.value, bound, args.trials, args.seed, runner)?;
            reports.push((inst.label, report));
        }
    }
    let mut out = io::stdout().lock();
    let mut failed = 0;
    for (label, report) in &reports {
        failed += usize::from(!report.pass);
        let mut value = serde_json::to_value(report)?;
        value["instance"] = label.clone().into();
        serde_json::to_writer(&mut out, &value)?;
        out.write_all(b"\n")?;
    }
    if failed > 0 {
        bail!("{failed} of {} ratio checks failed", reports.len());
    }
    Ok(())
}

fn adaptive(args: AdaptiveArgs) -> Result<()> {
    let source = source_of(&args.instance, args.seed)?;
    let bundle = bundle_of(&source, args.seed)?;
    let sys = bundle.system.as_ref();
    let p = args.p.unwrap_or(adaptive_default_p(bundle.k()));
    let ((mean, stderr), optimum) = match &bundle.adaptive {
        Some(AdaptiveBundle::Finite(inst)) => {
            let avg = adapt_random_greedy_average(inst, sys, p, args.trials, args.seed)?;
            (avg, args.exact.then(|| exhaustive_optimal_policy(inst, sys)).transpose()?)
        }
        Some(AdaptiveBundle::Social(model)) => {
            if args.exact {
                bail!("--exact needs a finite adaptive model");
            }
            (adapt_random_greedy_average(model, sys, p, args.trials, args.seed)?, None)
        }
        None => bail!("the instance has no adaptive model"),
    };
    let mut summary = serde_json::json!({
        "algorithm": AlgorithmId::Arg.name(),
        "p": p,
        "trials": args.trials,
        "seed": args.seed,
        "mean": mean,
        "stderr": stderr,
    });
    if let Some(opt) = optimum {
        summary["optimum"] = opt.into();
    }
    println!("{summary}");
    Ok(())
}

fn gen(args: GenArgs) -> Result<()> {
    let generated = generate_instance(args.kind, args.n, args.seed, args.cap)?;
    generated.bundle().context("generated instance does not build")?;
    generated.write(&args.out)?;
    eprintln!("wrote {} instance to {}", args.kind.name(), args.out.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args, false),
        Command::Bench(args) => run(args, true),
        Command::Verify(args) => verify(args),
        Command::Adaptive(args) => adaptive(args),
        Command::Gen(args) => gen(args),
    }
}

