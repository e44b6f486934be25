use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use dpquery_core::accountant::{self, Accountant, PrivacyReport, RunParams};
use dpquery_core::data::{self, BiasVector, FeatureMap, SchemaSpec};
use dpquery_core::driver::{self, RunConfig, RunMode, RunSummary};
use dpquery_core::model::{Database, QueryClass, QueryKind};
use dpquery_core::queries::{self, WorkloadSpec};
use dpquery_core::solver::{FreePolicy, SolverConfig, SolverMode};

const RUN_HELP: &str = "\
Parameter heuristics:
  sparse data (few 1 bits): larger step size, --eta 1.5 to 2.0, and --samples close to d
  dense data: --eta around 0.4 with --free random
  real data sets with tens of thousands of records: --eta 2.0 --samples 1000 is a good start

Theory mode derives T, eta and s from the target accuracy (--alpha) and failure
probability (--beta). Budget mode picks the largest T whose privacy cost under
--accountant fits in (--epsilon, --delta) and prints it before running.";

#[derive(Parser)]
#[command(name = "dpquery", version, about = "Differentially private release of 3-way marginal and parity queries")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
    /// Main output file; stdout when omitted and the command allows it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,
    /// Print errors to stderr as JSON.
    #[arg(long, global = true)]
    json_errors: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate bias-model synthetic data (CSV plus bias vector JSON).
    SynthData(SynthArgs),
    /// Discretize a CSV file into binary features.
    Ingest(IngestArgs),
    /// Generate a workload of positive queries.
    GenQueries(GenQueriesArgs),
    /// Produce a synthetic database.
    #[command(after_long_help = RUN_HELP)]
    Run(RunArgs),
    /// Measure errors of a synthetic database and of baselines.
    Eval(EvalArgs),
    /// Privacy cost of a run, or the number of rounds a budget allows.
    Accountant(AccountantArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    d: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    /// Bias vector output; defaults to `<out>.bias.json`.
    #[arg(long)]
    bias_out: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    /// Feature map output; defaults to `<out>.features.json`.
    #[arg(long)]
    features_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Marginal,
    Parity,
}

impl From<KindArg> for QueryKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Marginal => QueryKind::Marginal,
            KindArg::Parity => QueryKind::Parity,
        }
    }
}

#[derive(Args)]
struct GenQueriesArgs {
    /// Take d from this database.
    #[arg(long, conflicts_with = "d", required_unless_present = "d")]
    db: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    d: Option<u64>,
    #[arg(long, value_enum, default_value = "marginal")]
    kind: KindArg,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    count: u64,
    /// Skip triples with two features from the same source column.
    #[arg(long, requires = "features")]
    sensible: bool,
    /// Feature map JSON written by `ingest`.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Allow negated literals inside marginals (e.g. `x1 AND NOT x4 AND x7`).
    #[arg(long)]
    literals: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Theory,
    Manual,
    Budget,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Exact,
    Local,
}

#[derive(Clone, Copy, ValueEnum)]
enum FreeArg {
    Zeros,
    Ones,
    Random,
    Bias,
}

#[derive(Clone, Copy, ValueEnum)]
enum AccountantArg {
    Pure,
    Approx,
    Hetero,
}

impl From<AccountantArg> for Accountant {
    fn from(a: AccountantArg) -> Self {
        match a {
            AccountantArg::Pure => Accountant::Pure,
            AccountantArg::Approx => Accountant::Approx,
            AccountantArg::Hetero => Accountant::Hetero,
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, value_enum, default_value = "local")]
    solver: SolverArg,
    /// Per-round solver time limit in milliseconds.
    #[arg(long, default_value_t = 20_000)]
    timeout_ms: u64,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 10_000)]
    max_flips: usize,
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    /// How to set attributes no sampled query mentions.
    #[arg(long = "free", value_enum, default_value = "zeros")]
    free: FreeArg,
    /// Bias vector JSON for `--free bias`.
    #[arg(long)]
    bias: Option<PathBuf>,
    #[arg(long, default_value_t = 24)]
    exact_dim_limit: usize,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig> {
        let bias = match &self.bias {
            Some(p) => Some(data::read_json::<BiasVector>(p)?),
            None => None,
        };
        let cfg = SolverConfig {
            mode: match self.solver {
                SolverArg::Exact => SolverMode::Exact,
                SolverArg::Local => SolverMode::Local,
            },
            exact_dim_limit: self.exact_dim_limit,
            timeout: Duration::from_millis(self.timeout_ms),
            restarts: self.restarts,
            max_flips: self.max_flips,
            noise: self.noise,
            free_policy: match self.free {
                FreeArg::Zeros => FreePolicy::Zeros,
                FreeArg::Ones => FreePolicy::Ones,
                FreeArg::Random => FreePolicy::Random,
                FreeArg::Bias => FreePolicy::Bias,
            },
            bias,
            seed: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct BudgetArgs {
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    #[arg(long)]
    eta: Option<f64>,
    /// Queries sampled per round (s).
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long, value_enum, default_value = "hetero")]
    accountant: AccountantArg,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    db: PathBuf,
    /// Workload file of positive queries.
    #[arg(long)]
    queries: PathBuf,
    #[arg(long, value_enum, default_value = "budget")]
    mode: ModeArg,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Number of rounds (T) in manual mode.
    #[arg(long)]
    rounds: Option<u64>,
    #[command(flatten)]
    budget: BudgetArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Report errors on negated queries too.
    #[arg(long)]
    include_negations: bool,
    /// Synthetic database output (CSV).
    #[arg(long)]
    out_synth: Option<PathBuf>,
    /// Results JSON; falls back to `--out`, then stdout.
    #[arg(long)]
    out_json: Option<PathBuf>,
    /// Per-round trace as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// With `--trace`, also write the k heaviest queries of each round.
    #[arg(long, requires = "trace")]
    dump_weights: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    db: PathBuf,
    #[arg(long)]
    synth: Option<PathBuf>,
    #[arg(long)]
    queries: PathBuf,
    /// Comma-separated subset of zeros,uniform,laplace.
    #[arg(long, value_delimiter = ',')]
    baselines: Vec<String>,
    /// Privacy parameter for the Laplace baseline.
    #[arg(long = "laplace-epsilon", default_value_t = 1.0)]
    laplace_epsilon: f64,
    /// Run budget mode for each of these ε (comma-separated) and write CSV.
    #[arg(long, value_delimiter = ',')]
    sweep: Vec<f64>,
    /// Seeds averaged per ε in a sweep; defaults to `--seed`.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Per-seed sweep results as JSON.
    #[arg(long)]
    sweep_json: Option<PathBuf>,
    #[command(flatten)]
    budget: BudgetArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    include_negations: bool,
}

#[derive(Args)]
struct AccountantArgs {
    #[arg(long = "T")]
    rounds: Option<u64>,
    #[arg(long = "s")]
    samples: u64,
    #[arg(long)]
    eta: f64,
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 1e-3)]
    delta: f64,
    /// Budget to invert with `--invert`.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Report the largest T that fits in `--epsilon`.
    #[arg(long, requires = "epsilon")]
    invert: bool,
    #[arg(long, value_enum, default_value = "hetero")]
    accountant: AccountantArg,
}

fn check_writable(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        bail!("{} already exists (use --force to overwrite)", path.display());
    }
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn emit(out: Option<&Path>, text: &str, force: bool) -> Result<()> {
    match out {
        Some(p) => {
            check_writable(p, force)?;
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json_text<T: serde::Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn load_class(db: &Database, path: &Path) -> Result<QueryClass> {
    let workload = queries::read_workload(path)?;
    let mut class = queries::close_under_negation(db.d(), &workload)?;
    queries::evaluate_all(&mut class, db)?;
    Ok(class)
}

fn need<T>(value: Option<T>, flag: &str, mode: &str) -> Result<T> {
    value.with_context(|| format!("{mode} mode needs --{flag}"))
}

fn synth_data(cli: &Cli, args: &SynthArgs) -> Result<()> {
    let out = cli.out.as_deref().context("synth-data needs --out")?;
    let bias_out = args.bias_out.clone().unwrap_or_else(|| with_suffix(out, ".bias.json"));
    check_writable(out, cli.force)?;
    check_writable(&bias_out, cli.force)?;
    let (db, bias) = data::generate_synthetic(args.d as usize, args.n as usize, cli.seed)?;
    data::write_database(&db, out)?;
    data::write_json(&bias, &bias_out)?;
    Ok(())
}

fn ingest(cli: &Cli, args: &IngestArgs) -> Result<()> {
    let out = cli.out.as_deref().context("ingest needs --out")?;
    let map_out = args.features_out.clone().unwrap_or_else(|| with_suffix(out, ".features.json"));
    check_writable(out, cli.force)?;
    check_writable(&map_out, cli.force)?;
    let schema: SchemaSpec = data::read_json(&args.schema)?;
    let (db, map) = data::ingest_csv(&args.csv, &schema)?;
    data::write_database(&db, out)?;
    data::write_json(&map, &map_out)?;
    eprintln!("ingested {} records into {} binary features", db.n(), db.d());
    Ok(())
}

fn gen_queries(cli: &Cli, args: &GenQueriesArgs) -> Result<()> {
    let d = match (&args.db, args.d) {
        (Some(p), _) => data::read_database(p)?.d(),
        (None, Some(d)) => d as usize,
        (None, None) => bail!("gen-queries needs --db or --d"),
    };
    let map = match &args.features {
        Some(p) => Some(data::read_json::<FeatureMap>(p)?),
        None => None,
    };
    let mut spec = WorkloadSpec::new(args.kind.into(), args.count as usize, cli.seed);
    spec.sensible = args.sensible;
    spec.literals = args.literals;
    let workload = queries::generate_workload(&spec, d, map.as_ref())?;
    emit(cli.out.as_deref(), &queries::format_workload(&workload), cli.force)
}

fn run_mode(args: &RunArgs) -> Result<RunMode> {
    Ok(match args.mode {
        ModeArg::Theory => RunMode::Theory {
            alpha: need(args.alpha, "alpha", "theory")?,
            beta: need(args.beta, "beta", "theory")?,
        },
        ModeArg::Manual => RunMode::Manual {
            rounds: need(args.rounds, "rounds", "manual")?,
            samples: need(args.budget.samples, "samples", "manual")?,
            eta: need(args.budget.eta, "eta", "manual")?,
        },
        ModeArg::Budget => budget_mode(&args.budget, None)?,
    })
}

fn budget_mode(b: &BudgetArgs, epsilon: Option<f64>) -> Result<RunMode> {
    Ok(RunMode::Budget {
        epsilon: match epsilon {
            Some(e) => e,
            None => need(b.epsilon, "epsilon", "budget")?,
        },
        delta: b.delta,
        eta: need(b.eta, "eta", "budget")?,
        samples: need(b.samples, "samples", "budget")?,
        accountant: b.accountant.into(),
    })
}

fn run(cli: &Cli, args: &RunArgs) -> Result<()> {
    let json_out = args.out_json.as_deref().or(cli.out.as_deref());
    for p in [args.out_synth.as_deref(), json_out, args.trace.as_deref()].into_iter().flatten() {
        check_writable(p, cli.force)?;
    }
    let mut config = RunConfig::new(run_mode(args)?, args.solver.config()?, cli.seed);
    config.positive_only = !args.include_negations;
    config.report_delta = args.budget.delta;
    config.report_accountant = args.budget.accountant.into();
    config.dump_top_k = args.dump_weights;

    let start = Instant::now();
    let db = data::read_database(&args.db)?;
    let class = load_class(&db, &args.queries)?;
    let schedule = driver::resolve_schedule(&config, class.len(), db.d(), db.n())?;
    eprintln!(
        "running T={} rounds with s={} samples, eta={}",
        schedule.rounds, schedule.samples, schedule.eta
    );
    let output = driver::run(&db, &class, &config)?;
    let errors = driver::evaluate_synthetic(&class, &db, &output.synthetic, config.positive_only)?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    let summary = RunSummary::new(&db, &class, &output, &errors, runtime_ms, cli.seed);

    if let Some(p) = &args.out_synth {
        data::write_database(&output.synthetic, p)?;
    }
    if let Some(p) = &args.trace {
        let mut lines = String::new();
        for r in &output.trace.rounds {
            lines.push_str(&serde_json::to_string(r)?);
            lines.push('\n');
        }
        for w in &output.trace.weight_dumps {
            lines.push_str(&serde_json::to_string(&json!({ "weights": w }))?);
            lines.push('\n');
        }
        lines.push_str(&serde_json::to_string(&json!({ "privacy": output.trace.privacy }))?);
        lines.push('\n');
        std::fs::write(p, lines).with_context(|| format!("writing {}", p.display()))?;
    }
    emit(json_out, &json_text(&summary)?, true)
}

fn eval(cli: &Cli, args: &EvalArgs) -> Result<()> {
    let db = data::read_database(&args.db)?;
    let class = load_class(&db, &args.queries)?;
    let positive_only = !args.include_negations;

    if !args.sweep.is_empty() {
        if let Some(p) = &cli.out {
            check_writable(p, cli.force)?;
        }
        let mut config = RunConfig::new(budget_mode(&args.budget, Some(args.sweep[0]))?, args.solver.config()?, cli.seed);
        config.positive_only = positive_only;
        let seeds = if args.seeds.is_empty() { vec![cli.seed] } else { args.seeds.clone() };
        let rows = driver::sweep(&db, &class, &config, &args.sweep, &seeds)?;
        if let Some(p) = &args.sweep_json {
            check_writable(p, cli.force)?;
            std::fs::write(p, json_text(&rows)?).with_context(|| format!("writing {}", p.display()))?;
        }
        return emit(cli.out.as_deref(), &driver::format_sweep_csv(&rows), true);
    }

    let mut report = serde_json::Map::new();
    if let Some(p) = &args.synth {
        let synth = data::read_database(p)?;
        let r = driver::evaluate_synthetic(&class, &db, &synth, positive_only)?;
        report.insert("avgError".into(), json!(r.avg_error));
        report.insert("maxError".into(), json!(r.max_error));
    } else if args.baselines.is_empty() {
        bail!("eval needs --synth, --baselines or --sweep");
    }
    let mut baselines = serde_json::Map::new();
    for name in &args.baselines {
        let r = match name.trim() {
            "zeros" => driver::baseline_zeros(&class, &db, positive_only)?,
            "uniform" => driver::baseline_uniform(&class, &db, positive_only)?,
            "laplace" => driver::baseline_laplace(&class, &db, args.laplace_epsilon, args.budget.delta, cli.seed, positive_only)?,
            other => bail!("unknown baseline '{other}' (expected zeros, uniform or laplace)"),
        };
        baselines.insert(name.trim().to_string(), serde_json::to_value(r)?);
    }
    if !baselines.is_empty() {
        report.insert("baselines".into(), baselines.into());
    }
    report.insert("numQueries".into(), json!(class.len()));
    emit(cli.out.as_deref(), &json_text(&report)?, cli.force)
}

fn accountant_cmd(cli: &Cli, args: &AccountantArgs) -> Result<()> {
    if !(args.delta > 0.0 && args.delta < 1.0) {
        bail!("--delta must lie in (0, 1), got {}", args.delta);
    }
    let acc: Accountant = args.accountant.into();
    let text = if args.invert {
        let epsilon = args.epsilon.context("--invert needs --epsilon")?;
        let t = accountant::max_rounds(
            epsilon,
            args.delta,
            args.eta,
            args.samples,
            args.n,
            acc,
            accountant::DEFAULT_ROUND_CEILING,
        )?;
        let report = PrivacyReport::new(RunParams::new(t, args.samples, args.eta, args.n)?, args.delta)?;
        json_text(&json!({ "T": t, "accountant": acc, "epsilon": epsilon, "report": report }))?
    } else {
        let t = args.rounds.context("accountant needs --T (or --epsilon with --invert)")?;
        json_text(&PrivacyReport::new(RunParams::new(t, args.samples, args.eta, args.n)?, args.delta)?)?
    };
    emit(cli.out.as_deref(), &text, cli.force)
}

fn dispatch(cli: &Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t as usize)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match &cli.command {
        Command::SynthData(a) => synth_data(cli, a),
        Command::Ingest(a) => ingest(cli, a),
        Command::GenQueries(a) => gen_queries(cli, a),
        Command::Run(a) => run(cli, a),
        Command::Eval(a) => eval(cli, a),
        Command::Accountant(a) => accountant_cmd(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if cli.json_errors {
                let causes: Vec<String> = e.chain().skip(1).map(|c| c.to_string()).collect();
                eprintln!("{}", json!({ "error": e.to_string(), "causes": causes }));
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::FAILURE
        }
    }
}
