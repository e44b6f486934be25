//! The main release loop and the error measurements used to judge its output.
//!
//! Each round samples `s` queries from the weight state, solves the data
//! player's best response against them, and feeds the chosen record back
//! into the weights. The synthetic database is the multiset of chosen
//! records.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::accountant::{self, Accountant, PrivacyReport, RunParams};
use crate::error::{Error, Result};
use crate::model::{Database, QueryClass, QueryKind, Record};
use crate::queries::answers_on;
use crate::solver::{build_csp, solve, SolveStatus, SolverConfig};
use crate::weights::{WeightDump, WeightState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum RunMode {
    /// Parameters from the accuracy analysis.
    Theory { alpha: f64, beta: f64 },
    Manual { rounds: u64, samples: u64, eta: f64 },
    /// Rounds chosen as the most the accountant admits within `(ε, δ)`.
    Budget {
        epsilon: f64,
        delta: f64,
        eta: f64,
        samples: u64,
        accountant: Accountant,
    },
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub mode: RunMode,
    pub solver: SolverConfig,
    pub seed: u64,
    /// Report errors on non-negated queries only.
    pub positive_only: bool,
    /// δ and accountant used for the privacy report outside budget mode.
    pub report_delta: f64,
    pub report_accountant: Accountant,
    /// Keep the `k` heaviest queries of every round in the trace.
    pub dump_top_k: Option<usize>,
    pub round_ceiling: u64,
}

impl RunConfig {
    pub fn new(mode: RunMode, solver: SolverConfig, seed: u64) -> Self {
        RunConfig {
            mode,
            solver,
            seed,
            positive_only: true,
            report_delta: 1e-3,
            report_accountant: Accountant::Approx,
            dump_top_k: None,
            round_ceiling: accountant::DEFAULT_ROUND_CEILING,
        }
    }
}

/// Resolved `(T, s, η)` plus the accounting used to report it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    #[serde(rename = "T")]
    pub rounds: u64,
    #[serde(rename = "s")]
    pub samples: u64,
    pub eta: f64,
    pub delta: f64,
    pub accountant: Accountant,
    /// Budget cap in budget mode.
    pub epsilon_budget: Option<f64>,
}

pub fn resolve_schedule(config: &RunConfig, class_size: usize, d: usize, n: usize) -> Result<Schedule> {
    let schedule = match config.mode {
        RunMode::Theory { alpha, beta } => {
            let p = accountant::theory_params(alpha, beta, class_size as u64, d as u64)?;
            Schedule {
                rounds: p.rounds,
                samples: p.samples,
                eta: p.eta,
                delta: config.report_delta,
                accountant: config.report_accountant,
                epsilon_budget: None,
            }
        }
        RunMode::Manual { rounds, samples, eta } => Schedule {
            rounds,
            samples,
            eta,
            delta: config.report_delta,
            accountant: config.report_accountant,
            epsilon_budget: None,
        },
        RunMode::Budget {
            epsilon,
            delta,
            eta,
            samples,
            accountant: acc,
        } => {
            let rounds = accountant::max_rounds(epsilon, delta, eta, samples, n as u64, acc, config.round_ceiling)?;
            Schedule {
                rounds,
                samples,
                eta,
                delta,
                accountant: acc,
                epsilon_budget: Some(epsilon),
            }
        }
    };
    RunParams::new(schedule.rounds, schedule.samples, schedule.eta, n as u64)?;
    Ok(schedule)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RoundTrace {
    pub round: u64,
    /// `(class index, times sampled)`, ascending by index.
    pub sampled: Vec<(usize, u64)>,
    pub record: String,
    pub objective: u64,
    pub total_weight: u64,
    pub status: SolveStatus,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunTrace {
    pub schedule: Schedule,
    pub rounds: Vec<RoundTrace>,
    pub privacy: PrivacyReport,
    /// Cost of the executed rounds under the schedule's accountant.
    pub epsilon: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub weight_dumps: Vec<WeightDump>,
}

impl RunTrace {
    pub fn optimal_rounds(&self) -> usize {
        self.rounds.iter().filter(|r| r.status == SolveStatus::Optimal).count()
    }

    pub fn timeout_rounds(&self) -> usize {
        self.rounds.len() - self.optimal_rounds()
    }
}

pub struct RunOutput {
    pub synthetic: Database,
    pub trace: RunTrace,
    pub weights: WeightState,
}

/// splitmix64 step, for per-round solver seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs the release loop on `db` for the (evaluated) `class`.
pub fn run(db: &Database, class: &QueryClass, config: &RunConfig) -> Result<RunOutput> {
    class.require_answers()?;
    if db.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    if db.d() != class.d() {
        return Err(Error::SchemaMismatch(format!(
            "database has {} attributes, query class expects {}",
            db.d(),
            class.d()
        )));
    }
    config.solver.validate()?;
    let schedule = resolve_schedule(config, class.len(), db.d(), db.n())?;
    let n = db.n() as u64;
    let cost = |t: u64| -> Result<f64> {
        accountant::epsilon(
            schedule.accountant,
            &RunParams::new(t, schedule.samples, schedule.eta, n)?,
            schedule.delta,
        )
    };

    let mut state = WeightState::init_uniform(class, schedule.eta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut synthetic = Database::with_names(db.names().to_vec(), Vec::with_capacity(schedule.rounds as usize))?;
    let mut rounds = Vec::with_capacity(schedule.rounds as usize);
    let mut dumps = Vec::new();

    for t in 1..=schedule.rounds {
        if let Some(budget) = schedule.epsilon_budget {
            if cost(t)? > budget {
                break;
            }
        }
        let start = Instant::now();
        if let Some(k) = config.dump_top_k {
            dumps.push(WeightDump::capture(&state, class, k));
        }
        let samples = state.sample(schedule.samples as usize, &mut rng);
        let csp = build_csp(&samples, class)?;
        let result = solve(&csp, &config.solver.with_seed(derive_seed(config.seed, t)))?;
        state.update(&result.x, class)?;
        rounds.push(RoundTrace {
            round: t,
            sampled: csp
                .clauses()
                .iter()
                .map(|c| (class.position(&c.query).expect("sampled from class"), c.weight))
                .collect(),
            record: result.x.to_string(),
            objective: result.objective,
            total_weight: csp.total_weight(),
            status: result.status,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        synthetic.push(result.x)?;
    }

    let executed = rounds.len() as u64;
    let params = RunParams::new(executed.max(1), schedule.samples, schedule.eta, n)?;
    let privacy = PrivacyReport::new(params, schedule.delta)?;
    let epsilon = privacy.epsilon(schedule.accountant);
    Ok(RunOutput {
        synthetic,
        trace: RunTrace {
            schedule,
            rounds,
            privacy,
            epsilon,
            weight_dumps: dumps,
        },
        weights: state,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ErrorReport {
    pub avg_error: f64,
    pub max_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_query_errors: Option<Vec<f64>>,
    /// Laplace noise scale, for the Laplace baseline.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_scale: Option<f64>,
}

/// Average and max of `|truth_j - released_j|` over the selected queries.
pub fn error_report(class: &QueryClass, truth: &[f64], released: &[f64], positive_only: bool) -> ErrorReport {
    let errors: Vec<f64> = class
        .queries()
        .iter()
        .zip(truth.iter().zip(released))
        .filter(|(q, _)| !positive_only || !q.is_negated())
        .map(|(_, (a, b))| (a - b).abs())
        .collect();
    let max = errors.iter().copied().fold(0.0, f64::max);
    let avg = if errors.is_empty() {
        0.0
    } else {
        errors.iter().sum::<f64>() / errors.len() as f64
    };
    ErrorReport {
        avg_error: avg,
        max_error: max,
        per_query_errors: None,
        noise_scale: None,
    }
}

fn truth_and(class: &QueryClass, db: &Database) -> Result<Vec<f64>> {
    match class.true_answers() {
        Some(a) => Ok(a.to_vec()),
        None => answers_on(class, db),
    }
}

/// Errors of `synthetic` against `db` on the class.
pub fn evaluate_synthetic(class: &QueryClass, db: &Database, synthetic: &Database, positive_only: bool) -> Result<ErrorReport> {
    let truth = truth_and(class, db)?;
    let released = answers_on(class, synthetic)?;
    Ok(error_report(class, &truth, &released, positive_only))
}

pub fn avg_error(class: &QueryClass, db: &Database, synthetic: &Database, positive_only: bool) -> Result<f64> {
    Ok(evaluate_synthetic(class, db, synthetic, positive_only)?.avg_error)
}

pub fn max_error(class: &QueryClass, db: &Database, synthetic: &Database, positive_only: bool) -> Result<f64> {
    Ok(evaluate_synthetic(class, db, synthetic, positive_only)?.max_error)
}

/// The all-zeros database (a single zero record; answers are averages).
pub fn baseline_zeros(class: &QueryClass, db: &Database, positive_only: bool) -> Result<ErrorReport> {
    let zeros = Database::new(class.d(), vec![Record::zeros(class.d())])?;
    evaluate_synthetic(class, db, &zeros, positive_only)
}

/// Answers of the database holding every record once, computed analytically:
/// a conjunction of three literals holds on 1/8 of `{0,1}^d`, a parity on 1/2.
pub fn uniform_answers(class: &QueryClass) -> Vec<f64> {
    class
        .queries()
        .iter()
        .map(|q| match (q.kind(), q.is_negated()) {
            (QueryKind::Marginal, false) => 0.125,
            (QueryKind::Marginal, true) => 0.875,
            (QueryKind::Parity, _) => 0.5,
        })
        .collect()
}

pub fn baseline_uniform(class: &QueryClass, db: &Database, positive_only: bool) -> Result<ErrorReport> {
    let truth = truth_and(class, db)?;
    Ok(error_report(class, &truth, &uniform_answers(class), positive_only))
}

/// Laplace scale when `m` answers of sensitivity `1/n` share `(ε, δ)` under
/// advanced composition: `√(2m ln(1/δ)) / (nε)`.
pub fn laplace_scale(m: usize, n: usize, epsilon: f64, delta: f64) -> f64 {
    (2.0 * m as f64 * (1.0 / delta).ln()).sqrt() / (n as f64 * epsilon)
}

fn sample_laplace<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> f64 {
    let u: f64 = rng.gen::<f64>() - 0.5;
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Noisy true answers, clamped to `[0, 1]`. Only positive queries consume
/// budget; a negation is answered as `1 - answer`.
pub fn baseline_laplace(
    class: &QueryClass,
    db: &Database,
    epsilon: f64,
    delta: f64,
    seed: u64,
    positive_only: bool,
) -> Result<ErrorReport> {
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    let truth = truth_and(class, db)?;
    let m = class.positives().count();
    let scale = laplace_scale(m, db.n(), epsilon, delta);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut released = vec![0.0; class.len()];
    for (j, q) in class.queries().iter().enumerate() {
        if !q.is_negated() {
            let noisy = (truth[j] + sample_laplace(&mut rng, scale)).clamp(0.0, 1.0);
            released[j] = noisy;
            if j + 1 < class.len() {
                released[QueryClass::partner(j)] = 1.0 - noisy;
            }
        }
    }
    let mut report = error_report(class, &truth, &released, positive_only);
    report.noise_scale = Some(scale);
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConcentrationStats {
    pub trials: usize,
    pub failures: usize,
    pub failure_rate: f64,
    pub threshold: f64,
    pub mean_sup_deviation: f64,
    pub max_sup_deviation: f64,
}

/// Draws `s` queries from `state` `trials` times and measures
/// `sup_x |q̄(x) - Q(x)|` over the whole universe, where `q̄` is the average
/// of the draws and `Q` the weighted query. A trial fails when the sup
/// reaches `α/4`.
pub fn sampling_concentration_check(
    state: &WeightState,
    class: &QueryClass,
    s: usize,
    alpha: f64,
    trials: usize,
    seed: u64,
) -> Result<ConcentrationStats> {
    let d = class.d();
    if d > 12 {
        return Err(Error::DimensionTooLarge { d, limit: 12 });
    }
    if state.len() != class.len() {
        return Err(Error::SchemaMismatch("weight state does not match class".into()));
    }
    if s == 0 || trials == 0 {
        return Err(Error::InvalidParameter("need s >= 1 and trials >= 1".into()));
    }
    let universe = 1usize << d;
    let records: Vec<Record> = (0..universe).map(|v| Record::from_u64(v as u64, d)).collect();
    let values: Vec<Vec<u8>> = class
        .queries()
        .iter()
        .map(|q| records.iter().map(|x| q.eval_unchecked(x)).collect())
        .collect();
    let p = state.distribution();
    let mut weighted = vec![0.0f64; universe];
    for (pj, vals) in p.iter().zip(&values) {
        for (w, &v) in weighted.iter_mut().zip(vals) {
            *w += pj * v as f64;
        }
    }
    let threshold = alpha / 4.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut sum_sup = 0.0;
    let mut max_sup = 0.0f64;
    let mut counts = vec![0u64; class.len()];
    for _ in 0..trials {
        counts.iter_mut().for_each(|c| *c = 0);
        for j in state.sample(s, &mut rng) {
            counts[j] += 1;
        }
        let mut agg = vec![0u64; universe];
        for (j, &c) in counts.iter().enumerate() {
            if c > 0 {
                for (a, &v) in agg.iter_mut().zip(&values[j]) {
                    *a += c * v as u64;
                }
            }
        }
        let sup = agg
            .iter()
            .zip(&weighted)
            .map(|(&a, &w)| (a as f64 / s as f64 - w).abs())
            .fold(0.0, f64::max);
        if sup >= threshold {
            failures += 1;
        }
        sum_sup += sup;
        max_sup = max_sup.max(sup);
    }
    Ok(ConcentrationStats {
        trials,
        failures,
        failure_rate: failures as f64 / trials as f64,
        threshold,
        mean_sup_deviation: sum_sup / trials as f64,
        max_sup_deviation: max_sup,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolverStats {
    pub optimal_rounds: usize,
    pub timeout_rounds: usize,
}

/// The results document written by `run`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunSummary {
    pub epsilon: f64,
    pub delta: f64,
    pub accountant: Accountant,
    #[serde(rename = "T")]
    pub rounds: u64,
    pub s: u64,
    pub eta: f64,
    pub n: usize,
    pub d: usize,
    pub num_queries: usize,
    pub avg_error: f64,
    pub max_error: f64,
    pub runtime_ms: f64,
    pub seed: u64,
    pub solver_stats: SolverStats,
}

impl RunSummary {
    pub fn new(db: &Database, class: &QueryClass, output: &RunOutput, errors: &ErrorReport, runtime_ms: f64, seed: u64) -> Self {
        let t = &output.trace;
        RunSummary {
            epsilon: t.epsilon,
            delta: t.schedule.delta,
            accountant: t.schedule.accountant,
            rounds: t.rounds.len() as u64,
            s: t.schedule.samples,
            eta: t.schedule.eta,
            n: db.n(),
            d: db.d(),
            num_queries: class.len(),
            avg_error: errors.avg_error,
            max_error: errors.max_error,
            runtime_ms,
            seed,
            solver_stats: SolverStats {
                optimal_rounds: t.optimal_rounds(),
                timeout_rounds: t.timeout_rounds(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepRow {
    pub epsilon: f64,
    pub avg_error: f64,
    pub max_error: f64,
    pub rounds: Vec<u64>,
    pub per_seed: Vec<(u64, f64, f64)>,
}

/// Runs budget mode once per `(ε, seed)` and averages over seeds.
pub fn sweep(
    db: &Database,
    class: &QueryClass,
    base: &RunConfig,
    epsilons: &[f64],
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    let RunMode::Budget {
        delta,
        eta,
        samples,
        accountant,
        ..
    } = base.mode
    else {
        return Err(Error::InvalidParameter("sweeps need budget-mode parameters".into()));
    };
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("sweeps need at least one seed".into()));
    }
    let mut rows = Vec::with_capacity(epsilons.len());
    for &epsilon in epsilons {
        let mut per_seed = Vec::with_capacity(seeds.len());
        let mut rounds = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let mut cfg = base.clone();
            cfg.seed = seed;
            cfg.mode = RunMode::Budget {
                epsilon,
                delta,
                eta,
                samples,
                accountant,
            };
            let out = run(db, class, &cfg)?;
            let rep = evaluate_synthetic(class, db, &out.synthetic, base.positive_only)?;
            rounds.push(out.trace.rounds.len() as u64);
            per_seed.push((seed, rep.avg_error, rep.max_error));
        }
        let k = per_seed.len() as f64;
        rows.push(SweepRow {
            epsilon,
            avg_error: per_seed.iter().map(|r| r.1).sum::<f64>() / k,
            max_error: per_seed.iter().map(|r| r.2).sum::<f64>() / k,
            rounds,
            per_seed,
        });
    }
    Ok(rows)
}

pub fn format_sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("epsilon,avg_error,max_error\n");
    for r in rows {
        s.push_str(&format!("{},{},{}\n", r.epsilon, r.avg_error, r.max_error));
    }
    s
}
