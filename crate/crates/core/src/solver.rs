//! Best response of the data player: a weighted MAXCSP over the sampled
//! queries.
//!
//! Each sampled query becomes a clause on three attributes. Because a clause
//! touches exactly three bits, it is stored as an 8-entry truth table over
//! those bits; flip gains are then table lookups.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::BiasVector;
use crate::error::{Error, Result};
use crate::model::{Query, QueryClass, QueryKind, Record};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Clause {
    pub query: Query,
    pub weight: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CspInstance {
    d: usize,
    clauses: Vec<Clause>,
    total_weight: u64,
}

impl CspInstance {
    pub fn new(d: usize, clauses: Vec<Clause>) -> Result<Self> {
        for c in &clauses {
            c.query.check_dimension(d)?;
            if c.weight == 0 {
                return Err(Error::InvalidParameter(format!(
                    "clause {} has zero multiplicity",
                    c.query
                )));
            }
        }
        let total_weight = clauses.iter().map(|c| c.weight).sum();
        Ok(CspInstance {
            d,
            clauses,
            total_weight,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn total_weight(&self) -> u64 {
        self.total_weight
    }

    /// Attributes mentioned by at least one clause, ascending.
    pub fn touched(&self) -> Vec<usize> {
        let mut seen = vec![false; self.d];
        for c in &self.clauses {
            for a in c.query.attrs() {
                seen[a] = true;
            }
        }
        (0..self.d).filter(|&i| seen[i]).collect()
    }

    /// `totalWeight - Σ min(mult(q), mult(q̄))`: exactly one of a
    /// complementary pair holds at any record.
    pub fn upper_bound(&self) -> u64 {
        let by_query: BTreeMap<Query, u64> = self.clauses.iter().fold(BTreeMap::new(), |mut m, c| {
            *m.entry(c.query).or_insert(0) += c.weight;
            m
        });
        let mut lost = 0;
        for (q, &w) in &by_query {
            if !q.is_negated() {
                if let Some(&wn) = by_query.get(&q.negate()) {
                    lost += w.min(wn);
                }
            }
        }
        self.total_weight - lost
    }
}

/// Collapses a sample multiset into weighted clauses, in class order.
pub fn build_csp(samples: &[usize], class: &QueryClass) -> Result<CspInstance> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("no sampled queries".into()));
    }
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for &j in samples {
        if j >= class.len() {
            return Err(Error::InvalidParameter(format!("sample index {j} out of range")));
        }
        *counts.entry(j).or_insert(0) += 1;
    }
    let clauses = counts
        .into_iter()
        .map(|(j, weight)| Clause {
            query: *class.get(j),
            weight,
        })
        .collect();
    CspInstance::new(class.d(), clauses)
}

/// Weighted number of satisfied clauses.
pub fn objective(csp: &CspInstance, x: &Record) -> u64 {
    csp.clauses
        .iter()
        .map(|c| c.weight * c.query.eval_unchecked(x) as u64)
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    Exact,
    Local,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FreePolicy {
    Zeros,
    Ones,
    Random,
    Bias,
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub mode: SolverMode,
    pub exact_dim_limit: usize,
    pub timeout: Duration,
    pub restarts: usize,
    pub max_flips: usize,
    /// Probability of a random (rather than greedy) pick inside a walk step.
    pub noise: f64,
    pub free_policy: FreePolicy,
    pub bias: Option<BiasVector>,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: SolverMode::Local,
            exact_dim_limit: 24,
            timeout: Duration::from_secs(20),
            restarts: 10,
            max_flips: 10_000,
            noise: 0.3,
            free_policy: FreePolicy::Zeros,
            bias: None,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.timeout.is_zero() {
            return Err(Error::InvalidParameter("solver timeout must be positive".into()));
        }
        if self.exact_dim_limit > 30 {
            return Err(Error::InvalidParameter(format!(
                "exact dimension limit {} exceeds 30",
                self.exact_dim_limit
            )));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("need at least one restart".into()));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::InvalidParameter("noise must lie in [0, 1]".into()));
        }
        if self.free_policy == FreePolicy::Bias && self.bias.is_none() {
            return Err(Error::InvalidParameter("bias free policy needs a bias vector".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SolverConfig {
            seed,
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SolveStatus {
    /// The objective is certified maximal.
    Optimal,
    /// Best incumbent when the search budget or the timeout ran out.
    TimeoutIncumbent,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveResult {
    pub x: Record,
    pub objective: u64,
    pub status: SolveStatus,
    pub free_attributes: Vec<usize>,
    pub timed_out: bool,
}

pub fn solve(csp: &CspInstance, config: &SolverConfig) -> Result<SolveResult> {
    match config.mode {
        SolverMode::Exact => solve_exact(csp, config),
        SolverMode::Local => solve_local(csp, config),
    }
}

/// Sets every bit outside `touched` according to the free policy. Bits in
/// `touched` are kept.
pub fn assign_free_attributes(x: &Record, touched: &[usize], config: &SolverConfig) -> Result<Record> {
    let d = x.len();
    let mut mask = vec![false; d];
    for &t in touched {
        if t >= d {
            return Err(Error::SchemaMismatch(format!("touched attribute {t} >= d = {d}")));
        }
        mask[t] = true;
    }
    let mut out = x.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9E37_79B9_7F4A_7C15);
    match config.free_policy {
        FreePolicy::Zeros | FreePolicy::Ones => {
            let v = config.free_policy == FreePolicy::Ones;
            for i in (0..d).filter(|&i| !mask[i]) {
                out.set(i, v);
            }
        }
        FreePolicy::Random => {
            for i in (0..d).filter(|&i| !mask[i]) {
                out.set(i, rng.gen::<bool>());
            }
        }
        FreePolicy::Bias => {
            let bias = config
                .bias
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter("bias free policy needs a bias vector".into()))?;
            if bias.p.len() != d {
                return Err(Error::SchemaMismatch(format!(
                    "bias vector has {} entries, record has {d}",
                    bias.p.len()
                )));
            }
            for i in (0..d).filter(|&i| !mask[i]) {
                out.set(i, rng.gen::<f64>() < bias.p[i]);
            }
        }
    }
    Ok(out)
}

/// A clause over local variable slots with its truth table.
#[derive(Clone, Copy)]
struct Compiled {
    vars: [usize; 3],
    table: u8,
    weight: u64,
}

impl Compiled {
    #[inline]
    fn sat(&self, bits: u8) -> u64 {
        ((self.table >> bits) & 1) as u64
    }
}

fn truth_table(q: &Query) -> u8 {
    let mut table = 0u8;
    for bits in 0..8u8 {
        let v = [bits & 1 == 1, bits & 2 == 2, bits & 4 == 4];
        let base = match q.kind() {
            QueryKind::Marginal => (0..3).all(|k| v[k] ^ q.literal_negated(k)),
            QueryKind::Parity => !(v[0] ^ v[1] ^ v[2]),
        };
        if base ^ q.is_negated() {
            table |= 1 << bits;
        }
    }
    table
}

struct CompiledCsp {
    vars: Vec<usize>,
    clauses: Vec<Compiled>,
    /// `occ[v]` lists `(clause, position)` pairs.
    occ: Vec<Vec<(usize, u8)>>,
}

fn compile(csp: &CspInstance) -> CompiledCsp {
    let vars = csp.touched();
    let mut slot = vec![usize::MAX; csp.d];
    for (i, &v) in vars.iter().enumerate() {
        slot[v] = i;
    }
    let mut occ = vec![Vec::new(); vars.len()];
    let clauses = csp
        .clauses
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            let a = c.query.attrs().map(|x| slot[x]);
            for (k, &v) in a.iter().enumerate() {
                occ[v].push((ci, k as u8));
            }
            Compiled {
                vars: a,
                table: truth_table(&c.query),
                weight: c.weight,
            }
        })
        .collect();
    CompiledCsp { vars, clauses, occ }
}

fn to_record(d: usize, vars: &[usize], assignment: &[bool]) -> Record {
    let mut x = Record::zeros(d);
    for (&v, &b) in vars.iter().zip(assignment) {
        if b {
            x.set(v, true);
        }
    }
    x
}

/// Exhaustive search over the touched attributes with bound pruning.
/// Attributes are assigned in index order, 0 before 1, and only strictly
/// better solutions replace the incumbent, so the reported optimum is the
/// lexicographically smallest one.
pub fn solve_exact(csp: &CspInstance, config: &SolverConfig) -> Result<SolveResult> {
    config.validate()?;
    if csp.d > config.exact_dim_limit {
        return Err(Error::DimensionTooLarge {
            d: csp.d,
            limit: config.exact_dim_limit,
        });
    }
    let cc = compile(csp);
    let k = cc.vars.len();
    // clauses decided once their last slot is assigned
    let mut decided_at: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (ci, c) in cc.clauses.iter().enumerate() {
        let last = *c.vars.iter().max().expect("three vars");
        decided_at[last].push(ci);
    }
    let mut remaining_after = vec![0u64; k + 1];
    for depth in (0..k).rev() {
        let w: u64 = decided_at[depth].iter().map(|&c| cc.clauses[c].weight).sum();
        remaining_after[depth] = remaining_after[depth + 1] + w;
    }

    struct Search<'a> {
        cc: &'a CompiledCsp,
        decided_at: &'a [Vec<usize>],
        remaining_after: &'a [u64],
        assign: Vec<bool>,
        best: Option<(u64, Vec<bool>)>,
        nodes: u64,
        deadline: Instant,
        timed_out: bool,
    }

    impl Search<'_> {
        fn run(&mut self, depth: usize, sat: u64) {
            if self.timed_out {
                return;
            }
            self.nodes += 1;
            if self.nodes.is_multiple_of(4096) && Instant::now() >= self.deadline {
                self.timed_out = true;
                return;
            }
            if let Some((best, _)) = &self.best {
                if sat + self.remaining_after[depth] <= *best {
                    return;
                }
            }
            if depth == self.assign.len() {
                self.best = Some((sat, self.assign.clone()));
                return;
            }
            for value in [false, true] {
                self.assign[depth] = value;
                let mut gained = 0;
                for &ci in &self.decided_at[depth] {
                    let c = &self.cc.clauses[ci];
                    let bits = (self.assign[c.vars[0]] as u8)
                        | (self.assign[c.vars[1]] as u8) << 1
                        | (self.assign[c.vars[2]] as u8) << 2;
                    gained += c.weight * c.sat(bits);
                }
                self.run(depth + 1, sat + gained);
            }
            self.assign[depth] = false;
        }
    }

    let mut search = Search {
        cc: &cc,
        decided_at: &decided_at,
        remaining_after: &remaining_after,
        assign: vec![false; k],
        best: None,
        nodes: 0,
        deadline: Instant::now() + config.timeout,
        timed_out: false,
    };
    search.run(0, 0);
    let timed_out = search.timed_out;
    let (objective_value, assign) = search.best.unwrap_or((0, vec![false; k]));
    let raw = to_record(csp.d, &cc.vars, &assign);
    let x = assign_free_attributes(&raw, &cc.vars, config)?;
    Ok(SolveResult {
        x,
        objective: objective_value,
        status: if timed_out {
            SolveStatus::TimeoutIncumbent
        } else {
            SolveStatus::Optimal
        },
        free_attributes: free_list(csp.d, &cc.vars),
        timed_out,
    })
}

fn free_list(d: usize, touched: &[usize]) -> Vec<usize> {
    let mut mask = vec![false; d];
    for &t in touched {
        mask[t] = true;
    }
    (0..d).filter(|&i| !mask[i]).collect()
}

/// Incremental flip-gain bookkeeping for one local-search run.
struct LocalState<'a> {
    cc: &'a CompiledCsp,
    assign: Vec<bool>,
    bits: Vec<u8>,
    gain: Vec<i64>,
    unsat: Vec<usize>,
    unsat_pos: Vec<usize>,
    value: u64,
}

impl<'a> LocalState<'a> {
    fn new(cc: &'a CompiledCsp, assign: Vec<bool>) -> Self {
        let m = cc.clauses.len();
        let mut st = LocalState {
            cc,
            assign,
            bits: vec![0; m],
            gain: vec![0; cc.vars.len()],
            unsat: Vec::new(),
            unsat_pos: vec![usize::MAX; m],
            value: 0,
        };
        for ci in 0..m {
            let c = &cc.clauses[ci];
            let b = (st.assign[c.vars[0]] as u8)
                | (st.assign[c.vars[1]] as u8) << 1
                | (st.assign[c.vars[2]] as u8) << 2;
            st.bits[ci] = b;
            st.add_gains(ci, b, 1);
            if c.sat(b) == 1 {
                st.value += c.weight;
            } else {
                st.mark_unsat(ci);
            }
        }
        st
    }

    fn add_gains(&mut self, ci: usize, b: u8, sign: i64) {
        let c = self.cc.clauses[ci];
        let now = c.sat(b) as i64;
        for k in 0..3 {
            let delta = c.sat(b ^ (1 << k)) as i64 - now;
            self.gain[c.vars[k]] += sign * delta * c.weight as i64;
        }
    }

    fn mark_unsat(&mut self, ci: usize) {
        self.unsat_pos[ci] = self.unsat.len();
        self.unsat.push(ci);
    }

    fn mark_sat(&mut self, ci: usize) {
        let pos = self.unsat_pos[ci];
        let last = *self.unsat.last().expect("nonempty");
        self.unsat.swap_remove(pos);
        if last != ci {
            self.unsat_pos[last] = pos;
        }
        self.unsat_pos[ci] = usize::MAX;
    }

    fn flip(&mut self, v: usize) {
        self.assign[v] = !self.assign[v];
        for &(ci, k) in &self.cc.occ[v] {
            let c = self.cc.clauses[ci];
            let old = self.bits[ci];
            let new = old ^ (1 << k);
            self.add_gains(ci, old, -1);
            self.add_gains(ci, new, 1);
            self.bits[ci] = new;
            match (c.sat(old), c.sat(new)) {
                (0, 1) => {
                    self.value += c.weight;
                    self.mark_sat(ci);
                }
                (1, 0) => {
                    self.value -= c.weight;
                    self.mark_unsat(ci);
                }
                _ => {}
            }
        }
    }
}

fn better(a: (u64, &Record), b: (u64, &Record)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
}

struct RestartOutcome {
    value: u64,
    x: Record,
    timed_out: bool,
}

fn local_restart(
    csp: &CspInstance,
    cc: &CompiledCsp,
    config: &SolverConfig,
    restart: usize,
    bound: u64,
    deadline: Instant,
) -> RestartOutcome {
    let k = cc.vars.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(restart as u64));
    let init: Vec<bool> = if restart == 0 {
        vec![false; k]
    } else {
        (0..k).map(|_| rng.gen::<bool>()).collect()
    };
    let mut st = LocalState::new(cc, init);

    // greedy ascent
    loop {
        let best = (0..k).max_by(|&a, &b| st.gain[a].cmp(&st.gain[b]).then(b.cmp(&a)));
        match best {
            Some(v) if st.gain[v] > 0 => st.flip(v),
            _ => break,
        }
    }

    let mut best_value = st.value;
    let mut best_x = to_record(csp.d, &cc.vars, &st.assign);
    let tenure = 2 + k / 10;
    let mut last_flip = vec![0usize; k];
    let mut timed_out = false;

    for step in 1..=config.max_flips {
        if best_value == bound || st.unsat.is_empty() {
            break;
        }
        if step % 256 == 0 && Instant::now() >= deadline {
            timed_out = true;
            break;
        }
        // improving non-tabu move, or any move reaching a new best
        let mut pick: Option<usize> = None;
        for v in 0..k {
            let g = st.gain[v];
            if g <= 0 {
                continue;
            }
            let tabu = last_flip[v] != 0 && step < last_flip[v] + tenure;
            let aspirates = st.value as i64 + g > best_value as i64;
            if tabu && !aspirates {
                continue;
            }
            if pick.is_none_or(|p| g > st.gain[p]) {
                pick = Some(v);
            }
        }
        let v = match pick {
            Some(v) => v,
            None => {
                let ci = st.unsat[rng.gen_range(0..st.unsat.len())];
                let vars = cc.clauses[ci].vars;
                if rng.gen::<f64>() < config.noise {
                    vars[rng.gen_range(0..3)]
                } else {
                    let top = vars.iter().map(|&u| st.gain[u]).max().expect("three");
                    let ties: Vec<usize> = vars.iter().copied().filter(|&u| st.gain[u] == top).collect();
                    ties[rng.gen_range(0..ties.len())]
                }
            }
        };
        st.flip(v);
        last_flip[v] = step;
        if st.value >= best_value {
            let x = to_record(csp.d, &cc.vars, &st.assign);
            if better((st.value, &x), (best_value, &best_x)) {
                best_value = st.value;
                best_x = x;
            }
        }
    }
    RestartOutcome {
        value: best_value,
        x: best_x,
        timed_out,
    }
}

/// Greedy ascent followed by tabu-guarded stochastic flips, over
/// `config.restarts` independent restarts (restart `r` seeded with
/// `seed + r`). The merged result prefers the higher objective, then the
/// lexicographically smaller record, so it does not depend on scheduling.
pub fn solve_local(csp: &CspInstance, config: &SolverConfig) -> Result<SolveResult> {
    config.validate()?;
    let cc = compile(csp);
    let bound = csp.upper_bound();
    let deadline = Instant::now() + config.timeout;
    let outcomes: Vec<RestartOutcome> = (0..config.restarts)
        .into_par_iter()
        .map(|r| local_restart(csp, &cc, config, r, bound, deadline))
        .collect();
    let mut best = &outcomes[0];
    for o in &outcomes[1..] {
        if better((o.value, &o.x), (best.value, &best.x)) {
            best = o;
        }
    }
    let timed_out = outcomes.iter().any(|o| o.timed_out);
    let x = assign_free_attributes(&best.x, &cc.vars, config)?;
    Ok(SolveResult {
        x,
        objective: best.value,
        status: if best.value == bound {
            SolveStatus::Optimal
        } else {
            SolveStatus::TimeoutIncumbent
        },
        free_attributes: free_list(csp.d, &cc.vars),
        timed_out,
    })
}

fn linear_terms(terms: &[(i64, String)]) -> String {
    let mut s = String::new();
    for (i, (coef, var)) in terms.iter().enumerate() {
        let sign = if *coef < 0 { "-" } else { "+" };
        let mag = coef.abs();
        if i == 0 {
            if *coef < 0 {
                s.push_str("- ");
            }
        } else {
            let _ = write!(s, " {sign} ");
        }
        if mag != 1 {
            let _ = write!(s, "{mag} ");
        }
        s.push_str(var);
    }
    s
}

/// Integer program for the best-response problem in LP text format.
///
/// Per clause `i` (objective coefficient = multiplicity):
/// - marginal: `Σ lit ≥ 3 c_i`, a negated literal written `1 - x`;
/// - negated marginal: `Σ (1 - lit) ≥ c_i`;
/// - parity: `x_a + x_b + x_c = 2 d_i + c_i - 1`;
/// - negated parity: `x_a + x_b + x_c = 2 d_i + c_i`;
///
/// with `x, c` binary and `d_i ∈ {0, 1, 2}`. Constants are moved to the
/// right-hand side.
pub fn format_lp(csp: &CspInstance) -> String {
    let mut out = String::new();
    out.push_str("\\ weighted MAXCSP best response\n");
    out.push_str("Maximize\n obj:");
    if csp.clauses.is_empty() {
        out.push_str(" 0 c_none");
    }
    for (i, c) in csp.clauses.iter().enumerate() {
        if i > 0 && i % 8 == 0 {
            out.push_str("\n     ");
        }
        if c.weight == 1 {
            let _ = write!(out, " + c{i}");
        } else {
            let _ = write!(out, " + {} c{i}", c.weight);
        }
    }
    out.push_str("\nSubject To\n");
    let mut parity_vars = Vec::new();
    for (i, c) in csp.clauses.iter().enumerate() {
        let q = &c.query;
        let attrs = q.attrs();
        let (terms, op, rhs) = match (q.kind(), q.is_negated()) {
            (QueryKind::Marginal, false) => {
                // Σ lit - 3c >= -(#negated literals)
                let mut terms: Vec<(i64, String)> = Vec::new();
                let mut rhs = 0i64;
                for k in 0..3 {
                    if q.literal_negated(k) {
                        terms.push((-1, format!("x{}", attrs[k])));
                        rhs -= 1;
                    } else {
                        terms.push((1, format!("x{}", attrs[k])));
                    }
                }
                terms.push((-3, format!("c{i}")));
                (terms, ">=", rhs)
            }
            (QueryKind::Marginal, true) => {
                // Σ (1 - lit) - c >= -(#positive literals)
                let mut terms: Vec<(i64, String)> = Vec::new();
                let mut rhs = 0i64;
                for k in 0..3 {
                    if q.literal_negated(k) {
                        terms.push((1, format!("x{}", attrs[k])));
                    } else {
                        terms.push((-1, format!("x{}", attrs[k])));
                        rhs -= 1;
                    }
                }
                terms.push((-1, format!("c{i}")));
                (terms, ">=", rhs)
            }
            (QueryKind::Parity, negated) => {
                parity_vars.push(i);
                let mut terms: Vec<(i64, String)> =
                    attrs.iter().map(|a| (1, format!("x{a}"))).collect();
                terms.push((-2, format!("d{i}")));
                terms.push((-1, format!("c{i}")));
                (terms, "=", if negated { 0 } else { -1 })
            }
        };
        let _ = writeln!(out, " q{i}: {} {op} {rhs}", linear_terms(&terms));
    }
    if !parity_vars.is_empty() {
        out.push_str("Bounds\n");
        for i in &parity_vars {
            let _ = writeln!(out, " 0 <= d{i} <= 2");
        }
    }
    out.push_str("Binary\n");
    let mut line = String::new();
    let mut names: Vec<String> = csp.touched().iter().map(|a| format!("x{a}")).collect();
    names.extend((0..csp.clauses.len()).map(|i| format!("c{i}")));
    for (i, name) in names.iter().enumerate() {
        if i > 0 && i % 12 == 0 {
            let _ = writeln!(out, "{line}");
            line.clear();
        }
        line.push(' ');
        line.push_str(name);
    }
    if !line.is_empty() {
        let _ = writeln!(out, "{line}");
    }
    if !parity_vars.is_empty() {
        out.push_str("Generals\n");
        let gens: Vec<String> = parity_vars.iter().map(|i| format!("d{i}")).collect();
        for chunk in gens.chunks(12) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

pub fn export_lp(csp: &CspInstance, path: &Path) -> Result<()> {
    std::fs::write(path, format_lp(csp)).map_err(|e| Error::io(path, e))
}

/// Query-file lines with a trailing multiplicity column.
pub fn format_csp(csp: &CspInstance) -> String {
    let mut s = String::new();
    for c in &csp.clauses {
        let _ = writeln!(s, "{} {}", c.query, c.weight);
    }
    s
}

pub fn parse_csp(d: usize, text: &str) -> Result<CspInstance> {
    let mut clauses = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (query_part, weight) = line
            .rsplit_once(char::is_whitespace)
            .ok_or_else(|| Error::parse(format!("line {}", lineno + 1), "missing multiplicity"))?;
        let weight: u64 = weight
            .parse()
            .map_err(|_| Error::parse(format!("line {}", lineno + 1), "bad multiplicity"))?;
        let query: Query = query_part.trim().parse()?;
        clauses.push(Clause { query, weight });
    }
    CspInstance::new(d, clauses)
}
