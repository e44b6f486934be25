//! Workload generation, negation closure and bulk evaluation.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::FeatureMap;
use crate::error::{Error, Result};
use crate::model::{Database, Query, QueryClass, QueryKind};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub kind: QueryKind,
    pub count: usize,
    pub seed: u64,
    /// Never put two attributes of one feature group into a query.
    pub sensible: bool,
    /// Draw a random sign for each marginal literal.
    pub literals: bool,
}

impl WorkloadSpec {
    pub fn new(kind: QueryKind, count: usize, seed: u64) -> Self {
        WorkloadSpec {
            kind,
            count,
            seed,
            sensible: false,
            literals: false,
        }
    }
}

/// Group id of every attribute; attributes outside any group get their own.
fn attribute_groups(d: usize, map: Option<&FeatureMap>) -> Vec<usize> {
    match map {
        Some(map) => {
            let mut g: Vec<usize> = (0..d).map(|i| usize::MAX - i).collect();
            for (id, group) in map.groups.iter().enumerate() {
                for a in group.start..group.end.min(d) {
                    g[a] = id;
                }
            }
            g
        }
        None => (0..d).collect(),
    }
}

/// Number of attribute triples drawing at most one attribute per group:
/// the third elementary symmetric polynomial of the group sizes.
fn count_triples(groups: &[usize]) -> u128 {
    let mut sizes = std::collections::BTreeMap::new();
    for &g in groups {
        *sizes.entry(g).or_insert(0u128) += 1;
    }
    let (mut e1, mut e2, mut e3) = (0u128, 0u128, 0u128);
    for &s in sizes.values() {
        e3 += e2 * s;
        e2 += e1 * s;
        e1 += s;
    }
    e3
}

/// Draws `count` distinct positive queries uniformly over valid triples.
pub fn generate_workload(
    spec: &WorkloadSpec,
    d: usize,
    feature_map: Option<&FeatureMap>,
) -> Result<Vec<Query>> {
    if d < 3 {
        return Err(Error::InvalidParameter(format!("need d >= 3, got {d}")));
    }
    if spec.count == 0 {
        return Err(Error::InvalidParameter("query count must be positive".into()));
    }
    if spec.sensible && feature_map.is_none() {
        return Err(Error::InvalidParameter(
            "sensible workloads need a feature map".into(),
        ));
    }
    if spec.literals && spec.kind == QueryKind::Parity {
        return Err(Error::InvalidParameter(
            "literal signs only apply to marginals".into(),
        ));
    }
    let groups = attribute_groups(d, if spec.sensible { feature_map } else { None });
    let masks: u128 = if spec.literals { 8 } else { 1 };
    let total = count_triples(&groups) * masks;
    if spec.count as u128 > total {
        return Err(Error::InvalidParameter(format!(
            "requested {} queries but only {total} distinct valid queries exist",
            spec.count
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let make = |attrs: [usize; 3], mask: u8| Query::new(spec.kind, attrs, mask, false);

    // Dense requests: enumerate and shuffle instead of rejecting forever.
    if (spec.count as u128) * 2 > total && total <= 4_000_000 {
        let mut all = Vec::with_capacity(total as usize);
        for a in 0..d {
            for b in (a + 1)..d {
                if groups[a] == groups[b] {
                    continue;
                }
                for c in (b + 1)..d {
                    if groups[c] == groups[a] || groups[c] == groups[b] {
                        continue;
                    }
                    for mask in 0..masks as u8 {
                        all.push(make([a, b, c], mask)?);
                    }
                }
            }
        }
        let (chosen, _) = all.partial_shuffle(&mut rng, spec.count);
        return Ok(chosen.to_vec());
    }

    let mut seen = HashSet::with_capacity(spec.count);
    let mut out = Vec::with_capacity(spec.count);
    while out.len() < spec.count {
        let a = rng.gen_range(0..d);
        let b = rng.gen_range(0..d);
        let c = rng.gen_range(0..d);
        if a == b || a == c || b == c {
            continue;
        }
        if groups[a] == groups[b] || groups[a] == groups[c] || groups[b] == groups[c] {
            continue;
        }
        let mask = if spec.literals { rng.gen_range(0..8u8) } else { 0 };
        let q = make([a, b, c], mask)?;
        if seen.insert(q) {
            out.push(q);
        }
    }
    Ok(out)
}

/// Pairs every query with its negation: `[q_0, q̄_0, q_1, q̄_1, ...]`.
pub fn close_under_negation(d: usize, positives: &[Query]) -> Result<QueryClass> {
    let mut seen = HashSet::with_capacity(positives.len() * 2);
    let mut queries = Vec::with_capacity(positives.len() * 2);
    for q in positives {
        q.check_dimension(d)?;
        if !seen.insert(q.positive()) {
            return Err(Error::DuplicateQuery(q.to_string()));
        }
        queries.push(*q);
        queries.push(q.negate());
    }
    Ok(QueryClass::from_pairs(d, queries))
}

/// Attribute-major bitsets: bit `r` of column `a` is attribute `a` of record `r`.
pub struct ColumnIndex {
    n: usize,
    words: usize,
    columns: Vec<u64>,
}

impl ColumnIndex {
    pub fn build(db: &Database) -> Self {
        let n = db.n();
        let words = n.div_ceil(64);
        let mut columns = vec![0u64; db.d() * words];
        for (r, x) in db.records().iter().enumerate() {
            let (w, bit) = (r >> 6, 1u64 << (r & 63));
            for (wi, &xw) in x.words().iter().enumerate() {
                let mut rest = xw;
                while rest != 0 {
                    let a = wi * 64 + rest.trailing_zeros() as usize;
                    columns[a * words + w] |= bit;
                    rest &= rest - 1;
                }
            }
        }
        ColumnIndex { n, words, columns }
    }

    fn column(&self, a: usize) -> &[u64] {
        &self.columns[a * self.words..(a + 1) * self.words]
    }

    /// Number of records on which the non-negated form of `q` is 1.
    pub fn positive_count(&self, q: &Query) -> usize {
        let [a, b, c] = q.attrs();
        let (ca, cb, cc) = (self.column(a), self.column(b), self.column(c));
        match q.kind() {
            QueryKind::Marginal => {
                let flip = |k: usize| if q.literal_negated(k) { u64::MAX } else { 0 };
                let (fa, fb, fc) = (flip(0), flip(1), flip(2));
                let mut count = 0usize;
                for w in 0..self.words {
                    let mut v = (ca[w] ^ fa) & (cb[w] ^ fb) & (cc[w] ^ fc);
                    if w + 1 == self.words && !self.n.is_multiple_of(64) {
                        v &= (1u64 << (self.n % 64)) - 1;
                    }
                    count += v.count_ones() as usize;
                }
                count
            }
            QueryKind::Parity => {
                let odd: usize = (0..self.words)
                    .map(|w| (ca[w] ^ cb[w] ^ cc[w]).count_ones() as usize)
                    .sum();
                self.n - odd
            }
        }
    }

    pub fn count(&self, q: &Query) -> usize {
        let pos = self.positive_count(q);
        if q.is_negated() {
            self.n - pos
        } else {
            pos
        }
    }
}

/// Answers of every class query on `db`, in class order.
pub fn answers_on(class: &QueryClass, db: &Database) -> Result<Vec<f64>> {
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
    let index = ColumnIndex::build(db);
    let n = db.n();
    let counts: Vec<usize> = class
        .queries()
        .par_chunks(2)
        .flat_map_iter(|pair| {
            let c = index.count(&pair[0]);
            let other = if pair.len() == 2 { Some(n - c) } else { None };
            std::iter::once(c).chain(other)
        })
        .collect();
    Ok(counts.into_iter().map(|c| c as f64 / n as f64).collect())
}

/// Fills `class` with true answers on `db`. Idempotent.
pub fn evaluate_all(class: &mut QueryClass, db: &Database) -> Result<()> {
    let answers = answers_on(class, db)?;
    class.set_answers(answers);
    Ok(())
}

/// Reads a workload file: one positive query per line, `#` starts a comment.
pub fn read_workload(path: &Path) -> Result<Vec<Query>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_workload(&text)
}

pub fn parse_workload(text: &str) -> Result<Vec<Query>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let q: Query = line.parse().map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(format!("line {}", lineno + 1), message),
            other => Error::parse(format!("line {}", lineno + 1), other.to_string()),
        })?;
        if q.is_negated() {
            return Err(Error::parse(
                format!("line {}", lineno + 1),
                "workload files hold positive queries only",
            ));
        }
        out.push(q);
    }
    Ok(out)
}

pub fn format_workload(queries: &[Query]) -> String {
    let mut s = String::new();
    for q in queries {
        let _ = writeln!(s, "{q}");
    }
    s
}

pub fn write_workload(path: &Path, queries: &[Query]) -> Result<()> {
    std::fs::write(path, format_workload(queries)).map_err(|e| Error::io(path, e))
}
