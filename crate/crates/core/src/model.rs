//! Records, databases, queries and the payoff of the query-release game.
//!
//! Records live in `{0,1}^d`. Both query kinds evaluate to `{0,1}`: a
//! marginal is a conjunction of three literals, a parity query is 1 when an
//! even number of its three bits are set. Mapping the `±1` parity convention
//! onto `{0,1}` keeps every query linear with payoffs in `[-1, 1]`.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the data universe, bit-packed into 64-bit words.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Record {
    words: Vec<u64>,
    len: usize,
}

impl Record {
    pub fn zeros(len: usize) -> Self {
        Record {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut r = Record::zeros(len);
        for i in 0..len {
            r.set(i, true);
        }
        r
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut r = Record::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            r.set(i, b);
        }
        r
    }

    /// Builds a record from the low `len` bits of `value`, bit `i` of the
    /// record taken from bit `i` of the integer.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= 64);
        let mut r = Record::zeros(len);
        if len > 0 {
            let mask = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
            r.words[0] = value & mask;
        }
        r
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i & 63);
        if value {
            self.words[i >> 6] |= mask;
        } else {
            self.words[i >> 6] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i >> 6] ^= 1u64 << (i & 63);
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }
}

/// Lexicographic order on the bit string `x_0 x_1 ... x_{d-1}`.
impl Ord for Record {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.words.iter().zip(&other.words) {
            let diff = a ^ b;
            if diff != 0 {
                let bit = diff.trailing_zeros();
                return if (a >> bit) & 1 == 0 {
                    Ordering::Less
                } else {
                    Ordering::Greater
                };
            }
        }
        self.len.cmp(&other.len)
    }
}

impl PartialOrd for Record {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Record({self})")
    }
}

impl FromStr for Record {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                other => {
                    return Err(Error::parse(
                        format!("bit {i}"),
                        format!("expected 0 or 1, found {other:?}"),
                    ))
                }
            }
        }
        Ok(Record::from_bits(&bits))
    }
}

/// A multiset of records over `d` named binary attributes.
///
/// Multiplicity is carried by repeated entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Database {
    d: usize,
    names: Vec<String>,
    records: Vec<Record>,
}

impl Database {
    pub fn new(d: usize, records: Vec<Record>) -> Result<Self> {
        Database::with_names(default_feature_names(d), records)
    }

    pub fn with_names(names: Vec<String>, records: Vec<Record>) -> Result<Self> {
        let d = names.len();
        if let Some((i, r)) = records.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(Error::SchemaMismatch(format!(
                "record {i} has {} attributes, schema has {d}",
                r.len()
            )));
        }
        Ok(Database { d, names, records })
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn push(&mut self, record: Record) -> Result<()> {
        if record.len() != self.d {
            return Err(Error::SchemaMismatch(format!(
                "record has {} attributes, schema has {}",
                record.len(),
                self.d
            )));
        }
        self.records.push(record);
        Ok(())
    }
}

pub fn default_feature_names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("x{i}")).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    Marginal,
    Parity,
}

impl QueryKind {
    fn tag(self) -> char {
        match self {
            QueryKind::Marginal => 'M',
            QueryKind::Parity => 'P',
        }
    }
}

/// A 3-way marginal or 3-wise parity query, optionally negated.
///
/// Marginals may additionally negate individual literals (`neg_literals`
/// bit `k` negates the literal on `attrs[k]`), so `x_a ∧ ¬x_b ∧ x_c` is a
/// positive marginal. Attributes are kept sorted; the literal mask follows
/// them.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Query {
    kind: QueryKind,
    attrs: [u32; 3],
    neg_literals: u8,
    negated: bool,
}

impl Query {
    pub fn marginal(attrs: [usize; 3]) -> Result<Self> {
        Query::build(QueryKind::Marginal, attrs, 0)
    }

    /// A conjunction of literals; `neg_literals` bit `k` negates `attrs[k]`.
    pub fn marginal_literals(attrs: [usize; 3], neg_literals: u8) -> Result<Self> {
        Query::build(QueryKind::Marginal, attrs, neg_literals)
    }

    pub fn parity(attrs: [usize; 3]) -> Result<Self> {
        Query::build(QueryKind::Parity, attrs, 0)
    }

    pub fn new(kind: QueryKind, attrs: [usize; 3], neg_literals: u8, negated: bool) -> Result<Self> {
        let mut q = Query::build(kind, attrs, neg_literals)?;
        q.negated = negated;
        Ok(q)
    }

    fn build(kind: QueryKind, attrs: [usize; 3], neg_literals: u8) -> Result<Self> {
        if attrs[0] == attrs[1] || attrs[0] == attrs[2] || attrs[1] == attrs[2] {
            return Err(Error::InvalidQuery(format!(
                "attribute indices must be distinct, got {attrs:?}"
            )));
        }
        if neg_literals > 0b111 {
            return Err(Error::InvalidQuery(format!(
                "literal mask {neg_literals:#b} has more than three bits"
            )));
        }
        if kind == QueryKind::Parity && neg_literals != 0 {
            return Err(Error::InvalidQuery(
                "parity queries take no literal negations".into(),
            ));
        }
        if attrs.iter().any(|&a| a > u32::MAX as usize) {
            return Err(Error::InvalidQuery("attribute index too large".into()));
        }
        let mut pairs = [
            (attrs[0] as u32, neg_literals & 1),
            (attrs[1] as u32, (neg_literals >> 1) & 1),
            (attrs[2] as u32, (neg_literals >> 2) & 1),
        ];
        pairs.sort_unstable();
        Ok(Query {
            kind,
            attrs: [pairs[0].0, pairs[1].0, pairs[2].0],
            neg_literals: pairs[0].1 | (pairs[1].1 << 1) | (pairs[2].1 << 2),
            negated: false,
        })
    }

    #[inline]
    pub fn kind(&self) -> QueryKind {
        self.kind
    }

    #[inline]
    pub fn attrs(&self) -> [usize; 3] {
        self.attrs.map(|a| a as usize)
    }

    #[inline]
    pub fn neg_literals(&self) -> u8 {
        self.neg_literals
    }

    #[inline]
    pub fn literal_negated(&self, k: usize) -> bool {
        (self.neg_literals >> k) & 1 == 1
    }

    #[inline]
    pub fn is_negated(&self) -> bool {
        self.negated
    }

    /// The complementary query. An involution.
    #[inline]
    pub fn negate(&self) -> Query {
        Query {
            negated: !self.negated,
            ..*self
        }
    }

    /// The non-negated member of the `{q, q̄}` pair.
    pub fn positive(&self) -> Query {
        Query {
            negated: false,
            ..*self
        }
    }

    pub fn check_dimension(&self, d: usize) -> Result<()> {
        match self.attrs.iter().find(|&&a| a as usize >= d) {
            Some(a) => Err(Error::SchemaMismatch(format!(
                "query {self} uses attribute {a}, record has {d}"
            ))),
            None => Ok(()),
        }
    }

    /// Value on `x` as 0 or 1. Indices must already be known valid.
    #[inline]
    pub fn eval_unchecked(&self, x: &Record) -> u8 {
        let [a, b, c] = self.attrs;
        let (a, b, c) = (x.get(a as usize), x.get(b as usize), x.get(c as usize));
        let base = match self.kind {
            QueryKind::Marginal => {
                let m = self.neg_literals;
                (a ^ (m & 1 == 1)) && (b ^ (m & 2 == 2)) && (c ^ (m & 4 == 4))
            }
            QueryKind::Parity => !(a ^ b ^ c),
        };
        (base ^ self.negated) as u8
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}",
            self.kind.tag(),
            if self.negated { '-' } else { '+' }
        )?;
        for k in 0..3 {
            let bang = if self.literal_negated(k) { "!" } else { "" };
            write!(f, " {bang}{}", self.attrs[k])?;
        }
        Ok(())
    }
}

impl fmt::Debug for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Query({self})")
    }
}

impl FromStr for Query {
    type Err = Error;

    /// Parses `M + a b c`, `P - i j k`, with `!a` marking a negated literal.
    fn from_str(s: &str) -> Result<Self> {
        let tokens: Vec<&str> = s.split_whitespace().collect();
        if tokens.len() != 5 {
            return Err(Error::parse(
                format!("{s:?}"),
                "expected `<M|P> <+|-> a b c`",
            ));
        }
        let kind = match tokens[0] {
            "M" => QueryKind::Marginal,
            "P" => QueryKind::Parity,
            t => return Err(Error::parse(format!("{s:?}"), format!("unknown kind {t:?}"))),
        };
        let negated = match tokens[1] {
            "+" => false,
            "-" => true,
            t => return Err(Error::parse(format!("{s:?}"), format!("unknown sign {t:?}"))),
        };
        let mut attrs = [0usize; 3];
        let mut mask = 0u8;
        for k in 0..3 {
            let tok = tokens[2 + k];
            let (neg, digits) = match tok.strip_prefix('!') {
                Some(rest) => (true, rest),
                None => (false, tok),
            };
            attrs[k] = digits.parse().map_err(|_| {
                Error::parse(format!("{s:?}"), format!("bad attribute index {tok:?}"))
            })?;
            if neg {
                mask |= 1 << k;
            }
        }
        Query::new(kind, attrs, mask, negated)
    }
}

/// `q(x)` with index validation.
pub fn eval_query(q: &Query, x: &Record) -> Result<u8> {
    q.check_dimension(x.len())?;
    Ok(q.eval_unchecked(x))
}

/// `q(D) = (1/n) Σ_{x∈D} q(x)`.
pub fn eval_query_db(q: &Query, db: &Database) -> Result<f64> {
    if db.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    q.check_dimension(db.d())?;
    let count: usize = db
        .records()
        .iter()
        .map(|x| q.eval_unchecked(x) as usize)
        .sum();
    Ok(count as f64 / db.n() as f64)
}

/// Game payoff `A(x, q) = q(D) - q(x)`, given `q(D)`.
#[inline]
pub fn payoff(value_on_db: f64, q: &Query, x: &Record) -> f64 {
    value_on_db - q.eval_unchecked(x) as f64
}

/// A query class closed under negation. Position `2k` holds a positive
/// query, `2k + 1` its negation.
#[derive(Clone, Debug)]
pub struct QueryClass {
    d: usize,
    queries: Vec<Query>,
    index: HashMap<Query, usize>,
    answers: Option<Vec<f64>>,
}

impl QueryClass {
    pub(crate) fn from_pairs(d: usize, queries: Vec<Query>) -> Self {
        let index = queries.iter().enumerate().map(|(i, q)| (*q, i)).collect();
        QueryClass {
            d,
            queries,
            index,
            answers: None,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn queries(&self) -> &[Query] {
        &self.queries
    }

    pub fn get(&self, j: usize) -> &Query {
        &self.queries[j]
    }

    pub fn position(&self, q: &Query) -> Option<usize> {
        self.index.get(q).copied()
    }

    /// Position of the negation of the query at `j`.
    #[inline]
    pub fn partner(j: usize) -> usize {
        j ^ 1
    }

    /// The non-negated queries, in class order.
    pub fn positives(&self) -> impl Iterator<Item = (usize, &Query)> {
        self.queries.iter().enumerate().filter(|(_, q)| !q.is_negated())
    }

    pub fn true_answers(&self) -> Option<&[f64]> {
        self.answers.as_deref()
    }

    pub(crate) fn set_answers(&mut self, answers: Vec<f64>) {
        debug_assert_eq!(answers.len(), self.queries.len());
        self.answers = Some(answers);
    }

    pub(crate) fn require_answers(&self) -> Result<&[f64]> {
        self.true_answers().ok_or_else(|| {
            Error::InvalidParameter("query class has no true answers; evaluate it first".into())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(s: &str) -> Record {
        s.parse().unwrap()
    }

    #[test]
    fn marginal_on_all_ones() {
        let q = Query::marginal([0, 1, 2]).unwrap();
        assert_eq!(eval_query(&q, &rec("111")).unwrap(), 1);
        assert_eq!(eval_query(&q, &rec("110")).unwrap(), 0);
    }

    #[test]
    fn negated_marginal_complements() {
        let q = Query::marginal([0, 1, 2]).unwrap().negate();
        assert_eq!(eval_query(&q, &rec("110")).unwrap(), 1);
        assert_eq!(eval_query(&q, &rec("111")).unwrap(), 0);
    }

    #[test]
    fn parity_counts_even_bits() {
        let q = Query::parity([0, 1, 2]).unwrap();
        // two ones: even
        assert_eq!(eval_query(&q, &rec("110")).unwrap(), 1);
        assert_eq!(eval_query(&q, &rec("000")).unwrap(), 1);
        assert_eq!(eval_query(&q, &rec("100")).unwrap(), 0);
        assert_eq!(eval_query(&q, &rec("111")).unwrap(), 0);
        assert_eq!(eval_query(&q.negate(), &rec("111")).unwrap(), 1);
    }

    #[test]
    fn literal_marginal() {
        let q = Query::marginal_literals([2, 0, 1], 0b001).unwrap();
        // literal on attribute 2 is negated; attrs sort to (0,1,2) with mask 0b100
        assert_eq!(q.attrs(), [0, 1, 2]);
        assert_eq!(q.neg_literals(), 0b100);
        assert_eq!(q.eval_unchecked(&rec("110")), 1);
        assert_eq!(q.eval_unchecked(&rec("111")), 0);
        assert_eq!(q.to_string(), "M + 0 1 !2");
    }

    #[test]
    fn out_of_range_index_is_schema_mismatch() {
        let q = Query::marginal([0, 1, 5]).unwrap();
        assert!(matches!(
            eval_query(&q, &rec("111")),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn repeated_index_rejected() {
        assert!(Query::marginal([1, 1, 2]).is_err());
        assert!(Query::marginal_literals([0, 1, 2], 0b1000).is_err());
        assert!(Query::new(QueryKind::Parity, [0, 1, 2], 1, false).is_err());
    }

    #[test]
    fn database_value() {
        let db = Database::new(3, vec![rec("111"), rec("110"), rec("011")]).unwrap();
        let q = Query::marginal([0, 1, 2]).unwrap();
        assert!((eval_query_db(&q, &db).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let sum = eval_query_db(&q, &db).unwrap() + eval_query_db(&q.negate(), &db).unwrap();
        assert!((sum - 1.0).abs() < 1e-15);

        let single = Database::new(3, vec![rec("000")]).unwrap();
        let p = Query::parity([0, 1, 2]).unwrap();
        assert_eq!(eval_query_db(&p, &single).unwrap(), 1.0);
    }

    #[test]
    fn empty_database_rejected() {
        let db = Database::new(3, vec![]).unwrap();
        let q = Query::marginal([0, 1, 2]).unwrap();
        assert!(matches!(eval_query_db(&q, &db), Err(Error::EmptyDatabase)));
    }

    #[test]
    fn ragged_database_rejected() {
        assert!(Database::new(3, vec![rec("11")]).is_err());
    }

    #[test]
    fn negate_is_involution() {
        let q = Query::marginal([1, 2, 3]).unwrap();
        let nq = q.negate();
        assert!(nq.is_negated());
        assert_eq!(nq.attrs(), q.attrs());
        assert_eq!(nq.kind(), q.kind());
        assert_eq!(nq.negate(), q);
    }

    #[test]
    fn payoff_values() {
        let q = Query::marginal([0, 1, 2]).unwrap();
        assert_eq!(payoff(0.5, &q, &rec("111")), -0.5);
        assert_eq!(payoff(1.0, &q, &rec("111")), 0.0);
        assert_eq!(payoff(0.25, &q, &rec("011")), 0.25);
    }

    #[test]
    fn negation_closure_by_enumeration() {
        // all queries and records at d = 5
        let d = 5;
        for a in 0..d {
            for b in (a + 1)..d {
                for c in (b + 1)..d {
                    let mut qs = vec![Query::parity([a, b, c]).unwrap()];
                    for mask in 0..8 {
                        qs.push(Query::marginal_literals([a, b, c], mask).unwrap());
                    }
                    for q in qs {
                        for v in 0..(1u64 << d) {
                            let x = Record::from_u64(v, d);
                            let s = q.eval_unchecked(&x) + q.negate().eval_unchecked(&x);
                            assert_eq!(s, 1, "{q} on {x}");
                            let value = 0.3;
                            let lhs = payoff(1.0 - value, &q.negate(), &x);
                            assert!((lhs + payoff(value, &q, &x)).abs() < 1e-15);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn record_lexicographic_order() {
        assert!(rec("000") < rec("001"));
        assert!(rec("011") < rec("100"));
        let mut long_a = Record::zeros(130);
        let mut long_b = Record::zeros(130);
        long_a.set(129, true);
        long_b.set(70, true);
        assert!(long_a < long_b);
    }

    #[test]
    fn query_text_round_trip() {
        for s in ["M + 0 1 2", "M - 3 !7 9", "P + 1 2 3", "P - 0 4 8"] {
            let q: Query = s.parse().unwrap();
            assert_eq!(q.to_string(), s);
        }
        assert!("P + !1 2 3".parse::<Query>().is_err());
        assert!("X + 1 2 3".parse::<Query>().is_err());
        assert!("M + 1 2".parse::<Query>().is_err());
    }
}
