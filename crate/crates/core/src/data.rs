//! CSV ingestion and binarization, bias-model synthetic data, and the 0/1
//! database file format.

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Database, Record};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Categorical,
    Continuous,
    Binary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Bucket count for continuous columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buckets: Option<usize>,
    /// Declared category domain. Inferred from the data, in order of first
    /// appearance, when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
    /// Declared `[min, max]` for continuous columns; observed range otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemaSpec {
    pub columns: Vec<ColumnSpec>,
}

impl SchemaSpec {
    pub fn validate(&self) -> Result<()> {
        let mut names = std::collections::HashSet::new();
        for c in &self.columns {
            if !names.insert(c.name.as_str()) {
                return Err(Error::InvalidParameter(format!("duplicate column {:?}", c.name)));
            }
            if c.kind == ColumnKind::Continuous {
                match c.buckets {
                    Some(k) if k >= 2 => {}
                    _ => {
                        return Err(Error::InvalidParameter(format!(
                            "continuous column {:?} needs buckets >= 2",
                            c.name
                        )))
                    }
                }
                if let Some([lo, hi]) = c.range {
                    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                        return Err(Error::InvalidParameter(format!(
                            "column {:?} has invalid range [{lo}, {hi}]",
                            c.name
                        )));
                    }
                }
            }
            if let Some(cats) = &c.categories {
                let distinct: std::collections::HashSet<_> = cats.iter().collect();
                if distinct.len() != cats.len() || cats.is_empty() {
                    return Err(Error::InvalidParameter(format!(
                        "column {:?} has empty or repeated categories",
                        c.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One input column and the output features it was expanded into.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub column: String,
    pub kind: ColumnKind,
    pub start: usize,
    pub end: usize,
    pub labels: Vec<String>,
    /// Bucket boundaries `lo = e_0 < ... < e_k = hi` for continuous columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<f64>>,
}

impl FeatureGroup {
    pub fn categorical(column: &str, start: usize, end: usize, labels: Vec<String>) -> Self {
        FeatureGroup {
            column: column.to_string(),
            kind: ColumnKind::Categorical,
            start,
            end,
            labels,
            edges: None,
        }
    }

    pub fn binary(column: &str, index: usize) -> Self {
        FeatureGroup {
            column: column.to_string(),
            kind: ColumnKind::Binary,
            start: index,
            end: index + 1,
            labels: vec![column.to_string()],
            edges: None,
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub groups: Vec<FeatureGroup>,
}

impl FeatureMap {
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for g in &self.groups {
            for label in &g.labels {
                names.push(match g.kind {
                    ColumnKind::Binary => g.column.clone(),
                    ColumnKind::Categorical => format!("{}={}", g.column, label),
                    ColumnKind::Continuous => format!("{}[{}]", g.column, label),
                });
            }
        }
        names
    }

    pub fn d(&self) -> usize {
        self.groups.last().map_or(0, |g| g.end)
    }
}

/// Per-attribute probabilities of the bias model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasVector {
    pub p: Vec<f64>,
}

impl BiasVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!("bias {bad} outside [0, 1]")));
        }
        Ok(BiasVector { p })
    }
}

fn bucket_of(value: f64, lo: f64, hi: f64, k: usize) -> usize {
    if hi <= lo {
        return 0;
    }
    let pos = ((value - lo) / (hi - lo) * k as f64).floor();
    (pos.max(0.0) as usize).min(k - 1)
}

/// Reads a headed CSV and one-hot encodes it according to `schema`.
pub fn ingest_csv(path: &Path, schema: &SchemaSpec) -> Result<(Database, FeatureMap)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file, schema)
}

pub fn ingest_reader<R: std::io::Read>(reader: R, schema: &SchemaSpec) -> Result<(Database, FeatureMap)> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::parse("header", e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let mut positions = Vec::with_capacity(schema.columns.len());
    for c in &schema.columns {
        let pos = header
            .iter()
            .position(|h| h == &c.name)
            .ok_or_else(|| Error::parse("header", format!("missing column {:?}", c.name)))?;
        positions.push(pos);
    }
    if let Some(extra) = header.iter().find(|h| !schema.columns.iter().any(|c| &c.name == *h)) {
        return Err(Error::parse("header", format!("column {extra:?} not in schema")));
    }

    let mut rows: Vec<Vec<String>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        // data rows are numbered from 1; the header is line 1 of the file
        let row = i + 1;
        let rec = rec.map_err(|e| Error::parse(format!("row {row}"), e.to_string()))?;
        if rec.len() != header.len() {
            return Err(Error::parse(
                format!("row {row}"),
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        let mut cells = Vec::with_capacity(positions.len());
        for (c, &pos) in schema.columns.iter().zip(&positions) {
            let v = rec[pos].trim();
            if v.is_empty() {
                return Err(Error::parse(
                    format!("row {row}"),
                    format!("missing value in column {:?}", c.name),
                ));
            }
            cells.push(v.to_string());
        }
        rows.push(cells);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDatabase);
    }

    // Resolve each column's encoding before emitting records.
    enum Enc {
        Cat(HashMap<String, usize>),
        Cont { lo: f64, hi: f64, k: usize },
        Bin,
    }
    let mut groups = Vec::new();
    let mut encs = Vec::new();
    let mut start = 0usize;
    for (ci, c) in schema.columns.iter().enumerate() {
        match c.kind {
            ColumnKind::Categorical => {
                let cats = match &c.categories {
                    Some(cats) => cats.clone(),
                    None => {
                        let mut seen = Vec::new();
                        for r in &rows {
                            if !seen.contains(&r[ci]) {
                                seen.push(r[ci].clone());
                            }
                        }
                        seen
                    }
                };
                let lookup = cats.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
                groups.push(FeatureGroup::categorical(&c.name, start, start + cats.len(), cats.clone()));
                start += cats.len();
                encs.push(Enc::Cat(lookup));
            }
            ColumnKind::Continuous => {
                let k = c.buckets.expect("validated");
                let mut values = Vec::with_capacity(rows.len());
                for (ri, r) in rows.iter().enumerate() {
                    let v: f64 = r[ci].parse().map_err(|_| {
                        Error::parse(
                            format!("row {}", ri + 1),
                            format!("column {:?}: {:?} is not a number", c.name, r[ci]),
                        )
                    })?;
                    if !v.is_finite() {
                        return Err(Error::parse(
                            format!("row {}", ri + 1),
                            format!("column {:?}: non-finite value", c.name),
                        ));
                    }
                    values.push(v);
                }
                let (lo, hi) = match c.range {
                    Some([lo, hi]) => (lo, hi),
                    None => values
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))),
                };
                let edges: Vec<f64> = (0..=k).map(|i| lo + (hi - lo) * i as f64 / k as f64).collect();
                groups.push(FeatureGroup {
                    column: c.name.clone(),
                    kind: ColumnKind::Continuous,
                    start,
                    end: start + k,
                    labels: (0..k).map(|i| i.to_string()).collect(),
                    edges: Some(edges),
                });
                start += k;
                encs.push(Enc::Cont { lo, hi, k });
            }
            ColumnKind::Binary => {
                groups.push(FeatureGroup::binary(&c.name, start));
                start += 1;
                encs.push(Enc::Bin);
            }
        }
    }

    let map = FeatureMap { groups };
    let d = start;
    let mut records = Vec::with_capacity(rows.len());
    for (ri, r) in rows.iter().enumerate() {
        let row = ri + 1;
        let mut x = Record::zeros(d);
        for ((cell, enc), g) in r.iter().zip(&encs).zip(&map.groups) {
            match enc {
                Enc::Cat(lookup) => {
                    let k = lookup.get(cell).ok_or_else(|| {
                        Error::parse(
                            format!("row {row}"),
                            format!("unknown category {cell:?} in column {:?}", g.column),
                        )
                    })?;
                    x.set(g.start + k, true);
                }
                Enc::Cont { lo, hi, k } => {
                    let v: f64 = cell.parse().expect("parsed above");
                    if v < *lo || v > *hi {
                        return Err(Error::parse(
                            format!("row {row}"),
                            format!("value {v} outside declared range of {:?}", g.column),
                        ));
                    }
                    x.set(g.start + bucket_of(v, *lo, *hi, *k), true);
                }
                Enc::Bin => match cell.as_str() {
                    "0" => {}
                    "1" => x.set(g.start, true),
                    other => {
                        return Err(Error::parse(
                            format!("row {row}"),
                            format!("column {:?}: expected 0 or 1, found {other:?}", g.column),
                        ))
                    }
                },
            }
        }
        records.push(x);
    }
    let db = Database::with_names(map.feature_names(), records)?;
    Ok((db, map))
}

/// Bias-model data: `p_i ~ U[0,1]`, then bit `i` of every record is 1 with
/// probability `p_i`, independently.
pub fn generate_synthetic(d: usize, n: usize, seed: u64) -> Result<(Database, BiasVector)> {
    if d == 0 || n == 0 {
        return Err(Error::InvalidParameter(format!(
            "synthetic data needs d >= 1 and n >= 1, got d={d}, n={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
    let records = (0..n)
        .map(|_| {
            let mut x = Record::zeros(d);
            for (i, &pi) in p.iter().enumerate() {
                if rng.gen::<f64>() < pi {
                    x.set(i, true);
                }
            }
            x
        })
        .collect();
    Ok((Database::new(d, records)?, BiasVector { p }))
}

pub fn format_database(db: &Database) -> String {
    let mut out = String::with_capacity((db.d() * 2 + 1) * (db.n() + 1));
    out.push_str(&db.names().join(","));
    out.push('\n');
    for x in db.records() {
        for (i, b) in x.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push(if b { '1' } else { '0' });
        }
        out.push('\n');
    }
    out
}

pub fn write_database(db: &Database, path: &Path) -> Result<()> {
    std::fs::write(path, format_database(db)).map_err(|e| Error::io(path, e))
}

pub fn parse_database(text: &str) -> Result<Database> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse("line 1", "missing header"))?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let d = names.len();
    let mut records = Vec::new();
    for (lineno, line) in lines {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != d {
            return Err(Error::parse(
                format!("line {}", lineno + 1),
                format!("expected {d} fields, found {}", cells.len()),
            ));
        }
        let mut x = Record::zeros(d);
        for (i, c) in cells.iter().enumerate() {
            match c.trim() {
                "0" => {}
                "1" => x.set(i, true),
                other => {
                    return Err(Error::parse(
                        format!("line {}, column {}", lineno + 1, i + 1),
                        format!("expected 0 or 1, found {other:?}"),
                    ))
                }
            }
        }
        records.push(x);
    }
    if records.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    Database::with_names(names, records)
}

pub fn read_database(path: &Path) -> Result<Database> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_database(&text)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
