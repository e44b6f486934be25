//! The query player's multiplicative-weights distribution.
//!
//! Weights are kept in log space as `η · Σ_{i<t} A_D(x^i, q)`, so the
//! distribution at round `t` is exactly an exponential mechanism whose score
//! is the cumulative payoff. Queries that the chosen records answer badly
//! gain weight.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{payoff, QueryClass, Record};

#[derive(Clone, Debug)]
pub struct WeightState {
    log_weights: Vec<f64>,
    cumulative: Vec<f64>,
    round: usize,
    eta: f64,
}

impl WeightState {
    /// Uniform distribution over `class`, round 1.
    pub fn init_uniform(class: &QueryClass, eta: f64) -> Result<Self> {
        if class.is_empty() {
            return Err(Error::InvalidParameter("query class is empty".into()));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta must be positive, got {eta}")));
        }
        Ok(WeightState {
            log_weights: vec![0.0; class.len()],
            cumulative: vec![0.0; class.len()],
            round: 1,
            eta,
        })
    }

    /// A state with explicit log-weights, for diagnostics and tests.
    pub fn from_log_weights(log_weights: Vec<f64>, eta: f64) -> Result<Self> {
        if log_weights.is_empty() {
            return Err(Error::InvalidParameter("no weights".into()));
        }
        let cumulative = log_weights.iter().map(|w| w / eta).collect();
        Ok(WeightState {
            log_weights,
            cumulative,
            round: 1,
            eta,
        })
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn cumulative_payoffs(&self) -> &[f64] {
        &self.cumulative
    }

    /// Adds `A_D(x_t, q_j)` to every query's running payoff.
    pub fn update(&mut self, x: &Record, class: &QueryClass) -> Result<()> {
        let answers = class.require_answers()?;
        if class.len() != self.len() {
            return Err(Error::SchemaMismatch(format!(
                "weight state has {} entries, class has {}",
                self.len(),
                class.len()
            )));
        }
        if x.len() != class.d() {
            return Err(Error::SchemaMismatch(format!(
                "record has {} attributes, class expects {}",
                x.len(),
                class.d()
            )));
        }
        let eta = self.eta;
        self.cumulative
            .par_iter_mut()
            .zip(self.log_weights.par_iter_mut())
            .zip(class.queries().par_iter().zip(answers.par_iter()))
            .for_each(|((cum, logw), (q, &v))| {
                *cum += payoff(v, q, x);
                *logw = eta * *cum;
            });
        self.round += 1;
        Ok(())
    }

    /// Normalized probabilities (softmax with max subtraction).
    pub fn distribution(&self) -> Vec<f64> {
        let max = self
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut p: Vec<f64> = self.log_weights.iter().map(|w| (w - max).exp()).collect();
        let z: f64 = p.iter().sum();
        for v in &mut p {
            *v /= z;
        }
        p
    }

    /// `s` independent draws with replacement, by inverse CDF.
    pub fn sample<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> Vec<usize> {
        let p = self.distribution();
        let mut cdf = Vec::with_capacity(p.len());
        let mut acc = 0.0;
        for v in &p {
            acc += v;
            cdf.push(acc);
        }
        let total = acc;
        let last = p.iter().rposition(|&v| v > 0.0).unwrap_or(p.len() - 1);
        (0..s)
            .map(|_| {
                let u = rng.gen::<f64>() * total;
                cdf.partition_point(|&c| c <= u).min(last)
            })
            .collect()
    }

    /// The `k` heaviest queries, by descending probability then index.
    pub fn top_k(&self, k: usize) -> Vec<(usize, f64)> {
        let p = self.distribution();
        let mut idx: Vec<usize> = (0..p.len()).collect();
        idx.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
        idx.into_iter().take(k).map(|j| (j, p[j])).collect()
    }
}

/// One line of the per-round weight dump.
#[derive(Clone, Debug, Serialize)]
pub struct WeightDump {
    pub round: usize,
    pub top: Vec<WeightDumpEntry>,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeightDumpEntry {
    pub query: String,
    pub probability: f64,
}

impl WeightDump {
    pub fn capture(state: &WeightState, class: &QueryClass, k: usize) -> Self {
        WeightDump {
            round: state.round(),
            top: state
                .top_k(k)
                .into_iter()
                .map(|(j, p)| WeightDumpEntry {
                    query: class.get(j).to_string(),
                    probability: p,
                })
                .collect(),
        }
    }
}
