//! Privacy cost of a run as a function of `(T, s, η, n)`.
//!
//! Every sample drawn in round `t` is one exponential-mechanism draw with a
//! score of sensitivity `(t-1)/n`, so it costs `ε_t = 2η(t-1)/n`. Round 1
//! samples from the uniform distribution and is free. Three accountants
//! compose these draws:
//!
//! - `pure`: basic composition, `ε = ηT(T-1)s/n`;
//! - `approx`: advanced composition with every draw charged the worst
//!   per-draw cost `2η(T-1)/n`;
//! - `hetero`: advanced composition with each round charged its own cost.
//!
//! All logarithms are natural. `|X| = 2^d` enters only as `d·ln 2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    #[serde(rename = "T")]
    pub rounds: u64,
    #[serde(rename = "s")]
    pub samples: u64,
    pub eta: f64,
    pub n: u64,
}

impl RunParams {
    pub fn new(rounds: u64, samples: u64, eta: f64, n: u64) -> Result<Self> {
        let p = RunParams {
            rounds,
            samples,
            eta,
            n,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 || self.samples == 0 || self.n == 0 {
            return Err(Error::InvalidParameter(format!(
                "T, s and n must be positive (T={}, s={}, n={})",
                self.rounds, self.samples, self.n
            )));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta must be positive, got {}", self.eta)));
        }
        Ok(())
    }

    fn with_rounds(&self, rounds: u64) -> Self {
        RunParams { rounds, ..*self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Accountant {
    Pure,
    Approx,
    Hetero,
}

impl std::str::FromStr for Accountant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pure" => Ok(Accountant::Pure),
            "approx" => Ok(Accountant::Approx),
            "hetero" => Ok(Accountant::Hetero),
            other => Err(Error::InvalidParameter(format!("unknown accountant {other:?}"))),
        }
    }
}

impl std::fmt::Display for Accountant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Accountant::Pure => "pure",
            Accountant::Approx => "approx",
            Accountant::Hetero => "hetero",
        })
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")))
    }
}

/// `ηT(T-1)s/n`.
pub fn pure_epsilon(p: &RunParams) -> f64 {
    let pairs = (p.rounds * (p.rounds - 1)) as f64;
    p.eta * p.samples as f64 * pairs / p.n as f64
}

/// Advanced composition over `k = s(T-1)` draws of cost `ε' = 2η(T-1)/n`:
/// `ε'·√(2k ln(1/δ)) + k·ε'·(e^{ε'} - 1)`.
pub fn approx_epsilon(p: &RunParams, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if p.rounds <= 1 {
        return Ok(0.0);
    }
    let per_draw = 2.0 * p.eta * (p.rounds - 1) as f64 / p.n as f64;
    let k = (p.samples * (p.rounds - 1)) as f64;
    Ok(per_draw * (2.0 * k * (1.0 / delta).ln()).sqrt() + k * per_draw * per_draw.exp_m1())
}

/// Advanced composition with per-round costs `ε_t = 2η(t-1)/n`:
/// `√(2 ln(1/δ) Σ_t s ε_t²) + Σ_t s ε_t (e^{ε_t} - 1)`.
pub fn hetero_epsilon(p: &RunParams, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if p.rounds <= 1 {
        return Ok(0.0);
    }
    let unit = 2.0 * p.eta / p.n as f64;
    let s = p.samples as f64;
    let m = (p.rounds - 1) as f64;
    // Σ_{k=1}^{T-1} k²
    let squares = m * (m + 1.0) * (2.0 * m + 1.0) / 6.0;
    let linear: f64 = (1..p.rounds)
        .map(|k| {
            let e = unit * k as f64;
            s * e * e.exp_m1()
        })
        .sum();
    Ok(unit * (2.0 * s * squares * (1.0 / delta).ln()).sqrt() + linear)
}

pub fn epsilon(accountant: Accountant, p: &RunParams, delta: f64) -> Result<f64> {
    match accountant {
        Accountant::Pure => Ok(pure_epsilon(p)),
        Accountant::Approx => approx_epsilon(p, delta),
        Accountant::Hetero => hetero_epsilon(p, delta),
    }
}

pub const DEFAULT_ROUND_CEILING: u64 = 1_000_000;

/// Largest `T ≤ ceiling` whose cost stays within `epsilon`; 1 when even two
/// rounds are too expensive.
pub fn max_rounds(
    epsilon_budget: f64,
    delta: f64,
    eta: f64,
    samples: u64,
    n: u64,
    accountant: Accountant,
    ceiling: u64,
) -> Result<u64> {
    if epsilon_budget.is_nan() || epsilon_budget <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon_budget}"
        )));
    }
    if accountant != Accountant::Pure {
        check_delta(delta)?;
    }
    let base = RunParams::new(1, samples, eta, n)?;
    let fits = |t: u64| -> Result<bool> { Ok(epsilon(accountant, &base.with_rounds(t), delta)? <= epsilon_budget) };
    let ceiling = ceiling.max(1);
    if ceiling < 2 || !fits(2)? {
        return Ok(1);
    }
    // fits(lo) holds; grow hi until it fails or hits the ceiling
    let mut lo = 2u64;
    let mut hi = 4u64.min(ceiling);
    while hi < ceiling && fits(hi)? {
        lo = hi;
        hi = (hi * 2).min(ceiling);
    }
    if fits(hi)? {
        return Ok(hi);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if fits(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    #[serde(rename = "T")]
    pub rounds: u64,
    pub eta: f64,
    #[serde(rename = "s")]
    pub samples: u64,
}

/// `T = ⌈16 ln|Q| / α²⌉`, `η = α/4`, `s = ⌈48 ln(2|X|T/β) / α²⌉`, with
/// `ln|X| = d ln 2`.
pub fn theory_params(alpha: f64, beta: f64, size_q: u64, d: u64) -> Result<TheoryParams> {
    if !(alpha > 0.0 && alpha < 1.0 && beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha and beta must lie in (0, 1), got alpha={alpha}, beta={beta}"
        )));
    }
    if size_q < 2 || d == 0 {
        return Err(Error::InvalidParameter("need |Q| >= 2 and d >= 1".into()));
    }
    let a2 = alpha * alpha;
    let rounds = (16.0 * (size_q as f64).ln() / a2).ceil() as u64;
    let log_term = (2.0 * rounds as f64 / beta).ln() + d as f64 * std::f64::consts::LN_2;
    let samples = (48.0 * log_term / a2).ceil() as u64;
    Ok(TheoryParams {
        rounds,
        eta: alpha / 4.0,
        samples,
    })
}

/// Samples per round for which the aggregate of `s` draws tracks the full
/// weighted query within `α/4` at every record with probability `1 - β`:
/// `⌈48 ln(2|X|/β) / α²⌉`.
pub fn concentration_samples(alpha: f64, beta: f64, d: u64) -> u64 {
    let log_term = (2.0 / beta).ln() + d as f64 * std::f64::consts::LN_2;
    (48.0 * log_term / (alpha * alpha)).ceil() as u64
}

/// Accuracy reachable at budget `(ε, δ)` with the implied constant set to 1:
/// `√(ln|Q|) · ln(1/δ)^{1/6} · ln(2|X|/γ)^{1/6} / (nε)^{1/3}`.
/// Asymptotic; diagnostic only.
pub fn accuracy_estimate(epsilon: f64, delta: f64, size_q: f64, d: u64, n: f64, gamma: f64) -> Result<f64> {
    if !(epsilon > 0.0 && delta > 0.0 && size_q > 0.0 && n > 0.0 && gamma > 0.0) {
        return Err(Error::InvalidParameter("all inputs must be positive".into()));
    }
    let log_x = (2.0 / gamma).ln() + d as f64 * std::f64::consts::LN_2;
    Ok(size_q.ln().sqrt() * (1.0 / delta).ln().powf(1.0 / 6.0) * log_x.powf(1.0 / 6.0)
        / (n * epsilon).cbrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub pure: f64,
    pub approx: f64,
    pub hetero: f64,
    pub delta: f64,
    pub params: RunParams,
}

impl PrivacyReport {
    pub fn new(params: RunParams, delta: f64) -> Result<Self> {
        params.validate()?;
        Ok(PrivacyReport {
            pure: pure_epsilon(&params),
            approx: approx_epsilon(&params, delta)?,
            hetero: hetero_epsilon(&params, delta)?,
            delta,
            params,
        })
    }

    pub fn epsilon(&self, accountant: Accountant) -> f64 {
        match accountant {
            Accountant::Pure => self.pure,
            Accountant::Approx => self.approx,
            Accountant::Hetero => self.hetero,
        }
    }
}
