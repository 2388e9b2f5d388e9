//! Experiment configuration files.
//!
//! ```toml
//! [experiment]
//! kind = "gowers-avg"
//! seed = 1
//! output = "u2.csv"
//!
//! [params]
//! x = [10000, 100000]
//! h = "X^0.4"
//! k = [1]
//! samples = 200
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context as _};
use serde::{Deserialize, Serialize};
use ulab::patterns::Weight;
use ulab::sieve::{MultSpec, DEFAULT_TABLE_BUDGET};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    GowersAvg,
    WeakGowers,
    Pretentious,
    Patterns,
    Chowla,
    Polyavg,
    Nilseq,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::GowersAvg => "gowers-avg",
            Kind::WeakGowers => "weak-gowers",
            Kind::Pretentious => "pretentious",
            Kind::Patterns => "patterns",
            Kind::Chowla => "chowla",
            Kind::Polyavg => "polyavg",
            Kind::Nilseq => "nilseq",
        }
    }
}

/// Interval length: `X^theta` rounded up, or a fixed value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HRule {
    Power(f64),
    Absolute(usize),
}

impl HRule {
    pub fn at(self, x: u64) -> usize {
        match self {
            HRule::Power(theta) => ((x as f64).powf(theta) - 1e-9).ceil().max(1.0) as usize,
            HRule::Absolute(h) => h,
        }
    }
}

impl FromStr for HRule {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> anyhow::Result<Self> {
        let s = s.trim();
        if let Some(theta) = s.strip_prefix("X^").or_else(|| s.strip_prefix("x^")) {
            let theta: f64 = theta.parse().with_context(|| format!("bad exponent in {s:?}"))?;
            if !(theta > 0.0 && theta <= 1.0) {
                bail!("H exponent must lie in (0, 1]");
            }
            return Ok(HRule::Power(theta));
        }
        let h = parse_count(s)?;
        if h == 0 {
            bail!("H must be positive");
        }
        Ok(HRule::Absolute(h as usize))
    }
}

impl fmt::Display for HRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HRule::Power(t) => write!(f, "X^{t}"),
            HRule::Absolute(h) => write!(f, "{h}"),
        }
    }
}

impl Serialize for HRule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for HRule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `1000000`, `10^6` or `1e6`.
pub fn parse_count(s: &str) -> anyhow::Result<u64> {
    ulab::arith::parse_count(s).with_context(|| format!("not a count: {s:?}"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub params: Params,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub kind: Kind,
    pub seed: u64,
    pub output: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    /// Largest table, in entries.
    #[serde(default = "default_budget")]
    pub budget: u64,
}

fn default_budget() -> u64 {
    DEFAULT_TABLE_BUDGET
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub x: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<HRule>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub k: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shifts: Vec<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub polys: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weights: Vec<Weight>,
    /// Pattern window counts, or nilsequence averaging lengths.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphabet: Option<u32>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub log: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub heuristic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<MultSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nil: Option<NilParams>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// A Heisenberg polynomial sequence `g_0 g_1^n g_2^binom(n,2) ...` given by
/// the coordinates `(x, y, z)` of each `g_j`, and a test function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NilParams {
    pub coeffs: Vec<[f64; 3]>,
    pub function: String,
}

impl Params {
    pub fn function(&self) -> MultSpec {
        self.function.clone().unwrap_or(MultSpec::Liouville)
    }

    pub fn need_x(&self) -> anyhow::Result<&[u64]> {
        if self.x.is_empty() {
            bail!("params.x must list at least one X");
        }
        Ok(&self.x)
    }

    pub fn need_h(&self) -> anyhow::Result<HRule> {
        self.h.context("params.h is required")
    }

    pub fn need_k(&self) -> anyhow::Result<&[usize]> {
        if self.k.is_empty() {
            bail!("params.k must list at least one k");
        }
        Ok(&self.k)
    }

    pub fn need_samples(&self) -> anyhow::Result<usize> {
        self.samples.context("params.samples is required")
    }

    pub fn need_epsilon(&self) -> anyhow::Result<f64> {
        self.epsilon.context("params.epsilon is required")
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        text.parse()
    }

    /// Fails for integers above `i64::MAX`, which TOML cannot hold.
    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Rejects configurations whose tables would exceed the budget.
    pub fn validate(&self) -> anyhow::Result<()> {
        let need = table_extent(self.experiment.kind, &self.params)?;
        if need > self.experiment.budget {
            bail!(
                "experiment needs a table of {need} entries, over the budget of {}",
                self.experiment.budget
            );
        }
        Ok(())
    }
}

impl FromStr for ExperimentConfig {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> anyhow::Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(s).map_err(|e| {
            let at = e.span().map(|sp| line_col(s, sp.start));
            match at {
                Some((line, col)) => anyhow::anyhow!("config error at line {line}, column {col}: {}", e.message()),
                None => anyhow::anyhow!("config error: {}", e.message()),
            }
        })?;
        Ok(cfg)
    }
}

fn line_col(s: &str, offset: usize) -> (usize, usize) {
    let before = &s[..offset.min(s.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

/// Longest table an experiment will build.
pub fn table_extent(kind: Kind, p: &Params) -> anyhow::Result<u64> {
    let xmax = p.x.iter().copied().max().unwrap_or(0);
    let nmax = p.n.iter().copied().max().unwrap_or(0);
    let kmax = p.k.iter().copied().max().unwrap_or(0) as u64;
    Ok(match kind {
        Kind::GowersAvg | Kind::WeakGowers => {
            let h = p.h.map_or(0, |h| h.at(xmax)) as u64;
            xmax + h
        }
        Kind::Pretentious => xmax,
        Kind::Patterns => nmax + kmax,
        Kind::Chowla => {
            let eps = p.epsilon.unwrap_or(0.0);
            xmax + p.shifts.iter().copied().max().unwrap_or(0) * ulab::patterns::short_range(xmax, eps)
        }
        Kind::Polyavg => xmax.saturating_mul(2),
        Kind::Nilseq => {
            let h = p.h.map_or(0, |h| h.at(xmax)) as u64;
            xmax + h
        }
    })
}
