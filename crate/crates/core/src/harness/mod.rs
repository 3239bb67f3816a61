//! Experiment runners and the statistics they report.
//!
//! Each runner samples in fixed-size chunks, chunk `i` drawing from stream
//! `base + i` of the configured seed, so reports are identical across
//! reruns regardless of thread count.

pub mod config;
mod runners;
pub mod stats;

use std::collections::BTreeMap;
use std::time::Duration;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::laws::{LawError, MarkFunction, OffspringLaw};
use crate::oracle::{GateReport, OracleError};
use crate::samplers::{Budget, RngHandle, SampleError};
use crate::scalar::Scalar;
use crate::transforms::TransformError;
use crate::tree::TreeError;

pub use runners::*;
pub use stats::{chi_square_gof, chi_square_two_sample, ls_slope, tv_distance, wilson, ChiSquare};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error(transparent)]
    Law(#[from] LawError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("insufficient effective samples: {0}")]
    InsufficientSamples(String),
    #[error("oracle validation gate failed: {}", .0.join("; "))]
    GateFailed(Vec<String>),
    #[error("{violations} of {draws} draws violate A(grafted) = M(marks)")]
    IdentityViolation { violations: u64, draws: u64 },
    #[error("support too sparse: {0}")]
    SparseSupport(String),
    #[error("stage {stage}: {source}")]
    Stage { stage: &'static str, source: Box<HarnessError> },
}

/// Declared pass thresholds.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Thresholds {
    /// χ² tests pass when the p-value exceeds this.
    pub chi2_alpha: f64,
    /// Confidence level of the Wilson intervals.
    pub ci_level: f64,
    /// Slack added to the CI half-width for the final local-limit gap.
    pub gap_tolerance: f64,
    /// Bound on `|r(n_max) − 1|` for ratio checks.
    pub ratio_bound: f64,
    /// Bound on series cross-check distances.
    pub series_tolerance: f64,
    /// Largest acceptable fraction of draws lost to the node budget.
    pub max_overflow_fraction: f64,
    /// Width of Monte Carlo mean checks, in standard errors.
    pub sigmas: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            chi2_alpha: 1e-3,
            ci_level: 0.99,
            gap_tolerance: 0.02,
            ratio_bound: 0.008,
            series_tolerance: 1e-9,
            max_overflow_fraction: 1e-3,
            sigmas: 3.0,
        }
    }
}

/// Sampling configuration shared by all runners.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub samples: u64,
    pub seed: u64,
    pub thresholds: Thresholds,
    pub budget: Budget,
    /// Node budget for unconditioned draws.
    pub node_cap: usize,
    /// Samples per parallel chunk.
    pub chunk: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            samples: 100_000,
            seed: 0,
            thresholds: Thresholds::default(),
            budget: Budget::default(),
            node_cap: 1_000_000,
            chunk: 1 << 14,
        }
    }
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct Parameters {
    pub law: String,
    pub q: Option<String>,
    pub n_values: Vec<usize>,
    pub samples: u64,
    pub seed: u64,
    pub exact: bool,
    pub extra: BTreeMap<String, String>,
}

impl Parameters {
    pub fn new<S: Scalar>(law: &OffspringLaw<S>, q: Option<&MarkFunction<S>>, cfg: &RunConfig) -> Self {
        Parameters {
            law: format!("{law:?}"),
            q: q.map(|q| format!("{q:?}")),
            n_values: Vec::new(),
            samples: cfg.samples,
            seed: cfg.seed,
            exact: S::EXACT,
            extra: BTreeMap::new(),
        }
    }
}

/// Empirical frequency against an oracle probability.
#[derive(Debug, Clone, Serialize)]
pub struct ProbabilityRow {
    pub table: String,
    pub key: String,
    pub n: Option<usize>,
    pub count: u64,
    pub trials: u64,
    pub empirical: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub oracle: f64,
    pub gap: f64,
    /// Exact finite-`n` value when one is available.
    pub exact: Option<f64>,
}

impl ProbabilityRow {
    pub fn new(table: &str, key: String, n: Option<usize>, count: u64, trials: u64, oracle: f64, level: f64) -> Self {
        let empirical = if trials == 0 { 0.0 } else { count as f64 / trials as f64 };
        let (ci_low, ci_high) = stats::wilson(count, trials, level);
        ProbabilityRow {
            table: table.into(),
            key,
            n,
            count,
            trials,
            empirical,
            ci_low,
            ci_high,
            oracle,
            gap: (empirical - oracle).abs(),
            exact: None,
        }
    }

    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }

    pub fn oracle_in_ci(&self) -> bool {
        self.ci_low <= self.oracle && self.oracle <= self.ci_high
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChiSquareRow {
    pub table: String,
    #[serde(flatten)]
    pub chi: ChiSquare,
    /// Total variation between the empirical and oracle cell laws.
    pub tv: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValueRow {
    pub name: String,
    pub value: f64,
    pub reference: Option<f64>,
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioRow {
    pub series: String,
    pub n: usize,
    pub ratio: Option<f64>,
    pub deviation: Option<f64>,
    pub error_bound: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, PartialEq, Default)]
pub struct Verdict {
    pub passed: bool,
    pub failed: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub parameters: Parameters,
    pub thresholds: Thresholds,
    pub gate: Option<GateReport>,
    pub probabilities: Vec<ProbabilityRow>,
    pub chi_square: Vec<ChiSquareRow>,
    pub values: Vec<ValueRow>,
    pub ratios: Vec<RatioRow>,
    pub counters: BTreeMap<String, u64>,
    pub checks: Vec<Check>,
    pub stages: Vec<ExperimentReport>,
    /// Set when a rejection budget ran out and some rows are short.
    pub partial: bool,
    pub verdict: Verdict,
    #[serde(skip)]
    pub runtime: Duration,
}

impl ExperimentReport {
    pub fn new(name: &str, parameters: Parameters, thresholds: Thresholds) -> Self {
        ExperimentReport {
            name: name.into(),
            parameters,
            thresholds,
            gate: None,
            probabilities: Vec::new(),
            chi_square: Vec::new(),
            values: Vec::new(),
            ratios: Vec::new(),
            counters: BTreeMap::new(),
            checks: Vec::new(),
            stages: Vec::new(),
            partial: false,
            verdict: Verdict::default(),
            runtime: Duration::ZERO,
        }
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into() });
    }

    pub fn count(&mut self, name: &str, value: u64) {
        *self.counters.entry(name.into()).or_default() += value;
    }

    pub fn value(&mut self, name: impl Into<String>, value: f64, reference: Option<f64>, bound: Option<f64>) {
        self.values.push(ValueRow { name: name.into(), value, reference, bound });
    }

    /// Sets the verdict from the checks and stage verdicts.
    pub fn finish(&mut self, runtime: Duration) {
        let mut failed: Vec<String> = self.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
        failed.extend(
            self.stages
                .iter()
                .filter(|s| !s.verdict.passed)
                .map(|s| format!("stage {}", s.name)),
        );
        self.verdict = Verdict { passed: failed.is_empty(), failed };
        self.runtime = runtime;
    }

    pub fn passed(&self) -> bool {
        self.verdict.passed
    }

    pub fn probability_rows<'a>(&'a self, table: &'a str) -> impl Iterator<Item = &'a ProbabilityRow> + 'a {
        self.probabilities.iter().filter(move |r| r.table == table)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Runs `f(count, rng)` over chunks of at most `chunk` samples in parallel;
/// results come back in chunk order.
pub fn run_chunks<T, F>(total: u64, chunk: u64, seed: u64, stream_base: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut RngHandle) -> T + Sync + Send,
{
    let chunk = chunk.max(1);
    let n_chunks = total.div_ceil(chunk);
    (0..n_chunks)
        .into_par_iter()
        .map(|i| {
            let count = chunk.min(total - i * chunk);
            let mut rng = RngHandle::new(seed, stream_base + i);
            f(count, &mut rng)
        })
        .collect()
}

/// Merges count maps.
pub fn merge_counts<K: Ord>(parts: impl IntoIterator<Item = BTreeMap<K, u64>>) -> BTreeMap<K, u64> {
    let mut out = BTreeMap::new();
    for part in parts {
        for (k, v) in part {
            *out.entry(k).or_insert(0) += v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_are_deterministic() {
        let draw = || {
            run_chunks(10_000, 777, 42, 0, |count, rng| {
                use rand::Rng;
                (0..count).map(|_| rng.random::<u32>() as u64).sum::<u64>()
            })
        };
        let a = draw();
        assert_eq!(a.len(), 13);
        assert_eq!(a, draw());
    }

    #[test]
    fn verdict_follows_checks() {
        let mut report = ExperimentReport::new("x", Parameters::default(), Thresholds::default());
        report.check("a", true, "");
        report.finish(Duration::ZERO);
        assert!(report.passed());
        report.check("b", false, "");
        report.finish(Duration::ZERO);
        assert_eq!(report.verdict.failed, vec!["b".to_string()]);
        let json = report.to_json();
        assert!(!json.contains("runtime"));
    }
}
