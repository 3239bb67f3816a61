//! Total variation, chi-square with cell pooling, Wilson intervals and
//! least-squares slopes.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::HarnessError;

/// Cells with smaller expected counts are pooled.
pub const MIN_EXPECTED: f64 = 5.0;

/// `(1/2) Σ |d1 − d2|` over the union of supports.
pub fn tv_distance<K: Ord>(d1: &BTreeMap<K, f64>, d2: &BTreeMap<K, f64>) -> f64 {
    let keys: BTreeSet<&K> = d1.keys().chain(d2.keys()).collect();
    let sum: f64 = keys
        .into_iter()
        .map(|k| (d1.get(k).copied().unwrap_or(0.0) - d2.get(k).copied().unwrap_or(0.0)).abs())
        .sum();
    (0.5 * sum).min(1.0)
}

/// Empirical distribution from counts.
pub fn normalize<K: Ord + Clone>(counts: &BTreeMap<K, u64>) -> BTreeMap<K, f64> {
    let total: u64 = counts.values().sum();
    if total == 0 {
        return BTreeMap::new();
    }
    counts.iter().map(|(k, &c)| (k.clone(), c as f64 / total as f64)).collect()
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Cells after pooling.
    pub cells: usize,
    /// Original cells merged into the pooled cell.
    pub pooled: usize,
}

/// Goodness of fit of `observed` against `probs` (which must sum to one
/// over the listed cells; put the remainder in an explicit cell).
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> Result<ChiSquare, HarnessError> {
    assert_eq!(observed.len(), probs.len());
    let total: u64 = observed.iter().sum();
    let cells: Vec<(f64, f64)> = observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| (o as f64, p * total as f64))
        .collect();
    let (merged, pooled) = pool(cells);
    if merged.len() < 2 {
        return Err(HarnessError::InsufficientSamples(format!(
            "{total} samples leave fewer than two cells with expectation ≥ {MIN_EXPECTED}"
        )));
    }
    let statistic = merged.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    finish(statistic, merged.len() - 1, merged.len(), pooled)
}

/// Homogeneity of two samples over shared categories.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> Result<ChiSquare, HarnessError> {
    assert_eq!(a.len(), b.len());
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let frac_a = na as f64 / (na + nb) as f64;
    // pool on the smaller of the two expectations
    let mut cells: Vec<(f64, f64, f64)> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let row = (x + y) as f64;
            (x as f64, y as f64, row * frac_a.min(1.0 - frac_a))
        })
        .collect();
    cells.sort_by(|l, r| l.2.total_cmp(&r.2));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    let (mut pa, mut pb, mut pooled) = (0.0, 0.0, 0);
    for (x, y, e) in cells {
        if e < MIN_EXPECTED {
            pa += x;
            pb += y;
            pooled += 1;
        } else {
            merged.push((x, y));
        }
    }
    if pooled > 0 {
        if ((pa + pb) * frac_a.min(1.0 - frac_a) < MIN_EXPECTED) && !merged.is_empty() {
            let last = merged.remove(0);
            pa += last.0;
            pb += last.1;
            pooled += 1;
        }
        merged.push((pa, pb));
    }
    if merged.len() < 2 {
        return Err(HarnessError::InsufficientSamples(
            "fewer than two categories with expectation ≥ 5".into(),
        ));
    }
    let statistic = merged
        .iter()
        .map(|&(x, y)| {
            let row = x + y;
            let ea = row * frac_a;
            let eb = row - ea;
            (x - ea).powi(2) / ea + (y - eb).powi(2) / eb
        })
        .sum();
    finish(statistic, merged.len() - 1, merged.len(), pooled)
}

fn pool(mut cells: Vec<(f64, f64)>) -> (Vec<(f64, f64)>, usize) {
    cells.sort_by(|l, r| l.1.total_cmp(&r.1));
    let mut merged = Vec::new();
    let (mut po, mut pe, mut pooled) = (0.0, 0.0, 0);
    for (o, e) in cells {
        if e < MIN_EXPECTED {
            po += o;
            pe += e;
            pooled += 1;
        } else {
            merged.push((o, e));
        }
    }
    if pooled > 0 {
        if pe < MIN_EXPECTED && !merged.is_empty() {
            let (o, e) = merged.remove(0);
            po += o;
            pe += e;
            pooled += 1;
        }
        if pe > 0.0 {
            merged.push((po, pe));
        } else if po > 0.0 {
            // observations where the oracle puts no mass
            merged.push((po, f64::MIN_POSITIVE));
        }
    }
    (merged, pooled)
}

fn finish(statistic: f64, dof: usize, cells: usize, pooled: usize) -> Result<ChiSquare, HarnessError> {
    let dist = ChiSquared::new(dof as f64).map_err(|e| HarnessError::InsufficientSamples(e.to_string()))?;
    let p_value = if statistic.is_finite() { dist.sf(statistic) } else { 0.0 };
    Ok(ChiSquare { statistic, dof, p_value, cells, pooled })
}

/// Two-sided standard normal quantile for confidence `level`.
pub fn z_value(level: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - (1.0 - level) / 2.0)
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson(successes: u64, trials: u64, level: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = z_value(level);
    let n = trials as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Ordinary least-squares slope of `ys` on `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Sample mean and standard error.
pub fn mean_and_se(sum: f64, sum_sq: f64, n: u64) -> (f64, f64) {
    let n = n as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}
