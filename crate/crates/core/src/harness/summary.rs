use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::suite::{latest_ok, RunResult};

/// Pseudo-method under which teacher zero-shot accuracy is summarized.
pub const ZERO_SHOT: &str = "zero_shot";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub oracle: String,
    pub k: usize,
    pub median_acc: f64,
    pub std_acc: f64,
    pub n_seeds: usize,
}

/// Middle order statistic, or the mean of the middle two.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Median and population std of test accuracy per (method, oracle, k), plus
/// a `zero_shot` row per (oracle, k) from the teacher's test accuracy.
pub fn summarize(results: &[RunResult]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, String, usize), BTreeMap<u64, f64>> = BTreeMap::new();
    for r in latest_ok(results) {
        groups
            .entry((r.method.to_string(), r.oracle.clone(), r.k))
            .or_default()
            .insert(r.seed, r.test_acc);
        if let Some(zs) = r.zero_shot_acc {
            groups
                .entry((ZERO_SHOT.to_string(), r.oracle.clone(), r.k))
                .or_default()
                .insert(r.seed, zs);
        }
    }
    groups
        .into_iter()
        .map(|((method, oracle, k), by_seed)| {
            let accs: Vec<f64> = by_seed.into_values().collect();
            SummaryRow {
                method,
                oracle,
                k,
                median_acc: median(&accs),
                std_acc: population_std(&accs),
                n_seeds: accs.len(),
            }
        })
        .collect()
}

pub fn lookup<'a>(rows: &'a [SummaryRow], method: &str, oracle: &str, k: usize) -> Option<&'a SummaryRow> {
    rows.iter().find(|r| r.method == method && r.oracle == oracle && r.k == k)
}
