use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::engine::{run_trial_on, Metrics, TrialResult, TrialStatus};
use super::{SimConfig, SimError};
use crate::time::Micros;

/// Seed of trial `index`: a splitmix64 step from the master seed.
pub fn trial_seed(master: u64, index: u32) -> u64 {
    let mut z = master.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mean and sample standard deviation, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len() as f64;
        if values.is_empty() {
            return Stat {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Stat { mean, std }
    }

    /// Exact integer moments, so equal spans give a standard deviation of
    /// exactly zero.
    pub fn of_micros(values: &[Micros]) -> Stat {
        let n = values.len() as i128;
        if n == 0 {
            return Stat {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let sum: i128 = values.iter().map(|v| v.0 as i128).sum();
        let sq: i128 = values.iter().map(|v| (v.0 as i128).pow(2)).sum();
        let mean = sum as f64 / n as f64 / 1e6;
        let std = if n < 2 {
            0.0
        } else {
            // n·Σx² − (Σx)² is exact and non-negative
            let num = n * sq - sum * sum;
            (num as f64 / (n * (n - 1)) as f64).sqrt() / 1e6
        };
        Stat { mean, std }
    }
}

/// Mean per-trial share of `T_c`, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub t_m: f64,
    pub t_h: f64,
    pub t_r: f64,
}

/// Timing statistics over the successful trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub t_m: Stat,
    pub t_h: Stat,
    pub t_r: Stat,
    pub t_c: Stat,
    pub split: Split,
    pub hw_count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub trials: u32,
    pub successes: u32,
    pub success_rate: f64,
    /// Failed trials per reason code.
    pub failures: BTreeMap<String, u32>,
    pub timing: Option<TimingSummary>,
}

impl BatchSummary {
    pub fn of(results: &[TrialResult]) -> BatchSummary {
        let ok: Vec<&TrialResult> = results
            .iter()
            .filter(|r| r.status == TrialStatus::Success)
            .collect();
        let mut failures = BTreeMap::new();
        for r in results {
            if let Some(f) = &r.failure {
                *failures.entry(f.code().to_string()).or_insert(0) += 1;
            }
        }
        let timing = (!ok.is_empty()).then(|| {
            let col =
                |f: fn(&TrialResult) -> f64| -> Vec<f64> { ok.iter().map(|r| f(r)).collect() };
            let span = |f: fn(&Metrics) -> Micros| -> Stat {
                Stat::of_micros(&ok.iter().map(|r| f(&r.metrics)).collect::<Vec<_>>())
            };
            let split = |k: usize| Stat::of(&col_split(&ok, k)).mean;
            TimingSummary {
                t_m: span(|m| m.t_m),
                t_h: span(|m| m.t_h),
                t_r: span(|m| m.t_r),
                t_c: span(|m| m.t_c),
                split: Split {
                    t_m: split(0),
                    t_h: split(1),
                    t_r: split(2),
                },
                hw_count: Stat::of(&col(|r| r.hw_count as f64)).mean,
            }
        });
        BatchSummary {
            trials: results.len() as u32,
            successes: ok.len() as u32,
            success_rate: if results.is_empty() {
                0.0
            } else {
                ok.len() as f64 / results.len() as f64
            },
            failures,
            timing,
        }
    }
}

fn col_split(ok: &[&TrialResult], k: usize) -> Vec<f64> {
    ok.iter().map(|r| r.metrics.split()[k]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub results: Vec<TrialResult>,
    pub summary: BatchSummary,
}

/// Runs `config.trials` trials in parallel. Results are in trial order and
/// do not depend on the number of worker threads.
pub fn run_batch(config: &SimConfig) -> Result<BatchReport, SimError> {
    config.validate()?;
    let graph = config.load_graph()?;
    let results = (0..config.trials)
        .into_par_iter()
        .map(|i| run_trial_on(&graph, config, i, trial_seed(config.seed, i)))
        .collect::<Result<Vec<_>, _>>()?;
    let summary = BatchSummary::of(&results);
    Ok(BatchReport { results, summary })
}
