//! Scoring and statistics: macro-F1, the Wilcoxon signed-rank test and a
//! wall-clock helper.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::{Label, Prediction};

/// Largest number of non-zero differences handled by exact enumeration;
/// above it the normal approximation is used.
pub const EXACT_MAX_N: usize = 12;

/// Significance threshold: reject the null when `p < ALPHA`.
pub const ALPHA: f64 = 0.05;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl ClassCounts {
    /// `2PR / (P + R)`, zero when the class has no true positives.
    pub fn f1(&self) -> f64 {
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    }

    /// Neither predicted nor present.
    pub fn is_absent(&self) -> bool {
        self.tp + self.fp + self.fn_ == 0
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-label confusion counts. An unrecognised prediction is a false
/// negative for the true class and a prediction for no class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub per_label: BTreeMap<Label, ClassCounts>,
}

impl ConfusionCounts {
    pub fn tally<'a>(
        predicted: impl IntoIterator<Item = Option<&'a Label>>,
        truths: &[Label],
        labels: &[Label],
    ) -> Result<Self> {
        let mut per_label: BTreeMap<Label, ClassCounts> =
            labels.iter().map(|l| (l.clone(), ClassCounts::default())).collect();
        let mut seen = 0;
        for (pred, truth) in predicted.into_iter().zip(truths) {
            seen += 1;
            if !per_label.contains_key(truth) {
                return Err(Error::invalid(format!("truth label {truth} is not in the label set")));
            }
            match pred {
                Some(p) if p == truth => per_label.get_mut(truth).expect("checked").tp += 1,
                Some(p) => {
                    if let Some(c) = per_label.get_mut(p) {
                        c.fp += 1;
                    }
                    per_label.get_mut(truth).expect("checked").fn_ += 1;
                }
                None => per_label.get_mut(truth).expect("checked").fn_ += 1,
            }
        }
        if seen != truths.len() {
            return Err(Error::LengthMismatch {
                left: seen,
                right: truths.len(),
            });
        }
        Ok(ConfusionCounts { per_label })
    }

    /// Unweighted mean F1 over the labels that were predicted or present.
    pub fn macro_f1(&self) -> f64 {
        let (sum, n) = self
            .per_label
            .values()
            .filter(|c| !c.is_absent())
            .fold((0.0, 0usize), |(s, n), c| (s + c.f1(), n + 1));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}

pub fn macro_f1(predictions: &[Prediction], truths: &[Label], labels: &[Label]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: truths.len(),
        });
    }
    let counts = ConfusionCounts::tally(predictions.iter().map(|p| p.outcome.label()), truths, labels)?;
    Ok(counts.macro_f1())
}

/// Second sample for [`wilcoxon_signed_rank`].
#[derive(Clone, Copy, Debug)]
pub enum Reference<'a> {
    Paired(&'a [f64]),
    /// Broadcast against every element of the first sample.
    Constant(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// `min(W+, W-)`.
    pub statistic: f64,
    pub p_value: f64,
    /// Number of non-zero differences.
    pub n_effective: usize,
}

impl TestResult {
    pub fn significant(&self) -> bool {
        self.p_value < ALPHA
    }
}

/// Two-sided Wilcoxon signed-rank test on paired differences `a - b`.
///
/// Zero differences are dropped and tied magnitudes share their average
/// rank. Up to [`EXACT_MAX_N`] differences the p-value comes from the exact
/// null distribution over all sign assignments; beyond that from the normal
/// approximation with tie correction (no continuity correction).
pub fn wilcoxon_signed_rank(a: &[f64], b: Reference<'_>) -> Result<TestResult> {
    if a.is_empty() {
        return Err(Error::invalid("wilcoxon needs at least one observation"));
    }
    let diffs: Vec<f64> = match b {
        Reference::Paired(b) => {
            if a.len() != b.len() {
                return Err(Error::LengthMismatch {
                    left: a.len(),
                    right: b.len(),
                });
            }
            a.iter().zip(b).map(|(x, y)| x - y).collect()
        }
        Reference::Constant(c) => a.iter().map(|x| x - c).collect(),
    };
    if diffs.iter().any(|d| d.is_nan()) {
        return Err(Error::invalid("wilcoxon input contains NaN"));
    }
    let nonzero: Vec<f64> = diffs.into_iter().filter(|d| *d != 0.0).collect();
    let n = nonzero.len();
    if n == 0 {
        return Ok(TestResult {
            statistic: 0.0,
            p_value: 1.0,
            n_effective: 0,
        });
    }

    let (ranks2, tie_sizes) = doubled_ranks(&nonzero);
    let total2: u64 = ranks2.iter().sum();
    let plus2: u64 = nonzero
        .iter()
        .zip(&ranks2)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let stat2 = plus2.min(total2 - plus2);
    let statistic = stat2 as f64 / 2.0;

    let p_value = if n <= EXACT_MAX_N {
        exact_p(&ranks2, stat2)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let tie_term: f64 = tie_sizes.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
        if var <= 0.0 {
            1.0
        } else {
            let z = (statistic - mean) / var.sqrt();
            let normal = Normal::standard();
            2.0 * normal.cdf(-z.abs())
        }
    };

    Ok(TestResult {
        statistic,
        p_value: p_value.clamp(0.0, 1.0),
        n_effective: n,
    })
}

/// Ranks of `|d|` multiplied by two (average ranks are half-integers), and
/// the size of every tie group.
fn doubled_ranks(d: &[f64]) -> (Vec<u64>, Vec<u64>) {
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&i, &j| d[i].abs().total_cmp(&d[j].abs()));
    let mut ranks = vec![0u64; d.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && d[order[j + 1]].abs() == d[order[i]].abs() {
            j += 1;
        }
        // positions i..=j hold 1-based ranks i+1..=j+1, average (i+j+2)/2
        let r2 = (i + j + 2) as u64;
        for &k in &order[i..=j] {
            ranks[k] = r2;
        }
        ties.push((j - i + 1) as u64);
        i = j + 1;
    }
    (ranks, ties)
}

/// P(min(W+, W-) <= observed) under the symmetric null, from the
/// distribution of positive-rank sums built by subset-sum counting.
fn exact_p(ranks2: &[u64], stat2: u64) -> f64 {
    let total2: u64 = ranks2.iter().sum();
    let mut counts = vec![0u64; total2 as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in ranks2 {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let extreme: u64 = counts
        .iter()
        .enumerate()
        .filter(|(s, _)| (*s as u64).min(total2 - *s as u64) <= stat2)
        .map(|(_, c)| c)
        .sum();
    extreme as f64 / (1u64 << ranks2.len()) as f64
}

/// Runs `op` and returns its result with the elapsed wall time in seconds.
pub fn timed<T>(op: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = op();
    (out, start.elapsed().as_secs_f64())
}

/// Arithmetic mean; 0 for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Population standard deviation (divides by n).
pub fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}
