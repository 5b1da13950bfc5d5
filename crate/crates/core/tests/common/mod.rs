//! Independent reference implementations shared by the test targets.
#![allow(dead_code, clippy::needless_range_loop)]

use evlstream::{Ensemble, Label, MicroClassifier, Mode, Model, Point};
use rand::Rng;

/// What a plain scan over every classifier says `classify` should do.
#[derive(Debug, PartialEq)]
pub struct ScanResult {
    pub label: Option<Label>,
    pub recognisers: usize,
    pub fitness_after: Vec<Vec<f64>>,
}

pub fn scan_classify(model: &Model, p: &[f64], mode: Mode) -> ScanResult {
    let mut hits = Vec::new();
    let mut all = Vec::new();
    for (ei, e) in model.ensembles().iter().enumerate() {
        for (ci, c) in e.members().iter().enumerate() {
            let d: f64 = c
                .centre()
                .coords()
                .iter()
                .zip(p)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            all.push((d, e.label().clone(), ei, ci));
            if d <= c.radius() {
                hits.push((d, e.label().clone(), ei, ci));
            }
        }
    }
    let best = |v: &[(f64, Label, usize, usize)]| {
        v.iter()
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.3.cmp(&b.3)))
            .map(|h| h.1.clone())
    };
    let mut labels: Vec<&Label> = hits.iter().map(|h| &h.1).collect();
    labels.dedup();
    labels.sort();
    labels.dedup();
    let conflict = labels.len() > 1;

    let mut fitness_after: Vec<Vec<f64>> = model
        .ensembles()
        .iter()
        .map(|e| e.members().iter().map(|c| c.fitness()).collect())
        .collect();
    for h in &hits {
        let f = &mut fitness_after[h.2][h.3];
        *f = if conflict { 0.0 } else { *f + 1.0 };
    }
    let label = match (best(&hits), mode) {
        (Some(l), _) => Some(l),
        (None, Mode::Abstain) => None,
        (None, Mode::Force) => best(&all),
    };
    ScanResult {
        label,
        recognisers: hits.len(),
        fitness_after,
    }
}

pub fn fitness_table(model: &Model) -> Vec<Vec<f64>> {
    model
        .ensembles()
        .iter()
        .map(|e| e.members().iter().map(|c| c.fitness()).collect())
        .collect()
}

/// A small model on a coarse grid so distance ties and overlaps are common.
pub fn random_model<R: Rng>(rng: &mut R, dim: usize) -> Model {
    let classes = rng.random_range(1..=3);
    let radius = [0.5, 1.0, 1.5][rng.random_range(0..3)];
    let per = rng.random_range(1..=4);
    let ensembles = (0..classes)
        .map(|k| {
            let label = ((b'A' + k as u8) as char).to_string();
            let members = (0..per)
                .map(|_| {
                    let c: Vec<f64> = (0..dim).map(|_| rng.random_range(0..5) as f64 * 0.5).collect();
                    MicroClassifier::new(Point::new(c).unwrap(), radius, label.as_str())
                        .unwrap()
                        .with_fitness(rng.random_range(0..4) as f64)
                        .unwrap()
                })
                .collect();
            Ensemble::from_members(label.as_str(), members).unwrap()
        })
        .collect();
    Model::from_ensembles(ensembles, per, radius).unwrap()
}

pub fn random_grid_point<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1..=6) as f64 * 0.5).collect()
}

/// Macro-F1 from an explicit confusion matrix. Row = truth, column =
/// prediction, with one extra column for "no prediction".
pub fn confusion_macro_f1(pred: &[Option<usize>], truth: &[usize], k: usize) -> f64 {
    let mut m = vec![vec![0u64; k + 1]; k];
    for (p, t) in pred.iter().zip(truth) {
        m[*t][p.unwrap_or(k)] += 1;
    }
    let mut scores = Vec::new();
    for c in 0..k {
        let tp = m[c][c];
        let fn_: u64 = (0..=k).filter(|&j| j != c).map(|j| m[c][j]).sum();
        let fp: u64 = (0..k).filter(|&i| i != c).map(|i| m[i][c]).sum();
        if tp + fp + fn_ == 0 {
            continue;
        }
        let prec = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let rec = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        scores.push(if prec + rec == 0.0 { 0.0 } else { 2.0 * prec * rec / (prec + rec) });
    }
    if scores.is_empty() {
        0.0
    } else {
        scores.iter().sum::<f64>() / scores.len() as f64
    }
}

/// Two-sided signed-rank p-value by listing all 2^n sign patterns.
pub fn enumerated_wilcoxon(diffs: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = diffs.iter().copied().filter(|x| *x != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return (0.0, 1.0);
    }
    let ranks: Vec<f64> = d
        .iter()
        .map(|x| {
            let below = d.iter().filter(|y| y.abs() < x.abs()).count() as f64;
            let same = d.iter().filter(|y| y.abs() == x.abs()).count() as f64;
            below + (same + 1.0) / 2.0
        })
        .collect();
    let total: f64 = ranks.iter().sum();
    let plus: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let observed = plus.min(total - plus);
    let mut extreme = 0u64;
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w.min(total - w) <= observed + 1e-9 {
            extreme += 1;
        }
    }
    (observed, extreme as f64 / (1u64 << n) as f64)
}

/// Spearman rank correlation, assuming no ties in either input.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        v.iter().map(|a| v.iter().filter(|b| *b < a).count() as f64 + 1.0).collect()
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = x.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}
