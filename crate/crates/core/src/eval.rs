//! Accuracy, confusion and selection-bias metrics over score matrices.

use std::collections::HashMap;
use std::fmt::Write as _;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::pipeline::ScoreMatrix;

/// Ground truth: item id to label.
pub type Truth = HashMap<String, String>;

/// True label index per score row.
fn truth_indices(scores: &ScoreMatrix, truth: &Truth) -> Result<Vec<usize>> {
    let columns: HashMap<&str, usize> =
        scores.labels().iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    scores
        .item_ids()
        .iter()
        .map(|id| {
            let label = truth.get(id).ok_or_else(|| Error::MissingTruth(id.clone()))?;
            columns
                .get(label.as_str())
                .copied()
                .ok_or_else(|| Error::IndexMismatch(format!("label {label:?} of item {id:?} is not scored")))
        })
        .collect()
}

/// Fraction of items whose true label is among the `k` best (ties by label order).
pub fn top_k_accuracy(scores: &ScoreMatrix, truth: &Truth, k: usize) -> Result<f64> {
    let t = truth_indices(scores, truth)?;
    if t.is_empty() {
        return Err(Error::EmptyInput);
    }
    let hits = t
        .iter()
        .enumerate()
        .filter(|&(row, label)| scores.top_k(row, k).contains(label))
        .count();
    Ok(hits as f64 / t.len() as f64)
}

/// Shannon entropy (nats) of the distribution given by `counts`.
pub fn entropy(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Argmax counts per label and their entropy in nats.
pub fn selection_distribution(scores: &ScoreMatrix) -> Result<(Vec<usize>, f64)> {
    if scores.item_ids().is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut counts = vec![0; scores.labels().len()];
    for p in scores.predictions() {
        counts[p] += 1;
    }
    let h = entropy(&counts);
    Ok((counts, h))
}

/// Label indices sorted by descending count, ties by label order.
pub fn selection_order(counts: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    order
}

/// Per-class fraction correct, in score-column order, plus the unweighted mean.
pub fn per_class_accuracy(scores: &ScoreMatrix, truth: &Truth) -> Result<(Vec<f64>, f64)> {
    let t = truth_indices(scores, truth)?;
    let c = scores.labels().len();
    let mut total = vec![0usize; c];
    let mut correct = vec![0usize; c];
    for (&label, pred) in t.iter().zip(scores.predictions()) {
        total[label] += 1;
        if pred == label {
            correct[label] += 1;
        }
    }
    if let Some(empty) = total.iter().position(|&n| n == 0) {
        return Err(Error::EmptyClass(scores.labels()[empty].clone()));
    }
    let acc: Vec<f64> = correct.iter().zip(&total).map(|(&k, &n)| k as f64 / n as f64).collect();
    let mean = acc.iter().sum::<f64>() / c as f64;
    Ok((acc, mean))
}

/// Count matrix indexed by (true, predicted) label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Array2<u64>,
}

impl ConfusionMatrix {
    pub fn diagonal_sum(&self) -> u64 {
        self.counts.diag().sum()
    }

    /// CSV with a header row of predicted labels and one row per true label.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\pred");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(self.counts.rows()) {
            out.push_str(l);
            for c in row {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }
}

/// Confusion counts; with `order`, both axes are permuted to that label order.
pub fn confusion_matrix(scores: &ScoreMatrix, truth: &Truth, order: Option<&[usize]>) -> Result<ConfusionMatrix> {
    let t = truth_indices(scores, truth)?;
    let c = scores.labels().len();
    let identity: Vec<usize> = (0..c).collect();
    let order = order.unwrap_or(&identity);
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != identity {
        return Err(Error::IndexMismatch("confusion order is not a permutation of the labels".into()));
    }
    let mut position = vec![0; c];
    for (pos, &l) in order.iter().enumerate() {
        position[l] = pos;
    }
    let mut counts = Array2::zeros((c, c));
    for (&label, pred) in t.iter().zip(scores.predictions()) {
        counts[[position[label], position[pred]]] += 1;
    }
    Ok(ConfusionMatrix {
        labels: order.iter().map(|&l| scores.labels()[l].clone()).collect(),
        counts,
    })
}

/// Everything reported for one scored test set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n_items: usize,
    pub labels: Vec<String>,
    pub top1: f64,
    pub top5: f64,
    pub per_class_accuracy: Vec<f64>,
    pub mean_per_class_accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub selection_counts: Vec<usize>,
    /// Natural-log entropy of the prediction frequencies.
    pub selection_entropy: f64,
}

impl EvalReport {
    pub fn never_predicted(&self) -> usize {
        self.selection_counts.iter().filter(|&&c| c == 0).count()
    }

    pub fn never_predicted_fraction(&self) -> f64 {
        self.never_predicted() as f64 / self.labels.len() as f64
    }

    /// Flat `key=value` lines with six decimals.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "items={}", self.n_items);
        let _ = writeln!(out, "labels={}", self.labels.len());
        let _ = writeln!(out, "top1={:.6}", self.top1);
        let _ = writeln!(out, "top5={:.6}", self.top5);
        let _ = writeln!(out, "mean_per_class_accuracy={:.6}", self.mean_per_class_accuracy);
        let _ = writeln!(out, "selection_entropy={:.6}", self.selection_entropy);
        let _ = writeln!(out, "entropy_base=e");
        let _ = writeln!(out, "never_predicted={}", self.never_predicted());
        let _ = writeln!(out, "never_predicted_fraction={:.6}", self.never_predicted_fraction());
        for (l, a) in self.labels.iter().zip(&self.per_class_accuracy) {
            let _ = writeln!(out, "per_class_accuracy.{l}={a:.6}");
        }
        for (l, c) in self.labels.iter().zip(&self.selection_counts) {
            let _ = writeln!(out, "selection_count.{l}={c}");
        }
        out
    }
}

/// Computes every metric. `order` permutes the confusion axes.
pub fn evaluate(scores: &ScoreMatrix, truth: &Truth, order: Option<&[usize]>) -> Result<EvalReport> {
    let (selection_counts, selection_entropy) = selection_distribution(scores)?;
    let (per_class, mean) = per_class_accuracy(scores, truth)?;
    Ok(EvalReport {
        n_items: scores.item_ids().len(),
        labels: scores.labels().to_vec(),
        top1: top_k_accuracy(scores, truth, 1)?,
        top5: top_k_accuracy(scores, truth, 5)?,
        per_class_accuracy: per_class,
        mean_per_class_accuracy: mean,
        confusion: confusion_matrix(scores, truth, order)?,
        selection_counts,
        selection_entropy,
    })
}

/// Exponentially decaying class sizes: `n_c = max(1, round(n * factor^(c / (C - 1))))`.
pub fn long_tail_counts(n: usize, n_classes: usize, factor: f64) -> Vec<usize> {
    (0..n_classes)
        .map(|c| {
            let t = if n_classes > 1 { c as f64 / (n_classes - 1) as f64 } else { 0.0 };
            ((n as f64 * factor.powf(t)).round() as usize).max(1)
        })
        .collect()
}

/// Seeded long-tail subsample of a labeled test set.
///
/// Classes are taken in `labels` order; class `c` keeps a random subset of
/// size `min(available, n_c)` where `n` is the smallest class size. Returns
/// row indices into `item_ids`, ascending.
pub fn resample_long_tail(
    item_ids: &[String],
    truth: &Truth,
    labels: &[String],
    factor: f64,
    seed: u64,
) -> Result<Vec<usize>> {
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(Error::InvalidConfig(format!("imbalance factor must lie in (0, 1], got {factor}")));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); labels.len()];
    let column: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    for (row, id) in item_ids.iter().enumerate() {
        let label = truth.get(id).ok_or_else(|| Error::MissingTruth(id.clone()))?;
        let c = column
            .get(label.as_str())
            .ok_or_else(|| Error::IndexMismatch(format!("unknown label {label:?}")))?;
        by_class[*c].push(row);
    }
    if let Some(empty) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::EmptyClass(labels[empty].clone()));
    }
    let n = by_class.iter().map(Vec::len).min().unwrap_or(0);
    let sizes = long_tail_counts(n, labels.len(), factor);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for (members, size) in by_class.iter_mut().zip(sizes) {
        members.shuffle(&mut rng);
        rows.extend_from_slice(&members[..size.min(members.len())]);
    }
    rows.sort_unstable();
    Ok(rows)
}
