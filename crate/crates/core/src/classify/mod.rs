//! One-vs-all linear hinge-loss classification and evaluation.

mod svm;

pub use svm::{primal_objective, svm_train, train_binary, BinaryModel, LinearModel, SvmConfig};

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Matrix;
use crate::rng;
use crate::stats;
use crate::{Error, Result};

/// Raw per-class scores (`N x classes`) and argmax labels, ties to the lowest class.
pub fn predict(model: &LinearModel, x: &Matrix) -> Result<(Matrix, Vec<usize>)> {
    if x.cols() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: x.cols() });
    }
    let mut scores = Matrix::zeros(x.rows(), model.classes());
    let mut labels = Vec::with_capacity(x.rows());
    for i in 0..x.rows() {
        let row = scores.row_mut(i);
        for (c, m) in model.models.iter().enumerate() {
            row[c] = m.score(x.row(i));
        }
        labels.push(argmax(row));
    }
    Ok((scores, labels))
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in v.iter().enumerate().skip(1) {
        if *s > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub class: usize,
    pub support: usize,
    /// Percent of the class's samples labeled correctly.
    pub accuracy: f64,
    /// Average precision (percent) of ranking all samples by this class's score.
    pub average_precision: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Mean per-class accuracy, percent.
    pub macc: f64,
    /// Mean per-class average precision, percent.
    pub map: f64,
    /// Classes present in the test set.
    pub per_class: Vec<ClassMetrics>,
    /// Classes the model knows but the test set lacks; excluded from both means.
    pub missing_classes: Vec<usize>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

/// Average precision of ranking by descending `scores` against the positives in
/// `relevant`. Ties keep input order.
pub fn average_precision(scores: &[f64], relevant: &[bool]) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if relevant[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    if hits == 0 {
        0.0
    } else {
        sum / hits as f64
    }
}

/// MAcc and MAP from precomputed scores.
pub fn evaluate_scores(scores: &Matrix, labels: &[usize]) -> Result<EvalReport> {
    if scores.rows() != labels.len() {
        return Err(Error::DimensionMismatch { expected: scores.rows(), got: labels.len() });
    }
    let classes = scores.cols();
    if let Some(l) = labels.iter().find(|l| **l >= classes) {
        return Err(Error::invalid("labels", alloc::format!("label {l} has no model")));
    }
    let predicted: Vec<usize> = (0..scores.rows()).map(|i| argmax(scores.row(i))).collect();
    let mut confusion = vec![vec![0usize; classes]; classes];
    for (t, p) in labels.iter().zip(&predicted) {
        confusion[*t][*p] += 1;
    }
    let mut per_class = Vec::new();
    let mut missing = Vec::new();
    for (c, row) in confusion.iter().enumerate() {
        let support = labels.iter().filter(|l| **l == c).count();
        if support == 0 {
            missing.push(c);
            continue;
        }
        let relevant: Vec<bool> = labels.iter().map(|l| *l == c).collect();
        per_class.push(ClassMetrics {
            class: c,
            support,
            accuracy: 100.0 * row[c] as f64 / support as f64,
            average_precision: 100.0 * average_precision(&scores.col(c), &relevant),
        });
    }
    if per_class.is_empty() {
        return Err(Error::invalid("labels", "test set is empty"));
    }
    let macc = stats::mean(&per_class.iter().map(|m| m.accuracy).collect::<Vec<_>>());
    let map = stats::mean(&per_class.iter().map(|m| m.average_precision).collect::<Vec<_>>());
    Ok(EvalReport { macc, map, per_class, missing_classes: missing, confusion })
}

pub fn evaluate(model: &LinearModel, x: &Matrix, labels: &[usize]) -> Result<EvalReport> {
    let (scores, _) = predict(model, x)?;
    evaluate_scores(&scores, labels)
}

/// Picks `C` from `grid` by stratified k-fold cross-validated MAcc (first best wins).
pub fn cross_validate_c(x: &Matrix, labels: &[usize], grid: &[f64], folds: usize, config: &SvmConfig) -> Result<(f64, Vec<f64>)> {
    if grid.is_empty() {
        return Err(Error::invalid("grid", "is empty"));
    }
    if folds < 2 {
        return Err(Error::invalid("folds", "need at least two"));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    // Stratified fold assignment: shuffle each class, deal round-robin.
    let mut fold_of = vec![0usize; labels.len()];
    let mut r = rng::substream(config.seed, &[0xcf]);
    for c in 0..classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|i| labels[*i] == c).collect();
        rng::shuffle(&mut r, &mut idx);
        for (k, i) in idx.into_iter().enumerate() {
            fold_of[i] = k % folds;
        }
    }
    let pick = |rows: &[usize]| {
        let mut m = Matrix::zeros(rows.len(), x.cols());
        for (dst, &src) in rows.iter().enumerate() {
            m.row_mut(dst).copy_from_slice(x.row(src));
        }
        (m, rows.iter().map(|i| labels[*i]).collect::<Vec<_>>())
    };
    let mut scores = Vec::with_capacity(grid.len());
    for &c in grid {
        let cfg = SvmConfig { c, ..*config };
        let mut accs = Vec::new();
        for f in 0..folds {
            let train: Vec<usize> = (0..labels.len()).filter(|i| fold_of[*i] != f).collect();
            let test: Vec<usize> = (0..labels.len()).filter(|i| fold_of[*i] == f).collect();
            if test.is_empty() {
                continue;
            }
            let (xtr, ytr) = pick(&train);
            let (xte, yte) = pick(&test);
            let model = svm_train(&xtr, &ytr, &cfg)?;
            accs.push(evaluate(&model, &xte, &yte)?.macc);
        }
        scores.push(stats::mean(&accs));
    }
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    Ok((grid[best], scores))
}
