//! Perceptron and L2-regularized logistic regression over sparse feature
//! rows, with evaluation metrics and normalized margins.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::predicates::{BoolMatrix, PredicateSetDoc};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{rows} rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("label {0} is not ±1")]
    BadLabel(i8),
    #[error("loss became non-finite at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("weight vector is zero; margin undefined")]
    ZeroWeights,
    #[error("empty input")]
    Empty,
    #[error("quantile {0} outside (0, 1)")]
    BadQuantile(f64),
    #[error("invalid hyperparameter: {0}")]
    BadConfig(String),
    #[error("model file {path}: {reason}")]
    ModelFile { path: String, reason: String },
}

/// Row-major sparse matrix; each row holds `(column, value)` pairs in
/// ascending column order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matrix {
    cols: usize,
    rows: Vec<Vec<(u32, f64)>>,
}

impl Matrix {
    pub fn new(cols: usize) -> Self {
        Matrix { cols, rows: Vec::new() }
    }

    pub fn from_bool(m: &BoolMatrix) -> Self {
        let rows = m
            .rows()
            .map(|r| r.iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| (j as u32, 1.0)).collect())
            .collect();
        Matrix { cols: m.ncols(), rows }
    }

    pub fn from_dense(cols: usize, dense: &[Vec<f64>]) -> Result<Self, LearnError> {
        let mut m = Matrix::new(cols);
        for r in dense {
            m.push_dense(r)?;
        }
        Ok(m)
    }

    pub fn push_dense(&mut self, row: &[f64]) -> Result<(), LearnError> {
        if row.len() != self.cols {
            return Err(LearnError::DimensionMismatch { expected: self.cols, got: row.len() });
        }
        self.rows.push(row.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(j, &v)| (j as u32, v)).collect());
        Ok(())
    }

    /// Appends a one-hot row.
    pub fn push_one_hot(&mut self, col: usize) -> Result<(), LearnError> {
        if col >= self.cols {
            return Err(LearnError::DimensionMismatch { expected: self.cols, got: col + 1 });
        }
        self.rows.push(vec![(col as u32, 1.0)]);
        Ok(())
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[(u32, f64)] {
        &self.rows[i]
    }

    pub fn to_dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for &(j, v) in &self.rows[i] {
            out[j as usize] = v;
        }
        out
    }

    fn is_finite(&self) -> bool {
        self.rows.iter().flatten().all(|(_, v)| v.is_finite())
    }
}

fn dot_sparse(w: &[f64], row: &[(u32, f64)]) -> f64 {
    row.iter().map(|&(j, v)| w[j as usize] * v).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn zeros(feature_names: Vec<String>) -> Self {
        let weights = vec![0.0; feature_names.len()];
        LinearModel { feature_names, weights, bias: 0.0 }
    }

    /// Model with placeholder names `f0, f1, …`.
    pub fn from_parts(weights: Vec<f64>, bias: f64) -> Self {
        let feature_names = (0..weights.len()).map(|j| format!("f{j}")).collect();
        LinearModel { feature_names, weights, bias }
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self, LearnError> {
        if names.len() != self.weights.len() {
            return Err(LearnError::DimensionMismatch { expected: self.weights.len(), got: names.len() });
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, c: f64) -> Self {
        LinearModel {
            feature_names: self.feature_names.clone(),
            weights: self.weights.iter().map(|w| w * c).collect(),
            bias: self.bias * c,
        }
    }

    pub fn score(&self, x: &[f64]) -> Result<f64, LearnError> {
        if x.len() != self.dim() {
            return Err(LearnError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias)
    }

    fn score_row(&self, row: &[(u32, f64)]) -> f64 {
        dot_sparse(&self.weights, row) + self.bias
    }

    fn check_matrix(&self, x: &Matrix) -> Result<(), LearnError> {
        if x.ncols() != self.dim() {
            return Err(LearnError::DimensionMismatch { expected: self.dim(), got: x.ncols() });
        }
        Ok(())
    }

    pub fn scores(&self, x: &Matrix) -> Result<Vec<f64>, LearnError> {
        self.check_matrix(x)?;
        Ok(x.rows.iter().map(|r| self.score_row(r)).collect())
    }
}

fn label_of(score: f64) -> i8 {
    if score > 0.0 {
        1
    } else {
        -1
    }
}

/// `sign(w·x + b)` with a zero score mapped to −1.
pub fn predict(m: &LinearModel, x: &[f64]) -> Result<i8, LearnError> {
    m.score(x).map(label_of)
}

pub fn predict_all(m: &LinearModel, x: &Matrix) -> Result<Vec<i8>, LearnError> {
    Ok(m.scores(x)?.into_iter().map(label_of).collect())
}

fn check_labels(x: &Matrix, y: &[i8]) -> Result<(), LearnError> {
    if x.nrows() != y.len() {
        return Err(LearnError::LabelCount { rows: x.nrows(), labels: y.len() });
    }
    match y.iter().find(|&&l| l != 1 && l != -1) {
        Some(&l) => Err(LearnError::BadLabel(l)),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: Confusion,
}

impl Metrics {
    /// Positive class is +1. With no positive-class events at all, precision,
    /// recall and F1 are 1.
    pub fn from_confusion(c: Confusion) -> Self {
        let n = c.total();
        let accuracy = if n == 0 { 0.0 } else { (c.tp + c.tn) as f64 / n as f64 };
        if c.tp + c.fp + c.fn_ == 0 {
            return Metrics { accuracy, precision: 1.0, recall: 1.0, f1: 1.0, confusion: c };
        }
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Metrics { accuracy, precision, recall, f1, confusion: c }
    }

    pub fn from_predictions(y_true: &[i8], y_pred: &[i8]) -> Self {
        let mut c = Confusion { tp: 0, fp: 0, fn_: 0, tn: 0 };
        for (&t, &p) in y_true.iter().zip(y_pred) {
            match (t > 0, p > 0) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Metrics::from_confusion(c)
    }
}

pub fn evaluate(m: &LinearModel, x: &Matrix, y: &[i8]) -> Result<Metrics, LearnError> {
    check_labels(x, y)?;
    Ok(Metrics::from_predictions(y, &predict_all(m, x)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerceptronConfig {
    pub max_epochs: usize,
    /// Learn an intercept alongside the weights.
    pub fit_bias: bool,
}

impl Default for PerceptronConfig {
    fn default() -> Self {
        PerceptronConfig { max_epochs: 1000, fit_bias: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerceptronRun {
    pub model: LinearModel,
    pub mistakes: usize,
    pub epochs: usize,
    pub converged: bool,
}

/// Cyclic perceptron from zero. A mistake is any row whose predicted label
/// (ties → −1) differs from its label.
pub fn train_perceptron(x: &Matrix, y: &[i8], cfg: PerceptronConfig) -> Result<PerceptronRun, LearnError> {
    check_labels(x, y)?;
    let mut model = LinearModel::from_parts(vec![0.0; x.ncols()], 0.0);
    let mut mistakes = 0;
    for epoch in 1..=cfg.max_epochs {
        let mut epoch_mistakes = 0;
        for (row, &label) in x.rows.iter().zip(y) {
            if label_of(model.score_row(row)) != label {
                epoch_mistakes += 1;
                let yf = f64::from(label);
                for &(j, v) in row {
                    model.weights[j as usize] += yf * v;
                }
                if cfg.fit_bias {
                    model.bias += yf;
                }
            }
        }
        mistakes += epoch_mistakes;
        if epoch_mistakes == 0 {
            return Ok(PerceptronRun { model, mistakes, epochs: epoch, converged: true });
        }
    }
    Ok(PerceptronRun { model, mistakes, epochs: cfg.max_epochs, converged: x.nrows() == 0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub l2: f64,
    pub lr: f64,
    pub epochs: usize,
    pub tol: f64,
}

impl LogRegConfig {
    /// Settings for runs with label noise.
    pub const NOISY: LogRegConfig = LogRegConfig { l2: 1e-4, lr: 0.5, epochs: 5000, tol: 1e-8 };
    /// Unregularized settings for separability checks.
    pub const SEPARABLE: LogRegConfig = LogRegConfig { l2: 0.0, lr: 0.5, epochs: 5000, tol: 1e-8 };

    fn validate(&self) -> Result<(), LearnError> {
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(LearnError::BadConfig(format!("l2 = {}", self.l2)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(LearnError::BadConfig(format!("lr = {}", self.lr)));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(LearnError::BadConfig(format!("tol = {}", self.tol)));
        }
        Ok(())
    }
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig::NOISY
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss plus `l2/2·‖w‖²` (bias unpenalized), with its
/// gradient `(∂w, ∂b)`.
pub fn logistic_objective(x: &Matrix, y: &[i8], w: &[f64], b: f64, l2: f64) -> (f64, Vec<f64>, f64) {
    let n = x.nrows().max(1) as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (row, &label) in x.rows.iter().zip(y) {
        let yf = f64::from(label);
        let margin = yf * (dot_sparse(w, row) + b);
        loss += softplus(-margin);
        let coef = -yf * sigmoid(-margin);
        for &(j, v) in row {
            gw[j as usize] += coef * v;
        }
        gb += coef;
    }
    loss /= n;
    gb /= n;
    let mut sq = 0.0;
    for (g, &wj) in gw.iter_mut().zip(w) {
        *g = *g / n + l2 * wj;
        sq += wj * wj;
    }
    (loss + 0.5 * l2 * sq, gw, gb)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegRun {
    pub model: LinearModel,
    pub epochs: usize,
    pub final_loss: f64,
    pub converged: bool,
}

/// Full-batch gradient descent from zero.
pub fn train_logreg(x: &Matrix, y: &[i8], cfg: LogRegConfig) -> Result<LogRegRun, LearnError> {
    check_labels(x, y)?;
    cfg.validate()?;
    if !x.is_finite() {
        return Err(LearnError::BadConfig("non-finite feature value".into()));
    }
    let mut w = vec![0.0; x.ncols()];
    let mut b = 0.0;
    let mut loss = f64::NAN;
    for epoch in 0..cfg.epochs {
        let (l, gw, gb) = logistic_objective(x, y, &w, b, cfg.l2);
        if !l.is_finite() {
            return Err(LearnError::Divergence { epoch });
        }
        loss = l;
        let gmax = gw.iter().fold(gb.abs(), |acc, g| acc.max(g.abs()));
        if gmax < cfg.tol {
            return Ok(LogRegRun {
                model: LinearModel::from_parts(w, b),
                epochs: epoch,
                final_loss: loss,
                converged: true,
            });
        }
        for (wj, g) in w.iter_mut().zip(&gw) {
            *wj -= cfg.lr * g;
        }
        b -= cfg.lr * gb;
    }
    let (l, _, _) = logistic_objective(x, y, &w, b, cfg.l2);
    if !l.is_finite() {
        return Err(LearnError::Divergence { epoch: cfg.epochs });
    }
    if cfg.epochs > 0 {
        loss = l;
    }
    Ok(LogRegRun { model: LinearModel::from_parts(w, b), epochs: cfg.epochs, final_loss: loss, converged: false })
}

/// `y·(w·x + b)/‖w‖₂`.
pub fn normalized_margin(m: &LinearModel, x: &[f64], y: i8) -> Result<f64, LearnError> {
    let norm = m.weight_norm();
    if norm == 0.0 {
        return Err(LearnError::ZeroWeights);
    }
    Ok(f64::from(y) * m.score(x)? / norm)
}

pub fn normalized_margins(m: &LinearModel, x: &Matrix, y: &[i8]) -> Result<Vec<f64>, LearnError> {
    check_labels(x, y)?;
    let norm = m.weight_norm();
    if norm == 0.0 {
        return Err(LearnError::ZeroWeights);
    }
    Ok(m.scores(x)?.into_iter().zip(y).map(|(s, &l)| f64::from(l) * s / norm).collect())
}

/// Nearest-rank lower quantile: the `⌈q·N⌉`-th smallest value.
pub fn margin_quantile(margins: &[f64], q: f64) -> Result<f64, LearnError> {
    if margins.is_empty() {
        return Err(LearnError::Empty);
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(LearnError::BadQuantile(q));
    }
    let mut sorted = margins.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Ok(sorted[rank - 1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "lowercase")]
pub enum TrainConfig {
    Logreg(LogRegConfig),
    Perceptron(PerceptronConfig),
}

/// On-disk model: weights plus what is needed to reproduce and reapply it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    #[serde(flatten)]
    pub model: LinearModel,
    pub config: TrainConfig,
    pub dataset_fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<PredicateSetDoc>,
}

impl SavedModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LearnError> {
        let saved: SavedModel = serde_json::from_str(text)
            .map_err(|e| LearnError::ModelFile { path: "<text>".into(), reason: e.to_string() })?;
        let m = &saved.model;
        if m.weights.len() != m.feature_names.len() {
            return Err(LearnError::DimensionMismatch { expected: m.feature_names.len(), got: m.weights.len() });
        }
        Ok(saved)
    }

    pub fn save(&self, path: &Path) -> Result<(), LearnError> {
        std::fs::write(path, self.to_json() + "\n")
            .map_err(|e| LearnError::ModelFile { path: path.display().to_string(), reason: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self, LearnError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LearnError::ModelFile { path: path.display().to_string(), reason: e.to_string() })?;
        Self::from_json(&text).map_err(|e| match e {
            LearnError::ModelFile { reason, .. } => LearnError::ModelFile { path: path.display().to_string(), reason },
            other => other,
        })
    }
}
