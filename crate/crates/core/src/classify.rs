//! Small binary classifiers with a shared train/predict interface.
//!
//! Every model standardizes features with statistics of its own training data
//! before fitting. Defaults live in [`Hyperparams::default`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassifierKind {
    #[serde(rename = "lr", alias = "logistic")]
    LogisticRegression,
    #[serde(rename = "nb", alias = "gnb")]
    GaussianNaiveBayes,
    #[serde(rename = "svm")]
    LinearSvm,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 3] = [
        ClassifierKind::LogisticRegression,
        ClassifierKind::LinearSvm,
        ClassifierKind::GaussianNaiveBayes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::LogisticRegression => "lr",
            ClassifierKind::GaussianNaiveBayes => "nb",
            ClassifierKind::LinearSvm => "svm",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierKind::LogisticRegression => "LR",
            ClassifierKind::GaussianNaiveBayes => "NB",
            ClassifierKind::LinearSvm => "SVM",
        })
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lr" | "logistic" | "logisticregression" | "logistic_regression" => {
                Ok(ClassifierKind::LogisticRegression)
            }
            "nb" | "gnb" | "naive_bayes" | "gaussiannaivebayes" => Ok(ClassifierKind::GaussianNaiveBayes),
            "svm" | "linear_svm" | "linearsvm" => Ok(ClassifierKind::LinearSvm),
            other => Err(Error::Parameter(format!("unknown classifier '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Inverse regularization strength `C`; the penalty is `|w|^2 / (2 C N)`.
    pub regularization: f64,
    pub max_iter: usize,
    /// Gradient-norm stopping tolerance.
    pub tol: f64,
    /// Naive Bayes variance floor, relative to the largest feature variance.
    pub var_smoothing: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            regularization: 1.0,
            max_iter: 10_000,
            tol: 1e-6,
            var_smoothing: 1e-9,
        }
    }
}

/// Per-column affine map to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(features: &[f64], d: usize) -> Self {
        let n = (features.len() / d) as f64;
        let mut means = vec![0.0; d];
        for row in features.chunks_exact(d) {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = vec![0.0; d];
        for row in features.chunks_exact(d) {
            for k in 0..d {
                vars[k] += (row[k] - means[k]).powi(2);
            }
        }
        let scales = vars
            .iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { means, scales }
    }

    pub fn transform(&self, features: &[f64]) -> Vec<f64> {
        let d = self.means.len();
        let mut out = features.to_vec();
        for row in out.chunks_exact_mut(d) {
            for k in 0..d {
                row[k] = (row[k] - self.means[k]) / self.scales[k];
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    /// Score `w·x + b` on standardized features.
    Linear { weights: Vec<f64>, bias: f64 },
    GaussianNb {
        log_priors: [f64; 2],
        means: [Vec<f64>; 2],
        variances: [Vec<f64>; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ClassifierKind,
    pub scaler: Standardizer,
    pub params: ModelParams,
    pub feature_dim: usize,
    /// Optimizer iterations used; 0 for closed-form models.
    pub iterations: usize,
}

fn check_training_input(features: &[f64], d: usize, labels: &[u8]) -> Result<()> {
    if d == 0 || features.len() != labels.len() * d {
        return Err(Error::Validation(format!(
            "feature buffer of length {} does not match {} rows of dimension {d}",
            features.len(),
            labels.len()
        )));
    }
    if labels.len() < 2 {
        return Err(Error::Training("need at least 2 training instances".into()));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("training features must be finite".into()));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::Validation("labels must be 0 or 1".into()));
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::Training("training labels contain a single class".into()));
    }
    Ok(())
}

/// Fits a model on a row-major `N × d` feature buffer.
pub fn train(
    kind: ClassifierKind,
    features: &[f64],
    d: usize,
    labels: &[u8],
    hp: &Hyperparams,
) -> Result<TrainedModel> {
    check_training_input(features, d, labels)?;
    if !(hp.regularization > 0.0) {
        return Err(Error::Parameter("regularization must be positive".into()));
    }
    let scaler = Standardizer::fit(features, d);
    let x = scaler.transform(features);
    let (params, iterations) = match kind {
        ClassifierKind::LogisticRegression => {
            let fit = fit_logistic(&x, d, labels, hp, None);
            (fit.0, fit.1)
        }
        ClassifierKind::LinearSvm => fit_svm(&x, d, labels, hp),
        ClassifierKind::GaussianNaiveBayes => (fit_gnb(&x, d, labels, hp), 0),
    };
    let model = TrainedModel {
        kind,
        scaler,
        params,
        feature_dim: d,
        iterations,
    };
    let finite = match &model.params {
        ModelParams::Linear { weights, bias } => weights.iter().all(|v| v.is_finite()) && bias.is_finite(),
        ModelParams::GaussianNb { means, variances, .. } => means
            .iter()
            .chain(variances.iter())
            .flatten()
            .all(|v| v.is_finite()),
    };
    if !finite {
        return Err(Error::Training("optimization produced non-finite parameters".into()));
    }
    Ok(model)
}

impl TrainedModel {
    /// Decision score on raw features: linear margin, or log-posterior ratio for naive Bayes.
    pub fn scores(&self, features: &[f64], d: usize) -> Result<Vec<f64>> {
        if d != self.feature_dim || !features.len().is_multiple_of(d) {
            return Err(Error::Parameter(format!(
                "model expects {} features, got rows of {d}",
                self.feature_dim
            )));
        }
        let x = self.scaler.transform(features);
        Ok(match &self.params {
            ModelParams::Linear { weights, bias } => x
                .chunks_exact(d)
                .map(|row| dot(weights, row) + bias)
                .collect(),
            ModelParams::GaussianNb {
                log_priors,
                means,
                variances,
            } => x
                .chunks_exact(d)
                .map(|row| {
                    let lp = |c: usize| log_priors[c] + gaussian_log_likelihood(row, &means[c], &variances[c]);
                    lp(1) - lp(0)
                })
                .collect(),
        })
    }
}

/// Hard labels: class 1 only for a strictly positive score.
pub fn predict(model: &TrainedModel, features: &[f64], d: usize) -> Result<Vec<u8>> {
    Ok(model
        .scores(features, d)?
        .into_iter()
        .map(|s| u8::from(s > 0.0))
        .collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gaussian_log_likelihood(x: &[f64], mean: &[f64], var: &[f64]) -> f64 {
    x.iter()
        .zip(mean)
        .zip(var)
        .map(|((xv, m), v)| -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (xv - m).powi(2) / (2.0 * v))
        .sum()
}

fn log1p_exp(s: f64) -> f64 {
    if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Mean log-loss plus `|w|^2 / (2 C N)`, and its gradient `(dw, db)`.
pub(crate) fn logistic_loss_and_grad(
    w: &[f64],
    b: f64,
    x: &[f64],
    d: usize,
    y: &[u8],
    c: f64,
) -> (f64, Vec<f64>, f64) {
    let n = y.len() as f64;
    let lambda = 1.0 / (c * n);
    let mut loss = 0.0;
    let mut gw = vec![0.0; d];
    let mut gb = 0.0;
    for (row, &yi) in x.chunks_exact(d).zip(y) {
        let s = dot(w, row) + b;
        loss += log1p_exp(s) - f64::from(yi) * s;
        let r = sigmoid(s) - f64::from(yi);
        for k in 0..d {
            gw[k] += r * row[k];
        }
        gb += r;
    }
    loss /= n;
    gb /= n;
    for k in 0..d {
        gw[k] = gw[k] / n + lambda * w[k];
    }
    loss += 0.5 * lambda * dot(w, w);
    (loss, gw, gb)
}

/// Largest eigenvalue of `X̃ᵀX̃ / N` with `X̃ = [X, 1]`, by power iteration.
fn gram_spectral_norm(x: &[f64], d: usize) -> f64 {
    let n = (x.len() / d) as f64;
    let dim = d + 1;
    let mut gram = vec![0.0; dim * dim];
    for row in x.chunks_exact(d) {
        for a in 0..dim {
            let xa = if a < d { row[a] } else { 1.0 };
            for b in a..dim {
                let xb = if b < d { row[b] } else { 1.0 };
                gram[a * dim + b] += xa * xb;
            }
        }
    }
    for a in 0..dim {
        for b in a..dim {
            gram[a * dim + b] /= n;
            gram[b * dim + a] = gram[a * dim + b];
        }
    }
    let mut v = vec![1.0 / (dim as f64).sqrt(); dim];
    let mut eig = 0.0;
    for _ in 0..200 {
        let mut next = vec![0.0; dim];
        for a in 0..dim {
            next[a] = dot(&gram[a * dim..(a + 1) * dim], &v);
        }
        let norm = dot(&next, &next).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let prev = eig;
        eig = norm;
        v = next.into_iter().map(|t| t / norm).collect();
        if (eig - prev).abs() <= 1e-12 * eig {
            break;
        }
    }
    // trace bounds the top eigenvalue from above; stay below it but never under the estimate
    let trace: f64 = (0..dim).map(|a| gram[a * dim + a]).sum();
    (eig * 1.01).min(trace).max(eig)
}

/// Full-batch gradient descent with step `1/L`, `L` an upper bound on the
/// loss curvature, so the objective never increases.
fn fit_logistic(
    x: &[f64],
    d: usize,
    y: &[u8],
    hp: &Hyperparams,
    mut trace: Option<&mut Vec<f64>>,
) -> (ModelParams, usize) {
    let n = y.len() as f64;
    let lipschitz = 0.25 * gram_spectral_norm(x, d) + 1.0 / (hp.regularization * n);
    let step = 1.0 / lipschitz;
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut iterations = 0;
    for _ in 0..hp.max_iter {
        let (loss, gw, gb) = logistic_loss_and_grad(&w, b, x, d, y, hp.regularization);
        if let Some(t) = trace.as_deref_mut() {
            t.push(loss);
        }
        let gnorm = (dot(&gw, &gw) + gb * gb).sqrt();
        if gnorm < hp.tol {
            break;
        }
        for k in 0..d {
            w[k] -= step * gw[k];
        }
        b -= step * gb;
        iterations += 1;
    }
    (ModelParams::Linear { weights: w, bias: b }, iterations)
}

fn svm_objective_and_subgrad(w: &[f64], b: f64, x: &[f64], d: usize, y: &[u8], c: f64) -> (f64, Vec<f64>, f64) {
    let n = y.len() as f64;
    let lambda = 1.0 / (c * n);
    let mut obj = 0.0;
    let mut gw = vec![0.0; d];
    let mut gb = 0.0;
    for (row, &yi) in x.chunks_exact(d).zip(y) {
        let t = if yi == 1 { 1.0 } else { -1.0 };
        let margin = t * (dot(w, row) + b);
        if margin < 1.0 {
            obj += 1.0 - margin;
            for k in 0..d {
                gw[k] -= t * row[k];
            }
            gb -= t;
        }
    }
    obj = obj / n + 0.5 * lambda * dot(w, w);
    for k in 0..d {
        gw[k] = gw[k] / n + lambda * w[k];
    }
    (obj, gw, gb / n)
}

/// Hinge loss + L2 by sub-gradient descent with step `1/sqrt(t)`; returns
/// the best iterate seen.
fn fit_svm(x: &[f64], d: usize, y: &[u8], hp: &Hyperparams) -> (ModelParams, usize) {
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut best = (f64::INFINITY, w.clone(), b);
    let mut iterations = 0;
    for t in 1..=hp.max_iter {
        let (obj, gw, gb) = svm_objective_and_subgrad(&w, b, x, d, y, hp.regularization);
        if obj < best.0 {
            best = (obj, w.clone(), b);
        }
        let gnorm = (dot(&gw, &gw) + gb * gb).sqrt();
        if gnorm < hp.tol {
            break;
        }
        let step = 1.0 / (t as f64).sqrt();
        for k in 0..d {
            w[k] -= step * gw[k];
        }
        b -= step * gb;
        iterations = t;
    }
    let (obj, _, _) = svm_objective_and_subgrad(&w, b, x, d, y, hp.regularization);
    if obj < best.0 {
        best = (obj, w, b);
    }
    (
        ModelParams::Linear {
            weights: best.1,
            bias: best.2,
        },
        iterations,
    )
}

fn fit_gnb(x: &[f64], d: usize, y: &[u8], hp: &Hyperparams) -> ModelParams {
    let n = y.len() as f64;
    let mut counts = [0usize; 2];
    let mut means = [vec![0.0; d], vec![0.0; d]];
    for (row, &yi) in x.chunks_exact(d).zip(y) {
        let c = yi as usize;
        counts[c] += 1;
        for k in 0..d {
            means[c][k] += row[k];
        }
    }
    for c in 0..2 {
        means[c].iter_mut().for_each(|m| *m /= counts[c] as f64);
    }
    let mut variances = [vec![0.0; d], vec![0.0; d]];
    for (row, &yi) in x.chunks_exact(d).zip(y) {
        let c = yi as usize;
        for k in 0..d {
            variances[c][k] += (row[k] - means[c][k]).powi(2);
        }
    }
    // overall per-feature variance of the (standardized) training data
    let overall = Standardizer::fit(x, d);
    let max_var = overall.scales.iter().map(|s| s * s).fold(0.0, f64::max);
    let floor = hp.var_smoothing * max_var.max(f64::MIN_POSITIVE);
    for c in 0..2 {
        for v in variances[c].iter_mut() {
            *v = (*v / counts[c] as f64).max(floor);
        }
    }
    ModelParams::GaussianNb {
        log_priors: [(counts[0] as f64 / n).ln(), (counts[1] as f64 / n).ln()],
        means,
        variances,
    }
}
