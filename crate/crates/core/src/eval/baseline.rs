//! TF-IDF features and a multinomial logistic-regression classifier.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::corpus::{SentimentLabel, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::model::{argmax, softmax};

/// Sparse row as `(feature index, value)` pairs sorted by index.
pub type SparseRow = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfIdf {
    vocabulary: BTreeMap<String, usize>,
    idf: Vec<f64>,
}

impl TfIdf {
    /// Smoothed idf `ln((1 + N) / (1 + df)) + 1` over whitespace tokens.
    pub fn fit(docs: &[&str]) -> Result<Self> {
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in docs {
            let mut terms: Vec<&str> = doc.split_whitespace().collect();
            terms.sort_unstable();
            terms.dedup();
            for t in terms {
                *df.entry(t).or_default() += 1;
            }
        }
        if df.is_empty() {
            return Err(Error::EmptyVocabulary);
        }
        let n = docs.len() as f64;
        let mut vocabulary = BTreeMap::new();
        let mut idf = Vec::with_capacity(df.len());
        for (i, (term, count)) in df.into_iter().enumerate() {
            vocabulary.insert(term.to_string(), i);
            idf.push(((1.0 + n) / (1.0 + count as f64)).ln() + 1.0);
        }
        Ok(Self { vocabulary, idf })
    }

    pub fn len(&self) -> usize {
        self.idf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idf.is_empty()
    }

    pub fn index(&self, term: &str) -> Option<usize> {
        self.vocabulary.get(term).copied()
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.index(term).map(|i| self.idf[i])
    }

    /// Raw term counts, in feature-index order. Unknown terms are dropped.
    pub fn term_counts(&self, doc: &str) -> SparseRow {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for t in doc.split_whitespace() {
            if let Some(i) = self.index(t) {
                *counts.entry(i).or_default() += 1.0;
            }
        }
        counts.into_iter().collect()
    }

    /// L2-normalised tf-idf row.
    pub fn transform(&self, doc: &str) -> SparseRow {
        let mut row: SparseRow = self
            .term_counts(doc)
            .into_iter()
            .map(|(i, tf)| (i, tf * self.idf[i]))
            .collect();
        let norm = row.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, v) in &mut row {
                *v /= norm;
            }
        }
        row
    }
}

/// Fit on `docs` and transform them.
pub fn tfidf_vectorize(docs: &[&str]) -> Result<(TfIdf, Vec<SparseRow>)> {
    let model = TfIdf::fit(docs)?;
    let rows = docs.iter().map(|d| model.transform(d)).collect();
    Ok((model, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    /// `M x V`.
    pub weights: Array2<f64>,
    pub bias: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(n_features: usize) -> Self {
        Self {
            weights: Array2::zeros((NUM_CLASSES, n_features)),
            bias: vec![0.0; NUM_CLASSES],
        }
    }

    pub fn logits(&self, x: &[(usize, f64)]) -> Vec<f64> {
        (0..NUM_CLASSES)
            .map(|c| self.bias[c] + x.iter().map(|&(i, v)| self.weights[[c, i]] * v).sum::<f64>())
            .collect()
    }

    pub fn predict_proba(&self, x: &[(usize, f64)]) -> Result<Vec<f64>> {
        softmax(&self.logits(x))
    }

    pub fn predict(&self, x: &[(usize, f64)]) -> Result<SentimentLabel> {
        let p = self.predict_proba(x)?;
        Ok(SentimentLabel::from_index(argmax(&p)).expect("class index"))
    }
}

/// Mean cross-entropy plus `l2 / 2 * |W|^2` (bias unregularised), with
/// its gradient as `(dW, db)`.
pub fn lr_objective(
    model: &LinearModel,
    features: &[SparseRow],
    labels: &[SentimentLabel],
    l2_weight: f64,
) -> Result<(f64, Array2<f64>, Vec<f64>)> {
    if features.len() != labels.len() {
        return Err(Error::LengthMismatch(features.len(), labels.len()));
    }
    if features.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let n = features.len() as f64;
    let mut dw = &model.weights * l2_weight;
    let mut db = vec![0.0; NUM_CLASSES];
    let mut loss = 0.5 * l2_weight * model.weights.iter().map(|w| w * w).sum::<f64>();
    for (x, y) in features.iter().zip(labels) {
        let p = model.predict_proba(x)?;
        loss -= p[y.index()].ln() / n;
        for c in 0..NUM_CLASSES {
            let g = (p[c] - f64::from(u8::from(c == y.index()))) / n;
            db[c] += g;
            for &(i, v) in x {
                dw[[c, i]] += g * v;
            }
        }
    }
    Ok((loss, dw, db))
}

pub const LR_MAX_EPOCHS: usize = 1000;
pub const LR_GRAD_TOL: f64 = 1e-5;

/// Full-batch gradient descent with fixed per-block step sizes derived
/// from the smoothness bound of the objective.
pub fn train_lr_baseline(
    features: &[SparseRow],
    labels: &[SentimentLabel],
    n_features: usize,
    l2_weight: f64,
) -> Result<LinearModel> {
    if !(l2_weight >= 0.0 && l2_weight.is_finite()) {
        return Err(Error::config("l2_weight", "must be non-negative"));
    }
    if features.iter().flatten().any(|&(i, _)| i >= n_features) {
        return Err(Error::InvalidArgument("feature index out of range".into()));
    }
    let max_sq = features
        .iter()
        .map(|x| x.iter().map(|(_, v)| v * v).sum::<f64>())
        .fold(0.0, f64::max);
    let lr_w = 1.0 / (2.0 * (0.5 * max_sq + l2_weight).max(1e-12));
    let lr_b = 1.0;
    let mut model = LinearModel::zeros(n_features);
    for epoch in 1..=LR_MAX_EPOCHS {
        let (loss, dw, db) = lr_objective(&model, features, labels, l2_weight)?;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                step: epoch,
                loss,
            });
        }
        let norm = (dw.iter().map(|g| g * g).sum::<f64>() + db.iter().map(|g| g * g).sum::<f64>()).sqrt();
        if norm < LR_GRAD_TOL {
            log::debug!("logistic regression converged after {} epochs", epoch - 1);
            break;
        }
        model.weights.scaled_add(-lr_w, &dw);
        for (b, g) in model.bias.iter_mut().zip(&db) {
            *b -= lr_b * g;
        }
    }
    Ok(model)
}
