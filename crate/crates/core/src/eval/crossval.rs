use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::baseline::{train_lr_baseline, TfIdf};
use super::folds::{kfold_split, Fold};
use super::metrics::{weighted_metrics, MetricsReport};
use crate::augment::{augment_dataset, augmented_examples, train_student, AugmentationSummary};
use crate::config::RunConfig;
use crate::corpus::{partition, HashtagMode, Lexicon, Post, SentimentLabel};
use crate::encoder::{BackendBuilder, EncoderBackend};
use crate::error::{Error, Result};
use crate::model::{
    cosine_similarity, fresh_state, predict_text, train, LossWeights, ModelState, TrainExample,
    TrainHistory,
};

pub const METRICS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    NoHashtag,
    RawHashtag,
    SegmentedHashtag,
    Sric,
    SricAugmented,
    LrBaseline,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::NoHashtag,
        Variant::RawHashtag,
        Variant::SegmentedHashtag,
        Variant::Sric,
        Variant::SricAugmented,
        Variant::LrBaseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::NoHashtag => "no_hashtag",
            Variant::RawHashtag => "raw_hashtag",
            Variant::SegmentedHashtag => "segmented_hashtag",
            Variant::Sric => "sric",
            Variant::SricAugmented => "sric_augmented",
            Variant::LrBaseline => "lr_baseline",
        }
    }

    /// How sentiment hashtags appear in the classifier input.
    pub fn text_mode(self) -> HashtagMode {
        match self {
            Variant::NoHashtag => HashtagMode::Strip,
            Variant::RawHashtag => HashtagMode::Raw,
            _ => HashtagMode::Segmented,
        }
    }

    pub fn is_joint(self) -> bool {
        matches!(self, Variant::Sric | Variant::SricAugmented)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown variant {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub accuracy: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
}

impl Aggregate {
    fn of(m: &MetricsReport) -> Self {
        Self {
            accuracy: m.accuracy,
            weighted_precision: m.weighted_precision,
            weighted_recall: m.weighted_recall,
            weighted_f1: m.weighted_f1,
        }
    }

    fn values(&self) -> [(&'static str, f64); 4] {
        [
            ("accuracy", self.accuracy),
            ("weighted_precision", self.weighted_precision),
            ("weighted_recall", self.weighted_recall),
            ("weighted_f1", self.weighted_f1),
        ]
    }

    fn map(items: &[Aggregate], f: impl Fn(&[f64]) -> f64) -> Self {
        let col = |g: fn(&Aggregate) -> f64| f(&items.iter().map(g).collect::<Vec<_>>());
        Self {
            accuracy: col(|a| a.accuracy),
            weighted_precision: col(|a| a.weighted_precision),
            weighted_recall: col(|a| a.weighted_recall),
            weighted_f1: col(|a| a.weighted_f1),
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold_id: usize,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
    pub n_augmented: usize,
    pub loss_weights: Option<LossWeights>,
    pub best_epoch: Option<usize>,
    pub metrics: MetricsReport,
    /// For the augmented variant, the teacher's scores on the same fold.
    pub teacher_metrics: Option<MetricsReport>,
    pub augmentation: Option<AugmentationSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossvalReport {
    pub variant: Variant,
    pub seed: u64,
    pub config_hash: String,
    pub k: usize,
    pub stratified: bool,
    pub n_posts: usize,
    pub n_hashtag_free: usize,
    pub folds: Vec<FoldResult>,
    pub mean: Aggregate,
    pub std: Aggregate,
    pub teacher_mean: Option<Aggregate>,
    /// Hashtag surfaces and their fold-averaged cosine similarities.
    pub similarity: Option<(Vec<String>, Vec<Vec<f64>>)>,
}

pub fn evaluate_examples<B: EncoderBackend>(state: &ModelState<B>, examples: &[TrainExample]) -> Result<MetricsReport> {
    let y_true: Vec<SentimentLabel> = examples.iter().map(|e| e.label).collect();
    let y_pred = examples
        .iter()
        .map(|e| predict_text(state, &e.text))
        .collect::<Result<Vec<_>>>()?;
    weighted_metrics(&y_true, &y_pred)
}

/// Pairwise cosine similarity of the lexicon's segmented hashtags.
pub fn hashtag_similarity_matrix<B: EncoderBackend>(backend: &B, lexicon: &Lexicon) -> Result<Vec<Vec<f64>>> {
    if lexicon.len() < 2 {
        return Err(Error::InvalidArgument("similarity matrix needs at least 2 hashtags".into()));
    }
    let vecs: Vec<Vec<f64>> = lexicon.entries().iter().map(|e| backend.encode(&e.segmented)).collect();
    let k = vecs.len();
    let mut m = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let s = if i == j {
                cosine_similarity(&vecs[i], &vecs[i]).map(|_| 1.0)?
            } else {
                cosine_similarity(&vecs[i], &vecs[j])?
            };
            m[i][j] = s;
            m[j][i] = s;
        }
    }
    Ok(m)
}

/// CSV with hashtag surfaces as the header row and first column.
pub fn write_similarity_csv(surfaces: &[String], matrix: &[Vec<f64>], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![String::new()];
    header.extend(surfaces.iter().cloned());
    w.write_record(&header)?;
    for (s, row) in surfaces.iter().zip(matrix) {
        let mut rec = vec![s.clone()];
        rec.extend(row.iter().map(|v| format!("{v:.6}")));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<similarity csv>", e))?;
    Ok(())
}

fn select(examples: &[TrainExample], idx: &[usize]) -> Vec<TrainExample> {
    idx.iter().map(|&i| examples[i].clone()).collect()
}

struct FoldData {
    train: Vec<TrainExample>,
    validation: Vec<TrainExample>,
    test: Vec<TrainExample>,
}

/// A model chosen by [`fit_model`].
pub struct FitResult<B> {
    pub state: ModelState<B>,
    pub weights: LossWeights,
    pub history: TrainHistory,
    pub validation_f1: f64,
}

/// Train one model per candidate weight setting and keep the one with the
/// best validation weighted F1 (earliest candidate on ties). Seeds come
/// from `config` and `seed_index`.
pub fn fit_model<Bd: BackendBuilder>(
    builder: &Bd,
    train_set: &[TrainExample],
    validation: &[TrainExample],
    candidates: &[LossWeights],
    config: &RunConfig,
    seed_index: u64,
) -> Result<FitResult<Bd::Backend>> {
    if candidates.is_empty() {
        return Err(Error::config("weight_grid", "no valid loss weights"));
    }
    let init_seed = config.derive_seed("init", seed_index);
    let shuffle_seed = config.derive_seed("shuffle", seed_index);
    let fit = |w: LossWeights| -> Result<FitResult<Bd::Backend>> {
        let state = fresh_state(builder, &[train_set, validation], config.dropout, init_seed);
        let (state, history) = train(state, train_set, validation, &config.train_config(w, shuffle_seed))?;
        let validation_f1 = evaluate_examples(&state, validation)?.weighted_f1;
        Ok(FitResult {
            state,
            weights: w,
            history,
            validation_f1,
        })
    };
    if candidates.len() == 1 {
        return fit(candidates[0]);
    }
    let scores = candidates
        .par_iter()
        .map(|&w| Ok(fit(w)?.validation_f1))
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    log::debug!(
        "split {seed_index}: selected weights {:?} (validation weighted F1 {:.4})",
        candidates[best],
        scores[best]
    );
    fit(candidates[best])
}

fn run_fold<Bd: BackendBuilder>(
    builder: &Bd,
    examples: &[TrainExample],
    hashtag_free: &[Post],
    lexicon: &Lexicon,
    fold: &Fold,
    config: &RunConfig,
) -> Result<(FoldResult, Option<Vec<Vec<f64>>>)> {
    let variant = config.variant;
    let data = FoldData {
        train: select(examples, &fold.train),
        validation: select(examples, &fold.validation),
        test: select(examples, &fold.test),
    };
    let mut result = FoldResult {
        fold_id: fold.id,
        n_train: data.train.len(),
        n_validation: data.validation.len(),
        n_test: data.test.len(),
        n_augmented: 0,
        loss_weights: None,
        best_epoch: None,
        metrics: weighted_metrics(&[SentimentLabel::Neutral], &[SentimentLabel::Neutral])?,
        teacher_metrics: None,
        augmentation: None,
    };
    let fold_id = fold.id as u64;

    if variant == Variant::LrBaseline {
        let docs: Vec<&str> = data.train.iter().map(|e| e.text.as_str()).collect();
        let tfidf = TfIdf::fit(&docs)?;
        let x: Vec<_> = docs.iter().map(|d| tfidf.transform(d)).collect();
        let y: Vec<SentimentLabel> = data.train.iter().map(|e| e.label).collect();
        let model = train_lr_baseline(&x, &y, tfidf.len(), config.l2_weight)?;
        let y_true: Vec<SentimentLabel> = data.test.iter().map(|e| e.label).collect();
        let y_pred = data
            .test
            .iter()
            .map(|e| model.predict(&tfidf.transform(&e.text)))
            .collect::<Result<Vec<_>>>()?;
        result.metrics = weighted_metrics(&y_true, &y_pred)?;
        result.metrics.fold_id = Some(fold.id);
        return Ok((result, None));
    }

    let candidates = if variant.is_joint() {
        config.weight_candidates()
    } else {
        vec![LossWeights::sentiment_only()]
    };
    let mut trained = fit_model(builder, &data.train, &data.validation, &candidates, config, fold_id)?;
    result.loss_weights = Some(trained.weights);
    result.best_epoch = Some(trained.history.best_epoch);

    if variant == Variant::SricAugmented {
        let mut teacher_metrics = evaluate_examples(&trained.state, &data.test)?;
        teacher_metrics.fold_id = Some(fold.id);
        result.teacher_metrics = Some(teacher_metrics);
        let samples = augment_dataset(&trained.state, hashtag_free, lexicon)?;
        result.augmentation = Some(AugmentationSummary::from_samples(&samples));
        let augmented = augmented_examples(&samples, hashtag_free, lexicon, variant.text_mode())?;
        result.n_augmented = augmented.len();
        let tc = config.train_config(trained.weights, config.derive_seed("student-shuffle", fold_id));
        let (student, history) = train_student(
            builder,
            &data.train,
            &augmented,
            &data.validation,
            &tc,
            config.dropout,
            config.derive_seed("student-init", fold_id),
        )?;
        trained.state = student;
        result.best_epoch = Some(history.best_epoch);
    }

    result.metrics = evaluate_examples(&trained.state, &data.test)?;
    result.metrics.fold_id = Some(fold.id);
    let sim = if lexicon.len() >= 2 {
        Some(hashtag_similarity_matrix(&trained.state.encoder, lexicon)?)
    } else {
        None
    };
    Ok((result, sim))
}

/// k-fold cross-validation over the posts carrying lexicon hashtags.
/// Hashtag-free posts are only used as augmentation input.
pub fn run_crossval_with<Bd: BackendBuilder>(
    builder: &Bd,
    corpus: &[Post],
    lexicon: &Lexicon,
    config: &RunConfig,
) -> Result<CrossvalReport> {
    config.validate()?;
    let part = partition(corpus, lexicon);
    let t_o = &part.with_hashtags;
    if t_o.len() < config.k {
        return Err(Error::InvalidArgument(format!(
            "{} posts carry lexicon hashtags, fewer than k = {}",
            t_o.len(),
            config.k
        )));
    }
    let variant = config.variant;
    let examples: Vec<TrainExample> = t_o
        .iter()
        .map(|p| TrainExample::from_post(p, lexicon, variant.text_mode(), variant.is_joint()))
        .collect();
    let labels: Vec<SentimentLabel> = t_o.iter().map(|p| p.label).collect();
    let plan = kfold_split(&labels, config.k, config.val_fraction, config.derive_seed("folds", 0))?;

    let outcomes = plan
        .folds
        .par_iter()
        .map(|fold| run_fold(builder, &examples, &part.without_hashtags, lexicon, fold, config))
        .collect::<Result<Vec<_>>>()?;

    let per_fold: Vec<Aggregate> = outcomes.iter().map(|(r, _)| Aggregate::of(&r.metrics)).collect();
    let teacher: Vec<Aggregate> = outcomes
        .iter()
        .filter_map(|(r, _)| r.teacher_metrics.as_ref().map(Aggregate::of))
        .collect();
    let sims: Vec<&Vec<Vec<f64>>> = outcomes.iter().filter_map(|(_, s)| s.as_ref()).collect();
    let similarity = (!sims.is_empty()).then(|| {
        let k = lexicon.len();
        let mut m = vec![vec![0.0; k]; k];
        for s in &sims {
            for i in 0..k {
                for j in 0..k {
                    m[i][j] += s[i][j] / sims.len() as f64;
                }
            }
        }
        (lexicon.entries().iter().map(|e| e.surface.clone()).collect(), m)
    });
    Ok(CrossvalReport {
        variant,
        seed: config.seed,
        config_hash: config.config_hash(),
        k: config.k,
        stratified: plan.stratified,
        n_posts: t_o.len(),
        n_hashtag_free: part.without_hashtags.len(),
        mean: Aggregate::map(&per_fold, mean),
        std: Aggregate::map(&per_fold, std_dev),
        teacher_mean: (!teacher.is_empty()).then(|| Aggregate::map(&teacher, mean)),
        folds: outcomes.into_iter().map(|(r, _)| r).collect(),
        similarity,
    })
}

/// Cross-validation with the backend named in `config`.
pub fn run_crossval(corpus: &[Post], lexicon: &Lexicon, config: &RunConfig) -> Result<CrossvalReport> {
    config.validate()?;
    run_crossval_with(&config.toy_encoder(), corpus, lexicon, config)
}

fn round4(x: f64) -> Value {
    let r = (x * 1e4).round() / 1e4;
    json!(if r == 0.0 { 0.0 } else { r })
}

fn metrics_value(m: &MetricsReport) -> Value {
    let mut per_class = Map::new();
    for (c, cm) in m.per_class.iter().enumerate() {
        per_class.insert(
            SentimentLabel::from_index(c).expect("class index").as_str().to_string(),
            json!({
                "precision": round4(cm.precision),
                "recall": round4(cm.recall),
                "f1": round4(cm.f1),
                "support": cm.support,
            }),
        );
    }
    json!({
        "accuracy": round4(m.accuracy),
        "weighted_precision": round4(m.weighted_precision),
        "weighted_recall": round4(m.weighted_recall),
        "weighted_f1": round4(m.weighted_f1),
        "per_class": per_class,
    })
}

fn aggregate_value(a: &Aggregate) -> Value {
    Value::Object(a.values().iter().map(|(k, v)| (k.to_string(), round4(*v))).collect())
}

impl MetricsReport {
    /// JSON object with values rounded to 4 decimals.
    pub fn to_json(&self) -> Value {
        let mut v = metrics_value(self);
        if let Some(id) = self.fold_id {
            v["fold_id"] = json!(id);
        }
        v
    }
}

/// The metrics document: per-fold blocks and the aggregate, values at 4
/// decimals, plus `"mean (std)"` display strings.
pub fn metrics_json(report: &CrossvalReport) -> String {
    let folds: Vec<Value> = report
        .folds
        .iter()
        .map(|f| {
            let mut v = json!({
                "fold_id": f.fold_id,
                "n_train": f.n_train,
                "n_validation": f.n_validation,
                "n_test": f.n_test,
                "metrics": metrics_value(&f.metrics),
            });
            if let Some(w) = f.loss_weights {
                v["loss_weights"] = json!({"alpha": w.alpha, "beta": w.beta, "gamma": w.gamma});
            }
            if let Some(e) = f.best_epoch {
                v["best_epoch"] = json!(e);
            }
            if let Some(t) = &f.teacher_metrics {
                v["teacher_metrics"] = metrics_value(t);
            }
            if let Some(a) = &f.augmentation {
                v["n_augmented"] = json!(f.n_augmented);
                v["augmentation"] = json!(a);
            }
            v
        })
        .collect();
    let display: Map<String, Value> = report
        .mean
        .values()
        .iter()
        .zip(report.std.values())
        .map(|((k, m), (_, s))| (k.to_string(), json!(format!("{m:.4} ({s:.3})"))))
        .collect();
    let mut aggregate = json!({
        "mean": aggregate_value(&report.mean),
        "std": aggregate_value(&report.std),
        "display": display,
    });
    if let Some(t) = &report.teacher_mean {
        aggregate["teacher_mean"] = aggregate_value(t);
    }
    let doc = json!({
        "format_version": METRICS_FORMAT_VERSION,
        "variant": report.variant,
        "seed": report.seed,
        "config_hash": report.config_hash,
        "k": report.k,
        "stratified_folds": report.stratified,
        "n_posts": report.n_posts,
        "n_hashtag_free": report.n_hashtag_free,
        "folds": folds,
        "aggregate": aggregate,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("metrics serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_strings_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
            assert_eq!(serde_json::to_value(v).unwrap(), json!(v.as_str()));
        }
        assert!("bert".parse::<Variant>().is_err());
    }

    #[test]
    fn population_std() {
        assert!((std_dev(&[1.0, 3.0]) - 1.0).abs() < 1e-12);
        assert_eq!(std_dev(&[0.5; 4]), 0.0);
    }

    #[test]
    fn rounding_to_four_places() {
        assert_eq!(round4(0.71204).to_string(), "0.712");
        assert_eq!(round4(0.12345678).to_string(), "0.1235");
        assert_eq!(round4(-0.00001).to_string(), "0.0");
    }

    #[test]
    fn display_convention() {
        assert_eq!(format!("{:.4} ({:.3})", 0.712, 0.0241), "0.7120 (0.024)");
    }
}
