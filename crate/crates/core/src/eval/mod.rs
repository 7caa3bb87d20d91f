//! Weighted metrics, stratified k-fold cross-validation, the TF-IDF +
//! logistic-regression baseline and the hashtag similarity report.

mod baseline;
mod crossval;
mod folds;
mod metrics;

pub use baseline::{
    lr_objective, tfidf_vectorize, train_lr_baseline, LinearModel, SparseRow, TfIdf,
    LR_GRAD_TOL, LR_MAX_EPOCHS,
};
pub use crossval::{
    evaluate_examples, fit_model, hashtag_similarity_matrix, metrics_json, run_crossval, run_crossval_with,
    write_similarity_csv, Aggregate, CrossvalReport, FitResult, FoldResult, Variant, METRICS_FORMAT_VERSION,
};
pub use folds::{holdout_split, kfold_split, Fold, FoldPlan};
pub use metrics::{confusion_matrix, metrics_from_confusion, weighted_metrics, ClassMetrics, ConfusionMatrix, MetricsReport};
