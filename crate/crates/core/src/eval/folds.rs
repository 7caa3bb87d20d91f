use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{SentimentLabel, NUM_CLASSES};
use crate::error::{Error, Result};

/// Index sets into the corpus for one fold, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub id: usize,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
    pub folds: Vec<Fold>,
}

/// Class-grouped shuffled order: each class with at least `min_count`
/// members in turn, then the pooled members of smaller classes.
fn stratified_order(items: &[usize], labels: &[SentimentLabel], min_count: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
    for &i in items {
        by_class[labels[i].index()].push(i);
    }
    let mut order = Vec::with_capacity(items.len());
    let mut pooled = Vec::new();
    let mut fully_stratified = true;
    for (c, mut members) in by_class.into_iter().enumerate() {
        members.shuffle(rng);
        if !members.is_empty() && members.len() < min_count {
            fully_stratified = false;
            log::warn!(
                "class {} has {} samples, fewer than {min_count}; splitting it without stratification",
                SentimentLabel::from_index(c).expect("class index").as_str(),
                members.len()
            );
            pooled.extend(members);
        } else {
            order.extend(members);
        }
    }
    pooled.shuffle(rng);
    order.extend(pooled);
    (order, fully_stratified)
}

/// Label-stratified k-fold split. Within each fold's training portion,
/// `round(val_fraction * n)` posts are held out for validation.
pub fn kfold_split(labels: &[SentimentLabel], k: usize, val_fraction: f64, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::config("k", "must be at least 2"));
    }
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(Error::config("val_fraction", "must be in [0, 1)"));
    }
    if labels.len() < k {
        return Err(Error::InvalidArgument(format!(
            "{} posts cannot be split into {k} folds",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<usize> = (0..labels.len()).collect();
    let (order, stratified) = stratified_order(&all, labels, k, &mut rng);
    let mut test_sets = vec![Vec::new(); k];
    for (pos, &i) in order.iter().enumerate() {
        test_sets[pos % k].push(i);
    }

    let mut folds = Vec::with_capacity(k);
    for (f, test) in test_sets.into_iter().enumerate() {
        let mut in_test = vec![false; labels.len()];
        for &i in &test {
            in_test[i] = true;
        }
        let rest: Vec<usize> = all.iter().copied().filter(|&i| !in_test[i]).collect();
        let (rest_order, _) = stratified_order(&rest, labels, 0, &mut rng);
        let (train, validation) = systematic_split(&rest_order, val_fraction);
        let mut test = test;
        test.sort_unstable();
        folds.push(Fold {
            id: f + 1,
            train,
            validation,
            test,
        });
    }
    Ok(FoldPlan {
        k,
        seed,
        stratified,
        folds,
    })
}

/// Stratified train/validation split of all posts, as sorted index lists.
pub fn holdout_split(labels: &[SentimentLabel], val_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(Error::config("val_fraction", "must be in [0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<usize> = (0..labels.len()).collect();
    let (order, _) = stratified_order(&all, labels, 0, &mut rng);
    Ok(systematic_split(&order, val_fraction))
}

/// Every `1 / fraction`-th position of the class-grouped order goes to
/// the second set, which keeps it stratified and `round(fraction * n)` long.
fn systematic_split(order: &[usize], fraction: f64) -> (Vec<usize>, Vec<usize>) {
    let n = order.len();
    let n_val = (fraction * n as f64).round() as usize;
    let (mut train, mut validation) = (Vec::new(), Vec::new());
    for (p, &i) in order.iter().enumerate() {
        if (p + 1) * n_val / n > p * n_val / n {
            validation.push(i);
        } else {
            train.push(i);
        }
    }
    train.sort_unstable();
    validation.sort_unstable();
    (train, validation)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(counts: [usize; 3]) -> Vec<SentimentLabel> {
        let mut out = Vec::new();
        for (c, n) in counts.iter().enumerate() {
            out.extend(std::iter::repeat_n(SentimentLabel::from_index(c).unwrap(), *n));
        }
        out
    }

    #[test]
    fn hundred_posts_five_folds() {
        let plan = kfold_split(&labels([40, 35, 25]), 5, 0.2, 3).unwrap();
        for f in &plan.folds {
            assert_eq!(f.test.len(), 20);
            assert_eq!(f.train.len(), 64);
            assert_eq!(f.validation.len(), 16);
        }
        assert!(plan.stratified);
    }

    #[test]
    fn folds_partition_and_stratify() {
        let y = labels([23, 11, 7]);
        let plan = kfold_split(&y, 5, 0.2, 9).unwrap();
        let mut seen: Vec<usize> = plan.folds.iter().flat_map(|f| f.test.clone()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..y.len()).collect::<Vec<_>>());
        for f in &plan.folds {
            let hate = f.test.iter().filter(|&&i| y[i] == SentimentLabel::Hate).count();
            assert!((4..=5).contains(&hate));
            assert!(f.validation.iter().all(|i| !f.test.contains(i) && !f.train.contains(i)));
            assert_eq!(f.train.len() + f.validation.len() + f.test.len(), y.len());
        }
    }

    #[test]
    fn small_class_falls_back() {
        let plan = kfold_split(&labels([20, 20, 3]), 5, 0.2, 1).unwrap();
        assert!(!plan.stratified);
    }

    #[test]
    fn deterministic() {
        let y = labels([10, 10, 10]);
        assert_eq!(kfold_split(&y, 5, 0.2, 4).unwrap(), kfold_split(&y, 5, 0.2, 4).unwrap());
        assert_ne!(kfold_split(&y, 5, 0.2, 4).unwrap(), kfold_split(&y, 5, 0.2, 5).unwrap());
    }

    #[test]
    fn holdout_sizes() {
        let (t, v) = holdout_split(&labels([50, 30, 20]), 0.2, 1).unwrap();
        assert_eq!((t.len(), v.len()), (80, 20));
        assert!(t.iter().all(|i| !v.contains(i)));
    }

    #[test]
    fn too_few_posts() {
        assert!(kfold_split(&labels([2, 1, 1]), 5, 0.2, 0).is_err());
    }
}
