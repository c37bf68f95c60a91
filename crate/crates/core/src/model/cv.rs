use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::train::{evaluate, train, MetricRecord};
use super::{Dataset, TrainConfig};
use crate::error::{Error, Result};

/// Disjoint item indices for training, model selection and reporting.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

fn by_class(labels: &[usize], rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut groups = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        groups[l].push(i);
    }
    for g in &mut groups {
        g.shuffle(rng);
    }
    groups
}

impl Split {
    /// Per class, `round(val_frac * n)` items go to validation and
    /// `round(test_frac * n)` to test; the rest train.
    pub fn stratified(labels: &[usize], val_frac: f64, test_frac: f64, seed: u64) -> Result<Split> {
        if !(0.0..1.0).contains(&(val_frac + test_frac)) || val_frac < 0.0 || test_frac < 0.0 {
            return Err(Error::InvalidArgument(format!("split fractions {val_frac} and {test_frac}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut split = Split::default();
        for group in by_class(labels, &mut rng) {
            let n = group.len() as f64;
            let n_test = (n * test_frac).round() as usize;
            let n_val = ((n * val_frac).round() as usize).min(group.len() - n_test);
            split.test.extend_from_slice(&group[..n_test]);
            split.val.extend_from_slice(&group[n_test..n_test + n_val]);
            split.train.extend_from_slice(&group[n_test + n_val..]);
        }
        split.train.sort_unstable();
        split.val.sort_unstable();
        split.test.sort_unstable();
        Ok(split)
    }

    /// Everything in `train`; nothing held out.
    pub fn all(len: usize) -> Split {
        Split { train: (0..len).collect(), ..Split::default() }
    }
}

/// Stratified partition of `0..labels.len()` into `folds` disjoint parts.
/// Class members are dealt round-robin so fold sizes differ by at most one.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidArgument("cross-validation needs at least two folds".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = by_class(labels, &mut rng);
    if let Some((class, g)) = groups.iter().enumerate().find(|(_, g)| !g.is_empty() && g.len() < folds) {
        return Err(Error::InvalidArgument(format!("class {class} has {} samples, fewer than {folds} folds", g.len())));
    }
    let mut out = vec![Vec::new(); folds];
    let mut next = 0;
    for g in groups {
        for i in g {
            out[next].push(i);
            next = (next + 1) % folds;
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub test_accuracy: f64,
    pub test_loss: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub history: Vec<MetricRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldReport>,
    pub mean_accuracy: f64,
    /// Population standard deviation across folds.
    pub std_accuracy: f64,
}

/// Stratified k-fold cross-validation. Within each training fold a
/// stratified 20% is held out for early stopping; fold `f` is seeded with
/// `cfg.seed + f`.
pub fn kfold_cv(cfg: &TrainConfig, data: &Dataset, folds: usize) -> Result<CvReport> {
    let labels = data.labels();
    let parts = stratified_folds(&labels, folds, cfg.seed)?;
    let mut reports = Vec::with_capacity(folds);
    for (f, test) in parts.iter().enumerate() {
        let seed = cfg.seed.wrapping_add(f as u64);
        let rest: Vec<usize> =
            parts.iter().enumerate().filter(|&(g, _)| g != f).flat_map(|(_, p)| p.iter().copied()).collect();
        let rest_labels: Vec<usize> = rest.iter().map(|&i| labels[i]).collect();
        let inner = Split::stratified(&rest_labels, 0.2, 0.0, seed)?;
        let split = Split {
            train: inner.train.iter().map(|&i| rest[i]).collect(),
            val: inner.val.iter().map(|&i| rest[i]).collect(),
            test: test.clone(),
        };
        let fold_cfg = TrainConfig { seed, ..cfg.clone() };
        let outcome = train(&fold_cfg, data, &split)?;
        let eval = evaluate(&outcome.model, data, &split.test)?;
        reports.push(FoldReport {
            fold: f,
            test_accuracy: eval.accuracy,
            test_loss: eval.loss,
            best_epoch: outcome.best_epoch,
            epochs_run: outcome.epochs_run,
            history: outcome.history,
        });
    }
    let accs: Vec<f64> = reports.iter().map(|r| r.test_accuracy).collect();
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let var = accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / accs.len() as f64;
    Ok(CvReport { folds: reports, mean_accuracy: mean, std_accuracy: var.sqrt() })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn fold_with_too_few_members_is_rejected() {
        let labels = [0, 0, 0, 1, 1];
        assert!(stratified_folds(&labels, 3, 0).is_err());
        assert!(stratified_folds(&labels, 2, 0).is_ok());
        assert!(stratified_folds(&labels, 1, 0).is_err());
    }

    #[test]
    fn stratified_split_fractions() {
        let labels: Vec<usize> = (0..300).map(|i| i % 3).collect();
        let s = Split::stratified(&labels, 0.2, 0.2, 1).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (180, 60, 60));
        for c in 0..3 {
            assert_eq!(s.test.iter().filter(|&&i| labels[i] == c).count(), 20);
        }
    }

    proptest! {
        #[test]
        fn folds_partition_and_stratify(
            labels in proptest::collection::vec(0usize..3, 30..80),
            folds in 2usize..6,
            seed in any::<u64>(),
        ) {
            let counts: Vec<usize> = (0..3).map(|c| labels.iter().filter(|&&l| l == c).count()).collect();
            prop_assume!(counts.iter().all(|&c| c == 0 || c >= folds));
            let parts = stratified_folds(&labels, folds, seed).unwrap();
            let mut all: Vec<usize> = parts.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            for c in 0..3 {
                let per: Vec<usize> = parts.iter().map(|p| p.iter().filter(|&&i| labels[i] == c).count()).collect();
                let (lo, hi) = (per.iter().min().unwrap(), per.iter().max().unwrap());
                prop_assert!(hi - lo <= 1);
            }
            let sizes: Vec<usize> = parts.iter().map(Vec::len).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }

        #[test]
        fn split_is_a_partition(labels in proptest::collection::vec(0usize..4, 1..60), seed in any::<u64>()) {
            let s = Split::stratified(&labels, 0.2, 0.2, seed).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        }
    }
}
