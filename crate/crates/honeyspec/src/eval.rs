//! Balanced-accuracy evaluation under group-aware cross-validation.
//!
//! Spectra from one source image share a `group_id`; a group is always
//! wholly inside a fold's training set or wholly inside its test set, never
//! split. Scores are balanced accuracy: the mean of per-class recalls over
//! the classes actually present in the test fold.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::classify::Label;
use crate::dataset::{DatasetError, SpectralDataset};
use crate::stage::{fit_stage, ClassifierSpec, FeatureSpec, StageError, StageModel, StageSpec};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("y_true has {true_len} entries but y_pred has {pred_len}")]
    LengthMismatch { true_len: usize, pred_len: usize },
    #[error("label `{0}` is not in the declared class list")]
    UnknownLabel(String),
    #[error("confusion matrix has no scored instances")]
    EmptyMatrix,
    #[error("{groups} groups cannot fill {folds} folds")]
    InsufficientGroups { groups: usize, folds: usize },
    #[error("fold {fold} is degenerate: {detail}")]
    FoldDegenerate { fold: usize, detail: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Stage(#[from] StageError),
}

// ---------------------------------------------------------------------------
// Confusion matrix and balanced accuracy

/// Row-per-true-class, column-per-predicted-class count matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix<L> {
    pub classes: Vec<L>,
    /// `counts[i][j]` = instances of true class `i` predicted as class `j`.
    pub counts: Vec<Vec<usize>>,
}

impl<L: Label> ConfusionMatrix<L> {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, i: usize) -> usize {
        self.counts[i].iter().sum()
    }
}

/// Tallies predictions against truth over a fixed class list.
pub fn confusion<L: Label>(
    y_true: &[L],
    y_pred: &[L],
    classes: &[L],
) -> Result<ConfusionMatrix<L>, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch {
            true_len: y_true.len(),
            pred_len: y_pred.len(),
        });
    }
    let index = |label: &L| -> Result<usize, EvalError> {
        classes
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| EvalError::UnknownLabel(format!("{label:?}")))
    };
    let c = classes.len();
    let mut counts = vec![vec![0usize; c]; c];
    for (t, p) in y_true.iter().zip(y_pred) {
        counts[index(t)?][index(p)?] += 1;
    }
    Ok(ConfusionMatrix {
        classes: classes.to_vec(),
        counts,
    })
}

/// Mean of per-class recalls over classes with at least one true instance.
/// For the binary case this is `(TP/(TP+FN) + TN/(TN+FP)) / 2`.
pub fn balanced_accuracy<L: Label>(cm: &ConfusionMatrix<L>) -> Result<f64, EvalError> {
    let mut recalls = Vec::new();
    for i in 0..cm.classes.len() {
        let row = cm.row_sum(i);
        if row > 0 {
            recalls.push(cm.counts[i][i] as f64 / row as f64);
        }
    }
    if recalls.is_empty() {
        return Err(EvalError::EmptyMatrix);
    }
    Ok(recalls.iter().sum::<f64>() / recalls.len() as f64)
}

// ---------------------------------------------------------------------------
// Fold planning

/// Unit of fold assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoldBy {
    /// By source image (`group_id`); the default and the hard constraint.
    Group,
    /// By capture session. Groups still travel as a unit: a group whose
    /// records lack or disagree on `acquisition_id` stays its own unit,
    /// and datasets without acquisition ids fall back to group folding.
    Acquisition,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train_groups: BTreeSet<String>,
    pub test_groups: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
}

impl FoldPlan {
    /// Record indices of a fold's train and test sets, in dataset order.
    pub fn fold_indices(&self, dataset: &SpectralDataset, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let f = &self.folds[fold];
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, rec) in dataset.records.iter().enumerate() {
            if f.test_groups.contains(&rec.group_id) {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }
}

/// Assigns whole groups to fold test sets: a seeded shuffle, then each
/// (origin, level) class is dealt out to the currently smallest fold, which
/// balances fold sizes and class representation at the same time.
pub fn make_group_folds(
    dataset: &SpectralDataset,
    n_folds: usize,
    seed: u64,
) -> Result<FoldPlan, EvalError> {
    make_folds(dataset, n_folds, seed, FoldBy::Group)
}

pub fn make_folds(
    dataset: &SpectralDataset,
    n_folds: usize,
    seed: u64,
    fold_by: FoldBy,
) -> Result<FoldPlan, EvalError> {
    // unit id -> (class, member groups), in first-appearance order
    let mut unit_ids: Vec<String> = Vec::new();
    let mut units: BTreeMap<String, ((String, u32), BTreeSet<String>)> = BTreeMap::new();

    let use_acquisition = fold_by == FoldBy::Acquisition
        && dataset.records.iter().all(|r| r.acquisition_id.is_some());
    // a group may only ride an acquisition unit if all its records agree
    let group_acq: BTreeMap<&str, Option<u32>> = {
        let mut m: BTreeMap<&str, Option<u32>> = BTreeMap::new();
        for rec in &dataset.records {
            m.entry(rec.group_id.as_str())
                .and_modify(|acq| {
                    if *acq != rec.acquisition_id {
                        *acq = None;
                    }
                })
                .or_insert(rec.acquisition_id);
        }
        m
    };

    for rec in &dataset.records {
        let unit = if use_acquisition {
            match group_acq[rec.group_id.as_str()] {
                Some(acq) => format!("acq-{acq}"),
                None => format!("grp-{}", rec.group_id),
            }
        } else {
            format!("grp-{}", rec.group_id)
        };
        if !units.contains_key(&unit) {
            unit_ids.push(unit.clone());
        }
        let entry = units
            .entry(unit)
            .or_insert_with(|| ((rec.origin.clone(), rec.level), BTreeSet::new()));
        entry.1.insert(rec.group_id.clone());
    }

    if n_folds == 0 || unit_ids.len() < n_folds {
        return Err(EvalError::InsufficientGroups {
            groups: unit_ids.len(),
            folds: n_folds,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = unit_ids;
    shuffled.shuffle(&mut rng);

    // class -> units, preserving shuffled order within a class
    let mut by_class: BTreeMap<(String, u32), Vec<&String>> = BTreeMap::new();
    for unit in &shuffled {
        by_class.entry(units[unit].0.clone()).or_default().push(unit);
    }

    let mut fold_units: Vec<Vec<&String>> = vec![Vec::new(); n_folds];
    for members in by_class.values() {
        for unit in members {
            let target = (0..n_folds)
                .min_by_key(|&f| (fold_units[f].len(), f))
                .expect("n_folds >= 1");
            fold_units[target].push(unit);
        }
    }

    let all_groups: BTreeSet<String> = dataset
        .records
        .iter()
        .map(|r| r.group_id.clone())
        .collect();
    let folds = fold_units
        .into_iter()
        .map(|unit_list| {
            let mut test_groups = BTreeSet::new();
            for unit in unit_list {
                test_groups.extend(units[unit].1.iter().cloned());
            }
            let train_groups = all_groups.difference(&test_groups).cloned().collect();
            Fold {
                train_groups,
                test_groups,
            }
        })
        .collect();
    Ok(FoldPlan { folds })
}

// ---------------------------------------------------------------------------
// Cross-validation

/// What the classifier predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Origin,
    Level,
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Target::Origin => write!(f, "origin"),
            Target::Level => write!(f, "level"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOptions {
    pub n_folds: usize,
    pub seed: u64,
    pub standardize: bool,
    pub fold_by: FoldBy,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            n_folds: 20,
            seed: 42,
            standardize: false,
            fold_by: FoldBy::Group,
        }
    }
}

/// Per-fold balanced accuracies plus their mean and sample standard
/// deviation, with a textual echo of the configuration that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub per_fold_scores: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub config: String,
}

impl CvReport {
    pub fn from_scores(scores: Vec<f64>, config: String) -> CvReport {
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let std = if scores.len() > 1 {
            let ss: f64 = scores.iter().map(|s| (s - mean) * (s - mean)).sum();
            (ss / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        CvReport {
            per_fold_scores: scores,
            mean,
            std,
            config,
        }
    }

    /// Delimited table: `fold,score` rows (full precision, round-trippable)
    /// and a final `summary,<mean>,<std>` row.
    pub fn to_delimited(&self) -> String {
        let mut out = String::from("fold,score\n");
        for (i, s) in self.per_fold_scores.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, s));
        }
        out.push_str(&format!("summary,{},{}\n", self.mean, self.std));
        out
    }
}

/// Everything fitted within one fold. Exposed so tests can verify that a
/// fold's models depend only on its training records.
pub fn fit_fold<L: Label>(
    dataset: &SpectralDataset,
    labels: &[L],
    plan: &FoldPlan,
    fold: usize,
    spec: &StageSpec,
) -> Result<StageModel<L>, EvalError> {
    let (train_idx, _) = plan.fold_indices(dataset, fold);
    if train_idx.is_empty() {
        return Err(EvalError::FoldDegenerate {
            fold,
            detail: "no training records".into(),
        });
    }
    let distinct: BTreeSet<&L> = train_idx.iter().map(|&i| &labels[i]).collect();
    if distinct.len() < 2 {
        return Err(EvalError::FoldDegenerate {
            fold,
            detail: format!("single training class {:?}", distinct),
        });
    }
    let bands = dataset.band_matrix();
    let mut train_x = crate::linalg::Mat::zeros(train_idx.len(), bands.cols());
    let mut train_y = Vec::with_capacity(train_idx.len());
    for (r, &i) in train_idx.iter().enumerate() {
        train_x.row_mut(r).copy_from_slice(bands.row(i));
        train_y.push(labels[i].clone());
    }
    Ok(fit_stage(&train_x, &train_y, spec)?)
}

fn score_fold<L: Label>(
    dataset: &SpectralDataset,
    labels: &[L],
    classes: &[L],
    plan: &FoldPlan,
    fold: usize,
    spec: &StageSpec,
) -> Result<f64, EvalError> {
    let model = fit_fold(dataset, labels, plan, fold, spec)?;
    let (_, test_idx) = plan.fold_indices(dataset, fold);
    if test_idx.is_empty() {
        return Err(EvalError::FoldDegenerate {
            fold,
            detail: "no test records".into(),
        });
    }
    let bands = dataset.band_matrix();
    let mut test_x = crate::linalg::Mat::zeros(test_idx.len(), bands.cols());
    let mut test_y = Vec::with_capacity(test_idx.len());
    for (r, &i) in test_idx.iter().enumerate() {
        test_x.row_mut(r).copy_from_slice(bands.row(i));
        test_y.push(labels[i].clone());
    }
    let pred = model.predict(&test_x)?;
    let cm = confusion(&test_y, &pred, classes)?;
    balanced_accuracy(&cm)
}

/// Generic CV loop over explicit labels. Folds run in parallel; the report
/// aggregates in fold order so results are independent of scheduling.
pub fn cross_validate_labels<L: Label + Send + Sync>(
    dataset: &SpectralDataset,
    labels: &[L],
    classes: &[L],
    spec: &StageSpec,
    opts: &CvOptions,
    config_echo: String,
) -> Result<CvReport, EvalError> {
    let plan = make_folds(dataset, opts.n_folds, opts.seed, opts.fold_by)?;
    let scores: Result<Vec<f64>, EvalError> = (0..opts.n_folds)
        .into_par_iter()
        .map(|fold| score_fold(dataset, labels, classes, &plan, fold, spec))
        .collect();
    Ok(CvReport::from_scores(scores?, config_echo))
}

/// Cross-validates one feature/classifier configuration against a target.
/// Standardizer, projection and classifier are fitted per fold on training
/// records only.
pub fn cross_validate(
    dataset: &SpectralDataset,
    target: Target,
    features: &FeatureSpec,
    classifier: &ClassifierSpec,
    opts: &CvOptions,
) -> Result<CvReport, EvalError> {
    let spec = StageSpec {
        standardize: opts.standardize,
        features: features.clone(),
        classifier: classifier.clone(),
    };
    let config = format!(
        "target={target} features={features} classifier={classifier} folds={} seed={} standardize={} fold_by={}",
        opts.n_folds,
        opts.seed,
        opts.standardize,
        match opts.fold_by {
            FoldBy::Group => "group",
            FoldBy::Acquisition => "acquisition",
        }
    );
    match target {
        Target::Origin => {
            let labels = dataset.origin_labels();
            let classes = dataset.origin_vocabulary.clone();
            cross_validate_labels(dataset, &labels, &classes, &spec, opts, config)
        }
        Target::Level => {
            let labels = dataset.level_labels();
            let classes = dataset.level_set.clone();
            cross_validate_labels(dataset, &labels, &classes, &spec, opts, config)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_generate, SynthSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn confusion_identity_is_diagonal() {
        let y = vec!["a", "b", "a", "b", "b"];
        let cm = confusion(&y, &y, &["a", "b"]).unwrap();
        assert_eq!(cm.counts, vec![vec![2, 0], vec![0, 3]]);
        assert_eq!(cm.total(), 5);
    }

    #[test]
    fn confusion_counts_a_mislabeled_b() {
        let y_true = vec!["a", "a", "b", "b"];
        let y_pred = vec!["a", "a", "a", "b"];
        let cm = confusion(&y_true, &y_pred, &["a", "b"]).unwrap();
        assert_eq!(cm.counts, vec![vec![2, 0], vec![1, 1]]);
    }

    #[test]
    fn confusion_empty_inputs_give_zero_matrix() {
        let cm = confusion::<&str>(&[], &[], &["a", "b"]).unwrap();
        assert_eq!(cm.total(), 0);
        assert!(matches!(
            balanced_accuracy(&cm),
            Err(EvalError::EmptyMatrix)
        ));
    }

    #[test]
    fn confusion_rejects_mismatched_lengths_and_unknown_labels() {
        assert!(matches!(
            confusion(&["a"], &["a", "b"], &["a", "b"]),
            Err(EvalError::LengthMismatch { .. })
        ));
        assert!(matches!(
            confusion(&["z"], &["a"], &["a", "b"]),
            Err(EvalError::UnknownLabel(_))
        ));
    }

    #[test]
    fn balanced_accuracy_perfect_is_one() {
        let y = vec![0u32, 1, 2, 0, 1, 2];
        let cm = confusion(&y, &y, &[0, 1, 2]).unwrap();
        assert_eq!(balanced_accuracy(&cm).unwrap(), 1.0);
    }

    #[test]
    fn balanced_accuracy_all_one_class_binary_is_exactly_half() {
        let y_true = vec!["a", "a", "b", "b"];
        let y_pred = vec!["a", "a", "a", "a"];
        let cm = confusion(&y_true, &y_pred, &["a", "b"]).unwrap();
        assert_eq!(balanced_accuracy(&cm).unwrap(), 0.5);
    }

    #[test]
    fn balanced_accuracy_three_class_fixture() {
        // per-class recalls 1.0, 0.5, 0.25
        let cm = ConfusionMatrix {
            classes: vec!["a", "b", "c"],
            counts: vec![vec![4, 0, 0], vec![2, 2, 0], vec![3, 0, 1]],
        };
        let got = balanced_accuracy(&cm).unwrap();
        let oracle = (1.0 + 0.5 + 0.25) / 3.0;
        assert!((got - oracle).abs() < 1e-12);
    }

    #[test]
    fn balanced_accuracy_skips_absent_classes() {
        let y_true = vec!["a", "a"];
        let y_pred = vec!["a", "b"];
        let cm = confusion(&y_true, &y_pred, &["a", "b", "c"]).unwrap();
        assert_eq!(balanced_accuracy(&cm).unwrap(), 0.5);
    }

    #[test]
    fn balanced_accuracy_invariant_under_duplication() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let c = rng.random_range(2..5usize);
            let classes: Vec<u32> = (0..c as u32).collect();
            let mut counts = vec![vec![0usize; c]; c];
            for row in counts.iter_mut() {
                for cell in row.iter_mut() {
                    *cell = rng.random_range(0..20);
                }
            }
            if counts.iter().all(|r| r.iter().sum::<usize>() == 0) {
                continue;
            }
            let cm = ConfusionMatrix {
                classes: classes.clone(),
                counts: counts.clone(),
            };
            let scaled = ConfusionMatrix {
                classes,
                counts: counts
                    .iter()
                    .map(|r| r.iter().map(|&v| v * 7).collect())
                    .collect(),
            };
            let a = balanced_accuracy(&cm).unwrap();
            let b = balanced_accuracy(&scaled).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn small_synth(origins: usize, groups: usize, seed: u64) -> SpectralDataset {
        synth_generate(
            &SynthSpec {
                origins,
                levels: vec![0, 25],
                groups_per_class: groups,
                records_per_group: 2,
                class_mean_separation: 10.0,
                noise_sd: 0.3,
                band_count: 12,
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn forty_groups_twenty_folds_two_each() {
        // 2 origins x 2 levels x 10 groups = 40 groups
        let ds = small_synth(2, 10, 3);
        let plan = make_group_folds(&ds, 20, 9).unwrap();
        assert_eq!(plan.folds.len(), 20);
        let mut seen = BTreeSet::new();
        for fold in &plan.folds {
            assert_eq!(fold.test_groups.len(), 2);
            assert!(fold.train_groups.is_disjoint(&fold.test_groups));
            assert_eq!(fold.train_groups.len() + fold.test_groups.len(), 40);
            for g in &fold.test_groups {
                assert!(seen.insert(g.clone()), "group {g} tested twice");
            }
        }
        assert_eq!(seen.len(), 40);
    }

    #[test]
    fn insufficient_groups_is_rejected() {
        let ds = small_synth(1, 1, 4); // 2 groups total
        assert!(matches!(
            make_group_folds(&ds, 20, 0),
            Err(EvalError::InsufficientGroups { .. })
        ));
        assert!(matches!(
            make_group_folds(&ds, 0, 0),
            Err(EvalError::InsufficientGroups { .. })
        ));
    }

    #[test]
    fn fold_plans_are_deterministic_and_seed_sensitive() {
        let ds = small_synth(2, 10, 5);
        let a = make_group_folds(&ds, 10, 7).unwrap();
        let b = make_group_folds(&ds, 10, 7).unwrap();
        assert_eq!(a, b);
        let c = make_group_folds(&ds, 10, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn acquisition_folding_keeps_groups_whole() {
        let ds = small_synth(2, 9, 11);
        let plan = make_folds(&ds, 3, 1, FoldBy::Acquisition).unwrap();
        // same-acquisition groups travel together: every group still tested
        // exactly once and never split
        let mut seen = BTreeSet::new();
        for fold in &plan.folds {
            assert!(fold.train_groups.is_disjoint(&fold.test_groups));
            for g in &fold.test_groups {
                assert!(seen.insert(g.clone()));
            }
        }
        let all: BTreeSet<String> = ds.records.iter().map(|r| r.group_id.clone()).collect();
        assert_eq!(seen, all);
    }

    #[test]
    fn cross_validate_separated_synthetic_scores_high() {
        let ds = synth_generate(
            &SynthSpec {
                origins: 3,
                levels: vec![0, 25],
                groups_per_class: 4,
                records_per_group: 3,
                class_mean_separation: 10.0,
                noise_sd: 0.5,
                band_count: 16,
            },
            2,
        )
        .unwrap();
        let report = cross_validate(
            &ds,
            Target::Origin,
            &FeatureSpec::Lda { dims: 10 },
            &ClassifierSpec::knn_default(),
            &CvOptions {
                n_folds: 8,
                ..CvOptions::default()
            },
        )
        .unwrap();
        assert!(report.mean >= 0.99, "mean {}", report.mean);
    }

    #[test]
    fn cross_validate_is_deterministic() {
        let ds = small_synth(2, 6, 13);
        let opts = CvOptions {
            n_folds: 6,
            ..CvOptions::default()
        };
        let a = cross_validate(
            &ds,
            Target::Level,
            &FeatureSpec::Lda { dims: 4 },
            &ClassifierSpec::knn_default(),
            &opts,
        )
        .unwrap();
        let b = cross_validate(
            &ds,
            Target::Level,
            &FeatureSpec::Lda { dims: 4 },
            &ClassifierSpec::knn_default(),
            &opts,
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn report_summary_recomputes_from_scores() {
        let scores = vec![0.5, 0.75, 1.0, 0.25];
        let report = CvReport::from_scores(scores.clone(), "test".into());
        let mean = scores.iter().sum::<f64>() / 4.0;
        assert!((report.mean - mean).abs() < 1e-12);
        let ss: f64 = scores.iter().map(|s| (s - mean) * (s - mean)).sum();
        let std = (ss / 3.0).sqrt();
        assert!((report.std - std).abs() < 1e-12);
        let table = report.to_delimited();
        assert!(table.starts_with("fold,score\n1,0.5\n"));
        assert!(table.ends_with(&format!("summary,{},{}\n", report.mean, report.std)));
    }

    #[test]
    fn leakage_sentinel_test_offset_does_not_change_fitted_models() {
        let ds = small_synth(2, 5, 17);
        let labels = ds.origin_labels();
        let plan = make_group_folds(&ds, 5, 3).unwrap();
        let spec = StageSpec {
            standardize: true,
            features: FeatureSpec::Lda { dims: 2 },
            classifier: ClassifierSpec::knn_default(),
        };
        for fold in 0..5 {
            let clean = fit_fold(&ds, &labels, &plan, fold, &spec).unwrap();
            // corrupt only the test records
            let mut corrupted = ds.clone();
            let (_, test_idx) = plan.fold_indices(&ds, fold);
            for &i in &test_idx {
                for v in corrupted.records[i].bands.iter_mut() {
                    *v += 1234.5;
                }
            }
            let poisoned = fit_fold(&corrupted, &labels, &plan, fold, &spec).unwrap();
            assert_eq!(clean, poisoned, "fold {fold} leaked test data into fit");
        }
    }

    #[test]
    fn single_class_training_fold_is_degenerate() {
        let ds = small_synth(1, 3, 19); // one origin only
        let labels = ds.origin_labels();
        let plan = make_group_folds(&ds, 3, 1).unwrap();
        let spec = StageSpec {
            standardize: false,
            features: FeatureSpec::None,
            classifier: ClassifierSpec::knn_default(),
        };
        let err = fit_fold(&ds, &labels, &plan, 0, &spec).unwrap_err();
        assert!(matches!(err, EvalError::FoldDegenerate { fold: 0, .. }));
    }
}
