//! The two-subsystem detector: an origin-identification stage routing into
//! a bank of per-origin adulteration-level models.
//!
//! Training fits the origin stage on every record, then one bank entry per
//! origin on that origin's records. A single standardizer (when enabled) is
//! fitted once on the stage-one training data and shared by both stages.

pub mod io;

use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::{DatasetError, SpectralDataset, Standardizer, WavelengthGrid};
use crate::eval::{
    cross_validate, make_folds, CvOptions, CvReport, EvalError, FoldBy, Target,
};
use crate::linalg::Mat;
use crate::stage::{
    fit_stage, ClassifierSpec, FeatureSpec, StageError, StageModel, StageSpec, LDA_DIMS_AUTO,
};

pub use io::{load_model, save_model, ModelIoError, MODEL_FORMAT_VERSION, MODEL_MAGIC};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("training data contains a single origin")]
    SingleOrigin,
    #[error("origin `{0}` is not in the model's bank")]
    UnknownOrigin(String),
    #[error("spectrum has {found} bands, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("spectrum contains non-finite values")]
    NonFiniteInput,
    #[error(transparent)]
    Stage(#[from] StageError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Training configuration for both stages.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub origin_features: FeatureSpec,
    pub origin_classifier: ClassifierSpec,
    pub adulteration_features: FeatureSpec,
    pub adulteration_classifier: ClassifierSpec,
    pub standardize: bool,
}

impl Default for PipelineConfig {
    /// The headline configuration: LDA(10) + KNN(5) for origins, LDA capped
    /// at (levels - 1) + KNN(5) per origin for adulteration.
    fn default() -> Self {
        PipelineConfig {
            origin_features: FeatureSpec::Lda { dims: 10 },
            origin_classifier: ClassifierSpec::knn_default(),
            adulteration_features: FeatureSpec::Lda {
                dims: LDA_DIMS_AUTO,
            },
            adulteration_classifier: ClassifierSpec::knn_default(),
            standardize: false,
        }
    }
}

/// Origin stage plus one adulteration entry per origin, serializable via
/// [`save_model`]/[`load_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalModel {
    pub format_version: u32,
    pub grid: WavelengthGrid,
    /// Shared preprocessing, applied before either stage.
    pub standardizer: Option<Standardizer>,
    pub origin_stage: StageModel<String>,
    /// One entry per origin token, sorted by token.
    pub bank: Vec<(String, StageModel<u32>)>,
}

impl HierarchicalModel {
    pub fn bank_entry(&self, origin: &str) -> Option<&StageModel<u32>> {
        self.bank
            .binary_search_by(|(token, _)| token.as_str().cmp(origin))
            .ok()
            .map(|i| &self.bank[i].1)
    }

    pub fn origins(&self) -> Vec<String> {
        self.bank.iter().map(|(token, _)| token.clone()).collect()
    }

    /// Level vocabulary of one bank entry.
    pub fn levels_of(&self, origin: &str) -> Option<Vec<u32>> {
        self.bank_entry(origin).map(|e| e.classifier.vocabulary())
    }
}

/// End-to-end output for one spectrum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub origin: String,
    pub level: u32,
    /// True when the origin was supplied by the caller instead of the
    /// origin stage.
    pub origin_was_oracle: bool,
}

impl Prediction {
    pub fn is_pure(&self) -> bool {
        self.level == 0
    }
}

/// Fits the full detector on a valid dataset with at least two origins.
///
/// Origins whose records carry a single level get a constant predictor
/// instead of a fitted classifier.
pub fn train_hierarchical(
    dataset: &SpectralDataset,
    config: &PipelineConfig,
) -> Result<HierarchicalModel, PipelineError> {
    if dataset.origin_vocabulary.len() < 2 {
        return Err(PipelineError::SingleOrigin);
    }
    let bands = dataset.band_matrix();
    let standardizer = config.standardize.then(|| Standardizer::fit(&bands));
    let x = match &standardizer {
        Some(s) => s.apply(&bands),
        None => bands,
    };

    let origin_labels = dataset.origin_labels();
    let origin_stage = fit_stage(
        &x,
        &origin_labels,
        &StageSpec {
            standardize: false,
            features: config.origin_features.clone(),
            classifier: config.origin_classifier.clone(),
        },
    )?;

    let mut origins: Vec<String> = dataset.origin_vocabulary.clone();
    origins.sort();
    let adult_spec = StageSpec {
        standardize: false,
        features: config.adulteration_features.clone(),
        classifier: config.adulteration_classifier.clone(),
    };
    // Bank entries are independent fits; order the output by token so the
    // result does not depend on scheduling.
    let bank: Result<Vec<(String, StageModel<u32>)>, PipelineError> = origins
        .par_iter()
        .map(|origin| {
            let idx: Vec<usize> = dataset
                .records
                .iter()
                .enumerate()
                .filter(|(_, r)| &r.origin == origin)
                .map(|(i, _)| i)
                .collect();
            let mut sub_x = Mat::zeros(idx.len(), x.cols());
            let mut sub_y = Vec::with_capacity(idx.len());
            for (r, &i) in idx.iter().enumerate() {
                sub_x.row_mut(r).copy_from_slice(x.row(i));
                sub_y.push(dataset.records[i].level);
            }
            let entry = fit_stage(&sub_x, &sub_y, &adult_spec)?;
            Ok((origin.clone(), entry))
        })
        .collect();

    Ok(HierarchicalModel {
        format_version: MODEL_FORMAT_VERSION,
        grid: dataset.grid.clone(),
        standardizer,
        origin_stage,
        bank: bank?,
    })
}

fn standardized_row(
    model: &HierarchicalModel,
    spectrum: &[f64],
) -> Result<Mat, PipelineError> {
    if spectrum.len() != model.grid.band_count {
        return Err(PipelineError::DimensionMismatch {
            expected: model.grid.band_count,
            found: spectrum.len(),
        });
    }
    if !spectrum.iter().all(|v| v.is_finite()) {
        return Err(PipelineError::NonFiniteInput);
    }
    let x = Mat::from_vec(1, spectrum.len(), spectrum.to_vec());
    Ok(match &model.standardizer {
        Some(s) => s.apply(&x),
        None => x,
    })
}

/// Predicts origin and adulteration level for one spectrum.
pub fn predict(model: &HierarchicalModel, spectrum: &[f64]) -> Result<Prediction, PipelineError> {
    let x = standardized_row(model, spectrum)?;
    let origin = model.origin_stage.predict(&x)?.remove(0);
    let entry = model
        .bank_entry(&origin)
        .ok_or_else(|| PipelineError::UnknownOrigin(origin.clone()))?;
    let level = entry.predict(&x)?.remove(0);
    Ok(Prediction {
        origin,
        level,
        origin_was_oracle: false,
    })
}

/// Bypasses the origin stage and routes straight to `origin`'s bank entry,
/// the way the per-origin evaluation tables score the adulteration stage.
pub fn predict_with_oracle_origin(
    model: &HierarchicalModel,
    spectrum: &[f64],
    origin: &str,
) -> Result<Prediction, PipelineError> {
    let entry = model
        .bank_entry(origin)
        .ok_or_else(|| PipelineError::UnknownOrigin(origin.to_string()))?;
    let x = standardized_row(model, spectrum)?;
    let level = entry.predict(&x)?.remove(0);
    Ok(Prediction {
        origin: origin.to_string(),
        level,
        origin_was_oracle: true,
    })
}

// ---------------------------------------------------------------------------
// Evaluation tables

/// Which feature/classifier combinations the tables cover.
#[derive(Debug, Clone, PartialEq)]
pub struct TablesConfig {
    pub features: Vec<FeatureSpec>,
    pub classifiers: Vec<ClassifierSpec>,
    pub standardize: bool,
    pub n_folds: usize,
    pub seed: u64,
    pub fold_by: FoldBy,
}

impl Default for TablesConfig {
    /// The full grid: original / PCA(10) / LDA(10) features crossed with
    /// KNN(5), linear SVM and RBF SVM, at 20 grouped folds.
    fn default() -> Self {
        TablesConfig {
            features: vec![
                FeatureSpec::None,
                FeatureSpec::Pca { dims: 10 },
                FeatureSpec::Lda { dims: 10 },
            ],
            classifiers: vec![
                ClassifierSpec::knn_default(),
                ClassifierSpec::svm_linear_default(),
                ClassifierSpec::svm_rbf_default(),
            ],
            standardize: false,
            n_folds: 20,
            seed: 42,
            fold_by: FoldBy::Group,
        }
    }
}

/// A classifier-by-feature grid of CV reports.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid {
    pub features: Vec<FeatureSpec>,
    pub classifiers: Vec<ClassifierSpec>,
    /// Indexed `[classifier][feature]`.
    pub reports: Vec<Vec<CvReport>>,
}

/// Per-origin adulteration results for one feature set: one row per origin
/// (in dataset vocabulary order) with one report per classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct PerOriginTable {
    pub feature: FeatureSpec,
    pub classifiers: Vec<ClassifierSpec>,
    pub origins: Vec<String>,
    /// Indexed `[origin][classifier]`.
    pub reports: Vec<Vec<CvReport>>,
}

impl PerOriginTable {
    /// The Average row: per classifier, the unweighted mean of the origin
    /// means and of the origin standard deviations.
    pub fn average(&self) -> Vec<(f64, f64)> {
        let n = self.origins.len() as f64;
        (0..self.classifiers.len())
            .map(|c| {
                let mean = self.reports.iter().map(|row| row[c].mean).sum::<f64>() / n;
                let std = self.reports.iter().map(|row| row[c].std).sum::<f64>() / n;
                (mean, std)
            })
            .collect()
    }
}

/// All three report shapes produced by one evaluation run.
#[derive(Debug, Clone, PartialEq)]
pub struct TableBundle {
    /// Origin-stage CV per feature/classifier combination.
    pub origin_stage: CellGrid,
    /// Adulteration stage with oracle origin routing, one table per feature.
    pub adulteration: Vec<PerOriginTable>,
    /// Adulteration scored through predicted origins (compounded error).
    pub end_to_end: CellGrid,
}

/// Runs the origin-stage grid, the per-origin oracle tables and the
/// end-to-end report for every configured feature/classifier combination.
pub fn evaluate_tables(
    dataset: &SpectralDataset,
    config: &TablesConfig,
) -> Result<TableBundle, PipelineError> {
    let opts = CvOptions {
        n_folds: config.n_folds,
        seed: config.seed,
        standardize: config.standardize,
        fold_by: config.fold_by,
    };

    let mut origin_reports = Vec::with_capacity(config.classifiers.len());
    for classifier in &config.classifiers {
        let mut row = Vec::with_capacity(config.features.len());
        for features in &config.features {
            row.push(cross_validate(
                dataset,
                Target::Origin,
                features,
                classifier,
                &opts,
            )?);
        }
        origin_reports.push(row);
    }

    let splits = dataset.split_by_origin();
    let mut adulteration = Vec::with_capacity(config.features.len());
    for features in &config.features {
        let mut rows = Vec::with_capacity(splits.len());
        for (_, sub) in &splits {
            let mut row = Vec::with_capacity(config.classifiers.len());
            for classifier in &config.classifiers {
                row.push(cross_validate(sub, Target::Level, features, classifier, &opts)?);
            }
            rows.push(row);
        }
        adulteration.push(PerOriginTable {
            feature: features.clone(),
            classifiers: config.classifiers.clone(),
            origins: splits.iter().map(|(o, _)| o.clone()).collect(),
            reports: rows,
        });
    }

    let mut end_to_end = Vec::with_capacity(config.classifiers.len());
    for classifier in &config.classifiers {
        let mut row = Vec::with_capacity(config.features.len());
        for features in &config.features {
            row.push(end_to_end_report(dataset, features, classifier, config)?);
        }
        end_to_end.push(row);
    }

    Ok(TableBundle {
        origin_stage: CellGrid {
            features: config.features.clone(),
            classifiers: config.classifiers.clone(),
            reports: origin_reports,
        },
        adulteration,
        end_to_end: CellGrid {
            features: config.features.clone(),
            classifiers: config.classifiers.clone(),
            reports: end_to_end,
        },
    })
}

/// Per fold: trains a full hierarchical model on the training records and
/// scores level predictions routed through the predicted origin.
fn end_to_end_report(
    dataset: &SpectralDataset,
    features: &FeatureSpec,
    classifier: &ClassifierSpec,
    config: &TablesConfig,
) -> Result<CvReport, PipelineError> {
    let plan = make_folds(dataset, config.n_folds, config.seed, config.fold_by)?;
    let pipeline_config = PipelineConfig {
        origin_features: features.clone(),
        origin_classifier: classifier.clone(),
        adulteration_features: features.clone(),
        adulteration_classifier: classifier.clone(),
        standardize: config.standardize,
    };
    let scores: Result<Vec<f64>, PipelineError> = (0..config.n_folds)
        .into_par_iter()
        .map(|fold| {
            let (train_idx, test_idx) = plan.fold_indices(dataset, fold);
            let train = dataset.subset(&train_idx)?;
            let model = train_hierarchical(&train, &pipeline_config)?;
            let mut y_true = Vec::with_capacity(test_idx.len());
            let mut y_pred = Vec::with_capacity(test_idx.len());
            for &i in &test_idx {
                let rec = &dataset.records[i];
                y_true.push(rec.level);
                y_pred.push(predict(&model, &rec.bands)?.level);
            }
            let cm = crate::eval::confusion(&y_true, &y_pred, &dataset.level_set)?;
            let score = crate::eval::balanced_accuracy(&cm)?;
            Ok(score)
        })
        .collect();
    let config_echo = format!(
        "end_to_end features={features} classifier={classifier} folds={} seed={} standardize={}",
        config.n_folds, config.seed, config.standardize
    );
    Ok(CvReport::from_scores(scores?, config_echo))
}
