//! One classification stage: an optional standardizer, an optional linear
//! projection and a classifier, fitted together on a labeled matrix.
//!
//! Both the cross-validation runner and the hierarchical pipeline fit
//! stages; keeping the logic here guarantees a fold and a deployed model
//! are trained the same way.

use thiserror::Error;

use crate::classify::{
    default_rbf_gamma, knn_fit, svm_fit, ClassifyError, KernelSpec, Label, TrainedClassifier,
    DEFAULT_C, DEFAULT_K, DEFAULT_MAX_PASSES, DEFAULT_TOL,
};
use crate::dataset::Standardizer;
use crate::dimred::{lda_fit, pca_fit, project, DimredError, ProjectionModel};
use crate::linalg::Mat;

/// Requesting this many LDA dimensions means "as many as the class count
/// allows", i.e. the fit's `classes - 1` cap decides.
pub const LDA_DIMS_AUTO: usize = usize::MAX;

/// Which feature space the classifier sees.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureSpec {
    /// Raw band values.
    None,
    Pca { dims: usize },
    /// Requested dimension is capped at `classes - 1` by the LDA fit.
    Lda { dims: usize },
}

impl std::fmt::Display for FeatureSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FeatureSpec::None => write!(f, "original"),
            FeatureSpec::Pca { dims } => write!(f, "pca({dims})"),
            FeatureSpec::Lda { dims } if *dims == LDA_DIMS_AUTO => write!(f, "lda(auto)"),
            FeatureSpec::Lda { dims } => write!(f, "lda({dims})"),
        }
    }
}

/// Kernel choice before fit-time resolution; `gamma: None` means the
/// data-driven default.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelChoice {
    Linear,
    Rbf { gamma: Option<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierSpec {
    Knn {
        k: usize,
    },
    Svm {
        kernel: KernelChoice,
        c: f64,
        tol: f64,
        max_passes: usize,
    },
}

impl ClassifierSpec {
    pub fn knn_default() -> Self {
        ClassifierSpec::Knn { k: DEFAULT_K }
    }

    pub fn svm_linear_default() -> Self {
        ClassifierSpec::Svm {
            kernel: KernelChoice::Linear,
            c: DEFAULT_C,
            tol: DEFAULT_TOL,
            max_passes: DEFAULT_MAX_PASSES,
        }
    }

    pub fn svm_rbf_default() -> Self {
        ClassifierSpec::Svm {
            kernel: KernelChoice::Rbf { gamma: None },
            c: DEFAULT_C,
            tol: DEFAULT_TOL,
            max_passes: DEFAULT_MAX_PASSES,
        }
    }
}

impl std::fmt::Display for ClassifierSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ClassifierSpec::Knn { k } => write!(f, "knn({k})"),
            ClassifierSpec::Svm {
                kernel: KernelChoice::Linear,
                c,
                ..
            } => write!(f, "svm-linear(C={c})"),
            ClassifierSpec::Svm {
                kernel: KernelChoice::Rbf { gamma },
                c,
                ..
            } => match gamma {
                Some(g) => write!(f, "svm-rbf(C={c},gamma={g})"),
                None => write!(f, "svm-rbf(C={c},gamma=auto)"),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSpec {
    pub standardize: bool,
    pub features: FeatureSpec,
    pub classifier: ClassifierSpec,
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Dimred(#[from] DimredError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
}

/// A fitted stage. Immutable; safe for concurrent prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct StageModel<L> {
    pub standardizer: Option<Standardizer>,
    pub projection: Option<ProjectionModel>,
    pub classifier: TrainedClassifier<L>,
}

impl<L: Label> StageModel<L> {
    pub fn predict(&self, x: &Mat) -> Result<Vec<L>, StageError> {
        let x = match &self.standardizer {
            Some(s) => s.apply(x),
            None => x.clone(),
        };
        let feats = match &self.projection {
            Some(p) => project(p, &x)?,
            None => x,
        };
        Ok(self.classifier.predict(&feats)?)
    }
}

/// Fits standardizer, projection and classifier on training data only.
///
/// A single-class label vector yields a constant predictor (no projection),
/// so degenerate slices degrade gracefully instead of failing.
pub fn fit_stage<L: Label>(x: &Mat, y: &[L], spec: &StageSpec) -> Result<StageModel<L>, StageError> {
    let standardizer = spec.standardize.then(|| Standardizer::fit(x));
    let x_std = match &standardizer {
        Some(s) => s.apply(x),
        None => x.clone(),
    };

    let distinct = {
        let mut sorted: Vec<&L> = y.iter().collect();
        sorted.sort();
        sorted.dedup();
        sorted.len()
    };
    if distinct == 1 {
        return Ok(StageModel {
            standardizer,
            projection: None,
            classifier: TrainedClassifier::constant(y[0].clone()),
        });
    }

    let projection = match &spec.features {
        FeatureSpec::None => None,
        FeatureSpec::Pca { dims } => Some(pca_fit(&x_std, *dims)?),
        FeatureSpec::Lda { dims } => Some(lda_fit(&x_std, y, *dims)?),
    };
    let feats = match &projection {
        Some(p) => project(p, &x_std)?,
        None => x_std,
    };

    let classifier = match &spec.classifier {
        ClassifierSpec::Knn { k } => knn_fit(&feats, y, *k)?,
        ClassifierSpec::Svm {
            kernel,
            c,
            tol,
            max_passes,
        } => {
            let kernel = match kernel {
                KernelChoice::Linear => KernelSpec::Linear,
                KernelChoice::Rbf { gamma: Some(g) } => KernelSpec::Rbf { gamma: *g },
                KernelChoice::Rbf { gamma: None } => KernelSpec::Rbf {
                    gamma: default_rbf_gamma(&feats),
                },
            };
            svm_fit(&feats, y, kernel, *c, *tol, *max_passes)?
        }
    };

    Ok(StageModel {
        standardizer,
        projection,
        classifier,
    })
}
