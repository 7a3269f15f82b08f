//! PCA and LDA projections from band space to low-dimensional feature space.
//!
//! Both fits reduce to a symmetric eigendecomposition. LDA solves the
//! generalized problem `S_B v = lambda S_W v` by factorizing the
//! regularized within-class scatter and transforming to an ordinary
//! symmetric problem, which keeps the solve deterministic and avoids a
//! nonsymmetric eigensolver.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::linalg::{
    back_substitute_transposed, cholesky, forward_solve_matrix, sym_eigen, Mat,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionKind {
    Pca,
    Lda,
}

impl std::fmt::Display for ProjectionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProjectionKind::Pca => write!(f, "pca"),
            ProjectionKind::Lda => write!(f, "lda"),
        }
    }
}

/// A fitted linear projection: `z = (x - mean) * basis`.
///
/// `component_scores` hold the eigenvalue attached to each column of the
/// basis: PCA variances, or LDA between/within variance ratios. They are
/// finite, non-negative and sorted non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionModel {
    pub kind: ProjectionKind,
    pub mean: Vec<f64>,
    /// `p x d`, one component per column. PCA columns are orthonormal;
    /// LDA columns have unit Euclidean norm.
    pub basis: Mat,
    pub component_scores: Vec<f64>,
}

impl ProjectionModel {
    pub fn input_dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.basis.cols()
    }
}

#[derive(Debug, Error)]
pub enum DimredError {
    #[error("too few samples: need at least {needed}, found {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("invalid component count {requested} (valid range 1..={max})")]
    InvalidComponentCount { requested: usize, max: usize },
    #[error("LDA needs at least two classes")]
    SingleClass,
    #[error("dimension mismatch: model expects {expected} columns, input has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("input contains non-finite values")]
    NonFiniteInput,
}

/// Makes the entry of largest absolute value positive. Eigenvectors are
/// sign-ambiguous; this pins one deterministically.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    let mut best_abs = 0.0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

fn normalize(v: &mut [f64]) {
    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

/// Fits PCA on the rows of `x`: mean-centers, eigendecomposes the sample
/// covariance (1/(n-1)) and keeps the top `d` components.
pub fn pca_fit(x: &Mat, d: usize) -> Result<ProjectionModel, DimredError> {
    let n = x.rows();
    let p = x.cols();
    if n < 2 {
        return Err(DimredError::TooFewSamples { needed: 2, found: n });
    }
    if !x.is_finite() {
        return Err(DimredError::NonFiniteInput);
    }
    let max_d = (n - 1).min(p);
    if d < 1 || d > max_d {
        return Err(DimredError::InvalidComponentCount {
            requested: d,
            max: max_d,
        });
    }
    let mean = x.col_means();
    let centered = x.sub_row_vector(&mean);
    let mut cov = centered.gram();
    let denom = (n - 1) as f64;
    for i in 0..p {
        for j in 0..p {
            cov.set(i, j, cov.get(i, j) / denom);
        }
    }
    let (values, vectors) = sym_eigen(&cov);

    let mut basis = Mat::zeros(p, d);
    let mut scores = Vec::with_capacity(d);
    for c in 0..d {
        let mut col: Vec<f64> = (0..p).map(|r| vectors.get(r, c)).collect();
        fix_sign(&mut col);
        for r in 0..p {
            basis.set(r, c, col[r]);
        }
        scores.push(values[c].max(0.0));
    }
    Ok(ProjectionModel {
        kind: ProjectionKind::Pca,
        mean,
        basis,
        component_scores: scores,
    })
}

/// Fits LDA on labeled rows. Returns `min(d, C - 1)` components where `C`
/// is the number of distinct classes observed.
///
/// The within-class scatter is regularized as
/// `S_W + eps * I` with `eps = max(1e-8 * trace(S_W) / p, 1e-12)` before
/// the Cholesky-based reduction, so degenerate scatter (identical rows per
/// class) still yields a usable projection.
pub fn lda_fit<L: Ord + Clone>(x: &Mat, y: &[L], d: usize) -> Result<ProjectionModel, DimredError> {
    let n = x.rows();
    let p = x.cols();
    if y.len() != n {
        return Err(DimredError::DimensionMismatch {
            expected: n,
            found: y.len(),
        });
    }
    if !x.is_finite() {
        return Err(DimredError::NonFiniteInput);
    }
    if d < 1 {
        return Err(DimredError::InvalidComponentCount { requested: d, max: p });
    }

    // classes in sorted order; class index per row via binary search
    let classes: Vec<&L> = {
        let set: BTreeSet<&L> = y.iter().collect();
        set.into_iter().collect()
    };
    let index_of = |label: &L| classes.binary_search_by(|c| (*c).cmp(label)).unwrap();
    let c_count = classes.len();
    if c_count < 2 {
        return Err(DimredError::SingleClass);
    }
    if n < c_count {
        return Err(DimredError::TooFewSamples {
            needed: c_count,
            found: n,
        });
    }

    let overall_mean = x.col_means();
    let mut counts = vec![0usize; c_count];
    let mut class_means = vec![vec![0.0; p]; c_count];
    for (r, label) in y.iter().enumerate() {
        let ci = index_of(label);
        counts[ci] += 1;
        for (acc, v) in class_means[ci].iter_mut().zip(x.row(r)) {
            *acc += v;
        }
    }
    for (mean, &cnt) in class_means.iter_mut().zip(&counts) {
        for v in mean.iter_mut() {
            *v /= cnt as f64;
        }
    }

    // S_W = sum over classes of centered gram; S_B from class mean offsets.
    let mut s_w = Mat::zeros(p, p);
    for (r, label) in y.iter().enumerate() {
        let ci = index_of(label);
        let mean = &class_means[ci];
        let row = x.row(r);
        for i in 0..p {
            let di = row[i] - mean[i];
            if di == 0.0 {
                continue;
            }
            for j in i..p {
                let v = di * (row[j] - mean[j]);
                s_w.set(i, j, s_w.get(i, j) + v);
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            s_w.set(i, j, s_w.get(j, i));
        }
    }

    let mut s_b = Mat::zeros(p, p);
    for (mean, &cnt) in class_means.iter().zip(&counts) {
        let w = cnt as f64;
        for i in 0..p {
            let di = mean[i] - overall_mean[i];
            for j in i..p {
                let v = w * di * (mean[j] - overall_mean[j]);
                s_b.set(i, j, s_b.get(i, j) + v);
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            s_b.set(i, j, s_b.get(j, i));
        }
    }

    // Regularize and reduce S_B v = lambda S_W v to an ordinary symmetric
    // problem via S_W = L L^T.
    let eps = (1e-8 * s_w.trace() / p as f64).max(1e-12);
    for i in 0..p {
        s_w.set(i, i, s_w.get(i, i) + eps);
    }
    let l = cholesky(&s_w).ok_or(DimredError::NonFiniteInput)?;
    let half = forward_solve_matrix(&l, &s_b);
    let mut m = forward_solve_matrix(&l, &half.transpose());
    // enforce symmetry lost to rounding
    for i in 0..p {
        for j in (i + 1)..p {
            let avg = 0.5 * (m.get(i, j) + m.get(j, i));
            m.set(i, j, avg);
            m.set(j, i, avg);
        }
    }
    let (values, vectors) = sym_eigen(&m);

    let d_eff = d.min(c_count - 1).min(p);
    let mut basis = Mat::zeros(p, d_eff);
    let mut scores = Vec::with_capacity(d_eff);
    for c in 0..d_eff {
        let u: Vec<f64> = (0..p).map(|r| vectors.get(r, c)).collect();
        let mut v = back_substitute_transposed(&l, &u);
        normalize(&mut v);
        fix_sign(&mut v);
        for r in 0..p {
            basis.set(r, c, v[r]);
        }
        scores.push(values[c].max(0.0));
    }
    Ok(ProjectionModel {
        kind: ProjectionKind::Lda,
        mean: overall_mean,
        basis,
        component_scores: scores,
    })
}

/// Projects rows of `x` into the model's feature space.
pub fn project(model: &ProjectionModel, x: &Mat) -> Result<Mat, DimredError> {
    let p = model.input_dim();
    if x.cols() != p {
        return Err(DimredError::DimensionMismatch {
            expected: p,
            found: x.cols(),
        });
    }
    let centered = x.sub_row_vector(&model.mean);
    Ok(centered.matmul(&model.basis))
}
