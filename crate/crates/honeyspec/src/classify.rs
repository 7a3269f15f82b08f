//! KNN and SVM classifiers behind a uniform fit/predict contract.
//!
//! Both classifiers are deterministic: KNN breaks vote ties by summed
//! distance and then by label order, and the SVM dual solver picks its
//! working pairs by a fixed heuristic instead of random sampling, so
//! identical inputs always produce identical models and predictions.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::linalg::{euclidean_distance, Mat};

/// Label bound shared by every classifier. Sorting gives the vocabulary a
/// canonical order, which doubles as the final tie-breaking rule.
pub trait Label: Clone + Ord + std::fmt::Debug {}
impl<T: Clone + Ord + std::fmt::Debug> Label for T {}

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("k = {k} is out of range for {n} training rows")]
    KOutOfRange { k: usize, n: usize },
    #[error("label count {labels} does not match row count {rows}")]
    LabelCountMismatch { labels: usize, rows: usize },
    #[error("dimension mismatch: model expects {expected} columns, query has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("training labels are all identical")]
    DegenerateLabels,
    #[error("input contains non-finite values")]
    NonFiniteInput,
    #[error("invalid parameter: {detail}")]
    InvalidParameter { detail: String },
}

fn sorted_vocabulary<L: Label>(y: &[L]) -> Vec<L> {
    let set: BTreeSet<&L> = y.iter().collect();
    set.into_iter().cloned().collect()
}

// ---------------------------------------------------------------------------
// KNN

pub const DEFAULT_K: usize = 5;

/// Instance-based classifier: stores the training data verbatim and votes
/// over the `k` nearest rows by Euclidean distance.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel<L> {
    pub train_x: Mat,
    pub train_y: Vec<L>,
    pub k: usize,
    vocabulary: Vec<L>,
}

impl<L: Label> KnnModel<L> {
    fn fit(x: Mat, y: Vec<L>, k: usize) -> Result<Self, ClassifyError> {
        let n = x.rows();
        if n == 0 {
            return Err(ClassifyError::EmptyTrainingSet);
        }
        if y.len() != n {
            return Err(ClassifyError::LabelCountMismatch {
                labels: y.len(),
                rows: n,
            });
        }
        if k == 0 || k > n {
            return Err(ClassifyError::KOutOfRange { k, n });
        }
        if !x.is_finite() {
            return Err(ClassifyError::NonFiniteInput);
        }
        let vocabulary = sorted_vocabulary(&y);
        Ok(KnnModel {
            train_x: x,
            train_y: y,
            k,
            vocabulary,
        })
    }

    /// Predicts one label per query row.
    ///
    /// Neighbor selection orders by (distance, training-row index); among
    /// tied vote counts the label with the smaller summed distance to the
    /// query wins, and any remaining tie goes to the earliest label in the
    /// vocabulary.
    pub fn predict(&self, queries: &Mat) -> Result<Vec<L>, ClassifyError> {
        let d = self.train_x.cols();
        if queries.cols() != d {
            return Err(ClassifyError::DimensionMismatch {
                expected: d,
                found: queries.cols(),
            });
        }
        let n = self.train_x.rows();
        let mut out = Vec::with_capacity(queries.rows());
        let mut dists: Vec<(f64, usize)> = Vec::with_capacity(n);
        for qi in 0..queries.rows() {
            let q = queries.row(qi);
            dists.clear();
            for t in 0..n {
                dists.push((euclidean_distance(self.train_x.row(t), q), t));
            }
            dists.sort_unstable_by(|a, b| {
                a.0.partial_cmp(&b.0)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.1.cmp(&b.1))
            });
            let neighbors = &dists[..self.k];

            let mut best: Option<(&L, usize, f64)> = None;
            for candidate in &self.vocabulary {
                let mut votes = 0usize;
                let mut dist_sum = 0.0;
                for &(dist, idx) in neighbors {
                    if &self.train_y[idx] == candidate {
                        votes += 1;
                        dist_sum += dist;
                    }
                }
                if votes == 0 {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((_, bv, bd)) => votes > bv || (votes == bv && dist_sum < bd),
                };
                if better {
                    best = Some((candidate, votes, dist_sum));
                }
            }
            out.push(best.expect("k >= 1 guarantees a winner").0.clone());
        }
        Ok(out)
    }
}

/// Stores the training data and `k`; no learning computation happens here.
pub fn knn_fit<L: Label>(x: &Mat, y: &[L], k: usize) -> Result<TrainedClassifier<L>, ClassifyError> {
    Ok(TrainedClassifier::Knn(KnnModel::fit(
        x.clone(),
        y.to_vec(),
        k,
    )?))
}

// ---------------------------------------------------------------------------
// SVM

pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_PASSES: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            KernelSpec::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            KernelSpec::Rbf { gamma } => {
                let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * sq).exp()
            }
        }
    }
}

/// The conventional data-driven RBF width: `1 / (d * mean column variance)`,
/// falling back to `1 / d` when the data is constant.
pub fn default_rbf_gamma(x: &Mat) -> f64 {
    let n = x.rows();
    let d = x.cols().max(1);
    if n < 2 {
        return 1.0 / d as f64;
    }
    let means = x.col_means();
    let mut acc = 0.0;
    for r in 0..n {
        for (v, m) in x.row(r).iter().zip(&means) {
            let diff = v - m;
            acc += diff * diff;
        }
    }
    let mean_var = acc / ((n - 1) as f64) / d as f64;
    if mean_var > 0.0 {
        1.0 / (d as f64 * mean_var)
    } else {
        1.0 / d as f64
    }
}

/// One solved one-vs-rest subproblem: only rows with nonzero dual
/// coefficient are retained.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryProblem {
    pub support_x: Mat,
    /// Indices of the support rows in the original training matrix.
    pub support_idx: Vec<usize>,
    /// `alpha_i * y_i` per support vector.
    pub coeffs: Vec<f64>,
    pub bias: f64,
    /// Maximal KKT violation when the solver stopped.
    pub kkt_violation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel<L> {
    pub kernel: KernelSpec,
    pub c: f64,
    pub tol: f64,
    pub classes: Vec<L>,
    /// One problem per class, aligned with `classes`.
    pub problems: Vec<BinaryProblem>,
    pub dim: usize,
}

impl<L: Label> SvmModel<L> {
    /// Per-class decision values, one row per query.
    pub fn decision(&self, queries: &Mat) -> Result<Mat, ClassifyError> {
        if queries.cols() != self.dim {
            return Err(ClassifyError::DimensionMismatch {
                expected: self.dim,
                found: queries.cols(),
            });
        }
        let mut out = Mat::zeros(queries.rows(), self.classes.len());
        for qi in 0..queries.rows() {
            let q = queries.row(qi);
            for (ci, problem) in self.problems.iter().enumerate() {
                let mut dec = problem.bias;
                for (si, coeff) in problem.coeffs.iter().enumerate() {
                    dec += coeff * self.kernel.eval(problem.support_x.row(si), q);
                }
                out.set(qi, ci, dec);
            }
        }
        Ok(out)
    }

    pub fn predict(&self, queries: &Mat) -> Result<Vec<L>, ClassifyError> {
        let dec = self.decision(queries)?;
        let mut out = Vec::with_capacity(queries.rows());
        for qi in 0..queries.rows() {
            let mut best = 0usize;
            for ci in 1..self.classes.len() {
                // strict comparison: argmax ties go to the earliest class
                if dec.get(qi, ci) > dec.get(qi, best) {
                    best = ci;
                }
            }
            out.push(self.classes[best].clone());
        }
        Ok(out)
    }
}

/// Deterministic SMO state for one binary soft-margin problem.
///
/// Iteration works on bias-free decision values and always optimizes the
/// maximal violating pair, so the duality gap shrinks monotonically and no
/// bound point can be starved. The bias is recovered from the optimality
/// interval once iteration stops.
struct Smo<'a> {
    x: &'a Mat,
    y: &'a [f64],
    kernel: &'a KernelSpec,
    c: f64,
    tol: f64,
    alpha: Vec<f64>,
    /// `sum_j alpha_j y_j K(x_j, x_t) - y_t`, kept incrementally up to date.
    err: Vec<f64>,
    diag: Vec<f64>,
}

impl<'a> Smo<'a> {
    fn new(x: &'a Mat, y: &'a [f64], kernel: &'a KernelSpec, c: f64, tol: f64) -> Self {
        let n = x.rows();
        let diag = (0..n).map(|i| kernel.eval(x.row(i), x.row(i))).collect();
        Smo {
            x,
            y,
            kernel,
            c,
            tol,
            alpha: vec![0.0; n],
            err: y.iter().map(|v| -v).collect(),
            diag,
        }
    }

    fn kernel_row(&self, i: usize) -> Vec<f64> {
        let xi = self.x.row(i);
        (0..self.x.rows())
            .map(|m| self.kernel.eval(xi, self.x.row(m)))
            .collect()
    }

    /// Box-bound tests with a tolerance: an alpha within rounding noise of
    /// a bound has no usable room and must not be selected for movement.
    fn at_lower(&self, t: usize) -> bool {
        self.alpha[t] <= 1e-12
    }

    fn at_upper(&self, t: usize) -> bool {
        self.c - self.alpha[t] <= 1e-12
    }

    /// Points whose alpha may still move up the +y direction: the bias must
    /// sit at or above `y_t - fhat_t` for each of them.
    fn in_up(&self, t: usize) -> bool {
        if self.y[t] > 0.0 {
            !self.at_upper(t)
        } else {
            !self.at_lower(t)
        }
    }

    /// Points bounding the bias from above.
    fn in_low(&self, t: usize) -> bool {
        if self.y[t] < 0.0 {
            !self.at_upper(t)
        } else {
            !self.at_lower(t)
        }
    }

    /// Largest lower bias bound (with its point) and smallest upper bound.
    /// Their difference is the maximal KKT violation, split by any bias
    /// chosen inside the interval.
    #[allow(clippy::type_complexity)]
    fn bias_bounds(&self) -> (Option<(f64, usize)>, Option<(f64, usize)>) {
        let mut up: Option<(f64, usize)> = None;
        let mut low: Option<(f64, usize)> = None;
        for t in 0..self.err.len() {
            let v = -self.err[t]; // y_t - fhat_t
            if self.in_up(t) && up.is_none_or(|(best, _)| v > best) {
                up = Some((v, t));
            }
            if self.in_low(t) && low.is_none_or(|(best, _)| v < best) {
                low = Some((v, t));
            }
        }
        (up, low)
    }

    /// Solves the two-variable subproblem for the selected pair in closed
    /// form. Returns false when the pair cannot move (degenerate geometry).
    fn update_pair(&mut self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let (a_i, a_j) = (self.alpha[i], self.alpha[j]);
        let (y_i, y_j) = (self.y[i], self.y[j]);
        let (lo, hi) = if y_i != y_j {
            ((a_j - a_i).max(0.0), self.c.min(self.c + a_j - a_i))
        } else {
            ((a_i + a_j - self.c).max(0.0), self.c.min(a_i + a_j))
        };
        if hi - lo < 1e-14 {
            return false;
        }
        let k_ij = self.kernel.eval(self.x.row(i), self.x.row(j));
        // duplicate points give zero curvature; the floor keeps the step
        // finite and clipping keeps it feasible
        let eta = (self.diag[i] + self.diag[j] - 2.0 * k_ij).max(1e-12);
        let mut a_j_new = a_j + y_j * (self.err[i] - self.err[j]) / eta;
        a_j_new = a_j_new.clamp(lo, hi);
        if a_j_new - lo < 1e-12 {
            a_j_new = lo;
        } else if hi - a_j_new < 1e-12 {
            a_j_new = hi;
        }
        if (a_j_new - a_j).abs() < 1e-14 {
            return false;
        }
        let mut a_i_new = a_i + y_i * y_j * (a_j - a_j_new);
        if a_i_new < 1e-12 {
            a_i_new = 0.0;
        } else if self.c - a_i_new < 1e-12 {
            a_i_new = self.c;
        }

        let d_i = y_i * (a_i_new - a_i);
        let d_j = y_j * (a_j_new - a_j);
        let row_i = self.kernel_row(i);
        let row_j = self.kernel_row(j);
        for m in 0..self.err.len() {
            self.err[m] += d_i * row_i[m] + d_j * row_j[m];
        }
        self.alpha[i] = a_i_new;
        self.alpha[j] = a_j_new;
        true
    }

    /// Optimizes maximal violating pairs until the KKT gap closes to `tol`
    /// or the iteration budget (`max_passes` sweeps of `n` pair updates)
    /// runs out. Returns (alpha, bias, max remaining KKT violation).
    fn solve(mut self, max_passes: usize) -> (Vec<f64>, f64, f64) {
        let n = self.err.len();
        let budget = max_passes.saturating_mul(n);
        let mut iterations = 0usize;
        loop {
            let (up, low) = self.bias_bounds();
            let (bias, violation) = match (up, low) {
                (Some((m, _)), Some((mm, _))) => ((m + mm) / 2.0, ((m - mm) / 2.0).max(0.0)),
                (Some((m, _)), None) => (m, 0.0),
                (None, Some((mm, _))) => (mm, 0.0),
                (None, None) => (0.0, 0.0),
            };
            let (Some((m, i)), Some((mm, j))) = (up, low) else {
                return (self.alpha, bias, violation);
            };
            if m - mm <= self.tol || iterations >= budget {
                return (self.alpha, bias, violation);
            }
            if !self.update_pair(i, j) {
                return (self.alpha, bias, violation);
            }
            iterations += 1;
        }
    }
}

/// Fits a one-vs-rest soft-margin SVM: each class gets its own dual problem
/// solved by pairwise coordinate ascent on working pairs.
pub fn svm_fit<L: Label>(
    x: &Mat,
    y: &[L],
    kernel: KernelSpec,
    c: f64,
    tol: f64,
    max_passes: usize,
) -> Result<TrainedClassifier<L>, ClassifyError> {
    let n = x.rows();
    if n == 0 {
        return Err(ClassifyError::EmptyTrainingSet);
    }
    if y.len() != n {
        return Err(ClassifyError::LabelCountMismatch {
            labels: y.len(),
            rows: n,
        });
    }
    if !x.is_finite() {
        return Err(ClassifyError::NonFiniteInput);
    }
    if !(c > 0.0) || !(tol > 0.0) {
        return Err(ClassifyError::InvalidParameter {
            detail: format!("C and tol must be positive (got C={c}, tol={tol})"),
        });
    }
    if let KernelSpec::Rbf { gamma } = kernel {
        if !(gamma > 0.0) {
            return Err(ClassifyError::InvalidParameter {
                detail: format!("rbf gamma must be positive (got {gamma})"),
            });
        }
    }
    let classes = sorted_vocabulary(y);
    if classes.len() < 2 {
        return Err(ClassifyError::DegenerateLabels);
    }

    let mut problems = Vec::with_capacity(classes.len());
    for class in &classes {
        let signs: Vec<f64> = y
            .iter()
            .map(|l| if l == class { 1.0 } else { -1.0 })
            .collect();
        let (alpha, bias, kkt) = Smo::new(x, &signs, &kernel, c, tol).solve(max_passes);

        let mut support_idx = Vec::new();
        let mut coeffs = Vec::new();
        for (i, &a) in alpha.iter().enumerate() {
            if a > 0.0 {
                support_idx.push(i);
                coeffs.push(a * signs[i]);
            }
        }
        let mut support_x = Mat::zeros(support_idx.len(), x.cols());
        for (r, &i) in support_idx.iter().enumerate() {
            support_x.row_mut(r).copy_from_slice(x.row(i));
        }
        problems.push(BinaryProblem {
            support_x,
            support_idx,
            coeffs,
            bias,
            kkt_violation: kkt,
        });
    }
    Ok(TrainedClassifier::Svm(SvmModel {
        kernel,
        c,
        tol,
        classes,
        problems,
        dim: x.cols(),
    }))
}

// ---------------------------------------------------------------------------
// Uniform contract

/// Degenerate single-class predictor used when a training slice carries
/// only one label (e.g. an origin with pure samples only).
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantModel<L> {
    pub label: L,
}

/// A fitted classifier plus its label vocabulary; `predict` always returns
/// labels drawn from that vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedClassifier<L> {
    Knn(KnnModel<L>),
    Svm(SvmModel<L>),
    Constant(ConstantModel<L>),
}

impl<L: Label> TrainedClassifier<L> {
    pub fn constant(label: L) -> Self {
        TrainedClassifier::Constant(ConstantModel { label })
    }

    pub fn predict(&self, queries: &Mat) -> Result<Vec<L>, ClassifyError> {
        match self {
            TrainedClassifier::Knn(m) => m.predict(queries),
            TrainedClassifier::Svm(m) => m.predict(queries),
            TrainedClassifier::Constant(m) => Ok(vec![m.label.clone(); queries.rows()]),
        }
    }

    pub fn vocabulary(&self) -> Vec<L> {
        match self {
            TrainedClassifier::Knn(m) => m.vocabulary.clone(),
            TrainedClassifier::Svm(m) => m.classes.clone(),
            TrainedClassifier::Constant(m) => vec![m.label.clone()],
        }
    }

    /// Expected query width; `None` for constant predictors.
    pub fn input_dim(&self) -> Option<usize> {
        match self {
            TrainedClassifier::Knn(m) => Some(m.train_x.cols()),
            TrainedClassifier::Svm(m) => Some(m.dim),
            TrainedClassifier::Constant(_) => None,
        }
    }
}
