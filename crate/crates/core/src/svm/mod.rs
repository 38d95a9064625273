//! Two-step kernel SVM training.
//!
//! Step one solves an LP for the coefficients `u`, the initial intercept
//! `gamma` and the slacks `xi`. Step two shifts the initial hypersurface
//! by the largest signed slacks of each class and grid-searches the final
//! intercept `b` between the two shifted copies, minimizing the number of
//! training points on the wrong side.
//!
//! Robust training tightens every margin row by
//! `delta_i * sum_j sqrt(K_jj) |u_j|` and adds the same term to the
//! misclassification count; with `delta = 0` it coincides with the
//! deterministic path.

mod multiclass;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, TransformParams};
use crate::error::{Error, Result};
use crate::kernel::{eval_unchecked, gram, GramMatrix, KernelSpec};
use crate::lp::{solve_lp, LpProblem, Sense, VarBounds};

pub use multiclass::{
    predict_multiclass, train_multiclass, train_multiclass_with_gram, MulticlassClassifier,
};

/// Norm on `u` in the training objective. Both choices give an LP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QNorm {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "inf")]
    Infinity,
}

impl fmt::Display for QNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QNorm::One => "1",
            QNorm::Infinity => "inf",
        })
    }
}

impl FromStr for QNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "one" => Ok(QNorm::One),
            "inf" | "infinity" => Ok(QNorm::Infinity),
            other => Err(Error::InvalidParameter(format!(
                "q must be 1 or inf (2 is an SOCP and is not solved here), got {other:?}"
            ))),
        }
    }
}

/// Column indices of the training LP: `u | gamma | xi | s [| s_inf]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LpLayout {
    pub m: usize,
    pub q: QNorm,
}

impl LpLayout {
    pub fn u(&self, j: usize) -> usize {
        j
    }
    pub fn gamma(&self) -> usize {
        self.m
    }
    pub fn xi(&self, i: usize) -> usize {
        self.m + 1 + i
    }
    pub fn s(&self, j: usize) -> usize {
        2 * self.m + 1 + j
    }
    /// Only present for `q = inf`.
    pub fn s_inf(&self) -> usize {
        3 * self.m + 1
    }
    pub fn n_vars(&self) -> usize {
        match self.q {
            QNorm::One => 3 * self.m + 1,
            QNorm::Infinity => 3 * self.m + 2,
        }
    }
}

fn check_inputs(gram: &GramMatrix, labels: &[f64], nu: f64) -> Result<()> {
    let m = gram.size();
    if labels.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: labels.len(),
        });
    }
    if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
        return Err(Error::InvalidParameter("labels must be +1 or -1".into()));
    }
    if !(nu >= 0.0 && nu.is_finite()) {
        return Err(Error::InvalidParameter(format!("nu must be >= 0, got {nu}")));
    }
    if gram.diagonal().iter().any(|&k| k < 0.0) {
        return Err(Error::InvalidParameter("gram diagonal must be >= 0".into()));
    }
    Ok(())
}

fn check_delta(delta: &[f64], m: usize) -> Result<()> {
    if delta.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: delta.len(),
        });
    }
    if delta.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
        return Err(Error::InvalidParameter("delta must be finite and >= 0".into()));
    }
    Ok(())
}

fn empty_training_lp(lay: LpLayout, nu: f64) -> LpProblem {
    let m = lay.m;
    let mut objective = vec![0.0; lay.n_vars()];
    for i in 0..m {
        objective[lay.xi(i)] = nu;
    }
    match lay.q {
        QNorm::One => (0..m).for_each(|j| objective[lay.s(j)] = 1.0),
        QNorm::Infinity => objective[lay.s_inf()] = 1.0,
    }
    let mut lp = LpProblem::new(objective);
    for j in 0..m {
        lp.bounds[lay.u(j)] = VarBounds::FREE;
    }
    lp.bounds[lay.gamma()] = VarBounds::FREE;
    lp
}

fn push_abs_rows(lp: &mut LpProblem, lay: LpLayout) {
    let n = lay.n_vars();
    for j in 0..lay.m {
        for sign in [1.0, -1.0] {
            let mut row = vec![0.0; n];
            row[lay.s(j)] = 1.0;
            row[lay.u(j)] = sign;
            lp.add_row(row, Sense::Ge, 0.0);
        }
    }
    if lay.q == QNorm::Infinity {
        for i in 0..lay.m {
            for sign in [1.0, -1.0] {
                let mut row = vec![0.0; n];
                row[lay.s_inf()] = 1.0;
                row[lay.u(i)] = sign;
                lp.add_row(row, Sense::Ge, 0.0);
            }
        }
    }
}

/// Robust training LP.
///
/// Margin row `i`:
/// `y_i sum_j K_ij y_j u_j - y_i gamma + xi_i - delta_i sum_j sqrt(K_jj) s_j >= 1`,
/// followed by `s_j >= |u_j|` and, for `q = inf`, `s_inf >= |u_i|`.
pub fn assemble_robust_lp(
    gram: &GramMatrix,
    labels: &[f64],
    nu: f64,
    delta: &[f64],
    q: QNorm,
) -> Result<LpProblem> {
    check_inputs(gram, labels, nu)?;
    let m = gram.size();
    check_delta(delta, m)?;
    let lay = LpLayout { m, q };
    let n = lay.n_vars();
    let sqrt_diag: Vec<f64> = gram.diagonal().iter().map(|k| k.sqrt()).collect();
    let mut lp = empty_training_lp(lay, nu);
    for i in 0..m {
        let yi = labels[i];
        let mut row = vec![0.0; n];
        for j in 0..m {
            row[lay.u(j)] = yi * labels[j] * gram.get(i, j);
            // written as a difference so delta = 0 leaves +0.0
            row[lay.s(j)] = 0.0 - delta[i] * sqrt_diag[j];
        }
        row[lay.gamma()] = -yi;
        row[lay.xi(i)] = 1.0;
        lp.add_row(row, Sense::Ge, 1.0);
    }
    push_abs_rows(&mut lp, lay);
    Ok(lp)
}

/// Deterministic training LP, assembled without any uncertainty terms.
pub fn assemble_deterministic_lp(
    gram: &GramMatrix,
    labels: &[f64],
    nu: f64,
    q: QNorm,
) -> Result<LpProblem> {
    check_inputs(gram, labels, nu)?;
    let m = gram.size();
    let lay = LpLayout { m, q };
    let n = lay.n_vars();
    let mut lp = empty_training_lp(lay, nu);
    for i in 0..m {
        let yi = labels[i];
        let mut row = vec![0.0; n];
        for j in 0..m {
            row[lay.u(j)] = yi * labels[j] * gram.get(i, j);
        }
        row[lay.gamma()] = -yi;
        row[lay.xi(i)] = 1.0;
        lp.add_row(row, Sense::Ge, 1.0);
    }
    push_abs_rows(&mut lp, lay);
    Ok(lp)
}

/// `omega_A = max_i y_i xi_i`, `omega_B = max_i (-y_i xi_i)`.
pub fn compute_omegas(labels: &[f64], xi: &[f64]) -> (f64, f64) {
    let mut pos = f64::NEG_INFINITY;
    let mut neg = f64::NEG_INFINITY;
    for (&y, &x) in labels.iter().zip(xi) {
        pos = pos.max(y * x);
        neg = neg.max(-y * x);
    }
    (pos, neg)
}

/// `[gamma + 1 - omega_B, gamma - 1 + omega_A]`, or `None` when empty.
pub fn search_interval(gamma: f64, omegas: (f64, f64)) -> Option<(f64, f64)> {
    let lo = gamma + 1.0 - omegas.1;
    let hi = gamma - 1.0 + omegas.0;
    (lo <= hi).then_some((lo, hi))
}

/// `g_i = sum_j K_ij y_j u_j`.
pub fn kernel_margins(gram: &GramMatrix, labels: &[f64], u: &[f64]) -> Vec<f64> {
    let yu: Vec<f64> = labels.iter().zip(u).map(|(y, u)| y * u).collect();
    (0..gram.size())
        .map(|i| gram.row(i).iter().zip(&yu).map(|(k, v)| k * v).sum())
        .collect()
}

/// `sum_j sqrt(K_jj) |u_j|`.
pub fn robust_weight(gram: &GramMatrix, u: &[f64]) -> f64 {
    gram.diagonal()
        .iter()
        .zip(u)
        .map(|(k, u)| k.sqrt() * u.abs())
        .sum()
}

/// Number of `i` with `y_i b - y_i g_i + penalty_i > 0`.
pub fn count_misclassified(labels: &[f64], margins: &[f64], penalty: &[f64], b: f64) -> usize {
    labels
        .iter()
        .zip(margins)
        .zip(penalty)
        .filter(|((&y, &g), &p)| y * b - y * g + p > 0.0)
        .count()
}

/// Grid points `lo + k (hi - lo) / n_max`, `k = 0..=n_max`, with `hi` exact.
pub fn search_grid(lo: f64, hi: f64, n_max: usize) -> impl Iterator<Item = f64> {
    let step = (hi - lo) / n_max as f64;
    (0..=n_max).map(move |k| if k == n_max { hi } else { lo + k as f64 * step })
}

/// Final intercept: the smallest grid point of the search interval with
/// the fewest misclassified training points, or `gamma` if the interval
/// is empty.
pub fn intercept_search(
    gram: &GramMatrix,
    labels: &[f64],
    u: &[f64],
    gamma: f64,
    omegas: (f64, f64),
    delta: &[f64],
    n_max: usize,
) -> Result<f64> {
    let m = gram.size();
    if labels.len() != m || u.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: labels.len().min(u.len()),
        });
    }
    check_delta(delta, m)?;
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be >= 1".into()));
    }
    let Some((lo, hi)) = search_interval(gamma, omegas) else {
        return Ok(gamma);
    };
    let margins = kernel_margins(gram, labels, u);
    let weight = robust_weight(gram, u);
    let penalty: Vec<f64> = delta.iter().map(|d| d * weight).collect();
    Ok(scan(labels, &margins, &penalty, lo, hi, n_max))
}

fn scan(labels: &[f64], margins: &[f64], penalty: &[f64], lo: f64, hi: f64, n_max: usize) -> f64 {
    let mut best_b = lo;
    let mut best = usize::MAX;
    for b in search_grid(lo, hi, n_max) {
        let c = count_misclassified(labels, margins, penalty, b);
        if c < best {
            best = c;
            best_b = b;
            if c == 0 {
                break;
            }
        }
    }
    best_b
}

/// A trained binary classifier and everything needed to evaluate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub spec: KernelSpec,
    pub q_norm: QNorm,
    pub nu: f64,
    pub u: Vec<f64>,
    pub gamma: f64,
    pub b: f64,
    pub omega_pos: f64,
    pub omega_neg: f64,
    pub xi: Vec<f64>,
    pub delta: Vec<f64>,
    pub support_points: Vec<Vec<f64>>,
    pub support_labels: Vec<f64>,
    pub lp_objective: f64,
}

impl TrainedClassifier {
    /// `sum_i k(x, x_i) y_i u_i - b`.
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        let n = self.support_points.first().map_or(0, Vec::len);
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        let mut f = 0.0;
        for ((xi, &y), &u) in self.support_points.iter().zip(&self.support_labels).zip(&self.u) {
            if u != 0.0 {
                f += eval_unchecked(&self.spec, x, xi) * y * u;
            }
        }
        Ok(f - self.b)
    }

    /// `+1` iff the decision value is strictly positive.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(if self.decision_value(x)? > 0.0 { 1.0 } else { -1.0 })
    }

    /// Indices with nonzero `u`.
    pub fn support_indices(&self) -> Vec<usize> {
        (0..self.u.len()).filter(|&i| self.u[i] != 0.0).collect()
    }
}

pub fn predict(clf: &TrainedClassifier, x: &[f64]) -> Result<f64> {
    clf.predict(x)
}

/// Which LP assembly the first step uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Formulation<'a> {
    Deterministic,
    Robust { delta: &'a [f64] },
}

/// Trains on `rows` with ±1 `labels` and a precomputed Gram matrix.
pub fn train_with_gram(
    rows: &[Vec<f64>],
    labels: &[f64],
    gram: &GramMatrix,
    nu: f64,
    q: QNorm,
    form: Formulation<'_>,
    n_max: usize,
) -> Result<TrainedClassifier> {
    let m = gram.size();
    if rows.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: rows.len(),
        });
    }
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be >= 1".into()));
    }
    let (lp, delta) = match form {
        Formulation::Deterministic => (assemble_deterministic_lp(gram, labels, nu, q)?, vec![0.0; m]),
        Formulation::Robust { delta } => (assemble_robust_lp(gram, labels, nu, delta, q)?, delta.to_vec()),
    };
    let solution = solve_lp(&lp)?;
    let lp_objective = solution.objective_value;
    // xi large is always feasible and the objective is bounded below by 0,
    // so anything but an optimum is a solver failure
    let x = solution.into_optimal()?;
    let lay = LpLayout { m, q };
    let u: Vec<f64> = (0..m).map(|j| x[lay.u(j)]).collect();
    let gamma = x[lay.gamma()];
    let xi: Vec<f64> = (0..m).map(|i| x[lay.xi(i)]).collect();
    let omegas = compute_omegas(labels, &xi);

    let b = match search_interval(gamma, omegas) {
        None => gamma,
        Some((lo, hi)) => {
            let margins = kernel_margins(gram, labels, &u);
            let penalty: Vec<f64> = match form {
                Formulation::Deterministic => vec![0.0; m],
                Formulation::Robust { delta } => {
                    let w = robust_weight(gram, &u);
                    delta.iter().map(|d| d * w).collect()
                }
            };
            scan(labels, &margins, &penalty, lo, hi, n_max)
        }
    };
    Ok(TrainedClassifier {
        spec: *gram.spec(),
        q_norm: q,
        nu,
        u,
        gamma,
        b,
        omega_pos: omegas.0,
        omega_neg: omegas.1,
        xi,
        delta,
        support_points: rows.to_vec(),
        support_labels: labels.to_vec(),
        lp_objective,
    })
}

fn binary_labels(train: &Dataset) -> Result<Vec<f64>> {
    if train.n_classes() != 2 {
        return Err(Error::InvalidParameter(format!(
            "binary training needs exactly 2 classes, got {}",
            train.n_classes()
        )));
    }
    if let Some(k) = train.class_counts().iter().position(|&c| c == 0) {
        return Err(Error::ClassTooSmall(train.class_ids()[k].clone(), 0));
    }
    Ok(train.signed_labels(train.positive_class()))
}

/// Robust two-step training on a two-class dataset; `delta = 0` gives the
/// deterministic classifier. The positive class is
/// [`Dataset::positive_class`].
pub fn train_binary(
    train: &Dataset,
    spec: &KernelSpec,
    nu: f64,
    q: QNorm,
    delta: &[f64],
    n_max: usize,
) -> Result<TrainedClassifier> {
    let labels = binary_labels(train)?;
    let g = gram(spec, train.features())?;
    train_with_gram(
        train.features(),
        &labels,
        &g,
        nu,
        q,
        Formulation::Robust { delta },
        n_max,
    )
}

/// Two-step training through the dedicated deterministic LP.
pub fn train_binary_deterministic(
    train: &Dataset,
    spec: &KernelSpec,
    nu: f64,
    q: QNorm,
    n_max: usize,
) -> Result<TrainedClassifier> {
    let labels = binary_labels(train)?;
    let g = gram(spec, train.features())?;
    train_with_gram(
        train.features(),
        &labels,
        &g,
        nu,
        q,
        Formulation::Deterministic,
        n_max,
    )
}

/// Training points misclassified by `predict`.
pub fn training_errors(clf: &TrainedClassifier) -> usize {
    clf.support_points
        .iter()
        .zip(&clf.support_labels)
        .filter(|(x, &y)| clf.predict(x).map_or(true, |p| p != y))
        .count()
}

/// Either kind of trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    /// `positive` indexes `class_ids`; the other class is predicted on `-1`.
    Binary {
        classifier: TrainedClassifier,
        positive: usize,
    },
    Multiclass(MulticlassClassifier),
}

/// A model together with its input transform and class names, as written
/// by `train` and read by `predict`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub class_ids: Vec<String>,
    pub transform: TransformParams,
    pub model: Model,
}

impl ModelFile {
    /// Class index for a raw (untransformed) observation.
    pub fn predict_index(&self, raw: &[f64]) -> Result<usize> {
        let x = self.transform.apply_row(raw)?;
        match &self.model {
            Model::Binary {
                classifier,
                positive,
            } => {
                if classifier.predict(&x)? > 0.0 {
                    Ok(*positive)
                } else {
                    Ok(1 - *positive)
                }
            }
            Model::Multiclass(clf) => predict_multiclass(clf, &x),
        }
    }

    pub fn predict_label(&self, raw: &[f64]) -> Result<&str> {
        Ok(&self.class_ids[self.predict_index(raw)?])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Trains the binary procedure for two classes and one-versus-all beyond.
/// `delta` is per training point and shared by every subproblem; `None`
/// uses the deterministic LP.
pub fn train_model(
    train: &Dataset,
    spec: &KernelSpec,
    nu: f64,
    q: QNorm,
    delta: Option<&[f64]>,
    n_max: usize,
) -> Result<Model> {
    let g = gram(spec, train.features())?;
    train_model_with_gram(train, &g, nu, q, delta, n_max)
}

/// [`train_model`] with a precomputed Gram matrix of `train`.
pub fn train_model_with_gram(
    train: &Dataset,
    g: &GramMatrix,
    nu: f64,
    q: QNorm,
    delta: Option<&[f64]>,
    n_max: usize,
) -> Result<Model> {
    if train.n_classes() == 2 {
        let labels = binary_labels(train)?;
        let form = match delta {
            Some(delta) => Formulation::Robust { delta },
            None => Formulation::Deterministic,
        };
        let classifier = train_with_gram(train.features(), &labels, g, nu, q, form, n_max)?;
        Ok(Model::Binary {
            classifier,
            positive: train.positive_class(),
        })
    } else {
        let zeros = vec![0.0; train.len()];
        let d = delta.unwrap_or(&zeros);
        Ok(Model::Multiclass(train_multiclass_with_gram(
            train, g, nu, q, d, n_max,
        )?))
    }
}

impl Model {
    pub fn predict_index(&self, x: &[f64]) -> Result<usize> {
        match self {
            Model::Binary {
                classifier,
                positive,
            } => Ok(if classifier.predict(x)? > 0.0 {
                *positive
            } else {
                1 - *positive
            }),
            Model::Multiclass(clf) => predict_multiclass(clf, x),
        }
    }

    /// Misclassified rows of `data`, which must share the training class order.
    pub fn count_errors(&self, data: &Dataset) -> Result<usize> {
        let mut wrong = 0;
        for (x, &y) in data.features().iter().zip(data.labels()) {
            if self.predict_index(x)? != y {
                wrong += 1;
            }
        }
        Ok(wrong)
    }
}
