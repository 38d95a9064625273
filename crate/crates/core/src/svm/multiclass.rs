//! One-versus-all: one binary classifier per class, prediction by the
//! largest decision value.

use serde::{Deserialize, Serialize};

use super::{train_with_gram, Formulation, QNorm, TrainedClassifier};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{gram, GramMatrix, KernelSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassClassifier {
    pub class_ids: Vec<String>,
    /// `classifiers[l]` separates class `l` (+1) from the rest (-1).
    pub classifiers: Vec<TrainedClassifier>,
}

impl MulticlassClassifier {
    /// `f_l(x)` for every class.
    pub fn decision_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.classifiers.iter().map(|c| c.decision_value(x)).collect()
    }
}

/// Trains `L` one-versus-all problems on the same Gram matrix. `delta` is
/// per training point and shared by every subproblem; all zeros gives the
/// deterministic models.
pub fn train_multiclass(
    train: &Dataset,
    spec: &KernelSpec,
    nu: f64,
    q: QNorm,
    delta: &[f64],
    n_max: usize,
) -> Result<MulticlassClassifier> {
    let g = gram(spec, train.features())?;
    train_multiclass_with_gram(train, &g, nu, q, delta, n_max)
}

/// [`train_multiclass`] with a precomputed Gram matrix of `train`.
pub fn train_multiclass_with_gram(
    train: &Dataset,
    g: &GramMatrix,
    nu: f64,
    q: QNorm,
    delta: &[f64],
    n_max: usize,
) -> Result<MulticlassClassifier> {
    let counts = train.class_counts();
    if counts.len() < 2 {
        return Err(Error::TooFewClasses(counts.len()));
    }
    if let Some(k) = counts.iter().position(|&c| c == 0) {
        return Err(Error::ClassTooSmall(train.class_ids()[k].clone(), 0));
    }
    let deterministic = delta.iter().all(|&d| d == 0.0) && delta.len() == train.len();
    let classifiers = (0..counts.len())
        .map(|l| {
            let labels = train.signed_labels(l);
            let form = if deterministic {
                Formulation::Deterministic
            } else {
                Formulation::Robust { delta }
            };
            train_with_gram(train.features(), &labels, g, nu, q, form, n_max)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MulticlassClassifier {
        class_ids: train.class_ids().to_vec(),
        classifiers,
    })
}

/// `argmax_l f_l(x)`, ties to the lowest class index.
pub fn predict_multiclass(clf: &MulticlassClassifier, x: &[f64]) -> Result<usize> {
    let f = clf.decision_values(x)?;
    let mut best = 0;
    for (l, &v) in f.iter().enumerate() {
        if v > f[best] {
            best = l;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_go_to_first_class() {
        let base = TrainedClassifier {
            spec: KernelSpec::linear(),
            q_norm: QNorm::One,
            nu: 1.0,
            u: vec![0.0],
            gamma: 0.0,
            b: 0.5,
            omega_pos: 0.0,
            omega_neg: 0.0,
            xi: vec![0.0],
            delta: vec![0.0],
            support_points: vec![vec![1.0]],
            support_labels: vec![1.0],
            lp_objective: 0.0,
        };
        let clf = MulticlassClassifier {
            class_ids: vec!["a".into(), "b".into(), "c".into()],
            classifiers: vec![base.clone(), base.clone(), base],
        };
        assert_eq!(predict_multiclass(&clf, &[3.0]).unwrap(), 0);
    }

    #[test]
    fn absent_class_is_rejected() {
        let d = Dataset::from_labels(vec![vec![0.0], vec![1.0], vec![2.0]], &["a", "b", "c"]).unwrap();
        let only_ab = d.subset(&[0, 1]);
        assert!(matches!(
            train_multiclass(&only_ab, &KernelSpec::linear(), 1.0, QNorm::One, &[0.0, 0.0], 10),
            Err(Error::ClassTooSmall(..))
        ));
    }
}
