//! Polynomial and Gaussian RBF kernels and dense Gram matrices.

use serde::{Deserialize, Serialize};

use crate::dataset::{column_mean_std, Dataset};
use crate::error::{Error, Result};

/// Kernel family and parameters.
///
/// `Polynomial { degree: 1, coef: 0.0 }` is the plain inner product;
/// `coef > 0` gives the inhomogeneous kernels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `k(x, x') = (c + <x, x'>)^d`
    Polynomial { degree: u32, coef: f64 },
    /// `k(x, x') = exp(-|x - x'|^2 / (2 alpha^2))`
    GaussianRbf { alpha: f64 },
}

impl KernelSpec {
    pub fn linear() -> Self {
        KernelSpec::Polynomial { degree: 1, coef: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Polynomial { degree, coef } => {
                if degree == 0 {
                    return Err(Error::InvalidParameter("polynomial degree must be >= 1".into()));
                }
                if !(coef >= 0.0 && coef.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "polynomial coefficient must be finite and >= 0, got {coef}"
                    )));
                }
            }
            KernelSpec::GaussianRbf { alpha } => {
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "rbf alpha must be finite and > 0, got {alpha}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Short human-readable name, e.g. `inhom. quadratic`.
    pub fn label(&self) -> String {
        match *self {
            KernelSpec::GaussianRbf { .. } => "gaussian rbf".to_string(),
            KernelSpec::Polynomial { degree, coef } => {
                let kind = if coef == 0.0 { "hom." } else { "inhom." };
                let deg = match degree {
                    1 => "linear".to_string(),
                    2 => "quadratic".to_string(),
                    3 => "cubic".to_string(),
                    d => format!("degree {d}"),
                };
                format!("{kind} {deg}")
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Kernel value without dimension checks.
#[inline]
pub(crate) fn eval_unchecked(spec: &KernelSpec, x: &[f64], x2: &[f64]) -> f64 {
    match *spec {
        KernelSpec::Polynomial { degree, coef } => (coef + dot(x, x2)).powi(degree as i32),
        KernelSpec::GaussianRbf { alpha } => (-sq_dist(x, x2) / (2.0 * alpha * alpha)).exp(),
    }
}

pub fn evaluate(spec: &KernelSpec, x: &[f64], x2: &[f64]) -> Result<f64> {
    if x.len() != x2.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: x2.len(),
        });
    }
    Ok(eval_unchecked(spec, x, x2))
}

/// Dense, exactly symmetric Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    m: usize,
    entries: Vec<f64>,
    spec: KernelSpec,
}

impl GramMatrix {
    /// Wraps precomputed entries (row-major, `m * m`).
    pub fn from_entries(m: usize, entries: Vec<f64>, spec: KernelSpec) -> Result<Self> {
        if entries.len() != m * m {
            return Err(Error::DimensionMismatch {
                expected: m * m,
                got: entries.len(),
            });
        }
        Ok(GramMatrix { m, entries, spec })
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.m + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.m..(i + 1) * self.m]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.get(i, i)).collect()
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

/// `K_ij = k(x_i, x_j)`; the upper triangle is computed and mirrored.
pub fn gram<R: AsRef<[f64]>>(spec: &KernelSpec, rows: &[R]) -> Result<GramMatrix> {
    spec.validate()?;
    let m = rows.len();
    if m == 0 {
        return Err(Error::InvalidParameter("gram matrix of an empty set".into()));
    }
    let n = rows[0].as_ref().len();
    if let Some(bad) = rows.iter().find(|r| r.as_ref().len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: bad.as_ref().len(),
        });
    }
    let mut entries = vec![0.0; m * m];
    for i in 0..m {
        let xi = rows[i].as_ref();
        for j in i..m {
            let v = eval_unchecked(spec, xi, rows[j].as_ref());
            entries[i * m + j] = v;
            entries[j * m + i] = v;
        }
    }
    Ok(GramMatrix {
        m,
        entries,
        spec: *spec,
    })
}

/// Largest per-feature population standard deviation of `train`; used as
/// the default RBF width and inhomogeneous offset.
pub fn default_alpha(train: &Dataset) -> Result<f64> {
    max_feature_std(train.features())
}

pub(crate) fn max_feature_std<R: AsRef<[f64]>>(rows: &[R]) -> Result<f64> {
    let (_, std) = column_mean_std(rows);
    let best = std.into_iter().fold(0.0, f64::max);
    if best > 0.0 {
        Ok(best)
    } else {
        Err(Error::InvalidParameter(
            "every feature is constant; kernel width would be 0".into(),
        ))
    }
}
