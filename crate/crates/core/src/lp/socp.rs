//! Standard form of the `q = 2` robust training problem, a second-order
//! cone program. It is only assembled and serialized here, for hand-off to
//! an external conic solver.
//!
//! Variable layout for `m` training points:
//! `u (m, free) | gamma (free) | xi (m, >= 0) | s (m, >= 0) | r | t | v`.
//! The objective is `r - v + nu * sum(xi)`; `r + v = 1`, `t >= |u|_2` and
//! `r >= |(t, v)|_2` together make `r - v` equal `|u|_2^2` at the optimum.

use serde::{Deserialize, Serialize};

use super::{LpProblem, Sense, VarBounds};
use crate::error::{Error, Result};
use crate::kernel::GramMatrix;

/// `x[head] >= || x[tail] ||_2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cone {
    pub head: usize,
    pub tail: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocpStandardForm {
    pub linear: LpProblem,
    pub cones: Vec<Cone>,
}

/// Column indices of the named variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SocpLayout {
    pub m: usize,
}

impl SocpLayout {
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
    pub fn r(&self) -> usize {
        3 * self.m + 1
    }
    pub fn t(&self) -> usize {
        3 * self.m + 2
    }
    pub fn v(&self) -> usize {
        3 * self.m + 3
    }
    pub fn n_vars(&self) -> usize {
        3 * self.m + 4
    }
}

pub fn build_q2_socp(
    gram: &GramMatrix,
    labels: &[f64],
    nu: f64,
    delta: &[f64],
) -> Result<SocpStandardForm> {
    let m = gram.size();
    if labels.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: labels.len(),
        });
    }
    if delta.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: delta.len(),
        });
    }
    if !(nu >= 0.0 && nu.is_finite()) {
        return Err(Error::InvalidParameter(format!("nu must be >= 0, got {nu}")));
    }
    if delta.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
        return Err(Error::InvalidParameter("delta must be finite and >= 0".into()));
    }
    let lay = SocpLayout { m };
    let n = lay.n_vars();

    let mut objective = vec![0.0; n];
    objective[lay.r()] = 1.0;
    objective[lay.v()] = -1.0;
    for i in 0..m {
        objective[lay.xi(i)] = nu;
    }
    let mut lp = LpProblem::new(objective);
    for j in 0..m {
        lp.bounds[lay.u(j)] = VarBounds::FREE;
    }
    lp.bounds[lay.gamma()] = VarBounds::FREE;
    lp.bounds[lay.v()] = VarBounds::FREE;

    let sqrt_diag: Vec<f64> = gram.diagonal().iter().map(|k| k.max(0.0).sqrt()).collect();
    for i in 0..m {
        let mut row = vec![0.0; n];
        let yi = labels[i];
        for j in 0..m {
            row[lay.u(j)] = yi * labels[j] * gram.get(i, j);
            row[lay.s(j)] = 0.0 - delta[i] * sqrt_diag[j];
        }
        row[lay.gamma()] = -yi;
        row[lay.xi(i)] = 1.0;
        lp.add_row(row, Sense::Ge, 1.0);
    }
    for j in 0..m {
        for sign in [1.0, -1.0] {
            let mut row = vec![0.0; n];
            row[lay.s(j)] = 1.0;
            row[lay.u(j)] = sign;
            lp.add_row(row, Sense::Ge, 0.0);
        }
    }
    let mut row = vec![0.0; n];
    row[lay.r()] = 1.0;
    row[lay.v()] = 1.0;
    lp.add_row(row, Sense::Eq, 1.0);

    let cones = vec![
        Cone {
            head: lay.t(),
            tail: (0..m).map(|j| lay.u(j)).collect(),
        },
        Cone {
            head: lay.r(),
            tail: vec![lay.t(), lay.v()],
        },
    ];
    Ok(SocpStandardForm { linear: lp, cones })
}

impl SocpStandardForm {
    /// Checks the linear part and that every cone names distinct, in-range
    /// variables.
    pub fn validate(&self) -> Result<()> {
        self.linear.validate()?;
        let n = self.linear.n_vars();
        for (k, cone) in self.cones.iter().enumerate() {
            let mut seen = vec![false; n];
            for &ix in std::iter::once(&cone.head).chain(&cone.tail) {
                if ix >= n || seen[ix] {
                    return Err(Error::InvalidParameter(format!(
                        "cone {k} has a repeated or out-of-range index {ix}"
                    )));
                }
                seen[ix] = true;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let form: SocpStandardForm = serde_json::from_str(text)?;
        form.validate()?;
        Ok(form)
    }
}
