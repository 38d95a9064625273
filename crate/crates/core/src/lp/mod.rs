//! Linear programs in row form, a dense revised simplex solver, and the
//! second-order cone variant of the training model (built, not solved).

mod simplex;
pub mod socp;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use simplex::{solve_lp, solve_lp_with, SimplexOptions};

/// Feasibility tolerance on constraint rows.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Reduced-cost optimality tolerance.
pub const OPTIMALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
}

/// Variable bounds; `None` means unbounded on that side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarBounds {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl VarBounds {
    pub const NONNEG: VarBounds = VarBounds {
        lower: Some(0.0),
        upper: None,
    };
    pub const FREE: VarBounds = VarBounds {
        lower: None,
        upper: None,
    };

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        self.lower.is_none_or(|l| v >= l - tol) && self.upper.is_none_or(|u| v <= u + tol)
    }
}

/// `min objective . x` subject to `rows[i] . x (senses[i]) rhs[i]` and bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub senses: Vec<Sense>,
    pub rhs: Vec<f64>,
    pub bounds: Vec<VarBounds>,
}

impl LpProblem {
    /// Problem with `n` nonnegative variables and no rows.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LpProblem {
            objective,
            rows: Vec::new(),
            senses: Vec::new(),
            rhs: Vec::new(),
            bounds: vec![VarBounds::NONNEG; n],
        }
    }

    pub fn add_row(&mut self, row: Vec<f64>, sense: Sense, rhs: f64) {
        self.rows.push(row);
        self.senses.push(sense);
        self.rhs.push(rhs);
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        let m = self.rows.len();
        if self.senses.len() != m || self.rhs.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: self.senses.len().min(self.rhs.len()),
            });
        }
        if self.bounds.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.bounds.len(),
            });
        }
        if let Some(row) = self.rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: row.len(),
            });
        }
        let finite = self.objective.iter().all(|v| v.is_finite())
            && self.rhs.iter().all(|v| v.is_finite())
            && self.rows.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("non-finite LP coefficient".into()));
        }
        for (j, b) in self.bounds.iter().enumerate() {
            let ok_l = b.lower.is_none_or(f64::is_finite);
            let ok_u = b.upper.is_none_or(f64::is_finite);
            let ordered = match (b.lower, b.upper) {
                (Some(l), Some(u)) => l <= u,
                _ => true,
            };
            if !(ok_l && ok_u && ordered) {
                return Err(Error::InvalidParameter(format!("bad bounds on variable {j}")));
            }
        }
        Ok(())
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for ((row, sense), rhs) in self.rows.iter().zip(&self.senses).zip(&self.rhs) {
            let lhs: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
            let v = match sense {
                Sense::Ge => rhs - lhs,
                Sense::Le => lhs - rhs,
                Sense::Eq => (lhs - rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (b, v) in self.bounds.iter().zip(x) {
            if let Some(l) = b.lower {
                worst = worst.max(l - v);
            }
            if let Some(u) = b.upper {
                worst = worst.max(v - u);
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        })
    }
}

/// Outcome of [`solve_lp`]. `objective_value` is `+inf` when infeasible,
/// `-inf` when unbounded; `variable_values` is empty in both cases.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective_value: f64,
    pub variable_values: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Values of an optimal solution, or the status as an error.
    pub fn into_optimal(self) -> Result<Vec<f64>> {
        match self.status {
            LpStatus::Optimal => Ok(self.variable_values),
            other => Err(Error::LpStatus(other)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_x_with_lower_row() {
        let mut lp = LpProblem::new(vec![1.0]);
        lp.add_row(vec![1.0], Sense::Ge, 1.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_ray() {
        let lp = LpProblem::new(vec![-1.0]);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    #[test]
    fn infeasible_pair() {
        let mut lp = LpProblem::new(vec![1.0, 1.0]);
        lp.add_row(vec![1.0, 1.0], Sense::Le, 1.0);
        lp.add_row(vec![1.0, 1.0], Sense::Ge, 2.0);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn free_and_bounded_variables() {
        // min x - y, x free with x >= -3 via a row, y in [1, 4]
        let mut lp = LpProblem::new(vec![1.0, -1.0]);
        lp.bounds = vec![VarBounds::FREE, VarBounds { lower: Some(1.0), upper: Some(4.0) }];
        lp.add_row(vec![1.0, 0.0], Sense::Ge, -3.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value + 7.0).abs() < 1e-12);
        assert!((sol.variable_values[0] + 3.0).abs() < 1e-12);
        assert!((sol.variable_values[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn upper_only_variable_and_equality() {
        // max x + y (min -x - y), x <= 2 (no lower), x + y = 5, y in [0, 10]
        let mut lp = LpProblem::new(vec![-1.0, -2.0]);
        lp.bounds = vec![VarBounds { lower: None, upper: Some(2.0) }, VarBounds { lower: Some(0.0), upper: Some(10.0) }];
        lp.add_row(vec![1.0, 1.0], Sense::Eq, 5.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        // y = 10, x = -5
        assert!((sol.objective_value + 15.0).abs() < 1e-12);
        assert!(lp.max_violation(&sol.variable_values) < 1e-12);
    }

    #[test]
    fn beale_cycling_example_terminates() {
        // Beale's example cycles under the textbook largest-coefficient rule.
        let mut lp = LpProblem::new(vec![-0.75, 150.0, -0.02, 6.0]);
        lp.add_row(vec![0.25, -60.0, -0.04, 9.0], Sense::Le, 0.0);
        lp.add_row(vec![0.5, -90.0, -0.02, 3.0], Sense::Le, 0.0);
        lp.add_row(vec![0.0, 0.0, 1.0, 0.0], Sense::Le, 1.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value + 0.05).abs() < 1e-10);
    }

    #[test]
    fn validation_rejects_bad_shapes() {
        let mut lp = LpProblem::new(vec![1.0, 2.0]);
        lp.add_row(vec![1.0], Sense::Ge, 1.0);
        assert!(solve_lp(&lp).is_err());
        let mut lp = LpProblem::new(vec![f64::NAN]);
        lp.add_row(vec![1.0], Sense::Ge, 1.0);
        assert!(solve_lp(&lp).is_err());
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LpProblem::new(vec![1.0, 1.0]);
        lp.add_row(vec![1.0, 1.0], Sense::Eq, 2.0);
        lp.add_row(vec![2.0, 2.0], Sense::Eq, 4.0);
        lp.add_row(vec![1.0, -1.0], Sense::Ge, 1.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective_value - 2.0).abs() < 1e-12);
        assert!(lp.max_violation(&sol.variable_values) < 1e-9);
    }
}
