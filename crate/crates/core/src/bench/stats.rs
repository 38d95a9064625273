//! Rank-based comparison of several methods over several datasets:
//! Friedman's test with the Iman-Davenport F correction, followed by
//! Holm's step-down comparison of the best-ranked method with the rest.
//!
//! The p-values need the F and normal distributions, computed here from
//! the regularized incomplete beta and gamma functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EPS: f64 = 1e-15;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 500;

/// `ln Gamma(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = G[0];
    let t = x + 7.5;
    for (k, g) in G.iter().enumerate().skip(1) {
        a += g / (x + k as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// `P(F > f)` for the F distribution with `(d1, d2)` degrees of freedom.
pub fn f_sf(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    inc_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        // series for P
        let mut ap = a;
        let mut sum = 1.0 / a;
        let mut del = sum;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        1.0 - sum * ln_front.exp()
    } else {
        // continued fraction for Q
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        ln_front.exp() * h
    }
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        2.0 - gamma_q(0.5, x * x)
    } else {
        gamma_q(0.5, x * x)
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Ranks of `values` (1 = smallest), ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolmRow {
    /// Index of the compared method in the input order.
    pub method: usize,
    /// Position in rank order; the best method is `j = 1`.
    pub j: usize,
    pub z: f64,
    pub p_value: f64,
    pub threshold: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankStats {
    pub mean_ranks: Vec<f64>,
    pub n_datasets: usize,
    pub n_methods: usize,
    pub chi2_f: f64,
    pub f_f: f64,
    pub p_value: f64,
    /// Empty until [`holm_test`] runs.
    pub holm: Vec<HolmRow>,
    pub alpha: Option<f64>,
}

/// Friedman statistic and its Iman-Davenport F form from mean ranks.
pub fn friedman_from_ranks(mean_ranks: &[f64], n_datasets: usize) -> Result<RankStats> {
    let k = mean_ranks.len();
    if k < 2 || n_datasets < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 datasets and 2 methods, got {n_datasets} and {k}"
        )));
    }
    let (nd, nm) = (n_datasets as f64, k as f64);
    let sum_sq: f64 = mean_ranks.iter().map(|r| r * r).sum();
    let chi2_f = 12.0 * nd / (nm * (nm + 1.0)) * (sum_sq - nm * (nm + 1.0) * (nm + 1.0) / 4.0);
    let denom = nd * (nm - 1.0) - chi2_f;
    let f_f = if denom > 0.0 {
        (nd - 1.0) * chi2_f / denom
    } else {
        f64::INFINITY
    };
    let p_value = f_sf(f_f, nm - 1.0, (nm - 1.0) * (nd - 1.0)).clamp(0.0, 1.0);
    Ok(RankStats {
        mean_ranks: mean_ranks.to_vec(),
        n_datasets,
        n_methods: k,
        chi2_f,
        f_f,
        p_value,
        holm: Vec::new(),
        alpha: None,
    })
}

/// Ranks each dataset row (lower error ranks first, ties averaged) and
/// applies [`friedman_from_ranks`] to the column means.
pub fn friedman_iman_davenport(errors: &[Vec<f64>]) -> Result<RankStats> {
    let k = errors.first().map_or(0, Vec::len);
    if let Some(row) = errors.iter().find(|r| r.len() != k) {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: row.len(),
        });
    }
    if errors.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite error value".into()));
    }
    let mut mean = vec![0.0; k];
    for row in errors {
        for (m, r) in mean.iter_mut().zip(average_ranks(row)) {
            *m += r;
        }
    }
    let nd = errors.len().max(1) as f64;
    mean.iter_mut().for_each(|m| *m /= nd);
    friedman_from_ranks(&mean, errors.len())
}

/// Holm's step-down test of the best-ranked method against every other.
///
/// `z_j = (R* - R_j) sqrt(6 N_d / (N_m (N_m + 1)))`, `p_j = 2 Phi(-|z_j|)`.
/// Rows are listed in rank order `j = 2, 3, ...` with threshold
/// `alpha / (j - 1)`; rejection proceeds from the smallest p-value and
/// stops at the first hypothesis that is kept.
pub fn holm_test(stats: &RankStats, alpha: f64) -> Result<RankStats> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let (nd, nm) = (stats.n_datasets as f64, stats.n_methods as f64);
    let scale = (6.0 * nd / (nm * (nm + 1.0))).sqrt();
    let mut order: Vec<usize> = (0..stats.mean_ranks.len()).collect();
    order.sort_by(|&a, &b| stats.mean_ranks[a].total_cmp(&stats.mean_ranks[b]));
    let best = stats.mean_ranks[order[0]];
    let mut rows: Vec<HolmRow> = order
        .iter()
        .enumerate()
        .skip(1)
        .map(|(pos, &method)| {
            let z = (best - stats.mean_ranks[method]) * scale;
            let j = pos + 1;
            HolmRow {
                method,
                j,
                z,
                p_value: erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0),
                threshold: alpha / (j - 1) as f64,
                reject: false,
            }
        })
        .collect();
    // step down from the largest j, which carries the smallest p-value
    for row in rows.iter_mut().rev() {
        if row.p_value < row.threshold {
            row.reject = true;
        } else {
            break;
        }
    }
    let mut out = stats.clone();
    out.holm = rows;
    out.alpha = Some(alpha);
    Ok(out)
}
