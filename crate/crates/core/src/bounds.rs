//! Feature-space radii for input-space perturbations.
//!
//! Every observation `x` may move to `x + sigma` with `|sigma|_p <= eta`.
//! Through the kernel map this becomes a displacement `zeta` in feature
//! space whose norm is bounded by a closed-form radius `delta(eta)`:
//!
//! * polynomial, degree 1: `delta = C eta`
//! * polynomial, degree d, `c = 0`:
//!   `delta = sum_{k=1..d} binom(d,k) |x|^(d-k) (C eta)^k`
//! * polynomial, degree d, `c > 0`: the homogeneous radius combined with
//!   `sum_{k=1..d-1} binom(d,k) c^k [sum_{j=1..d-k} binom(d-k,j) |x|^(d-k-j) (C eta)^j]^2`
//!   under a square root
//! * Gaussian RBF: `delta = sqrt(2 - 2 exp(-(C eta)^2 / (2 alpha^2)))`
//!
//! where `|x|` is the Euclidean norm of the unperturbed point and
//! `C = C(n, p)` converts the `l_p` radius into an `l_2` radius.
//!
//! [`feature_perturbation_norm`] evaluates the exact feature-space
//! displacement through kernel calls only; it is the reference the radii
//! are checked against.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::{column_mean_std, Dataset};
use crate::error::{Error, Result};
use crate::kernel::{eval_unchecked, KernelSpec};

/// Largest polynomial degree accepted by the radius formulas.
pub const MAX_DEGREE: u32 = 10;

/// Exponent of an `l_p` norm, `p` in `[1, inf]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormExponent {
    Finite(f64),
    Infinity,
}

impl NormExponent {
    pub const ONE: NormExponent = NormExponent::Finite(1.0);
    pub const TWO: NormExponent = NormExponent::Finite(2.0);

    pub fn validate(self) -> Result<Self> {
        match self {
            NormExponent::Finite(p) if !(p >= 1.0) || p.is_infinite() => Err(
                Error::InvalidParameter(format!("norm exponent must be >= 1, got {p}")),
            ),
            other => Ok(other),
        }
    }

    /// `1/p`, with `1/inf = 0`.
    pub fn reciprocal(self) -> f64 {
        match self {
            NormExponent::Finite(p) => 1.0 / p,
            NormExponent::Infinity => 0.0,
        }
    }
}

impl fmt::Display for NormExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormExponent::Finite(p) => write!(f, "{p}"),
            NormExponent::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for NormExponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "Inf" | "∞" => Ok(NormExponent::Infinity),
            other => other
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad norm exponent {other:?}")))
                .and_then(|p| NormExponent::Finite(p).validate()),
        }
    }
}

impl Serialize for NormExponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NormExponent::Finite(p) => s.serialize_f64(*p),
            NormExponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for NormExponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(p) => NormExponent::Finite(p).validate(),
            Raw::Str(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// `l_p` norm of `x`.
pub fn lp_norm(x: &[f64], p: NormExponent) -> f64 {
    match p {
        NormExponent::Infinity => x.iter().fold(0.0, |m, v| m.max(v.abs())),
        NormExponent::Finite(1.0) => x.iter().map(|v| v.abs()).sum(),
        NormExponent::Finite(2.0) => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        NormExponent::Finite(p) => {
            // scale by the largest entry to keep |v|^p in range
            let top = x.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
            if top == 0.0 {
                return 0.0;
            }
            top * x.iter().map(|v| (v.abs() / top).powf(p)).sum::<f64>().powf(1.0 / p)
        }
    }
}

/// `C(n, p)` such that `|x|_2 <= C |x|_p` for every `x` in `R^n`.
pub fn norm_constant(n: usize, p: NormExponent) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    match p.validate()? {
        NormExponent::Finite(p) if p <= 2.0 => Ok(1.0),
        NormExponent::Finite(p) => Ok((n as f64).powf((p - 2.0) / (2.0 * p))),
        NormExponent::Infinity => Ok((n as f64).sqrt()),
    }
}

fn binomial(n: u32, k: u32) -> u64 {
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * u64::from(n - i) / u64::from(i + 1);
    }
    acc
}

/// Radius for the polynomial kernel `(c + <x, x'>)^d`.
///
/// `x_norm2` is the Euclidean norm of the unperturbed observation.
pub fn delta_polynomial(
    x_norm2: f64,
    eta: f64,
    n: usize,
    p: NormExponent,
    degree: u32,
    coef: f64,
) -> Result<f64> {
    if degree == 0 || degree > MAX_DEGREE {
        return Err(Error::InvalidParameter(format!(
            "polynomial degree must lie in 1..={MAX_DEGREE}, got {degree}"
        )));
    }
    if !(x_norm2 >= 0.0 && eta >= 0.0 && coef >= 0.0) {
        return Err(Error::InvalidParameter(
            "radius arguments must be nonnegative".into(),
        ));
    }
    let r = norm_constant(n, p)? * eta;
    if r == 0.0 {
        return Ok(0.0);
    }
    if degree == 1 {
        return Ok(r);
    }
    let d = degree;
    let homogeneous: f64 = (1..=d)
        .map(|k| binomial(d, k) as f64 * x_norm2.powi((d - k) as i32) * r.powi(k as i32))
        .sum();
    if coef == 0.0 {
        return Ok(homogeneous);
    }
    let mixed: f64 = (1..d)
        .map(|k| {
            let inner: f64 = (1..=d - k)
                .map(|j| {
                    binomial(d - k, j) as f64 * x_norm2.powi((d - k - j) as i32) * r.powi(j as i32)
                })
                .sum();
            binomial(d, k) as f64 * coef.powi(k as i32) * inner * inner
        })
        .sum();
    Ok((homogeneous * homogeneous + mixed).sqrt())
}

/// Radius for the Gaussian RBF kernel; independent of the observation.
pub fn delta_rbf(eta: f64, n: usize, p: NormExponent, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be > 0, got {alpha}")));
    }
    if !(eta >= 0.0) {
        return Err(Error::InvalidParameter("eta must be nonnegative".into()));
    }
    let r = norm_constant(n, p)? * eta;
    let t = r * r / (2.0 * alpha * alpha);
    // 2 - 2 exp(-t), without cancellation for small t
    Ok((-2.0 * (-t).exp_m1()).sqrt())
}

/// Radius for one observation under `spec`.
pub fn delta_for(spec: &KernelSpec, x: &[f64], eta: f64, p: NormExponent) -> Result<f64> {
    let n = x.len();
    match *spec {
        KernelSpec::Polynomial { degree, coef } => {
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            delta_polynomial(norm, eta, n, p, degree, coef)
        }
        KernelSpec::GaussianRbf { alpha } => delta_rbf(eta, n, p, alpha),
    }
}

/// Exact feature-space norm of `phi(x + sigma) - phi(x)`, through the
/// kernel expansion `k(x+s, x+s) - 2 k(x+s, x) + k(x, x)`.
pub fn feature_perturbation_norm(spec: &KernelSpec, x: &[f64], sigma: &[f64]) -> Result<f64> {
    spec.validate()?;
    if x.len() != sigma.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: sigma.len(),
        });
    }
    let moved: Vec<f64> = x.iter().zip(sigma).map(|(a, b)| a + b).collect();
    let kmm = eval_unchecked(spec, &moved, &moved);
    let kmx = eval_unchecked(spec, &moved, x);
    let kxx = eval_unchecked(spec, x, x);
    let sq = kmm - 2.0 * kmx + kxx;
    let scale = kmm.abs().max(kmx.abs()).max(kxx.abs()).max(1.0);
    if sq < -1e-12 * scale {
        return Err(Error::KernelInconsistency(sq));
    }
    Ok(sq.max(0.0).sqrt())
}

/// Per-point input radii `eta`, their norm exponent, and the derived
/// feature-space radii `delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyConfig {
    pub p: NormExponent,
    /// Conservatism multiplier per class.
    pub rho: Vec<f64>,
    pub eta: Vec<f64>,
    /// Empty until [`derive_delta`] runs.
    pub delta: Vec<f64>,
}

impl UncertaintyConfig {
    /// No perturbation anywhere.
    pub fn none(m: usize, n_classes: usize) -> Self {
        UncertaintyConfig {
            p: NormExponent::TWO,
            rho: vec![0.0; n_classes],
            eta: vec![0.0; m],
            delta: vec![0.0; m],
        }
    }
}

/// `eta_i = rho_class(i) * max_j std_j`, the standard deviations taken over
/// the training points of that class only (population convention). A
/// class with a single member has zero spread and therefore `eta = 0`.
pub fn calibrate_eta(
    train: &Dataset,
    rho_per_class: &[f64],
    p: NormExponent,
) -> Result<UncertaintyConfig> {
    let p = p.validate()?;
    if rho_per_class.len() != train.n_classes() {
        return Err(Error::DimensionMismatch {
            expected: train.n_classes(),
            got: rho_per_class.len(),
        });
    }
    if let Some(bad) = rho_per_class.iter().find(|r| !(**r >= 0.0)) {
        return Err(Error::InvalidParameter(format!("rho must be >= 0, got {bad}")));
    }
    let mut spread = vec![0.0; train.n_classes()];
    for (k, s) in spread.iter_mut().enumerate() {
        let rows: Vec<&Vec<f64>> = train
            .features()
            .iter()
            .zip(train.labels())
            .filter(|(_, &l)| l == k)
            .map(|(r, _)| r)
            .collect();
        let (_, std) = column_mean_std(&rows);
        *s = std.into_iter().fold(0.0, f64::max);
    }
    let eta = train
        .labels()
        .iter()
        .map(|&l| rho_per_class[l] * spread[l])
        .collect();
    Ok(UncertaintyConfig {
        p,
        rho: rho_per_class.to_vec(),
        eta,
        delta: Vec::new(),
    })
}

/// Fills `delta` for the observations `rows` (the data the model sees).
pub fn derive_delta<R: AsRef<[f64]>>(
    mut cfg: UncertaintyConfig,
    spec: &KernelSpec,
    rows: &[R],
) -> Result<UncertaintyConfig> {
    if rows.len() != cfg.eta.len() {
        return Err(Error::DimensionMismatch {
            expected: cfg.eta.len(),
            got: rows.len(),
        });
    }
    spec.validate()?;
    cfg.delta = rows
        .iter()
        .zip(&cfg.eta)
        .map(|(x, &eta)| delta_for(spec, x.as_ref(), eta, cfg.p))
        .collect::<Result<_>>()?;
    Ok(cfg)
}

/// Draws a perturbation with `|sigma|_p <= eta`.
///
/// The direction is uniform in the cube `[-1, 1]^n`, rescaled to unit
/// `l_p` norm; the radius is `eta` when `on_boundary`, otherwise
/// `eta * U^(1/n)` with `U` uniform on `[0, 1)`. This is not the uniform
/// distribution on the ball, only a sampler that stays inside it.
pub fn sample_in_ball<G: Rng + ?Sized>(
    rng: &mut G,
    n: usize,
    p: NormExponent,
    eta: f64,
    on_boundary: bool,
) -> Vec<f64> {
    loop {
        let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = lp_norm(&dir, p);
        if norm < 1e-12 {
            continue;
        }
        let radius = if on_boundary {
            eta
        } else {
            eta * rng.gen::<f64>().powf(1.0 / n as f64)
        };
        return dir.into_iter().map(|v| v / norm * radius).collect();
    }
}
