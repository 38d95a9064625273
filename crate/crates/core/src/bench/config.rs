//! Experiment configuration, readable from JSON with every field optional.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bounds::NormExponent;
use crate::dataset::{Dataset, TransformKind};
use crate::error::{Error, Result};
use crate::kernel::{default_alpha, KernelSpec};
use crate::svm::QNorm;

/// A kernel parameter fixed in the config or derived from the training
/// split (the largest per-feature standard deviation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Param {
    Auto,
    Value(f64),
}

impl Param {
    fn resolve(self, train: &Dataset) -> Result<f64> {
        match self {
            Param::Auto => default_alpha(train),
            Param::Value(v) => Ok(v),
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Param::Auto => f.write_str("auto"),
            Param::Value(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("auto") {
            return Ok(Param::Auto);
        }
        s.trim()
            .parse::<f64>()
            .map(Param::Value)
            .map_err(|_| Error::InvalidParameter(format!("expected a number or \"auto\", got {s:?}")))
    }
}

impl Serialize for Param {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Param::Auto => s.serialize_str("auto"),
            Param::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Param {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Param::Value(v)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Kernel whose data-dependent parameters are resolved per training split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelChoice {
    Polynomial { degree: u32, coef: Param },
    GaussianRbf { alpha: Param },
}

impl KernelChoice {
    /// The seven kernels of the protocol: homogeneous and inhomogeneous
    /// linear, quadratic and cubic, then the Gaussian RBF.
    pub fn presets() -> Vec<KernelChoice> {
        let mut out = Vec::with_capacity(7);
        for coef in [Param::Value(0.0), Param::Auto] {
            for degree in 1..=3 {
                out.push(KernelChoice::Polynomial { degree, coef });
            }
        }
        out.push(KernelChoice::GaussianRbf { alpha: Param::Auto });
        out
    }

    pub fn resolve(&self, train: &Dataset) -> Result<KernelSpec> {
        let spec = match *self {
            KernelChoice::Polynomial { degree, coef } => KernelSpec::Polynomial {
                degree,
                coef: coef.resolve(train)?,
            },
            KernelChoice::GaussianRbf { alpha } => KernelSpec::GaussianRbf {
                alpha: alpha.resolve(train)?,
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn label(&self) -> String {
        match *self {
            KernelChoice::GaussianRbf { alpha: Param::Auto } => "gaussian rbf".to_string(),
            KernelChoice::GaussianRbf { alpha } => format!("gaussian rbf (alpha={alpha})"),
            KernelChoice::Polynomial { degree, coef } => {
                let base = KernelSpec::Polynomial {
                    degree,
                    coef: if coef == Param::Value(0.0) { 0.0 } else { 1.0 },
                }
                .label();
                match coef {
                    Param::Value(c) if c != 0.0 => format!("{base} (c={c})"),
                    _ => base,
                }
            }
        }
    }
}

/// Preset names: `hom-linear`, `hom-quadratic`, `hom-cubic`,
/// `inhom-linear`, `inhom-quadratic`, `inhom-cubic`, `rbf`.
impl FromStr for KernelChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['_', ' ', '.'], "-");
        let (coef, rest) = if let Some(r) = key.strip_prefix("hom-") {
            (Param::Value(0.0), r)
        } else if let Some(r) = key.strip_prefix("inhom-") {
            (Param::Auto, r)
        } else if matches!(key.as_str(), "rbf" | "gaussian-rbf" | "gaussian") {
            return Ok(KernelChoice::GaussianRbf { alpha: Param::Auto });
        } else {
            return Err(Error::InvalidParameter(format!("unknown kernel preset {s:?}")));
        };
        let degree = match rest {
            "linear" => 1,
            "quadratic" => 2,
            "cubic" => 3,
            _ => return Err(Error::InvalidParameter(format!("unknown kernel preset {s:?}"))),
        };
        Ok(KernelChoice::Polynomial { degree, coef })
    }
}

/// `count` values spaced evenly in log10 between `lo` and `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|k| 10f64.powf(a + (b - a) * k as f64 / (count - 1) as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Name used in reports; defaults to the file stem of `dataset`.
    pub name: Option<String>,
    pub dataset: PathBuf,
    /// `last`, a 0-based index, or a header name.
    pub label_column: String,
    /// Header names of non-feature columns to drop (e.g. record ids).
    pub ignore_columns: Vec<String>,
    pub transforms: Vec<TransformKind>,
    pub kernels: Vec<KernelChoice>,
    pub q_norm: QNorm,
    pub betas: Vec<f64>,
    pub repeats: usize,
    pub nu_grid: Vec<f64>,
    /// Run the robust sweep on the best deterministic configuration.
    pub robust: bool,
    pub rho_grid: Vec<f64>,
    pub p_list: Vec<NormExponent>,
    pub n_max: usize,
    pub seed: u64,
    /// Include wall-clock times. Off by default so reports are
    /// byte-for-byte reproducible.
    pub record_timings: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: None,
            dataset: PathBuf::new(),
            label_column: "last".to_string(),
            ignore_columns: Vec::new(),
            transforms: vec![TransformKind::None],
            kernels: vec![KernelChoice::GaussianRbf { alpha: Param::Auto }],
            q_norm: QNorm::One,
            betas: vec![75.0, 50.0, 25.0],
            repeats: 96,
            nu_grid: logspace(1e-3, 1.0, 5),
            robust: false,
            rho_grid: logspace(1e-7, 1e-1, 7),
            p_list: vec![NormExponent::ONE, NormExponent::TWO, NormExponent::Infinity],
            n_max: 10_000,
            seed: 0,
            record_timings: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if self.transforms.is_empty() || self.kernels.is_empty() || self.betas.is_empty() {
            return bad("transforms, kernels and betas must be nonempty");
        }
        if self.nu_grid.is_empty() {
            return bad("nu grid must be nonempty");
        }
        if self.nu_grid.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("nu values must be finite and >= 0");
        }
        if self.betas.iter().any(|b| !(*b > 0.0 && *b < 100.0)) {
            return bad("beta values must lie in (0, 100)");
        }
        if self.repeats == 0 {
            return bad("repeats must be >= 1");
        }
        if self.n_max == 0 {
            return bad("n_max must be >= 1");
        }
        if self.robust {
            if self.rho_grid.is_empty() || self.p_list.is_empty() {
                return bad("robust runs need a nonempty rho grid and p list");
            }
            if self.rho_grid.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return bad("rho values must be finite and >= 0");
            }
            for p in &self.p_list {
                p.validate()?;
            }
        }
        Ok(())
    }

    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.dataset
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".to_string())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grids() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.nu_grid.len(), 5);
        assert!((cfg.nu_grid[0] - 1e-3).abs() < 1e-18 && (cfg.nu_grid[4] - 1.0).abs() < 1e-15);
        assert_eq!(cfg.rho_grid.len(), 7);
        assert!((cfg.rho_grid[3] - 1e-4).abs() < 1e-18);
        assert_eq!(cfg.repeats, 96);
        assert_eq!(cfg.n_max, 10_000);
    }

    #[test]
    fn partial_json_keeps_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"dataset": "x.csv", "kernels": [{"family": "polynomial", "degree": 2, "coef": "auto"}], "p_list": [2, "inf"]}"#,
        )
        .unwrap();
        assert_eq!(cfg.repeats, 96);
        assert_eq!(cfg.kernels[0], KernelChoice::Polynomial { degree: 2, coef: Param::Auto });
        assert_eq!(cfg.p_list, vec![NormExponent::TWO, NormExponent::Infinity]);
        let back = ExperimentConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn presets() {
        let all = KernelChoice::presets();
        assert_eq!(all.len(), 7);
        assert_eq!("hom-linear".parse::<KernelChoice>().unwrap(), all[0]);
        assert_eq!("inhom-cubic".parse::<KernelChoice>().unwrap(), all[5]);
        assert_eq!("rbf".parse::<KernelChoice>().unwrap(), all[6]);
        assert_eq!(all[4].label(), "inhom. quadratic");
    }
}
