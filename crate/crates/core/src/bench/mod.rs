//! Repeated-holdout experiments, robust sweeps and rank statistics.
//!
//! For every repeat: split proportionally, fit the transform on the
//! training part, resolve the kernel on it, train one model per `nu` and
//! keep the one with the fewest training errors (smallest `nu` on ties),
//! then count test errors. The robust sweep reruns the same procedure on
//! the best deterministic (transform, kernel) pair for every `p` and
//! `rho`, with `eta` calibrated per class on the training part.

pub mod config;
pub mod report;
pub mod stats;

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bounds::{calibrate_eta, derive_delta, NormExponent};
use crate::dataset::{
    apply_transform, fit_transform, load_csv_ignoring, LabelColumn, proportional_split, Dataset, SplitSpec,
    TransformKind,
};
use crate::error::{Error, Result};
use crate::kernel::{gram, GramMatrix, KernelSpec};
use crate::svm::{train_model_with_gram, Model, QNorm};

pub use config::{logspace, ExperimentConfig, KernelChoice, Param};
pub use report::{emit_report, improvement_ratio, report_csv};
pub use stats::{friedman_from_ranks, friedman_iman_davenport, holm_test, RankStats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub train_seconds: f64,
    pub test_seconds: f64,
}

/// One repeat of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub repeat: u64,
    pub kernel: KernelSpec,
    pub nu: f64,
    pub train_size: usize,
    pub train_errors: usize,
    pub test_size: usize,
    pub test_errors: usize,
    /// Misclassified share of the test partition.
    pub error: f64,
    /// Misclassified share of each class's test points.
    pub class_errors: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

/// Mean and population standard deviation over the repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub mean: f64,
    pub std: f64,
    pub class_mean: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_train_seconds: Option<f64>,
}

impl ErrorSummary {
    pub fn of(runs: &[RunResult]) -> ErrorSummary {
        let k = runs.len().max(1) as f64;
        let mean = runs.iter().map(|r| r.error).sum::<f64>() / k;
        let var = runs.iter().map(|r| (r.error - mean).powi(2)).sum::<f64>() / k;
        let n_classes = runs.first().map_or(0, |r| r.class_errors.len());
        let class_mean = (0..n_classes)
            .map(|c| runs.iter().map(|r| r.class_errors[c]).sum::<f64>() / k)
            .collect();
        let mean_train_seconds = runs
            .iter()
            .map(|r| r.timing.as_ref().map(|t| t.train_seconds))
            .collect::<Option<Vec<f64>>>()
            .map(|t| t.iter().sum::<f64>() / k);
        ErrorSummary {
            mean,
            std: var.sqrt(),
            class_mean,
            mean_train_seconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigResult {
    pub transform: TransformKind,
    pub kernel: KernelChoice,
    pub kernel_label: String,
    pub summary: ErrorSummary,
    pub runs: Vec<RunResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoResult {
    pub rho: f64,
    pub summary: ErrorSummary,
    pub runs: Vec<RunResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustByP {
    pub p: NormExponent,
    /// `rho` with the lowest mean test error (first on ties).
    pub best_rho: f64,
    pub best: ErrorSummary,
    pub sweeps: Vec<RhoResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustResult {
    pub transform: TransformKind,
    pub kernel: KernelChoice,
    /// Lowest mean error over every `p` and `rho`.
    pub best_error: f64,
    /// `(deterministic - best robust) / deterministic`.
    pub improvement_ratio: f64,
    pub by_p: Vec<RobustByP>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutResult {
    pub beta: f64,
    pub deterministic: Vec<ConfigResult>,
    /// Index into `deterministic` of the lowest mean error (first on ties).
    pub best: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robust: Option<RobustResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub m: usize,
    pub n: usize,
    pub class_ids: Vec<String>,
    pub class_counts: Vec<usize>,
    pub config: ExperimentConfig,
    pub holdouts: Vec<HoldoutResult>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Robust setting of a single run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustSetting {
    pub p: NormExponent,
    pub rho: f64,
}

/// Trains one model per `nu` and keeps the one with the fewest training
/// errors, the smallest `nu` on ties. Returns `(training errors, nu, model)`.
pub fn fit_best_nu(
    train: &Dataset,
    g: &GramMatrix,
    nu_grid: &[f64],
    q: QNorm,
    delta: Option<&[f64]>,
    n_max: usize,
) -> Result<(usize, f64, Model)> {
    let mut best: Option<(usize, f64, Model)> = None;
    for &nu in nu_grid {
        let model = train_model_with_gram(train, g, nu, q, delta, n_max)?;
        let errs = model.count_errors(train)?;
        let better = match &best {
            None => true,
            Some((e, n, _)) => errs < *e || (errs == *e && nu < *n),
        };
        if better {
            best = Some((errs, nu, model));
        }
    }
    best.ok_or_else(|| Error::InvalidParameter("nu grid must be nonempty".into()))
}

/// One repeat: split, transform, grid-search `nu`, test.
pub fn run_repeat(
    data: &Dataset,
    cfg: &ExperimentConfig,
    beta: f64,
    transform: TransformKind,
    kernel: &KernelChoice,
    robust: Option<RobustSetting>,
    repeat: u64,
) -> Result<RunResult> {
    let inner = || -> Result<RunResult> {
        let split = SplitSpec {
            beta_percent: beta,
            seed: cfg.seed,
            repeats: cfg.repeats,
        };
        let (train_raw, test_raw) = proportional_split(data, &split, repeat)?;
        let started = Instant::now();
        let (train, params) = fit_transform(&train_raw, transform);
        let test = apply_transform(&test_raw, &params)?;
        let spec = kernel.resolve(&train)?;
        let g = gram(&spec, train.features())?;
        let delta = match robust {
            None => None,
            Some(RobustSetting { p, rho }) => {
                let unc = calibrate_eta(&train, &vec![rho; train.n_classes()], p)?;
                Some(derive_delta(unc, &spec, train.features())?.delta)
            }
        };

        let (train_errors, nu, model) =
            fit_best_nu(&train, &g, &cfg.nu_grid, cfg.q_norm, delta.as_deref(), cfg.n_max)?;
        let train_seconds = started.elapsed().as_secs_f64();

        let started = Instant::now();
        let mut wrong = vec![0usize; test.n_classes()];
        for (x, &y) in test.features().iter().zip(test.labels()) {
            if model.predict_index(x)? != y {
                wrong[y] += 1;
            }
        }
        let test_seconds = started.elapsed().as_secs_f64();
        let test_errors: usize = wrong.iter().sum();
        let class_errors = wrong
            .iter()
            .zip(test.class_counts())
            .map(|(&w, c)| if c == 0 { 0.0 } else { w as f64 / c as f64 })
            .collect();
        Ok(RunResult {
            repeat,
            kernel: spec,
            nu,
            train_size: train.len(),
            train_errors,
            test_size: test.len(),
            test_errors,
            error: test_errors as f64 / test.len() as f64,
            class_errors,
            timing: cfg.record_timings.then_some(Timing {
                train_seconds,
                test_seconds,
            }),
        })
    };
    inner().map_err(|e| Error::Repeat {
        seed: cfg.seed,
        repeat,
        source: Box::new(e),
    })
}

fn run_all(
    data: &Dataset,
    cfg: &ExperimentConfig,
    beta: f64,
    transform: TransformKind,
    kernel: &KernelChoice,
    robust: Option<RobustSetting>,
) -> Result<Vec<RunResult>> {
    (0..cfg.repeats as u64)
        .map(|r| run_repeat(data, cfg, beta, transform, kernel, robust, r))
        .collect()
}

fn argmin_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::INFINITY;
    for (i, v) in values.enumerate() {
        if v < best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Runs the protocol on an already loaded dataset.
pub fn run_on_dataset(data: &Dataset, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut holdouts = Vec::with_capacity(cfg.betas.len());
    for &beta in &cfg.betas {
        let mut deterministic = Vec::new();
        for &transform in &cfg.transforms {
            for kernel in &cfg.kernels {
                let runs = run_all(data, cfg, beta, transform, kernel, None)?;
                deterministic.push(ConfigResult {
                    transform,
                    kernel: *kernel,
                    kernel_label: kernel.label(),
                    summary: ErrorSummary::of(&runs),
                    runs,
                });
            }
        }
        let best = argmin_first(deterministic.iter().map(|c| c.summary.mean));
        let robust = if cfg.robust {
            let chosen = &deterministic[best];
            let mut by_p = Vec::with_capacity(cfg.p_list.len());
            for &p in &cfg.p_list {
                let mut sweeps = Vec::with_capacity(cfg.rho_grid.len());
                for &rho in &cfg.rho_grid {
                    let setting = Some(RobustSetting { p, rho });
                    let runs = run_all(data, cfg, beta, chosen.transform, &chosen.kernel, setting)?;
                    sweeps.push(RhoResult {
                        rho,
                        summary: ErrorSummary::of(&runs),
                        runs,
                    });
                }
                let k = argmin_first(sweeps.iter().map(|s| s.summary.mean));
                by_p.push(RobustByP {
                    p,
                    best_rho: sweeps[k].rho,
                    best: sweeps[k].summary.clone(),
                    sweeps,
                });
            }
            let best_error = by_p.iter().map(|b| b.best.mean).fold(f64::INFINITY, f64::min);
            Some(RobustResult {
                transform: chosen.transform,
                kernel: chosen.kernel,
                best_error,
                improvement_ratio: improvement_ratio(chosen.summary.mean, best_error),
                by_p,
            })
        } else {
            None
        };
        holdouts.push(HoldoutResult {
            beta,
            deterministic,
            best,
            robust,
        });
    }
    Ok(ExperimentReport {
        name: cfg.display_name(),
        m: data.len(),
        n: data.n_features(),
        class_ids: data.class_ids().to_vec(),
        class_counts: data.class_counts(),
        config: cfg.clone(),
        holdouts,
    })
}

/// Loads `cfg.dataset` and runs the protocol.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let data = load_dataset(cfg)?;
    run_on_dataset(&data, cfg)
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let label: LabelColumn = cfg.label_column.parse().unwrap_or_else(|e| match e {});
    load_csv_ignoring(Path::new(&cfg.dataset), &label, &cfg.ignore_columns)
}
