use rksvm::bench::stats::{friedman_from_ranks, friedman_iman_davenport, holm_test};
use rksvm::bounds::{delta_for, derive_delta, NormExponent, UncertaintyConfig};
use rksvm::dataset::Dataset;
use rksvm::kernel::{default_alpha, KernelSpec};
use rksvm::svm::{train_binary, training_errors, QNorm};
use serde::{Deserialize, Serialize};

#[derive(Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    /// `true` for the positive class.
    pub positive: bool,
}

#[derive(Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelRequest {
    Polynomial { degree: u32, coef: f64 },
    /// `alpha` omitted means the largest feature standard deviation.
    GaussianRbf { alpha: Option<f64> },
}

#[derive(Deserialize)]
pub struct SurfaceRequest {
    pub points: Vec<Point>,
    pub kernel: KernelRequest,
    pub nu: f64,
    #[serde(default)]
    pub q_inf: bool,
    /// Input radius applied to every point; 0 trains the deterministic model.
    #[serde(default)]
    pub eta: f64,
    #[serde(default = "default_p")]
    pub p: NormExponent,
    /// Bounding box `[xmin, xmax, ymin, ymax]` of the grid.
    pub extent: [f64; 4],
    pub resolution: usize,
}

fn default_p() -> NormExponent {
    NormExponent::TWO
}

#[derive(Serialize)]
pub struct SurfaceResponse {
    /// Row-major, `resolution` rows from `ymin` upward.
    pub values: Vec<f64>,
    pub resolution: usize,
    pub support: Vec<usize>,
    pub training_errors: usize,
    pub b: f64,
    pub gamma: f64,
    pub kernel: String,
}

pub fn decision_surface(request: &str) -> Result<String, String> {
    let req: SurfaceRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    if !(2..=200).contains(&req.resolution) {
        return Err("resolution must lie in 2..=200".into());
    }
    let features: Vec<Vec<f64>> = req.points.iter().map(|p| vec![p.x, p.y]).collect();
    let labels: Vec<&str> = req.points.iter().map(|p| if p.positive { "+" } else { "-" }).collect();
    let data = Dataset::from_labels(features, &labels).map_err(|e| e.to_string())?;
    let spec = match req.kernel {
        KernelRequest::Polynomial { degree, coef } => KernelSpec::Polynomial { degree, coef },
        KernelRequest::GaussianRbf { alpha } => KernelSpec::GaussianRbf {
            alpha: match alpha {
                Some(a) => a,
                None => default_alpha(&data).map_err(|e| e.to_string())?,
            },
        },
    };
    let unc = UncertaintyConfig {
        p: req.p,
        rho: vec![1.0; data.n_classes()],
        eta: vec![req.eta; data.len()],
        delta: Vec::new(),
    };
    let delta = derive_delta(unc, &spec, data.features()).map_err(|e| e.to_string())?.delta;
    let q = if req.q_inf { QNorm::Infinity } else { QNorm::One };
    let clf = train_binary(&data, &spec, req.nu, q, &delta, 1000).map_err(|e| e.to_string())?;

    // decision values are for the "+" class; flip when "-" was made positive
    let sign = if data.class_ids()[data.positive_class()] == "+" { 1.0 } else { -1.0 };
    let [x0, x1, y0, y1] = req.extent;
    let r = req.resolution;
    let mut values = Vec::with_capacity(r * r);
    for i in 0..r {
        let y = y0 + (y1 - y0) * i as f64 / (r - 1) as f64;
        for j in 0..r {
            let x = x0 + (x1 - x0) * j as f64 / (r - 1) as f64;
            values.push(sign * clf.decision_value(&[x, y]).map_err(|e| e.to_string())?);
        }
    }
    let resp = SurfaceResponse {
        values,
        resolution: r,
        support: clf.support_indices(),
        training_errors: training_errors(&clf),
        b: clf.b,
        gamma: clf.gamma,
        kernel: spec.label(),
    };
    serde_json::to_string(&resp).map_err(|e| e.to_string())
}

#[derive(Deserialize)]
pub struct CurvesRequest {
    pub kernel: KernelSpec,
    pub n: usize,
    pub x_norm: f64,
    pub eta_max: f64,
    pub steps: usize,
}

#[derive(Serialize)]
pub struct Curve {
    pub p: String,
    pub delta: Vec<f64>,
}

#[derive(Serialize)]
pub struct CurvesResponse {
    pub eta: Vec<f64>,
    pub curves: Vec<Curve>,
}

pub fn delta_curves(request: &str) -> Result<String, String> {
    let req: CurvesRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    if req.n == 0 || !(1..=2000).contains(&req.steps) || !(req.eta_max > 0.0) {
        return Err("need n >= 1, 1 <= steps <= 2000 and eta_max > 0".into());
    }
    let x = vec![req.x_norm / (req.n as f64).sqrt(); req.n];
    let eta: Vec<f64> = (0..=req.steps).map(|k| req.eta_max * k as f64 / req.steps as f64).collect();
    let mut curves = Vec::new();
    for p in [NormExponent::ONE, NormExponent::TWO, NormExponent::Infinity] {
        let delta = eta
            .iter()
            .map(|&e| delta_for(&req.kernel, &x, e, p))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        curves.push(Curve { p: p.to_string(), delta });
    }
    serde_json::to_string(&CurvesResponse { eta, curves }).map_err(|e| e.to_string())
}

#[derive(Deserialize)]
#[serde(untagged)]
pub enum RankRequest {
    Errors { errors: Vec<Vec<f64>>, alpha: f64 },
    Ranks { ranks: Vec<f64>, datasets: usize, alpha: f64 },
}

pub fn rank_test(request: &str) -> Result<String, String> {
    let req: RankRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let (stats, alpha) = match req {
        RankRequest::Errors { errors, alpha } => (friedman_iman_davenport(&errors), alpha),
        RankRequest::Ranks { ranks, datasets, alpha } => (friedman_from_ranks(&ranks, datasets), alpha),
    };
    let stats = stats.and_then(|s| holm_test(&s, alpha)).map_err(|e| e.to_string())?;
    serde_json::to_string(&stats).map_err(|e| e.to_string())
}
