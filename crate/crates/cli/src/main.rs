use std::error::Error as StdError;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rksvm::bench::stats::{friedman_from_ranks, friedman_iman_davenport, holm_test, RankStats};
use rksvm::bench::{emit_report, fit_best_nu, run_experiment, ExperimentConfig, ExperimentReport, KernelChoice, Param};
use rksvm::bounds::{calibrate_eta, delta_for, derive_delta, feature_perturbation_norm, sample_in_ball, NormExponent};
use rksvm::dataset::{fit_transform, load_csv_ignoring, load_features_csv, LabelColumn, TransformKind};
use rksvm::kernel::gram;
use rksvm::svm::{ModelFile, QNorm};

type CliResult<T> = Result<T, Box<dyn StdError>>;

#[derive(Parser)]
#[command(name = "rksvm", version, about = "Deterministic and robust kernel SVMs trained by linear programming")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on a whole CSV file and write a model file.
    Train(TrainArgs),
    /// Classify the rows of a CSV file with a trained model.
    Predict(PredictArgs),
    /// Run the repeated-holdout protocol and write JSON and CSV reports.
    Experiment(ExperimentArgs),
    /// Friedman / Iman-Davenport test followed by Holm's post-hoc test.
    Ranktest(RanktestArgs),
    /// Print feature-space radii for input perturbations.
    Bounds(BoundsArgs),
}

#[derive(Args, Clone)]
struct KernelArgs {
    /// poly, rbf, or a preset name (hom-linear ... inhom-cubic)
    #[arg(long, default_value = "rbf")]
    kernel: String,
    #[arg(long, default_value_t = 1)]
    degree: u32,
    /// Polynomial offset: a number or "auto" (largest feature std)
    #[arg(long, default_value = "0")]
    coef: Param,
    /// RBF width: a number or "auto" (largest feature std)
    #[arg(long, default_value = "auto")]
    alpha: Param,
}

impl KernelArgs {
    fn choice(&self) -> CliResult<KernelChoice> {
        Ok(match self.kernel.as_str() {
            "poly" | "polynomial" => KernelChoice::Polynomial {
                degree: self.degree,
                coef: self.coef,
            },
            "rbf" => KernelChoice::GaussianRbf { alpha: self.alpha },
            other => other.parse()?,
        })
    }
}

#[derive(Args)]
struct DataArgs {
    /// CSV file, optionally with a header row
    #[arg(long)]
    data: PathBuf,
    /// Label column: "last", a 0-based index or a header name
    #[arg(long, default_value = "last")]
    label_col: String,
    /// Header names of columns to drop, comma separated
    #[arg(long, value_delimiter = ',')]
    ignore_cols: Vec<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long, default_value = "none")]
    transform: TransformKind,
    #[arg(long, default_value = "1")]
    q: QNorm,
    /// Candidate nu values; the one with fewest training errors is kept
    #[arg(long, value_delimiter = ',', default_values_t = ExperimentConfig::default().nu_grid)]
    nu_grid: Vec<f64>,
    /// Train the robust model with this conservatism level
    #[arg(long)]
    rho: Option<f64>,
    /// Norm of the input perturbations (with --rho)
    #[arg(long, default_value = "2")]
    p: NormExponent,
    #[arg(long, default_value_t = 10_000)]
    nmax: usize,
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Label column of `data`, if it has one; accuracy is then reported
    #[arg(long)]
    label_col: Option<String>,
    #[arg(long, value_delimiter = ',')]
    ignore_cols: Vec<String>,
    /// Write predicted labels here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON file with experiment settings; the flags below override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    label_col: Option<String>,
    #[arg(long, value_delimiter = ',')]
    ignore_cols: Option<Vec<String>>,
    /// poly, rbf, presets (all seven), or preset names, comma separated
    #[arg(long, value_delimiter = ',')]
    kernel: Option<Vec<String>>,
    #[arg(long)]
    degree: Option<u32>,
    #[arg(long)]
    coef: Option<Param>,
    #[arg(long)]
    alpha: Option<Param>,
    #[arg(long)]
    q: Option<QNorm>,
    /// Run the robust sweep with these norms
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<NormExponent>>,
    /// Run the robust sweep with these conservatism levels
    #[arg(long, value_delimiter = ',')]
    rho: Option<Vec<f64>>,
    /// Run the robust sweep with the configured p list and rho grid
    #[arg(long)]
    robust: bool,
    #[arg(long, value_delimiter = ',')]
    nu_grid: Option<Vec<f64>>,
    /// none, minmax, standardize or all, comma separated
    #[arg(long, value_delimiter = ',')]
    transform: Option<Vec<String>>,
    /// Training percentages, comma separated
    #[arg(long, value_delimiter = ',')]
    beta: Option<Vec<f64>>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    nmax: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Include wall-clock times in the reports
    #[arg(long)]
    timings: bool,
    /// Output directory for <name>.json and <name>.csv
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Args)]
struct RanktestArgs {
    /// CSV of errors: header `dataset,<method>,...`, one row per dataset
    #[arg(long, conflicts_with = "ranks")]
    errors: Option<PathBuf>,
    /// Mean ranks, comma separated (needs --datasets)
    #[arg(long, value_delimiter = ',', requires = "datasets")]
    ranks: Option<Vec<f64>>,
    #[arg(long)]
    datasets: Option<usize>,
    /// Method names for --ranks, comma separated
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Also write the statistics as JSON
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    kernel: KernelArgs,
    /// Input radii, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    eta: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = vec![NormExponent::ONE, NormExponent::TWO, NormExponent::Infinity])]
    p: Vec<NormExponent>,
    /// Input dimension
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Euclidean norm of the observation (polynomial kernels only)
    #[arg(long, default_value_t = 1.0)]
    x_norm: f64,
    /// Also sample this many perturbations per cell and report the
    /// largest observed fraction of the radius
    #[arg(long, default_value_t = 0)]
    check: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn label_column(s: &str) -> LabelColumn {
    s.parse().unwrap_or_else(|e| match e {})
}

fn train(a: TrainArgs) -> CliResult<()> {
    let raw = load_csv_ignoring(&a.data.data, &label_column(&a.data.label_col), &a.data.ignore_cols)?;
    let (data, params) = fit_transform(&raw, a.transform);
    let spec = a.kernel.choice()?.resolve(&data)?;
    let delta = match a.rho {
        None => None,
        Some(rho) => {
            let unc = calibrate_eta(&data, &vec![rho; data.n_classes()], a.p)?;
            Some(derive_delta(unc, &spec, data.features())?.delta)
        }
    };
    let g = gram(&spec, data.features())?;
    let (errors, nu, model) = fit_best_nu(&data, &g, &a.nu_grid, a.q, delta.as_deref(), a.nmax)?;
    let file = ModelFile {
        class_ids: data.class_ids().to_vec(),
        transform: params,
        model,
    };
    fs::write(&a.out, file.to_json()?)?;
    println!(
        "trained {} on {} rows, {} classes; nu = {nu}, training errors {errors}; wrote {}",
        spec.label(),
        data.len(),
        data.n_classes(),
        a.out.display()
    );
    Ok(())
}

fn predict(a: PredictArgs) -> CliResult<()> {
    let model = ModelFile::from_json(&fs::read_to_string(&a.model)?)?;
    let (rows, truth): (Vec<Vec<f64>>, Option<Vec<String>>) = match &a.label_col {
        Some(col) => {
            let d = load_csv_ignoring(&a.data, &label_column(col), &a.ignore_cols)?;
            let truth = d.labels().iter().map(|&l| d.class_ids()[l].clone()).collect();
            (d.features().to_vec(), Some(truth))
        }
        None => (load_features_csv(&a.data, &a.ignore_cols)?, None),
    };
    let mut predicted = Vec::with_capacity(rows.len());
    for row in &rows {
        predicted.push(model.predict_label(row)?.to_string());
    }
    let text: String = predicted.iter().map(|p| format!("{p}\n")).collect();
    match &a.out {
        Some(path) => fs::write(path, &text)?,
        None => print!("{text}"),
    }
    if let Some(truth) = truth {
        let wrong = truth.iter().zip(&predicted).filter(|(t, p)| t != p).count();
        eprintln!(
            "{wrong} of {} misclassified ({:.2}% error)",
            truth.len(),
            100.0 * wrong as f64 / truth.len().max(1) as f64
        );
    }
    Ok(())
}

fn experiment_config(a: &ExperimentArgs) -> CliResult<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::from_json(&fs::read_to_string(path)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = &a.data {
        cfg.dataset = v.clone();
    }
    if let Some(v) = &a.name {
        cfg.name = Some(v.clone());
    }
    if let Some(v) = &a.label_col {
        cfg.label_column = v.clone();
    }
    if let Some(v) = &a.ignore_cols {
        cfg.ignore_columns = v.clone();
    }
    if let Some(names) = &a.kernel {
        let base = KernelArgs {
            kernel: String::new(),
            degree: a.degree.unwrap_or(1),
            coef: a.coef.unwrap_or(Param::Value(0.0)),
            alpha: a.alpha.unwrap_or(Param::Auto),
        };
        let mut kernels = Vec::new();
        for name in names {
            if name == "presets" || name == "all" {
                kernels.extend(KernelChoice::presets());
            } else {
                kernels.push(KernelArgs { kernel: name.clone(), ..base.clone() }.choice()?);
            }
        }
        cfg.kernels = kernels;
    } else if a.degree.is_some() || a.coef.is_some() || a.alpha.is_some() {
        return Err("--degree, --coef and --alpha need --kernel".into());
    }
    if let Some(v) = a.q {
        cfg.q_norm = v;
    }
    if let Some(v) = &a.p {
        cfg.p_list = v.clone();
        cfg.robust = true;
    }
    if let Some(v) = &a.rho {
        cfg.rho_grid = v.clone();
        cfg.robust = true;
    }
    if a.robust {
        cfg.robust = true;
    }
    if let Some(v) = &a.nu_grid {
        cfg.nu_grid = v.clone();
    }
    if let Some(names) = &a.transform {
        let mut transforms = Vec::new();
        for name in names {
            if name == "all" {
                transforms.extend([TransformKind::None, TransformKind::MinMax, TransformKind::Standardize]);
            } else {
                transforms.push(name.parse()?);
            }
        }
        cfg.transforms = transforms;
    }
    if let Some(v) = &a.beta {
        cfg.betas = v.clone();
    }
    if let Some(v) = a.repeats {
        cfg.repeats = v;
    }
    if let Some(v) = a.nmax {
        cfg.n_max = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if a.timings {
        cfg.record_timings = true;
    }
    if cfg.dataset.as_os_str().is_empty() {
        return Err("no dataset given (--data or \"dataset\" in --config)".into());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_report(r: &ExperimentReport) {
    println!("{}: m = {}, n = {}, classes {:?}", r.name, r.m, r.n, r.class_ids);
    for h in &r.holdouts {
        println!("beta = {}%", h.beta);
        for (k, c) in h.deterministic.iter().enumerate() {
            let mark = if k == h.best { "*" } else { " " };
            println!(
                " {mark} {:<12} {:<22} {:>7.3}% +- {:.3}",
                c.transform.to_string(),
                c.kernel_label,
                100.0 * c.summary.mean,
                100.0 * c.summary.std
            );
        }
        if let Some(rb) = &h.robust {
            for b in &rb.by_p {
                println!(
                    "   robust p = {:<4} best rho = {:<8e} {:>7.3}% +- {:.3}",
                    b.p.to_string(),
                    b.best_rho,
                    100.0 * b.best.mean,
                    100.0 * b.best.std
                );
            }
            println!(
                "   best robust {:.3}%, improvement ratio {:.3}",
                100.0 * rb.best_error,
                rb.improvement_ratio
            );
        }
    }
}

fn experiment(a: ExperimentArgs) -> CliResult<()> {
    let cfg = experiment_config(&a)?;
    let report = run_experiment(&cfg)?;
    let stem = report.name.clone();
    emit_report(&report, &a.out, &stem)?;
    print_report(&report);
    println!("wrote {}", a.out.join(format!("{stem}.{{json,csv}}")).display());
    Ok(())
}

fn read_error_table(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let methods: Vec<String> = reader.headers()?.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .skip(1)
            .map(|c| c.parse::<f64>().map_err(|_| format!("bad error value {c:?} in {}", path.display())))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok((methods, rows))
}

fn print_ranks(stats: &RankStats, methods: &[String]) {
    println!("datasets {}, methods {}", stats.n_datasets, stats.n_methods);
    for (m, r) in methods.iter().zip(&stats.mean_ranks) {
        println!("  {m:<20} mean rank {r:.3}");
    }
    println!(
        "Friedman chi2 = {:.4}, Iman-Davenport F = {:.4}, p = {:.4}",
        stats.chi2_f, stats.f_f, stats.p_value
    );
    if let Some(alpha) = stats.alpha {
        println!("Holm (alpha = {alpha}), control: {}", methods[best_method(stats)]);
        for row in &stats.holm {
            println!(
                "  {:<20} z = {:>7.3}  p = {:.4}  alpha/(j-1) = {:.4}  {}",
                methods[row.method],
                row.z,
                row.p_value,
                row.threshold,
                if row.reject { "reject" } else { "not reject" }
            );
        }
    }
}

fn best_method(stats: &RankStats) -> usize {
    (0..stats.mean_ranks.len())
        .min_by(|&a, &b| stats.mean_ranks[a].total_cmp(&stats.mean_ranks[b]))
        .unwrap_or(0)
}

fn ranktest(a: RanktestArgs) -> CliResult<()> {
    let (methods, stats) = match (&a.errors, &a.ranks) {
        (Some(path), _) => {
            let (methods, rows) = read_error_table(path)?;
            (methods, friedman_iman_davenport(&rows)?)
        }
        (None, Some(ranks)) => {
            let methods = a
                .methods
                .clone()
                .unwrap_or_else(|| (1..=ranks.len()).map(|k| format!("method {k}")).collect());
            if methods.len() != ranks.len() {
                return Err("--methods and --ranks differ in length".into());
            }
            (methods, friedman_from_ranks(ranks, a.datasets.unwrap_or(0))?)
        }
        (None, None) => return Err("give --errors or --ranks".into()),
    };
    let stats = holm_test(&stats, a.alpha)?;
    print_ranks(&stats, &methods);
    if let Some(out) = &a.out {
        fs::write(out, serde_json::to_string_pretty(&stats)?)?;
    }
    Ok(())
}

fn bounds(a: BoundsArgs) -> CliResult<()> {
    let spec = match a.kernel.choice()? {
        KernelChoice::Polynomial { degree, coef: Param::Value(coef) } => {
            rksvm::kernel::KernelSpec::Polynomial { degree, coef }
        }
        KernelChoice::GaussianRbf { alpha: Param::Value(alpha) } => rksvm::kernel::KernelSpec::GaussianRbf { alpha },
        _ => return Err("bounds needs numeric --coef / --alpha (\"auto\" depends on data)".into()),
    };
    spec.validate()?;
    if a.n == 0 {
        return Err("--n must be >= 1".into());
    }
    // an observation with the requested Euclidean norm, along the diagonal
    let x = vec![a.x_norm / (a.n as f64).sqrt(); a.n];
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    println!("{}  n = {}  |x|_2 = {}", spec.label(), a.n, a.x_norm);
    for &p in &a.p {
        for &eta in &a.eta {
            let delta = delta_for(&spec, &x, eta, p)?;
            let mut line = format!("  p = {:<4} eta = {eta:<10} delta = {delta:.6e}", p.to_string());
            if a.check > 0 {
                let mut worst = 0.0f64;
                for k in 0..a.check {
                    let s = sample_in_ball(&mut rng, a.n, p, eta, k % 2 == 0);
                    worst = worst.max(feature_perturbation_norm(&spec, &x, &s)?);
                }
                let frac = if delta > 0.0 { worst / delta } else { 0.0 };
                line.push_str(&format!("  sampled max {worst:.6e} ({:.1}% of delta)", 100.0 * frac));
            }
            println!("{line}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Experiment(a) => experiment(a),
        Command::Ranktest(a) => ranktest(a),
        Command::Bounds(a) => bounds(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // library errors already carry their cause in the message
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
