//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion that could be evaluated failed.

mod common;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rksvm::bench::stats::{friedman_from_ranks, holm_test};
use rksvm::bench::{report::emit_report, run_experiment, ExperimentConfig, KernelChoice};
use rksvm::bounds::{delta_for, delta_rbf, feature_perturbation_norm, lp_norm, sample_in_ball, NormExponent};
use rksvm::dataset::{Dataset, TransformKind};
use rksvm::kernel::{default_alpha, gram, KernelSpec};
use rksvm::lp::{solve_lp, LpProblem};
use rksvm::svm::{
    assemble_deterministic_lp, assemble_robust_lp, train_binary_deterministic, train_with_gram,
    training_errors, Formulation, QNorm,
};

enum Verdict {
    Pass(String),
    Fail(String),
    /// Could not be evaluated here; reported as FAIL but not counted in
    /// the exit status.
    Unavailable(String),
}

const P_LIST: [NormExponent; 3] = [NormExponent::ONE, NormExponent::TWO, NormExponent::Infinity];

/// Exact `|phi(x + s) - phi(x)|` from the kernel definitions.
fn oracle_perturbation(spec: &KernelSpec, x: &[f64], s: &[f64]) -> f64 {
    let moved: Vec<f64> = x.iter().zip(s).map(|(a, b)| a + b).collect();
    let k = |a: &[f64], b: &[f64]| match *spec {
        KernelSpec::Polynomial { degree, coef } => common::poly_kernel(a, b, degree, coef),
        KernelSpec::GaussianRbf { alpha } => common::rbf_kernel(a, b, alpha),
    };
    (k(&moved, &moved) - 2.0 * k(&moved, x) + k(x, x)).max(0.0).sqrt()
}

fn bound_soundness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut samples, mut violations, mut mismatch) = (0usize, 0usize, 0.0f64);
    let mut configs = 0;
    for n in [2usize, 5, 20] {
        let rows: Vec<Vec<f64>> = (0..30).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let labels: Vec<&str> = (0..30).map(|i| if i % 2 == 0 { "a" } else { "b" }).collect();
        let data = Dataset::from_labels(rows, &labels).unwrap();
        let alpha = default_alpha(&data).unwrap();
        let mut kernels = Vec::new();
        for coef in [0.0, alpha] {
            for degree in 1..=3 {
                kernels.push(KernelSpec::Polynomial { degree, coef });
            }
        }
        kernels.push(KernelSpec::GaussianRbf { alpha });
        for spec in &kernels {
            for p in P_LIST {
                configs += 1;
                for k in 0..1000 {
                    let x = &data.features()[k % 30];
                    let eta = rng.gen_range(0.0..0.5);
                    let s = sample_in_ball(&mut rng, n, p, eta, k % 4 == 0);
                    if lp_norm(&s, p) > eta * (1.0 + 1e-12) {
                        return Verdict::Fail(format!("sampler left the ball at p={p}"));
                    }
                    let delta = delta_for(spec, x, eta, p).unwrap();
                    let exact = oracle_perturbation(spec, x, &s);
                    let lib = feature_perturbation_norm(spec, x, &s).unwrap();
                    mismatch = mismatch.max((exact - lib).abs());
                    if exact > delta + 1e-9 {
                        violations += 1;
                    }
                    samples += 1;
                }
            }
        }
    }
    let msg = format!("{configs} configurations, {samples} samples, {violations} violations, oracle/library gap {mismatch:.1e}");
    if violations == 0 && mismatch < 1e-9 {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(msg)
    }
}

fn rbf_tightness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(1..=10);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let alpha = rng.gen_range(0.5..3.0);
        let eta = rng.gen_range(0.05..2.0);
        let s = sample_in_ball(&mut rng, n, NormExponent::TWO, eta, true);
        let norm = common::norm(&s, 2.0);
        let spec = KernelSpec::GaussianRbf { alpha };
        let got = feature_perturbation_norm(&spec, &x, &s).unwrap();
        let bound = delta_rbf(norm, n, NormExponent::TWO, alpha).unwrap();
        worst = worst.max((bound - got).abs()).max((eta - norm).abs());
    }
    let msg = format!("100 boundary perturbations, max |delta - exact| = {worst:.1e}");
    if worst <= 1e-9 {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(msg)
    }
}

fn norm_lemma() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut bad = 0;
    let draw = |rng: &mut ChaCha8Rng| match rng.gen_range(0..5) {
        0 => f64::INFINITY,
        1 => 1.0,
        2 => 2.0,
        _ => rng.gen_range(1.0..10.0),
    };
    for _ in 0..10_000 {
        let n = rng.gen_range(1..=30);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0) * 10f64.powi(rng.gen_range(-3..4))).collect();
        let (a, b) = (draw(&mut rng), draw(&mut rng));
        let (p, q) = if a <= b { (a, b) } else { (b, a) };
        let to = |v: f64| if v.is_infinite() { NormExponent::Infinity } else { NormExponent::Finite(v) };
        let np = lp_norm(&x, to(p));
        let nq = lp_norm(&x, to(q));
        let inv_q = if q.is_infinite() { 0.0 } else { 1.0 / q };
        let factor = (n as f64).powf(1.0 / p - inv_q);
        if nq > np * (1.0 + 1e-12) || np > factor * nq * (1.0 + 1e-12) {
            bad += 1;
        }
    }
    let msg = format!("10000 random (x, p, q), {bad} violations");
    if bad == 0 {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(msg)
    }
}

fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<f64>, KernelSpec) {
    let m = rng.gen_range(3..=10);
    let n = rng.gen_range(1..=4);
    let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let mut labels: Vec<f64> = (0..m).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
    labels[0] = 1.0;
    labels[1] = -1.0;
    let spec = match rng.gen_range(0..3) {
        0 => KernelSpec::Polynomial { degree: rng.gen_range(1..=3), coef: 0.0 },
        1 => KernelSpec::Polynomial { degree: rng.gen_range(1..=3), coef: 1.0 },
        _ => KernelSpec::GaussianRbf { alpha: rng.gen_range(0.5..2.0) },
    };
    (rows, labels, spec)
}

fn bits(lp: &LpProblem) -> Vec<u64> {
    lp.rows.iter().flatten().chain(&lp.rhs).chain(&lp.objective).map(|v| v.to_bits()).collect()
}

fn zero_radius_reduction() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for t in 0..50 {
        let (rows, labels, spec) = random_instance(&mut rng);
        let q = if t % 2 == 0 { QNorm::One } else { QNorm::Infinity };
        let nu = rng.gen_range(0.01..2.0);
        let g = gram(&spec, &rows).unwrap();
        let zeros = vec![0.0; rows.len()];
        let rob = assemble_robust_lp(&g, &labels, nu, &zeros, q).unwrap();
        let det = assemble_deterministic_lp(&g, &labels, nu, q).unwrap();
        if bits(&rob) != bits(&det) || rob.senses != det.senses || rob.bounds != det.bounds {
            return Verdict::Fail(format!("instance {t}: LPs differ"));
        }
        let a = train_with_gram(&rows, &labels, &g, nu, q, Formulation::Deterministic, 1000).unwrap();
        let b = train_with_gram(&rows, &labels, &g, nu, q, Formulation::Robust { delta: &zeros }, 1000).unwrap();
        if a != b {
            return Verdict::Fail(format!("instance {t}: classifiers differ"));
        }
    }
    Verdict::Pass("50 instances, LPs and classifiers bitwise identical".into())
}

fn lp_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut counts = [0usize; 3];
    let mut worst = 0.0f64;
    for k in 0..500 {
        let lp = common::random_lp(&mut rng);
        let want = common::brute_force(&lp);
        let got = match solve_lp(&lp) {
            Ok(s) => s,
            Err(e) => return Verdict::Fail(format!("LP {k}: solver error {e}")),
        };
        if got.status != want.status() {
            return Verdict::Fail(format!("LP {k}: status {} vs oracle {}", got.status, want.status()));
        }
        counts[got.status as usize] += 1;
        if let common::Brute::Optimal(v) = want {
            worst = worst.max((got.objective_value - v).abs());
        }
    }
    let msg = format!(
        "500 LPs ({} optimal, {} infeasible, {} unbounded), max objective gap {worst:.1e}",
        counts[0], counts[1], counts[2]
    );
    if worst <= 1e-6 {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(msg)
    }
}

fn conservatism() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut strict = 0;
    for t in 0..50 {
        let (rows, labels, spec) = random_instance(&mut rng);
        let q = if t % 2 == 0 { QNorm::One } else { QNorm::Infinity };
        let nu = rng.gen_range(0.05..2.0);
        let g = gram(&spec, &rows).unwrap();
        let delta: Vec<f64> = (0..rows.len()).map(|_| rng.gen_range(0.01..0.5)).collect();
        let det = solve_lp(&assemble_deterministic_lp(&g, &labels, nu, q).unwrap()).unwrap();
        let rob = solve_lp(&assemble_robust_lp(&g, &labels, nu, &delta, q).unwrap()).unwrap();
        if rob.objective_value < det.objective_value - 1e-9 {
            return Verdict::Fail(format!(
                "instance {t}: robust {} below deterministic {}",
                rob.objective_value, det.objective_value
            ));
        }
        if rob.objective_value > det.objective_value + 1e-9 {
            strict += 1;
        }
    }
    let msg = format!("50 instances, robust >= deterministic everywhere, strictly in {strict}");
    if strict > 0 {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(msg)
    }
}

fn rank_tests() -> Verdict {
    let close = |a: f64, b: f64| (a - b).abs() <= 0.002;
    let det = friedman_from_ranks(&[1.625, 1.750, 2.625], 8).unwrap();
    let rob = friedman_from_ranks(&[1.438, 1.813, 2.750], 8).unwrap();
    let hd = holm_test(&det, 0.10).unwrap();
    let hr = holm_test(&rob, 0.05).unwrap();
    let got = [
        hd.holm[0].p_value,
        hd.holm[1].p_value,
        hr.holm[0].p_value,
        hr.holm[1].p_value,
    ];
    let want = [0.803, 0.046, 0.453, 0.009];
    let decisions = [hd.holm[0].reject, hd.holm[1].reject, hr.holm[0].reject, hr.holm[1].reject];
    let msg = format!(
        "Friedman p = {:.4} / {:.4}; Holm p = {:.3} {:.3} {:.3} {:.3}; reject = {:?}",
        det.p_value, rob.p_value, got[0], got[1], got[2], got[3], decisions
    );
    let ok = close(det.p_value, 0.085)
        && close(rob.p_value, 0.014)
        && got.iter().zip(want).all(|(g, w)| close(*g, w))
        && decisions == [false, true, false, true];
    if ok {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(msg)
    }
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

fn iris_config() -> ExperimentConfig {
    ExperimentConfig {
        name: Some("iris".into()),
        dataset: data_dir().join("iris.csv"),
        transforms: vec![TransformKind::None],
        kernels: vec![KernelChoice::GaussianRbf { alpha: rksvm::bench::Param::Auto }],
        q_norm: QNorm::One,
        betas: vec![75.0],
        repeats: 32,
        seed: 2023,
        ..ExperimentConfig::default()
    }
}

/// The Parkinson data is not shipped; set `RKSVM_PARKINSONS_CSV` to the
/// UCI `parkinsons.data` file (or place it at `tests/data/parkinsons.csv`).
fn parkinsons_path() -> Option<PathBuf> {
    std::env::var_os("RKSVM_PARKINSONS_CSV")
        .map(PathBuf::from)
        .or_else(|| Some(data_dir().join("parkinsons.csv")))
        .filter(|p| p.is_file())
}

fn table_reproduction(iris_report: &mut Option<String>) -> Verdict {
    let t = Instant::now();
    let report = match run_experiment(&iris_config()) {
        Ok(r) => r,
        Err(e) => return Verdict::Fail(format!("iris run failed: {e}")),
    };
    let iris = report.holdouts[0].deterministic[0].summary.clone();
    let iris_secs = t.elapsed().as_secs_f64();
    *iris_report = report.to_json().ok();
    let iris_ok = (0.01..=0.06).contains(&iris.mean) && iris_secs <= 900.0;
    let iris_msg = format!(
        "iris {:.2}% +- {:.2} in [1%, 6%] ({iris_secs:.0}s)",
        100.0 * iris.mean,
        100.0 * iris.std
    );

    let Some(path) = parkinsons_path() else {
        let msg = format!("{iris_msg}; parkinson: dataset not available, not evaluated");
        return if iris_ok { Verdict::Unavailable(msg) } else { Verdict::Fail(msg) };
    };
    let cfg = ExperimentConfig {
        name: Some("parkinsons".into()),
        dataset: path,
        label_column: "status".into(),
        ignore_columns: vec!["name".into()],
        transforms: vec![TransformKind::MinMax],
        kernels: vec![KernelChoice::Polynomial { degree: 1, coef: rksvm::bench::Param::Value(0.0) }],
        betas: vec![75.0],
        repeats: 32,
        seed: 2023,
        ..ExperimentConfig::default()
    };
    let t = Instant::now();
    let park = match run_experiment(&cfg) {
        Ok(r) => r.holdouts[0].deterministic[0].summary.clone(),
        Err(e) => return Verdict::Fail(format!("{iris_msg}; parkinson run failed: {e}")),
    };
    let secs = t.elapsed().as_secs_f64();
    let park_ok = (0.09..=0.18).contains(&park.mean) && secs <= 900.0;
    let msg = format!(
        "{iris_msg}; parkinson {:.2}% +- {:.2} in [9%, 18%] ({secs:.0}s)",
        100.0 * park.mean,
        100.0 * park.std
    );
    if iris_ok && park_ok {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(msg)
    }
}

fn separable_toy() -> Verdict {
    let d = Dataset::from_labels(vec![vec![1.0], vec![-1.0]], &["+1", "-1"]).unwrap();
    let clf = train_binary_deterministic(&d, &KernelSpec::linear(), 1.0, QNorm::One, 10_000).unwrap();
    let errors = training_errors(&clf);
    let plus = clf.predict(&[1.0]).unwrap();
    let minus = clf.predict(&[-1.0]).unwrap();
    let msg = format!(
        "training errors {errors}, b = {} (gamma = {}), f(+1) -> {plus}, f(-1) -> {minus}",
        clf.b, clf.gamma
    );
    if errors == 0 && clf.b == clf.gamma && plus == 1.0 && minus == -1.0 {
        Verdict::Pass(msg)
    } else {
        Verdict::Fail(msg)
    }
}

fn determinism(first: Option<String>) -> Verdict {
    let Some(first) = first else {
        return Verdict::Fail("no first report to compare".into());
    };
    let second = match run_experiment(&iris_config()) {
        Ok(r) => r,
        Err(e) => return Verdict::Fail(format!("second run failed: {e}")),
    };
    let dir = tempfile::tempdir().unwrap();
    emit_report(&second, dir.path(), "iris").unwrap();
    let written = std::fs::read(dir.path().join("iris.json")).unwrap();
    let msg = format!("iris report {} bytes", first.len());
    if written == first.as_bytes() {
        Verdict::Pass(format!("{msg}, byte-identical across runs"))
    } else {
        Verdict::Fail(format!("{msg}, reports differ"))
    }
}

fn main() {
    let mut iris_report = None;
    let names = [
        "bound soundness",
        "RBF tightness",
        "norm inequalities",
        "zero-radius reduction",
        "LP solver oracle",
        "robust conservatism",
        "rank tests",
        "desk-scale reproduction",
        "separable toy",
        "determinism",
    ];
    let mut failed = 0;
    for (k, name) in names.iter().enumerate() {
        let t = Instant::now();
        let verdict = match k + 1 {
            1 => bound_soundness(),
            2 => rbf_tightness(),
            3 => norm_lemma(),
            4 => zero_radius_reduction(),
            5 => lp_oracle(),
            6 => conservatism(),
            7 => rank_tests(),
            8 => table_reproduction(&mut iris_report),
            9 => separable_toy(),
            _ => determinism(iris_report.take()),
        };
        let secs = t.elapsed().as_secs_f64();
        match verdict {
            Verdict::Pass(m) => println!("PASS  {:>2} {name}: {m} [{secs:.1}s]", k + 1),
            Verdict::Fail(m) => {
                failed += 1;
                println!("FAIL  {:>2} {name}: {m} [{secs:.1}s]", k + 1);
            }
            Verdict::Unavailable(m) => println!("FAIL  {:>2} {name}: {m} [{secs:.1}s] (data missing, not counted)", k + 1),
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
