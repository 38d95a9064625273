//! Reference implementations shared by the integration tests. Nothing here
//! calls into the solver or the radius formulas under test.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rksvm::lp::{LpProblem, LpStatus, Sense, VarBounds};

/// Outcome of brute-force vertex enumeration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Brute {
    Optimal(f64),
    Infeasible,
    Unbounded,
}

impl Brute {
    pub fn status(self) -> LpStatus {
        match self {
            Brute::Optimal(_) => LpStatus::Optimal,
            Brute::Infeasible => LpStatus::Infeasible,
            Brute::Unbounded => LpStatus::Unbounded,
        }
    }
}

/// `min c.z + c0` over `z >= 0`, `g z (sense) h`.
struct Pointed {
    c: Vec<f64>,
    c0: f64,
    g: Vec<Vec<f64>>,
    senses: Vec<Sense>,
    h: Vec<f64>,
}

/// Rewrites every variable in terms of nonnegative ones so the feasible
/// set has a vertex whenever it is nonempty.
fn to_pointed(lp: &LpProblem) -> Pointed {
    // each original variable: x = offset + sum coef * z
    let mut terms: Vec<(f64, Vec<(usize, f64)>)> = Vec::new();
    let mut extra_rows: Vec<(usize, f64)> = Vec::new();
    let mut nz = 0;
    for b in &lp.bounds {
        match (b.lower, b.upper) {
            (Some(l), u) => {
                terms.push((l, vec![(nz, 1.0)]));
                if let Some(u) = u {
                    extra_rows.push((nz, u - l));
                }
                nz += 1;
            }
            (None, Some(u)) => {
                terms.push((u, vec![(nz, -1.0)]));
                nz += 1;
            }
            (None, None) => {
                terms.push((0.0, vec![(nz, 1.0), (nz + 1, -1.0)]));
                nz += 2;
            }
        }
    }
    let map_row = |row: &[f64]| -> (Vec<f64>, f64) {
        let mut out = vec![0.0; nz];
        let mut shift = 0.0;
        for (a, (off, t)) in row.iter().zip(&terms) {
            shift += a * off;
            for &(k, s) in t {
                out[k] += a * s;
            }
        }
        (out, shift)
    };
    let (c, c0) = map_row(&lp.objective);
    let mut p = Pointed {
        c,
        c0,
        g: Vec::new(),
        senses: Vec::new(),
        h: Vec::new(),
    };
    for ((row, &s), &r) in lp.rows.iter().zip(&lp.senses).zip(&lp.rhs) {
        let (g, shift) = map_row(row);
        p.g.push(g);
        p.senses.push(s);
        p.h.push(r - shift);
    }
    for (k, cap) in extra_rows {
        let mut g = vec![0.0; nz];
        g[k] = 1.0;
        p.g.push(g);
        p.senses.push(Sense::Le);
        p.h.push(cap);
    }
    p
}

fn satisfies(g: &[Vec<f64>], senses: &[Sense], h: &[f64], z: &[f64], tol: f64) -> bool {
    if z.iter().any(|v| *v < -tol) {
        return false;
    }
    g.iter().zip(senses).zip(h).all(|((row, s), &r)| {
        let v: f64 = row.iter().zip(z).map(|(a, b)| a * b).sum();
        match s {
            Sense::Le => v <= r + tol,
            Sense::Ge => v >= r - tol,
            Sense::Eq => (v - r).abs() <= tol,
        }
    })
}

fn for_each_subset(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::with_capacity(k), f);
}

/// Every vertex of `{z >= 0 : g z (sense) h}`.
fn vertices(g: &[Vec<f64>], senses: &[Sense], h: &[f64], n: usize) -> Vec<Vec<f64>> {
    // hyperplanes: the rows, then z_k = 0
    let planes: Vec<(Vec<f64>, f64)> = g
        .iter()
        .cloned()
        .zip(h.iter().copied())
        .chain((0..n).map(|k| {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            (e, 0.0)
        }))
        .collect();
    let mut out = Vec::new();
    for_each_subset(planes.len(), n, &mut |idx| {
        let a = DMatrix::from_fn(n, n, |i, j| planes[idx[i]].0[j]);
        let b = DVector::from_fn(n, |i, _| planes[idx[i]].1);
        let lu = a.lu();
        let det = lu.determinant();
        if det.abs() < 1e-9 {
            return;
        }
        if let Some(z) = lu.solve(&b) {
            let z: Vec<f64> = z.iter().copied().collect();
            if satisfies(g, senses, h, &z, 1e-9) {
                out.push(z);
            }
        }
    });
    out
}

/// Solves a small LP by enumerating vertices of the feasible set and of the
/// normalized recession cone.
pub fn brute_force(lp: &LpProblem) -> Brute {
    let p = to_pointed(lp);
    let n = p.c.len();
    let verts = vertices(&p.g, &p.senses, &p.h, n);
    if verts.is_empty() {
        return Brute::Infeasible;
    }
    // extreme rays: vertices of {d >= 0, g d (sense) 0, sum d = 1}
    let mut rg = p.g.clone();
    let mut rs = p.senses.clone();
    let mut rh = vec![0.0; p.h.len()];
    rg.push(vec![1.0; n]);
    rs.push(Sense::Eq);
    rh.push(1.0);
    let improving_ray = vertices(&rg, &rs, &rh, n)
        .iter()
        .any(|d| p.c.iter().zip(d).map(|(a, b)| a * b).sum::<f64>() < -1e-9);
    if improving_ray {
        return Brute::Unbounded;
    }
    let best = verts
        .iter()
        .map(|z| p.c.iter().zip(z).map(|(a, b)| a * b).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    Brute::Optimal(best + p.c0)
}

/// Small LP with integer data: `n_vars` in 1..=6, up to 8 rows, mixed
/// senses and bounds. At most one free variable so the rewritten problem
/// stays small.
pub fn random_lp<R: Rng>(rng: &mut R) -> LpProblem {
    let n = rng.gen_range(1..=6);
    let rows = rng.gen_range(1..=8);
    let mut lp = LpProblem::new((0..n).map(|_| rng.gen_range(-5..=5) as f64).collect());
    let mut free_used = false;
    for b in lp.bounds.iter_mut() {
        let roll = rng.gen_range(0..20);
        *b = match roll {
            0..=11 => VarBounds::NONNEG,
            12..=13 if !free_used => {
                free_used = true;
                VarBounds::FREE
            }
            14..=16 => {
                let l = rng.gen_range(-3..=2) as f64;
                VarBounds {
                    lower: Some(l),
                    upper: Some(l + rng.gen_range(0..=4) as f64),
                }
            }
            17..=18 => VarBounds {
                lower: None,
                upper: Some(rng.gen_range(-2..=3) as f64),
            },
            _ => VarBounds {
                lower: Some(rng.gen_range(-3..=3) as f64),
                upper: None,
            },
        };
    }
    // about half the problems are built around a known feasible point
    let anchor: Option<Vec<f64>> = rng.gen_bool(0.5).then(|| {
        lp.bounds
            .iter()
            .map(|b| match (b.lower, b.upper) {
                (Some(l), Some(u)) => rng.gen_range(l..=u).round().clamp(l, u),
                (Some(l), None) => l + rng.gen_range(0..=3) as f64,
                (None, Some(u)) => u - rng.gen_range(0..=3) as f64,
                (None, None) => rng.gen_range(-3..=3) as f64,
            })
            .collect()
    });
    for _ in 0..rows {
        let row: Vec<f64> = (0..n)
            .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(-4..=4) as f64 })
            .collect();
        let sense = match rng.gen_range(0..10) {
            0..=3 => Sense::Le,
            4..=7 => Sense::Ge,
            _ => Sense::Eq,
        };
        let rhs = match &anchor {
            Some(x0) => {
                let v: f64 = row.iter().zip(x0).map(|(a, b)| a * b).sum();
                let gap = rng.gen_range(0..=3) as f64;
                match sense {
                    Sense::Le => v + gap,
                    Sense::Ge => v - gap,
                    Sense::Eq => v,
                }
            }
            None => rng.gen_range(-6..=6) as f64,
        };
        lp.add_row(row, sense, rhs);
    }
    lp
}

/// Kernel values computed from the definitions, independent of the crate.
pub fn poly_kernel(x: &[f64], y: &[f64], degree: u32, coef: f64) -> f64 {
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (coef + dot).powi(degree as i32)
}

pub fn rbf_kernel(x: &[f64], y: &[f64], alpha: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-d2 / (2.0 * alpha * alpha)).exp()
}

/// `|x|_p` straight from the definition; `p = inf` as `f64::INFINITY`.
pub fn norm(x: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        x.iter().fold(0.0, |m, v| m.max(v.abs()))
    } else {
        x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Two well-separated Gaussian-ish blobs with `±1` labels.
pub fn blobs<R: Rng>(rng: &mut R, m: usize, n: usize, gap: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rows = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for i in 0..m {
        let y = if i % 2 == 0 { 1.0 } else { -1.0 };
        rows.push((0..n).map(|_| y * gap + rng.gen_range(-1.0..1.0)).collect());
        labels.push(y);
    }
    (rows, labels)
}
