//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use demandstack::dataset::{Feature, FeatureFrame};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Row-major matrix with entries drawn from N(0, 1)-ish sums of uniforms.
pub fn random_rows<R: Rng>(rng: &mut R, n: usize, p: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..p)
                .map(|_| (0..4).map(|_| rng.random::<f64>() - 0.5).sum::<f64>() * 1.7)
                .collect()
        })
        .collect()
}

/// Least squares with intercept via the normal equations. Returns
/// `(beta, intercept)`.
pub fn normal_equations(rows: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, f64) {
    let n = rows.len();
    let p = rows[0].len();
    let a = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1] });
    let b = DVector::from_column_slice(y);
    let ata = a.transpose() * &a;
    let atb = a.transpose() * b;
    let sol = ata.cholesky().expect("full-rank design").solve(&atb);
    (sol.iter().skip(1).copied().collect(), sol[0])
}

/// `(1/n)‖y − Xβ − b‖² + λ(a‖β‖₁ + (1 − a)‖β‖₂²)`, written out directly.
pub fn enet_objective(rows: &[Vec<f64>], y: &[f64], beta: &[f64], b: f64, lambda: f64, a: f64) -> f64 {
    let n = rows.len() as f64;
    let mut sse = 0.0;
    for (r, t) in rows.iter().zip(y) {
        let pred: f64 = b + r.iter().zip(beta).map(|(x, w)| x * w).sum::<f64>();
        sse += (t - pred) * (t - pred);
    }
    let l1: f64 = beta.iter().map(|w| w.abs()).sum();
    let l2: f64 = beta.iter().map(|w| w * w).sum();
    sse / n + lambda * (a * l1 + (1.0 - a) * l2)
}

/// Minimizes the elastic-net objective by accelerated projected gradient on
/// the split `β = u − v`, `u, v ≥ 0`. Returns the best objective seen.
pub fn projected_gradient(rows: &[Vec<f64>], y: &[f64], lambda: f64, a: f64, iters: usize) -> f64 {
    let n = rows.len();
    let p = rows[0].len();
    let nf = n as f64;
    // Lipschitz bound from the Frobenius norm of [1 X].
    let frob: f64 = rows.iter().map(|r| 1.0 + r.iter().map(|x| x * x).sum::<f64>()).sum();
    let lip = 4.0 * frob / nf + 4.0 * lambda * (1.0 - a);
    let step = 1.0 / lip;
    // z = (b, u, v)
    let dim = 1 + 2 * p;
    let mut z = vec![0.0; dim];
    let mut prev = z.clone();
    let mut t = 1.0f64;
    let unpack = |z: &[f64]| -> (f64, Vec<f64>) { (z[0], (0..p).map(|j| z[1 + j] - z[1 + p + j]).collect()) };
    let mut best = {
        let (b, beta) = unpack(&z);
        enet_objective(rows, y, &beta, b, lambda, a)
    };
    for _ in 0..iters {
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let mom = (t - 1.0) / t_next;
        let w: Vec<f64> = z.iter().zip(&prev).map(|(zi, pi)| zi + mom * (zi - pi)).collect();
        let (b, beta) = unpack(&w);
        let mut grad = vec![0.0; dim];
        for (r, target) in rows.iter().zip(y) {
            let pred: f64 = b + r.iter().zip(&beta).map(|(x, c)| x * c).sum::<f64>();
            let g = -2.0 * (target - pred) / nf;
            grad[0] += g;
            for j in 0..p {
                grad[1 + j] += g * r[j];
                grad[1 + p + j] -= g * r[j];
            }
        }
        for j in 0..p {
            let smooth = 2.0 * lambda * (1.0 - a) * beta[j];
            grad[1 + j] += lambda * a + smooth;
            grad[1 + p + j] += lambda * a - smooth;
        }
        prev = z;
        z = w.iter().zip(&grad).map(|(wi, gi)| wi - step * gi).collect();
        for v in z.iter_mut().skip(1) {
            *v = v.max(0.0);
        }
        t = t_next;
        let (b, beta) = unpack(&z);
        best = best.min(enet_objective(rows, y, &beta, b, lambda, a));
    }
    best
}

/// A tree-split test instance with a plain copy of each column.
pub struct TreeInstance {
    pub frame: FeatureFrame,
    pub y: Vec<f64>,
    pub cols: Vec<OracleCol>,
}

pub enum OracleCol {
    Num(Vec<f64>),
    Cat(Vec<String>),
}

/// Random mix of numeric and categorical columns, sometimes with an exact
/// duplicate column to force ties.
pub fn random_tree_instance<R: Rng>(rng: &mut R, max_n: usize) -> TreeInstance {
    let n = rng.random_range(2..=max_n);
    let p = rng.random_range(1..=4);
    let mut cols: Vec<OracleCol> = Vec::new();
    for _ in 0..p {
        if !cols.is_empty() && rng.random_bool(0.15) {
            let src = rng.random_range(0..cols.len());
            let copy = match &cols[src] {
                OracleCol::Num(v) => OracleCol::Num(v.clone()),
                OracleCol::Cat(v) => OracleCol::Cat(v.clone()),
            };
            cols.push(copy);
            continue;
        }
        if rng.random_bool(0.5) {
            let levels = rng.random_range(1..=8);
            let coarse = rng.random_bool(0.5);
            cols.push(OracleCol::Num(
                (0..n)
                    .map(|_| {
                        if coarse {
                            rng.random_range(0..levels) as f64 * 0.5
                        } else {
                            rng.random::<f64>() * 10.0 - 5.0
                        }
                    })
                    .collect(),
            ));
        } else {
            let levels = rng.random_range(1..=5);
            cols.push(OracleCol::Cat(
                (0..n).map(|_| format!("c{}", rng.random_range(0..levels))).collect(),
            ));
        }
    }
    let y: Vec<f64> = if rng.random_bool(0.5) {
        (0..n).map(|_| rng.random_range(0..6) as f64).collect()
    } else {
        (0..n).map(|_| rng.random::<f64>() * 20.0).collect()
    };
    let features = cols
        .iter()
        .enumerate()
        .map(|(j, c)| match c {
            OracleCol::Num(v) => Feature::numeric(format!("f{j}"), v.clone()),
            OracleCol::Cat(v) => Feature::categorical(format!("f{j}"), v),
        })
        .collect();
    TreeInstance {
        frame: FeatureFrame::new(n, features).unwrap(),
        y,
        cols,
    }
}

/// Population variance by the two-pass formula.
pub fn variance(y: &[f64]) -> f64 {
    let m = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / y.len() as f64
}

/// `Σ_c (n_c/n)·σ²_c` by explicitly collecting each group.
pub fn grouped_variance<K: PartialEq>(labels: &[K], y: &[f64]) -> f64 {
    let mut keys: Vec<&K> = Vec::new();
    for k in labels {
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.iter()
        .map(|k| {
            let g: Vec<f64> = labels.iter().zip(y).filter(|(l, _)| l == k).map(|(_, v)| *v).collect();
            g.len() as f64 / y.len() as f64 * variance(&g)
        })
        .sum()
}

/// Best root split by exhaustive search: every feature, every midpoint
/// between distinct sorted numeric values. Ties within `1e-12·σ²` go to the
/// first feature, then the smallest threshold. Returns
/// `(feature, threshold, reduction)`.
pub fn brute_force_split(cols: &[OracleCol], y: &[f64]) -> Option<(usize, Option<f64>, f64)> {
    let total = variance(y);
    let tol = 1e-12 * total;
    let mut per_feature: Vec<Option<(Option<f64>, f64)>> = Vec::new();
    for col in cols {
        per_feature.push(match col {
            OracleCol::Cat(v) => {
                let mut distinct = v.clone();
                distinct.sort();
                distinct.dedup();
                (distinct.len() >= 2).then(|| (None, total - grouped_variance(v, y)))
            }
            OracleCol::Num(v) => {
                let mut distinct = v.clone();
                distinct.sort_by(f64::total_cmp);
                distinct.dedup();
                let candidates: Vec<(f64, f64)> = distinct
                    .windows(2)
                    .map(|w| {
                        let t = w[0] + (w[1] - w[0]) / 2.0;
                        let side: Vec<bool> = v.iter().map(|x| *x <= t).collect();
                        (t, total - grouped_variance(&side, y))
                    })
                    .collect();
                let best = candidates.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
                candidates
                    .iter()
                    .find(|c| c.1 >= best - tol)
                    .map(|&(t, r)| (Some(t), r))
            }
        });
    }
    let best = per_feature
        .iter()
        .flatten()
        .map(|c| c.1)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(best > tol) {
        return None;
    }
    per_feature
        .iter()
        .enumerate()
        .find_map(|(f, c)| c.filter(|c| c.1 >= best - tol).map(|(t, r)| (f, t, r)))
}

/// Gamma at half-integers by exact recursion from Γ(1/2) = √π and Γ(1) = 1.
pub fn gamma_half(two_x: u32) -> f64 {
    let mut g = if two_x % 2 == 0 {
        1.0
    } else {
        std::f64::consts::PI.sqrt()
    };
    let mut k = if two_x % 2 == 0 { 2 } else { 1 };
    while k < two_x {
        g *= k as f64 / 2.0;
        k += 2;
    }
    g
}

pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64, depth: u32) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * eps {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, eps, depth)
}

pub fn t_oracle(t: f64, df: u32) -> f64 {
    let nu = df as f64;
    let norm = gamma_half(df + 1) / ((nu * std::f64::consts::PI).sqrt() * gamma_half(df));
    let density = move |s: f64| norm * (1.0 + s * s / nu).powf(-(nu + 1.0) / 2.0);
    let half = simpson(&density, 0.0, t.abs(), 1e-12, 50);
    if t >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

pub fn f_oracle(x: f64, d1: u32, d2: u32) -> f64 {
    let (a, b) = (d1 as f64, d2 as f64);
    let beta = gamma_half(d1) * gamma_half(d2) / gamma_half(d1 + d2);
    let density = move |v: f64| {
        if v <= 0.0 {
            return 0.0;
        }
        ((a * v).powf(a) * b.powf(b) / (a * v + b).powf(a + b)).sqrt() / (v * beta)
    };
    // x = u² keeps the integrand finite at zero for d1 = 1.
    let g = move |u: f64| {
        if u == 0.0 {
            if d1 == 1 {
                2.0 * (a / b).sqrt() / beta
            } else {
                0.0
            }
        } else {
            density(u * u) * 2.0 * u
        }
    };
    simpson(&g, 0.0, x.sqrt(), 1e-12, 50)
}
