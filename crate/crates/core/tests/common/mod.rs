//! Independent reference implementations used as test oracles. None of these
//! call into the library's numerics.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_points(rng: &mut impl Rng, n: usize, centre: &[f64], sd: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| centre.iter().map(|c| c + sd * rng.sample::<f64, _>(StandardNormal)).collect()).collect()
}

pub fn uniform_weights(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect()
}

/// Value, gradient and Hessian (row-major) of the weighted Gaussian kernel
/// estimate by a direct double loop.
pub struct Naive {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
}

pub fn naive_kde(points: &[Vec<f64>], weights: &[f64], h: f64, x: &[f64]) -> Naive {
    let d = x.len();
    let n = points.len() as f64;
    let norm = (2.0 * PI).powf(-(d as f64) / 2.0);
    let mut value = 0.0;
    let mut gradient = vec![0.0; d];
    let mut hessian = vec![0.0; d * d];
    for (p, &w) in points.iter().zip(weights) {
        let diff: Vec<f64> = (0..d).map(|k| p[k] - x[k]).collect();
        let r2: f64 = diff.iter().map(|v| v * v).sum::<f64>() / (h * h);
        let k = w * norm * (-0.5 * r2).exp();
        value += k;
        for a in 0..d {
            gradient[a] += k * diff[a];
            for b in 0..d {
                hessian[a * d + b] += k * (diff[a] * diff[b] - if a == b { h * h } else { 0.0 });
            }
        }
    }
    let hd = h.powi(d as i32);
    Naive {
        value: value / (n * hd),
        gradient: gradient.iter().map(|g| g / (n * hd * h * h)).collect(),
        hessian: hessian.iter().map(|v| v / (n * hd * h.powi(4))).collect(),
    }
}

/// Plain (unit-mark) mean shift from textbook formulas.
pub fn plain_mean_shift_step(points: &[Vec<f64>], h: f64, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let mut num = vec![0.0; d];
    let mut den = 0.0;
    for p in points {
        let r2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        let k = (-0.5 * r2 / (h * h)).exp();
        den += k;
        for a in 0..d {
            num[a] += k * p[a];
        }
    }
    num.iter().map(|v| v / den).collect()
}

pub fn plain_mean_shift(points: &[Vec<f64>], h: f64, x0: &[f64], tol: f64, max_iters: usize) -> Vec<Vec<f64>> {
    let mut path = vec![x0.to_vec()];
    for _ in 0..max_iters {
        let x = path.last().unwrap();
        let next = plain_mean_shift_step(points, h, x);
        let step: f64 = next.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        path.push(next);
        if step < tol * h {
            break;
        }
    }
    path
}

/// Cyclic Jacobi eigenvalue algorithm for a symmetric row-major matrix.
/// Returns eigenvalues in descending order and eigenvectors as columns (row-major).
pub fn jacobi_eigen(a: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut m = a.to_vec();
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| m[i * d + j].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = m[p * d + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q * d + q] - m[p * d + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let mkp = m[k * d + p];
                    let mkq = m[k * d + q];
                    m[k * d + p] = c * mkp - s * mkq;
                    m[k * d + q] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let mpk = m[p * d + k];
                    let mqk = m[q * d + k];
                    m[p * d + k] = c * mpk - s * mqk;
                    m[q * d + k] = s * mpk + c * mqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| m[b * d + b].total_cmp(&m[a * d + a]));
    let values = order.iter().map(|&i| m[i * d + i]).collect();
    let mut vectors = vec![0.0; d * d];
    for (col, &i) in order.iter().enumerate() {
        for k in 0..d {
            vectors[k * d + col] = v[k * d + i];
        }
    }
    (values, vectors)
}

/// Projector onto the span of eigenvectors 2..d from the Jacobi solver.
pub fn trailing_projector(h: &[f64], d: usize) -> Vec<f64> {
    let (_, v) = jacobi_eigen(h, d);
    let mut p = vec![0.0; d * d];
    for a in 0..d {
        for b in 0..d {
            p[a * d + b] = (1..d).map(|c| v[a * d + c] * v[b * d + c]).sum();
        }
    }
    p
}

pub fn brute_hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let dist = |p: &Vec<f64>, q: &Vec<f64>| p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let mut best = 0.0f64;
    for p in a {
        let mut m = f64::INFINITY;
        for q in b {
            m = m.min(dist(p, q));
        }
        best = best.max(m);
    }
    for q in b {
        let mut m = f64::INFINITY;
        for p in a {
            m = m.min(dist(p, q));
        }
        best = best.max(m);
    }
    best
}

/// Absorption frequencies of random walks on the chain `[[I, 0], [S, T]]`
/// started at every transient state, with their standard errors.
pub fn simulate_absorption(s: &[Vec<f64>], t: &[Vec<f64>], walks: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = s.len();
    let k = s[0].len();
    let mut rng = rng(seed);
    let mut freq = vec![vec![0.0; k]; n];
    let mut se = vec![vec![0.0; k]; n];
    for start in 0..n {
        let mut counts = vec![0usize; k];
        for _ in 0..walks {
            let mut state = start;
            loop {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut next = None;
                for j in 0..k {
                    acc += s[state][j];
                    if u < acc {
                        next = Some(Err(j));
                        break;
                    }
                }
                if next.is_none() {
                    for j in 0..n {
                        acc += t[state][j];
                        if u < acc {
                            next = Some(Ok(j));
                            break;
                        }
                    }
                }
                match next {
                    Some(Err(j)) => {
                        counts[j] += 1;
                        break;
                    }
                    Some(Ok(j)) => state = j,
                    // rounding left a sliver of mass past the last entry
                    None => state = n - 1,
                }
            }
        }
        for j in 0..k {
            let p = counts[j] as f64 / walks as f64;
            freq[start][j] = p;
            se[start][j] = (p * (1.0 - p) / walks as f64).sqrt();
        }
    }
    (freq, se)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Largest entrywise difference scaled by the largest magnitude of the reference.
pub fn rel_err_vec(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}
