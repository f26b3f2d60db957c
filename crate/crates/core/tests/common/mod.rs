//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use card::image::PlanarImage;
use card::operators::SvdOperator;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const TASKS: [&str; 6] = [
    "denoise",
    "deblur-uniform",
    "deblur-gauss",
    "deblur-aniso",
    "sr2",
    "sr4",
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `A A^T / d + 0.1 I` from a Gaussian `A`.
pub fn random_spd(d: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    let a = DMatrix::from_fn(d, d, |_, _| r.sample::<f64, _>(StandardNormal));
    &a * a.transpose() / d as f64 + DMatrix::identity(d, d) * 0.1
}

pub fn random_image(c: usize, h: usize, w: usize, seed: u64) -> PlanarImage {
    let mut r = rng(seed);
    PlanarImage::new(c, h, w, (0..c * h * w).map(|_| r.random::<f64>()).collect()).unwrap()
}

fn reflect(i: isize, n: usize) -> usize {
    // ... c b a | a b c ... | c b a ...
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

fn gaussian(len: usize, sigma: f64) -> Vec<f64> {
    let c = (len - 1) as f64 / 2.0;
    let raw: Vec<f64> = (0..len)
        .map(|i| (-(i as f64 - c).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

/// `(vertical, horizontal)` taps of a blur task, written out from their
/// definitions.
fn blur_taps(task: &str) -> Option<(Vec<f64>, Vec<f64>)> {
    match task {
        "deblur-uniform" => Some((vec![1.0 / 9.0; 9], vec![1.0 / 9.0; 9])),
        "deblur-gauss" => Some((gaussian(5, 10.0), gaussian(5, 10.0))),
        "deblur-aniso" => Some((gaussian(9, 1.0), gaussian(9, 20.0))),
        _ => None,
    }
}

/// Row-major `m x d` matrix of a task, built pixel by pixel.
pub fn dense_degradation(task: &str, h: usize, w: usize) -> DMatrix<f64> {
    if let Some((tv, th)) = blur_taps(task) {
        let (rv, rh) = ((tv.len() / 2) as isize, (th.len() / 2) as isize);
        let mut m = DMatrix::zeros(h * w, h * w);
        for r in 0..h {
            for c in 0..w {
                for (a, kv) in tv.iter().enumerate() {
                    for (b, kh) in th.iter().enumerate() {
                        let rr = reflect(r as isize + a as isize - rv, h);
                        let cc = reflect(c as isize + b as isize - rh, w);
                        m[(r * w + c, rr * w + cc)] += kv * kh;
                    }
                }
            }
        }
        return m;
    }
    match task {
        "denoise" => DMatrix::identity(h * w, h * w),
        "sr2" | "sr4" => {
            let s = if task == "sr2" { 2 } else { 4 };
            let (oh, ow) = (h / s, w / s);
            let mut m = DMatrix::zeros(oh * ow, h * w);
            for r in 0..h {
                for c in 0..w {
                    m[((r / s) * ow + c / s, r * w + c)] = 1.0 / (s * s) as f64;
                }
            }
            m
        }
        other => panic!("no oracle for {other}"),
    }
}

/// SSIM straight from its definition: an explicit 11x11 Gaussian window
/// (sigma 1.5) at every valid position, local statistics summed directly.
pub fn ssim_oracle(x: &PlanarImage, y: &PlanarImage) -> f64 {
    let (c1, c2) = ((0.01f64).powi(2), (0.03f64).powi(2));
    let g = gaussian(11, 1.5);
    let mut total = 0.0;
    for ch in 0..x.channels() {
        let (h, w) = (x.height(), x.width());
        let mut sum = 0.0;
        let mut count = 0usize;
        for r0 in 0..=h - 11 {
            for q0 in 0..=w - 11 {
                let (mut mx, mut my) = (0.0, 0.0);
                for a in 0..11 {
                    for b in 0..11 {
                        let wt = g[a] * g[b];
                        mx += wt * x.get(ch, r0 + a, q0 + b).clamp(0.0, 1.0);
                        my += wt * y.get(ch, r0 + a, q0 + b).clamp(0.0, 1.0);
                    }
                }
                let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
                for a in 0..11 {
                    for b in 0..11 {
                        let wt = g[a] * g[b];
                        let dx = x.get(ch, r0 + a, q0 + b).clamp(0.0, 1.0) - mx;
                        let dy = y.get(ch, r0 + a, q0 + b).clamp(0.0, 1.0) - my;
                        vx += wt * dx * dx;
                        vy += wt * dy * dy;
                        cxy += wt * dx * dy;
                    }
                }
                sum += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
        total += sum / count as f64;
    }
    total / x.channels() as f64
}

pub mod cli;

pub fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

pub fn dense_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Largest singular-value and action deviations of `op` from `dense`, or
/// `None` when the singular value counts differ.
pub fn oracle_errors(op: &SvdOperator, dense: &DMatrix<f64>) -> Option<(f64, f64)> {
    let want = dense_singular_values(dense);
    let got = op.singular_values();
    if got.len() != want.len() {
        return None;
    }
    let sv_err = max_abs(got, &want);
    let (h, w) = op.in_shape();
    let mut act_err: f64 = 0.0;
    for seed in 0..3 {
        let x = random_image(1, h, w, seed).into_data();
        let want = dense * DVector::from_column_slice(&x);
        act_err = act_err.max(max_abs(&op.apply(&x).unwrap(), want.as_slice()));
    }
    Some((sv_err, act_err))
}
