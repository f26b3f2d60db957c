//! Full-reference image quality metrics on `[0, 1]` images.
//!
//! Both metrics clamp their inputs to `[0, 1]` first. PSNR pools the squared
//! error over every channel and pixel at once.

use crate::error::{Error, Result};
use crate::image::PlanarImage;

/// Reported for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check_dims(a: &PlanarImage, b: &PlanarImage) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::DimensionMismatch(format!(
            "cannot compare images of dims {:?} and {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

pub fn mse(reference: &PlanarImage, test: &PlanarImage) -> Result<f64> {
    check_dims(reference, test)?;
    let n = reference.data().len();
    if n == 0 {
        return Err(Error::DimensionMismatch("cannot compare empty images".into()));
    }
    let sum: f64 = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(&a, &b)| {
            let d = a.clamp(0.0, 1.0) - b.clamp(0.0, 1.0);
            d * d
        })
        .sum();
    Ok(sum / n as f64)
}

/// `-10 log10(MSE)`, capped at [`PSNR_CAP_DB`].
pub fn psnr(reference: &PlanarImage, test: &PlanarImage) -> Result<f64> {
    let m = mse(reference, test)?;
    if m == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((-10.0 * m.log10()).min(PSNR_CAP_DB))
}

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_window_1d(len: usize, sigma: f64) -> Vec<f64> {
    let c = (len as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..len)
        .map(|i| {
            let x = i as f64 - c;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Valid-mode separable filtering of an `h x w` plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        let src = &plane[r * w..(r + 1) * w];
        for c in 0..ow {
            rows[r * ow + c] = taps.iter().zip(&src[c..c + k]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = taps.iter().enumerate().map(|(i, t)| t * rows[(r + i) * ow + c]).sum();
        }
    }
    out
}

fn ssim_plane(x: &[f64], y: &[f64], h: usize, w: usize, taps: &[f64]) -> f64 {
    let c1 = (SSIM_K1 * 1.0).powi(2);
    let c2 = (SSIM_K2 * 1.0).powi(2);
    let prod = |f: fn(f64, f64) -> f64| -> Vec<f64> { x.iter().zip(y).map(|(&a, &b)| f(a, b)).collect() };
    let mx = filter_valid(x, h, w, taps);
    let my = filter_valid(y, h, w, taps);
    let mxx = filter_valid(&prod(|a, _| a * a), h, w, taps);
    let myy = filter_valid(&prod(|_, b| b * b), h, w, taps);
    let mxy = filter_valid(&prod(|a, b| a * b), h, w, taps);
    let n = mx.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = mxx[i] - ux * ux;
            let vy = myy[i] - uy * uy;
            let cxy = mxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    total / n as f64
}

/// Mean local SSIM over all valid 11x11 Gaussian windows, per channel,
/// averaged across channels.
pub fn ssim(reference: &PlanarImage, test: &PlanarImage) -> Result<f64> {
    check_dims(reference, test)?;
    let (h, w) = (reference.height(), reference.width());
    if h.min(w) < SSIM_WINDOW || reference.channels() == 0 {
        return Err(Error::InvalidArgument(format!(
            "SSIM needs planes of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}"
        )));
    }
    let taps = gaussian_window_1d(SSIM_WINDOW, SSIM_SIGMA);
    let a = reference.clamped();
    let b = test.clamped();
    let sum: f64 = (0..a.channels())
        .map(|c| ssim_plane(a.plane(c), b.plane(c), h, w, &taps))
        .sum();
    Ok(sum / a.channels() as f64)
}
