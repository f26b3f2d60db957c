//! Reproducible stand-ins for clean images and sensor noise.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::experiment::{simulate_measurement, ExperimentCase};
use crate::covariance::{CovarianceModel, PatchSize};
use crate::error::{Error, Result};
use crate::image::PlanarImage;
use crate::operators::DegradationSpec;
use crate::rng::{mix_seed, stream, Domain};

/// Pixelwise `N(mean, tau^2)` image, clamped to `[0, 1]`.
pub fn gaussian_prior_image(dims: [usize; 3], mean: f64, tau: f64, seed: u64, id: u32) -> PlanarImage {
    let mut rng = stream(seed, Domain::PriorImage, 0, id);
    let n = dims.iter().product();
    let data = (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            (mean + tau * z).clamp(0.0, 1.0)
        })
        .collect();
    PlanarImage::new(dims[0], dims[1], dims[2], data).expect("length matches dims")
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorCases {
    pub count: usize,
    pub dims: [usize; 3],
    pub mean: f64,
    pub tau: f64,
    pub sigma_y: f64,
    pub seed: u64,
}

impl PriorCases {
    /// Case `i` carries seed `seed + i`; its clean image and measurement
    /// noise come from streams derived from that seed.
    pub fn build(&self, task: &DegradationSpec, cov: &CovarianceModel) -> Result<Vec<ExperimentCase>> {
        (0..self.count)
            .map(|i| {
                let case_seed = self.seed.wrapping_add(i as u64);
                let clean = gaussian_prior_image(self.dims, self.mean, self.tau, case_seed, 0);
                let y = simulate_measurement(task, &clean, cov, self.sigma_y, mix_seed(case_seed, 1))?;
                Ok(ExperimentCase {
                    scene_id: format!("prior-{i:04}"),
                    reference: clean,
                    measurement: y,
                    sigma_y: self.sigma_y,
                    seed: case_seed,
                    image_id: i as u32,
                })
            })
            .collect()
    }
}

/// Spatially stationary noise: white noise filtered along rows by `taps`,
/// scaled so each pixel has standard deviation `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryNoise {
    pub taps: Vec<f64>,
    pub sigma: f64,
}

impl StationaryNoise {
    /// Row-correlated noise typical of line readout.
    pub fn row_correlated(sigma: f64) -> Self {
        Self {
            taps: vec![1.0, 0.8, 0.5, 0.2],
            sigma,
        }
    }

    fn scaled_taps(&self) -> Vec<f64> {
        let norm = self.taps.iter().map(|t| t * t).sum::<f64>().sqrt();
        self.taps.iter().map(|t| self.sigma * t / norm).collect()
    }

    /// One `channels x h x w` draw; `(seed, id)` selects the stream.
    pub fn sample(&self, channels: usize, h: usize, w: usize, seed: u64, id: u32) -> PlanarImage {
        let taps = self.scaled_taps();
        let k = taps.len();
        let mut out = PlanarImage::zeros(channels, h, w);
        let mut white = vec![0.0; w + k - 1];
        for c in 0..channels {
            let mut rng = stream(seed, Domain::DarkFrame, c as u32, id);
            let plane = out.plane_mut(c);
            for r in 0..h {
                for v in white.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                for col in 0..w {
                    plane[r * w + col] = taps.iter().zip(&white[col..col + k]).map(|(t, z)| t * z).sum();
                }
            }
        }
        out
    }

    /// Exact covariance of a vectorized (row-major) patch.
    pub fn patch_covariance(&self, patch: PatchSize) -> DMatrix<f64> {
        let taps = self.scaled_taps();
        let lag = |d: usize| -> f64 {
            if d >= taps.len() {
                0.0
            } else {
                taps.iter().zip(&taps[d..]).map(|(a, b)| a * b).sum()
            }
        };
        let d = patch.dim();
        DMatrix::from_fn(d, d, |i, j| {
            if i / patch.w != j / patch.w {
                0.0
            } else {
                lag((i % patch.w).abs_diff(j % patch.w))
            }
        })
    }

    /// `count` single-channel frames.
    pub fn dark_frames(&self, count: usize, h: usize, w: usize, seed: u64) -> Vec<PlanarImage> {
        (0..count).map(|i| self.sample(1, h, w, seed, i as u32)).collect()
    }

    /// Prior-image cases degraded by `task` and corrupted with this noise.
    pub fn cases(&self, prior: &PriorCases, task: &DegradationSpec) -> Result<Vec<ExperimentCase>> {
        if prior.sigma_y != self.sigma {
            return Err(Error::InvalidArgument(format!(
                "case noise level {} differs from the stationary noise level {}",
                prior.sigma_y, self.sigma
            )));
        }
        (0..prior.count)
            .map(|i| {
                let case_seed = prior.seed.wrapping_add(i as u64);
                let clean = gaussian_prior_image(prior.dims, prior.mean, prior.tau, case_seed, 0);
                let clean_y = task.apply_exact(&clean)?;
                let noise = self.sample(
                    clean_y.channels(),
                    clean_y.height(),
                    clean_y.width(),
                    mix_seed(case_seed, 2),
                    0,
                );
                Ok(ExperimentCase {
                    scene_id: format!("prior-{i:04}"),
                    reference: clean,
                    measurement: clean_y.add(&noise)?,
                    sigma_y: self.sigma,
                    seed: case_seed,
                    image_id: i as u32,
                })
            })
            .collect()
    }
}
