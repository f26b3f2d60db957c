use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::PlanarImage;

/// Singular values below this are zeroed after construction.
pub const DEFAULT_SV_THRESHOLD: f64 = 3e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlurKernel {
    /// Box filter of length 9 on both axes.
    Uniform9,
    /// 5-tap Gaussian, sigma 10, both axes.
    Gaussian5,
    /// 9-tap Gaussians, sigma 20 horizontally and 1 vertically.
    Anisotropic9,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum DegradationKind {
    Identity,
    Blur { kernel: BlurKernel },
    BlockAverage { scale: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationSpec {
    pub kind: DegradationKind,
    pub sv_threshold: f64,
}

impl DegradationSpec {
    pub fn new(kind: DegradationKind) -> Self {
        Self {
            kind,
            sv_threshold: DEFAULT_SV_THRESHOLD,
        }
    }

    pub fn identity() -> Self {
        Self::new(DegradationKind::Identity)
    }

    pub fn with_threshold(mut self, sv_threshold: f64) -> Self {
        self.sv_threshold = sv_threshold;
        self
    }

    /// Parse a task name: `denoise`, `deblur-uniform`, `deblur-gauss`,
    /// `deblur-aniso`, `sr2` or `sr4`.
    pub fn from_task(task: &str) -> Result<Self> {
        let kind = match task {
            "denoise" => DegradationKind::Identity,
            "deblur-uniform" => DegradationKind::Blur {
                kernel: BlurKernel::Uniform9,
            },
            "deblur-gauss" => DegradationKind::Blur {
                kernel: BlurKernel::Gaussian5,
            },
            "deblur-aniso" => DegradationKind::Blur {
                kernel: BlurKernel::Anisotropic9,
            },
            "sr2" => DegradationKind::BlockAverage { scale: 2 },
            "sr4" => DegradationKind::BlockAverage { scale: 4 },
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown task {other:?} (expected denoise, deblur-uniform, deblur-gauss, \
                     deblur-aniso, sr2 or sr4)"
                )))
            }
        };
        Ok(Self::new(kind))
    }

    pub fn task_name(&self) -> &'static str {
        match self.kind {
            DegradationKind::Identity => "denoise",
            DegradationKind::Blur {
                kernel: BlurKernel::Uniform9,
            } => "deblur-uniform",
            DegradationKind::Blur {
                kernel: BlurKernel::Gaussian5,
            } => "deblur-gauss",
            DegradationKind::Blur {
                kernel: BlurKernel::Anisotropic9,
            } => "deblur-aniso",
            DegradationKind::BlockAverage { scale: 2 } => "sr2",
            DegradationKind::BlockAverage { scale: 4 } => "sr4",
            DegradationKind::BlockAverage { .. } => "sr",
        }
    }

    /// Output plane size for an input plane of `height x width`.
    pub fn output_size(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        match self.kind {
            DegradationKind::BlockAverage { scale } => {
                if scale == 0 || !height.is_multiple_of(scale) || !width.is_multiple_of(scale) {
                    return Err(Error::DimensionMismatch(format!(
                        "{height}x{width} is not divisible by the super-resolution scale {scale}"
                    )));
                }
                Ok((height / scale, width / scale))
            }
            _ => Ok((height, width)),
        }
    }

    /// Per-axis 1-D matrices `(vertical, horizontal)` such that the plane
    /// operator is `Y = A_v X A_h^T`.
    pub fn axis_matrices(&self, height: usize, width: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.output_size(height, width)?;
        Ok(match self.kind {
            DegradationKind::Identity => (DMatrix::identity(height, height), DMatrix::identity(width, width)),
            DegradationKind::Blur { kernel } => {
                let (taps_v, taps_h) = kernel_taps(kernel);
                (convolution_matrix(&taps_v, height), convolution_matrix(&taps_h, width))
            }
            DegradationKind::BlockAverage { scale } => {
                (block_average_matrix(scale, height), block_average_matrix(scale, width))
            }
        })
    }

    /// The physical (untruncated) degradation, applied per channel.
    pub fn apply_exact(&self, img: &PlanarImage) -> Result<PlanarImage> {
        let (h, w) = (img.height(), img.width());
        let (oh, ow) = self.output_size(h, w)?;
        if self.kind == DegradationKind::Identity {
            return Ok(img.clone());
        }
        let (av, ah) = self.axis_matrices(h, w)?;
        let mut data = Vec::with_capacity(img.channels() * oh * ow);
        for c in 0..img.channels() {
            let x = DMatrix::from_row_slice(h, w, img.plane(c));
            let y = &av * x * ah.transpose();
            for r in 0..oh {
                data.extend(y.row(r).iter());
            }
        }
        PlanarImage::new(img.channels(), oh, ow, data)
    }
}

/// Sampled Gaussian taps at integer offsets, normalized to sum 1.
pub fn gaussian_taps(len: usize, sigma: f64) -> Vec<f64> {
    let r = (len / 2) as f64;
    let raw: Vec<f64> = (0..len)
        .map(|i| {
            let x = i as f64 - r;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// `(vertical, horizontal)` taps.
pub fn kernel_taps(kernel: BlurKernel) -> (Vec<f64>, Vec<f64>) {
    match kernel {
        BlurKernel::Uniform9 => (vec![1.0 / 9.0; 9], vec![1.0 / 9.0; 9]),
        BlurKernel::Gaussian5 => (gaussian_taps(5, 10.0), gaussian_taps(5, 10.0)),
        BlurKernel::Anisotropic9 => (gaussian_taps(9, 1.0), gaussian_taps(9, 20.0)),
    }
}

/// Half-sample symmetric reflection of `i` into `0..n` (`...c b a | a b c...`).
pub fn reflect_index(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let mut k = i.rem_euclid(period);
    if k >= n as isize {
        k = period - 1 - k;
    }
    k as usize
}

/// `n x n` matrix of a centered odd-length convolution with reflective borders.
pub fn convolution_matrix(taps: &[f64], n: usize) -> DMatrix<f64> {
    let r = (taps.len() / 2) as isize;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for (k, &t) in taps.iter().enumerate() {
            let j = reflect_index(i as isize + k as isize - r, n);
            m[(i, j)] += t;
        }
    }
    m
}

/// `(n / scale) x n` averaging matrix.
pub fn block_average_matrix(scale: usize, n: usize) -> DMatrix<f64> {
    let m = n / scale;
    let mut a = DMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..scale {
            a[(i, i * scale + j)] = 1.0 / scale as f64;
        }
    }
    a
}
