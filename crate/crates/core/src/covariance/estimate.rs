use nalgebra::DMatrix;

use super::{CovarianceModel, PatchGrid, PatchSize, Provenance};
use crate::error::{Error, Result};
use crate::image::PlanarImage;

/// Rec. 709 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.2126, 0.7152, 0.0722];

pub fn luminance(img: &PlanarImage) -> Result<PlanarImage> {
    if img.channels() != 3 {
        return Err(Error::DimensionMismatch(format!(
            "luminance needs 3 channels, got {}",
            img.channels()
        )));
    }
    let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
    let data = r
        .iter()
        .zip(g)
        .zip(b)
        .map(|((r, g), b)| LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b)
        .collect();
    PlanarImage::new(1, img.height(), img.width(), data)
}

const CHUNK: usize = 2048;

/// Streaming sample covariance over patch vectors.
///
/// Samples are shifted by the first patch before accumulation, which keeps
/// the second-moment sums well conditioned when the data carry an offset.
#[derive(Debug, Clone)]
pub struct CovarianceAccumulator {
    dim: usize,
    count: usize,
    shift: Vec<f64>,
    sum: Vec<f64>,
    sum_outer: DMatrix<f64>,
    pending: DMatrix<f64>,
    pending_len: usize,
}

impl CovarianceAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            count: 0,
            shift: Vec::new(),
            sum: vec![0.0; dim],
            sum_outer: DMatrix::zeros(dim, dim),
            pending: DMatrix::zeros(dim, CHUNK),
            pending_len: 0,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, patch: &[f64]) {
        assert_eq!(patch.len(), self.dim, "patch length");
        if self.count == 0 {
            self.shift = patch.to_vec();
        }
        let col = self.pending_len;
        for (i, (&v, &s)) in patch.iter().zip(&self.shift).enumerate() {
            let x = v - s;
            self.pending[(i, col)] = x;
            self.sum[i] += x;
        }
        self.pending_len += 1;
        self.count += 1;
        if self.pending_len == CHUNK {
            self.flush();
        }
    }

    fn flush(&mut self) {
        if self.pending_len == 0 {
            return;
        }
        let block = self.pending.columns(0, self.pending_len);
        self.sum_outer += block * block.transpose();
        self.pending_len = 0;
    }

    /// Tile a single-channel plane and push every full patch.
    pub fn push_plane(&mut self, plane: &[f64], grid: &PatchGrid) {
        let mut buf = vec![0.0; grid.patch_dim()];
        for t in 0..grid.num_tiles() {
            grid.gather(plane, t, &mut buf);
            self.push(&buf);
        }
    }

    /// Unbiased sample covariance (before regularization).
    pub fn sample_covariance(&mut self) -> Result<DMatrix<f64>> {
        if self.count < 2 {
            return Err(Error::DegenerateInput(format!(
                "need at least 2 patches, got {}",
                self.count
            )));
        }
        self.flush();
        let n = self.count as f64;
        let mean = nalgebra::DVector::from_iterator(self.dim, self.sum.iter().map(|s| s / n));
        let centered = &self.sum_outer - (&mean * mean.transpose()) * n;
        Ok(centered / (n - 1.0))
    }

    /// Regularize by `1e-6 * trace / d`, normalize and check definiteness.
    pub fn finish(mut self, patch: PatchSize, source_id: &str) -> Result<CovarianceModel> {
        if patch.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "accumulator has dimension {} but patch {patch} has {}",
                self.dim,
                patch.dim()
            )));
        }
        let mut sigma = self.sample_covariance()?;
        crate::linalg::symmetrize(&mut sigma);
        let eps = 1e-6 * sigma.trace() / self.dim as f64;
        for i in 0..self.dim {
            sigma[(i, i)] += eps;
        }
        let provenance = Provenance::Estimated {
            num_patches: self.count,
            source_id: source_id.to_string(),
        };
        CovarianceModel::from_matrix(patch, sigma, provenance).map_err(|e| match e {
            Error::NotPositiveDefinite { min_eigenvalue, .. } => Error::DegenerateInput(format!(
                "estimated covariance is rank deficient even after regularization \
                 (smallest eigenvalue {min_eigenvalue:.3e}); are the frames constant?"
            )),
            other => other,
        })
    }
}

/// Estimate a patch covariance from dark frames.
///
/// RGB frames are reduced to luminance; single-channel frames are used as is.
pub fn estimate_covariance(frames: &[PlanarImage], patch: PatchSize) -> Result<CovarianceModel> {
    let first = frames
        .first()
        .ok_or_else(|| Error::DegenerateInput("no dark frames".into()))?;
    let (h, w) = (first.height(), first.width());
    let grid = PatchGrid::new(h, w, patch);
    let mut acc = CovarianceAccumulator::new(patch.dim());
    for (k, frame) in frames.iter().enumerate() {
        if frame.height() != h || frame.width() != w {
            return Err(Error::DimensionMismatch(format!(
                "dark frame {k} is {}x{}, expected {h}x{w}",
                frame.height(),
                frame.width()
            )));
        }
        match frame.channels() {
            1 => acc.push_plane(frame.plane(0), &grid),
            3 => acc.push_plane(luminance(frame)?.plane(0), &grid),
            c => return Err(Error::DimensionMismatch(format!("dark frame {k} has {c} channels"))),
        }
    }
    acc.finish(patch, &format!("{} frames {h}x{w}", frames.len()))
}
