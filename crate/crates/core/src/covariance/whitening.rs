use nalgebra::{DMatrix, DVector};

use super::{CovarianceModel, PatchGrid};
use crate::error::{Error, Result};
use crate::image::PlanarImage;

/// Cholesky factor `L` of a patch covariance and its inverse `W = L^-1`,
/// so that `W Sigma W^T = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningTransform {
    cholesky_l: DMatrix<f64>,
    whitener: DMatrix<f64>,
}

pub fn cholesky_whitener(cov: &CovarianceModel) -> Result<WhiteningTransform> {
    let d = cov.dim();
    let chol = cov
        .matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite {
            context: "Cholesky breakdown while whitening".into(),
            min_eigenvalue: crate::linalg::symmetric_eigenvalues(cov.matrix())[0],
        })?;
    let l = chol.l();
    let w = l
        .solve_lower_triangular(&DMatrix::identity(d, d))
        .ok_or_else(|| Error::NotPositiveDefinite {
            context: "singular Cholesky factor".into(),
            min_eigenvalue: 0.0,
        })?;
    Ok(WhiteningTransform {
        cholesky_l: l,
        whitener: w,
    })
}

impl WhiteningTransform {
    pub fn dim(&self) -> usize {
        self.whitener.nrows()
    }

    pub fn cholesky_l(&self) -> &DMatrix<f64> {
        &self.cholesky_l
    }

    pub fn whitener(&self) -> &DMatrix<f64> {
        &self.whitener
    }

    /// True when `W` is exactly the identity; whitening is then a no-op.
    pub fn is_identity(&self) -> bool {
        let d = self.dim();
        (0..d).all(|i| (0..d).all(|j| self.whitener[(i, j)] == if i == j { 1.0 } else { 0.0 }))
    }

    fn check_grid(&self, grid: &PatchGrid) -> Result<()> {
        if grid.patch_dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "whitener of dimension {} used with {} patches",
                self.dim(),
                grid.patch()
            )));
        }
        Ok(())
    }

    fn apply_tiles(&self, m: &DMatrix<f64>, plane: &[f64], grid: &PatchGrid) -> Vec<f64> {
        let mut out = plane.to_vec();
        let mut tile = DVector::zeros(grid.patch_dim());
        for t in 0..grid.num_tiles() {
            grid.gather(plane, t, tile.as_mut_slice());
            let mapped = m * &tile;
            grid.scatter(mapped.as_slice(), t, &mut out);
        }
        out
    }

    /// Block-diagonal `W_full`: `W` on every tile, identity on the margin.
    pub fn whiten_plane(&self, plane: &[f64], grid: &PatchGrid) -> Result<Vec<f64>> {
        self.check_grid(grid)?;
        if plane.len() != grid.plane_len() {
            return Err(Error::DimensionMismatch(format!(
                "plane of {} samples for a {}x{} grid",
                plane.len(),
                grid.height(),
                grid.width()
            )));
        }
        if self.is_identity() {
            return Ok(plane.to_vec());
        }
        Ok(self.apply_tiles(&self.whitener, plane, grid))
    }

    /// Block-diagonal `L_full`, the coloring inverse of [`Self::whiten_plane`].
    pub fn color_plane(&self, plane: &[f64], grid: &PatchGrid) -> Result<Vec<f64>> {
        self.check_grid(grid)?;
        Ok(self.apply_tiles(&self.cholesky_l, plane, grid))
    }

    /// Whiten every channel of a measurement image independently.
    pub fn whiten_image(&self, img: &PlanarImage, grid: &PatchGrid) -> Result<PlanarImage> {
        let mut out = img.clone();
        for c in 0..img.channels() {
            let w = self.whiten_plane(img.plane(c), grid)?;
            out.plane_mut(c).copy_from_slice(&w);
        }
        Ok(out)
    }
}
