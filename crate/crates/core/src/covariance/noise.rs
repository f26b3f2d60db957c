use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};

use super::{cholesky_whitener, CovarianceModel, PatchGrid};
use crate::error::{Error, Result};
use crate::image::PlanarImage;
use crate::rng::{self, Domain};

/// Draw `n = sigma_y * L z` independently on every tile of every channel.
///
/// Tile `t` of channel `c` uses the stream keyed `(seed, c, t)`; margin
/// pixels get i.i.d. `sigma_y * N(0, 1)` from a per-channel margin stream.
pub fn sample_correlated_noise(
    cov: &CovarianceModel,
    sigma_y: f64,
    grid: &PatchGrid,
    channels: usize,
    seed: u64,
) -> Result<PlanarImage> {
    if grid.patch() != cov.patch() {
        return Err(Error::DimensionMismatch(format!(
            "grid uses {} patches, covariance is for {}",
            grid.patch(),
            cov.patch()
        )));
    }
    if !(sigma_y >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma_y = {sigma_y}")));
    }
    let mut out = PlanarImage::zeros(channels, grid.height(), grid.width());
    if sigma_y == 0.0 {
        return Ok(out);
    }
    let l = cholesky_whitener(cov)?.cholesky_l().clone() * sigma_y;
    let d = grid.patch_dim();
    let margin = grid.margin_indices();
    for c in 0..channels {
        let plane = out.plane_mut(c);
        for t in 0..grid.num_tiles() {
            let mut rng = rng::stream(seed, Domain::TileNoise, c as u32, t as u32);
            let z = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
            let n = &l * z;
            grid.scatter(n.as_slice(), t, plane);
        }
        let mut rng = rng::stream(seed, Domain::MarginNoise, c as u32, 0);
        for &i in &margin {
            let z: f64 = StandardNormal.sample(&mut rng);
            plane[i] = sigma_y * z;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::PatchSize;

    #[test]
    fn zero_sigma_gives_zero_noise() {
        let cov = CovarianceModel::identity(PatchSize::new(2, 2));
        let grid = PatchGrid::new(5, 5, PatchSize::new(2, 2));
        let n = sample_correlated_noise(&cov, 0.0, &grid, 3, 1).unwrap();
        assert!(n.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let cov = CovarianceModel::identity(PatchSize::new(2, 2));
        let grid = PatchGrid::new(6, 5, PatchSize::new(2, 2));
        let a = sample_correlated_noise(&cov, 0.3, &grid, 2, 9).unwrap();
        let b = sample_correlated_noise(&cov, 0.3, &grid, 2, 9).unwrap();
        let c = sample_correlated_noise(&cov, 0.3, &grid, 2, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a.plane(0), a.plane(1));
    }

    #[test]
    fn patch_mismatch() {
        let cov = CovarianceModel::identity(PatchSize::new(2, 2));
        let grid = PatchGrid::new(8, 8, PatchSize::new(4, 4));
        assert!(sample_correlated_noise(&cov, 0.1, &grid, 1, 0).is_err());
    }
}
