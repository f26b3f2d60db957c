use crate::error::{Error, Result};
use crate::image::PlanarImage;

/// Predicts the clean image from a noisy state at noise level `sigma_t`.
pub trait Denoiser: Send + Sync {
    fn predict(&self, x_t: &PlanarImage, sigma_t: f64) -> Result<PlanarImage>;
}

impl<D: Denoiser + ?Sized> Denoiser for &D {
    fn predict(&self, x_t: &PlanarImage, sigma_t: f64) -> Result<PlanarImage> {
        (**self).predict(x_t, sigma_t)
    }
}

impl<D: Denoiser + ?Sized> Denoiser for Box<D> {
    fn predict(&self, x_t: &PlanarImage, sigma_t: f64) -> Result<PlanarImage> {
        (**self).predict(x_t, sigma_t)
    }
}

/// Returns its input unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityDenoiser;

impl Denoiser for IdentityDenoiser {
    fn predict(&self, x_t: &PlanarImage, _sigma_t: f64) -> Result<PlanarImage> {
        Ok(x_t.clone())
    }
}

/// Mean of the Gaussian pixel prior.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorMean {
    Constant(f64),
    Image(PlanarImage),
}

/// Posterior mean under an independent Gaussian pixel prior
/// `x0 ~ N(mean, tau^2 I)`: `(tau^2 x + sigma^2 mean) / (tau^2 + sigma^2)`.
#[derive(Debug, Clone)]
pub struct GaussianPriorDenoiser {
    mean: PriorMean,
    tau: f64,
}

impl GaussianPriorDenoiser {
    pub fn new(mean: PriorMean, tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "prior scale tau must be positive, got {tau}"
            )));
        }
        Ok(Self { mean, tau })
    }

    /// Prior with the same mean at every pixel; works for any image size.
    pub fn constant(mean: f64, tau: f64) -> Result<Self> {
        Self::new(PriorMean::Constant(mean), tau)
    }

    pub fn with_mean_image(mean: PlanarImage, tau: f64) -> Result<Self> {
        Self::new(PriorMean::Image(mean), tau)
    }

    pub fn mean(&self) -> &PriorMean {
        &self.mean
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

impl Denoiser for GaussianPriorDenoiser {
    fn predict(&self, x_t: &PlanarImage, sigma_t: f64) -> Result<PlanarImage> {
        let t2 = self.tau * self.tau;
        let s2 = sigma_t * sigma_t;
        let denom = t2 + s2;
        let data = match &self.mean {
            PriorMean::Constant(m) => x_t.data().iter().map(|&x| (t2 * x + s2 * m) / denom).collect(),
            PriorMean::Image(mean) => {
                if !x_t.same_shape(mean) {
                    return Err(Error::DimensionMismatch(format!(
                        "denoiser prior is {:?} but state is {:?}",
                        mean.dims(),
                        x_t.dims()
                    )));
                }
                x_t.data()
                    .iter()
                    .zip(mean.data())
                    .map(|(&x, &m)| (t2 * x + s2 * m) / denom)
                    .collect()
            }
        };
        PlanarImage::new(x_t.channels(), x_t.height(), x_t.width(), data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_prior_shrinks_toward_mean() {
        let d = GaussianPriorDenoiser::constant(0.5, 1.0).unwrap();
        let x = PlanarImage::new(1, 1, 2, vec![1.5, -0.5]).unwrap();
        let out = d.predict(&x, 1.0).unwrap();
        assert_eq!(out.data(), &[1.0, 0.0]);
        let out = d.predict(&x, 0.0).unwrap();
        assert_eq!(out.data(), x.data());
        let img = GaussianPriorDenoiser::with_mean_image(PlanarImage::filled(1, 1, 2, 0.5), 1.0).unwrap();
        assert_eq!(img.predict(&x, 1.0).unwrap().data(), &[1.0, 0.0]);
        assert!(img.predict(&PlanarImage::zeros(1, 2, 2), 1.0).is_err());
        assert!(GaussianPriorDenoiser::constant(0.0, 0.0).is_err());
    }
}
