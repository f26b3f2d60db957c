//! Planar floating-point rasters.

use crate::error::{Error, Result};

/// Multi-channel raster stored channel-major, row-major within a channel.
///
/// Loaded images live in `[0, 1]`; intermediate diffusion states may not.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarImage {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl PlanarImage {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidArgument(format!(
                "image dimensions must be nonzero, got {channels}x{height}x{width}"
            )));
        }
        if data.len() != channels * height * width {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a {channels}x{height}x{width} image",
                data.len()
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self::filled(channels, height, width, 0.0)
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Self {
        assert!(channels > 0 && height > 0 && width > 0, "empty image");
        Self {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `[channels, height, width]`.
    pub fn dims(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }

    /// Samples per channel.
    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[channel * n..(channel + 1) * n]
    }

    pub fn plane_mut(&mut self, channel: usize) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.data[channel * n..(channel + 1) * n]
    }

    pub fn get(&self, channel: usize, row: usize, col: usize) -> f64 {
        self.data[(channel * self.height + row) * self.width + col]
    }

    pub fn set(&mut self, channel: usize, row: usize, col: usize, value: f64) {
        self.data[(channel * self.height + row) * self.width + col] = value;
    }

    pub fn same_shape(&self, other: &PlanarImage) -> bool {
        self.dims() == other.dims()
    }

    pub fn clamped(&self) -> PlanarImage {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = v.clamp(0.0, 1.0);
        }
        out
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> PlanarImage {
        PlanarImage {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    /// Elementwise sum; shapes must agree.
    pub fn add(&self, other: &PlanarImage) -> Result<PlanarImage> {
        if !self.same_shape(other) {
            return Err(Error::DimensionMismatch(format!(
                "cannot add {:?} and {:?}",
                self.dims(),
                other.dims()
            )));
        }
        Ok(PlanarImage {
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
            ..*self
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length() {
        assert!(matches!(
            PlanarImage::new(3, 2, 2, vec![0.0; 11]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn channel_major_indexing() {
        let img = PlanarImage::new(2, 2, 3, (0..12).map(f64::from).collect()).unwrap();
        assert_eq!(img.get(1, 0, 0), 6.0);
        assert_eq!(img.get(0, 1, 2), 5.0);
        assert_eq!(img.plane(1), &[6.0, 7.0, 8.0, 9.0, 10.0, 11.0]);
    }

    #[test]
    fn clamp_bounds() {
        let img = PlanarImage::new(1, 1, 3, vec![-0.5, 0.5, 1.2]).unwrap();
        assert_eq!(img.clamped().data(), &[0.0, 0.5, 1.0]);
    }
}
