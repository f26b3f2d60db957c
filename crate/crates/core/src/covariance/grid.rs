use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Patch dimensions, written `HxW` on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchSize {
    pub h: usize,
    pub w: usize,
}

impl PatchSize {
    pub fn new(h: usize, w: usize) -> Self {
        Self { h, w }
    }

    pub fn dim(&self) -> usize {
        self.h * self.w
    }
}

impl Default for PatchSize {
    fn default() -> Self {
        Self { h: 8, w: 8 }
    }
}

impl std::fmt::Display for PatchSize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.h, self.w)
    }
}

impl std::str::FromStr for PatchSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("patch size {s:?} is not of the form HxW"));
        let (h, w) = s.trim().split_once(['x', 'X']).ok_or_else(bad)?;
        let h: usize = h.trim().parse().map_err(|_| bad())?;
        let w: usize = w.trim().parse().map_err(|_| bad())?;
        if h == 0 || w == 0 {
            return Err(bad());
        }
        Ok(Self { h, w })
    }
}

/// Non-overlapping tiling of an image plane in raster order.
///
/// Tiles cover the largest top-left region whose sides are multiples of the
/// patch size; leftover rows and columns form the uncovered margin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchGrid {
    height: usize,
    width: usize,
    patch: PatchSize,
    tiles_y: usize,
    tiles_x: usize,
}

impl PatchGrid {
    pub fn new(height: usize, width: usize, patch: PatchSize) -> Self {
        Self {
            height,
            width,
            patch,
            tiles_y: height / patch.h,
            tiles_x: width / patch.w,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn patch(&self) -> PatchSize {
        self.patch
    }

    pub fn patch_dim(&self) -> usize {
        self.patch.dim()
    }

    pub fn num_tiles(&self) -> usize {
        self.tiles_y * self.tiles_x
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    /// Top-left corner `(row, col)` of tile `index`.
    pub fn origin(&self, index: usize) -> (usize, usize) {
        let (ty, tx) = (index / self.tiles_x, index % self.tiles_x);
        (ty * self.patch.h, tx * self.patch.w)
    }

    pub fn origins(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_tiles()).map(|i| self.origin(i))
    }

    pub fn covered_height(&self) -> usize {
        self.tiles_y * self.patch.h
    }

    pub fn covered_width(&self) -> usize {
        self.tiles_x * self.patch.w
    }

    pub fn has_margin(&self) -> bool {
        self.covered_height() != self.height || self.covered_width() != self.width
    }

    /// Plane offsets of the uncovered margin pixels in raster order.
    pub fn margin_indices(&self) -> Vec<usize> {
        let (ch, cw) = (self.covered_height(), self.covered_width());
        (0..self.height)
            .flat_map(|r| (0..self.width).map(move |c| (r, c)))
            .filter(|&(r, c)| r >= ch || c >= cw)
            .map(|(r, c)| r * self.width + c)
            .collect()
    }

    /// Row-major pixel offsets within the plane for tile `index`.
    pub fn tile_indices(&self, index: usize) -> impl Iterator<Item = usize> + '_ {
        let (r0, c0) = self.origin(index);
        let (ph, pw, w) = (self.patch.h, self.patch.w, self.width);
        (0..ph).flat_map(move |r| (0..pw).map(move |c| (r0 + r) * w + c0 + c))
    }

    /// Copy tile `index` of `plane` into `out` (length `patch_dim`).
    pub fn gather(&self, plane: &[f64], index: usize, out: &mut [f64]) {
        for (dst, src) in out.iter_mut().zip(self.tile_indices(index)) {
            *dst = plane[src];
        }
    }

    pub fn scatter(&self, tile: &[f64], index: usize, plane: &mut [f64]) {
        for (src, dst) in tile.iter().zip(self.tile_indices(index)) {
            plane[dst] = *src;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_patch_sizes() {
        assert_eq!("8x8".parse::<PatchSize>().unwrap(), PatchSize::new(8, 8));
        assert_eq!("4x128".parse::<PatchSize>().unwrap(), PatchSize::new(4, 128));
        assert!("8".parse::<PatchSize>().is_err());
        assert!("0x8".parse::<PatchSize>().is_err());
    }

    #[test]
    fn tiles_are_disjoint_and_cover_with_margin() {
        let grid = PatchGrid::new(10, 13, PatchSize::new(4, 4));
        assert_eq!(grid.num_tiles(), 2 * 3);
        let mut seen = vec![0u8; grid.plane_len()];
        for t in 0..grid.num_tiles() {
            for i in grid.tile_indices(t) {
                seen[i] += 1;
            }
        }
        for i in grid.margin_indices() {
            seen[i] += 1;
        }
        assert!(seen.iter().all(|&s| s == 1));
        assert_eq!(grid.margin_indices().len(), 10 * 13 - 8 * 12);
        assert_eq!(grid.origin(4), (4, 4));
    }

    #[test]
    fn exact_tiling_has_no_margin() {
        let grid = PatchGrid::new(16, 16, PatchSize::default());
        assert!(!grid.has_margin());
        assert!(grid.margin_indices().is_empty());
    }
}
