use nalgebra::{DMatrix, DVector};

use super::degradation::{DegradationKind, DegradationSpec};
use crate::covariance::{PatchGrid, WhiteningTransform};
use crate::error::{Error, Result};
use crate::linalg::{self, FullSvd};

/// Largest per-channel input dimension for which a dense SVD is attempted.
pub const DENSE_DIM_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Dense,
    StructuredSeparable,
    StructuredBlockDiagonal,
}

impl BackendKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BackendKind::Dense => "dense",
            BackendKind::StructuredSeparable => "structured-separable",
            BackendKind::StructuredBlockDiagonal => "structured-block-diagonal",
        }
    }
}

#[derive(Debug, Clone)]
enum Backend {
    Identity,
    /// `H = A_v (x) A_h`, acting on a plane as `A_v X A_h^T`.
    Separable {
        a_v: DMatrix<f64>,
        a_h: DMatrix<f64>,
        v_svd: FullSvd,
        h_svd: FullSvd,
    },
    /// The same square block on every tile, identity on the margin.
    BlockDiagonal {
        grid: PatchGrid,
        margin: Vec<usize>,
        block: DMatrix<f64>,
        block_svd: FullSvd,
    },
    Dense {
        matrix: DMatrix<f64>,
        svd: FullSvd,
    },
}

/// A per-channel linear operator `H: R^d -> R^m` held through its singular
/// system `H = U S V^T`.
///
/// Spectral coordinate `i` pairs the `i`-th column of `V` with the `i`-th
/// singular value (non-increasing). Coordinates `i >= min(m, d)` and those
/// whose singular value was truncated to zero are unobserved.
#[derive(Debug, Clone)]
pub struct SvdOperator {
    in_shape: (usize, usize),
    out_shape: (usize, usize),
    backend: Backend,
    singular_values: Vec<f64>,
    /// Sorted spectral index -> raw input coordinate. Length `d`.
    in_index: Vec<usize>,
    /// Sorted spectral index -> raw output coordinate. Length `min(m, d)`.
    out_index: Vec<usize>,
    threshold: f64,
}

/// `upsilon = S^+ U^T y`, with `None` on unobserved coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasurement {
    pub values: Vec<Option<f64>>,
}

impl SpectralMeasurement {
    pub fn is_observed(&self, i: usize) -> bool {
        self.values[i].is_some()
    }

    pub fn num_observed(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }
}

/// Build the singular system of a degradation on `height x width` planes.
pub fn build_operator(spec: &DegradationSpec, height: usize, width: usize) -> Result<SvdOperator> {
    let (oh, ow) = spec.output_size(height, width)?;
    if !(spec.sv_threshold >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "singular value threshold {}",
            spec.sv_threshold
        )));
    }
    if spec.kind == DegradationKind::Identity {
        let d = height * width;
        let pairs = (0..d).map(|i| (1.0, i, i)).collect();
        return Ok(SvdOperator::assemble(
            (height, width),
            (height, width),
            Backend::Identity,
            pairs,
            spec.sv_threshold,
        ));
    }
    let (a_v, a_h) = spec.axis_matrices(height, width)?;
    let v_svd = linalg::full_svd(&a_v)?;
    let h_svd = linalg::full_svd(&a_h)?;
    let mut pairs = Vec::with_capacity(oh * ow);
    for a in 0..oh {
        for b in 0..ow {
            pairs.push((
                v_svd.singular_values[a] * h_svd.singular_values[b],
                a * width + b,
                a * ow + b,
            ));
        }
    }
    Ok(SvdOperator::assemble(
        (height, width),
        (oh, ow),
        Backend::Separable { a_v, a_h, v_svd, h_svd },
        pairs,
        spec.sv_threshold,
    ))
}

/// Compose the patchwise whitener with `op`: `H~ = W_full H`.
///
/// Identity operators keep a block-diagonal structure. Everything else goes
/// through a dense SVD and is limited to [`DENSE_DIM_CAP`] per channel.
/// An exactly-identity whitener returns `op` unchanged.
pub fn whiten_operator(op: &SvdOperator, wt: &WhiteningTransform, grid: &PatchGrid) -> Result<SvdOperator> {
    if (grid.height(), grid.width()) != op.out_shape {
        return Err(Error::DimensionMismatch(format!(
            "whitening grid is {}x{} but the operator outputs {}x{}",
            grid.height(),
            grid.width(),
            op.out_shape.0,
            op.out_shape.1
        )));
    }
    if grid.patch_dim() != wt.dim() {
        return Err(Error::DimensionMismatch(format!(
            "whitener dimension {} does not match {} patches",
            wt.dim(),
            grid.patch()
        )));
    }
    if wt.is_identity() {
        return Ok(op.clone());
    }
    if matches!(op.backend, Backend::Identity) {
        let block = wt.whitener().clone();
        let block_svd = linalg::full_svd(&block)?;
        let margin = grid.margin_indices();
        let dp = grid.patch_dim();
        let nt = grid.num_tiles();
        let mut pairs = Vec::with_capacity(op.in_dim());
        for t in 0..nt {
            for j in 0..dp {
                pairs.push((block_svd.singular_values[j], t * dp + j, t * dp + j));
            }
        }
        for k in 0..margin.len() {
            pairs.push((1.0, nt * dp + k, nt * dp + k));
        }
        return Ok(SvdOperator::assemble(
            op.in_shape,
            op.out_shape,
            Backend::BlockDiagonal {
                grid: grid.clone(),
                margin,
                block,
                block_svd,
            },
            pairs,
            op.threshold,
        ));
    }

    let d = op.in_dim();
    if d > DENSE_DIM_CAP {
        return Err(Error::Capacity(format!(
            "whitened {}x{} operator needs a dense SVD of dimension {d} > {DENSE_DIM_CAP}; \
             reduce the image size (e.g. to 64x64 or smaller)",
            op.in_shape.0, op.in_shape.1
        )));
    }
    let h = op.exact_matrix();
    let mut whitened = DMatrix::zeros(h.nrows(), h.ncols());
    for j in 0..h.ncols() {
        let col: Vec<f64> = h.column(j).iter().copied().collect();
        let w = wt.whiten_plane(&col, grid)?;
        whitened.set_column(j, &DVector::from_vec(w));
    }
    dense_operator(whitened, op.in_shape, op.out_shape, op.threshold)
}

/// Wrap an explicit `m x d` matrix; mostly useful for tests and oracles.
pub fn dense_operator(
    matrix: DMatrix<f64>,
    in_shape: (usize, usize),
    out_shape: (usize, usize),
    threshold: f64,
) -> Result<SvdOperator> {
    let (m, d) = matrix.shape();
    if m != out_shape.0 * out_shape.1 || d != in_shape.0 * in_shape.1 {
        return Err(Error::DimensionMismatch(format!(
            "{m}x{d} matrix for shapes {in_shape:?} -> {out_shape:?}"
        )));
    }
    let svd = linalg::full_svd(&matrix)?;
    let pairs = (0..m.min(d)).map(|i| (svd.singular_values[i], i, i)).collect();
    Ok(SvdOperator::assemble(
        in_shape,
        out_shape,
        Backend::Dense { matrix, svd },
        pairs,
        threshold,
    ))
}

impl SvdOperator {
    fn assemble(
        in_shape: (usize, usize),
        out_shape: (usize, usize),
        backend: Backend,
        mut pairs: Vec<(f64, usize, usize)>,
        threshold: f64,
    ) -> Self {
        let d = in_shape.0 * in_shape.1;
        // Stable: ties keep construction order.
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut paired = vec![false; d];
        let mut singular_values = Vec::with_capacity(pairs.len());
        let mut in_index = Vec::with_capacity(d);
        let mut out_index = Vec::with_capacity(pairs.len());
        for &(s, i, o) in &pairs {
            singular_values.push(if s < threshold { 0.0 } else { s });
            in_index.push(i);
            out_index.push(o);
            paired[i] = true;
        }
        in_index.extend((0..d).filter(|&i| !paired[i]));
        Self {
            in_shape,
            out_shape,
            backend,
            singular_values,
            in_index,
            out_index,
            threshold,
        }
    }

    pub fn in_shape(&self) -> (usize, usize) {
        self.in_shape
    }

    pub fn out_shape(&self) -> (usize, usize) {
        self.out_shape
    }

    pub fn in_dim(&self) -> usize {
        self.in_shape.0 * self.in_shape.1
    }

    pub fn out_dim(&self) -> usize {
        self.out_shape.0 * self.out_shape.1
    }

    /// Non-increasing, length `min(m, d)`, truncated entries exactly zero.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Singular value of spectral coordinate `i` (zero past `min(m, d)`).
    pub fn singular_value(&self, i: usize) -> f64 {
        self.singular_values.get(i).copied().unwrap_or(0.0)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn backend_kind(&self) -> BackendKind {
        match self.backend {
            Backend::Identity | Backend::Separable { .. } => BackendKind::StructuredSeparable,
            Backend::BlockDiagonal { .. } => BackendKind::StructuredBlockDiagonal,
            Backend::Dense { .. } => BackendKind::Dense,
        }
    }

    fn check_len(&self, got: usize, expected: usize, what: &str) -> Result<()> {
        if got != expected {
            return Err(Error::DimensionMismatch(format!(
                "{what} has length {got}, operator expects {expected}"
            )));
        }
        Ok(())
    }

    fn raw_vt(&self, x: &[f64]) -> Vec<f64> {
        let (h, w) = self.in_shape;
        match &self.backend {
            Backend::Identity => x.to_vec(),
            Backend::Separable { v_svd, h_svd, .. } => {
                let xm = DMatrix::from_row_slice(h, w, x);
                row_major(&(v_svd.v.transpose() * xm * &h_svd.v))
            }
            Backend::BlockDiagonal {
                grid,
                margin,
                block_svd,
                ..
            } => block_forward(grid, margin, &block_svd.v.transpose(), x),
            Backend::Dense { svd, .. } => (svd.v.transpose() * DVector::from_column_slice(x)).as_slice().to_vec(),
        }
    }

    fn raw_v(&self, raw: &[f64]) -> Vec<f64> {
        let (h, w) = self.in_shape;
        match &self.backend {
            Backend::Identity => raw.to_vec(),
            Backend::Separable { v_svd, h_svd, .. } => {
                let r = DMatrix::from_row_slice(h, w, raw);
                row_major(&(&v_svd.v * r * h_svd.v.transpose()))
            }
            Backend::BlockDiagonal {
                grid,
                margin,
                block_svd,
                ..
            } => block_backward(grid, margin, &block_svd.v, raw),
            Backend::Dense { svd, .. } => (&svd.v * DVector::from_column_slice(raw)).as_slice().to_vec(),
        }
    }

    fn raw_ut(&self, y: &[f64]) -> Vec<f64> {
        let (oh, ow) = self.out_shape;
        match &self.backend {
            Backend::Identity => y.to_vec(),
            Backend::Separable { v_svd, h_svd, .. } => {
                let ym = DMatrix::from_row_slice(oh, ow, y);
                row_major(&(v_svd.u.transpose() * ym * &h_svd.u))
            }
            Backend::BlockDiagonal {
                grid,
                margin,
                block_svd,
                ..
            } => block_forward(grid, margin, &block_svd.u.transpose(), y),
            Backend::Dense { svd, .. } => (svd.u.transpose() * DVector::from_column_slice(y)).as_slice().to_vec(),
        }
    }

    fn raw_u(&self, raw: &[f64]) -> Vec<f64> {
        let (oh, ow) = self.out_shape;
        match &self.backend {
            Backend::Identity => raw.to_vec(),
            Backend::Separable { v_svd, h_svd, .. } => {
                let r = DMatrix::from_row_slice(oh, ow, raw);
                row_major(&(&v_svd.u * r * h_svd.u.transpose()))
            }
            Backend::BlockDiagonal {
                grid,
                margin,
                block_svd,
                ..
            } => block_backward(grid, margin, &block_svd.u, raw),
            Backend::Dense { svd, .. } => (&svd.u * DVector::from_column_slice(raw)).as_slice().to_vec(),
        }
    }

    /// `V^T x`, in sorted spectral order.
    pub fn to_spectral(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len(), self.in_dim(), "image vector")?;
        let raw = self.raw_vt(x);
        Ok(self.in_index.iter().map(|&i| raw[i]).collect())
    }

    /// `V xi`.
    pub fn from_spectral(&self, xi: &[f64]) -> Result<Vec<f64>> {
        self.check_len(xi.len(), self.in_dim(), "spectral vector")?;
        let mut raw = vec![0.0; xi.len()];
        for (&i, &v) in self.in_index.iter().zip(xi) {
            raw[i] = v;
        }
        Ok(self.raw_v(&raw))
    }

    /// `U^T y`, in sorted order, length `min(m, d)`.
    pub fn measurement_coefficients(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(y.len(), self.out_dim(), "measurement")?;
        let raw = self.raw_ut(y);
        Ok(self.out_index.iter().map(|&o| raw[o]).collect())
    }

    /// `upsilon_i = (U^T y)_i / s_i` where `s_i > 0`.
    pub fn measurement_to_spectral(&self, y: &[f64]) -> Result<SpectralMeasurement> {
        let coeffs = self.measurement_coefficients(y)?;
        let mut values = vec![None; self.in_dim()];
        for (i, (&c, &s)) in coeffs.iter().zip(&self.singular_values).enumerate() {
            if s > 0.0 {
                values[i] = Some(c / s);
            }
        }
        Ok(SpectralMeasurement { values })
    }

    /// `U S V^T x` with the truncated singular values.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let xi = self.to_spectral(x)?;
        let mut raw = vec![0.0; self.out_dim()];
        for (k, (&o, &s)) in self.out_index.iter().zip(&self.singular_values).enumerate() {
            raw[o] = s * xi[k];
        }
        Ok(self.raw_u(&raw))
    }

    /// Moore-Penrose pseudoinverse `V S^+ U^T y`.
    pub fn apply_pinv(&self, y: &[f64]) -> Result<Vec<f64>> {
        let coeffs = self.measurement_coefficients(y)?;
        let mut xi = vec![0.0; self.in_dim()];
        for (k, (&c, &s)) in coeffs.iter().zip(&self.singular_values).enumerate() {
            if s > 0.0 {
                xi[k] = c / s;
            }
        }
        self.from_spectral(&xi)
    }

    /// The explicit untruncated `m x d` matrix this operator was built from.
    pub fn exact_matrix(&self) -> DMatrix<f64> {
        match &self.backend {
            Backend::Identity => DMatrix::identity(self.out_dim(), self.in_dim()),
            Backend::Separable { a_v, a_h, .. } => a_v.kronecker(a_h),
            Backend::BlockDiagonal { grid, block, .. } => {
                let n = grid.plane_len();
                let mut m = DMatrix::identity(n, n);
                for t in 0..grid.num_tiles() {
                    let idx: Vec<usize> = grid.tile_indices(t).collect();
                    for (a, &i) in idx.iter().enumerate() {
                        for (b, &j) in idx.iter().enumerate() {
                            m[(i, j)] = block[(a, b)];
                        }
                    }
                }
                m
            }
            Backend::Dense { matrix, .. } => matrix.clone(),
        }
    }

    /// Assemble the truncated operator `U S V^T` column by column.
    pub fn assembled_matrix(&self) -> Result<DMatrix<f64>> {
        let d = self.in_dim();
        let mut m = DMatrix::zeros(self.out_dim(), d);
        let mut e = vec![0.0; d];
        for j in 0..d {
            e[j] = 1.0;
            let col = self.apply(&e)?;
            m.set_column(j, &DVector::from_vec(col));
            e[j] = 0.0;
        }
        Ok(m)
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = m.shape();
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        out.extend(m.row(i).iter());
    }
    out
}

/// Plane -> raw block coordinates, applying `m` to every tile.
fn block_forward(grid: &PatchGrid, margin: &[usize], m: &DMatrix<f64>, plane: &[f64]) -> Vec<f64> {
    let dp = grid.patch_dim();
    let mut out = vec![0.0; plane.len()];
    let mut tile = DVector::zeros(dp);
    for t in 0..grid.num_tiles() {
        grid.gather(plane, t, tile.as_mut_slice());
        let mapped = m * &tile;
        out[t * dp..(t + 1) * dp].copy_from_slice(mapped.as_slice());
    }
    let base = grid.num_tiles() * dp;
    for (k, &i) in margin.iter().enumerate() {
        out[base + k] = plane[i];
    }
    out
}

/// Raw block coordinates -> plane, applying `m` to every tile.
fn block_backward(grid: &PatchGrid, margin: &[usize], m: &DMatrix<f64>, raw: &[f64]) -> Vec<f64> {
    let dp = grid.patch_dim();
    let mut out = vec![0.0; raw.len()];
    for t in 0..grid.num_tiles() {
        let tile = DVector::from_column_slice(&raw[t * dp..(t + 1) * dp]);
        let mapped = m * tile;
        grid.scatter(mapped.as_slice(), t, &mut out);
    }
    let base = grid.num_tiles() * dp;
    for (k, &i) in margin.iter().enumerate() {
        out[i] = raw[base + k];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{build_synthetic_covariance, cholesky_whitener, BandScaling, CovarianceModel, PatchSize};

    fn probe(n: usize, seed: u64) -> Vec<f64> {
        (0..n).map(|i| ((i as f64 + 0.5) * (seed as f64 + 1.3)).sin()).collect()
    }

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn identity_is_trivial() {
        let op = build_operator(&DegradationSpec::identity(), 16, 16).unwrap();
        assert_eq!(op.singular_values().len(), 256);
        assert!(op.singular_values().iter().all(|&s| s == 1.0));
        let x = probe(256, 1);
        assert_eq!(op.to_spectral(&x).unwrap(), x);
        assert_eq!(op.apply(&x).unwrap(), x);
        let m = op.measurement_to_spectral(&x).unwrap();
        assert!(m.values.iter().zip(&x).all(|(u, v)| *u == Some(*v)));
    }

    #[test]
    fn block_average_singular_values() {
        let op = build_operator(&DegradationSpec::from_task("sr2").unwrap(), 16, 16).unwrap();
        assert_eq!(op.singular_values().len(), 64);
        for &s in op.singular_values() {
            assert!((s - 0.5).abs() < 1e-12);
        }
        let c = vec![0.42; 256];
        for v in op.apply(&c).unwrap() {
            assert!((v - 0.42).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_round_trip_and_parseval() {
        for task in ["deblur-uniform", "sr4", "deblur-aniso"] {
            let op = build_operator(&DegradationSpec::from_task(task).unwrap(), 16, 16).unwrap();
            let x = probe(256, 3);
            let xi = op.to_spectral(&x).unwrap();
            assert!((norm(&xi) - norm(&x)).abs() < 1e-10);
            let back = op.from_spectral(&xi).unwrap();
            let err = back.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10, "{task}: {err}");
        }
    }

    #[test]
    fn truncated_coordinate_is_unobserved() {
        let op = build_operator(&DegradationSpec::from_task("deblur-uniform").unwrap(), 16, 16).unwrap();
        let zeros = op.singular_values().iter().filter(|&&s| s == 0.0).count();
        assert!(zeros > 0);
        assert!(op.singular_values().iter().all(|&s| s == 0.0 || s >= 0.03));
        let m = op.measurement_to_spectral(&probe(256, 2)).unwrap();
        assert_eq!(m.num_observed(), 256 - zeros);
        assert!(!m.is_observed(255));
    }

    #[test]
    fn noiseless_measurement_recovers_spectral_state() {
        let op = build_operator(&DegradationSpec::from_task("sr2").unwrap(), 16, 16).unwrap();
        let x = probe(256, 5);
        let y = op.apply(&x).unwrap();
        let xi = op.to_spectral(&x).unwrap();
        let m = op.measurement_to_spectral(&y).unwrap();
        for (i, u) in m.values.iter().enumerate() {
            if let Some(u) = u {
                assert!((u - xi[i]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn identity_whitening_is_noop() {
        let op = build_operator(&DegradationSpec::from_task("deblur-gauss").unwrap(), 16, 16).unwrap();
        let wt = cholesky_whitener(&CovarianceModel::identity(PatchSize::default())).unwrap();
        let grid = PatchGrid::new(16, 16, PatchSize::default());
        let white = whiten_operator(&op, &wt, &grid).unwrap();
        assert_eq!(white.singular_values(), op.singular_values());
    }

    #[test]
    fn whitened_identity_singular_values_are_inverse_sqrt_eigenvalues() {
        let cov = build_synthetic_covariance(1.0, 0.2, &[1, 8], 0.0, PatchSize::default(), BandScaling::Unit).unwrap();
        let wt = cholesky_whitener(&cov).unwrap();
        let grid = PatchGrid::new(8, 8, PatchSize::default());
        let op = build_operator(&DegradationSpec::identity().with_threshold(0.0), 8, 8).unwrap();
        let white = whiten_operator(&op, &wt, &grid).unwrap();
        assert_eq!(white.backend_kind(), BackendKind::StructuredBlockDiagonal);
        let mut expected: Vec<f64> = crate::linalg::symmetric_eigenvalues(cov.matrix())
            .iter()
            .map(|l| 1.0 / l.sqrt())
            .collect();
        expected.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in white.singular_values().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-9 * b.max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn dense_cap_is_enforced() {
        let op = build_operator(&DegradationSpec::from_task("deblur-uniform").unwrap(), 72, 72).unwrap();
        let cov = build_synthetic_covariance(1.0, 0.3, &[1], 0.0, PatchSize::default(), BandScaling::Unit).unwrap();
        let wt = cholesky_whitener(&cov).unwrap();
        let grid = PatchGrid::new(72, 72, PatchSize::default());
        assert!(matches!(whiten_operator(&op, &wt, &grid), Err(Error::Capacity(_))));
    }

    #[test]
    fn dimension_mismatch() {
        let op = build_operator(&DegradationSpec::identity(), 4, 4).unwrap();
        assert!(matches!(op.to_spectral(&[0.0; 15]), Err(Error::DimensionMismatch(_))));
        assert!(matches!(op.apply_pinv(&[0.0; 17]), Err(Error::DimensionMismatch(_))));
    }
}
