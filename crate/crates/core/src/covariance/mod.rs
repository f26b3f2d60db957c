//! Patch-level noise covariances: construction, estimation, perturbation,
//! whitening and correlated noise synthesis.
//!
//! Every [`CovarianceModel`] is stored with unit mean diagonal. The absolute
//! noise magnitude is carried separately as `sigma_y`, so the actual noise
//! covariance on a tile is `sigma_y^2 * matrix`.

mod estimate;
mod grid;
mod noise;
mod whitening;

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::linalg;
use crate::rng::{self, Domain};

pub use estimate::{estimate_covariance, luminance, CovarianceAccumulator};
pub use grid::{PatchGrid, PatchSize};
pub use noise::sample_correlated_noise;
pub use whitening::{cholesky_whitener, WhiteningTransform};

/// How the banded adjacency matrix is scaled before `alpha` multiplies it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandScaling {
    /// Ones on the selected off-diagonals.
    #[default]
    Unit,
    /// Ones divided by the largest row sum, so any `alpha < 1` stays SPD.
    MaxDegree,
}

impl std::str::FromStr for BandScaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(Self::Unit),
            "max-degree" | "degree" => Ok(Self::MaxDegree),
            other => Err(Error::InvalidArgument(format!(
                "band scaling {other:?} (expected unit or max-degree)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    Synthetic {
        sigma: f64,
        alpha: f64,
        band_offsets: Vec<usize>,
        epsilon: f64,
        band_scaling: BandScaling,
    },
    Estimated {
        num_patches: usize,
        source_id: String,
    },
    Perturbed {
        base_id: String,
        level: f64,
        seed: u64,
    },
}

impl Provenance {
    /// Short identifier used when this model becomes the base of another.
    pub fn id(&self) -> String {
        match self {
            Provenance::Synthetic {
                alpha, band_offsets, ..
            } => format!("synthetic(alpha={alpha},bands={band_offsets:?})"),
            Provenance::Estimated { source_id, .. } => format!("estimated({source_id})"),
            Provenance::Perturbed {
                base_id, level, seed, ..
            } => format!("perturbed({base_id},level={level},seed={seed})"),
        }
    }
}

/// Symmetric positive definite patch covariance with unit mean diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    patch: PatchSize,
    matrix: DMatrix<f64>,
    provenance: Provenance,
    normalization_scale: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    patch_h: usize,
    patch_w: usize,
    provenance: Provenance,
    normalization_scale: f64,
}

impl CovarianceModel {
    /// Symmetrize, scale to unit mean diagonal and verify positive
    /// definiteness. `normalization_scale` records the divided-out mean.
    pub fn from_matrix(patch: PatchSize, mut matrix: DMatrix<f64>, provenance: Provenance) -> Result<Self> {
        let d = patch.dim();
        if matrix.shape() != (d, d) {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} covariance for a {patch} patch (d = {d})",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("covariance has non-finite entries".into()));
        }
        linalg::symmetrize(&mut matrix);
        let scale = mean_diagonal(&matrix);
        if !(scale > 0.0) {
            return Err(Error::NotPositiveDefinite {
                context: "covariance diagonal has non-positive mean".into(),
                min_eigenvalue: linalg::symmetric_eigenvalues(&matrix)[0],
            });
        }
        matrix /= scale;
        check_positive_definite(&matrix, "covariance")?;
        Ok(Self {
            patch,
            matrix,
            provenance,
            normalization_scale: scale,
        })
    }

    pub fn identity(patch: PatchSize) -> Self {
        let d = patch.dim();
        Self {
            patch,
            matrix: DMatrix::identity(d, d),
            provenance: Provenance::Synthetic {
                sigma: 1.0,
                alpha: 0.0,
                band_offsets: Vec::new(),
                epsilon: 0.0,
                band_scaling: BandScaling::Unit,
            },
            normalization_scale: 1.0,
        }
    }

    pub fn patch(&self) -> PatchSize {
        self.patch
    }

    pub fn dim(&self) -> usize {
        self.patch.dim()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn normalization_scale(&self) -> f64 {
        self.normalization_scale
    }

    pub fn is_identity(&self) -> bool {
        let d = self.dim();
        (0..d).all(|i| (0..d).all(|j| self.matrix[(i, j)] == if i == j { 1.0 } else { 0.0 }))
    }

    /// Sidecar path for a covariance file: `cov.ct` -> `cov.ct.json`.
    pub fn sidecar_path(path: &Path) -> PathBuf {
        let mut name = path.as_os_str().to_owned();
        name.push(".json");
        PathBuf::from(name)
    }

    /// Write the matrix as a `[d, d]` raw tensor plus its JSON sidecar.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let d = self.dim();
        // Row-major payload.
        let data: Vec<f64> = (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .map(|(i, j)| self.matrix[(i, j)])
            .collect();
        io::write_raw_tensor(&data, &[d, d], path)?;
        let sidecar = Sidecar {
            patch_h: self.patch.h,
            patch_w: self.patch.w,
            provenance: self.provenance.clone(),
            normalization_scale: self.normalization_scale,
        };
        let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
        let sidecar_path = Self::sidecar_path(path);
        io::write_atomic(&sidecar_path, |out| {
            use std::io::Write;
            out.write_all(json.as_bytes())?;
            out.write_all(b"\n")
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (data, dims) = io::read_raw_tensor(path)?;
        let sidecar_path = Self::sidecar_path(path);
        let text = std::fs::read_to_string(&sidecar_path).map_err(|e| Error::io(&sidecar_path, e))?;
        let sidecar: Sidecar = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: sidecar_path.clone(),
            source,
        })?;
        let patch = PatchSize::new(sidecar.patch_h, sidecar.patch_w);
        let d = patch.dim();
        if dims != [d, d] {
            return Err(Error::DimensionMismatch(format!(
                "{} has dims {dims:?} but its sidecar declares a {patch} patch",
                path.display()
            )));
        }
        let matrix = DMatrix::from_row_slice(d, d, &data);
        let mut model = Self::from_matrix(patch, matrix, sidecar.provenance)?;
        // The f32 payload renormalizes to ~1; the recorded scale is the meaningful one.
        model.normalization_scale = sidecar.normalization_scale;
        Ok(model)
    }
}

fn mean_diagonal(m: &DMatrix<f64>) -> f64 {
    let diag = m.diagonal();
    let first = diag[0];
    if diag.iter().all(|&v| v == first) {
        // Exact for uniform diagonals, so scaled identities normalize to I.
        return first;
    }
    diag.iter().sum::<f64>() / diag.len() as f64
}

pub(crate) fn check_positive_definite(m: &DMatrix<f64>, context: &str) -> Result<()> {
    if m.clone().cholesky().is_some() {
        Ok(())
    } else {
        Err(Error::NotPositiveDefinite {
            context: context.to_string(),
            min_eigenvalue: linalg::symmetric_eigenvalues(m)[0],
        })
    }
}

/// Banded synthetic covariance `sigma^2 (I + alpha B) + epsilon I`, where `B`
/// has ones on the off-diagonals at the given vectorized index offsets.
pub fn build_synthetic_covariance(
    sigma: f64,
    alpha: f64,
    band_offsets: &[usize],
    epsilon: f64,
    patch: PatchSize,
    band_scaling: BandScaling,
) -> Result<CovarianceModel> {
    if !(sigma > 0.0) || !(alpha >= 0.0) || !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need sigma > 0, alpha >= 0, epsilon >= 0 (got {sigma}, {alpha}, {epsilon})"
        )));
    }
    let d = patch.dim();
    if let Some(&bad) = band_offsets.iter().find(|&&k| k == 0 || k >= d) {
        return Err(Error::InvalidArgument(format!(
            "band offset {bad} outside 1..{d} for a {patch} patch"
        )));
    }
    let mut band = DMatrix::<f64>::zeros(d, d);
    for &k in band_offsets {
        for i in 0..d - k {
            band[(i, i + k)] = 1.0;
            band[(i + k, i)] = 1.0;
        }
    }
    if band_scaling == BandScaling::MaxDegree {
        let max_degree = band.row_iter().map(|r| r.sum()).fold(0.0, f64::max);
        if max_degree > 0.0 {
            band /= max_degree;
        }
    }
    let s2 = sigma * sigma;
    let matrix = DMatrix::identity(d, d) * (s2 + epsilon) + band * (s2 * alpha);
    let provenance = Provenance::Synthetic {
        sigma,
        alpha,
        band_offsets: band_offsets.to_vec(),
        epsilon,
        band_scaling,
    };
    CovarianceModel::from_matrix(patch, matrix, provenance).map_err(|e| match e {
        Error::NotPositiveDefinite { min_eigenvalue, .. } => Error::NotPositiveDefinite {
            context: format!("alpha = {alpha} is too large for band offsets {band_offsets:?}"),
            min_eigenvalue,
        },
        other => other,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighborhood {
    Horizontal,
    Vertical,
    Plus,
}

impl std::str::FromStr for Neighborhood {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "horizontal" => Ok(Self::Horizontal),
            "vertical" => Ok(Self::Vertical),
            "plus" => Ok(Self::Plus),
            other => Err(Error::InvalidArgument(format!("unknown neighborhood {other:?}"))),
        }
    }
}

/// Vectorized index offsets of 2-D neighbors under row-major tiling.
pub fn offsets_for_2d_neighbors(patch_w: usize, neighborhood: Neighborhood) -> Vec<usize> {
    match neighborhood {
        Neighborhood::Horizontal => vec![1],
        Neighborhood::Vertical => vec![patch_w],
        Neighborhood::Plus => vec![1, patch_w],
    }
}

/// Add a random symmetric perturbation of relative Frobenius size `level`,
/// project back onto the SPD cone and renormalize.
pub fn perturb_covariance(cov: &CovarianceModel, level: f64, seed: u64) -> Result<CovarianceModel> {
    if !(level >= 0.0) || !level.is_finite() {
        return Err(Error::InvalidArgument(format!("perturbation level {level}")));
    }
    let provenance = Provenance::Perturbed {
        base_id: cov.provenance.id(),
        level,
        seed,
    };
    if level == 0.0 {
        return Ok(CovarianceModel {
            provenance,
            ..cov.clone()
        });
    }
    let d = cov.dim();
    let mut rng = rng::stream(seed, Domain::Perturbation, 0, 0);
    let e = DMatrix::<f64>::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
    let sym = (&e + e.transpose()) * 0.5;
    let delta = sym.clone() * (level * cov.matrix.norm() / sym.norm());
    let perturbed = &cov.matrix + delta;

    let floor = 1e-6 * mean_diagonal(&cov.matrix);
    let eig = nalgebra::SymmetricEigen::new(perturbed);
    let clipped = eig.eigenvalues.map(|l| l.max(floor));
    let mut projected = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    linalg::symmetrize(&mut projected);
    let mut out = CovarianceModel::from_matrix(cov.patch, projected, provenance)?;
    out.normalization_scale = cov.normalization_scale;
    Ok(out)
}
