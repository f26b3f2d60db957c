//! Build banded synthetic covariances and check their whiteners.
//!
//! ```text
//! cargo run --release --example make_covariance -- [out.ct]
//! ```

use card::covariance::{
    build_synthetic_covariance, cholesky_whitener, offsets_for_2d_neighbors, BandScaling, CovarianceModel,
    Neighborhood, PatchSize,
};
use card::linalg::{max_abs_diff, symmetric_eigenvalues};
use nalgebra::DMatrix;

fn main() -> card::error::Result<()> {
    let patch = PatchSize::new(8, 8);
    let variants = [
        ("row band, unit", vec![1], 0.45, BandScaling::Unit),
        ("row band, max-degree", vec![1], 0.9, BandScaling::MaxDegree),
        (
            "plus, max-degree",
            offsets_for_2d_neighbors(patch.w, Neighborhood::Plus),
            0.9,
            BandScaling::MaxDegree,
        ),
    ];
    for (label, bands, alpha, scaling) in &variants {
        let cov = build_synthetic_covariance(1.0, *alpha, bands, 0.0, patch, *scaling)?;
        let eig = symmetric_eigenvalues(cov.matrix());
        let wt = cholesky_whitener(&cov)?;
        let w = wt.whitener();
        let err = max_abs_diff(
            &(w * cov.matrix() * w.transpose()),
            &DMatrix::identity(cov.dim(), cov.dim()),
        );
        println!(
            "{label:<22} alpha={alpha:<4} eig=[{:.4}, {:.4}]  |W S W^T - I|max={err:.2e}",
            eig[0],
            eig[eig.len() - 1]
        );
    }

    // Too much correlation for unit scaling is rejected.
    match build_synthetic_covariance(1.0, 0.6, &[1], 0.0, patch, BandScaling::Unit) {
        Err(e) => println!("alpha=0.6 unit: {e}"),
        Ok(_) => println!("alpha=0.6 unit unexpectedly SPD"),
    }

    if let Some(path) = std::env::args().nth(1) {
        let cov = build_synthetic_covariance(1.0, 0.9, &[1], 0.0, patch, BandScaling::MaxDegree)?;
        cov.save(&path)?;
        let back = CovarianceModel::load(&path)?;
        println!(
            "saved to {path}; reload differs by {:.1e}",
            max_abs_diff(cov.matrix(), back.matrix())
        );
    }
    Ok(())
}
