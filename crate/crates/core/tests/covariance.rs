mod common;

use card::covariance::{
    build_synthetic_covariance, cholesky_whitener, estimate_covariance, perturb_covariance, sample_correlated_noise,
    BandScaling, CovarianceModel, PatchGrid, PatchSize, Provenance,
};
use card::harness::StationaryNoise;
use card::linalg::{max_abs_diff, symmetric_eigenvalues};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn whitening_error(cov: &CovarianceModel) -> f64 {
    let wt = cholesky_whitener(cov).unwrap();
    let w = wt.whitener();
    let d = cov.dim();
    max_abs_diff(&(w * cov.matrix() * w.transpose()), &DMatrix::identity(d, d))
}

fn estimated(patch: PatchSize, m: DMatrix<f64>) -> CovarianceModel {
    let provenance = Provenance::Estimated {
        num_patches: 0,
        source_id: "test".into(),
    };
    CovarianceModel::from_matrix(patch, m, provenance).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn whitener_inverts_any_spd_matrix(seed in any::<u64>(), h in 1usize..=8, w in 1usize..=8) {
        let patch = PatchSize::new(h, w);
        let cov = estimated(patch, common::random_spd(patch.dim(), seed));
        prop_assert!(whitening_error(&cov) <= 1e-8);
        let wt = cholesky_whitener(&cov).unwrap();
        let l = wt.cholesky_l();
        prop_assert!(max_abs_diff(&(l * wt.whitener()), &DMatrix::identity(patch.dim(), patch.dim())) <= 1e-9);
        prop_assert!((0..patch.dim()).all(|i| (i + 1..patch.dim()).all(|j| l[(i, j)] == 0.0)));
    }

    #[test]
    fn stored_covariances_have_unit_mean_diagonal(seed in any::<u64>(), scale in 1e-4f64..1e3) {
        let patch = PatchSize::new(4, 4);
        let cov = estimated(patch, common::random_spd(16, seed) * scale);
        prop_assert!((cov.matrix().diagonal().mean() - 1.0).abs() < 1e-12);
        prop_assert!(cov.matrix() == &cov.matrix().transpose());
    }

    #[test]
    fn synthetic_max_degree_bands_stay_spd(alpha in 0.0f64..0.99, pick in 0usize..4) {
        let patch = PatchSize::new(8, 8);
        let bands: &[usize] = [&[1][..], &[8], &[1, 8], &[1, 2, 9]][pick];
        let cov = build_synthetic_covariance(1.0, alpha, bands, 0.0, patch, BandScaling::MaxDegree).unwrap();
        prop_assert!(symmetric_eigenvalues(cov.matrix())[0] > 0.0);
        prop_assert!(whitening_error(&cov) <= 1e-8);
    }

    #[test]
    fn perturbation_is_spd_normalized_and_seeded(level in 0.0f64..0.5, seed in any::<u64>()) {
        let base = build_synthetic_covariance(1.0, 0.9, &[1], 0.0, PatchSize::new(8, 8), BandScaling::MaxDegree).unwrap();
        let p = perturb_covariance(&base, level, seed).unwrap();
        prop_assert!(symmetric_eigenvalues(p.matrix())[0] > 0.0);
        prop_assert!((p.matrix().diagonal().mean() - 1.0).abs() < 1e-12);
        prop_assert!(whitening_error(&p) <= 1e-8);
        let again = perturb_covariance(&base, level, seed).unwrap();
        prop_assert_eq!(p.matrix(), again.matrix());
    }
}

#[test]
fn level_zero_perturbation_is_the_base_matrix() {
    let base = build_synthetic_covariance(1.0, 0.5, &[1], 0.0, PatchSize::new(8, 8), BandScaling::Unit).unwrap();
    let p = perturb_covariance(&base, 0.0, 42).unwrap();
    assert_eq!(p.matrix(), base.matrix());
    assert!(perturb_covariance(&base, -0.1, 0).is_err());
}

#[test]
fn save_and_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.ct");
    let cov =
        build_synthetic_covariance(1.3, 0.5, &[1, 8], 0.01, PatchSize::new(8, 8), BandScaling::MaxDegree).unwrap();
    cov.save(&path).unwrap();
    assert!(CovarianceModel::sidecar_path(&path).exists());
    let back = CovarianceModel::load(&path).unwrap();
    assert_eq!(back.patch(), cov.patch());
    assert_eq!(back.provenance(), cov.provenance());
    assert_eq!(back.normalization_scale(), cov.normalization_scale());
    assert!(max_abs_diff(back.matrix(), cov.matrix()) < 1e-6);
    assert!(whitening_error(&back) <= 1e-8);

    std::fs::remove_file(CovarianceModel::sidecar_path(&path)).unwrap();
    assert!(CovarianceModel::load(&path).is_err());
}

#[test]
fn estimator_recovers_row_correlated_noise() {
    let noise = StationaryNoise::row_correlated(0.05);
    let patch = PatchSize::new(4, 8);
    let frames = noise.dark_frames(128, 64, 64, 1);
    let cov = estimate_covariance(&frames, patch).unwrap();
    let exact = noise.patch_covariance(patch);
    let scale = exact.diagonal().mean();
    let exact = exact / scale;
    let rel = (cov.matrix() - &exact).norm() / exact.norm();
    assert!(rel < 0.06, "relative error {rel}");
    assert!((cov.normalization_scale() / scale - 1.0).abs() < 0.02);
    assert!(whitening_error(&cov) <= 1e-8);
}

#[test]
fn estimator_rejects_frames_smaller_than_a_patch() {
    let frames = vec![card::image::PlanarImage::zeros(1, 4, 4)];
    assert!(estimate_covariance(&frames, PatchSize::new(8, 8)).is_err());
}

#[test]
fn noise_generator_matches_its_covariance() {
    let patch = PatchSize::new(4, 4);
    let cov = build_synthetic_covariance(1.0, 0.2, &[1, 4], 0.0, patch, BandScaling::Unit).unwrap();
    let sigma_y = 0.3;
    let grid = PatchGrid::new(800, 800, patch);
    let noise = sample_correlated_noise(&cov, sigma_y, &grid, 1, 3).unwrap();
    let d = patch.dim();
    let mut acc = DMatrix::<f64>::zeros(d, d);
    let mut tile = vec![0.0; d];
    for t in 0..grid.num_tiles() {
        grid.gather(noise.plane(0), t, &mut tile);
        let v = nalgebra::DVector::from_column_slice(&tile);
        acc += &v * v.transpose();
    }
    acc /= grid.num_tiles() as f64;
    let target = cov.matrix() * (sigma_y * sigma_y);
    let rel = (&acc - &target).norm() / target.norm();
    assert!(rel < 0.05, "relative error {rel}");

    let again = sample_correlated_noise(&cov, sigma_y, &grid, 1, 3).unwrap();
    assert_eq!(noise, again);
    let other = sample_correlated_noise(&cov, sigma_y, &grid, 1, 4).unwrap();
    assert_ne!(noise, other);
}

#[test]
fn noise_generator_rejects_mismatched_grid() {
    let cov = CovarianceModel::identity(PatchSize::new(8, 8));
    let grid = PatchGrid::new(16, 16, PatchSize::new(4, 4));
    assert!(sample_correlated_noise(&cov, 0.1, &grid, 1, 0).is_err());
}
