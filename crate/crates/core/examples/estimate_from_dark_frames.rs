//! Estimate a patch covariance from synthetic dark frames with row-correlated
//! readout noise, and compare it with the exact one.
//!
//! ```text
//! cargo run --release --example estimate_from_dark_frames -- [frames] [patch]
//! ```

use card::covariance::{estimate_covariance, PatchSize};
use card::harness::StationaryNoise;

fn main() -> card::error::Result<()> {
    let mut args = std::env::args().skip(1);
    let frames: usize = args.next().map_or(64, |s| s.parse().expect("frame count"));
    let patch: PatchSize = args.next().map_or(Ok(PatchSize::new(8, 8)), |s| s.parse())?;

    let noise = StationaryNoise::row_correlated(0.05);
    let dark = noise.dark_frames(frames, 128, 128, 7);
    let cov = estimate_covariance(&dark, patch)?;

    let exact = noise.patch_covariance(patch);
    let scale = exact.diagonal().mean();
    let exact = exact / scale;
    let rel = (cov.matrix() - &exact).norm() / exact.norm();

    let tiles = frames * (128 / patch.h) * (128 / patch.w);
    println!("{frames} frames, {tiles} {patch} patches");
    println!(
        "noise variance: estimated {:.4e}, true {:.4e}",
        cov.normalization_scale(),
        scale
    );
    println!(
        "relative Frobenius error of the normalized covariance: {:.2}%",
        100.0 * rel
    );
    println!(
        "lag-1 row correlation: estimated {:.4}, true {:.4}",
        cov.matrix()[(0, 1)],
        exact[(0, 1)]
    );
    println!(
        "vertical correlation:  estimated {:.4}, true 0",
        cov.matrix()[(0, patch.w)]
    );
    Ok(())
}
