//! Draw tiled correlated noise and measure its empirical within-tile
//! correlations.
//!
//! ```text
//! cargo run --release --example simulate_correlated_noise
//! ```

use card::covariance::{build_synthetic_covariance, sample_correlated_noise, BandScaling, PatchGrid, PatchSize};

fn main() -> card::error::Result<()> {
    let patch = PatchSize::new(4, 4);
    let cov = build_synthetic_covariance(1.0, 0.2, &[1, 4], 0.0, patch, BandScaling::Unit)?;
    let sigma_y = 0.1;
    // 2 pixels of margin on each axis, filled with white noise.
    let grid = PatchGrid::new(258, 258, patch);
    let noise = sample_correlated_noise(&cov, sigma_y, &grid, 1, 11)?;

    let d = patch.dim();
    let mut acc = vec![0.0; d * d];
    let mut tile = vec![0.0; d];
    for t in 0..grid.num_tiles() {
        grid.gather(noise.plane(0), t, &mut tile);
        for i in 0..d {
            for j in 0..d {
                acc[i * d + j] += tile[i] * tile[j];
            }
        }
    }
    let n = grid.num_tiles() as f64;
    let s2 = sigma_y * sigma_y;
    println!("{} tiles of {patch}", grid.num_tiles());
    for (label, i, j) in [
        ("variance", 0, 0),
        ("horizontal", 5, 6),
        ("vertical", 5, 9),
        ("diagonal", 5, 10),
    ] {
        println!(
            "{label:<11} empirical {:+.4}  model {:+.4}",
            acc[i * d + j] / n / s2,
            cov.matrix()[(i, j)]
        );
    }

    let margin: Vec<f64> = grid.margin_indices().iter().map(|&k| noise.plane(0)[k]).collect();
    let var = margin.iter().map(|v| v * v).sum::<f64>() / margin.len() as f64;
    println!(
        "margin: {} pixels, variance / sigma_y^2 = {:.3}",
        margin.len(),
        var / s2
    );
    Ok(())
}
