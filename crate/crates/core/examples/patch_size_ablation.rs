//! Re-estimate the noise covariance at several patch sizes from dark frames
//! with row-correlated readout noise, then restore with each estimate.
//!
//! Given enough frames, wide and short patches capture the along-row
//! correlation best; with few frames the large estimates are noisy.
//!
//! ```text
//! cargo run --release --example patch_size_ablation -- [cases] [dark_frames]
//! ```

use card::covariance::{CovarianceModel, PatchSize};
use card::harness::{ablate_patch_size, AblationResult, ExperimentSpec, PriorCases, StationaryNoise};
use card::operators::DegradationSpec;
use card::sampler::{GaussianPriorDenoiser, SamplerConfig};

fn main() -> card::error::Result<()> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().map_or(4, |s| s.parse().expect("case count"));
    let frames: usize = args.next().map_or(256, |s| s.parse().expect("frame count"));

    let sigma_y = 0.3;
    let noise = StationaryNoise::row_correlated(sigma_y);
    let task = DegradationSpec::identity();
    let prior = PriorCases {
        count,
        dims: [1, 32, 128],
        mean: 0.5,
        tau: 0.15,
        sigma_y,
        seed: 3,
    };
    let cases = noise.cases(&prior, &task)?;
    let dark = noise.dark_frames(frames, 32, 128, 77);

    let sizes: Vec<PatchSize> = ["4x4", "8x8", "16x16", "4x128"]
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_, _>>()?;
    let base = ExperimentSpec {
        task,
        covariance: CovarianceModel::identity(PatchSize::default()),
        methods: vec![],
        sampler: SamplerConfig::default(),
    };
    let denoiser = GaussianPriorDenoiser::constant(prior.mean, prior.tau)?;
    let mut result = AblationResult::default();
    ablate_patch_size(&sizes, &dark, &base, &cases, &denoiser, &mut result)?;

    for p in &result.points {
        println!("{:<22} psnr {:.3} dB  ssim {:.4}", p.label, p.mean_psnr_db, p.mean_ssim);
    }
    Ok(())
}
