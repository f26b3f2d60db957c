//! How much does a misestimated covariance cost? Restore with the true
//! covariance perturbed at growing relative levels.
//!
//! ```text
//! cargo run --release --example perturbation_ablation -- [cases] [levels...]
//! ```

use card::covariance::{build_synthetic_covariance, BandScaling, PatchSize};
use card::harness::{ablate_perturbation, AblationResult, ExperimentSpec, PriorCases};
use card::operators::DegradationSpec;
use card::sampler::{GaussianPriorDenoiser, SamplerConfig};

fn main() -> card::error::Result<()> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().map_or(20, |s| s.parse().expect("case count"));
    let mut levels: Vec<f64> = args.map(|s| s.parse().expect("level")).collect();
    if levels.is_empty() {
        levels = vec![0.0, 0.05, 0.10, 0.20];
    }

    let cov = build_synthetic_covariance(1.0, 0.9, &[1], 0.0, PatchSize::new(8, 8), BandScaling::MaxDegree)?;
    let task = DegradationSpec::identity();
    let prior = PriorCases {
        count,
        dims: [1, 32, 32],
        mean: 0.5,
        tau: 0.15,
        sigma_y: 0.5,
        seed: 100,
    };
    let cases = prior.build(&task, &cov)?;
    let base = ExperimentSpec {
        task,
        covariance: cov,
        methods: vec![],
        sampler: SamplerConfig::default(),
    };
    let denoiser = GaussianPriorDenoiser::constant(prior.mean, prior.tau)?;
    let mut result = AblationResult::default();
    ablate_perturbation(&levels, &base, &cases, &denoiser, 9, &mut result)?;

    let baseline = result.points[0].mean_psnr_db;
    for p in &result.points {
        println!(
            "level {:<5} psnr {:.3} dB ({:+.3})  ssim {:.4}",
            p.level.unwrap_or(0.0),
            p.mean_psnr_db,
            p.mean_psnr_db - baseline,
            p.mean_ssim
        );
    }
    Ok(())
}
