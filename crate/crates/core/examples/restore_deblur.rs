//! Gaussian deblurring under correlated noise, whitened against plain.
//!
//! ```text
//! cargo run --release --example restore_deblur -- [task] [cases]
//! ```

use card::covariance::{build_synthetic_covariance, BandScaling, PatchSize};
use card::harness::{run_experiment, ExperimentSpec, MethodSpec, MetricReport, PriorCases};
use card::operators::DegradationSpec;
use card::sampler::{GaussianPriorDenoiser, SamplerConfig};

fn main() -> card::error::Result<()> {
    let mut args = std::env::args().skip(1);
    let task = DegradationSpec::from_task(&args.next().unwrap_or_else(|| "deblur-gauss".into()))?;
    let count: usize = args.next().map_or(8, |s| s.parse().expect("case count"));

    let cov = build_synthetic_covariance(1.0, 0.9, &[1], 0.0, PatchSize::new(8, 8), BandScaling::MaxDegree)?;
    let prior = PriorCases {
        count,
        dims: [1, 32, 32],
        mean: 0.5,
        tau: 0.15,
        sigma_y: 0.1,
        seed: 20,
    };
    let cases = prior.build(&task, &cov)?;
    let spec = ExperimentSpec {
        task,
        covariance: cov,
        methods: MethodSpec::both_modes(),
        sampler: SamplerConfig::default(),
    };
    let denoiser = GaussianPriorDenoiser::constant(prior.mean, prior.tau)?;
    let mut report = MetricReport::new();
    run_experiment(&spec, &cases, &denoiser, &mut report)?;

    println!(
        "{} on {count} images, sigma_y = {}",
        spec.task.task_name(),
        prior.sigma_y
    );
    for s in report.summaries() {
        println!(
            "  {:<9} psnr {:.2} dB  ssim {:.4}",
            s.method, s.mean_psnr_db, s.mean_ssim
        );
    }
    Ok(())
}
