//! Compare whitened and plain conditioning on correlated noise.
//!
//! Clean 32x32 images are drawn from a Gaussian pixel prior, corrupted with
//! strongly band-correlated noise, and restored with the matching
//! Gaussian-prior denoiser in both modes.
//!
//! ```text
//! cargo run --release --example whitened_vs_plain -- [seeds] [sigma_y] [sigma_max]
//! ```

use card::covariance::{build_synthetic_covariance, BandScaling, PatchSize};
use card::harness::{run_experiment, ExperimentSpec, MethodSpec, MetricReport, PriorCases};
use card::operators::DegradationSpec;
use card::sampler::{GaussianPriorDenoiser, SamplerConfig};

fn main() -> card::error::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: usize = args.next().map_or(50, |s| s.parse().expect("seed count"));
    let sigma_y: f64 = args.next().map_or(0.5, |s| s.parse().expect("sigma_y"));
    let sigma_max: f64 = args
        .next()
        .map_or(SamplerConfig::default().sigma_max, |s| s.parse().expect("sigma_max"));

    let cov = build_synthetic_covariance(1.0, 0.9, &[1], 0.0, PatchSize::new(8, 8), BandScaling::MaxDegree)?;
    let task = DegradationSpec::identity();
    let prior = PriorCases {
        count: seeds,
        dims: [1, 32, 32],
        mean: 0.5,
        tau: 0.15,
        sigma_y,
        seed: 1,
    };
    let cases = prior.build(&task, &cov)?;
    let denoiser = GaussianPriorDenoiser::constant(prior.mean, prior.tau)?;
    let spec = ExperimentSpec {
        task,
        covariance: cov,
        methods: MethodSpec::both_modes(),
        sampler: SamplerConfig {
            sigma_max,
            ..SamplerConfig::default()
        },
    };
    let mut report = MetricReport::new();
    run_experiment(&spec, &cases, &denoiser, &mut report)?;

    for s in report.summaries() {
        println!(
            "{:<10} n={:<3} psnr={:.3} dB  ssim={:.4}",
            s.method, s.count, s.mean_psnr_db, s.mean_ssim
        );
    }
    let wins = report
        .rows_for("whitened")
        .zip(report.rows_for("plain"))
        .filter(|(w, p)| w.psnr_db > p.psnr_db)
        .count();
    println!("whitened beats plain on {wins}/{seeds} images");
    Ok(())
}
