//! Drive the sampler with a denoiser running in another process.
//!
//! The example re-launches itself with `--peer` to act as the denoiser
//! process, which answers requests on stdin/stdout. Any program speaking the
//! same protocol works: one JSON header line `{"sigma_t": .., "dims": [c, h, w]}`
//! followed by a raw tensor, answered by a raw tensor of the same dims.
//!
//! ```text
//! cargo run --release --example external_denoiser
//! ```

use std::process::Command;

use card::covariance::{build_synthetic_covariance, BandScaling, PatchSize};
use card::harness::{gaussian_prior_image, simulate_measurement};
use card::metrics::psnr;
use card::operators::{build_operator, DegradationSpec};
use card::sampler::{restore, serve_denoiser, ExternalDenoiser, GaussianPriorDenoiser, SamplerConfig};

fn main() -> card::error::Result<()> {
    let prior = GaussianPriorDenoiser::constant(0.5, 0.15)?;
    if std::env::args().nth(1).as_deref() == Some("--peer") {
        serve_denoiser(std::io::stdin().lock(), std::io::stdout().lock(), &prior)?;
        return Ok(());
    }

    let exe = std::env::current_exe().expect("current executable");
    let external = ExternalDenoiser::spawn(Command::new(exe).arg("--peer"))?;

    let task = DegradationSpec::identity();
    let cov = build_synthetic_covariance(1.0, 0.9, &[1], 0.0, PatchSize::new(8, 8), BandScaling::MaxDegree)?;
    let clean = gaussian_prior_image([1, 32, 32], 0.5, 0.15, 4, 0);
    let y = simulate_measurement(&task, &clean, &cov, 0.5, 4)?;
    let op = build_operator(&task, 32, 32)?;
    let config = SamplerConfig {
        sigma_y: 0.5,
        seed: 4,
        ..SamplerConfig::default()
    };

    let remote = restore(&op, &cov, &y, &external, &config)?;
    let local = restore(&op, &cov, &y, &prior, &config)?;
    let gap = remote
        .data()
        .iter()
        .zip(local.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!(
        "external psnr {:.3} dB, in-process psnr {:.3} dB",
        psnr(&clean, &remote)?,
        psnr(&clean, &local)?
    );
    println!("largest pixel difference {gap:.2e} (raw tensors carry f32)");
    Ok(())
}
