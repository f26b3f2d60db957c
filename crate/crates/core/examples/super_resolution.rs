//! 2x and 4x super-resolution of a smooth test pattern, saved as PNGs.
//!
//! ```text
//! cargo run --release --example super_resolution -- [out_dir]
//! ```

use std::path::PathBuf;

use card::covariance::{build_synthetic_covariance, BandScaling, PatchSize};
use card::harness::simulate_measurement;
use card::image::PlanarImage;
use card::io::save_image;
use card::metrics::psnr;
use card::operators::{build_operator, DegradationSpec};
use card::sampler::{restore, GaussianPriorDenoiser, Mode, SamplerConfig};

fn pattern(h: usize, w: usize) -> PlanarImage {
    let mut img = PlanarImage::zeros(1, h, w);
    for r in 0..h {
        for c in 0..w {
            let (y, x) = (r as f64 / h as f64, c as f64 / w as f64);
            img.set(0, r, c, 0.5 + 0.3 * (6.0 * x).sin() * (4.0 * y).cos());
        }
    }
    img
}

fn main() -> card::error::Result<()> {
    let out_dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "sr_out".into()));
    std::fs::create_dir_all(&out_dir).expect("create output directory");
    let clean = pattern(32, 32);
    save_image(&clean, out_dir.join("clean.png"), 16)?;
    let denoiser = GaussianPriorDenoiser::constant(0.5, 0.25)?;

    for task in ["sr2", "sr4"] {
        let spec = DegradationSpec::from_task(task)?;
        let op = build_operator(&spec, 32, 32)?;
        // The noise tiles live on the low-resolution grid.
        let cov = build_synthetic_covariance(1.0, 0.9, &[1], 0.0, PatchSize::new(4, 4), BandScaling::MaxDegree)?;
        let sigma_y = 0.05;
        let y = simulate_measurement(&spec, &clean, &cov, sigma_y, 5)?;
        save_image(&y, out_dir.join(format!("{task}_measurement.png")), 16)?;
        for mode in [Mode::Whitened, Mode::Plain] {
            let config = SamplerConfig {
                sigma_y,
                mode,
                seed: 5,
                ..SamplerConfig::default()
            };
            let x = restore(&op, &cov, &y, &denoiser, &config)?;
            let name = format!("{task}_{}.png", mode.as_str());
            save_image(&x, out_dir.join(&name), 16)?;
            println!(
                "{task} {:<9} {:?} -> {:?}  psnr {:.2} dB  ({name})",
                mode.as_str(),
                y.dims(),
                x.dims(),
                psnr(&clean, &x)?
            );
        }
    }
    println!("images written to {}", out_dir.display());
    Ok(())
}
