//! PSNR and SSIM of a test pattern under growing white noise.
//!
//! ```text
//! cargo run --release --example metrics
//! ```

use card::image::PlanarImage;
use card::metrics::{mse, psnr, ssim};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> card::error::Result<()> {
    let (h, w) = (64, 64);
    let mut clean = PlanarImage::zeros(3, h, w);
    for c in 0..3 {
        for r in 0..h {
            for col in 0..w {
                let v = ((r / 8 + col / 8 + c) % 2) as f64 * 0.6 + 0.2;
                clean.set(c, r, col, v);
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    println!("{:>7} {:>10} {:>9} {:>7}", "sigma", "mse", "psnr dB", "ssim");
    for sigma in [0.0, 0.01, 0.05, 0.1, 0.2] {
        let n = Normal::new(0.0, sigma).expect("valid sigma");
        let mut noisy = clean.clone();
        for v in noisy.data_mut() {
            *v += n.sample(&mut rng);
        }
        println!(
            "{sigma:>7} {:>10.2e} {:>9.3} {:>7.4}",
            mse(&clean, &noisy)?,
            psnr(&clean, &noisy)?,
            ssim(&clean, &noisy)?
        );
    }

    let shifted = clean.map(|v| v + 0.1);
    println!(
        "constant +0.1 shift: psnr {:.3} dB, ssim {:.4}",
        psnr(&clean, &shifted)?,
        ssim(&clean, &shifted)?
    );
    Ok(())
}
