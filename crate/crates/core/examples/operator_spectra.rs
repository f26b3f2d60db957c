//! Singular spectra of every degradation, before and after whitening.
//!
//! ```text
//! cargo run --release --example operator_spectra
//! ```

use card::covariance::{build_synthetic_covariance, cholesky_whitener, BandScaling, PatchGrid, PatchSize};
use card::operators::{build_operator, whiten_operator, DegradationSpec, SvdOperator};

fn describe(label: &str, op: &SvdOperator) {
    let s = op.singular_values();
    let kept = s.iter().filter(|&&v| v > 0.0).count();
    let smallest = s.iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
    println!(
        "{label:<26} {:>5} -> {:<5} kept {kept:>5}  s in [{smallest:.4}, {:.4}]  ({})",
        op.in_dim(),
        op.out_dim(),
        s[0],
        op.backend_kind().as_str()
    );
}

fn main() -> card::error::Result<()> {
    let (h, w) = (32, 32);
    let patch = PatchSize::new(8, 8);
    let cov = build_synthetic_covariance(1.0, 0.9, &[1], 0.0, patch, BandScaling::MaxDegree)?;
    let wt = cholesky_whitener(&cov)?;

    for task in [
        "denoise",
        "deblur-uniform",
        "deblur-gauss",
        "deblur-aniso",
        "sr2",
        "sr4",
    ] {
        let spec = DegradationSpec::from_task(task)?;
        let op = build_operator(&spec, h, w)?;
        describe(task, &op);
        let (oh, ow) = op.out_shape();
        let whitened = whiten_operator(&op, &wt, &PatchGrid::new(oh, ow, patch))?;
        describe(&format!("  whitened {task}"), &whitened);

        // H H^+ is the projector onto the kept directions, so only truncated
        // singular values leave a residual.
        let x: Vec<f64> = (0..h * w).map(|i| ((i * 37) % 101) as f64 / 101.0).collect();
        let y = op.apply(&x)?;
        let back = op.apply(&op.apply_pinv(&y)?)?;
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let resid: Vec<f64> = y.iter().zip(&back).map(|(a, b)| a - b).collect();
        println!("{:<26} |H H^+ y - y| / |y| = {:.1e}", "", norm(&resid) / norm(&y));
    }
    Ok(())
}
