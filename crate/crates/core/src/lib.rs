//! Restoration of images corrupted by spatially correlated Gaussian noise.
//!
//! A patch-level noise covariance is turned into a whitening transform,
//! the degradation operator is whitened with it, and a spectral diffusion
//! sampler restores the image in the whitened space where the noise is
//! white again.
//!
//! The `examples/` directory walks through each piece:
//!
//! | example | shows |
//! |---|---|
//! | `make_covariance` | banded synthetic covariances and their whiteners |
//! | `estimate_from_dark_frames` | estimating a covariance from flat dark frames |
//! | `simulate_correlated_noise` | drawing tiled correlated noise |
//! | `operator_spectra` | singular spectra of the degradation operators |
//! | `whitened_vs_plain` | denoising with and without whitening |
//! | `restore_deblur` | Gaussian deblurring |
//! | `super_resolution` | 2x and 4x block-average super-resolution |
//! | `perturbation_ablation` | sensitivity to a misestimated covariance |
//! | `patch_size_ablation` | sensitivity to the covariance patch size |
//! | `external_denoiser` | driving the sampler with an out-of-process denoiser |
//! | `metrics` | PSNR and SSIM |
//!
//! The `card` binary exposes the same features as subcommands; see [`cli`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod covariance;
pub mod error;
pub mod harness;
pub mod image;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod operators;
pub mod rng;
pub mod sampler;
