use serde::{Deserialize, Serialize};

use super::experiment::{run_experiment, run_experiment_with, ExperimentCase, ExperimentSpec, MethodSpec};
use super::report::MetricReport;
use crate::covariance::{estimate_covariance, perturb_covariance, PatchSize};
use crate::error::{Error, Result};
use crate::image::PlanarImage;
use crate::rng::mix_seed;
use crate::sampler::{Denoiser, Mode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationPoint {
    pub label: String,
    pub level: Option<f64>,
    pub mean_psnr_db: f64,
    pub mean_ssim: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub report: MetricReport,
    pub points: Vec<AblationPoint>,
}

impl AblationResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.points).expect("points serialize")
    }
}

pub fn perturbation_method_name(level: f64) -> String {
    format!("whitened-perturb-{level}")
}

/// Whitened restoration with its covariance perturbed at each `level`.
///
/// Measurements are untouched; only the whitener sees the perturbed matrix.
/// Every case draws its own perturbation from `perturb_seed` and its seed,
/// so level 0 is the unablated whitened run. Rows accumulate in `out`
/// even if a later level fails.
pub fn ablate_perturbation(
    levels: &[f64],
    base: &ExperimentSpec,
    cases: &[ExperimentCase],
    denoiser: &dyn Denoiser,
    perturb_seed: u64,
    out: &mut AblationResult,
) -> Result<()> {
    if levels.is_empty() || levels.windows(2).any(|w| w[1] < w[0]) || levels[0] != 0.0 {
        return Err(Error::InvalidArgument(format!(
            "perturbation levels must be ascending and start at 0, got {levels:?}"
        )));
    }
    for &level in levels {
        let name = perturbation_method_name(level);
        let spec = ExperimentSpec {
            methods: vec![MethodSpec {
                name: name.clone(),
                mode: Mode::Whitened,
                sigma_y: None,
            }],
            ..base.clone()
        };
        let perturb =
            |case: &ExperimentCase| perturb_covariance(&base.covariance, level, mix_seed(perturb_seed, case.seed));
        run_experiment_with(&spec, cases, denoiser, &mut out.report, Some(&perturb))?;
        push_point(out, &name, Some(level));
    }
    Ok(())
}

pub fn patch_method_name(patch: PatchSize) -> String {
    format!("whitened-patch-{patch}")
}

/// Re-estimate the covariance from `dark_frames` at each patch size and
/// run whitened restoration with it.
pub fn ablate_patch_size(
    sizes: &[PatchSize],
    dark_frames: &[PlanarImage],
    base: &ExperimentSpec,
    cases: &[ExperimentCase],
    denoiser: &dyn Denoiser,
    out: &mut AblationResult,
) -> Result<()> {
    if sizes.is_empty() {
        return Err(Error::InvalidArgument("no patch sizes given".into()));
    }
    for &patch in sizes {
        let name = patch_method_name(patch);
        let spec = ExperimentSpec {
            covariance: estimate_covariance(dark_frames, patch)?,
            methods: vec![MethodSpec {
                name: name.clone(),
                mode: Mode::Whitened,
                sigma_y: None,
            }],
            ..base.clone()
        };
        run_experiment(&spec, cases, denoiser, &mut out.report)?;
        push_point(out, &name, None);
    }
    Ok(())
}

fn push_point(out: &mut AblationResult, name: &str, level: Option<f64>) {
    if let Some(s) = out.report.summaries().into_iter().find(|s| s.method == name) {
        out.points.push(AblationPoint {
            label: name.to_string(),
            level,
            mean_psnr_db: s.mean_psnr_db,
            mean_ssim: s.mean_ssim,
        });
    }
}
