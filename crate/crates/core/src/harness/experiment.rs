use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{MetricReport, MetricRow};
use crate::covariance::{sample_correlated_noise, CovarianceModel, PatchGrid};
use crate::error::{Error, Result};
use crate::image::PlanarImage;
use crate::metrics::{psnr, ssim, SSIM_WINDOW};
use crate::operators::{build_operator, DegradationSpec, SvdOperator};
use crate::sampler::{run_sampler, Conditioning, Denoiser, Mode, SamplerConfig};

/// One restoration method of the comparison grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub name: String,
    pub mode: Mode,
    /// Noise level assumed by the sampler; the case's true level when `None`.
    pub sigma_y: Option<f64>,
}

impl MethodSpec {
    pub fn new(mode: Mode) -> Self {
        Self {
            name: mode.as_str().to_string(),
            mode,
            sigma_y: None,
        }
    }

    /// `whitened` and `plain` at the true noise level.
    pub fn both_modes() -> Vec<Self> {
        vec![Self::new(Mode::Whitened), Self::new(Mode::Plain)]
    }

    /// One method per assumed noise level, e.g. `plain@0.25`.
    pub fn sigma_grid(mode: Mode, levels: &[f64]) -> Vec<Self> {
        levels
            .iter()
            .map(|&s| Self {
                name: format!("{}@{s}", mode.as_str()),
                mode,
                sigma_y: Some(s),
            })
            .collect()
    }
}

/// A clean reference, its measurement and the noise that produced it.
#[derive(Debug, Clone)]
pub struct ExperimentCase {
    pub scene_id: String,
    pub reference: PlanarImage,
    pub measurement: PlanarImage,
    pub sigma_y: f64,
    pub seed: u64,
    pub image_id: u32,
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub task: DegradationSpec,
    /// Covariance used for whitening.
    pub covariance: CovarianceModel,
    pub methods: Vec<MethodSpec>,
    /// Template for every run; `sigma_y`, `seed`, `image_id` and `mode` are
    /// filled per case and method.
    pub sampler: SamplerConfig,
}

/// `H x + sigma_y n` with `n` drawn tile-wise from `cov` on the measurement plane.
pub fn simulate_measurement(
    task: &DegradationSpec,
    clean: &PlanarImage,
    cov: &CovarianceModel,
    sigma_y: f64,
    seed: u64,
) -> Result<PlanarImage> {
    let clean_y = task.apply_exact(clean)?;
    let grid = PatchGrid::new(clean_y.height(), clean_y.width(), cov.patch());
    let noise = sample_correlated_noise(cov, sigma_y, &grid, clean_y.channels(), seed)?;
    clean_y.add(&noise)
}

/// The conditioning each method needs for one covariance.
fn prepare(op: &SvdOperator, spec: &ExperimentSpec, cov: &CovarianceModel) -> Result<Vec<Conditioning>> {
    let mut plain: Option<Conditioning> = None;
    let mut whitened: Option<Conditioning> = None;
    spec.methods
        .iter()
        .map(|m| {
            let slot = match m.mode {
                Mode::Plain => &mut plain,
                Mode::Whitened => &mut whitened,
            };
            if slot.is_none() {
                *slot = Some(Conditioning::new(m.mode, op, cov)?);
            }
            Ok(slot.clone().expect("filled above"))
        })
        .collect()
}

fn evaluate(
    case: &ExperimentCase,
    method: &MethodSpec,
    cond: &Conditioning,
    spec: &ExperimentSpec,
    denoiser: &dyn Denoiser,
) -> Result<MetricRow> {
    let config = SamplerConfig {
        sigma_y: method.sigma_y.unwrap_or(case.sigma_y),
        seed: case.seed,
        image_id: case.image_id,
        mode: method.mode,
        ..spec.sampler.clone()
    };
    let restored = run_sampler(cond, &case.measurement, denoiser, &config)?;
    let ssim_value = if restored.height().min(restored.width()) >= SSIM_WINDOW {
        ssim(&case.reference, &restored)?
    } else {
        f64::NAN
    };
    Ok(MetricRow {
        scene_id: case.scene_id.clone(),
        task: spec.task.task_name().to_string(),
        method: method.name.clone(),
        sigma_y: case.sigma_y,
        seed: case.seed,
        psnr_db: psnr(&case.reference, &restored)?,
        ssim: ssim_value,
    })
}

/// Per-case override of the whitening covariance.
pub type CovarianceFor<'a> = dyn Fn(&ExperimentCase) -> Result<CovarianceModel> + Sync + 'a;

/// Restore every case with every method and append the scores to `report`.
///
/// Cases run in parallel. Rows that finished are appended even when another
/// run fails; the first failure in case order is returned afterwards.
/// `covariance_for` may swap the whitening covariance per case.
pub fn run_experiment_with(
    spec: &ExperimentSpec,
    cases: &[ExperimentCase],
    denoiser: &dyn Denoiser,
    report: &mut MetricReport,
    covariance_for: Option<&CovarianceFor<'_>>,
) -> Result<()> {
    if spec.methods.is_empty() {
        return Err(Error::InvalidArgument("no methods to evaluate".into()));
    }
    if cases.is_empty() {
        log::warn!("experiment has no cases; the report is empty");
        return Ok(());
    }
    spec.sampler.validate()?;
    let (h, w) = (cases[0].reference.height(), cases[0].reference.width());
    if let Some(bad) = cases
        .iter()
        .find(|c| (c.reference.height(), c.reference.width()) != (h, w))
    {
        return Err(Error::DimensionMismatch(format!(
            "case {} is {}x{} but the experiment runs at {h}x{w}",
            bad.scene_id,
            bad.reference.height(),
            bad.reference.width()
        )));
    }
    let op = build_operator(&spec.task, h, w)?;
    let shared = match covariance_for {
        None => Some(prepare(&op, spec, &spec.covariance)?),
        Some(_) => None,
    };

    let outcomes: Vec<Vec<Result<MetricRow>>> = cases
        .par_iter()
        .map(|case| {
            let owned;
            let conds = match (&shared, covariance_for) {
                (Some(c), _) => c,
                (None, Some(f)) => {
                    owned = match f(case).and_then(|cov| prepare(&op, spec, &cov)) {
                        Ok(c) => c,
                        Err(e) => return vec![Err(e)],
                    };
                    &owned
                }
                (None, None) => unreachable!("shared conditioning is built when no override is given"),
            };
            spec.methods
                .iter()
                .zip(conds)
                .map(|(m, cond)| evaluate(case, m, cond, spec, denoiser))
                .collect()
        })
        .collect();

    let mut first_error = None;
    for r in outcomes.into_iter().flatten() {
        match r {
            Ok(row) => report.push(row),
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    first_error.map_or(Ok(()), Err)
}

pub fn run_experiment(
    spec: &ExperimentSpec,
    cases: &[ExperimentCase],
    denoiser: &dyn Denoiser,
    report: &mut MetricReport,
) -> Result<()> {
    run_experiment_with(spec, cases, denoiser, report, None)
}
