use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::Args;
use serde::{Deserialize, Serialize};

use super::{Command, RunContext};
use crate::covariance::{
    build_synthetic_covariance, estimate_covariance, offsets_for_2d_neighbors, perturb_covariance,
    sample_correlated_noise, BandScaling, CovarianceModel, Neighborhood, PatchGrid, PatchSize,
};
use crate::error::{Error, Result};
use crate::harness::{
    ablate_patch_size, ablate_perturbation, load_manifest, manifest_cases, simulate_measurement, AblationResult,
    ExperimentCase, ExperimentSpec, MethodSpec, MetricReport, PriorCases, StationaryNoise,
};
use crate::image::PlanarImage;
use crate::io::{load_any, save_any, write_atomic, write_image_tensor};
use crate::operators::{build_operator, DegradationKind, DegradationSpec, DEFAULT_SV_THRESHOLD};
use crate::sampler::{
    restore, serve_denoiser, Denoiser, ExternalDenoiser, GaussianPriorDenoiser, IdentityDenoiser, Mode, SamplerConfig,
    DEFAULT_SIGMA_MAX,
};

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T> {
    s.parse()
}

fn parse_patch(s: &str) -> Result<PatchSize> {
    s.parse()
}

/// `identity`, `gaussian:tau=<t>[,mean=<m>]` or `external:<shell command>`.
pub fn parse_denoiser(spec: &str, timeout: Duration) -> Result<Box<dyn Denoiser>> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    match kind {
        "identity" | "echo" if rest.is_empty() => Ok(Box::new(IdentityDenoiser)),
        "gaussian" => {
            let (mut tau, mut mean) = (None, 0.5);
            for kv in rest.split(',').filter(|s| !s.is_empty()) {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| Error::InvalidArgument(format!("denoiser option {kv:?} is not key=value")))?;
                let v: f64 = v
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("denoiser option {k} = {v:?} is not a number")))?;
                match k {
                    "tau" => tau = Some(v),
                    "mean" => mean = v,
                    other => {
                        return Err(Error::InvalidArgument(format!(
                            "unknown gaussian denoiser option {other:?}"
                        )))
                    }
                }
            }
            let tau = tau.ok_or_else(|| Error::InvalidArgument("gaussian denoiser needs tau=<value>".into()))?;
            Ok(Box::new(GaussianPriorDenoiser::constant(mean, tau)?))
        }
        "external" if !rest.is_empty() => Ok(Box::new(ExternalDenoiser::spawn_shell(rest)?.with_timeout(timeout))),
        _ => Err(Error::InvalidArgument(format!(
            "unknown denoiser {spec:?} (expected identity, gaussian:tau=<t>[,mean=<m>] or external:<cmd>)"
        ))),
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct EstimateCovArgs {
    /// Dark-frame files or directories of them (comma separated).
    #[arg(long, required = true, value_delimiter = ',')]
    pub frames: Vec<PathBuf>,
    #[arg(long, default_value = "8x8")]
    pub patch: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct MakeCovArgs {
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long)]
    pub alpha: f64,
    /// Off-diagonal offsets of the band in the vectorized patch.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub bands: Vec<usize>,
    /// Use 2-D neighbor offsets (horizontal, vertical, plus) instead of --bands.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub neighbors: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    pub epsilon: f64,
    #[arg(long, default_value = "8x8")]
    pub patch: String,
    /// `unit` keeps the band entries at 1; `max-degree` divides them by the largest row sum.
    #[arg(long, default_value = "unit")]
    pub band_scaling: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct PerturbCovArgs {
    #[arg(long)]
    pub cov: PathBuf,
    /// Relative Frobenius size of the perturbation.
    #[arg(long)]
    pub level: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SimulateArgs {
    #[arg(long)]
    pub cov: PathBuf,
    #[arg(long)]
    pub sigma_y: f64,
    /// Plane size `HxW`.
    #[arg(long, default_value = "64x64")]
    pub size: String,
    #[arg(long, default_value_t = 1)]
    pub channels: usize,
    #[arg(long, default_value = "noise.ct")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct DegradeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "denoise")]
    pub task: String,
    /// Noise covariance; white noise when omitted.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cov: Option<PathBuf>,
    #[arg(long)]
    pub sigma_y: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SamplerArgs {
    #[arg(long, default_value_t = 0.8)]
    pub eta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eta_b: f64,
    #[arg(long, default_value_t = 20)]
    pub nfe: usize,
    #[arg(long, default_value_t = 1000)]
    pub timesteps: usize,
    #[arg(long, default_value_t = DEFAULT_SIGMA_MAX)]
    pub sigma_max: f64,
    #[arg(long, default_value_t = DEFAULT_SV_THRESHOLD)]
    pub sv_threshold: f64,
    /// `identity`, `gaussian:tau=<t>[,mean=<m>]` or `external:<cmd>`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub denoiser: Option<String>,
    /// Seconds to wait for each external denoiser reply.
    #[arg(long, default_value_t = 120.0)]
    pub denoiser_timeout: f64,
}

impl SamplerArgs {
    fn config(&self, seed: u64, sigma_y: f64, mode: Mode) -> SamplerConfig {
        SamplerConfig {
            eta: self.eta,
            eta_b: self.eta_b,
            sigma_y,
            nfe: self.nfe,
            seed,
            image_id: 0,
            mode,
            num_timesteps: self.timesteps,
            sigma_max: self.sigma_max,
        }
    }

    fn denoiser(&self, default: &str) -> Result<Box<dyn Denoiser>> {
        if !(self.denoiser_timeout > 0.0) {
            return Err(Error::InvalidArgument("--denoiser-timeout must be positive".into()));
        }
        parse_denoiser(
            self.denoiser.as_deref().unwrap_or(default),
            Duration::from_secs_f64(self.denoiser_timeout),
        )
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct RestoreArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Noise covariance; needed in whitened mode.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cov: Option<PathBuf>,
    #[arg(long, default_value = "denoise")]
    pub task: String,
    #[arg(long)]
    pub sigma_y: f64,
    #[arg(long, default_value = "whitened")]
    pub mode: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long)]
    pub out: PathBuf,
}

/// Where the cases come from: a dataset tree or synthetic prior images.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct SourceArgs {
    #[arg(long, conflicts_with = "synthetic")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    /// Noise level of the dataset to evaluate.
    #[arg(long, default_value = "high")]
    pub level: String,
    /// Number of synthetic Gaussian-prior cases.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<usize>,
    /// Synthetic image size `HxW`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub channels: usize,
    #[arg(long, default_value_t = 0.5)]
    pub prior_mean: f64,
    #[arg(long, default_value_t = 0.15)]
    pub prior_tau: f64,
}

impl SourceArgs {
    fn default_denoiser(&self) -> String {
        format!("gaussian:tau={},mean={}", self.prior_tau, self.prior_mean)
    }

    fn prior(&self, count: usize, sigma_y: f64, seed: u64, default_size: &str) -> Result<PriorCases> {
        let size = parse_patch(self.size.as_deref().unwrap_or(default_size))?;
        Ok(PriorCases {
            count,
            dims: [self.channels, size.h, size.w],
            mean: self.prior_mean,
            tau: self.prior_tau,
            sigma_y,
            seed,
        })
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct EvalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,
    #[arg(long, default_value = "denoise")]
    pub task: String,
    /// Whitening covariance; estimated from the dataset's dark frames when omitted.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cov: Option<PathBuf>,
    /// Patch size for covariance estimation.
    #[arg(long, default_value = "8x8")]
    pub patch: String,
    /// True noise level; taken from the covariance scale when omitted.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_y: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "whitened,plain")]
    pub methods: Vec<String>,
    /// Assumed noise levels to sweep per method instead of the true level.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma0_grid: Option<Vec<f64>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long, default_value = "report.csv")]
    pub report: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct AblatePerturbArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,
    #[arg(long, default_value = "denoise")]
    pub task: String,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cov: Option<PathBuf>,
    #[arg(long, default_value = "8x8")]
    pub patch: String,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_y: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.10,0.20")]
    pub levels: Vec<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long, default_value = "ablate_perturb.csv")]
    pub report: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct AblatePatchArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: SourceArgs,
    #[arg(long, default_value = "denoise")]
    pub task: String,
    #[arg(long, value_delimiter = ',', default_value = "8x8,16x16,32x32,4x128")]
    pub sizes: Vec<String>,
    /// Dark frames to estimate from; the dataset's own when omitted.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frames: Option<Vec<PathBuf>>,
    /// Number of synthetic dark frames.
    #[arg(long, default_value_t = 256)]
    pub dark_frames: usize,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_y: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub sampler: SamplerArgs,
    #[arg(long, default_value = "ablate_patch.csv")]
    pub report: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct DenoiserPeerArgs {
    /// `identity` or `gaussian:tau=<t>[,mean=<m>]`.
    #[arg(long, default_value = "identity")]
    pub denoiser: String,
}

pub(super) fn primary_output(cmd: &Command) -> Option<PathBuf> {
    match cmd {
        Command::EstimateCov(a) => Some(a.out.clone()),
        Command::MakeCov(a) => Some(a.out.clone()),
        Command::PerturbCov(a) => Some(a.out.clone()),
        Command::Simulate(a) => Some(a.out.clone()),
        Command::Degrade(a) => Some(a.out.clone()),
        Command::Restore(a) => Some(a.out.clone()),
        Command::Eval(a) => Some(a.report.clone()),
        Command::AblatePerturb(a) => Some(a.report.clone()),
        Command::AblatePatch(a) => Some(a.report.clone()),
        Command::DenoiserPeer(_) => None,
    }
}

pub(super) fn run(cmd: &Command, ctx: &RunContext) -> Result<()> {
    match cmd {
        Command::EstimateCov(a) => estimate_cov(a, ctx),
        Command::MakeCov(a) => make_cov(a, ctx),
        Command::PerturbCov(a) => perturb_cov(a, ctx),
        Command::Simulate(a) => simulate(a, ctx),
        Command::Degrade(a) => degrade(a, ctx),
        Command::Restore(a) => restore_cmd(a, ctx),
        Command::Eval(a) => eval(a, ctx),
        Command::AblatePerturb(a) => ablate_perturb(a, ctx),
        Command::AblatePatch(a) => ablate_patch(a, ctx),
        Command::DenoiserPeer(a) => denoiser_peer(a),
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => std::fs::create_dir_all(p).map_err(|e| Error::io(p, e)),
        _ => Ok(()),
    }
}

fn is_frame_file(p: &Path) -> bool {
    p.is_file()
        && p.extension()
            .is_some_and(|e| ["png", "ct"].iter().any(|x| e.eq_ignore_ascii_case(x)))
}

fn collect_frames(paths: &[PathBuf]) -> Result<Vec<PlanarImage>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut inner: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| Error::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| is_frame_file(f))
                .collect();
            inner.sort();
            files.extend(inner);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(Error::InvalidArgument("no dark frames found".into()));
    }
    files.iter().map(load_any).collect()
}

fn estimate_cov(a: &EstimateCovArgs, ctx: &RunContext) -> Result<()> {
    let frames = collect_frames(&a.frames)?;
    let cov = estimate_covariance(&frames, parse_patch(&a.patch)?)?;
    let out = ctx.output(&a.out);
    ensure_parent(&out)?;
    cov.save(&out)?;
    println!(
        "estimated {} covariance from {} frames (scale {:.6e}) -> {}",
        cov.patch(),
        frames.len(),
        cov.normalization_scale(),
        out.display()
    );
    Ok(())
}

fn make_cov(a: &MakeCovArgs, ctx: &RunContext) -> Result<()> {
    let patch = parse_patch(&a.patch)?;
    let bands = match &a.neighbors {
        Some(n) => offsets_for_2d_neighbors(patch.w, parse::<Neighborhood>(n)?),
        None => a.bands.clone(),
    };
    let scaling: BandScaling = parse(&a.band_scaling)?;
    let cov = build_synthetic_covariance(a.sigma, a.alpha, &bands, a.epsilon, patch, scaling)?;
    let out = ctx.output(&a.out);
    ensure_parent(&out)?;
    cov.save(&out)?;
    println!("wrote {} covariance -> {}", cov.patch(), out.display());
    Ok(())
}

fn perturb_cov(a: &PerturbCovArgs, ctx: &RunContext) -> Result<()> {
    let cov = CovarianceModel::load(&a.cov)?;
    let perturbed = perturb_covariance(&cov, a.level, ctx.seed)?;
    let out = ctx.output(&a.out);
    ensure_parent(&out)?;
    perturbed.save(&out)?;
    println!("perturbed at level {} -> {}", a.level, out.display());
    Ok(())
}

fn simulate(a: &SimulateArgs, ctx: &RunContext) -> Result<()> {
    let cov = CovarianceModel::load(&a.cov)?;
    let size = parse_patch(&a.size)?;
    let grid = PatchGrid::new(size.h, size.w, cov.patch());
    let noise = sample_correlated_noise(&cov, a.sigma_y, &grid, a.channels, ctx.seed)?;
    let out = ctx.output(&a.out);
    ensure_parent(&out)?;
    write_image_tensor(&noise, &out)?;
    println!("wrote {}x{}x{} noise -> {}", a.channels, size.h, size.w, out.display());
    Ok(())
}

fn load_cov_or_white(path: Option<&Path>) -> Result<CovarianceModel> {
    match path {
        Some(p) => CovarianceModel::load(p),
        None => Ok(CovarianceModel::identity(PatchSize::default())),
    }
}

fn degrade(a: &DegradeArgs, ctx: &RunContext) -> Result<()> {
    let clean = load_any(&a.input)?;
    let task = DegradationSpec::from_task(&a.task)?;
    let cov = load_cov_or_white(a.cov.as_deref())?;
    let y = simulate_measurement(&task, &clean, &cov, a.sigma_y, ctx.seed)?;
    let out = ctx.output(&a.out);
    ensure_parent(&out)?;
    save_any(&y, &out)?;
    println!("wrote {:?} measurement -> {}", y.dims(), out.display());
    Ok(())
}

/// Input plane size whose degradation has the measurement's size.
fn input_size(task: &DegradationSpec, meas_h: usize, meas_w: usize) -> (usize, usize) {
    match task.kind {
        DegradationKind::BlockAverage { scale } => (meas_h * scale, meas_w * scale),
        _ => (meas_h, meas_w),
    }
}

fn restore_cmd(a: &RestoreArgs, ctx: &RunContext) -> Result<()> {
    let y = load_any(&a.input)?;
    let task = DegradationSpec::from_task(&a.task)?.with_threshold(a.sampler.sv_threshold);
    let mode: Mode = parse(&a.mode)?;
    if mode == Mode::Whitened && a.cov.is_none() {
        return Err(Error::InvalidArgument("whitened mode needs --cov".into()));
    }
    let cov = load_cov_or_white(a.cov.as_deref())?;
    let (h, w) = input_size(&task, y.height(), y.width());
    let op = build_operator(&task, h, w)?;
    let denoiser = a.sampler.denoiser("gaussian:tau=0.3")?;
    let config = a.sampler.config(ctx.seed, a.sigma_y, mode);
    let restored = restore(&op, &cov, &y, denoiser.as_ref(), &config)?;
    let out = ctx.output(&a.out);
    ensure_parent(&out)?;
    save_any(&restored, &out)?;
    println!(
        "restored {:?} ({} mode) -> {}",
        restored.dims(),
        mode.as_str(),
        out.display()
    );
    Ok(())
}

struct Prepared {
    cases: Vec<ExperimentCase>,
    covariance: CovarianceModel,
    denoiser: Box<dyn Denoiser>,
}

/// Cases, whitening covariance and denoiser for eval-style commands.
fn prepare_cases(
    source: &SourceArgs,
    task: &DegradationSpec,
    cov_path: Option<&Path>,
    patch: &str,
    sigma_y: Option<f64>,
    sampler: &SamplerArgs,
    seed: u64,
) -> Result<Prepared> {
    let denoiser = sampler.denoiser(&source.default_denoiser())?;
    match (&source.manifest, source.synthetic) {
        (Some(root), _) => {
            let manifest = load_manifest(root)?;
            let covariance = match cov_path {
                Some(p) => CovarianceModel::load(p)?,
                None => estimate_covariance(&manifest.load_dark_frames(&source.level)?, parse_patch(patch)?)?,
            };
            let sigma_y = sigma_y.unwrap_or_else(|| covariance.normalization_scale().sqrt());
            let cases = manifest_cases(&manifest, &source.level, task, sigma_y, seed)?;
            Ok(Prepared {
                cases,
                covariance,
                denoiser,
            })
        }
        (None, Some(count)) => {
            let p = cov_path.ok_or_else(|| Error::InvalidArgument("synthetic runs need --cov".into()))?;
            let covariance = CovarianceModel::load(p)?;
            let sigma_y = sigma_y.ok_or_else(|| Error::InvalidArgument("synthetic runs need --sigma-y".into()))?;
            let cases = source.prior(count, sigma_y, seed, "32x32")?.build(task, &covariance)?;
            Ok(Prepared {
                cases,
                covariance,
                denoiser,
            })
        }
        (None, None) => Err(Error::InvalidArgument("give either --manifest or --synthetic".into())),
    }
}

/// Write the report (even a partial one) and then surface `outcome`.
fn finish_report(report: &MetricReport, path: &Path, outcome: Result<()>) -> Result<()> {
    ensure_parent(path)?;
    report.write_both(path)?;
    for s in report.summaries() {
        println!(
            "{:<28} n={:<4} psnr={:>8.3} dB  ssim={:.4}",
            s.method, s.count, s.mean_psnr_db, s.mean_ssim
        );
    }
    println!("report -> {}", path.display());
    outcome
}

fn eval(a: &EvalArgs, ctx: &RunContext) -> Result<()> {
    let task = DegradationSpec::from_task(&a.task)?.with_threshold(a.sampler.sv_threshold);
    let prepared = prepare_cases(
        &a.source,
        &task,
        a.cov.as_deref(),
        &a.patch,
        a.sigma_y,
        &a.sampler,
        ctx.seed,
    )?;
    let modes = a.methods.iter().map(|m| parse::<Mode>(m)).collect::<Result<Vec<_>>>()?;
    let methods = match &a.sigma0_grid {
        Some(grid) => modes.iter().flat_map(|&m| MethodSpec::sigma_grid(m, grid)).collect(),
        None => modes.into_iter().map(MethodSpec::new).collect(),
    };
    let spec = ExperimentSpec {
        task,
        covariance: prepared.covariance,
        methods,
        sampler: a.sampler.config(ctx.seed, 0.0, Mode::Whitened),
    };
    let mut report = MetricReport::new();
    let outcome = crate::harness::run_experiment(&spec, &prepared.cases, prepared.denoiser.as_ref(), &mut report);
    finish_report(&report, &ctx.output(&a.report), outcome)
}

fn write_points(result: &AblationResult, report_path: &Path) -> Result<()> {
    let path = report_path.with_extension("points.json");
    let text = result.to_json();
    write_atomic(&path, |w| std::io::Write::write_all(w, text.as_bytes()))
}

fn ablate_perturb(a: &AblatePerturbArgs, ctx: &RunContext) -> Result<()> {
    let task = DegradationSpec::from_task(&a.task)?.with_threshold(a.sampler.sv_threshold);
    let prepared = prepare_cases(
        &a.source,
        &task,
        a.cov.as_deref(),
        &a.patch,
        a.sigma_y,
        &a.sampler,
        ctx.seed,
    )?;
    let spec = ExperimentSpec {
        task,
        covariance: prepared.covariance,
        methods: vec![],
        sampler: a.sampler.config(ctx.seed, 0.0, Mode::Whitened),
    };
    let mut result = AblationResult::default();
    let outcome = ablate_perturbation(
        &a.levels,
        &spec,
        &prepared.cases,
        prepared.denoiser.as_ref(),
        ctx.seed,
        &mut result,
    );
    let path = ctx.output(&a.report);
    ensure_parent(&path)?;
    write_points(&result, &path)?;
    finish_report(&result.report, &path, outcome)
}

fn ablate_patch(a: &AblatePatchArgs, ctx: &RunContext) -> Result<()> {
    let task = DegradationSpec::from_task(&a.task)?.with_threshold(a.sampler.sv_threshold);
    let sizes = a.sizes.iter().map(|s| parse_patch(s)).collect::<Result<Vec<_>>>()?;
    let denoiser = a.sampler.denoiser(&a.source.default_denoiser())?;
    let (cases, frames) = match (&a.source.manifest, a.source.synthetic) {
        (Some(root), _) => {
            let manifest = load_manifest(root)?;
            let frames = match &a.frames {
                Some(f) => collect_frames(f)?,
                None => manifest.load_dark_frames(&a.source.level)?,
            };
            let sigma_y = match a.sigma_y {
                Some(s) => s,
                None => estimate_covariance(&frames, PatchSize::default())?
                    .normalization_scale()
                    .sqrt(),
            };
            (
                manifest_cases(&manifest, &a.source.level, &task, sigma_y, ctx.seed)?,
                frames,
            )
        }
        (None, Some(count)) => {
            let sigma_y = a
                .sigma_y
                .ok_or_else(|| Error::InvalidArgument("synthetic runs need --sigma-y".into()))?;
            let noise = StationaryNoise::row_correlated(sigma_y);
            let prior = a.source.prior(count, sigma_y, ctx.seed, "32x128")?;
            let frames = match &a.frames {
                Some(f) => collect_frames(f)?,
                None => noise.dark_frames(a.dark_frames, prior.dims[1], prior.dims[2], ctx.seed ^ 0xDA2C),
            };
            (noise.cases(&prior, &task)?, frames)
        }
        (None, None) => return Err(Error::InvalidArgument("give either --manifest or --synthetic".into())),
    };
    let spec = ExperimentSpec {
        task,
        covariance: CovarianceModel::identity(PatchSize::default()),
        methods: vec![],
        sampler: a.sampler.config(ctx.seed, 0.0, Mode::Whitened),
    };
    let mut result = AblationResult::default();
    let outcome = ablate_patch_size(&sizes, &frames, &spec, &cases, denoiser.as_ref(), &mut result);
    let path = ctx.output(&a.report);
    ensure_parent(&path)?;
    write_points(&result, &path)?;
    finish_report(&result.report, &path, outcome)
}

pub(super) fn denoiser_peer(a: &DenoiserPeerArgs) -> Result<()> {
    if a.denoiser.starts_with("external:") {
        return Err(Error::InvalidArgument(
            "a peer cannot forward to another external denoiser".into(),
        ));
    }
    let denoiser = parse_denoiser(&a.denoiser, Duration::from_secs(1))?;
    let stdin = std::io::stdin().lock();
    let stdout = std::io::stdout().lock();
    serve_denoiser(stdin, stdout, denoiser.as_ref())?;
    Ok(())
}
