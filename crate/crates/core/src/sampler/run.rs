use serde::{Deserialize, Serialize};

use super::denoiser::Denoiser;
use super::schedule::{make_schedule, subsample_schedule, DiffusionSchedule};
use super::transitions::{init_xT, p_transition, Observation, TransitionParams};
use crate::covariance::{cholesky_whitener, CovarianceModel, PatchGrid, WhiteningTransform};
use crate::error::{Error, Result};
use crate::image::PlanarImage;
use crate::operators::{whiten_operator, SvdOperator};
use crate::rng::{stream, Domain};

pub const DEFAULT_SIGMA_MAX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Condition on the whitened problem `(W y, W H)`.
    #[default]
    Whitened,
    /// Treat the noise as white with level `sigma_y`.
    Plain,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Whitened => "whitened",
            Mode::Plain => "plain",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whitened" => Ok(Mode::Whitened),
            "plain" => Ok(Mode::Plain),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode {other:?} (expected whitened or plain)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub eta: f64,
    pub eta_b: f64,
    pub sigma_y: f64,
    /// Number of retained timesteps; also the number of denoiser calls.
    pub nfe: usize,
    pub seed: u64,
    /// Distinguishes trajectories that share a seed.
    pub image_id: u32,
    pub mode: Mode,
    pub num_timesteps: usize,
    pub sigma_max: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            eta: 0.8,
            eta_b: 1.0,
            sigma_y: 0.0,
            nfe: 20,
            seed: 0,
            image_id: 0,
            mode: Mode::Whitened,
            num_timesteps: 1000,
            sigma_max: DEFAULT_SIGMA_MAX,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.eta) || !unit(self.eta_b) {
            return Err(Error::InvalidArgument(format!(
                "eta and eta_b must lie in [0, 1] (got {}, {})",
                self.eta, self.eta_b
            )));
        }
        if !(self.sigma_y >= 0.0) || !self.sigma_y.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "sigma_y must be >= 0, got {}",
                self.sigma_y
            )));
        }
        Ok(())
    }

    pub fn params(&self) -> TransitionParams {
        TransitionParams {
            eta: self.eta,
            eta_b: self.eta_b,
        }
    }

    pub fn schedule(&self) -> Result<DiffusionSchedule> {
        subsample_schedule(&make_schedule(self.num_timesteps, self.sigma_max)?, self.nfe)
    }
}

/// The operator the sampler conditions on, with the whitener applied to
/// measurements before projection.
#[derive(Debug, Clone)]
pub struct Conditioning {
    op: SvdOperator,
    whitening: Option<(WhiteningTransform, PatchGrid)>,
}

impl Conditioning {
    pub fn plain(op: SvdOperator) -> Self {
        Self { op, whitening: None }
    }

    /// Whitened problem for noise with per-tile covariance `cov` on the
    /// measurement plane.
    pub fn whitened(op: &SvdOperator, cov: &CovarianceModel) -> Result<Self> {
        let wt = cholesky_whitener(cov)?;
        let (oh, ow) = op.out_shape();
        let grid = PatchGrid::new(oh, ow, cov.patch());
        let whitened = whiten_operator(op, &wt, &grid)?;
        Ok(Self {
            op: whitened,
            whitening: Some((wt, grid)),
        })
    }

    pub fn new(mode: Mode, op: &SvdOperator, cov: &CovarianceModel) -> Result<Self> {
        match mode {
            Mode::Plain => Ok(Self::plain(op.clone())),
            Mode::Whitened => Self::whitened(op, cov),
        }
    }

    pub fn operator(&self) -> &SvdOperator {
        &self.op
    }

    pub fn whitening(&self) -> Option<(&WhiteningTransform, &PatchGrid)> {
        self.whitening.as_ref().map(|(w, g)| (w, g))
    }

    /// Apply the whitener (if any) to every channel of `y`.
    pub fn condition_measurement(&self, y: &PlanarImage) -> Result<PlanarImage> {
        match &self.whitening {
            None => Ok(y.clone()),
            Some((wt, grid)) => wt.whiten_image(y, grid),
        }
    }

    fn check_measurement(&self, y: &PlanarImage) -> Result<()> {
        let (oh, ow) = self.op.out_shape();
        if (y.height(), y.width()) != (oh, ow) || y.channels() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "measurement is {:?} but the operator produces {oh}x{ow} planes",
                y.dims()
            )));
        }
        Ok(())
    }

    fn lift(&self, xi: &[Vec<f64>]) -> Result<PlanarImage> {
        let (h, w) = self.op.in_shape();
        let mut data = Vec::with_capacity(xi.len() * h * w);
        for channel in xi {
            data.extend(self.op.from_spectral(channel)?);
        }
        PlanarImage::new(xi.len(), h, w, data)
    }

    fn project(&self, x: &PlanarImage) -> Result<Vec<Vec<f64>>> {
        (0..x.channels()).map(|c| self.op.to_spectral(x.plane(c))).collect()
    }
}

/// Per-channel spectral observations of a measurement.
pub fn spectral_observations(
    cond: &Conditioning,
    y: &PlanarImage,
    sigma_y: f64,
    sigma_top: f64,
) -> Result<Vec<Vec<Option<Observation>>>> {
    cond.check_measurement(y)?;
    let y_tilde = cond.condition_measurement(y)?;
    (0..y.channels())
        .map(|c| {
            let meas = cond.op.measurement_to_spectral(y_tilde.plane(c))?;
            Ok(meas
                .values
                .iter()
                .enumerate()
                .map(|(i, &u)| Observation::classify(u, cond.op.singular_value(i), sigma_y, sigma_top))
                .collect())
        })
        .collect()
}

/// Draw one restoration of `y`.
///
/// The trajectory starts at the top of the retained ladder, takes one
/// transition per retained step, and finishes with a transition to
/// `sigma_0 = 0` anchored on a last denoiser call. The result is clamped
/// to `[0, 1]`.
pub fn run_sampler(
    cond: &Conditioning,
    y: &PlanarImage,
    denoiser: &dyn Denoiser,
    config: &SamplerConfig,
) -> Result<PlanarImage> {
    config.validate()?;
    let schedule = config.schedule()?;
    let params = config.params();
    let sel = schedule.selected();
    let sigma_top = schedule.sigma(*sel.last().expect("nonempty selection"));
    let obs = spectral_observations(cond, y, config.sigma_y, sigma_top)?;

    let mut rng = stream(config.seed, Domain::Trajectory, 0, config.image_id);
    let mut xi: Vec<Vec<f64>> = obs
        .iter()
        .map(|ch| ch.iter().map(|&o| init_xT(o, sigma_top).sample(&mut rng)).collect())
        .collect();

    let in_dims = {
        let (h, w) = cond.op.in_shape();
        [y.channels(), h, w]
    };
    let steps = sel.len();
    for j in (0..steps).rev() {
        let sigma_next = schedule.sigma(sel[j]);
        let sigma_t = if j == 0 { 0.0 } else { schedule.sigma(sel[j - 1]) };
        let x = cond.lift(&xi)?;
        let x0 = denoiser.predict(&x, sigma_next)?;
        if x0.dims() != in_dims {
            return Err(Error::DimensionMismatch(format!(
                "denoiser returned {:?} for a state of {:?}",
                x0.dims(),
                in_dims
            )));
        }
        let xi_theta = cond.project(&x0)?;
        for ((state, anchor), ch_obs) in xi.iter_mut().zip(&xi_theta).zip(&obs) {
            for ((v, &a), &o) in state.iter_mut().zip(anchor).zip(ch_obs) {
                *v = p_transition(params, o, *v, a, sigma_t, sigma_next).sample(&mut rng);
            }
        }
    }
    Ok(cond.lift(&xi)?.clamped())
}

/// Build the conditioning for `config.mode` and run one trajectory.
pub fn restore(
    op: &SvdOperator,
    cov: &CovarianceModel,
    y: &PlanarImage,
    denoiser: &dyn Denoiser,
    config: &SamplerConfig,
) -> Result<PlanarImage> {
    let cond = Conditioning::new(config.mode, op, cov)?;
    run_sampler(&cond, y, denoiser, config)
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;
    use crate::covariance::{build_synthetic_covariance, BandScaling, PatchSize};
    use crate::operators::{build_operator, DegradationSpec};
    use crate::sampler::denoiser::{GaussianPriorDenoiser, IdentityDenoiser};

    struct Counting<D>(D, AtomicUsize);
    impl<D: Denoiser> Denoiser for Counting<D> {
        fn predict(&self, x: &PlanarImage, s: f64) -> Result<PlanarImage> {
            self.1.fetch_add(1, Ordering::SeqCst);
            self.0.predict(x, s)
        }
    }

    fn ramp(c: usize, h: usize, w: usize) -> PlanarImage {
        let n = c * h * w;
        PlanarImage::new(c, h, w, (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()).unwrap()
    }

    #[test]
    fn noiseless_identity_returns_measurement() {
        let y = ramp(3, 8, 8);
        let op = build_operator(&DegradationSpec::identity(), 8, 8).unwrap();
        let cond = Conditioning::plain(op);
        let d = Counting(GaussianPriorDenoiser::constant(0.5, 0.1).unwrap(), AtomicUsize::new(0));
        let config = SamplerConfig {
            seed: 3,
            ..SamplerConfig::default()
        };
        let out = run_sampler(&cond, &y, &d, &config).unwrap();
        assert_eq!(out.data(), y.data());
        assert_eq!(d.1.load(Ordering::SeqCst), 20);
    }

    #[test]
    fn same_seed_same_output() {
        let y = ramp(1, 16, 16);
        let op = build_operator(&DegradationSpec::from_task("sr2").unwrap(), 16, 16).unwrap();
        let yl = DegradationSpec::from_task("sr2")
            .unwrap()
            .apply_exact(&ramp(1, 16, 16))
            .unwrap();
        let cond = Conditioning::plain(op);
        let config = SamplerConfig {
            sigma_y: 0.05,
            seed: 11,
            nfe: 5,
            ..SamplerConfig::default()
        };
        let d = GaussianPriorDenoiser::constant(0.5, 0.2).unwrap();
        let a = run_sampler(&cond, &yl, &d, &config).unwrap();
        let b = run_sampler(&cond, &yl, &d, &config).unwrap();
        assert_eq!(a, b);
        let c = run_sampler(
            &cond,
            &yl,
            &d,
            &SamplerConfig {
                seed: 12,
                ..config.clone()
            },
        )
        .unwrap();
        assert_ne!(a, c);
        assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(run_sampler(&cond, &y, &d, &config).is_err());
    }

    #[test]
    fn identity_covariance_whitened_matches_plain_bitwise() {
        let y = ramp(2, 16, 16).map(|v| v * 0.8 + 0.05);
        let op = build_operator(&DegradationSpec::identity(), 16, 16).unwrap();
        let cov = CovarianceModel::identity(PatchSize::new(8, 8));
        let d = GaussianPriorDenoiser::constant(0.5, 0.2).unwrap();
        let base = SamplerConfig {
            sigma_y: 0.1,
            seed: 5,
            nfe: 4,
            ..SamplerConfig::default()
        };
        let w = restore(
            &op,
            &cov,
            &y,
            &d,
            &SamplerConfig {
                mode: Mode::Whitened,
                ..base.clone()
            },
        )
        .unwrap();
        let p = restore(
            &op,
            &cov,
            &y,
            &d,
            &SamplerConfig {
                mode: Mode::Plain,
                ..base
            },
        )
        .unwrap();
        assert_eq!(w, p);
    }

    #[test]
    fn whitening_changes_the_conditioning() {
        let cov =
            build_synthetic_covariance(1.0, 0.9, &[1], 0.0, PatchSize::new(8, 8), BandScaling::MaxDegree).unwrap();
        let op = build_operator(&DegradationSpec::identity(), 8, 8).unwrap();
        let cond = Conditioning::whitened(&op, &cov).unwrap();
        assert!(cond.whitening().is_some());
        let y = ramp(1, 8, 8);
        let obs = spectral_observations(&cond, &y, 0.0, 1.0).unwrap();
        assert!(obs[0].iter().all(|o| o.is_some()));
        let config = SamplerConfig {
            nfe: 3,
            ..SamplerConfig::default()
        };
        let out = run_sampler(&cond, &y, &IdentityDenoiser, &config).unwrap();
        for (a, b) in out.data().iter().zip(y.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let bad = SamplerConfig {
            eta: 1.5,
            ..SamplerConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!("fancy".parse::<Mode>().is_err());
        assert_eq!("plain".parse::<Mode>().unwrap(), Mode::Plain);
    }
}
