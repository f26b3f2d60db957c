mod common;

use card::covariance::{build_synthetic_covariance, BandScaling, CovarianceModel, PatchSize};
use card::harness::{gaussian_prior_image, simulate_measurement};
use card::operators::{build_operator, DegradationSpec};
use card::sampler::{
    make_schedule, p_transition, regime, run_sampler, spectral_observations, subsample_schedule, Conditioning,
    Denoiser, GaussianPriorDenoiser, Mode, Observation, Regime, SamplerConfig, TransitionParams,
};
use common::TASKS;
use proptest::prelude::*;

fn correlated() -> CovarianceModel {
    build_synthetic_covariance(1.0, 0.5, &[1, 4], 0.0, PatchSize::new(4, 4), BandScaling::MaxDegree).unwrap()
}

#[test]
fn noiseless_restorations_reproduce_every_observed_coordinate() {
    let cov = correlated();
    let denoiser = GaussianPriorDenoiser::constant(0.5, 0.05).unwrap();
    for task in TASKS {
        let spec = DegradationSpec::from_task(task).unwrap();
        let op = build_operator(&spec, 16, 16).unwrap();
        let clean = gaussian_prior_image([1, 16, 16], 0.5, 0.05, 3, 0);
        let y = spec.apply_exact(&clean).unwrap();
        for mode in [Mode::Whitened, Mode::Plain] {
            let cond = Conditioning::new(mode, &op, &cov).unwrap();
            let config = SamplerConfig {
                mode,
                ..SamplerConfig::default()
            };
            let x = run_sampler(&cond, &y, &denoiser, &config).unwrap();
            assert!(
                x.data().iter().all(|&v| v > 0.0 && v < 1.0),
                "{task}: clamping kicked in"
            );
            let obs = spectral_observations(&cond, &y, 0.0, 2.0).unwrap();
            let xi = cond.operator().to_spectral(x.plane(0)).unwrap();
            let mut observed = 0;
            for (i, o) in obs[0].iter().enumerate() {
                if let Some(o) = o {
                    observed += 1;
                    assert!((xi[i] - o.upsilon).abs() < 1e-9, "{task} {mode:?} coordinate {i}");
                }
            }
            assert!(observed > 0, "{task}");
        }
    }
}

#[test]
fn identity_covariance_makes_modes_bitwise_equal_for_every_task() {
    let cov = CovarianceModel::identity(PatchSize::new(4, 4));
    let denoiser = GaussianPriorDenoiser::constant(0.5, 0.2).unwrap();
    for task in TASKS {
        let spec = DegradationSpec::from_task(task).unwrap();
        let op = build_operator(&spec, 16, 16).unwrap();
        let clean = gaussian_prior_image([2, 16, 16], 0.5, 0.2, 8, 0);
        let y = simulate_measurement(&spec, &clean, &cov, 0.2, 8).unwrap();
        let run = |mode| {
            let config = SamplerConfig {
                sigma_y: 0.2,
                seed: 4,
                mode,
                ..SamplerConfig::default()
            };
            run_sampler(&Conditioning::new(mode, &op, &cov).unwrap(), &y, &denoiser, &config).unwrap()
        };
        assert_eq!(run(Mode::Whitened), run(Mode::Plain), "{task}");
    }
}

#[test]
fn trajectories_depend_only_on_seed_and_image_id() {
    let cov = correlated();
    let spec = DegradationSpec::from_task("deblur-gauss").unwrap();
    let op = build_operator(&spec, 16, 16).unwrap();
    let cond = Conditioning::whitened(&op, &cov).unwrap();
    let denoiser = GaussianPriorDenoiser::constant(0.5, 0.2).unwrap();
    let clean = gaussian_prior_image([1, 16, 16], 0.5, 0.2, 1, 0);
    let y = simulate_measurement(&spec, &clean, &cov, 0.1, 1).unwrap();
    let with = |seed, image_id| {
        let config = SamplerConfig {
            sigma_y: 0.1,
            seed,
            image_id,
            ..SamplerConfig::default()
        };
        run_sampler(&cond, &y, &denoiser, &config).unwrap()
    };
    assert_eq!(with(1, 0), with(1, 0));
    assert_ne!(with(1, 0), with(2, 0));
    assert_ne!(with(1, 0), with(1, 1));
}

/// Counts calls and returns a constant estimate.
struct Counting(std::sync::atomic::AtomicUsize);

impl Denoiser for Counting {
    fn predict(&self, x: &card::image::PlanarImage, sigma: f64) -> card::error::Result<card::image::PlanarImage> {
        assert!(sigma > 0.0, "denoiser called at sigma 0");
        self.0.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        Ok(x.map(|_| 0.5))
    }
}

#[test]
fn one_denoiser_call_per_retained_step() {
    let op = build_operator(&DegradationSpec::identity(), 8, 8).unwrap();
    let cond = Conditioning::plain(op);
    let y = card::image::PlanarImage::filled(1, 8, 8, 0.5);
    for nfe in [1, 7, 20, 100] {
        let counter = Counting(Default::default());
        let config = SamplerConfig {
            sigma_y: 0.1,
            nfe,
            num_timesteps: 100,
            ..SamplerConfig::default()
        };
        run_sampler(&cond, &y, &counter, &config).unwrap();
        assert_eq!(counter.0.into_inner(), nfe);
    }
}

proptest! {
    #[test]
    fn transition_variances_are_never_negative(
        sigma_next in 0.01f64..3.0,
        frac in 0.0f64..1.0,
        delta in 0.0f64..3.0,
        eta in 0.0f64..1.0,
        eta_b in 0.0f64..1.0,
        observed in any::<bool>(),
    ) {
        let sigma_t = sigma_next * frac;
        let obs = observed.then_some(Observation { upsilon: 0.3, delta });
        let g = p_transition(TransitionParams { eta, eta_b }, obs, 0.1, 0.2, sigma_t, sigma_next);
        prop_assert!(g.var >= 0.0 && g.mean.is_finite());
    }

    #[test]
    fn kernels_coincide_at_the_regime_boundary(
        delta in 0.05f64..2.0,
        eta in 0.0f64..1.0,
        upsilon in -2.0f64..2.0,
        anchor in -2.0f64..2.0,
    ) {
        let p = TransitionParams { eta, eta_b: (1.0 - eta * eta).sqrt() };
        let obs = Some(Observation { upsilon, delta });
        prop_assert_eq!(regime(obs, delta), Regime::DiffusionNoisier);
        let at = p_transition(p, obs, 1.0, anchor, delta, 2.5);
        // Measurement-noisier kernel written out at sigma_t = delta.
        let mean_b = anchor + (1.0 - eta * eta).sqrt() * (upsilon - anchor);
        let var_b = eta * eta * delta * delta;
        prop_assert!((at.mean - mean_b).abs() < 1e-12);
        prop_assert!((at.var - var_b).abs() < 1e-12);
        let below = p_transition(p, obs, 1.0, anchor, delta * (1.0 - 1e-13), 2.5);
        prop_assert_eq!(regime(obs, delta * (1.0 - 1e-13)), Regime::MeasurementNoisier);
        prop_assert!((below.mean - at.mean).abs() < 1e-11 && (below.var - at.var).abs() < 1e-11);
    }

    #[test]
    fn subsampled_schedules_end_at_the_top_and_increase(t in 1usize..400, k in 1usize..60) {
        let full = make_schedule(t, 2.0).unwrap();
        if k > t {
            prop_assert!(subsample_schedule(&full, k).is_err());
            return Ok(());
        }
        let sub = subsample_schedule(&full, k).unwrap();
        let sel = sub.selected();
        prop_assert_eq!(*sel.last().unwrap(), t);
        prop_assert!(sel.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(sel.len(), k);
        prop_assert!(sel[0] >= 1);
    }
}
