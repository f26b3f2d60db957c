//! Restoration by spectral diffusion sampling.

mod denoiser;
mod external;
mod run;
mod schedule;
pub mod transitions;

pub use denoiser::{Denoiser, GaussianPriorDenoiser, IdentityDenoiser, PriorMean};
pub use external::{serve_denoiser, ExternalDenoiser, RequestHeader, DEFAULT_TIMEOUT};
pub use run::{restore, run_sampler, spectral_observations, Conditioning, Mode, SamplerConfig, DEFAULT_SIGMA_MAX};
pub use schedule::{make_schedule, subsample_schedule, DiffusionSchedule};
pub use transitions::{
    init_xT, init_xT_given_clean, p_transition, q_transition, regime, Gaussian, Observation, Regime, TransitionParams,
};
