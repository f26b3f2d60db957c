//! Per-coordinate Gaussian kernels of the spectral sampler.
//!
//! Every kernel acts on one spectral coordinate and returns the mean and
//! variance of a scalar Gaussian. Observed coordinates carry the spectral
//! measurement `upsilon` and its noise level `delta = sigma_y / s`.

use rand::Rng;
use rand_distr::StandardNormal;

/// Spectral measurement of one observed coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub upsilon: f64,
    pub delta: f64,
}

impl Observation {
    /// `None` when the coordinate is unobserved (`s = 0`) or noisier than
    /// the top of the ladder (`delta > sigma_T`).
    pub fn classify(upsilon: Option<f64>, singular_value: f64, sigma_y: f64, sigma_top: f64) -> Option<Self> {
        let upsilon = upsilon?;
        if !(singular_value > 0.0) {
            return None;
        }
        let delta = sigma_y / singular_value;
        (delta <= sigma_top).then_some(Self { upsilon, delta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Unobserved,
    /// `sigma_t < delta`: the measurement is noisier than the current state.
    MeasurementNoisier,
    /// `sigma_t >= delta`.
    DiffusionNoisier,
}

pub fn regime(obs: Option<Observation>, sigma_t: f64) -> Regime {
    match obs {
        None => Regime::Unobserved,
        Some(o) if sigma_t < o.delta => Regime::MeasurementNoisier,
        Some(_) => Regime::DiffusionNoisier,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub mean: f64,
    pub var: f64,
}

impl Gaussian {
    /// `mean + sqrt(var) * z` for one standard normal draw. A draw is always
    /// consumed so the stream layout does not depend on the variances.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        self.mean + self.var.max(0.0).sqrt() * z
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionParams {
    pub eta: f64,
    pub eta_b: f64,
}

impl Default for TransitionParams {
    fn default() -> Self {
        Self { eta: 0.8, eta_b: 1.0 }
    }
}

/// Sampler initialization at `sigma_T`.
#[allow(non_snake_case)]
pub fn init_xT(obs: Option<Observation>, sigma_top: f64) -> Gaussian {
    match obs {
        None => Gaussian {
            mean: 0.0,
            var: sigma_top * sigma_top,
        },
        Some(o) => Gaussian {
            mean: o.upsilon,
            var: sigma_top * sigma_top - o.delta * o.delta,
        },
    }
}

/// Ground-truth initialization at `sigma_T`, centered on the clean
/// coordinate where the measurement says nothing.
#[allow(non_snake_case)]
pub fn init_xT_given_clean(obs: Option<Observation>, xi_clean: f64, sigma_top: f64) -> Gaussian {
    match obs {
        None => Gaussian {
            mean: xi_clean,
            var: sigma_top * sigma_top,
        },
        Some(_) => init_xT(obs, sigma_top),
    }
}

/// Kernel from `sigma_next` down to `sigma_t` around an estimate `anchor`
/// of the clean coordinate.
pub fn transition(
    params: TransitionParams,
    obs: Option<Observation>,
    xi_next: f64,
    anchor: f64,
    sigma_t: f64,
    sigma_next: f64,
) -> Gaussian {
    let TransitionParams { eta, eta_b } = params;
    let alpha = (1.0 - eta * eta).sqrt() * sigma_t;
    let agnostic_var = eta * eta * sigma_t * sigma_t;
    match (regime(obs, sigma_t), obs) {
        (Regime::Unobserved, _) | (_, None) => Gaussian {
            mean: anchor + (alpha / sigma_next) * (xi_next - anchor),
            var: agnostic_var,
        },
        (Regime::MeasurementNoisier, Some(o)) => Gaussian {
            mean: anchor + (alpha / o.delta) * (o.upsilon - anchor),
            var: agnostic_var,
        },
        (Regime::DiffusionNoisier, Some(o)) => Gaussian {
            mean: (1.0 - eta_b) * anchor + eta_b * o.upsilon,
            var: (sigma_t * sigma_t - eta_b * eta_b * o.delta * o.delta).max(0.0),
        },
    }
}

/// Generative transition anchored on the denoiser's estimate.
pub fn p_transition(
    params: TransitionParams,
    obs: Option<Observation>,
    xi_next: f64,
    xi_theta: f64,
    sigma_t: f64,
    sigma_next: f64,
) -> Gaussian {
    transition(params, obs, xi_next, xi_theta, sigma_t, sigma_next)
}

/// Inference transition anchored on the true clean coordinate.
pub fn q_transition(
    params: TransitionParams,
    obs: Option<Observation>,
    xi_next: f64,
    xi_clean: f64,
    sigma_t: f64,
    sigma_next: f64,
) -> Gaussian {
    transition(params, obs, xi_next, xi_clean, sigma_t, sigma_next)
}
