use crate::error::{Error, Result};

/// Noise ladder `0 = sigma_0 < sigma_1 < ... < sigma_T` with the retained
/// subset of timesteps used during sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSchedule {
    sigmas: Vec<f64>,
    selected: Vec<usize>,
}

impl DiffusionSchedule {
    pub fn num_timesteps(&self) -> usize {
        self.sigmas.len() - 1
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn sigma(&self, t: usize) -> f64 {
        self.sigmas[t]
    }

    /// Retained timesteps, increasing, ending at `T`.
    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn sigma_max(&self) -> f64 {
        *self.sigmas.last().expect("nonempty ladder")
    }
}

/// Linear-in-sigma ladder of `T` steps; every step retained.
pub fn make_schedule(num_timesteps: usize, sigma_max: f64) -> Result<DiffusionSchedule> {
    if num_timesteps == 0 || !(sigma_max > 0.0) || !sigma_max.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "schedule needs T >= 1 and sigma_max > 0 (got {num_timesteps}, {sigma_max})"
        )));
    }
    let t_max = num_timesteps as f64;
    let sigmas = (0..=num_timesteps).map(|t| sigma_max * t as f64 / t_max).collect();
    Ok(DiffusionSchedule {
        sigmas,
        selected: (1..=num_timesteps).collect(),
    })
}

/// Keep `K` linearly spaced timesteps: `round(T (j + 1) / K)`.
pub fn subsample_schedule(schedule: &DiffusionSchedule, k: usize) -> Result<DiffusionSchedule> {
    let t_max = schedule.num_timesteps();
    if k == 0 || k > t_max {
        return Err(Error::InvalidArgument(format!(
            "cannot retain {k} of {t_max} timesteps"
        )));
    }
    let mut selected: Vec<usize> = Vec::with_capacity(k);
    for j in 0..k {
        let mut t = ((t_max * (j + 1)) as f64 / k as f64).round() as usize;
        if let Some(&prev) = selected.last() {
            t = t.max(prev + 1);
        }
        selected.push(t.min(t_max));
    }
    *selected.last_mut().expect("k >= 1") = t_max;
    Ok(DiffusionSchedule {
        sigmas: schedule.sigmas.clone(),
        selected,
    })
}
