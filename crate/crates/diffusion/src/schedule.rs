//! Noise schedules.

use serde::{Deserialize, Serialize};

use crate::{DiffusionError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Spacing {
    Linear,
}

/// Cumulative-alpha schedule plus the sampler hyperparameters eta (DDIM
/// stochasticity) and gamma (resample weight).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSchedule {
    /// alpha_bar[t] for t = 0..=T_d with alpha_bar[0] = 1.
    pub alpha_bar: Vec<f64>,
    pub eta: f64,
    pub gamma_resample: f64,
}

impl DiffusionSchedule {
    pub fn t_max(&self) -> usize {
        self.alpha_bar.len() - 1
    }

    pub fn a_bar(&self, t: usize) -> Result<f64> {
        self.alpha_bar
            .get(t)
            .copied()
            .ok_or(DiffusionError::StepIndex {
                t,
                t_max: self.t_max(),
            })
    }
}

/// Linear beta schedule: alpha_bar[t] is the running product of (1 - beta_s).
pub fn make_schedule(
    t_d: usize,
    beta_min: f64,
    beta_max: f64,
    _spacing: Spacing,
    eta: f64,
    gamma_resample: f64,
) -> Result<DiffusionSchedule> {
    if !(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0) || t_d == 0 {
        return Err(DiffusionError::BetaRange(beta_min, beta_max));
    }
    let mut alpha_bar = Vec::with_capacity(t_d + 1);
    alpha_bar.push(1.0);
    let mut acc = 1.0;
    for t in 1..=t_d {
        let frac = if t_d == 1 {
            0.0
        } else {
            (t - 1) as f64 / (t_d - 1) as f64
        };
        let beta = beta_min + (beta_max - beta_min) * frac;
        acc *= 1.0 - beta;
        alpha_bar.push(acc);
    }
    Ok(DiffusionSchedule {
        alpha_bar,
        eta,
        gamma_resample,
    })
}
