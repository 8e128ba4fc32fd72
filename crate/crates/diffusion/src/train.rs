//! Training loop for the latent prior.

use rand::Rng;

use mdr_autodiff::{rng_from, AdamConfig, Tensor};

use crate::loss::ldm_loss;
use crate::predictor::{NoisePredictor, PredictorArch};
use crate::schedule::DiffusionSchedule;
use crate::{DiffusionError, Result};

#[derive(Debug, Clone)]
pub struct LdmTrainConfig {
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for LdmTrainConfig {
    fn default() -> Self {
        LdmTrainConfig {
            steps: 2000,
            batch: 16,
            lr: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LdmTrainReport {
    pub per_step_loss: Vec<f64>,
}

impl LdmTrainReport {
    /// Trailing-window smoothed loss values.
    pub fn smoothed(&self, window: usize) -> Vec<f64> {
        let n = self.per_step_loss.len();
        (0..n)
            .map(|i| {
                let lo = i.saturating_sub(window - 1);
                let s: f64 = self.per_step_loss[lo..=i].iter().sum();
                s / (i - lo + 1) as f64
            })
            .collect()
    }

    pub fn initial_smoothed(&self, window: usize) -> f64 {
        let s = self.smoothed(window);
        s.get(window.saturating_sub(1).min(s.len().saturating_sub(1)))
            .copied()
            .unwrap_or(f64::NAN)
    }

    pub fn final_smoothed(&self, window: usize) -> f64 {
        self.smoothed(window).last().copied().unwrap_or(f64::NAN)
    }
}

/// Train an epsilon predictor on a latent corpus; deterministic per seed.
pub fn train_ldm(
    latents: &[Tensor],
    arch: &PredictorArch,
    schedule: &DiffusionSchedule,
    cfg: &LdmTrainConfig,
) -> Result<(NoisePredictor, LdmTrainReport)> {
    if latents.is_empty() {
        return Err(DiffusionError::EmptyCorpus);
    }
    let mut net = NoisePredictor::init(arch, cfg.seed);
    let mut rng = rng_from(cfg.seed ^ 0x1d30_55ed);
    let adam = AdamConfig {
        lr: cfg.lr,
        ..Default::default()
    };
    let mut per_step_loss = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let batch: Vec<Tensor> = (0..cfg.batch.min(latents.len()))
            .map(|_| latents[rng.gen_range(0..latents.len())].clone())
            .collect();
        let (loss, grads) = ldm_loss(&net, &batch, schedule, rng.gen())?;
        if !loss.is_finite() {
            return Err(DiffusionError::Diverged(step));
        }
        net.params.adam_step(&grads, &adam)?;
        per_step_loss.push(loss);
    }
    Ok((net, LdmTrainReport { per_step_loss }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{make_schedule, Spacing};
    use mdr_autodiff::{normal_tensor, Dtype};

    fn tiny_corpus(n: usize) -> Vec<Tensor> {
        let mut rng = rng_from(42);
        (0..n)
            .map(|_| normal_tensor(&[2, 8, 8], Dtype::Real, &mut rng))
            .collect()
    }

    #[test]
    fn zero_steps_returns_init() {
        let arch = PredictorArch {
            in_ch: 2,
            hw: 8,
            ch1: 6,
            ch2: 8,
            emb_dim: 8,
        };
        let s = make_schedule(50, 1e-3, 0.05, Spacing::Linear, 0.0, 35.0).unwrap();
        let cfg = LdmTrainConfig {
            steps: 0,
            ..Default::default()
        };
        let (net, report) = train_ldm(&tiny_corpus(4), &arch, &s, &cfg).unwrap();
        assert_eq!(net.params, NoisePredictor::init(&arch, cfg.seed).params);
        assert!(report.per_step_loss.is_empty());
    }

    #[test]
    fn training_is_seed_deterministic_and_loss_falls() {
        let arch = PredictorArch {
            in_ch: 2,
            hw: 8,
            ch1: 8,
            ch2: 12,
            emb_dim: 8,
        };
        let s = make_schedule(50, 1e-3, 0.05, Spacing::Linear, 0.0, 35.0).unwrap();
        let cfg = LdmTrainConfig {
            steps: 150,
            batch: 8,
            lr: 2e-3,
            seed: 3,
        };
        let corpus = tiny_corpus(32);
        let (a, ra) = train_ldm(&corpus, &arch, &s, &cfg).unwrap();
        let (b, _) = train_ldm(&corpus, &arch, &s, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        let start = ra.initial_smoothed(20);
        let end = ra.final_smoothed(20);
        assert!(end < start, "smoothed loss went {start} -> {end}");
    }
}
