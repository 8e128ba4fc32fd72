//! Autoencoder training on transfer triplets.

use rand::Rng;

use mdr_autodiff::{rng_from, AdamConfig, Dtype, Tensor};

use crate::arch::{RepArchitecture, RepModel};
use crate::corpus::RepCorpus;
use crate::loss::{transfer_loss_batch, TripletTensors};
use crate::nets::{complex_to_channels, geom_forward};
use crate::{RepError, Result};

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub lambda_z: f64,
    /// Fraction of batch elements that are pure self-reconstruction pairs.
    pub self_pair_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch: 16,
            lr: 2e-3,
            lambda_z: 1e-4,
            self_pair_fraction: 0.25,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub per_epoch_loss: Vec<f64>,
}

impl TrainReport {
    pub fn initial(&self) -> f64 {
        *self.per_epoch_loss.first().unwrap_or(&f64::NAN)
    }

    pub fn final_loss(&self) -> f64 {
        *self.per_epoch_loss.last().unwrap_or(&f64::NAN)
    }

    /// Moving average used by the monotonicity check.
    pub fn smoothed(&self, window: usize) -> Vec<f64> {
        let n = self.per_epoch_loss.len();
        (0..n)
            .map(|i| {
                let lo = i.saturating_sub(window - 1);
                let s: f64 = self.per_epoch_loss[lo..=i].iter().sum();
                s / (i - lo + 1) as f64
            })
            .collect()
    }
}

fn draw_triplet(corpus: &RepCorpus, rng: &mut rand_chacha::ChaCha8Rng, self_frac: f64) -> TripletTensors {
    let n = corpus.len();
    let nt = corpus.n_frames();
    let i = rng.gen_range(0..n);
    let ci = rng.gen_range(0..nt);
    let (j, cj) = if rng.gen_range(0.0..1.0) < self_frac {
        (i, ci)
    } else {
        (rng.gen_range(0..n), rng.gen_range(0..nt))
    };
    TripletTensors {
        geom_source: complex_to_channels(&corpus.frame(i, ci)),
        contrast_source: complex_to_channels(&corpus.frame(j, cj)),
        target: complex_to_channels(&corpus.frame(i, cj)),
    }
}

/// Compute per-channel latent statistics over the corpus and freeze them
/// into the model as its standardization.
pub fn calibrate_latent_stats(model: &mut RepModel, corpus: &RepCorpus) -> Result<()> {
    let c_n = model.arch.latent_ch;
    let hw = model.arch.latent_hw * model.arch.latent_hw;
    let mut sum = vec![0.0f64; c_n];
    let mut sum2 = vec![0.0f64; c_n];
    let mut count = 0usize;
    for i in 0..corpus.len() {
        for t in 0..corpus.n_frames() {
            let x = complex_to_channels(&corpus.frame(i, t));
            let (raw, _) = geom_forward(&model.params, &x)?;
            for c in 0..c_n {
                for k in c * hw..(c + 1) * hw {
                    let v = raw.data()[k];
                    sum[c] += v;
                    sum2[c] += v * v;
                }
            }
            count += hw;
        }
    }
    let mut mean = Tensor::zeros(&[c_n], Dtype::Real);
    let mut std = Tensor::zeros(&[c_n], Dtype::Real);
    for c in 0..c_n {
        let mu = sum[c] / count as f64;
        let var = (sum2[c] / count as f64 - mu * mu).max(1e-12);
        mean.data_mut()[c] = mu;
        std.data_mut()[c] = var.sqrt();
    }
    model.latent_mean = mean;
    model.latent_std = std;
    Ok(())
}

/// Train the disentangled autoencoder; deterministic in `cfg.seed`.
/// After the optimization epochs the geometry-latent standardization is
/// calibrated on the training corpus.
pub fn train_autoencoder(
    corpus: &RepCorpus,
    arch: &RepArchitecture,
    cfg: &TrainConfig,
) -> Result<(RepModel, TrainReport)> {
    if corpus.is_empty() {
        return Err(RepError::Corpus("cannot train on an empty corpus".into()));
    }
    if cfg.batch == 0 || cfg.batch > corpus.len() * corpus.n_frames() {
        return Err(RepError::Corpus(format!(
            "batch {} incompatible with corpus of {} stacks",
            cfg.batch,
            corpus.len()
        )));
    }
    let mut model = RepModel::init(arch, cfg.seed);
    let mut rng = rng_from(cfg.seed ^ 0x5eed_cafe);
    let adam = AdamConfig {
        lr: cfg.lr,
        ..Default::default()
    };
    let steps_per_epoch = (corpus.len() / cfg.batch).max(1);
    let mut per_epoch_loss = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut epoch_loss = 0.0;
        for step in 0..steps_per_epoch {
            let batch: Vec<TripletTensors> = (0..cfg.batch)
                .map(|_| draw_triplet(corpus, &mut rng, cfg.self_pair_fraction))
                .collect();
            let (loss, grads) = transfer_loss_batch(&model, &batch, cfg.lambda_z)?;
            if !loss.is_finite() {
                return Err(RepError::Diverged { epoch, step });
            }
            model.params.adam_step(&grads, &adam)?;
            epoch_loss += loss;
        }
        per_epoch_loss.push(epoch_loss / steps_per_epoch as f64);
    }
    if cfg.epochs > 0 {
        calibrate_latent_stats(&mut model, corpus)?;
    }
    Ok((model, TrainReport { per_epoch_loss }))
}
