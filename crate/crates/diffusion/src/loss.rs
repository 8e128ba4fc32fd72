//! Epsilon-prediction training objective.

use rand::Rng;
use rayon::prelude::*;

use mdr_autodiff::{derive_seed, normal_tensor, rng_from, GradStore, Tensor};

use crate::predictor::{predict_backward, predict_forward, NoisePredictor};
use crate::schedule::DiffusionSchedule;
use crate::Result;

/// Deterministic (t, eps) draws for a batch.
fn draw_noise(
    schedule: &DiffusionSchedule,
    shape: &[usize],
    n: usize,
    seed: u64,
) -> Vec<(usize, Tensor)> {
    let t_max = schedule.t_max();
    (0..n)
        .map(|i| {
            let mut rng = rng_from(derive_seed(seed, i as u64, 0));
            let t = rng.gen_range(1..=t_max);
            let eps = normal_tensor(shape, mdr_autodiff::Dtype::Real, &mut rng);
            (t, eps)
        })
        .collect()
}

fn noisy_latent(z0: &Tensor, eps: &Tensor, a_bar: f64) -> Tensor {
    let mut z = z0.scaled(a_bar.sqrt());
    z.axpy_in_place((1.0 - a_bar).sqrt(), eps);
    z
}

/// Batch-averaged epsilon-prediction loss with parameter gradients:
/// mean over the batch of ||eps - net(sqrt(a)z0 + sqrt(1-a)eps, t)||^2.
/// Deterministic per seed; per-element work runs in parallel and reduces in
/// batch order.
pub fn ldm_loss(
    net: &NoisePredictor,
    latents: &[Tensor],
    schedule: &DiffusionSchedule,
    seed: u64,
) -> Result<(f64, GradStore)> {
    let draws = draw_noise(schedule, latents[0].shape(), latents.len(), seed);
    let results: Vec<Result<(f64, GradStore)>> = latents
        .par_iter()
        .zip(draws.par_iter())
        .map(|(z0, (t, eps))| {
            let a_bar = schedule.a_bar(*t)?;
            let zt = noisy_latent(z0, eps, a_bar);
            let (eps_hat, cache) = predict_forward(net, &zt, *t)?;
            let resid = eps_hat.sub(eps);
            let loss = resid.norm_sq();
            let mut grads = GradStore::new();
            predict_backward(net, &cache, &resid.scaled(2.0), &mut grads);
            Ok((loss, grads))
        })
        .collect();
    let mut total = 0.0;
    let mut grads = GradStore::new();
    for r in results {
        let (l, g) = r?;
        total += l;
        mdr_autodiff::grad_accumulate(&mut grads, &g);
    }
    let inv = 1.0 / latents.len() as f64;
    mdr_autodiff::grad_scale(&mut grads, inv);
    Ok((total * inv, grads))
}

/// Forward-only loss with an arbitrary predictor function, for oracle tests
/// and finite-difference probes: same draws as `ldm_loss` for a given seed.
pub fn ldm_loss_with_fn(
    latents: &[Tensor],
    schedule: &DiffusionSchedule,
    seed: u64,
    mut predictor: impl FnMut(&Tensor, usize) -> Tensor,
) -> f64 {
    let draws = draw_noise(schedule, latents[0].shape(), latents.len(), seed);
    let mut total = 0.0;
    for (z0, (t, eps)) in latents.iter().zip(&draws) {
        let a_bar = schedule.alpha_bar[*t];
        let zt = noisy_latent(z0, eps, a_bar);
        let eps_hat = predictor(&zt, *t);
        total += eps_hat.sub(eps).norm_sq();
    }
    total / latents.len() as f64
}
