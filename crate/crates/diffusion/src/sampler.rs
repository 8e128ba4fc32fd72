//! Reverse-diffusion machinery: Tweedie estimates, DDIM updates, the
//! resample variance and the stochastic resample draw.

use mdr_autodiff::{derive_seed, normal_tensor, rng_from, Tensor};

use crate::predictor::{predict, NoisePredictor};
use crate::schedule::DiffusionSchedule;
use crate::{DiffusionError, Result};

/// Clean-latent estimate: (z_t - sqrt(1 - a_bar) eps_hat) / sqrt(a_bar).
pub fn tweedie_estimate(z_t: &Tensor, eps_hat: &Tensor, a_bar: f64) -> Result<Tensor> {
    if a_bar <= 0.0 || a_bar > 1.0 {
        return Err(DiffusionError::AlphaBar(a_bar));
    }
    let mut out = z_t.clone();
    out.axpy_in_place(-(1.0 - a_bar).sqrt(), eps_hat);
    out.scale_in_place(1.0 / a_bar.sqrt());
    Ok(out)
}

/// DDIM sigma for the step from t+1 to t:
/// delta = sqrt((1-a_t)/(1-a_{t+1})) sqrt(1 - a_{t+1}/a_t).
pub fn ddim_delta(schedule: &DiffusionSchedule, t_d: usize) -> Result<f64> {
    let a_t = schedule.a_bar(t_d)?;
    let a_next = schedule.a_bar(t_d + 1)?;
    Ok(((1.0 - a_t) / (1.0 - a_next)).sqrt() * (1.0 - a_next / a_t).sqrt())
}

/// One reverse DDIM update from step t_d+1 to t_d:
/// z' = sqrt(a_t) z0_bar + sqrt(1 - a_t - eta delta^2) eps_hat + eta delta eps.
pub fn ddim_step(
    z_next: &Tensor,
    eps_hat: &Tensor,
    schedule: &DiffusionSchedule,
    t_d: usize,
    noise_seed: u64,
) -> Result<Tensor> {
    if t_d >= schedule.t_max() {
        return Err(DiffusionError::StepIndex {
            t: t_d,
            t_max: schedule.t_max(),
        });
    }
    let a_t = schedule.a_bar(t_d)?;
    let a_next = schedule.a_bar(t_d + 1)?;
    let delta = ddim_delta(schedule, t_d)?;
    let z0 = tweedie_estimate(z_next, eps_hat, a_next)?;
    let radicand = 1.0 - a_t - schedule.eta * delta * delta;
    if radicand < -1e-12 {
        return Err(DiffusionError::NegativeRadicand(radicand));
    }
    let mut out = z0.scaled(a_t.sqrt());
    out.axpy_in_place(radicand.max(0.0).sqrt(), eps_hat);
    if schedule.eta > 0.0 && delta > 0.0 {
        let mut rng = rng_from(noise_seed);
        let eps = normal_tensor(z_next.shape(), z_next.dtype(), &mut rng);
        out.axpy_in_place(schedule.eta * delta, &eps);
    }
    Ok(out)
}

/// Resample variance sigma_t^2 = gamma ((1-a_{t-1})/a_t)(1 - a_t/a_{t-1}).
pub fn sigma_t_squared(schedule: &DiffusionSchedule, t_d: usize) -> Result<f64> {
    if t_d == 0 || t_d > schedule.t_max() {
        return Err(DiffusionError::StepIndex {
            t: t_d,
            t_max: schedule.t_max(),
        });
    }
    let a_t = schedule.a_bar(t_d)?;
    let a_prev = schedule.a_bar(t_d - 1)?;
    Ok(schedule.gamma_resample * ((1.0 - a_prev) / a_t) * (1.0 - a_t / a_prev))
}

/// Map a data-consistent latent back onto the diffusion trajectory:
/// a Gaussian draw blending the update `z_hat` with the DDIM latent `z_ddim`.
pub fn stochastic_resample(
    z_hat: &Tensor,
    z_ddim: &Tensor,
    schedule: &DiffusionSchedule,
    t_d: usize,
    seed: u64,
) -> Result<Tensor> {
    let a_t = schedule.a_bar(t_d)?;
    let sigma2 = sigma_t_squared(schedule, t_d)?;
    let denom = sigma2 + 1.0 - a_t;
    let mut mean = z_hat.scaled(sigma2 * a_t.sqrt() / denom);
    mean.axpy_in_place((1.0 - a_t) / denom, z_ddim);
    let var = sigma2 * (1.0 - a_t) / denom;
    if var > 0.0 {
        let mut rng = rng_from(seed);
        let eps = normal_tensor(z_hat.shape(), z_hat.dtype(), &mut rng);
        mean.axpy_in_place(var.sqrt(), &eps);
    }
    Ok(mean)
}

/// Full unconditional reverse DDIM from N(0, I). Deterministic per seed.
pub fn sample_prior(
    net: &NoisePredictor,
    schedule: &DiffusionSchedule,
    n: usize,
    seed: u64,
) -> Result<Vec<Tensor>> {
    let shape = [net.arch.in_ch, net.arch.hw, net.arch.hw];
    let mut out = Vec::with_capacity(n);
    for chain in 0..n {
        let mut rng = rng_from(derive_seed(seed, 0, chain as u64));
        let mut z = normal_tensor(&shape, mdr_autodiff::Dtype::Real, &mut rng);
        for t_d in (0..schedule.t_max()).rev() {
            let eps_hat = predict(net, &z, t_d + 1)?;
            z = ddim_step(
                &z,
                &eps_hat,
                schedule,
                t_d,
                derive_seed(seed, t_d as u64 + 1, chain as u64),
            )?;
        }
        out.push(z);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{make_schedule, Spacing};
    use mdr_autodiff::{rng_from, Dtype};

    fn schedule(eta: f64, gamma: f64) -> DiffusionSchedule {
        make_schedule(50, 1e-3, 0.08, Spacing::Linear, eta, gamma).unwrap()
    }

    #[test]
    fn tweedie_identity_at_unit_alpha() {
        let z = normal_tensor(&[2, 3, 3], Dtype::Real, &mut rng_from(1));
        let e = normal_tensor(&[2, 3, 3], Dtype::Real, &mut rng_from(2));
        assert_eq!(tweedie_estimate(&z, &e, 1.0).unwrap(), z);
    }

    #[test]
    fn tweedie_scalar_case() {
        // a=0.25, z=1, eps=0.5: (1 - sqrt(0.75)*0.5)/0.5 = 1.1339746
        let z = Tensor::scalar(1.0);
        let e = Tensor::scalar(0.5);
        let out = tweedie_estimate(&z, &e, 0.25).unwrap();
        assert!((out.data()[0] - 1.1339746).abs() < 1e-7);
    }

    #[test]
    fn tweedie_inverts_forward_noising_exactly() {
        let a = normal_tensor(&[4, 4], Dtype::Real, &mut rng_from(3));
        let eps = normal_tensor(&[4, 4], Dtype::Real, &mut rng_from(4));
        for &a_bar in &[0.9f64, 0.5, 0.03] {
            let mut z = a.scaled(a_bar.sqrt());
            z.axpy_in_place((1.0 - a_bar).sqrt(), &eps);
            let rec = tweedie_estimate(&z, &eps, a_bar).unwrap();
            assert!(rec.sub(&a).norm() / a.norm() < 1e-12);
        }
    }

    #[test]
    fn nonpositive_alpha_rejected() {
        let z = Tensor::scalar(1.0);
        assert!(tweedie_estimate(&z, &z, 0.0).is_err());
    }

    #[test]
    fn deterministic_ddim_at_eta_zero() {
        let s = schedule(0.0, 35.0);
        let z = normal_tensor(&[2, 4, 4], Dtype::Real, &mut rng_from(5));
        let e = normal_tensor(&[2, 4, 4], Dtype::Real, &mut rng_from(6));
        let a = ddim_step(&z, &e, &s, 10, 1).unwrap();
        let b = ddim_step(&z, &e, &s, 10, 999).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identity_step_for_flat_schedule() {
        // a_t = a_{t+1} = 1 and eps_hat = 0 leaves z unchanged
        let s = DiffusionSchedule {
            alpha_bar: vec![1.0, 1.0, 1.0],
            eta: 0.7,
            gamma_resample: 35.0,
        };
        let z = normal_tensor(&[1, 2, 2], Dtype::Real, &mut rng_from(7));
        let e = Tensor::zeros(&[1, 2, 2], Dtype::Real);
        let out = ddim_step(&z, &e, &s, 0, 3).unwrap();
        assert!(out.sub(&z).norm() < 1e-12);
    }

    #[test]
    fn ddim_noise_variance_matches_eta_delta() {
        let s = schedule(0.8, 35.0);
        let t_d = 20;
        let z = normal_tensor(&[1, 2, 2], Dtype::Real, &mut rng_from(8));
        let e = normal_tensor(&[1, 2, 2], Dtype::Real, &mut rng_from(9));
        let delta = ddim_delta(&s, t_d).unwrap();
        let expect_var = (s.eta * delta).powi(2);
        // empirical variance over 10^4 seeds at fixed inputs
        let n = 10_000;
        let mut mean = Tensor::zeros(&[1, 2, 2], Dtype::Real);
        let mut m2 = Tensor::zeros(&[1, 2, 2], Dtype::Real);
        for seed in 0..n {
            let out = ddim_step(&z, &e, &s, t_d, seed).unwrap();
            mean.add_in_place(&out);
            for (a, b) in m2.data_mut().iter_mut().zip(out.data()) {
                *a += b * b;
            }
        }
        let inv = 1.0 / n as f64;
        for i in 0..4 {
            let mu = mean.data()[i] * inv;
            let var = m2.data()[i] * inv - mu * mu;
            assert!(
                (var / expect_var - 1.0).abs() < 0.05,
                "slot {i}: var {var} vs {expect_var}"
            );
        }
    }

    #[test]
    fn sigma_t_squared_scalar_case() {
        // gamma=35, a_t=0.9, a_prev=0.95: 35*(0.05/0.9)*(1-0.9/0.95)
        let s = DiffusionSchedule {
            alpha_bar: vec![1.0, 0.95, 0.9],
            eta: 0.0,
            gamma_resample: 35.0,
        };
        let v = sigma_t_squared(&s, 2).unwrap();
        assert!((v - 0.1023392).abs() < 1e-6, "sigma^2 = {v}");
        // equal alphas give zero
        let s0 = DiffusionSchedule {
            alpha_bar: vec![1.0, 0.9, 0.9],
            eta: 0.0,
            gamma_resample: 35.0,
        };
        assert!(sigma_t_squared(&s0, 2).unwrap().abs() < 1e-15);
        // linear scaling in gamma
        let s2 = DiffusionSchedule {
            alpha_bar: vec![1.0, 0.95, 0.9],
            eta: 0.0,
            gamma_resample: 70.0,
        };
        assert!((sigma_t_squared(&s2, 2).unwrap() - 2.0 * v).abs() < 1e-12);
    }

    #[test]
    fn resample_reduces_to_ddim_when_gamma_vanishes() {
        let s = schedule(0.8, 0.0);
        let zh = normal_tensor(&[1, 3, 3], Dtype::Real, &mut rng_from(10));
        let zd = normal_tensor(&[1, 3, 3], Dtype::Real, &mut rng_from(11));
        let out = stochastic_resample(&zh, &zd, &s, 20, 5).unwrap();
        assert!(out.sub(&zd).norm() < 1e-12, "gamma->0 must return z'");
    }

    #[test]
    fn resample_moments_match_closed_form() {
        // a_t = 0.5, sigma^2 = 1: mean = (sqrt(0.5) zh + 0.5 zd)/1.5,
        // var = 1/3; checked over 10^5 draws at three schedule points
        let cases = [(0.5f64, 1.0f64), (0.9, 0.25), (0.2, 4.0)];
        for (case_idx, &(a_t, sigma2)) in cases.iter().enumerate() {
            // build a schedule whose t=1 realizes (a_t, sigma2):
            // sigma2 = gamma ((1-a_0)/a_1)(1-a_1/a_0) with a_0 = 1 gives 0,
            // so pick t=2 with a_1 chosen freely
            let a_prev = (a_t + 1.0) / 2.0;
            let gamma = sigma2 / (((1.0 - a_prev) / a_t) * (1.0 - a_t / a_prev));
            let s = DiffusionSchedule {
                alpha_bar: vec![1.0, a_prev, a_t],
                eta: 0.0,
                gamma_resample: gamma,
            };
            let zh = Tensor::scalar(1.0);
            let zd = Tensor::scalar(0.0);
            let denom = sigma2 + 1.0 - a_t;
            let expect_mean = sigma2 * a_t.sqrt() / denom;
            let expect_var = sigma2 * (1.0 - a_t) / denom;
            let n = 100_000u64;
            let mut acc = 0.0;
            let mut acc2 = 0.0;
            for seed in 0..n {
                let v = stochastic_resample(&zh, &zd, &s, 2, seed).unwrap().data()[0];
                acc += v;
                acc2 += v * v;
            }
            let mean = acc / n as f64;
            let var = acc2 / n as f64 - mean * mean;
            assert!(
                (mean / expect_mean - 1.0).abs() < 0.02,
                "case {case_idx}: mean {mean} vs {expect_mean}"
            );
            assert!(
                (var / expect_var - 1.0).abs() < 0.02,
                "case {case_idx}: var {var} vs {expect_var}"
            );
        }
    }

    #[test]
    fn resample_scalar_case_from_formula() {
        let a_t = 0.5f64;
        let sigma2 = 1.0f64;
        let denom = sigma2 + 1.0 - a_t;
        let mean = sigma2 * a_t.sqrt() * 1.0 / denom;
        assert!((mean - 0.471405).abs() < 1e-6);
        assert!((sigma2 * (1.0 - a_t) / denom - 1.0 / 3.0).abs() < 1e-12);
    }
}
