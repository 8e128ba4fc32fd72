//! Reference reconstructions: zero-filled adjoint and joint-sparsity
//! regularized least squares.

use mdr_autodiff::{Dtype, Tensor};
use mdr_mri::{adjoint_op, apply_mask, forward_op, SamplingMask};

use crate::{ReconError, Result};

/// Zero-filled reconstruction: the plain adjoint of the measured data.
pub fn baseline_zero_filled(
    d: &Tensor,
    sens: &Tensor,
    mask: &SamplingMask,
) -> Result<Tensor> {
    Ok(adjoint_op(d, sens, mask)?)
}

#[derive(Debug, Clone)]
pub struct JointSparsityConfig {
    /// Regularization weight on the joint l2,1 gradient penalty.
    pub lambda: f64,
    pub iters: usize,
    /// Smoothing floor inside the voxelwise root, relative to the data
    /// scale estimated from the zero-filled image.
    pub eps_rel: f64,
}

impl Default for JointSparsityConfig {
    fn default() -> Self {
        JointSparsityConfig {
            lambda: 5e-3,
            iters: 80,
            eps_rel: 1e-3,
        }
    }
}

/// Forward spatial differences of each frame; returns (gx, gy) with zero
/// last column/row.
fn spatial_gradients(x: &Tensor) -> (Tensor, Tensor) {
    let (nt, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let mut gx = Tensor::zeros(x.shape(), Dtype::Complex);
    let mut gy = Tensor::zeros(x.shape(), Dtype::Complex);
    for t in 0..nt {
        for y in 0..h {
            for xx in 0..w {
                let i = (t * h + y) * w + xx;
                let (re, im) = x.c_get(i);
                if xx + 1 < w {
                    let (re2, im2) = x.c_get(i + 1);
                    gx.c_set(i, re2 - re, im2 - im);
                }
                if y + 1 < h {
                    let (re2, im2) = x.c_get(i + w);
                    gy.c_set(i, re2 - re, im2 - im);
                }
            }
        }
    }
    (gx, gy)
}

/// Adjoint of `spatial_gradients` (negative divergence).
fn gradients_adjoint(gx: &Tensor, gy: &Tensor) -> Tensor {
    let (nt, h, w) = (gx.shape()[0], gx.shape()[1], gx.shape()[2]);
    let mut out = Tensor::zeros(gx.shape(), Dtype::Complex);
    for t in 0..nt {
        for y in 0..h {
            for xx in 0..w {
                let i = (t * h + y) * w + xx;
                let (mut re, mut im) = (0.0, 0.0);
                if xx + 1 < w {
                    let (r, m) = gx.c_get(i);
                    re -= r;
                    im -= m;
                }
                if xx > 0 {
                    let (r, m) = gx.c_get(i - 1);
                    re += r;
                    im += m;
                }
                if y + 1 < h {
                    let (r, m) = gy.c_get(i);
                    re -= r;
                    im -= m;
                }
                if y > 0 {
                    let (r, m) = gy.c_get(i - w);
                    re += r;
                    im += m;
                }
                out.c_set(i, re, im);
            }
        }
    }
    out
}

/// Smoothed joint l2,1 penalty: sum over voxels of
/// sqrt(sum over frames and directions |grad|^2 + eps^2), minus the eps
/// offset so an all-constant image scores zero.
fn tv_value_and_grad(x: &Tensor, eps: f64) -> (f64, Tensor) {
    let (nt, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (gx, gy) = spatial_gradients(x);
    let mut value = 0.0;
    let mut wgx = gx.clone();
    let mut wgy = gy.clone();
    for v in 0..h * w {
        let mut s = eps * eps;
        for t in 0..nt {
            let i = t * h * w + v;
            let (r1, m1) = gx.c_get(i);
            let (r2, m2) = gy.c_get(i);
            s += r1 * r1 + m1 * m1 + r2 * r2 + m2 * m2;
        }
        let root = s.sqrt();
        value += root - eps;
        let inv = 1.0 / root;
        for t in 0..nt {
            let i = t * h * w + v;
            let (r1, m1) = wgx.c_get(i);
            wgx.c_set(i, r1 * inv, m1 * inv);
            let (r2, m2) = wgy.c_get(i);
            wgy.c_set(i, r2 * inv, m2 * inv);
        }
    }
    (value, gradients_adjoint(&wgx, &wgy))
}

/// Accelerated proximal-gradient-style scheme on the smoothed objective
/// ||A x - d||^2 + lambda * TV_eps(x), with backtracking and a monotone
/// restart so the objective never increases across iterations.
pub fn baseline_joint_sparsity(
    d: &Tensor,
    sens: &Tensor,
    mask: &SamplingMask,
    cfg: &JointSparsityConfig,
) -> Result<Tensor> {
    if cfg.lambda < 0.0 {
        return Err(ReconError::Config("lambda must be nonnegative".into()));
    }
    let meas = apply_mask(d, mask);
    let x0 = adjoint_op(&meas, sens, mask)?;
    let scale = x0.c_abs().data().iter().cloned().fold(0.0, f64::max);
    let eps = (cfg.eps_rel * scale).max(1e-12);

    let objective_grad = |x: &Tensor| -> Result<(f64, Tensor)> {
        let resid = forward_op(x, sens, mask)?.sub(&meas);
        let data = resid.norm_sq();
        let mut grad = adjoint_op(&resid, sens, mask)?.scaled(2.0);
        let (tv, tv_grad) = tv_value_and_grad(x, eps);
        grad.axpy_in_place(cfg.lambda, &tv_grad);
        Ok((data + cfg.lambda * tv, grad))
    };
    let objective = |x: &Tensor| -> Result<f64> {
        let resid = forward_op(x, sens, mask)?.sub(&meas);
        Ok(resid.norm_sq() + cfg.lambda * tv_value_and_grad(x, eps).0)
    };

    let mut x = x0.clone();
    let mut y = x.clone();
    let mut fx = objective(&x)?;
    let mut theta: f64 = 1.0;
    let mut lip: f64 = 1.0;
    for _ in 0..cfg.iters {
        let (fy, gy) = objective_grad(&y)?;
        // backtracking on the majorizer at y
        let g2 = gy.norm_sq();
        let mut candidate;
        let mut fc;
        let mut tries = 0;
        loop {
            candidate = y.clone();
            candidate.axpy_in_place(-1.0 / lip, &gy);
            fc = objective(&candidate)?;
            if fc <= fy - 0.5 * g2 / lip || g2 == 0.0 {
                break;
            }
            lip *= 2.0;
            tries += 1;
            if tries > 60 {
                return Err(ReconError::LineSearch(tries));
            }
        }
        lip = (lip * 0.5).max(1e-12); // gentle expansion for the next step
        if fc <= fx {
            // accelerated step accepted
            let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            let mut y_next = candidate.clone();
            let mom = (theta - 1.0) / theta_next;
            let mut diff = candidate.clone();
            diff.axpy_in_place(-1.0, &x);
            y_next.axpy_in_place(mom, &diff);
            x = candidate;
            fx = fc;
            y = y_next;
            theta = theta_next;
        } else {
            // monotone restart: fall back to a plain step from x
            let (fx2, gx_) = objective_grad(&x)?;
            let mut plain = x.clone();
            plain.axpy_in_place(-1.0 / lip, &gx_);
            let fp = objective(&plain)?;
            if fp <= fx2 {
                x = plain;
                fx = fp;
            }
            y = x.clone();
            theta = 1.0;
        }
    }
    Ok(x)
}
