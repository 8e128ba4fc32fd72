//! Evaluation helpers for disentanglement properties.

use mdr_autodiff::Tensor;

use crate::arch::{ContrastLatent, RepModel};
use crate::nets::{decode, encode_contrast, encode_geometry};
use crate::Result;

/// Binary support of a complex image: |x| above `frac` of the peak.
pub fn support_mask(x: &Tensor, frac: f64) -> Vec<bool> {
    let mags: Vec<f64> = (0..x.numel())
        .map(|i| {
            let (re, im) = x.c_get(i);
            re.hypot(im)
        })
        .collect();
    let peak = mags.iter().cloned().fold(0.0, f64::max);
    mags.iter().map(|&m| m > frac * peak).collect()
}

/// Intersection-over-union of two boolean masks.
pub fn iou(a: &[bool], b: &[bool]) -> f64 {
    let inter = a.iter().zip(b).filter(|(&x, &y)| x && y).count();
    let union = a.iter().zip(b).filter(|(&x, &y)| x || y).count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Cosine similarity of two tensors viewed as flat real vectors.
pub fn cosine(a: &Tensor, b: &Tensor) -> f64 {
    a.dot_real(b) / (a.norm() * b.norm()).max(1e-300)
}

/// Decode a linear interpolation between two contrast latents at fixed
/// geometry; `alpha` = 0 gives `zc_a`.
pub fn interp_contrast(
    model: &RepModel,
    z_g: &Tensor,
    zc_a: &ContrastLatent,
    zc_b: &ContrastLatent,
    alpha: f64,
) -> Result<Tensor> {
    let z = zc_a.scaled(1.0 - alpha).add(&zc_b.scaled(alpha));
    decode(z_g, &z, model)
}

/// Relative self-reconstruction error of one complex frame.
pub fn self_recon_error(model: &RepModel, x: &Tensor) -> Result<f64> {
    let zg = encode_geometry(x, model)?;
    let zc = encode_contrast(x, model)?;
    let xhat = decode(&zg, &zc, model)?;
    Ok(xhat.sub(x).norm() / x.norm().max(1e-300))
}

/// Relative transfer error: decode geometry of `x_geom` with contrast of
/// `x_contrast` against the cross-composed `target`.
pub fn transfer_error(
    model: &RepModel,
    x_geom: &Tensor,
    x_contrast: &Tensor,
    target: &Tensor,
) -> Result<f64> {
    let zg = encode_geometry(x_geom, model)?;
    let zc = encode_contrast(x_contrast, model)?;
    let xhat = decode(&zg, &zc, model)?;
    Ok(xhat.sub(target).norm() / target.norm().max(1e-300))
}
