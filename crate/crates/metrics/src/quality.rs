//! Relative l2 error and SSIM.

use mdr_autodiff::{Dtype, Tensor};

use crate::{MetricsError, Result};

/// Magnitude of a complex stack as a real tensor of the same shape.
pub fn magnitude_stack(x: &Tensor) -> Tensor {
    match x.dtype() {
        Dtype::Complex => x.c_abs(),
        Dtype::Real => x.clone(),
    }
}

/// ||(x - ref) . mask||_2 / ||ref . mask||_2. The mask indexes logical
/// elements (a complex pair counts once).
pub fn rel_l2_error(x: &Tensor, reference: &Tensor, mask: Option<&[bool]>) -> Result<f64> {
    if !x.same_layout(reference) {
        return Err(MetricsError::ShapeMismatch(format!(
            "{:?} vs {:?}",
            x.shape(),
            reference.shape()
        )));
    }
    if let Some(m) = mask {
        if m.len() != x.numel() {
            return Err(MetricsError::ShapeMismatch(format!(
                "mask has {} entries for {} elements",
                m.len(),
                x.numel()
            )));
        }
    }
    let width = x.dtype().width();
    let mut err2 = 0.0;
    let mut ref2 = 0.0;
    for i in 0..x.numel() {
        if let Some(m) = mask {
            if !m[i] {
                continue;
            }
        }
        for s in 0..width {
            let a = x.data()[i * width + s];
            let b = reference.data()[i * width + s];
            err2 += (a - b) * (a - b);
            ref2 += b * b;
        }
    }
    if ref2 == 0.0 {
        return Err(MetricsError::ZeroReference);
    }
    Ok((err2 / ref2).sqrt())
}

#[derive(Debug, Clone)]
pub struct SsimOptions {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl SsimOptions {
    pub fn with_dynamic_range(dynamic_range: f64) -> Self {
        SsimOptions {
            window: 7,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range,
        }
    }
}

/// Mean SSIM over all window positions fully inside the image (and, when a
/// mask is given, centered on masked voxels). Inputs are real magnitude
/// maps.
pub fn ssim(
    x: &Tensor,
    reference: &Tensor,
    opts: &SsimOptions,
    mask: Option<&[bool]>,
) -> Result<f64> {
    if !x.same_layout(reference) || x.dtype() != Dtype::Real || x.shape().len() != 2 {
        return Err(MetricsError::ShapeMismatch(
            "ssim expects two real [h,w] maps of equal shape".into(),
        ));
    }
    let (h, w) = (x.shape()[0], x.shape()[1]);
    let win = opts.window;
    if win > h || win > w {
        return Err(MetricsError::WindowTooLarge {
            win,
            extent: h.min(w),
        });
    }
    // normalized Gaussian window
    let half = (win - 1) as f64 / 2.0;
    let mut weights = vec![0.0f64; win * win];
    let mut sum = 0.0;
    for r in 0..win {
        for c in 0..win {
            let dy = r as f64 - half;
            let dx = c as f64 - half;
            let v = (-(dx * dx + dy * dy) / (2.0 * opts.sigma * opts.sigma)).exp();
            weights[r * win + c] = v;
            sum += v;
        }
    }
    weights.iter_mut().for_each(|v| *v /= sum);

    let c1 = (opts.k1 * opts.dynamic_range).powi(2);
    let c2 = (opts.k2 * opts.dynamic_range).powi(2);
    let xd = x.data();
    let rd = reference.data();
    let mut acc = 0.0;
    let mut count = 0usize;
    for y0 in 0..=h - win {
        for x0 in 0..=w - win {
            if let Some(m) = mask {
                let cy = y0 + win / 2;
                let cx = x0 + win / 2;
                if !m[cy * w + cx] {
                    continue;
                }
            }
            let (mut mx, mut my) = (0.0, 0.0);
            for r in 0..win {
                for c in 0..win {
                    let wgt = weights[r * win + c];
                    mx += wgt * xd[(y0 + r) * w + x0 + c];
                    my += wgt * rd[(y0 + r) * w + x0 + c];
                }
            }
            let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
            for r in 0..win {
                for c in 0..win {
                    let wgt = weights[r * win + c];
                    let a = xd[(y0 + r) * w + x0 + c] - mx;
                    let b = rd[(y0 + r) * w + x0 + c] - my;
                    vx += wgt * a * a;
                    vy += wgt * b * b;
                    cov += wgt * a * b;
                }
            }
            let s = ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2));
            acc += s;
            count += 1;
        }
    }
    if count == 0 {
        return Err(MetricsError::ZeroReference);
    }
    Ok(acc / count as f64)
}
