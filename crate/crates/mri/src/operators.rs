//! Encoding operator A and its adjoint.
//!
//! A x = M (fftshift . F . (S .)) x per frame and coil, with the unitary FFT
//! from the autodiff substrate. The adjoint reverses the chain with
//! conjugated maps; fftshift is its own inverse for even (power-of-two)
//! extents.

use mdr_autodiff::{fft2_unitary, Dtype, FftDirection, Tensor};

use crate::mask::SamplingMask;
use crate::{MriError, Result};

/// Swap half-spaces along the two trailing axes. Self-inverse for even
/// extents, which the power-of-two FFT restriction guarantees.
pub fn fftshift2(x: &Tensor) -> Tensor {
    let nd = x.shape().len();
    let h = x.shape()[nd - 2];
    let w = x.shape()[nd - 1];
    let n_slices: usize = x.shape()[..nd - 2].iter().product();
    let (hh, hw) = (h / 2, w / 2);
    let mut out = Tensor::zeros(x.shape(), x.dtype());
    let width = x.dtype().width();
    let xd = x.data();
    let od = out.data_mut();
    for s in 0..n_slices {
        let base = s * h * w;
        for y in 0..h {
            let sy = (y + hh) % h;
            for xx in 0..w {
                let sx = (xx + hw) % w;
                let src = (base + y * w + xx) * width;
                let dst = (base + sy * w + sx) * width;
                od[dst..dst + width].copy_from_slice(&xd[src..src + width]);
            }
        }
    }
    out
}

/// Zero out unsampled ky columns of a [nt, nc, h, w] k-space tensor.
pub fn apply_mask(k: &Tensor, mask: &SamplingMask) -> Tensor {
    let (nt, nc, h, w) = dims4(k);
    let mut out = k.clone();
    let od = out.data_mut();
    for t in 0..nt {
        for ky in 0..w {
            if mask.is_sampled(t, ky) {
                continue;
            }
            for c in 0..nc {
                for y in 0..h {
                    let i = (((t * nc + c) * h + y) * w + ky) * 2;
                    od[i] = 0.0;
                    od[i + 1] = 0.0;
                }
            }
        }
    }
    out
}

fn dims4(k: &Tensor) -> (usize, usize, usize, usize) {
    let s = k.shape();
    (s[0], s[1], s[2], s[3])
}

fn check_shapes(x: &Tensor, sens: &Tensor, mask: &SamplingMask) -> Result<(usize, usize, usize, usize)> {
    if x.shape().len() != 3 || x.dtype() != Dtype::Complex {
        return Err(MriError::ShapeMismatch(format!(
            "image stack must be complex [nt,h,w], got {:?}",
            x.shape()
        )));
    }
    if sens.shape().len() != 3 || sens.dtype() != Dtype::Complex {
        return Err(MriError::ShapeMismatch(format!(
            "sensitivities must be complex [nc,h,w], got {:?}",
            sens.shape()
        )));
    }
    let (nt, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let nc = sens.shape()[0];
    if sens.shape()[1] != h || sens.shape()[2] != w {
        return Err(MriError::ShapeMismatch(format!(
            "sensitivity grid {:?} vs image grid {h}x{w}",
            &sens.shape()[1..]
        )));
    }
    if mask.nt != nt || mask.ny != w {
        return Err(MriError::ShapeMismatch(format!(
            "mask is {}x{} for a [{}x..x{}] stack",
            mask.nt, mask.ny, nt, w
        )));
    }
    Ok((nt, nc, h, w))
}

/// d_{t,i} = M_t . fftshift(F(S_i . X_t)); output [nt, nc, h, w].
pub fn forward_op(x: &Tensor, sens: &Tensor, mask: &SamplingMask) -> Result<Tensor> {
    let (nt, nc, h, w) = check_shapes(x, sens, mask)?;
    let mut out = Tensor::zeros(&[nt, nc, h, w], Dtype::Complex);
    for t in 0..nt {
        let frame = Tensor::from_vec(
            &[h, w],
            Dtype::Complex,
            x.data()[2 * t * h * w..2 * (t + 1) * h * w].to_vec(),
        )?;
        for c in 0..nc {
            let smap = Tensor::from_vec(
                &[h, w],
                Dtype::Complex,
                sens.data()[2 * c * h * w..2 * (c + 1) * h * w].to_vec(),
            )?;
            let weighted = frame.c_mul(&smap);
            let k = fftshift2(&fft2_unitary(&weighted, FftDirection::Forward)?);
            let kd = k.data();
            let od = out.data_mut();
            for y in 0..h {
                for ky in 0..w {
                    if mask.is_sampled(t, ky) {
                        let src = (y * w + ky) * 2;
                        let dst = ((((t * nc + c) * h) + y) * w + ky) * 2;
                        od[dst] = kd[src];
                        od[dst + 1] = kd[src + 1];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// X_t = sum_i conj(S_i) . Finv(ifftshift(M_t . d_{t,i})); output [nt, h, w].
pub fn adjoint_op(d: &Tensor, sens: &Tensor, mask: &SamplingMask) -> Result<Tensor> {
    if d.shape().len() != 4 || d.dtype() != Dtype::Complex {
        return Err(MriError::ShapeMismatch(format!(
            "k-space must be complex [nt,nc,h,w], got {:?}",
            d.shape()
        )));
    }
    let (nt, nc, h, w) = dims4(d);
    if sens.shape() != [nc, h, w] {
        return Err(MriError::ShapeMismatch(format!(
            "sensitivities {:?} vs k-space [{nc},{h},{w}]",
            sens.shape()
        )));
    }
    if mask.nt != nt || mask.ny != w {
        return Err(MriError::ShapeMismatch("mask/k-space mismatch".into()));
    }
    let mut out = Tensor::zeros(&[nt, h, w], Dtype::Complex);
    for t in 0..nt {
        for c in 0..nc {
            let mut k = Tensor::zeros(&[h, w], Dtype::Complex);
            {
                let dd = d.data();
                let kd = k.data_mut();
                for y in 0..h {
                    for ky in 0..w {
                        if mask.is_sampled(t, ky) {
                            let src = ((((t * nc + c) * h) + y) * w + ky) * 2;
                            let dst = (y * w + ky) * 2;
                            kd[dst] = dd[src];
                            kd[dst + 1] = dd[src + 1];
                        }
                    }
                }
            }
            let img = fft2_unitary(&fftshift2(&k), FftDirection::Inverse)?;
            let smap = Tensor::from_vec(
                &[h, w],
                Dtype::Complex,
                sens.data()[2 * c * h * w..2 * (c + 1) * h * w].to_vec(),
            )?;
            let contrib = img.c_mul_conj(&smap);
            let od = out.data_mut();
            let cd = contrib.data();
            for i in 0..2 * h * w {
                od[2 * t * h * w + i] += cd[i];
            }
        }
    }
    Ok(out)
}
