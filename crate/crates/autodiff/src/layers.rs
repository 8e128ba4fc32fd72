//! The fixed layer catalog.
//!
//! Every kind has a hand-derived backward rule; `grad_check` validates each
//! one against central finite differences. Feature maps are `[ch, h, w]`
//! real tensors, vectors are flat real tensors. Complex images enter
//! networks as two real channels.

use crate::error::{AdError, Result};
use crate::tensor::{idx3, Dtype, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nonlinearity {
    Silu,
    Relu,
}

/// One entry of the layer catalog, with its channel bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    /// Dense map on the flattened input: y = W x + b.
    Affine { in_dim: usize, out_dim: usize },
    /// 3x3 convolution, stride 1, zero "same" padding.
    Conv2d { in_ch: usize, out_ch: usize },
    /// Nearest-neighbour x2 upsampling.
    Upsample2x,
    /// 2x2 mean pooling.
    Downsample2x,
    /// Pointwise nonlinearity.
    Activation(Nonlinearity),
    /// Feature-wise linear modulation; side input is a `[2C]` vector split
    /// into (gamma, beta), broadcast over the spatial dimensions.
    Film,
    /// Spatial mean per channel: `[C,H,W] -> [C]`.
    GlobalAvgPool,
    /// Channel concatenation with the side input.
    Concat,
    /// Time-embedding conditioning; side input `[2C]` split into (s, t):
    /// out = x * (1 + s) + t, broadcast spatially.
    ScaleShiftTime,
}

impl LayerSpec {
    /// Parameter tensors this layer owns, as (suffix, shape).
    pub fn param_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        match self {
            LayerSpec::Affine { in_dim, out_dim } => vec![
                ("w", vec![*out_dim, *in_dim]),
                ("b", vec![*out_dim]),
            ],
            LayerSpec::Conv2d { in_ch, out_ch } => vec![
                ("w", vec![*out_ch, *in_ch, 3, 3]),
                ("b", vec![*out_ch]),
            ],
            _ => vec![],
        }
    }

    pub fn needs_side(&self) -> bool {
        matches!(
            self,
            LayerSpec::Film | LayerSpec::Concat | LayerSpec::ScaleShiftTime
        )
    }

    pub fn fan_in(&self) -> Option<usize> {
        match self {
            LayerSpec::Affine { in_dim, .. } => Some(*in_dim),
            LayerSpec::Conv2d { in_ch, .. } => Some(in_ch * 9),
            _ => None,
        }
    }
}

fn expect_chw(x: &Tensor, what: &str) -> Result<(usize, usize, usize)> {
    if x.dtype() != Dtype::Real || x.shape().len() != 3 {
        return Err(AdError::InvalidArg(format!(
            "{what} expects a real [ch,h,w] tensor, got {:?} {:?}",
            x.dtype(),
            x.shape()
        )));
    }
    Ok((x.shape()[0], x.shape()[1], x.shape()[2]))
}

// ---- affine ---------------------------------------------------------------

pub fn affine_forward(w: &Tensor, b: &Tensor, x: &Tensor) -> Result<Tensor> {
    let (out_dim, in_dim) = (w.shape()[0], w.shape()[1]);
    if x.numel() != in_dim || x.dtype() != Dtype::Real {
        return Err(AdError::InvalidArg(format!(
            "affine expects real input of {} elements, got {:?}",
            in_dim,
            x.shape()
        )));
    }
    let xd = x.data();
    let wd = w.data();
    let mut out = Tensor::zeros(&[out_dim], Dtype::Real);
    let od = out.data_mut();
    for o in 0..out_dim {
        let row = &wd[o * in_dim..(o + 1) * in_dim];
        let mut acc = b.data()[o];
        for i in 0..in_dim {
            acc += row[i] * xd[i];
        }
        od[o] = acc;
    }
    Ok(out)
}

pub fn affine_backward(
    w: &Tensor,
    x: &Tensor,
    cot: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let (out_dim, in_dim) = (w.shape()[0], w.shape()[1]);
    let (xd, wd, cd) = (x.data(), w.data(), cot.data());
    let mut dx = Tensor::zeros(x.shape(), Dtype::Real);
    let mut dw = Tensor::zeros(w.shape(), Dtype::Real);
    let db = cot.clone();
    {
        let dxd = dx.data_mut();
        for o in 0..out_dim {
            let row = &wd[o * in_dim..(o + 1) * in_dim];
            let c = cd[o];
            for i in 0..in_dim {
                dxd[i] += row[i] * c;
            }
        }
    }
    {
        let dwd = dw.data_mut();
        for o in 0..out_dim {
            let c = cd[o];
            let row = &mut dwd[o * in_dim..(o + 1) * in_dim];
            for i in 0..in_dim {
                row[i] = c * xd[i];
            }
        }
    }
    (dx, dw, db)
}

// ---- conv2d 3x3, stride 1, same padding -----------------------------------

pub fn conv2d_forward(w: &Tensor, b: &Tensor, x: &Tensor) -> Result<Tensor> {
    let (ci_n, h, wd_) = expect_chw(x, "conv2d")?;
    let (co_n, ci_w) = (w.shape()[0], w.shape()[1]);
    if ci_w != ci_n {
        return Err(AdError::InvalidArg(format!(
            "conv2d weight expects {ci_w} input channels, input has {ci_n}"
        )));
    }
    let mut out = Tensor::zeros(&[co_n, h, wd_], Dtype::Real);
    let (xd, ww, bd) = (x.data(), w.data(), b.data());
    let od = out.data_mut();
    for co in 0..co_n {
        for y in 0..h {
            let orow = &mut od[(co * h + y) * wd_..(co * h + y + 1) * wd_];
            orow.fill(bd[co]);
            for ci in 0..ci_n {
                for ky in 0..3usize {
                    let yy = y + ky;
                    if yy < 1 || yy > h {
                        continue;
                    }
                    let xrow = &xd[(ci * h + yy - 1) * wd_..(ci * h + yy) * wd_];
                    let wk = &ww[((co * ci_n + ci) * 3 + ky) * 3..((co * ci_n + ci) * 3 + ky + 1) * 3];
                    let (w0, w1, w2) = (wk[0], wk[1], wk[2]);
                    if wd_ >= 2 {
                        orow[0] += w1 * xrow[0] + w2 * xrow[1];
                        for xi in 1..wd_ - 1 {
                            orow[xi] += w0 * xrow[xi - 1] + w1 * xrow[xi] + w2 * xrow[xi + 1];
                        }
                        orow[wd_ - 1] += w0 * xrow[wd_ - 2] + w1 * xrow[wd_ - 1];
                    } else {
                        orow[0] += w1 * xrow[0];
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn conv2d_backward(
    w: &Tensor,
    x: &Tensor,
    cot: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let (h, wd_) = (x.shape()[1], x.shape()[2]);
    let co_n = w.shape()[0];
    let cd = cot.data();

    // db[co] = sum over spatial cotangent
    let mut db = Tensor::zeros(&[co_n], Dtype::Real);
    {
        let dbd = db.data_mut();
        for co in 0..co_n {
            dbd[co] = cd[co * h * wd_..(co + 1) * h * wd_].iter().sum();
        }
    }

    let dx = conv2d_backward_data(w, x.shape(), cot);
    let dw = conv2d_weight_grad(w.shape(), x, cot);
    (dx, dw, db)
}

/// Input cotangent only, for frozen-weight layers.
pub fn conv2d_backward_data(w: &Tensor, input_shape: &[usize], cot: &Tensor) -> Tensor {
    let (ci_n, h, wd_) = (input_shape[0], input_shape[1], input_shape[2]);
    let co_n = w.shape()[0];
    let (ww, cd) = (w.data(), cot.data());
    let mut dx = Tensor::zeros(input_shape, Dtype::Real);
    let dxd = dx.data_mut();
    for ci in 0..ci_n {
        for y in 0..h {
            let drow = &mut dxd[(ci * h + y) * wd_..(ci * h + y + 1) * wd_];
            for co in 0..co_n {
                for ky in 0..3usize {
                    let yy = y + 1;
                    if yy < ky || yy - ky >= h {
                        continue;
                    }
                    let crow = &cd[(co * h + yy - ky) * wd_..(co * h + yy - ky + 1) * wd_];
                    let wk = &ww[((co * ci_n + ci) * 3 + ky) * 3..((co * ci_n + ci) * 3 + ky + 1) * 3];
                    let (w0, w1, w2) = (wk[0], wk[1], wk[2]);
                    if wd_ >= 2 {
                        drow[0] += w1 * crow[0] + w0 * crow[1];
                        for xi in 1..wd_ - 1 {
                            drow[xi] += w2 * crow[xi - 1] + w1 * crow[xi] + w0 * crow[xi + 1];
                        }
                        drow[wd_ - 1] += w2 * crow[wd_ - 2] + w1 * crow[wd_ - 1];
                    } else {
                        drow[0] += w1 * crow[0];
                    }
                }
            }
        }
    }
    dx
}

fn conv2d_weight_grad(w_shape: &[usize], x: &Tensor, cot: &Tensor) -> Tensor {
    let (ci_n, h, wd_) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let co_n = w_shape[0];
    let (xd, cd) = (x.data(), cot.data());
    let mut dw = Tensor::zeros(w_shape, Dtype::Real);
    {
        let dwd = dw.data_mut();
        for co in 0..co_n {
            for ci in 0..ci_n {
                for ky in 0..3usize {
                    for kx in 0..3usize {
                        let mut acc = 0.0;
                        for y in 0..h {
                            let yy = y + ky;
                            if yy < 1 || yy > h {
                                continue;
                            }
                            let crow = &cd[(co * h + y) * wd_..(co * h + y + 1) * wd_];
                            let xrow = &xd[(ci * h + yy - 1) * wd_..(ci * h + yy) * wd_];
                            // x index = xi + kx - 1 for cot index xi
                            let (lo, hi) = match kx {
                                0 => (1usize, wd_),
                                1 => (0, wd_),
                                _ => (0, wd_.saturating_sub(1)),
                            };
                            for xi in lo..hi {
                                acc += crow[xi] * xrow[xi + kx - 1];
                            }
                        }
                        dwd[((co * ci_n + ci) * 3 + ky) * 3 + kx] = acc;
                    }
                }
            }
        }
    }
    dw
}

// ---- resampling ------------------------------------------------------------

pub fn upsample2x_forward(x: &Tensor) -> Result<Tensor> {
    let (c_n, h, w) = expect_chw(x, "upsample2x")?;
    let mut out = Tensor::zeros(&[c_n, 2 * h, 2 * w], Dtype::Real);
    let xd = x.data();
    let od = out.data_mut();
    for c in 0..c_n {
        for y in 0..h {
            for x_ in 0..w {
                let v = xd[idx3(w, h, c, y, x_)];
                let base = idx3(2 * w, 2 * h, c, 2 * y, 2 * x_);
                od[base] = v;
                od[base + 1] = v;
                od[base + 2 * w] = v;
                od[base + 2 * w + 1] = v;
            }
        }
    }
    Ok(out)
}

pub fn upsample2x_backward(cot: &Tensor) -> Tensor {
    let (c_n, h2, w2) = (cot.shape()[0], cot.shape()[1], cot.shape()[2]);
    let (h, w) = (h2 / 2, w2 / 2);
    let mut dx = Tensor::zeros(&[c_n, h, w], Dtype::Real);
    let cd = cot.data();
    let dd = dx.data_mut();
    for c in 0..c_n {
        for y in 0..h {
            for x_ in 0..w {
                let base = idx3(w2, h2, c, 2 * y, 2 * x_);
                dd[idx3(w, h, c, y, x_)] =
                    cd[base] + cd[base + 1] + cd[base + w2] + cd[base + w2 + 1];
            }
        }
    }
    dx
}

pub fn downsample2x_forward(x: &Tensor) -> Result<Tensor> {
    let (c_n, h, w) = expect_chw(x, "downsample2x")?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(AdError::InvalidArg(format!(
            "downsample2x needs even spatial extents, got {h}x{w}"
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[c_n, oh, ow], Dtype::Real);
    let xd = x.data();
    let od = out.data_mut();
    for c in 0..c_n {
        for y in 0..oh {
            for x_ in 0..ow {
                let base = idx3(w, h, c, 2 * y, 2 * x_);
                od[idx3(ow, oh, c, y, x_)] =
                    0.25 * (xd[base] + xd[base + 1] + xd[base + w] + xd[base + w + 1]);
            }
        }
    }
    Ok(out)
}

pub fn downsample2x_backward(cot: &Tensor) -> Tensor {
    let (c_n, oh, ow) = (cot.shape()[0], cot.shape()[1], cot.shape()[2]);
    let (h, w) = (oh * 2, ow * 2);
    let mut dx = Tensor::zeros(&[c_n, h, w], Dtype::Real);
    let cd = cot.data();
    let dd = dx.data_mut();
    for c in 0..c_n {
        for y in 0..oh {
            for x_ in 0..ow {
                let g = 0.25 * cd[idx3(ow, oh, c, y, x_)];
                let base = idx3(w, h, c, 2 * y, 2 * x_);
                dd[base] = g;
                dd[base + 1] = g;
                dd[base + w] = g;
                dd[base + w + 1] = g;
            }
        }
    }
    dx
}

// ---- pointwise nonlinearities ----------------------------------------------

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn activation_forward(kind: Nonlinearity, x: &Tensor) -> Tensor {
    let mut out = x.clone();
    match kind {
        Nonlinearity::Silu => out.data_mut().iter_mut().for_each(|v| *v *= sigmoid(*v)),
        Nonlinearity::Relu => out.data_mut().iter_mut().for_each(|v| *v = v.max(0.0)),
    }
    out
}

pub fn activation_backward(kind: Nonlinearity, x: &Tensor, cot: &Tensor) -> Tensor {
    let mut dx = cot.clone();
    let xd = x.data();
    match kind {
        Nonlinearity::Silu => {
            for (d, &v) in dx.data_mut().iter_mut().zip(xd.iter()) {
                let s = sigmoid(v);
                *d *= s * (1.0 + v * (1.0 - s));
            }
        }
        Nonlinearity::Relu => {
            for (d, &v) in dx.data_mut().iter_mut().zip(xd.iter()) {
                if v <= 0.0 {
                    *d = 0.0;
                }
            }
        }
    }
    dx
}

// ---- FiLM and time conditioning ---------------------------------------------

fn split_mod_vector<'a>(gb: &'a Tensor, c_n: usize, what: &str) -> Result<(&'a [f64], &'a [f64])> {
    if gb.numel() != 2 * c_n || gb.dtype() != Dtype::Real {
        return Err(AdError::InvalidArg(format!(
            "{what} expects a [2*{c_n}] modulation vector, got {:?}",
            gb.shape()
        )));
    }
    Ok((&gb.data()[..c_n], &gb.data()[c_n..]))
}

/// out[c,h,w] = gamma[c] * x[c,h,w] + beta[c]
pub fn film_forward(x: &Tensor, gamma_beta: &Tensor) -> Result<Tensor> {
    let (c_n, h, w) = expect_chw(x, "film")?;
    let (gamma, beta) = split_mod_vector(gamma_beta, c_n, "film")?;
    let mut out = Tensor::zeros(x.shape(), Dtype::Real);
    let xd = x.data();
    let od = out.data_mut();
    for c in 0..c_n {
        let (g, b) = (gamma[c], beta[c]);
        for i in c * h * w..(c + 1) * h * w {
            od[i] = g * xd[i] + b;
        }
    }
    Ok(out)
}

/// Returns (dx, d_gamma_beta).
pub fn film_backward(x: &Tensor, gamma_beta: &Tensor, cot: &Tensor) -> (Tensor, Tensor) {
    let (c_n, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let gamma = &gamma_beta.data()[..c_n];
    let mut dx = Tensor::zeros(x.shape(), Dtype::Real);
    let mut dgb = Tensor::zeros(gamma_beta.shape(), Dtype::Real);
    let (xd, cd) = (x.data(), cot.data());
    {
        let dxd = dx.data_mut();
        let dgbd = dgb.data_mut();
        for c in 0..c_n {
            let g = gamma[c];
            let mut dg = 0.0;
            let mut db = 0.0;
            for i in c * h * w..(c + 1) * h * w {
                dxd[i] = g * cd[i];
                dg += cd[i] * xd[i];
                db += cd[i];
            }
            dgbd[c] = dg;
            dgbd[c_n + c] = db;
        }
    }
    (dx, dgb)
}

/// out[c,h,w] = x[c,h,w] * (1 + s[c]) + t[c], with emb = [s, t].
pub fn scale_shift_forward(x: &Tensor, emb: &Tensor) -> Result<Tensor> {
    let (c_n, h, w) = expect_chw(x, "scale_shift")?;
    let (s, t) = split_mod_vector(emb, c_n, "scale_shift")?;
    let mut out = Tensor::zeros(x.shape(), Dtype::Real);
    let xd = x.data();
    let od = out.data_mut();
    for c in 0..c_n {
        let (g, b) = (1.0 + s[c], t[c]);
        for i in c * h * w..(c + 1) * h * w {
            od[i] = g * xd[i] + b;
        }
    }
    Ok(out)
}

/// Returns (dx, d_emb).
pub fn scale_shift_backward(x: &Tensor, emb: &Tensor, cot: &Tensor) -> (Tensor, Tensor) {
    let (c_n, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let s = &emb.data()[..c_n];
    let mut dx = Tensor::zeros(x.shape(), Dtype::Real);
    let mut demb = Tensor::zeros(emb.shape(), Dtype::Real);
    let (xd, cd) = (x.data(), cot.data());
    {
        let dxd = dx.data_mut();
        let dembd = demb.data_mut();
        for c in 0..c_n {
            let g = 1.0 + s[c];
            let mut ds = 0.0;
            let mut dt = 0.0;
            for i in c * h * w..(c + 1) * h * w {
                dxd[i] = g * cd[i];
                ds += cd[i] * xd[i];
                dt += cd[i];
            }
            dembd[c] = ds;
            dembd[c_n + c] = dt;
        }
    }
    (dx, demb)
}

// ---- pooling and concat ------------------------------------------------------

pub fn gap_forward(x: &Tensor) -> Result<Tensor> {
    let (c_n, h, w) = expect_chw(x, "global_avg_pool")?;
    let mut out = Tensor::zeros(&[c_n], Dtype::Real);
    let xd = x.data();
    let od = out.data_mut();
    let inv = 1.0 / (h * w) as f64;
    for c in 0..c_n {
        od[c] = xd[c * h * w..(c + 1) * h * w].iter().sum::<f64>() * inv;
    }
    Ok(out)
}

pub fn gap_backward(input_shape: &[usize], cot: &Tensor) -> Tensor {
    let (c_n, h, w) = (input_shape[0], input_shape[1], input_shape[2]);
    let mut dx = Tensor::zeros(input_shape, Dtype::Real);
    let inv = 1.0 / (h * w) as f64;
    let cd = cot.data();
    let dd = dx.data_mut();
    for c in 0..c_n {
        let g = cd[c] * inv;
        dd[c * h * w..(c + 1) * h * w].iter_mut().for_each(|v| *v = g);
    }
    dx
}

pub fn concat_forward(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (ca, h, w) = expect_chw(a, "concat")?;
    let (cb, hb, wb) = expect_chw(b, "concat")?;
    if (h, w) != (hb, wb) {
        return Err(AdError::InvalidArg(format!(
            "concat spatial mismatch: {h}x{w} vs {hb}x{wb}"
        )));
    }
    let mut out = Tensor::zeros(&[ca + cb, h, w], Dtype::Real);
    out.data_mut()[..ca * h * w].copy_from_slice(a.data());
    out.data_mut()[ca * h * w..].copy_from_slice(b.data());
    Ok(out)
}

/// Returns (da, db) given the first arm's channel count.
pub fn concat_backward(ca: usize, h: usize, w: usize, cot: &Tensor) -> (Tensor, Tensor) {
    let ctot = cot.shape()[0];
    let da = Tensor::from_vec(&[ca, h, w], Dtype::Real, cot.data()[..ca * h * w].to_vec())
        .expect("split sizes agree");
    let db = Tensor::from_vec(
        &[ctot - ca, h, w],
        Dtype::Real,
        cot.data()[ca * h * w..].to_vec(),
    )
    .expect("split sizes agree");
    (da, db)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn film_hand_case() {
        // F=[[1,2],[3,4]] single channel, gamma=2, beta=-1 -> [[1,3],[5,7]]
        let f = Tensor::real_from(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let gb = Tensor::real_from(&[2], vec![2.0, -1.0]).unwrap();
        let out = film_forward(&f, &gb).unwrap();
        assert_eq!(out.data(), &[1.0, 3.0, 5.0, 7.0]);
    }

    #[test]
    fn film_identity_when_unit_gain() {
        let f = Tensor::real_from(&[2, 2, 2], (0..8).map(|v| v as f64).collect()).unwrap();
        let gb = Tensor::real_from(&[4], vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let out = film_forward(&f, &gb).unwrap();
        assert_eq!(out.data(), f.data());
    }

    #[test]
    fn film_constant_output_when_zero_gain() {
        let f = Tensor::real_from(&[1, 2, 2], vec![9.0, -3.0, 0.5, 2.0]).unwrap();
        let gb = Tensor::real_from(&[2], vec![0.0, 5.0]).unwrap();
        let out = film_forward(&f, &gb).unwrap();
        assert!(out.data().iter().all(|&v| v == 5.0));
    }

    #[test]
    fn film_gradients_match_structure() {
        // d out / d gamma = F, d out / d beta = 1 (summed over spatial cot)
        let f = Tensor::real_from(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let gb = Tensor::real_from(&[2], vec![1.0, 0.0]).unwrap();
        let cot = Tensor::real_from(&[1, 2, 2], vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let (_, dgb) = film_backward(&f, &gb, &cot);
        assert_eq!(dgb.data()[0], 10.0); // sum of F
        assert_eq!(dgb.data()[1], 4.0); // count of pixels
    }

    #[test]
    fn downsample_then_upsample_shapes() {
        let x = Tensor::real_from(&[1, 4, 4], (0..16).map(|v| v as f64).collect()).unwrap();
        let d = downsample2x_forward(&x).unwrap();
        assert_eq!(d.shape(), &[1, 2, 2]);
        assert_eq!(d.data()[0], (0.0 + 1.0 + 4.0 + 5.0) / 4.0);
        let u = upsample2x_forward(&d).unwrap();
        assert_eq!(u.shape(), &[1, 4, 4]);
    }

    #[test]
    fn conv2d_identity_kernel_passthrough() {
        let mut w = Tensor::zeros(&[1, 1, 3, 3], Dtype::Real);
        w.data_mut()[4] = 1.0; // center tap
        let b = Tensor::zeros(&[1], Dtype::Real);
        let x = Tensor::real_from(&[1, 3, 3], (1..=9).map(|v| v as f64).collect()).unwrap();
        let y = conv2d_forward(&w, &b, &x).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn conv2d_shift_kernel_zero_pads() {
        // kernel selecting the left neighbour: out[y,x] = x[y, x-1]
        let mut w = Tensor::zeros(&[1, 1, 3, 3], Dtype::Real);
        w.data_mut()[3] = 1.0; // ky=1, kx=0
        let b = Tensor::zeros(&[1], Dtype::Real);
        let x = Tensor::real_from(&[1, 2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let y = conv2d_forward(&w, &b, &x).unwrap();
        assert_eq!(y.data(), &[0.0, 1.0, 2.0, 0.0, 4.0, 5.0]);
    }
}
