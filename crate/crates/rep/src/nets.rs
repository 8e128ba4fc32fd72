//! Encoder and decoder forward/backward passes.
//!
//! The networks are explicit compositions of the layer catalog, with cached
//! activations and hand-wired reverse passes accumulating into a GradStore.

use mdr_autodiff::layers::*;
use mdr_autodiff::{Dtype, GradStore, ParamStore, Tensor};

use crate::arch::{ContrastLatent, RepModel};
use crate::{RepError, Result};

/// Complex [h, w] image as two real channels (re, im).
pub fn complex_to_channels(x: &Tensor) -> Tensor {
    let (h, w) = (x.shape()[0], x.shape()[1]);
    let mut out = Tensor::zeros(&[2, h, w], Dtype::Real);
    for i in 0..h * w {
        let (re, im) = x.c_get(i);
        out.data_mut()[i] = re;
        out.data_mut()[h * w + i] = im;
    }
    out
}

pub fn channels_to_complex(x: &Tensor) -> Tensor {
    let (h, w) = (x.shape()[1], x.shape()[2]);
    let mut out = Tensor::zeros(&[h, w], Dtype::Complex);
    for i in 0..h * w {
        out.c_set(i, x.data()[i], x.data()[h * w + i]);
    }
    out
}

/// The FiLM primitive with separate gamma/beta arguments:
/// out[c,h,w] = gamma[c] * f[c,h,w] + beta[c].
pub fn film_modulate(f_dec: &Tensor, gamma: &Tensor, beta: &Tensor) -> Result<Tensor> {
    let c = f_dec.shape()[0];
    if gamma.numel() != c || beta.numel() != c {
        return Err(RepError::LatentWidth {
            level: 0,
            got: gamma.numel() + beta.numel(),
            expect: 2 * c,
        });
    }
    let mut gb = Tensor::zeros(&[2 * c], Dtype::Real);
    gb.data_mut()[..c].copy_from_slice(gamma.data());
    gb.data_mut()[c..].copy_from_slice(beta.data());
    Ok(film_forward(f_dec, &gb)?)
}

fn conv(p: &ParamStore, name: &str, x: &Tensor) -> Result<Tensor> {
    Ok(conv2d_forward(
        p.get(&format!("{name}.w"))?,
        p.get(&format!("{name}.b"))?,
        x,
    )?)
}

fn conv_bwd(
    p: &ParamStore,
    name: &str,
    input: &Tensor,
    cot: &Tensor,
    grads: &mut GradStore,
) -> Tensor {
    let w = p.get(&format!("{name}.w")).expect("conv weight");
    let (dx, dw, db) = conv2d_backward(w, input, cot);
    accumulate(grads, &format!("{name}.w"), dw);
    accumulate(grads, &format!("{name}.b"), db);
    dx
}

fn affine(p: &ParamStore, name: &str, x: &Tensor) -> Result<Tensor> {
    Ok(affine_forward(
        p.get(&format!("{name}.w"))?,
        p.get(&format!("{name}.b"))?,
        x,
    )?)
}

fn affine_bwd(
    p: &ParamStore,
    name: &str,
    input: &Tensor,
    cot: &Tensor,
    grads: &mut GradStore,
) -> Tensor {
    let w = p.get(&format!("{name}.w")).expect("affine weight");
    let (dx, dw, db) = affine_backward(w, input, cot);
    accumulate(grads, &format!("{name}.w"), dw);
    accumulate(grads, &format!("{name}.b"), db);
    dx
}

fn accumulate(grads: &mut GradStore, name: &str, g: Tensor) {
    match grads.get_mut(name) {
        Some(t) => t.add_in_place(&g),
        None => {
            grads.insert(name.to_string(), g);
        }
    }
}

fn check_resolution(model: &RepModel, x: &Tensor) -> Result<()> {
    let hw = model.arch.image_hw;
    if x.dtype() != Dtype::Complex || x.shape() != [hw, hw] {
        return Err(RepError::Resolution {
            expect: hw,
            got: x.shape().to_vec(),
        });
    }
    Ok(())
}

// ---- geometry encoder -------------------------------------------------------

pub struct GeomCache {
    a0: Tensor,
    a1: Tensor,
    a3: Tensor,
    a4: Tensor,
    a5: Tensor,
}

/// Raw (unstandardized) geometry encoding of a 2-channel image.
pub fn geom_forward(params: &ParamStore, x2ch: &Tensor) -> Result<(Tensor, GeomCache)> {
    let a0 = x2ch.clone();
    let a1 = conv(params, "eg.conv1", &a0)?;
    let a2 = activation_forward(Nonlinearity::Silu, &a1);
    let a3 = downsample2x_forward(&a2)?;
    let a4 = conv(params, "eg.conv2", &a3)?;
    let a5 = activation_forward(Nonlinearity::Silu, &a4);
    let z = conv(params, "eg.conv3", &a5)?;
    Ok((z, GeomCache { a0, a1, a3, a4, a5 }))
}

pub fn geom_backward(
    params: &ParamStore,
    cache: &GeomCache,
    cot_z: &Tensor,
    grads: &mut GradStore,
) -> Tensor {
    let cot5 = conv_bwd(params, "eg.conv3", &cache.a5, cot_z, grads);
    let cot4 = activation_backward(Nonlinearity::Silu, &cache.a4, &cot5);
    let cot3 = conv_bwd(params, "eg.conv2", &cache.a3, &cot4, grads);
    let cot2 = downsample2x_backward(&cot3);
    let cot1 = activation_backward(Nonlinearity::Silu, &cache.a1, &cot2);
    conv_bwd(params, "eg.conv1", &cache.a0, &cot1, grads)
}

// ---- contrast encoder --------------------------------------------------------

pub struct ContrastCache {
    b0: Tensor,
    b1: Tensor,
    b2: Tensor,
    b3: Tensor,
    b4: Tensor,
    b5: Tensor,
    b6: Tensor,
    b7: Tensor,
    b8: Tensor,
    g1: Tensor,
    g2: Tensor,
    g3: Tensor,
}

/// Per-level contrast vectors, coarse to fine: levels[0] comes from the
/// deepest feature stage.
pub fn contrast_forward(
    params: &ParamStore,
    x2ch: &Tensor,
) -> Result<(ContrastLatent, ContrastCache)> {
    let b0 = x2ch.clone();
    let b1 = conv(params, "ec.conv1", &b0)?;
    let b2 = activation_forward(Nonlinearity::Silu, &b1);
    let g1 = gap_forward(&b2)?;
    let zc_fine = affine(params, "ec.fc1", &g1)?;
    let b3 = downsample2x_forward(&b2)?;
    let b4 = conv(params, "ec.conv2", &b3)?;
    let b5 = activation_forward(Nonlinearity::Silu, &b4);
    let g2 = gap_forward(&b5)?;
    let zc_mid = affine(params, "ec.fc2", &g2)?;
    let b6 = downsample2x_forward(&b5)?;
    let b7 = conv(params, "ec.conv3", &b6)?;
    let b8 = activation_forward(Nonlinearity::Silu, &b7);
    let g3 = gap_forward(&b8)?;
    let zc_coarse = affine(params, "ec.fc3", &g3)?;
    Ok((
        ContrastLatent {
            levels: vec![zc_coarse, zc_mid, zc_fine],
        },
        ContrastCache {
            b0,
            b1,
            b2,
            b3,
            b4,
            b5,
            b6,
            b7,
            b8,
            g1,
            g2,
            g3,
        },
    ))
}

pub fn contrast_backward(
    params: &ParamStore,
    cache: &ContrastCache,
    cot_zc: &ContrastLatent,
    grads: &mut GradStore,
) -> Tensor {
    // deepest stage
    let cot_g3 = affine_bwd(params, "ec.fc3", &cache.g3, &cot_zc.levels[0], grads);
    let cot_b8 = gap_backward(cache.b8.shape(), &cot_g3);
    let cot_b7 = activation_backward(Nonlinearity::Silu, &cache.b7, &cot_b8);
    let cot_b6 = conv_bwd(params, "ec.conv3", &cache.b6, &cot_b7, grads);
    // middle stage: downsample branch plus GAP branch
    let mut cot_b5 = downsample2x_backward(&cot_b6);
    let cot_g2 = affine_bwd(params, "ec.fc2", &cache.g2, &cot_zc.levels[1], grads);
    cot_b5.add_in_place(&gap_backward(cache.b5.shape(), &cot_g2));
    let cot_b4 = activation_backward(Nonlinearity::Silu, &cache.b4, &cot_b5);
    let cot_b3 = conv_bwd(params, "ec.conv2", &cache.b3, &cot_b4, grads);
    // fine stage
    let mut cot_b2 = downsample2x_backward(&cot_b3);
    let cot_g1 = affine_bwd(params, "ec.fc1", &cache.g1, &cot_zc.levels[2], grads);
    cot_b2.add_in_place(&gap_backward(cache.b2.shape(), &cot_g1));
    let cot_b1 = activation_backward(Nonlinearity::Silu, &cache.b1, &cot_b2);
    conv_bwd(params, "ec.conv1", &cache.b0, &cot_b1, grads)
}

// ---- decoder ------------------------------------------------------------------

pub struct DecodeCache {
    c0: Tensor,
    c1: Tensor,
    c2: Tensor,
    c3: Tensor,
    c5: Tensor,
    c6: Tensor,
    c7: Tensor,
    c8: Tensor,
    c9: Tensor,
    c10: Tensor,
    gb: [Tensor; 3],
}

/// Decode a raw (already de-standardized) geometry latent with per-level
/// FiLM contrast injection. Input `z_in` is [latent_ch, hw, hw].
pub fn decode_forward(
    params: &ParamStore,
    z_in: &Tensor,
    zc: &ContrastLatent,
) -> Result<(Tensor, DecodeCache)> {
    let gb: [Tensor; 3] = [
        zc.levels[0].clone(),
        zc.levels[1].clone(),
        zc.levels[2].clone(),
    ];
    let c0 = z_in.clone();
    let c1 = conv(params, "dec.conv1", &c0)?;
    let c2 = film_forward(&c1, &gb[0])?;
    let c3 = activation_forward(Nonlinearity::Silu, &c2);
    let c4 = conv(params, "dec.conv2", &c3)?;
    let c5 = upsample2x_forward(&c4)?;
    let c6 = film_forward(&c5, &gb[1])?;
    let c7 = activation_forward(Nonlinearity::Silu, &c6);
    let c8 = conv(params, "dec.conv3", &c7)?;
    let c9 = film_forward(&c8, &gb[2])?;
    let c10 = activation_forward(Nonlinearity::Silu, &c9);
    let out = conv(params, "dec.head", &c10)?;
    Ok((
        out,
        DecodeCache {
            c0,
            c1,
            c2,
            c3,
            c5,
            c6,
            c7,
            c8,
            c9,
            c10,
            gb,
        },
    ))
}

/// Returns (cot_z_in, cot_zc).
pub fn decode_backward(
    params: &ParamStore,
    cache: &DecodeCache,
    cot_out: &Tensor,
    grads: &mut GradStore,
) -> (Tensor, ContrastLatent) {
    let cot10 = conv_bwd(params, "dec.head", &cache.c10, cot_out, grads);
    let cot9 = activation_backward(Nonlinearity::Silu, &cache.c9, &cot10);
    let (cot8, dgb_fine) = film_backward(&cache.c8, &cache.gb[2], &cot9);
    let cot7 = conv_bwd(params, "dec.conv3", &cache.c7, &cot8, grads);
    let cot6 = activation_backward(Nonlinearity::Silu, &cache.c6, &cot7);
    let (cot5, dgb_mid) = film_backward(&cache.c5, &cache.gb[1], &cot6);
    let cot4 = upsample2x_backward(&cot5);
    let cot3 = conv_bwd(params, "dec.conv2", &cache.c3, &cot4, grads);
    let cot2 = activation_backward(Nonlinearity::Silu, &cache.c2, &cot3);
    let (cot1, dgb_coarse) = film_backward(&cache.c1, &cache.gb[0], &cot2);
    let cot0 = conv_bwd(params, "dec.conv1", &cache.c0, &cot1, grads);
    (
        cot0,
        ContrastLatent {
            levels: vec![dgb_coarse, dgb_mid, dgb_fine],
        },
    )
}

/// Reverse pass with the decoder weights held fixed: only the latent
/// cotangents are produced. Used by the reconstruction engine, where the
/// representation is frozen.
pub fn decode_backward_data(
    params: &ParamStore,
    cache: &DecodeCache,
    cot_out: &Tensor,
) -> (Tensor, ContrastLatent) {
    let w = |name: &str| params.get(name).expect("decoder weight");
    let cot10 = conv2d_backward_data(w("dec.head.w"), cache.c10.shape(), cot_out);
    let cot9 = activation_backward(Nonlinearity::Silu, &cache.c9, &cot10);
    let (cot8, dgb_fine) = film_backward(&cache.c8, &cache.gb[2], &cot9);
    let cot7 = conv2d_backward_data(w("dec.conv3.w"), cache.c7.shape(), &cot8);
    let cot6 = activation_backward(Nonlinearity::Silu, &cache.c6, &cot7);
    let (cot5, dgb_mid) = film_backward(&cache.c5, &cache.gb[1], &cot6);
    let cot4 = upsample2x_backward(&cot5);
    let cot3 = conv2d_backward_data(w("dec.conv2.w"), cache.c3.shape(), &cot4);
    let cot2 = activation_backward(Nonlinearity::Silu, &cache.c2, &cot3);
    let (cot1, dgb_coarse) = film_backward(&cache.c1, &cache.gb[0], &cot2);
    let cot0 = conv2d_backward_data(w("dec.conv1.w"), cache.c0.shape(), &cot1);
    (
        cot0,
        ContrastLatent {
            levels: vec![dgb_coarse, dgb_mid, dgb_fine],
        },
    )
}

// ---- public single-image operations ----------------------------------------

/// Standardized geometry latent of a complex image.
pub fn encode_geometry(x: &Tensor, model: &RepModel) -> Result<Tensor> {
    check_resolution(model, x)?;
    let (raw, _) = geom_forward(&model.params, &complex_to_channels(x))?;
    Ok(standardize(&raw, model))
}

/// (raw - mean) / std per channel.
pub fn standardize(raw: &Tensor, model: &RepModel) -> Tensor {
    let (c_n, h, w) = (raw.shape()[0], raw.shape()[1], raw.shape()[2]);
    let mut out = raw.clone();
    for c in 0..c_n {
        let mu = model.latent_mean.data()[c];
        let sd = model.latent_std.data()[c];
        for i in c * h * w..(c + 1) * h * w {
            out.data_mut()[i] = (out.data()[i] - mu) / sd;
        }
    }
    out
}

/// mean + std * z per channel (inverse of `standardize`).
pub fn destandardize(z: &Tensor, model: &RepModel) -> Tensor {
    let (c_n, h, w) = (z.shape()[0], z.shape()[1], z.shape()[2]);
    let mut out = z.clone();
    for c in 0..c_n {
        let mu = model.latent_mean.data()[c];
        let sd = model.latent_std.data()[c];
        for i in c * h * w..(c + 1) * h * w {
            out.data_mut()[i] = mu + sd * out.data()[i];
        }
    }
    out
}

pub fn encode_contrast(x: &Tensor, model: &RepModel) -> Result<ContrastLatent> {
    check_resolution(model, x)?;
    let (zc, _) = contrast_forward(&model.params, &complex_to_channels(x))?;
    Ok(zc)
}

/// Decode a standardized geometry latent and contrast code into a complex
/// image.
pub fn decode(z_g: &Tensor, z_c: &ContrastLatent, model: &RepModel) -> Result<Tensor> {
    let expect = model.arch.latent_shape();
    if z_g.shape() != expect {
        return Err(RepError::Resolution {
            expect: model.arch.latent_hw,
            got: z_g.shape().to_vec(),
        });
    }
    for (l, (lv, &w)) in z_c
        .levels
        .iter()
        .zip(model.arch.contrast_widths().iter())
        .enumerate()
    {
        if lv.numel() != w {
            return Err(RepError::LatentWidth {
                level: l,
                got: lv.numel(),
                expect: w,
            });
        }
    }
    let raw = destandardize(z_g, model);
    let (out2ch, _) = decode_forward(&model.params, &raw, z_c)?;
    Ok(channels_to_complex(&out2ch))
}
