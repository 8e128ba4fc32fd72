//! Time-conditioned convolutional noise predictor.
//!
//! A two-level encoder-decoder over the latent grid with a skip concat and
//! sinusoidal time embeddings injected channel-wise as scale-shift pairs.
//! Small stand-in for the UNet backbone at desk scale.

use serde::{Deserialize, Serialize};

use mdr_autodiff::layers::*;
use mdr_autodiff::{normal_tensor, rng_from, Dtype, GradStore, ParamStore, Tensor};

use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorArch {
    /// Latent shape [ch, hw, hw].
    pub in_ch: usize,
    pub hw: usize,
    pub ch1: usize,
    pub ch2: usize,
    pub emb_dim: usize,
}

impl Default for PredictorArch {
    fn default() -> Self {
        PredictorArch {
            in_ch: 4,
            hw: 16,
            ch1: 16,
            ch2: 24,
            emb_dim: 16,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NoisePredictor {
    pub arch: PredictorArch,
    pub params: ParamStore,
    pub seed: u64,
}

fn conv_init(
    store: &mut ParamStore,
    name: &str,
    out_ch: usize,
    in_ch: usize,
    zero: bool,
    rng: &mut rand_chacha::ChaCha8Rng,
) {
    let w = if zero {
        Tensor::zeros(&[out_ch, in_ch, 3, 3], Dtype::Real)
    } else {
        let std = (2.0 / (in_ch * 9) as f64).sqrt();
        normal_tensor(&[out_ch, in_ch, 3, 3], Dtype::Real, rng).scaled(std)
    };
    store.insert(&format!("{name}.w"), w);
    store.insert(&format!("{name}.b"), Tensor::zeros(&[out_ch], Dtype::Real));
}

fn affine_init(
    store: &mut ParamStore,
    name: &str,
    out_dim: usize,
    in_dim: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) {
    let std = (2.0 / in_dim as f64).sqrt();
    store.insert(
        &format!("{name}.w"),
        normal_tensor(&[out_dim, in_dim], Dtype::Real, rng).scaled(std),
    );
    store.insert(&format!("{name}.b"), Tensor::zeros(&[out_dim], Dtype::Real));
}

impl NoisePredictor {
    pub fn init(arch: &PredictorArch, seed: u64) -> Self {
        let mut rng = rng_from(seed);
        let mut params = ParamStore::new();
        conv_init(&mut params, "np.conv1", arch.ch1, arch.in_ch, false, &mut rng);
        conv_init(&mut params, "np.conv2", arch.ch2, arch.ch1, false, &mut rng);
        conv_init(
            &mut params,
            "np.conv3",
            arch.ch1,
            arch.ch1 + arch.ch2,
            false,
            &mut rng,
        );
        // zero-initialized head: the untrained predictor outputs zero
        conv_init(&mut params, "np.head", arch.in_ch, arch.ch1, true, &mut rng);
        affine_init(&mut params, "np.emb1", 2 * arch.ch1, arch.emb_dim, &mut rng);
        affine_init(&mut params, "np.emb2", 2 * arch.ch2, arch.emb_dim, &mut rng);
        affine_init(&mut params, "np.emb3", 2 * arch.ch1, arch.emb_dim, &mut rng);
        NoisePredictor {
            arch: arch.clone(),
            params,
            seed,
        }
    }

    /// Fixed sinusoidal embedding of an integer diffusion step.
    pub fn time_embedding(&self, t: usize) -> Tensor {
        let e = self.arch.emb_dim;
        let half = e / 2;
        let mut out = Tensor::zeros(&[e], Dtype::Real);
        for k in 0..half {
            let freq = (10_000f64).powf(-(k as f64) / half as f64);
            let ang = t as f64 * freq;
            out.data_mut()[k] = ang.sin();
            out.data_mut()[half + k] = ang.cos();
        }
        out
    }
}

pub struct PredictCache {
    temb: Tensor,
    ss1: Tensor,
    ss2: Tensor,
    ss3: Tensor,
    x0: Tensor,
    d1c: Tensor,
    d1s: Tensor,
    d1a: Tensor,
    d2in: Tensor,
    d2c: Tensor,
    d2s: Tensor,
    d2a: Tensor,
    skip: Tensor,
    d3c: Tensor,
    d3s: Tensor,
    d3a: Tensor,
}

fn conv(p: &ParamStore, name: &str, x: &Tensor) -> Result<Tensor> {
    Ok(conv2d_forward(
        p.get(&format!("{name}.w"))?,
        p.get(&format!("{name}.b"))?,
        x,
    )?)
}

fn affine(p: &ParamStore, name: &str, x: &Tensor) -> Result<Tensor> {
    Ok(affine_forward(
        p.get(&format!("{name}.w"))?,
        p.get(&format!("{name}.b"))?,
        x,
    )?)
}

fn acc(grads: &mut GradStore, name: &str, g: Tensor) {
    match grads.get_mut(name) {
        Some(t) => t.add_in_place(&g),
        None => {
            grads.insert(name.to_string(), g);
        }
    }
}

fn conv_bwd(
    p: &ParamStore,
    name: &str,
    input: &Tensor,
    cot: &Tensor,
    grads: &mut GradStore,
) -> Tensor {
    let w = p.get(&format!("{name}.w")).expect("weight");
    let (dx, dw, db) = conv2d_backward(w, input, cot);
    acc(grads, &format!("{name}.w"), dw);
    acc(grads, &format!("{name}.b"), db);
    dx
}

fn affine_bwd(
    p: &ParamStore,
    name: &str,
    input: &Tensor,
    cot: &Tensor,
    grads: &mut GradStore,
) -> Tensor {
    let w = p.get(&format!("{name}.w")).expect("weight");
    let (dx, dw, db) = affine_backward(w, input, cot);
    acc(grads, &format!("{name}.w"), dw);
    acc(grads, &format!("{name}.b"), db);
    dx
}

/// Predict the noise component of `z` at diffusion step `t`.
pub fn predict_forward(
    net: &NoisePredictor,
    z: &Tensor,
    t: usize,
) -> Result<(Tensor, PredictCache)> {
    let p = &net.params;
    let temb = net.time_embedding(t);
    let ss1 = affine(p, "np.emb1", &temb)?;
    let ss2 = affine(p, "np.emb2", &temb)?;
    let ss3 = affine(p, "np.emb3", &temb)?;
    let x0 = z.clone();
    let d1c = conv(p, "np.conv1", &x0)?;
    let d1s = scale_shift_forward(&d1c, &ss1)?;
    let d1a = activation_forward(Nonlinearity::Silu, &d1s);
    let d2in = downsample2x_forward(&d1a)?;
    let d2c = conv(p, "np.conv2", &d2in)?;
    let d2s = scale_shift_forward(&d2c, &ss2)?;
    let d2a = activation_forward(Nonlinearity::Silu, &d2s);
    let up = upsample2x_forward(&d2a)?;
    let skip = concat_forward(&up, &d1a)?;
    let d3c = conv(p, "np.conv3", &skip)?;
    let d3s = scale_shift_forward(&d3c, &ss3)?;
    let d3a = activation_forward(Nonlinearity::Silu, &d3s);
    let out = conv(p, "np.head", &d3a)?;
    Ok((
        out,
        PredictCache {
            temb,
            ss1,
            ss2,
            ss3,
            x0,
            d1c,
            d1s,
            d1a,
            d2in,
            d2c,
            d2s,
            d2a,
            skip,
            d3c,
            d3s,
            d3a,
        },
    ))
}

/// Back-propagate through the predictor; returns the input cotangent.
pub fn predict_backward(
    net: &NoisePredictor,
    cache: &PredictCache,
    cot_out: &Tensor,
    grads: &mut GradStore,
) -> Tensor {
    let p = &net.params;
    let cot_d3a = conv_bwd(p, "np.head", &cache.d3a, cot_out, grads);
    let cot_d3s = activation_backward(Nonlinearity::Silu, &cache.d3s, &cot_d3a);
    let (cot_d3c, cot_ss3) = scale_shift_backward(&cache.d3c, &cache.ss3, &cot_d3s);
    affine_bwd(p, "np.emb3", &cache.temb, &cot_ss3, grads);
    let cot_skip = conv_bwd(p, "np.conv3", &cache.skip, &cot_d3c, grads);
    let ch_up = cache.d2a.shape()[0];
    let (h1, w1) = (cache.d1a.shape()[1], cache.d1a.shape()[2]);
    let (cot_up, cot_d1a_skip) = concat_backward(ch_up, h1, w1, &cot_skip);
    let cot_d2a = upsample2x_backward(&cot_up);
    let cot_d2s = activation_backward(Nonlinearity::Silu, &cache.d2s, &cot_d2a);
    let (cot_d2c, cot_ss2) = scale_shift_backward(&cache.d2c, &cache.ss2, &cot_d2s);
    affine_bwd(p, "np.emb2", &cache.temb, &cot_ss2, grads);
    let cot_d2in = conv_bwd(p, "np.conv2", &cache.d2in, &cot_d2c, grads);
    let mut cot_d1a = downsample2x_backward(&cot_d2in);
    cot_d1a.add_in_place(&cot_d1a_skip);
    let cot_d1s = activation_backward(Nonlinearity::Silu, &cache.d1s, &cot_d1a);
    let (cot_d1c, cot_ss1) = scale_shift_backward(&cache.d1c, &cache.ss1, &cot_d1s);
    affine_bwd(p, "np.emb1", &cache.temb, &cot_ss1, grads);
    conv_bwd(p, "np.conv1", &cache.x0, &cot_d1c, grads)
}

/// Forward-only convenience.
pub fn predict(net: &NoisePredictor, z: &Tensor, t: usize) -> Result<Tensor> {
    Ok(predict_forward(net, z, t)?.0)
}
