//! The refinement network's learnable pieces: a small shared-weight conv
//! denoiser applied per frame (or per spatial coefficient) and the positive
//! coupling weight mu, parameterized on the log scale.

use mdr_autodiff::layers::*;
use mdr_autodiff::{normal_tensor, rng_from, Dtype, GradStore, ParamStore, Tensor};

use crate::Result;

pub const DENOISER_CH: usize = 16;

/// theta_N: three 3x3 conv layers (2 -> 16 -> 16 -> 2, SiLU between, zero
/// -initialized last layer so the denoiser starts as the identity) plus
/// log(mu).
#[derive(Debug, Clone)]
pub struct RefinementParams {
    pub store: ParamStore,
    /// Number of unrolled blocks.
    pub k_unrolls: usize,
    /// CG iterations per data-consistency solve.
    pub cg_iters: usize,
}

impl RefinementParams {
    pub fn init(k_unrolls: usize, cg_iters: usize, mu0: f64, seed: u64) -> Self {
        let mut rng = rng_from(seed);
        let mut store = ParamStore::new();
        let std1 = (2.0f64 / 18.0).sqrt();
        let std2 = (2.0 / (DENOISER_CH as f64 * 9.0)).sqrt();
        store.insert(
            "dn.conv1.w",
            normal_tensor(&[DENOISER_CH, 2, 3, 3], Dtype::Real, &mut rng).scaled(std1),
        );
        store.insert("dn.conv1.b", Tensor::zeros(&[DENOISER_CH], Dtype::Real));
        store.insert(
            "dn.conv2.w",
            normal_tensor(&[DENOISER_CH, DENOISER_CH, 3, 3], Dtype::Real, &mut rng).scaled(std2),
        );
        store.insert("dn.conv2.b", Tensor::zeros(&[DENOISER_CH], Dtype::Real));
        store.insert(
            "dn.conv3.w",
            Tensor::zeros(&[2, DENOISER_CH, 3, 3], Dtype::Real),
        );
        store.insert("dn.conv3.b", Tensor::zeros(&[2], Dtype::Real));
        store.insert("mu.log", Tensor::scalar(mu0.ln()));
        RefinementParams {
            store,
            k_unrolls,
            cg_iters,
        }
    }

    pub fn mu(&self) -> f64 {
        self.store.get("mu.log").expect("mu.log").data()[0].exp()
    }
}

pub struct DenoiseFrameCache {
    x2ch: Tensor,
    a1: Tensor,
    a2: Tensor,
    a3: Tensor,
    a4: Tensor,
}

/// z = x + net(x) on one complex frame.
pub fn denoise_frame(
    params: &ParamStore,
    frame: &Tensor,
) -> Result<(Tensor, DenoiseFrameCache)> {
    let x2ch = frame_to_2ch(frame);
    let a1 = conv2d_forward(params.get("dn.conv1.w")?, params.get("dn.conv1.b")?, &x2ch)?;
    let a2 = activation_forward(Nonlinearity::Silu, &a1);
    let a3 = conv2d_forward(params.get("dn.conv2.w")?, params.get("dn.conv2.b")?, &a2)?;
    let a4 = activation_forward(Nonlinearity::Silu, &a3);
    let a5 = conv2d_forward(params.get("dn.conv3.w")?, params.get("dn.conv3.b")?, &a4)?;
    let mut out2ch = x2ch.clone();
    out2ch.add_in_place(&a5);
    Ok((
        ch2_to_frame(&out2ch),
        DenoiseFrameCache {
            x2ch,
            a1,
            a2,
            a3,
            a4,
        },
    ))
}

/// Cotangent of the frame input given the cotangent of the denoised output.
pub fn denoise_frame_backward(
    params: &ParamStore,
    cache: &DenoiseFrameCache,
    cot_out: &Tensor,
    grads: &mut GradStore,
) -> Tensor {
    let cot2ch = frame_to_2ch(cot_out);
    let w3 = params.get("dn.conv3.w").expect("w3");
    let (cot_a4, dw3, db3) = conv2d_backward(w3, &cache.a4, &cot2ch);
    acc(grads, "dn.conv3.w", dw3);
    acc(grads, "dn.conv3.b", db3);
    let cot_a3 = activation_backward(Nonlinearity::Silu, &cache.a3, &cot_a4);
    let w2 = params.get("dn.conv2.w").expect("w2");
    let (cot_a2, dw2, db2) = conv2d_backward(w2, &cache.a2, &cot_a3);
    acc(grads, "dn.conv2.w", dw2);
    acc(grads, "dn.conv2.b", db2);
    let cot_a1 = activation_backward(Nonlinearity::Silu, &cache.a1, &cot_a2);
    let w1 = params.get("dn.conv1.w").expect("w1");
    let (cot_x_net, dw1, db1) = conv2d_backward(w1, &cache.a1_input(), &cot_a1);
    acc(grads, "dn.conv1.w", dw1);
    acc(grads, "dn.conv1.b", db1);
    // residual connection: dz/dx = I + net'
    let mut cot_x = cot2ch;
    cot_x.add_in_place(&cot_x_net);
    ch2_to_frame(&cot_x)
}

impl DenoiseFrameCache {
    fn a1_input(&self) -> Tensor {
        self.x2ch.clone()
    }
}

fn acc(grads: &mut GradStore, name: &str, g: Tensor) {
    match grads.get_mut(name) {
        Some(t) => t.add_in_place(&g),
        None => {
            grads.insert(name.to_string(), g);
        }
    }
}

/// Complex [h, w] -> real [2, h, w], a unit-Jacobian relabelling.
pub fn frame_to_2ch(x: &Tensor) -> Tensor {
    let (h, w) = (x.shape()[0], x.shape()[1]);
    let mut out = Tensor::zeros(&[2, h, w], Dtype::Real);
    for i in 0..h * w {
        let (re, im) = x.c_get(i);
        out.data_mut()[i] = re;
        out.data_mut()[h * w + i] = im;
    }
    out
}

pub fn ch2_to_frame(x: &Tensor) -> Tensor {
    let (h, w) = (x.shape()[1], x.shape()[2]);
    let mut out = Tensor::zeros(&[h, w], Dtype::Complex);
    for i in 0..h * w {
        out.c_set(i, x.data()[i], x.data()[h * w + i]);
    }
    out
}
