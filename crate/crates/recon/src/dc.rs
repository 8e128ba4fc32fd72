//! SSDU-partitioned data-consistency loss and the inner joint update of
//! latents and refinement parameters.
//!
//! loss = ||A_T(D(z)) - d_T||^2 + ||A_L(N(D(z), d_T, A_T)) - d_L||^2,
//! with the decoder stack projected through the temporal basis in subspace
//! mode and the refinement acting on spatial coefficients there.

use mdr_autodiff::{derive_seed, AdamConfig, Dtype, GradStore, ParamStore, Tensor};
use mdr_mri::subspace::{compress_temporal, expand_temporal};
use mdr_mri::{adjoint_op, apply_mask, forward_op, ssdu_partition, SamplingMask, SsduPartition, SubspaceBasis};
use mdr_rep::arch::{ContrastLatent, RepModel};
use mdr_rep::nets::{
    channels_to_complex, complex_to_channels, decode_backward_data, decode_forward, destandardize,
    DecodeCache,
};

use crate::denoiser::RefinementParams;
use crate::refine::{refine_backward, refine_forward, RefineContext};
use crate::{ReconError, Result};

/// Everything fixed during one reconstruction's data-consistency updates.
pub struct DcContext<'a> {
    pub model: &'a RepModel,
    pub sens: &'a Tensor,
    /// Measured k-space (zero off-mask), [nt, nc, h, w].
    pub kspace: &'a Tensor,
    pub mask: &'a SamplingMask,
    pub basis: Option<&'a SubspaceBasis>,
    pub use_refinement: bool,
    pub shared_geometry: bool,
}

impl DcContext<'_> {
    pub fn nt(&self) -> usize {
        self.kspace.shape()[0]
    }

    fn grid(&self) -> (usize, usize) {
        (self.kspace.shape()[2], self.kspace.shape()[3])
    }
}

/// The optimized variables: geometry latents in standardized prior space
/// (one when shared) and per-frame contrast latents.
#[derive(Debug, Clone)]
pub struct LatentState {
    pub z_g: Vec<Tensor>,
    pub z_c: Vec<ContrastLatent>,
}

impl LatentState {
    pub fn geometry_index(&self, t: usize) -> usize {
        if self.z_g.len() == 1 {
            0
        } else {
            t
        }
    }
}

/// Decode the current latents into a complex [nt, h, w] stack.
pub fn decode_stack(
    ctx: &DcContext<'_>,
    state: &LatentState,
) -> Result<(Tensor, Vec<DecodeCache>)> {
    let nt = ctx.nt();
    let (h, w) = ctx.grid();
    let mut stack = Tensor::zeros(&[nt, h, w], Dtype::Complex);
    let mut caches = Vec::with_capacity(nt);
    for t in 0..nt {
        let zg = &state.z_g[state.geometry_index(t)];
        let raw = destandardize(zg, ctx.model);
        let (out2ch, cache) = decode_forward(&ctx.model.params, &raw, &state.z_c[t])?;
        let frame = channels_to_complex(&out2ch);
        stack.data_mut()[2 * t * h * w..2 * (t + 1) * h * w].copy_from_slice(frame.data());
        caches.push(cache);
    }
    Ok((stack, caches))
}

/// Temporal projection X V^H V when a basis is present, identity otherwise.
fn project(ctx: &DcContext<'_>, x: &Tensor) -> Tensor {
    match ctx.basis {
        Some(b) => expand_temporal(&compress_temporal(x, b), b),
        None => x.clone(),
    }
}

struct TermGrad {
    loss: f64,
    cot_stack: Tensor,
}

/// ||A_m(P x) - d_m||^2 and its stack cotangent.
fn masked_residual_term(
    ctx: &DcContext<'_>,
    stack: &Tensor,
    m: &SamplingMask,
) -> Result<TermGrad> {
    let projected = project(ctx, stack);
    let pred = forward_op(&projected, ctx.sens, m)?;
    let resid = pred.sub(&apply_mask(ctx.kspace, m));
    let loss = resid.norm_sq();
    let back = adjoint_op(&resid, ctx.sens, m)?;
    let cot_stack = project(ctx, &back).scaled(2.0);
    Ok(TermGrad { loss, cot_stack })
}

/// Forward-only partitioned loss (the finite-difference oracle path).
pub fn dc_loss(
    ctx: &DcContext<'_>,
    state: &LatentState,
    refinement: &RefinementParams,
    partition: &SsduPartition,
) -> Result<f64> {
    let (stack, _) = decode_stack(ctx, state)?;
    let t1 = masked_residual_term(ctx, &stack, &partition.theta)?.loss;
    let d_theta = apply_mask(ctx.kspace, &partition.theta);
    let t2 = if ctx.use_refinement {
        let rctx = RefineContext {
            sens: ctx.sens,
            theta: &partition.theta,
            d_theta: &d_theta,
            basis: ctx.basis,
        };
        let input = match ctx.basis {
            Some(b) => compress_temporal(&stack, b),
            None => stack.clone(),
        };
        let refined = crate::refine::refine(refinement, &input, &rctx)?;
        let frames = match ctx.basis {
            Some(b) => expand_temporal(&refined, b),
            None => refined,
        };
        forward_op(&frames, ctx.sens, &partition.lambda)?
            .sub(&apply_mask(ctx.kspace, &partition.lambda))
            .norm_sq()
    } else {
        masked_residual_term(ctx, &stack, &partition.lambda)?.loss
    };
    Ok(t1 + t2)
}

/// Loss plus gradients with respect to the latents (through the frozen
/// decoder) and the refinement parameters.
pub fn dc_loss_grad(
    ctx: &DcContext<'_>,
    state: &LatentState,
    refinement: &RefinementParams,
    partition: &SsduPartition,
) -> Result<(f64, LatentState, GradStore)> {
    let nt = ctx.nt();
    let (h, w) = ctx.grid();
    let (stack, caches) = decode_stack(ctx, state)?;
    let term1 = masked_residual_term(ctx, &stack, &partition.theta)?;
    let mut cot_stack = term1.cot_stack;
    let mut ref_grads = GradStore::new();
    let d_theta = apply_mask(ctx.kspace, &partition.theta);

    let term2_loss = if ctx.use_refinement {
        let rctx = RefineContext {
            sens: ctx.sens,
            theta: &partition.theta,
            d_theta: &d_theta,
            basis: ctx.basis,
        };
        let input = match ctx.basis {
            Some(b) => compress_temporal(&stack, b),
            None => stack.clone(),
        };
        let rcache = refine_forward(refinement, &input, &rctx)?;
        let frames = match ctx.basis {
            Some(b) => expand_temporal(rcache.output(), b),
            None => rcache.output().clone(),
        };
        let resid = forward_op(&frames, ctx.sens, &partition.lambda)?
            .sub(&apply_mask(ctx.kspace, &partition.lambda));
        let loss = resid.norm_sq();
        let cot_frames = adjoint_op(&resid, ctx.sens, &partition.lambda)?.scaled(2.0);
        let cot_refined = match ctx.basis {
            Some(b) => compress_temporal(&cot_frames, b),
            None => cot_frames,
        };
        let cot_input = refine_backward(refinement, &rcache, &cot_refined, &mut ref_grads);
        let cot_from_refine = match ctx.basis {
            Some(b) => expand_temporal(&cot_input, b),
            None => cot_input,
        };
        cot_stack.add_in_place(&cot_from_refine);
        loss
    } else {
        let term2 = masked_residual_term(ctx, &stack, &partition.lambda)?;
        cot_stack.add_in_place(&term2.cot_stack);
        term2.loss
    };

    // through the frozen decoder into the latents
    let mut zg_grads: Vec<Tensor> = state
        .z_g
        .iter()
        .map(|z| Tensor::zeros(z.shape(), z.dtype()))
        .collect();
    let mut zc_grads: Vec<ContrastLatent> = Vec::with_capacity(nt);
    for t in 0..nt {
        let cot_frame = Tensor::from_vec(
            &[h, w],
            Dtype::Complex,
            cot_stack.data()[2 * t * h * w..2 * (t + 1) * h * w].to_vec(),
        )?;
        let cot2ch = complex_to_channels(&cot_frame);
        let (cot_raw, cot_zc) = decode_backward_data(&ctx.model.params, &caches[t], &cot2ch);
        // destandardize chain: raw = mu + sigma z
        let mut cot_z = cot_raw;
        let (c_n, hw) = (cot_z.shape()[0], cot_z.shape()[1] * cot_z.shape()[2]);
        for c in 0..c_n {
            let sd = ctx.model.latent_std.data()[c];
            for i in c * hw..(c + 1) * hw {
                cot_z.data_mut()[i] *= sd;
            }
        }
        zg_grads[state.geometry_index(t)].add_in_place(&cot_z);
        zc_grads.push(cot_zc);
    }
    Ok((
        term1.loss + term2_loss,
        LatentState {
            z_g: zg_grads,
            z_c: zc_grads,
        },
        ref_grads,
    ))
}

#[derive(Debug, Clone)]
pub struct DcUpdateConfig {
    pub inner_iters: usize,
    pub lr_latents: f64,
    pub lr_refine: f64,
    pub rho: f64,
}

fn latent_store(state: &LatentState) -> ParamStore {
    let mut s = ParamStore::new();
    for (i, z) in state.z_g.iter().enumerate() {
        s.insert(&format!("zg.{i}"), z.clone());
    }
    for (t, zc) in state.z_c.iter().enumerate() {
        for (l, lv) in zc.levels.iter().enumerate() {
            s.insert(&format!("zc.{t}.{l}"), lv.clone());
        }
    }
    s
}

fn latent_grads_to_store(grads: &LatentState) -> GradStore {
    let mut g = GradStore::new();
    for (i, z) in grads.z_g.iter().enumerate() {
        g.insert(format!("zg.{i}"), z.clone());
    }
    for (t, zc) in grads.z_c.iter().enumerate() {
        for (l, lv) in zc.levels.iter().enumerate() {
            g.insert(format!("zc.{t}.{l}"), lv.clone());
        }
    }
    g
}

fn store_to_latents(store: &ParamStore, template: &LatentState) -> LatentState {
    let z_g = (0..template.z_g.len())
        .map(|i| store.get(&format!("zg.{i}")).expect("zg entry").clone())
        .collect();
    let z_c = (0..template.z_c.len())
        .map(|t| ContrastLatent {
            levels: (0..template.z_c[t].levels.len())
                .map(|l| store.get(&format!("zc.{t}.{l}")).expect("zc entry").clone())
                .collect(),
        })
        .collect();
    LatentState { z_g, z_c }
}

/// A partition that disables hold-out: theta is the whole acquisition mask.
pub fn degenerate_partition(mask: &SamplingMask) -> SsduPartition {
    SsduPartition {
        theta: mask.clone(),
        lambda: mask.empty_like(),
        rho: 0.0,
    }
}

/// `inner_iters` joint Adam steps over latents and refinement parameters,
/// drawing a fresh partition per step. Returns the per-iteration loss trace.
pub fn dc_update(
    ctx: &DcContext<'_>,
    state: &mut LatentState,
    refinement: &mut RefinementParams,
    cfg: &DcUpdateConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut trace = Vec::with_capacity(cfg.inner_iters);
    if cfg.inner_iters == 0 {
        return Ok(trace);
    }
    let mut lat_store = latent_store(state);
    let lat_adam = AdamConfig {
        lr: cfg.lr_latents,
        ..Default::default()
    };
    let ref_adam = AdamConfig {
        lr: cfg.lr_refine,
        ..Default::default()
    };
    for iter in 0..cfg.inner_iters {
        let partition = if cfg.rho > 0.0 {
            ssdu_partition(ctx.mask, cfg.rho, derive_seed(seed, iter as u64, 1))?
        } else {
            degenerate_partition(ctx.mask)
        };
        let current = store_to_latents(&lat_store, state);
        let (loss, lat_grads, ref_grads) = dc_loss_grad(ctx, &current, refinement, &partition)?;
        if !loss.is_finite() {
            return Err(ReconError::NonFiniteLoss(iter));
        }
        trace.push(loss);
        lat_store.adam_step(&latent_grads_to_store(&lat_grads), &lat_adam)?;
        if ctx.use_refinement {
            refinement.store.adam_step(&ref_grads, &ref_adam)?;
        }
    }
    *state = store_to_latents(&lat_store, state);
    Ok(trace)
}
