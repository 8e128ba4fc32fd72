//! Unrolled refinement network: K blocks of shared-weight denoising followed
//! by a conjugate-gradient data-consistency solve
//! x <- argmin ||A_T x - d_T||^2 + mu ||x - denoise(x_prev)||^2,
//! warm-started at the denoised estimate and differentiable end-to-end.
//! With a subspace basis the blocks operate on spatial coefficients.

use mdr_autodiff::{GradStore, Tensor};
use mdr_mri::subspace::{compress_temporal, expand_temporal};
use mdr_mri::{adjoint_op, forward_op, SamplingMask, SubspaceBasis};

use crate::denoiser::{denoise_frame, denoise_frame_backward, DenoiseFrameCache, RefinementParams};
use crate::cgtape::CgTape;
use crate::{ReconError, Result};

/// The restricted acquisition model a refinement call works against.
pub struct RefineContext<'a> {
    pub sens: &'a Tensor,
    pub theta: &'a SamplingMask,
    /// k-space samples restricted to theta, [nt, nc, h, w].
    pub d_theta: &'a Tensor,
    pub basis: Option<&'a SubspaceBasis>,
}

impl<'a> RefineContext<'a> {
    /// A^H_T A_T lifted to the working stack (frames, or coefficients when a
    /// basis is present).
    fn normal_stack(&self, v: &Tensor) -> Tensor {
        match self.basis {
            None => {
                let k = forward_op(v, self.sens, self.theta).expect("validated shapes");
                adjoint_op(&k, self.sens, self.theta).expect("validated shapes")
            }
            Some(b) => {
                let frames = expand_temporal(v, b);
                let k = forward_op(&frames, self.sens, self.theta).expect("validated shapes");
                let back = adjoint_op(&k, self.sens, self.theta).expect("validated shapes");
                compress_temporal(&back, b)
            }
        }
    }

    /// A^H_T d_T on the working stack.
    pub fn ah_d(&self) -> Result<Tensor> {
        let img = adjoint_op(self.d_theta, self.sens, self.theta)?;
        Ok(match self.basis {
            None => img,
            Some(b) => compress_temporal(&img, b),
        })
    }

    fn working_frames(&self, nt: usize) -> usize {
        match self.basis {
            None => nt,
            Some(b) => b.rank(),
        }
    }
}

pub struct RefineCache<'a> {
    tapes: Vec<CgTape<'a>>,
    x0_nodes: Vec<usize>,
    b_nodes: Vec<usize>,
    out_nodes: Vec<usize>,
    denoise_caches: Vec<Vec<DenoiseFrameCache>>,
    z_stacks: Vec<Tensor>,
    mu: f64,
    output: Tensor,
}

impl RefineCache<'_> {
    pub fn output(&self) -> &Tensor {
        &self.output
    }
}

fn stack_frame(stack: &Tensor, t: usize) -> Tensor {
    let (h, w) = (stack.shape()[1], stack.shape()[2]);
    Tensor::from_vec(
        &[h, w],
        mdr_autodiff::Dtype::Complex,
        stack.data()[2 * t * h * w..2 * (t + 1) * h * w].to_vec(),
    )
    .expect("consistent slice")
}

fn set_frame(stack: &mut Tensor, t: usize, frame: &Tensor) {
    let (h, w) = (stack.shape()[1], stack.shape()[2]);
    stack.data_mut()[2 * t * h * w..2 * (t + 1) * h * w].copy_from_slice(frame.data());
}

fn denoise_stack(
    params: &RefinementParams,
    x: &Tensor,
) -> Result<(Tensor, Vec<DenoiseFrameCache>)> {
    let nf = x.shape()[0];
    let mut z = x.clone();
    let mut caches = Vec::with_capacity(nf);
    for t in 0..nf {
        let (zf, cache) = denoise_frame(&params.store, &stack_frame(x, t))?;
        set_frame(&mut z, t, &zf);
        caches.push(cache);
    }
    Ok((z, caches))
}

fn denoise_stack_backward(
    params: &RefinementParams,
    caches: &[DenoiseFrameCache],
    cot_z: &Tensor,
    grads: &mut GradStore,
) -> Tensor {
    let nf = cot_z.shape()[0];
    let mut cot_x = cot_z.clone();
    for t in 0..nf {
        let cot = denoise_frame_backward(&params.store, &caches[t], &stack_frame(cot_z, t), grads);
        set_frame(&mut cot_x, t, &cot);
    }
    cot_x
}

/// Forward pass of the K unrolled blocks. The cache owns the CG tapes needed
/// for the reverse sweep.
pub fn refine_forward<'a>(
    params: &RefinementParams,
    x_in: &Tensor,
    ctx: &'a RefineContext<'a>,
) -> Result<RefineCache<'a>> {
    let nt = ctx.d_theta.shape()[0];
    let nf = ctx.working_frames(nt);
    if x_in.shape()[0] != nf {
        return Err(ReconError::Shape(format!(
            "refinement input has {} frames, expected {nf}",
            x_in.shape()[0]
        )));
    }
    let mu = params.mu();
    let ah_d = ctx.ah_d()?;
    let mut x = x_in.clone();
    let mut tapes = Vec::with_capacity(params.k_unrolls);
    let mut x0_nodes = Vec::new();
    let mut b_nodes = Vec::new();
    let mut out_nodes = Vec::new();
    let mut denoise_caches = Vec::new();
    let mut z_stacks = Vec::new();
    for _ in 0..params.k_unrolls {
        let (z, dcaches) = denoise_stack(params, &x)?;
        let mut b = ah_d.clone();
        b.axpy_in_place(mu, &z);
        let mut tape = CgTape::new(Box::new(move |v: &Tensor| ctx.normal_stack(v)), mu);
        let x0 = tape.leaf(z.clone());
        let bn = tape.leaf(b);
        let out = tape.cg_solve(x0, bn, params.cg_iters)?;
        x = tape.value(out).clone();
        tapes.push(tape);
        x0_nodes.push(x0);
        b_nodes.push(bn);
        out_nodes.push(out);
        denoise_caches.push(dcaches);
        z_stacks.push(z);
    }
    Ok(RefineCache {
        tapes,
        x0_nodes,
        b_nodes,
        out_nodes,
        denoise_caches,
        z_stacks,
        mu,
        output: x,
    })
}

/// Reverse sweep: returns the cotangent of the refinement input and
/// accumulates gradients for the denoiser weights and log(mu).
pub fn refine_backward(
    params: &RefinementParams,
    cache: &RefineCache<'_>,
    cot_out: &Tensor,
    grads: &mut GradStore,
) -> Tensor {
    let mut cot_x = cot_out.clone();
    let mut mu_grad_total = 0.0;
    for k in (0..cache.tapes.len()).rev() {
        let tape = &cache.tapes[k];
        let (leaf_cots, mu_grad_tape) = tape.backward(
            cache.out_nodes[k],
            &cot_x,
            &[cache.x0_nodes[k], cache.b_nodes[k]],
        );
        let (cot_x0, cot_b) = (&leaf_cots[0], &leaf_cots[1]);
        mu_grad_total += mu_grad_tape;
        // b = ah_d + mu z and the warm start x0 = z:
        mu_grad_total += cot_b.dot_real(&cache.z_stacks[k]);
        let mut cot_z = cot_b.scaled(cache.mu);
        cot_z.add_in_place(cot_x0);
        cot_x = denoise_stack_backward(params, &cache.denoise_caches[k], &cot_z, grads);
    }
    // mu = exp(nu)
    let nu_grad = Tensor::scalar(mu_grad_total * cache.mu);
    match grads.get_mut("mu.log") {
        Some(t) => t.add_in_place(&nu_grad),
        None => {
            grads.insert("mu.log".into(), nu_grad);
        }
    }
    cot_x
}

/// Forward-only refinement.
pub fn refine(params: &RefinementParams, x_in: &Tensor, ctx: &RefineContext<'_>) -> Result<Tensor> {
    Ok(refine_forward(params, x_in, ctx)?.output().clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use mdr_autodiff::{normal_tensor, rng_from, Dtype};
    use mdr_mri::{make_vd_mask, MaskConfig};

    fn uniform_sens(nc: usize, h: usize, w: usize) -> Tensor {
        let mut s = Tensor::zeros(&[nc, h, w], Dtype::Complex);
        let a = 1.0 / (nc as f64).sqrt();
        for i in 0..nc * h * w {
            s.c_set(i, a, 0.0);
        }
        s
    }

    #[test]
    fn identity_denoiser_small_mu_full_mask_recovers_adjoint() {
        let (nt, h, w) = (2, 16, 16);
        let x_true = normal_tensor(&[nt, h, w], Dtype::Complex, &mut rng_from(1));
        let sens = uniform_sens(1, h, w);
        let mask = SamplingMask::full(nt, w);
        let d = forward_op(&x_true, &sens, &mask).unwrap();
        let params = RefinementParams::init(2, 5, 1e-6, 2);
        let ctx = RefineContext {
            sens: &sens,
            theta: &mask,
            d_theta: &d,
            basis: None,
        };
        let x_in = Tensor::zeros(&[nt, h, w], Dtype::Complex);
        let out = refine(&params, &x_in, &ctx).unwrap();
        let adj = adjoint_op(&d, &sens, &mask).unwrap();
        let rel = out.sub(&adj).norm() / adj.norm();
        assert!(rel < 1e-5, "rel = {rel}");
    }

    #[test]
    fn zero_data_zero_init_gives_zero() {
        let (nt, h, w) = (2, 8, 8);
        let sens = uniform_sens(2, h, w);
        let mask = SamplingMask::full(nt, w);
        let d = Tensor::zeros(&[nt, 2, h, w], Dtype::Complex);
        let params = RefinementParams::init(3, 5, 0.05, 1);
        let ctx = RefineContext {
            sens: &sens,
            theta: &mask,
            d_theta: &d,
            basis: None,
        };
        let x_in = Tensor::zeros(&[nt, h, w], Dtype::Complex);
        let out = refine(&params, &x_in, &ctx).unwrap();
        assert_eq!(out.norm(), 0.0);
    }

    #[test]
    fn refine_gradients_match_finite_differences() {
        // loss = ||refine(x)||^2, K = 2 unrolls, 5 CG iterations
        let (nt, h, w) = (2, 8, 8);
        let mut rng = rng_from(3);
        let x_in = normal_tensor(&[nt, h, w], Dtype::Complex, &mut rng);
        let sens = {
            let mut t = normal_tensor(&[2, h, w], Dtype::Complex, &mut rng);
            t.scale_in_place(0.6);
            t
        };
        let mask = make_vd_mask(
            w,
            nt,
            &MaskConfig {
                af: 2.0,
                n_center: 2,
                ..Default::default()
            },
            5,
        )
        .unwrap();
        let x_probe = normal_tensor(&[nt, h, w], Dtype::Complex, &mut rng);
        let d = forward_op(&x_probe, &sens, &mask).unwrap();
        let mut params = RefinementParams::init(2, 5, 0.08, 7);
        {
            let wt = params.store.get_mut("dn.conv3.w").unwrap();
            let n = wt.data().len();
            let r = normal_tensor(&[n], Dtype::Real, &mut rng_from(8)).scaled(0.15);
            wt.data_mut().copy_from_slice(r.data());
        }
        let ctx = RefineContext {
            sens: &sens,
            theta: &mask,
            d_theta: &d,
            basis: None,
        };
        let loss = |p: &RefinementParams, xi: &Tensor| -> f64 {
            refine(p, xi, &ctx).unwrap().norm_sq()
        };
        let cache = refine_forward(&params, &x_in, &ctx).unwrap();
        let mut grads = GradStore::new();
        let cot = cache.output().scaled(2.0);
        let cot_in = refine_backward(&params, &cache, &cot, &mut grads);

        use rand::Rng;
        let mut prng = rng_from(9);
        let eps = 1e-5;
        for name in ["dn.conv1.w", "dn.conv2.w", "dn.conv3.w", "mu.log"] {
            let n = params.store.get(name).unwrap().data().len();
            for _ in 0..3.min(n) {
                let slot = prng.gen_range(0..n);
                let mut p2 = params.clone();
                let orig = p2.store.get(name).unwrap().data()[slot];
                p2.store.get_mut(name).unwrap().data_mut()[slot] = orig + eps;
                let lp = loss(&p2, &x_in);
                p2.store.get_mut(name).unwrap().data_mut()[slot] = orig - eps;
                let lm = loss(&p2, &x_in);
                let numeric = (lp - lm) / (2.0 * eps);
                let analytic = grads[name].data()[slot];
                assert!(
                    mdr_autodiff::rel_err(analytic, numeric) < 1e-3,
                    "{name}[{slot}]: analytic {analytic} vs numeric {numeric}"
                );
            }
        }
        // input gradient
        for slot in [0usize, 17, 100] {
            let mut xp = x_in.clone();
            xp.data_mut()[slot] += eps;
            let lp = loss(&params, &xp);
            xp.data_mut()[slot] = x_in.data()[slot] - eps;
            let lm = loss(&params, &xp);
            let numeric = (lp - lm) / (2.0 * eps);
            let analytic = cot_in.data()[slot];
            assert!(
                mdr_autodiff::rel_err(analytic, numeric) < 1e-3,
                "input[{slot}]: {analytic} vs {numeric}"
            );
        }
    }
}
