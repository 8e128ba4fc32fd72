//! Image-transfer training loss and its gradients.

use rayon::prelude::*;

use mdr_autodiff::{GradStore, ParamStore, Tensor};

use crate::arch::RepModel;
use crate::nets::{
    contrast_backward, contrast_forward, decode_backward, decode_forward, geom_backward,
    geom_forward,
};
use crate::Result;

/// One training example as 2-channel real tensors.
#[derive(Debug, Clone)]
pub struct TripletTensors {
    /// X_{gi,ci}: provides the geometry latent.
    pub geom_source: Tensor,
    /// X_{gj,cj}: provides the contrast latent.
    pub contrast_source: Tensor,
    /// X_{gi,cj}: the cross-composition target.
    pub target: Tensor,
}

/// Forward-only transfer loss of a single triplet:
/// ||X_target - D(E_g(X1), E_c(X2))||_F^2 + lambda_z (||z_g||^2 + ||z_c||^2).
///
/// The finite-difference oracles perturb parameters and call this, so it
/// must never touch the backward path.
pub fn transfer_loss(model: &RepModel, trip: &TripletTensors, lambda_z: f64) -> Result<f64> {
    let (loss, _, _, _) = forward_triplet(&model.params, model, trip, lambda_z)?;
    Ok(loss)
}

type ForwardState = (
    f64,
    (Tensor, crate::nets::GeomCache),
    (crate::arch::ContrastLatent, crate::nets::ContrastCache),
    (Tensor, crate::nets::DecodeCache),
);

fn forward_triplet(
    params: &ParamStore,
    model: &RepModel,
    trip: &TripletTensors,
    lambda_z: f64,
) -> Result<ForwardState> {
    let (zg_raw, gcache) = geom_forward(params, &trip.geom_source)?;
    let zg = std_apply(&zg_raw, model);
    let (zc, ccache) = contrast_forward(params, &trip.contrast_source)?;
    // decoder consumes the de-standardized latent, i.e. the raw one
    let (xhat, dcache) = decode_forward(params, &zg_raw, &zc)?;
    let resid = xhat.sub(&trip.target);
    let loss = resid.norm_sq() + lambda_z * (zg.norm_sq() + zc.norm_sq());
    Ok((loss, (zg, gcache), (zc, ccache), (resid, dcache)))
}

fn std_apply(raw: &Tensor, model: &RepModel) -> Tensor {
    crate::nets::standardize(raw, model)
}

/// Batch-averaged transfer loss and parameter gradients. Per-element work
/// runs in parallel; gradients reduce in batch order, so the result is
/// deterministic.
pub fn transfer_loss_batch(
    model: &RepModel,
    batch: &[TripletTensors],
    lambda_z: f64,
) -> Result<(f64, GradStore)> {
    let results: Vec<Result<(f64, GradStore)>> = batch
        .par_iter()
        .map(|trip| {
            let (loss, (zg, gcache), (zc, ccache), (resid, dcache)) =
                forward_triplet(&model.params, model, trip, lambda_z)?;
            let mut grads = GradStore::new();
            let cot_xhat = resid.scaled(2.0);
            let (cot_zin, mut cot_zc) =
                decode_backward(&model.params, &dcache, &cot_xhat, &mut grads);
            // z_in = sigma*z + mu and z = (raw - mu)/sigma: the chain through
            // both is the identity on the decoder path; the regularizer pulls
            // on the standardized latent.
            let mut cot_raw = cot_zin;
            let (c_n, hw) = (zg.shape()[0], zg.shape()[1] * zg.shape()[2]);
            for c in 0..c_n {
                let sd = model.latent_std.data()[c];
                for i in c * hw..(c + 1) * hw {
                    cot_raw.data_mut()[i] += 2.0 * lambda_z * zg.data()[i] / sd;
                }
            }
            geom_backward(&model.params, &gcache, &cot_raw, &mut grads);
            for lv in 0..cot_zc.levels.len() {
                cot_zc.levels[lv].axpy_in_place(2.0 * lambda_z, &zc.levels[lv]);
            }
            contrast_backward(&model.params, &ccache, &cot_zc, &mut grads);
            Ok((loss, grads))
        })
        .collect();

    let mut total = 0.0;
    let mut grads = GradStore::new();
    for r in results {
        let (loss, g) = r?;
        total += loss;
        mdr_autodiff::grad_accumulate(&mut grads, &g);
    }
    let inv = 1.0 / batch.len() as f64;
    mdr_autodiff::grad_scale(&mut grads, inv);
    Ok((total * inv, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::RepArchitecture;
    use crate::nets::{channels_to_complex, complex_to_channels};
    use mdr_autodiff::{normal_tensor, rel_err, rng_from, Dtype};
    use rand::Rng;

    fn random_triplet(seed: u64) -> TripletTensors {
        let mut rng = rng_from(seed);
        TripletTensors {
            geom_source: normal_tensor(&[2, 32, 32], Dtype::Real, &mut rng),
            contrast_source: normal_tensor(&[2, 32, 32], Dtype::Real, &mut rng),
            target: normal_tensor(&[2, 32, 32], Dtype::Real, &mut rng),
        }
    }

    #[test]
    fn untrained_net_nonzero_target_positive_loss() {
        let model = RepModel::init(&RepArchitecture::default(), 1);
        let l = transfer_loss(&model, &random_triplet(2), 1e-4).unwrap();
        assert!(l > 0.0);
    }

    #[test]
    fn exact_decoder_output_gives_zero_loss() {
        let model = RepModel::init(&RepArchitecture::default(), 1);
        let mut trip = random_triplet(3);
        // target := current decoder output; with lambda_z = 0 the loss is 0
        let zg = crate::nets::encode_geometry(
            &channels_to_complex(&trip.geom_source),
            &model,
        )
        .unwrap();
        let zc = crate::nets::encode_contrast(
            &channels_to_complex(&trip.contrast_source),
            &model,
        )
        .unwrap();
        let out = crate::nets::decode(&zg, &zc, &model).unwrap();
        trip.target = complex_to_channels(&out);
        let l = transfer_loss(&model, &trip, 0.0).unwrap();
        assert!(l < 1e-18, "loss = {l}");
    }

    #[test]
    fn gradients_match_finite_differences() {
        let model = RepModel::init(&RepArchitecture::default(), 7);
        let trip = random_triplet(8);
        let lambda_z = 1e-4;
        let (_, grads) = transfer_loss_batch(&model, &[trip.clone()], lambda_z).unwrap();
        let mut rng = rng_from(99);
        let names: Vec<String> = model.params.names().cloned().collect();
        let eps = 1e-4;
        // probe a handful of random slots in every third parameter tensor
        for name in names.iter().step_by(3) {
            let n = model.params.get(name).unwrap().data().len();
            for _ in 0..3 {
                let slot = rng.gen_range(0..n);
                let mut pert = model.clone();
                let orig = pert.params.get(name).unwrap().data()[slot];
                pert.params.get_mut(name).unwrap().data_mut()[slot] = orig + eps;
                let lp = transfer_loss(&pert, &trip, lambda_z).unwrap();
                pert.params.get_mut(name).unwrap().data_mut()[slot] = orig - eps;
                let lm = transfer_loss(&pert, &trip, lambda_z).unwrap();
                let numeric = (lp - lm) / (2.0 * eps);
                let analytic = grads[name].data()[slot];
                let e = rel_err(analytic, numeric);
                assert!(
                    e < 1e-4,
                    "{name}[{slot}]: analytic {analytic} vs numeric {numeric} ({e})"
                );
            }
        }
    }

    #[test]
    fn batch_loss_is_mean_of_singles() {
        let model = RepModel::init(&RepArchitecture::default(), 5);
        let trips = vec![random_triplet(1), random_triplet(2), random_triplet(3)];
        let (lb, _) = transfer_loss_batch(&model, &trips, 1e-4).unwrap();
        let sum: f64 = trips
            .iter()
            .map(|t| transfer_loss(&model, t, 1e-4).unwrap())
            .sum();
        assert!((lb - sum / 3.0).abs() < 1e-9 * sum.abs().max(1.0));
    }
}
