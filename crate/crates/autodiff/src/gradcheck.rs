//! Central finite-difference gradient checking.

use crate::error::{AdError, Result};
use crate::graph::{eval_loss_only, eval_with_gradients, GraphNode, LossReduction};
use crate::params::ParamStore;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct ParamReport {
    pub name: String,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub per_param: Vec<ParamReport>,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.per_param
            .iter()
            .map(|p| p.max_rel_err)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.per_param.iter().all(|p| p.max_rel_err <= self.tol)
    }

    pub fn flagged(&self) -> Vec<&ParamReport> {
        self.per_param
            .iter()
            .filter(|p| p.max_rel_err > self.tol)
            .collect()
    }
}

/// Relative error with an absolute floor so near-zero pairs do not blow up.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

/// Compare analytic gradients of the graph's quadratic head loss against
/// central finite differences for every parameter slot.
pub fn grad_check(
    graph: &[GraphNode],
    params: &ParamStore,
    inputs: &[Tensor],
    eps: f64,
    tol: f64,
) -> Result<GradCheckReport> {
    if !(1e-5..=1e-2).contains(&eps) {
        return Err(AdError::InvalidArg(format!(
            "finite-difference step {eps} outside [1e-5, 1e-2]"
        )));
    }
    let (_, grads, _) = eval_with_gradients(graph, params, inputs, LossReduction::Sum)?;
    let mut per_param = Vec::new();
    for name in params.names() {
        let analytic = grads
            .get(name)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(params.get(name).unwrap().shape(), params.get(name).unwrap().dtype()));
        let mut work = params.clone();
        let n_slots = analytic.data().len();
        let mut max_err: f64 = 0.0;
        for i in 0..n_slots {
            let orig = work.get(name)?.data()[i];
            work.get_mut(name)?.data_mut()[i] = orig + eps;
            let lp = eval_loss_only(graph, &work, inputs, LossReduction::Sum)?;
            work.get_mut(name)?.data_mut()[i] = orig - eps;
            let lm = eval_loss_only(graph, &work, inputs, LossReduction::Sum)?;
            work.get_mut(name)?.data_mut()[i] = orig;
            let numeric = (lp - lm) / (2.0 * eps);
            max_err = max_err.max(rel_err(analytic.data()[i], numeric));
        }
        per_param.push(ParamReport {
            name: name.clone(),
            max_rel_err: max_err,
        });
    }
    Ok(GradCheckReport { per_param, tol })
}

/// Generic scalar-function finite-difference probe: central differences of
/// `f` along slot `i` of a flat vector. Shared by the higher-level loss
/// checks, which perturb their own parameter stores.
pub fn central_diff<F: FnMut(&[f64]) -> f64>(x: &[f64], i: usize, eps: f64, mut f: F) -> f64 {
    let mut xp = x.to_vec();
    xp[i] += eps;
    let fp = f(&xp);
    xp[i] = x[i] - eps;
    let fm = f(&xp);
    (fp - fm) / (2.0 * eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::init_graph_params;
    use crate::layers::{LayerSpec, Nonlinearity};
    use crate::rng::{normal_tensor, rng_from};
    use crate::tensor::Dtype;

    #[test]
    fn affine_silu_toy_net_passes() {
        let graph = vec![
            GraphNode::new(
                LayerSpec::Affine {
                    in_dim: 6,
                    out_dim: 5,
                },
                "l0",
            ),
            GraphNode::new(LayerSpec::Activation(Nonlinearity::Silu), "l1"),
            GraphNode::new(
                LayerSpec::Affine {
                    in_dim: 5,
                    out_dim: 3,
                },
                "l2",
            ),
        ];
        let params = init_graph_params(&graph, 11);
        let x = normal_tensor(&[6], Dtype::Real, &mut rng_from(3));
        let report = grad_check(&graph, &params, &[x], 1e-3, 1e-4).unwrap();
        assert!(report.passed(), "max err {}", report.max_rel_err());
    }

    #[test]
    fn linear_graph_is_nearly_exact() {
        let graph = vec![GraphNode::new(
            LayerSpec::Affine {
                in_dim: 4,
                out_dim: 4,
            },
            "l0",
        )];
        let params = init_graph_params(&graph, 5);
        let x = normal_tensor(&[4], Dtype::Real, &mut rng_from(9));
        let report = grad_check(&graph, &params, &[x], 1e-3, 1e-4).unwrap();
        // quadratic loss of a linear map: central differences are exact up
        // to round-off
        assert!(report.max_rel_err() < 1e-9, "err {}", report.max_rel_err());
    }

    #[test]
    fn corrupted_backward_is_flagged() {
        // A deliberately wrong analytic gradient must exceed tolerance.
        let graph = vec![GraphNode::new(
            LayerSpec::Affine {
                in_dim: 3,
                out_dim: 3,
            },
            "l0",
        )];
        let params = init_graph_params(&graph, 2);
        let x = normal_tensor(&[3], Dtype::Real, &mut rng_from(4));
        let (_, grads, _) = eval_with_gradients(&graph, &params, &[x.clone()], LossReduction::Sum).unwrap();
        // corrupt: scale one analytic gradient by 2 and recompute the report
        // by hand using the same FD machinery
        let g = &grads["l0.w"];
        let corrupted = g.scaled(2.0);
        let mut work = params.clone();
        let mut max_err: f64 = 0.0;
        for i in 0..corrupted.data().len() {
            let orig = work.get("l0.w").unwrap().data()[i];
            work.get_mut("l0.w").unwrap().data_mut()[i] = orig + 1e-3;
            let lp = eval_loss_only(&graph, &work, &[x.clone()], LossReduction::Sum).unwrap();
            work.get_mut("l0.w").unwrap().data_mut()[i] = orig - 1e-3;
            let lm = eval_loss_only(&graph, &work, &[x.clone()], LossReduction::Sum).unwrap();
            work.get_mut("l0.w").unwrap().data_mut()[i] = orig;
            max_err = max_err.max(rel_err(corrupted.data()[i], (lp - lm) / 2e-3));
        }
        assert!(max_err > 1e-4, "corruption not flagged: {max_err}");
    }

    #[test]
    fn eps_outside_range_rejected() {
        let graph: Vec<GraphNode> = vec![];
        let x = Tensor::zeros(&[2], Dtype::Real);
        assert!(grad_check(&graph, &ParamStore::new(), &[x], 1e-6, 1e-4).is_err());
    }
}
