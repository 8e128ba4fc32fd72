//! Sequential layer graphs with a quadratic head loss.
//!
//! `eval_with_gradients` drives a forward pass through a chain of catalog
//! layers, forms `loss = 1/2 ||y||^2` (sum or mean reduction) on the final
//! activation and back-propagates to every parameter and every input. This
//! is the substrate the gradient checker exercises; the actual model
//! architectures compose the layer primitives directly.

use crate::error::{AdError, Result};
use crate::layers::*;
use crate::params::{GradStore, ParamStore};
use crate::rng::rng_from;
use crate::tensor::{Dtype, Tensor};
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossReduction {
    Sum,
    Mean,
}

/// One node of a sequential graph. `name` prefixes this node's parameters in
/// the store (`{name}.w`, `{name}.b`); `side_input` indexes the extra inputs
/// consumed by film/concat/scale-shift nodes.
#[derive(Debug, Clone)]
pub struct GraphNode {
    pub spec: LayerSpec,
    pub name: String,
    pub side_input: Option<usize>,
}

impl GraphNode {
    pub fn new(spec: LayerSpec, name: &str) -> Self {
        GraphNode {
            spec,
            name: name.to_string(),
            side_input: None,
        }
    }

    pub fn with_side(spec: LayerSpec, name: &str, side: usize) -> Self {
        GraphNode {
            spec,
            name: name.to_string(),
            side_input: Some(side),
        }
    }
}

/// Initialize parameters for every node: weights ~ N(0, 2/fan_in), biases 0.
pub fn init_graph_params(graph: &[GraphNode], seed: u64) -> ParamStore {
    let mut store = ParamStore::new();
    let mut rng = rng_from(seed);
    for node in graph {
        let fan_in = node.spec.fan_in().unwrap_or(1) as f64;
        let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("valid std");
        for (suffix, shape) in node.spec.param_shapes() {
            let t = if suffix == "b" {
                Tensor::zeros(&shape, Dtype::Real)
            } else {
                let n: usize = shape.iter().product();
                let data: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
                Tensor::from_vec(&shape, Dtype::Real, data).expect("consistent")
            };
            store.insert(&format!("{}.{}", node.name, suffix), t);
        }
    }
    store
}

struct NodeCache {
    input: Tensor,
    side: Option<Tensor>,
}

fn node_forward(
    layer_idx: usize,
    node: &GraphNode,
    params: &ParamStore,
    input: &Tensor,
    inputs: &[Tensor],
) -> Result<(Tensor, Option<Tensor>)> {
    let side = match node.side_input {
        Some(k) => Some(
            inputs
                .get(k)
                .ok_or_else(|| AdError::InvalidArg(format!("side input {k} missing")))?
                .clone(),
        ),
        None => {
            if node.spec.needs_side() {
                return Err(AdError::InvalidArg(format!(
                    "layer {layer_idx} ({:?}) requires a side input",
                    node.spec
                )));
            }
            None
        }
    };
    let out = match &node.spec {
        LayerSpec::Affine { .. } => {
            let w = params.get(&format!("{}.w", node.name))?;
            let b = params.get(&format!("{}.b", node.name))?;
            affine_forward(w, b, input)?
        }
        LayerSpec::Conv2d { .. } => {
            let w = params.get(&format!("{}.w", node.name))?;
            let b = params.get(&format!("{}.b", node.name))?;
            conv2d_forward(w, b, input)?
        }
        LayerSpec::Upsample2x => upsample2x_forward(input)?,
        LayerSpec::Downsample2x => downsample2x_forward(input)?,
        LayerSpec::Activation(k) => activation_forward(*k, input),
        LayerSpec::Film => film_forward(input, side.as_ref().unwrap())?,
        LayerSpec::GlobalAvgPool => gap_forward(input)?,
        LayerSpec::Concat => concat_forward(input, side.as_ref().unwrap())?,
        LayerSpec::ScaleShiftTime => scale_shift_forward(input, side.as_ref().unwrap())?,
    };
    if !out.is_finite() {
        return Err(AdError::NonFinite {
            layer: layer_idx,
            context: format!("{:?}", node.spec),
        });
    }
    Ok((out, side))
}

fn node_backward(
    node: &GraphNode,
    params: &ParamStore,
    cache: &NodeCache,
    cot: &Tensor,
    grads: &mut GradStore,
) -> Result<(Tensor, Option<Tensor>)> {
    let out = match &node.spec {
        LayerSpec::Affine { .. } => {
            let w = params.get(&format!("{}.w", node.name))?;
            let (dx, dw, db) = affine_backward(w, &cache.input, cot);
            grads.insert(format!("{}.w", node.name), dw);
            grads.insert(format!("{}.b", node.name), db);
            (dx, None)
        }
        LayerSpec::Conv2d { .. } => {
            let w = params.get(&format!("{}.w", node.name))?;
            let (dx, dw, db) = conv2d_backward(w, &cache.input, cot);
            grads.insert(format!("{}.w", node.name), dw);
            grads.insert(format!("{}.b", node.name), db);
            (dx, None)
        }
        LayerSpec::Upsample2x => (upsample2x_backward(cot), None),
        LayerSpec::Downsample2x => (downsample2x_backward(cot), None),
        LayerSpec::Activation(k) => (activation_backward(*k, &cache.input, cot), None),
        LayerSpec::Film => {
            let (dx, dgb) = film_backward(&cache.input, cache.side.as_ref().unwrap(), cot);
            (dx, Some(dgb))
        }
        LayerSpec::GlobalAvgPool => (gap_backward(cache.input.shape(), cot), None),
        LayerSpec::Concat => {
            let s = cache.input.shape();
            let (da, db) = concat_backward(s[0], s[1], s[2], cot);
            (da, Some(db))
        }
        LayerSpec::ScaleShiftTime => {
            let (dx, demb) = scale_shift_backward(&cache.input, cache.side.as_ref().unwrap(), cot);
            (dx, Some(demb))
        }
    };
    Ok(out)
}

/// Forward through the chain starting at `inputs[0]`, then loss and full
/// backward. Returns (loss, parameter gradients, per-input gradients).
pub fn eval_with_gradients(
    graph: &[GraphNode],
    params: &ParamStore,
    inputs: &[Tensor],
    reduction: LossReduction,
) -> Result<(f64, GradStore, Vec<Tensor>)> {
    if inputs.is_empty() {
        return Err(AdError::InvalidArg("at least one input required".into()));
    }
    let mut act = inputs[0].clone();
    let mut caches: Vec<NodeCache> = Vec::with_capacity(graph.len());
    for (i, node) in graph.iter().enumerate() {
        let (out, side) = node_forward(i, node, params, &act, inputs)?;
        caches.push(NodeCache { input: act, side });
        act = out;
    }

    let n = act.data().len() as f64;
    let loss = match reduction {
        LossReduction::Sum => 0.5 * act.norm_sq(),
        LossReduction::Mean => 0.5 * act.norm_sq() / n,
    };
    if !loss.is_finite() {
        return Err(AdError::NonFinite {
            layer: graph.len(),
            context: "loss head".into(),
        });
    }

    let mut cot = match reduction {
        LossReduction::Sum => act,
        LossReduction::Mean => act.scaled(1.0 / n),
    };
    let mut grads = GradStore::new();
    let mut input_grads: Vec<Tensor> = inputs
        .iter()
        .map(|t| Tensor::zeros(t.shape(), t.dtype()))
        .collect();
    for (i, node) in graph.iter().enumerate().rev() {
        let (dx, dside) = node_backward(node, params, &caches[i], &cot, &mut grads)?;
        if let (Some(ds), Some(k)) = (dside, node.side_input) {
            input_grads[k].add_in_place(&ds);
        }
        cot = dx;
    }
    input_grads[0].add_in_place(&cot);
    Ok((loss, grads, input_grads))
}

/// Forward-only evaluation of the loss (used by the finite-difference
/// checker so the numeric oracle never touches the backward path).
pub fn eval_loss_only(
    graph: &[GraphNode],
    params: &ParamStore,
    inputs: &[Tensor],
    reduction: LossReduction,
) -> Result<f64> {
    let mut act = inputs[0].clone();
    for (i, node) in graph.iter().enumerate() {
        let (out, _) = node_forward(i, node, params, &act, inputs)?;
        act = out;
    }
    let n = act.data().len() as f64;
    Ok(match reduction {
        LossReduction::Sum => 0.5 * act.norm_sq(),
        LossReduction::Mean => 0.5 * act.norm_sq() / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_hand_case() {
        // y = Wx + b, W = I2, b = 0, x = (1,2): loss = 2.5, dloss/db = (1,2)
        let graph = vec![GraphNode::new(
            LayerSpec::Affine {
                in_dim: 2,
                out_dim: 2,
            },
            "l0",
        )];
        let mut params = ParamStore::new();
        params.insert(
            "l0.w",
            Tensor::real_from(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap(),
        );
        params.insert("l0.b", Tensor::zeros(&[2], Dtype::Real));
        let x = Tensor::real_from(&[2], vec![1.0, 2.0]).unwrap();
        let (loss, grads, input_grads) =
            eval_with_gradients(&graph, &params, &[x], LossReduction::Sum).unwrap();
        assert_eq!(loss, 2.5);
        assert_eq!(grads["l0.b"].data(), &[1.0, 2.0]);
        assert_eq!(input_grads[0].data(), &[1.0, 2.0]);
    }

    #[test]
    fn empty_graph_zero_input() {
        let x = Tensor::zeros(&[3], Dtype::Real);
        let (loss, grads, input_grads) =
            eval_with_gradients(&[], &ParamStore::new(), &[x], LossReduction::Sum).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.is_empty());
        assert!(input_grads[0].data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_mismatch_names_layer() {
        let graph = vec![
            GraphNode::new(
                LayerSpec::Affine {
                    in_dim: 2,
                    out_dim: 2,
                },
                "l0",
            ),
            GraphNode::new(
                LayerSpec::Affine {
                    in_dim: 3,
                    out_dim: 2,
                },
                "l1",
            ),
        ];
        let params = init_graph_params(&graph, 1);
        let x = Tensor::real_from(&[2], vec![1.0, 2.0]).unwrap();
        let err = eval_with_gradients(&graph, &params, &[x], LossReduction::Sum).unwrap_err();
        assert!(err.to_string().contains('3'), "err = {err}");
    }
}
