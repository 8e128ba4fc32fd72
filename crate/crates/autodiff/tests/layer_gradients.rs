//! Finite-difference validation of every layer kind in the catalog, for both
//! parameter and input gradients, on random 8x8 feature maps.

use mdr_autodiff::{
    eval_loss_only, eval_with_gradients, grad_check, init_graph_params, normal_tensor, rel_err,
    rng_from, Dtype, GraphNode, LayerSpec, LossReduction, Nonlinearity, ParamStore, Tensor,
};

fn fd_check_inputs(
    graph: &[GraphNode],
    params: &ParamStore,
    inputs: &[Tensor],
    eps: f64,
    tol: f64,
) {
    let (_, _, input_grads) =
        eval_with_gradients(graph, params, inputs, LossReduction::Sum).unwrap();
    for (k, input) in inputs.iter().enumerate() {
        for i in 0..input.data().len() {
            let mut pert = inputs.to_vec();
            pert[k].data_mut()[i] += eps;
            let lp = eval_loss_only(graph, params, &pert, LossReduction::Sum).unwrap();
            pert[k].data_mut()[i] = input.data()[i] - eps;
            let lm = eval_loss_only(graph, params, &pert, LossReduction::Sum).unwrap();
            let numeric = (lp - lm) / (2.0 * eps);
            let analytic = input_grads[k].data()[i];
            let e = rel_err(analytic, numeric);
            assert!(
                e <= tol,
                "input {k} slot {i}: analytic {analytic} vs numeric {numeric} (err {e})"
            );
        }
    }
}

fn run_kind(graph: Vec<GraphNode>, inputs: Vec<Tensor>, seed: u64) {
    let params = init_graph_params(&graph, seed);
    let report = grad_check(&graph, &params, &inputs, 1e-3, 1e-4).unwrap();
    assert!(
        report.passed(),
        "param gradients failed: {:?}",
        report.flagged()
    );
    fd_check_inputs(&graph, &params, &inputs, 1e-3, 1e-4);
}

#[test]
fn affine_gradients() {
    let x = normal_tensor(&[8], Dtype::Real, &mut rng_from(10));
    run_kind(
        vec![GraphNode::new(
            LayerSpec::Affine {
                in_dim: 8,
                out_dim: 5,
            },
            "l0",
        )],
        vec![x],
        1,
    );
}

#[test]
fn conv2d_gradients() {
    let x = normal_tensor(&[2, 8, 8], Dtype::Real, &mut rng_from(11));
    run_kind(
        vec![GraphNode::new(
            LayerSpec::Conv2d {
                in_ch: 2,
                out_ch: 3,
            },
            "l0",
        )],
        vec![x],
        2,
    );
}

#[test]
fn upsample_gradients() {
    let x = normal_tensor(&[2, 8, 8], Dtype::Real, &mut rng_from(12));
    run_kind(vec![GraphNode::new(LayerSpec::Upsample2x, "l0")], vec![x], 3);
}

#[test]
fn downsample_gradients() {
    let x = normal_tensor(&[2, 8, 8], Dtype::Real, &mut rng_from(13));
    run_kind(
        vec![GraphNode::new(LayerSpec::Downsample2x, "l0")],
        vec![x],
        4,
    );
}

#[test]
fn silu_gradients() {
    let x = normal_tensor(&[2, 8, 8], Dtype::Real, &mut rng_from(14));
    run_kind(
        vec![GraphNode::new(
            LayerSpec::Activation(Nonlinearity::Silu),
            "l0",
        )],
        vec![x],
        5,
    );
}

#[test]
fn relu_gradients() {
    let x = normal_tensor(&[2, 8, 8], Dtype::Real, &mut rng_from(15));
    run_kind(
        vec![GraphNode::new(
            LayerSpec::Activation(Nonlinearity::Relu),
            "l0",
        )],
        vec![x],
        6,
    );
}

#[test]
fn film_gradients() {
    let x = normal_tensor(&[3, 8, 8], Dtype::Real, &mut rng_from(16));
    let gb = normal_tensor(&[6], Dtype::Real, &mut rng_from(17));
    run_kind(
        vec![GraphNode::with_side(LayerSpec::Film, "l0", 1)],
        vec![x, gb],
        7,
    );
}

#[test]
fn gap_gradients() {
    let x = normal_tensor(&[3, 8, 8], Dtype::Real, &mut rng_from(18));
    run_kind(
        vec![GraphNode::new(LayerSpec::GlobalAvgPool, "l0")],
        vec![x],
        8,
    );
}

#[test]
fn concat_gradients() {
    let x = normal_tensor(&[2, 8, 8], Dtype::Real, &mut rng_from(19));
    let side = normal_tensor(&[3, 8, 8], Dtype::Real, &mut rng_from(20));
    run_kind(
        vec![
            GraphNode::with_side(LayerSpec::Concat, "l0", 1),
            GraphNode::new(
                LayerSpec::Conv2d {
                    in_ch: 5,
                    out_ch: 2,
                },
                "l1",
            ),
        ],
        vec![x, side],
        9,
    );
}

#[test]
fn scale_shift_gradients() {
    let x = normal_tensor(&[3, 8, 8], Dtype::Real, &mut rng_from(21));
    let emb = normal_tensor(&[6], Dtype::Real, &mut rng_from(22));
    run_kind(
        vec![GraphNode::with_side(LayerSpec::ScaleShiftTime, "l0", 1)],
        vec![x, emb],
        23,
    );
}

#[test]
fn three_layer_random_graph_gradients() {
    // conv -> silu -> downsample at the spec's eps = 1e-3
    let x = normal_tensor(&[2, 8, 8], Dtype::Real, &mut rng_from(30));
    run_kind(
        vec![
            GraphNode::new(
                LayerSpec::Conv2d {
                    in_ch: 2,
                    out_ch: 4,
                },
                "l0",
            ),
            GraphNode::new(LayerSpec::Activation(Nonlinearity::Silu), "l1"),
            GraphNode::new(LayerSpec::Downsample2x, "l2"),
        ],
        vec![x],
        32,
    );
}

#[test]
fn film_composite_graph_gradients() {
    // conv -> silu -> downsample -> film; the random FiLM gains raise the
    // curvature, so probe with a smaller step.
    let x = normal_tensor(&[2, 8, 8], Dtype::Real, &mut rng_from(30));
    let gb = normal_tensor(&[8], Dtype::Real, &mut rng_from(31));
    let graph = vec![
        GraphNode::new(
            LayerSpec::Conv2d {
                in_ch: 2,
                out_ch: 4,
            },
            "l0",
        ),
        GraphNode::new(LayerSpec::Activation(Nonlinearity::Silu), "l1"),
        GraphNode::new(LayerSpec::Downsample2x, "l2"),
        GraphNode::with_side(LayerSpec::Film, "l3", 1),
    ];
    let params = init_graph_params(&graph, 32);
    let report = grad_check(&graph, &params, &[x.clone(), gb.clone()], 2e-4, 1e-4).unwrap();
    assert!(
        report.passed(),
        "param gradients failed: {:?}",
        report.flagged()
    );
    fd_check_inputs(&graph, &params, &[x, gb], 2e-4, 1e-4);
}

#[test]
fn film_unit_gain_identity_and_gradient_structure() {
    // gamma = 1, beta = 0 is the identity map; d out/d gamma = F_dec and
    // d out/d beta = 1, verified numerically through the graph head.
    let x = normal_tensor(&[2, 8, 8], Dtype::Real, &mut rng_from(40));
    let mut gb = Tensor::zeros(&[4], Dtype::Real);
    gb.data_mut()[0] = 1.0;
    gb.data_mut()[1] = 1.0;
    let graph = vec![GraphNode::with_side(LayerSpec::Film, "l0", 1)];
    let params = ParamStore::new();
    let (loss, _, input_grads) =
        eval_with_gradients(&graph, &params, &[x.clone(), gb.clone()], LossReduction::Sum).unwrap();
    assert!((loss - 0.5 * x.norm_sq()).abs() < 1e-12, "identity map");
    // with loss = 1/2 ||y||^2 and y = x: d loss/d gamma_c = sum_i x_i * x_i,
    // d loss/d beta_c = sum_i x_i
    for c in 0..2 {
        let plane = &x.data()[c * 64..(c + 1) * 64];
        let expect_gamma: f64 = plane.iter().map(|v| v * v).sum();
        let expect_beta: f64 = plane.iter().sum();
        assert!(rel_err(input_grads[1].data()[c], expect_gamma) < 1e-10);
        assert!(rel_err(input_grads[1].data()[2 + c], expect_beta) < 1e-10);
    }
    fd_check_inputs(&graph, &params, &[x, gb], 1e-3, 1e-4);
}
