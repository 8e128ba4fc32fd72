//! Differentiable conjugate-gradient solve.
//!
//! The fixed-iteration CG inside the refinement blocks must be
//! differentiated as the computation it actually is (truncated CG is not the
//! exact inverse, so implicit differentiation would disagree with finite
//! differences). A small Wengert list records the iterations; the normal
//! operator is self-adjoint as a real-linear map, so its reverse rule is
//! itself, with the mu-dependence contributing <cot, v> per application.

use mdr_autodiff::Tensor;

use crate::{ReconError, Result};

enum Op {
    /// Leaf vector (inputs x0, b).
    Leaf,
    /// u = normal(v) + mu * v
    ApplyM { v: usize },
    /// w = y + s * x with a scalar node s (s_sign multiplies s)
    ScaleAdd {
        y: usize,
        s: usize,
        x: usize,
        s_sign: f64,
    },
    /// w = a - b
    Sub { a: usize, b: usize },
    /// scalar = <a, b> over the raw real storage
    Dot { a: usize, b: usize },
    /// scalar = a / b
    Div { a: usize, b: usize },
}

enum Value {
    Vec(Tensor),
    Scalar(f64),
}

impl Value {
    fn vec(&self) -> &Tensor {
        match self {
            Value::Vec(t) => t,
            _ => panic!("expected vector node"),
        }
    }

    fn scalar(&self) -> f64 {
        match self {
            Value::Scalar(s) => *s,
            _ => panic!("expected scalar node"),
        }
    }
}

pub struct CgTape<'a> {
    ops: Vec<Op>,
    values: Vec<Value>,
    /// Self-adjoint part of M without the mu * I term.
    normal: Box<dyn Fn(&Tensor) -> Tensor + 'a>,
    mu: f64,
}

impl<'a> CgTape<'a> {
    pub fn new(normal: Box<dyn Fn(&Tensor) -> Tensor + 'a>, mu: f64) -> Self {
        CgTape {
            ops: Vec::new(),
            values: Vec::new(),
            normal,
            mu,
        }
    }

    fn push(&mut self, op: Op, value: Value) -> usize {
        self.ops.push(op);
        self.values.push(value);
        self.values.len() - 1
    }

    pub fn leaf(&mut self, t: Tensor) -> usize {
        self.push(Op::Leaf, Value::Vec(t))
    }

    fn apply_m(&mut self, v: usize) -> usize {
        let mut u = (self.normal)(self.values[v].vec());
        u.axpy_in_place(self.mu, self.values[v].vec());
        self.push(Op::ApplyM { v }, Value::Vec(u))
    }

    fn scale_add(&mut self, y: usize, s: usize, x: usize, s_sign: f64) -> usize {
        let mut w = self.values[y].vec().clone();
        let sv = s_sign * self.values[s].scalar();
        w.axpy_in_place(sv, self.values[x].vec());
        self.push(Op::ScaleAdd { y, s, x, s_sign }, Value::Vec(w))
    }

    fn sub(&mut self, a: usize, b: usize) -> usize {
        let w = self.values[a].vec().sub(self.values[b].vec());
        self.push(Op::Sub { a, b }, Value::Vec(w))
    }

    fn dot(&mut self, a: usize, b: usize) -> usize {
        let s = self.values[a].vec().dot_real(self.values[b].vec());
        self.push(Op::Dot { a, b }, Value::Scalar(s))
    }

    fn div(&mut self, a: usize, b: usize) -> usize {
        let s = self.values[a].scalar() / self.values[b].scalar();
        self.push(Op::Div { a, b }, Value::Scalar(s))
    }

    pub fn value(&self, node: usize) -> &Tensor {
        self.values[node].vec()
    }

    /// Run `iters` CG iterations on (normal + mu I) x = b, warm-started at
    /// x0. Returns the output node id.
    pub fn cg_solve(&mut self, x0: usize, b: usize, iters: usize) -> Result<usize> {
        let mx0 = self.apply_m(x0);
        let mut r = self.sub(b, mx0);
        let mut x = x0;
        let mut p = r;
        let mut rs = self.dot(r, r);
        let scale = self.values[b].vec().norm_sq().max(
            self.values[x0].vec().norm_sq(),
        );
        for it in 0..iters {
            if self.values[rs].scalar() <= 1e-28 * scale.max(1e-300) {
                break; // converged; remaining iterations are no-ops
            }
            let mp = self.apply_m(p);
            let pmp = self.dot(p, mp);
            if self.values[pmp].scalar() <= 0.0 {
                return Err(ReconError::CgBreakdown(it));
            }
            let alpha = self.div(rs, pmp);
            x = self.scale_add(x, alpha, p, 1.0);
            r = self.scale_add(r, alpha, mp, -1.0);
            let rs_new = self.dot(r, r);
            let beta = self.div(rs_new, rs);
            p = self.scale_add(r, beta, p, 1.0);
            rs = rs_new;
        }
        Ok(x)
    }

    /// Reverse sweep. Seeds node `output` with `cot_out`; returns the
    /// cotangents of the requested leaves and the accumulated gradient of
    /// the loss with respect to mu.
    pub fn backward(
        &self,
        output: usize,
        cot_out: &Tensor,
        leaves: &[usize],
    ) -> (Vec<Tensor>, f64) {
        let n = self.ops.len();
        let mut vec_cot: Vec<Option<Tensor>> = (0..n).map(|_| None).collect();
        let mut sca_cot = vec![0.0f64; n];
        let mut mu_grad = 0.0;
        vec_cot[output] = Some(cot_out.clone());
        for i in (0..n).rev() {
            match &self.ops[i] {
                Op::Leaf => {}
                Op::ApplyM { v } => {
                    if let Some(cu) = vec_cot[i].clone() {
                        // d(normal(v) + mu v)/dv is self-adjoint; d/dmu = v
                        let mut cv = (self.normal)(&cu);
                        cv.axpy_in_place(self.mu, &cu);
                        mu_grad += cu.dot_real(self.values[*v].vec());
                        add_cot(&mut vec_cot, *v, cv);
                    }
                }
                Op::ScaleAdd { y, s, x, s_sign } => {
                    if let Some(cw) = vec_cot[i].clone() {
                        let sv = s_sign * self.values[*s].scalar();
                        sca_cot[*s] += s_sign * cw.dot_real(self.values[*x].vec());
                        add_cot(&mut vec_cot, *x, cw.scaled(sv));
                        add_cot(&mut vec_cot, *y, cw);
                    }
                }
                Op::Sub { a, b } => {
                    if let Some(cw) = vec_cot[i].clone() {
                        add_cot(&mut vec_cot, *b, cw.scaled(-1.0));
                        add_cot(&mut vec_cot, *a, cw);
                    }
                }
                Op::Dot { a, b } => {
                    let cs = sca_cot[i];
                    if cs != 0.0 {
                        add_cot(&mut vec_cot, *a, self.values[*b].vec().scaled(cs));
                        add_cot(&mut vec_cot, *b, self.values[*a].vec().scaled(cs));
                    }
                }
                Op::Div { a, b } => {
                    let cs = sca_cot[i];
                    if cs != 0.0 {
                        let av = self.values[*a].scalar();
                        let bv = self.values[*b].scalar();
                        sca_cot[*a] += cs / bv;
                        sca_cot[*b] -= cs * av / (bv * bv);
                    }
                }
            }
        }
        let leaf_cots = leaves
            .iter()
            .map(|&l| {
                vec_cot[l]
                    .clone()
                    .unwrap_or_else(|| Tensor::zeros(self.values[l].vec().shape(), self.values[l].vec().dtype()))
            })
            .collect();
        (leaf_cots, mu_grad)
    }
}

fn add_cot(cots: &mut [Option<Tensor>], i: usize, g: Tensor) {
    match &mut cots[i] {
        Some(t) => t.add_in_place(&g),
        slot @ None => *slot = Some(g),
    }
}
