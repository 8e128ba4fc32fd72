//! Named parameter storage with Adam state.

use std::collections::BTreeMap;

use crate::error::{AdError, Result};
use crate::tensor::Tensor;

/// Gradients shaped like a parameter store: name -> tensor.
pub type GradStore = BTreeMap<String, Tensor>;

/// Accumulate `src` into `dst`, creating entries as needed.
pub fn grad_accumulate(dst: &mut GradStore, src: &GradStore) {
    for (k, v) in src {
        match dst.get_mut(k) {
            Some(t) => t.add_in_place(v),
            None => {
                dst.insert(k.clone(), v.clone());
            }
        }
    }
}

pub fn grad_scale(grads: &mut GradStore, a: f64) {
    for t in grads.values_mut() {
        t.scale_in_place(a);
    }
}

/// Trainable parameters plus Adam first/second moment accumulators.
///
/// Iteration order is the BTreeMap name order, so updates are deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    params: BTreeMap<String, Tensor>,
    m: BTreeMap<String, Tensor>,
    v: BTreeMap<String, Tensor>,
    step: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore {
            params: BTreeMap::new(),
            m: BTreeMap::new(),
            v: BTreeMap::new(),
            step: 0,
        }
    }

    pub fn insert(&mut self, name: &str, t: Tensor) {
        self.m.insert(name.to_string(), Tensor::zeros(t.shape(), t.dtype()));
        self.v.insert(name.to_string(), Tensor::zeros(t.shape(), t.dtype()));
        self.params.insert(name.to_string(), t);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.params
            .get(name)
            .ok_or_else(|| AdError::UnknownParam(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.params
            .get_mut(name)
            .ok_or_else(|| AdError::UnknownParam(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.params.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.params.iter()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Zero-filled gradient store with this store's layout.
    pub fn zero_grads(&self) -> GradStore {
        self.params
            .iter()
            .map(|(k, t)| (k.clone(), Tensor::zeros(t.shape(), t.dtype())))
            .collect()
    }

    /// Merge another store under a name prefix (`prefix.name`). Adam state is
    /// carried over.
    pub fn merge_prefixed(&mut self, prefix: &str, other: &ParamStore) {
        for (k, t) in &other.params {
            let name = format!("{prefix}.{k}");
            self.m.insert(name.clone(), other.m[k].clone());
            self.v.insert(name.clone(), other.v[k].clone());
            self.params.insert(name, t.clone());
        }
    }

    /// Bias-corrected Adam update. Entries of `grads` must match parameter
    /// names and shapes; parameters without a gradient entry are left
    /// untouched. The step counter increments by exactly one.
    pub fn adam_step(&mut self, grads: &GradStore, cfg: &AdamConfig) -> Result<()> {
        if cfg.lr <= 0.0 {
            return Err(AdError::InvalidArg(format!(
                "learning rate must be positive, got {}",
                cfg.lr
            )));
        }
        for name in grads.keys() {
            if !self.params.contains_key(name) {
                return Err(AdError::UnknownParam(name.clone()));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for (name, p) in self.params.iter_mut() {
            let Some(g) = grads.get(name) else { continue };
            if !p.same_layout(g) {
                return Err(AdError::ParamShape {
                    name: name.clone(),
                    expected: format!("{:?}", p.shape()),
                    got: format!("{:?}", g.shape()),
                });
            }
            if !g.is_finite() {
                return Err(AdError::NonFiniteGrad(name.clone()));
            }
            let m = self.m.get_mut(name).unwrap();
            let v = self.v.get_mut(name).unwrap();
            let (pd, md, vd, gd) = (
                p.data_mut(),
                m.data_mut(),
                v.data_mut(),
                g.data(),
            );
            for i in 0..pd.len() {
                md[i] = cfg.beta1 * md[i] + (1.0 - cfg.beta1) * gd[i];
                vd[i] = cfg.beta2 * vd[i] + (1.0 - cfg.beta2) * gd[i] * gd[i];
                let mhat = md[i] / bc1;
                let vhat = vd[i] / bc2;
                pd[i] -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
            }
        }
        Ok(())
    }

    /// Flat list of (name, tensor) pairs, for serialization.
    pub fn entries(&self) -> Vec<(String, Tensor)> {
        self.params
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    /// Rebuild from (name, tensor) pairs with fresh optimizer state.
    pub fn from_entries(entries: Vec<(String, Tensor)>) -> Self {
        let mut s = ParamStore::new();
        for (name, t) in entries {
            s.insert(&name, t);
        }
        s
    }
}
