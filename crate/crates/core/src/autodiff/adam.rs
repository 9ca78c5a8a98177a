use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{Graph, Tensor, Var};
use crate::error::{Error, Result};

/// Named model parameters in a stable insertion order.
///
/// The order fixes the Adam update sequence and the checkpoint layout, so
/// two runs that build the same model walk parameters identically.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ParamSet {
    entries: IndexMap<String, Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, mut tensor: Tensor) {
        let name = name.into();
        tensor.set_requires_grad(true);
        let prev = self.entries.insert(name.clone(), tensor);
        assert!(prev.is_none(), "duplicate parameter `{name}`");
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries.get_mut(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn value_count(&self) -> usize {
        self.entries.values().map(Tensor::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.entries.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.entries.iter_mut()
    }

    /// Swaps an existing parameter's tensor, keeping its position.
    pub fn replace(&mut self, name: &str, tensor: Tensor) {
        assert!(self.entries.contains_key(name), "unknown parameter `{name}`");
        self.entries[name] = tensor;
    }

    /// Removes a parameter, preserving the order of the rest.
    pub fn remove(&mut self, name: &str) -> Option<Tensor> {
        self.entries.shift_remove(name)
    }

    /// Mount every parameter on a fresh tape, keyed by name.
    pub fn leaf_map(&self, g: &mut Graph) -> IndexMap<String, Var> {
        self.entries
            .iter()
            .map(|(name, t)| (name.clone(), g.leaf(t)))
            .collect()
    }

    /// Pull leaf gradients off a finished tape into each parameter's grad
    /// slot. Parameters absent from the map (or unreached by backward) get
    /// `None`.
    pub fn import_grads(&mut self, g: &Graph, vars: &IndexMap<String, Var>) {
        for (name, tensor) in self.entries.iter_mut() {
            let grad = vars
                .get(name)
                .and_then(|&v| g.grad(v))
                .map(|slice| slice.to_vec());
            tensor.set_grad(grad);
        }
    }

    pub fn clear_grads(&mut self) {
        for tensor in self.entries.values_mut() {
            tensor.set_grad(None);
        }
    }
}

/// Adam optimizer state: first/second moments per parameter plus the step
/// counter used for bias correction.
#[derive(Debug, Clone)]
pub struct AdamState {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    t: u64,
    m: IndexMap<String, Vec<f64>>,
    v: IndexMap<String, Vec<f64>>,
}

impl AdamState {
    pub fn new(learning_rate: f64) -> Self {
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m: IndexMap::new(),
            v: IndexMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One bias-corrected Adam update over every parameter with a gradient.
    /// Gradients are consumed. A non-finite gradient aborts, naming the
    /// parameter.
    pub fn step(&mut self, params: &mut ParamSet) -> Result<()> {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);

        for (name, tensor) in params.entries.iter_mut() {
            let Some(grad) = tensor.take_grad() else {
                continue;
            };
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NanGradient(name.clone()));
            }
            let n = tensor.len();
            let m = self.m.entry(name.clone()).or_insert_with(|| vec![0.0; n]);
            let v = self.v.entry(name.clone()).or_insert_with(|| vec![0.0; n]);
            let data = tensor.data_mut();
            for i in 0..n {
                let g = grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                data[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}
