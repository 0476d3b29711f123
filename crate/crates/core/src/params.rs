//! Named, ordered parameter storage.

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Var};
use crate::tensor::Tensor;

/// All learned tensors of a model, keyed by unique name in insertion order.
///
/// Shapes are fixed at creation; [`ParamStore::set`] only accepts a tensor
/// of the registered shape.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParamStore {
    seed: u64,
    params: IndexMap<String, Tensor>,
    #[serde(skip, default = "default_rng")]
    rng: ChaCha8Rng,
}

impl PartialEq for ParamStore {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed && self.params == other.params
    }
}

fn default_rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

impl ParamStore {
    pub fn new(seed: u64) -> Self {
        ParamStore {
            seed,
            params: IndexMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Adds a tensor and returns its position in store order.
    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<usize> {
        let name = name.into();
        if self.params.contains_key(&name) {
            return Err(Error::contract(format!("duplicate parameter name `{name}`")));
        }
        Ok(self.params.insert_full(name, value).0)
    }

    /// Registers a weight drawn uniformly from `[-bound, bound]`.
    pub fn uniform(&mut self, name: impl Into<String>, shape: &[usize], bound: f64) -> Result<usize> {
        let n = shape.iter().product();
        let data = (0..n).map(|_| self.rng.gen_range(-bound..=bound)).collect();
        self.insert(name, Tensor::new(shape.to_vec(), data)?)
    }

    pub fn zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> Result<usize> {
        self.insert(name, Tensor::zeros(shape))
    }

    pub fn ones(&mut self, name: impl Into<String>, shape: &[usize]) -> Result<usize> {
        self.insert(name, Tensor::full(shape, 1.0))
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.params
            .get(name)
            .ok_or_else(|| Error::contract(format!("unknown parameter `{name}`")))
    }

    /// Position of `name` in store order.
    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.params
            .get_index_of(name)
            .ok_or_else(|| Error::contract(format!("unknown parameter `{name}`")))
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params.get_mut(name)
    }

    pub fn set(&mut self, name: &str, value: Tensor) -> Result<()> {
        let slot = self
            .params
            .get_mut(name)
            .ok_or_else(|| Error::contract(format!("unknown parameter `{name}`")))?;
        if slot.shape() != value.shape() {
            return Err(Error::dim("ParamStore::set", slot.shape(), value.shape()));
        }
        *slot = value;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn num_values(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    /// Sets every parameter (weights, biases, gains) to zero.
    pub fn zero_all(&mut self) {
        for t in self.params.values_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Places every parameter on `graph` as a leaf.
    pub fn bind(&self, graph: &mut Graph) -> Bound {
        Bound {
            vars: self.params.values().map(|t| graph.leaf(t.clone())).collect(),
        }
    }

    /// Graph handle of `name` in a record bound from this store.
    pub fn var(&self, bound: &Bound, name: &str) -> Result<Var> {
        bound.get(self.index_of(name)?)
    }
}

/// Graph handles of a [`ParamStore`] placed on one computation record, in
/// store order.
#[derive(Clone, Debug)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    /// Handle of the parameter at store position `index`.
    pub fn get(&self, index: usize) -> Result<Var> {
        self.vars
            .get(index)
            .copied()
            .ok_or_else(|| Error::contract(format!("parameter index {index} out of range")))
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique_and_shapes_fixed() {
        let mut p = ParamStore::new(1);
        p.zeros("w", &[2, 2]).unwrap();
        assert!(p.zeros("w", &[3]).is_err());
        assert!(p.set("w", Tensor::zeros(&[4])).is_err());
        p.set("w", Tensor::full(&[2, 2], 1.0)).unwrap();
        assert_eq!(p.get("w").unwrap().sum(), 4.0);
        assert!(p.get("nope").is_err());
    }

    #[test]
    fn uniform_init_is_seeded_and_bounded() {
        let draw = |seed| {
            let mut p = ParamStore::new(seed);
            p.uniform("w", &[8, 8], 0.25).unwrap();
            p.get("w").unwrap().clone()
        };
        assert_eq!(draw(7), draw(7));
        assert_ne!(draw(7), draw(8));
        assert!(draw(7).max_abs() <= 0.25);
    }
}
