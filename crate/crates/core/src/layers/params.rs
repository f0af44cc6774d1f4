use std::collections::BTreeMap;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, NodeId, Tensor};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub(crate) struct Param {
    pub(crate) name: String,
    pub(crate) value: Tensor,
    pub(crate) m: Vec<f64>,
    pub(crate) v: Vec<f64>,
}

/// Named learnable tensors plus Adam state. Entry order is creation order
/// and is preserved by checkpoints.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    pub(crate) params: Vec<Param>,
    index: BTreeMap<String, usize>,
    pub(crate) step: u64,
}

impl PartialEq for ParamStore {
    fn eq(&self, other: &Self) -> bool {
        self.params.len() == other.params.len()
            && self
                .params
                .iter()
                .zip(&other.params)
                .all(|(a, b)| a.name == b.name && a.value == b.value)
    }
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor) -> Result<()> {
        if self.index.contains_key(name) {
            return Err(Error::Config(format!("duplicate parameter name {name:?}")));
        }
        let n = value.len();
        self.index.insert(name.to_string(), self.params.len());
        self.params.push(Param {
            name: name.to_string(),
            value,
            m: vec![0.0; n],
            v: vec![0.0; n],
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Number of Adam steps taken.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index_of(name).map(|i| &self.params[i].value)
    }

    /// Replaces the value of an existing entry; the shape must not change.
    pub fn set(&mut self, name: &str, value: Tensor) -> Result<()> {
        let i = self
            .index_of(name)
            .ok_or_else(|| Error::Config(format!("unknown parameter {name:?}")))?;
        if self.params[i].value.shape() != value.shape() {
            return Err(Error::Config(format!(
                "parameter {name:?} has shape {:?}, got {:?}",
                self.params[i].value.shape(),
                value.shape()
            )));
        }
        self.params[i].value = value;
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.name.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|p| (p.name.as_str(), &p.value))
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}

/// How a parameter is initialized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Uniform(−s, s) with s = sqrt(6 / (fan_in + fan_out)).
    Xavier { fan_in: usize, fan_out: usize },
    Zeros,
    Ones,
    /// Zeros except the forget-gate slice `[hidden, 2·hidden)`, which is 1.
    LstmBias { hidden: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

/// Ordered list of parameter shapes, built with the layer helpers below.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LayerSpec {
    pub entries: Vec<ParamSpec>,
}

impl LayerSpec {
    pub fn new() -> Self {
        LayerSpec::default()
    }

    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, init: Init) -> &mut Self {
        self.entries.push(ParamSpec {
            name: name.into(),
            shape,
            init,
        });
        self
    }

    /// `{name}.w` of shape `[out, in]` and optionally `{name}.b`.
    pub fn linear(&mut self, name: &str, input: usize, output: usize, bias: bool) -> &mut Self {
        self.push(
            format!("{name}.w"),
            vec![output, input],
            Init::Xavier {
                fan_in: input,
                fan_out: output,
            },
        );
        if bias {
            self.push(format!("{name}.b"), vec![output], Init::Zeros);
        }
        self
    }

    pub fn embedding(&mut self, name: &str, vocab: usize, dim: usize) -> &mut Self {
        self.push(
            name,
            vec![vocab, dim],
            Init::Xavier {
                fan_in: vocab,
                fan_out: dim,
            },
        )
    }

    /// Packed gate weights `{prefix}.w` of shape `[4H, in + H]`, gate order
    /// (i, f, g, o), and bias `{prefix}.b`.
    pub fn lstm(&mut self, prefix: &str, input: usize, hidden: usize) -> &mut Self {
        self.push(
            format!("{prefix}.w"),
            vec![4 * hidden, input + hidden],
            Init::Xavier {
                fan_in: input + hidden,
                fan_out: 4 * hidden,
            },
        );
        self.push(format!("{prefix}.b"), vec![4 * hidden], Init::LstmBias { hidden })
    }

    /// Additive attention over `features`-wide rows queried by a
    /// `hidden`-wide state, scored in an `att`-wide space.
    pub fn attention(&mut self, prefix: &str, features: usize, hidden: usize, att: usize) -> &mut Self {
        self.linear(&format!("{prefix}.key"), features, att, false);
        self.linear(&format!("{prefix}.query"), hidden, att, false);
        self.push(
            format!("{prefix}.score.w"),
            vec![att],
            Init::Xavier {
                fan_in: att,
                fan_out: 1,
            },
        )
    }

    pub fn layer_norm(&mut self, prefix: &str, width: usize) -> &mut Self {
        self.push(format!("{prefix}.gain"), vec![width], Init::Ones);
        self.push(format!("{prefix}.bias"), vec![width], Init::Zeros)
    }
}

/// Materializes `spec` with a ChaCha stream seeded by `seed`.
pub fn init_params(spec: &LayerSpec, seed: u64) -> Result<ParamStore> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    for e in &spec.entries {
        if e.shape.contains(&0) {
            return Err(Error::Config(format!(
                "parameter {:?} has a zero dimension {:?}",
                e.name, e.shape
            )));
        }
        let n: usize = e.shape.iter().product();
        let data = match e.init {
            Init::Xavier { fan_in, fan_out } => {
                let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-s, s);
                (0..n).map(|_| dist.sample(&mut rng)).collect()
            }
            Init::Zeros => vec![0.0; n],
            Init::Ones => vec![1.0; n],
            Init::LstmBias { hidden } => {
                let mut b = vec![0.0; n];
                b[hidden..2 * hidden].iter_mut().for_each(|x| *x = 1.0);
                b
            }
        };
        store.insert(&e.name, Tensor::new(e.shape.clone(), data)?)?;
    }
    Ok(store)
}

/// Per-parameter gradients aligned with a [`ParamStore`]'s entry order.
/// `None` stands for an all-zero gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads {
    pub(crate) grads: Vec<Option<Vec<f64>>>,
}

impl ParamGrads {
    pub fn zeros_like(store: &ParamStore) -> Self {
        ParamGrads {
            grads: vec![None; store.len()],
        }
    }

    /// Builds gradients from explicit tensors, in store order.
    pub fn from_tensors(store: &ParamStore, tensors: Vec<Tensor>) -> Result<Self> {
        if tensors.len() != store.len() {
            return Err(Error::Config(format!(
                "expected {} gradients, got {}",
                store.len(),
                tensors.len()
            )));
        }
        Ok(ParamGrads {
            grads: tensors.into_iter().map(|t| Some(t.into_data())).collect(),
        })
    }

    pub fn get(&self, index: usize) -> Option<&[f64]> {
        self.grads.get(index).and_then(|g| g.as_deref())
    }

    pub fn by_name<'a>(&'a self, store: &ParamStore, name: &str) -> Option<&'a [f64]> {
        store.index_of(name).and_then(|i| self.get(i))
    }

    /// Elementwise accumulation of `other` into `self`.
    pub fn accumulate(&mut self, other: &ParamGrads) {
        for (mine, theirs) in self.grads.iter_mut().zip(&other.grads) {
            if let Some(t) = theirs {
                match mine {
                    Some(m) => m.iter_mut().zip(t).for_each(|(a, b)| *a += b),
                    None => *mine = Some(t.clone()),
                }
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for g in self.grads.iter_mut().flatten() {
            g.iter_mut().for_each(|x| *x *= k);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.grads
            .iter()
            .flatten()
            .flat_map(|g| g.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales so the global L2 norm is at most `max_norm`; returns the norm
    /// before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            self.scale(max_norm / norm);
        }
        norm
    }
}

/// A forward pass in progress: a fresh [`Graph`] plus lazily bound
/// parameter leaves.
pub struct Ctx<'p> {
    pub graph: Graph,
    store: &'p ParamStore,
    bound: Vec<Option<NodeId>>,
}

impl<'p> Ctx<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Ctx {
            graph: Graph::new(),
            store,
            bound: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &'p ParamStore {
        self.store
    }

    /// Leaf for parameter `name`, created on first use.
    pub fn param(&mut self, name: &str) -> Result<NodeId> {
        let i = self
            .store
            .index_of(name)
            .ok_or_else(|| Error::Config(format!("missing parameter {name:?}")))?;
        if let Some(id) = self.bound[i] {
            return Ok(id);
        }
        let id = self.graph.leaf(self.store.params[i].value.clone());
        self.bound[i] = Some(id);
        Ok(id)
    }

    /// Names of the parameters this pass has read.
    pub fn touched(&self) -> Vec<&'p str> {
        self.bound
            .iter()
            .enumerate()
            .filter(|(_, b)| b.is_some())
            .map(|(i, _)| self.store.params[i].name.as_str())
            .collect()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        self.graph.value(id)
    }

    pub fn constant(&mut self, t: Tensor) -> NodeId {
        self.graph.constant(t)
    }

    /// Backpropagates from `root` and collects the parameter gradients.
    pub fn param_grads(&self, root: NodeId) -> Result<ParamGrads> {
        let mut grads = self.graph.backward(root)?;
        Ok(ParamGrads {
            grads: self
                .bound
                .iter()
                .map(|b| b.and_then(|id| grads.take(id)))
                .collect(),
        })
    }
}
