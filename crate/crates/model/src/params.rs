use narlab_tensor::{Real, Tape, Tensor, Var};
use rand::Rng;

use crate::{ModelError, Result};

/// Named parameter tensors in registration order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<F> {
    names: Vec<String>,
    tensors: Vec<Tensor<F>>,
}

impl<F: Real> Default for ParamStore<F> {
    fn default() -> Self {
        Self { names: Vec::new(), tensors: Vec::new() }
    }
}

/// Weight and optional bias indices into a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub w: usize,
    pub b: Option<usize>,
}

impl<F: Real> ParamStore<F> {
    pub fn from_parts(names: Vec<String>, tensors: Vec<Tensor<F>>) -> Result<Self> {
        if names.len() != tensors.len() {
            return Err(ModelError::Checkpoint(format!(
                "{} names for {} tensors",
                names.len(),
                tensors.len()
            )));
        }
        Ok(Self { names, tensors })
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor<F>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<F>] {
        &mut self.tensors
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<F>> {
        self.index_of(name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<F>> {
        self.index_of(name).map(|i| &mut self.tensors[i])
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    fn push(&mut self, name: String, t: Tensor<F>) -> usize {
        self.names.push(name);
        self.tensors.push(t);
        self.tensors.len() - 1
    }

    /// Adds a `[fan_in, fan_out]` weight with variance `1 / fan_in` and,
    /// if requested, a zero bias.
    pub(crate) fn linear(
        &mut self,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        bias: bool,
        rng: &mut impl Rng,
    ) -> Linear {
        let limit = (3.0 / fan_in as f64).sqrt();
        let data = (0..fan_in * fan_out).map(|_| F::from_f64(rng.random_range(-limit..limit))).collect();
        let w = self.push(format!("{name}.w"), Tensor::new(vec![fan_in, fan_out], data).expect("shape"));
        let b = bias.then(|| self.push(format!("{name}.b"), Tensor::zeros(&[fan_out])));
        Linear { w, b }
    }

    /// Records every parameter on `tape`.
    pub fn register(&self, tape: &mut Tape<F>, trainable: bool) -> Vec<Var> {
        self.tensors.iter().map(|t| tape.leaf(t.clone(), trainable)).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.all_finite())
    }

    pub fn cast<G: Real>(&self) -> ParamStore<G> {
        ParamStore { names: self.names.clone(), tensors: self.tensors.iter().map(|t| t.cast()).collect() }
    }
}

impl Linear {
    pub fn apply<F: Real>(&self, tape: &mut Tape<F>, pv: &[Var], x: Var) -> Result<Var> {
        let y = tape.matmul(x, pv[self.w])?;
        Ok(match self.b {
            Some(b) => tape.add_bias(y, pv[b])?,
            None => y,
        })
    }
}
