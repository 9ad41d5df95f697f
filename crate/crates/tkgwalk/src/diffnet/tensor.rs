//! Dense tensors and ordered tensor collections.
//!
//! Values are stored as `f64` so gradient checks run at full precision; the
//! checkpoint format narrows to 32-bit on disk.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![0.0; len] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {shape:?} holds {len} values, got {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tensor literal".into()));
        }
        Ok(Self { shape: shape.to_vec(), data })
    }

    /// Uniform init in `[-0.5/sqrt(fan_in), 0.5/sqrt(fan_in)]`.
    pub fn uniform(shape: &[usize], fan_in: usize, rng: &mut impl Rng) -> Self {
        let bound = 0.5 / (fan_in.max(1) as f64).sqrt();
        let len = shape.iter().product();
        let data = (0..len).map(|_| rng.gen_range(-bound..=bound)).collect();
        Self { shape: shape.to_vec(), data }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let len = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![value; len] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Rows for a 2-d tensor, 1 for a vector.
    pub fn rows(&self) -> usize {
        if self.shape.len() >= 2 {
            self.shape[0]
        } else {
            1
        }
    }

    /// Columns for a 2-d tensor, the full length for a vector.
    pub fn cols(&self) -> usize {
        if self.shape.len() >= 2 {
            self.shape[1]
        } else {
            self.data.len()
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// One row of a 2-d tensor.
    pub fn row(&self, r: usize) -> &[f64] {
        let cols = self.cols();
        &self.data[r * cols..(r + 1) * cols]
    }

    pub fn fill(&mut self, value: f64) {
        self.data.fill(value);
    }
}

/// A fixed, ordered set of named tensors. Parameter sets, gradient buffers,
/// and optimizer moments all share this layout so they can be walked in step.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSet {
    names: Vec<&'static str>,
    tensors: Vec<Tensor>,
}

impl TensorSet {
    pub fn new() -> Self {
        Self { names: Vec::new(), tensors: Vec::new() }
    }

    /// Adds a tensor and returns its index.
    pub fn push(&mut self, name: &'static str, tensor: Tensor) -> usize {
        self.names.push(name);
        self.tensors.push(tensor);
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn name(&self, idx: usize) -> &'static str {
        self.names[idx]
    }

    pub fn get(&self, idx: usize) -> &Tensor {
        &self.tensors[idx]
    }

    pub fn get_mut(&mut self, idx: usize) -> &mut Tensor {
        &mut self.tensors[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &Tensor)> + '_ {
        self.names.iter().copied().zip(self.tensors.iter())
    }

    /// Same names and shapes, all values zero.
    pub fn zeros_like(&self) -> Self {
        Self {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(|t| Tensor::zeros(t.shape())).collect(),
        }
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn zero(&mut self) {
        for t in &mut self.tensors {
            t.fill(0.0);
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors
            .iter()
            .flat_map(|t| t.data())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for t in &mut self.tensors {
            for v in t.data_mut() {
                *v *= factor;
            }
        }
    }

    /// Index of the first non-finite value, as (tensor name, offset).
    pub fn find_non_finite(&self) -> Option<(&'static str, usize)> {
        for (idx, t) in self.tensors.iter().enumerate() {
            if let Some(off) = t.data().iter().position(|v| !v.is_finite()) {
                return Some((self.names[idx], off));
            }
        }
        None
    }
}

impl Default for TensorSet {
    fn default() -> Self {
        Self::new()
    }
}
