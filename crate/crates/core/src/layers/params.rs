use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::numkit::Matrix;

/// Handle to one tensor inside a [`ParamSet`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

/// Flat, ordered store of named parameter tensors. Gradients use a second
/// `ParamSet` with the same layout, built by [`ParamSet::zeros_like`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Matrix>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(value);
        ParamId(self.tensors.len() - 1)
    }

    pub fn zeros_like(&self) -> Self {
        ParamSet {
            names: self.names.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| Matrix::zeros(t.rows(), t.cols()))
                .collect(),
        }
    }

    pub fn zero(&mut self) {
        self.tensors.iter_mut().for_each(|t| t.fill(0.0));
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total scalar parameter count.
    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Matrix::len).sum()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Matrix] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Matrix] {
        &mut self.tensors
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn global_norm(&self) -> f64 {
        self.tensors.iter().map(Matrix::sum_squares).sum::<f64>().sqrt()
    }

    pub fn same_layout(&self, other: &ParamSet) -> bool {
        self.names == other.names
            && self
                .tensors
                .iter()
                .zip(&other.tensors)
                .all(|(a, b)| a.shape() == b.shape())
    }

    pub(crate) fn from_parts(names: Vec<String>, tensors: Vec<Matrix>) -> Self {
        ParamSet { names, tensors }
    }

    pub(crate) fn accumulate(&mut self, id: ParamId, delta: &[f64]) {
        let t = self.tensors[id.0].as_mut_slice();
        assert_eq!(t.len(), delta.len(), "accumulate length for {}", self.names[id.0]);
        for (a, d) in t.iter_mut().zip(delta) {
            *a += d;
        }
    }
}

impl Index<ParamId> for ParamSet {
    type Output = Matrix;
    fn index(&self, id: ParamId) -> &Matrix {
        &self.tensors[id.0]
    }
}

impl IndexMut<ParamId> for ParamSet {
    fn index_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.tensors[id.0]
    }
}
