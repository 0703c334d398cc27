//! Dense row-major `f64` tensors and named, ordered parameter sets.

use crate::error::{Error, Result};
use indexmap::IndexMap;

/// A dense tensor of 64-bit reals in row-major order.
///
/// Rank is arbitrary but in practice everything here is a vector or a
/// matrix. `product(shape) == values.len()` always holds.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::Shape(format!("zero dimension in shape {shape:?}")));
        }
        if n != values.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} wants {n} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite tensor value".into()));
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n: usize = shape.iter().product();
        Self {
            shape,
            values: vec![0.0; n],
        }
    }

    pub fn vector(values: Vec<f64>) -> Self {
        Self {
            shape: vec![values.len()],
            values,
        }
    }

    /// Matrix from rows; all rows must share a length.
    pub fn matrix(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged matrix rows".into()));
        }
        Tensor::new(vec![r, c], rows.into_iter().flatten().collect())
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(vec![n, n]);
        for i in 0..n {
            t.values[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Number of rows when viewed as a matrix (first dimension).
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Number of columns when viewed as a matrix (second dimension).
    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols() + c]
    }

    /// Row `r` of a matrix as a slice.
    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.values[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.values[r * c..(r + 1) * c]
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.shape == other.shape
    }
}

/// Named, insertion-ordered set of tensors.
///
/// Houses every learnable parameter of a model as well as Adam moment
/// estimates. Iteration order is deterministic (insertion order), which
/// keeps gradient checks, checkpoints, and updates reproducible.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    entries: IndexMap<String, Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a tensor under a unique name.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::InvalidArgument(format!(
                "duplicate parameter name {name:?}"
            )));
        }
        self.entries.insert(name, tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter {name:?}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.entries
            .get_mut(name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown parameter {name:?}")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar entries across all tensors.
    pub fn scalar_count(&self) -> usize {
        self.entries.values().map(Tensor::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.entries.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// A set of zero tensors mirroring the shapes of `self`.
    pub fn zeros_like(&self) -> ParamSet {
        let mut out = ParamSet::new();
        for (name, t) in self.iter() {
            out.entries
                .insert(name.to_string(), Tensor::zeros(t.shape().to_vec()));
        }
        out
    }

    /// Check that `other` has exactly the same names and shapes.
    pub fn check_mirrors(&self, other: &ParamSet) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::Shape(format!(
                "parameter sets differ in size: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        for (name, t) in self.iter() {
            let o = other.get(name)?;
            if !t.same_shape(o) {
                return Err(Error::Shape(format!(
                    "parameter {name:?} shapes differ: {:?} vs {:?}",
                    t.shape(),
                    o.shape()
                )));
            }
        }
        Ok(())
    }

    /// Borrow several distinct entries mutably at once.
    pub fn get_disjoint_mut<const N: usize>(
        &mut self,
        names: [&str; N],
    ) -> Result<[&mut Tensor; N]> {
        let got = self.entries.get_disjoint_mut(names);
        if got.iter().any(Option::is_none) {
            return Err(Error::InvalidArgument(format!(
                "unknown parameter among {names:?}"
            )));
        }
        Ok(got.map(|o| o.expect("checked above")))
    }

    /// Accumulate `other` into `self` entry-wise (`self += scale * other`).
    ///
    /// Entries missing from `other` are left untouched; this lets partial
    /// gradients (e.g. a critic-only backward) accumulate into a full set.
    pub fn accumulate(&mut self, other: &ParamSet, scale: f64) -> Result<()> {
        for (name, src) in other.iter() {
            let dst = self.get_mut(name)?;
            if !dst.same_shape(src) {
                return Err(Error::Shape(format!(
                    "accumulate shape mismatch on {name:?}"
                )));
            }
            for (d, s) in dst.values_mut().iter_mut().zip(src.values()) {
                *d += scale * s;
            }
        }
        Ok(())
    }
}
