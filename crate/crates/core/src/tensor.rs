//! Dense row-major tensors, images and datasets.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Dense array of `f64` in row-major order (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::InvalidArgument(format!(
                "shape {shape:?} holds {n} elements but {} were given",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f64) -> Self {
        let n: usize = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..n).map(&mut f).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Self::new(shape.to_vec(), self.data)
    }

    /// Offset of element (c, i, j) in a rank-3 tensor.
    #[inline]
    pub fn offset3(&self, c: usize, i: usize, j: usize) -> usize {
        debug_assert_eq!(self.shape.len(), 3);
        (c * self.shape[1] + i) * self.shape[2] + j
    }

    pub fn get3(&self, c: usize, i: usize, j: usize) -> f64 {
        self.data[self.offset3(c, i, j)]
    }

    pub fn check_shape(&self, expected: &[usize]) -> Result<()> {
        if self.shape != expected {
            return Err(Error::shape(expected, &self.shape));
        }
        Ok(())
    }

    pub fn dot(&self, other: &Tensor) -> f64 {
        debug_assert_eq!(self.shape, other.shape);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.sum() / self.data.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn scaled(&self, alpha: f64) -> Tensor {
        self.map(|v| alpha * v)
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, mut f: impl FnMut(f64, f64) -> f64) -> Tensor {
        debug_assert_eq!(self.shape, other.shape);
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Tensor) -> Tensor {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Tensor) -> Tensor {
        self.zip_map(other, |a, b| a + b)
    }
}

/// A 1- or 3-channel image of shape (channels, height, width).
///
/// Intensities are nominally in [0, 1] but are never clamped here.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    tensor: Tensor,
}

impl Image {
    pub fn new(tensor: Tensor) -> Result<Self> {
        let s = tensor.shape();
        if s.len() != 3 || !(s[0] == 1 || s[0] == 3) || s[1] == 0 || s[2] == 0 {
            return Err(Error::InvalidArgument(format!(
                "image tensors must have shape (1|3, H>0, W>0), got {s:?}"
            )));
        }
        Ok(Self { tensor })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self> {
        Self::new(Tensor::zeros(&[channels, height, width]))
    }

    pub fn channels(&self) -> usize {
        self.tensor.shape()[0]
    }

    pub fn height(&self) -> usize {
        self.tensor.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.tensor.shape()[2]
    }

    pub fn tensor(&self) -> &Tensor {
        &self.tensor
    }

    pub fn into_tensor(self) -> Tensor {
        self.tensor
    }
}

impl AsRef<Tensor> for Image {
    fn as_ref(&self) -> &Tensor {
        &self.tensor
    }
}

/// Homogeneous, non-empty collection of images plus a string metadata map.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    items: Vec<Image>,
    pub metadata: BTreeMap<String, String>,
}

impl Dataset {
    pub fn new(items: Vec<Image>) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::InvalidArgument("dataset must be non-empty".into()))?;
        let shape = first.tensor().shape().to_vec();
        for img in &items {
            img.tensor().check_shape(&shape)?;
        }
        Ok(Self {
            items,
            metadata: BTreeMap::new(),
        })
    }

    pub fn items(&self) -> &[Image] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn image_shape(&self) -> &[usize] {
        self.items[0].tensor().shape()
    }

    pub fn tensors(&self) -> Vec<Tensor> {
        self.items.iter().map(|i| i.tensor().clone()).collect()
    }

    /// Split into the first `n` items and the rest; metadata is copied to both.
    pub fn split_at(&self, n: usize) -> Result<(Dataset, Dataset)> {
        let (a, b) = self.items.split_at(n.min(self.items.len()));
        let mut left = Dataset::new(a.to_vec())?;
        let mut right = Dataset::new(b.to_vec())?;
        left.metadata = self.metadata.clone();
        right.metadata = self.metadata.clone();
        Ok((left, right))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_offsets() {
        let t = Tensor::from_fn(&[3, 4, 5], |k| k as f64);
        for c in 0..3 {
            for i in 0..4 {
                for j in 0..5 {
                    assert_eq!(t.get3(c, i, j), (c * 4 * 5 + i * 5 + j) as f64);
                }
            }
        }
    }

    #[test]
    fn length_must_match_shape() {
        assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());
        assert!(Tensor::new(vec![0], vec![]).is_ok());
    }

    #[test]
    fn image_channel_rule() {
        assert!(Image::new(Tensor::zeros(&[2, 4, 4])).is_err());
        assert!(Image::new(Tensor::zeros(&[3, 1, 1])).is_ok());
        assert!(Image::new(Tensor::zeros(&[1, 0, 4])).is_err());
    }

    #[test]
    fn dataset_rejects_mixed_shapes() {
        let a = Image::zeros(1, 4, 4).unwrap();
        let b = Image::zeros(1, 4, 5).unwrap();
        assert!(Dataset::new(vec![a.clone(), b]).is_err());
        assert!(Dataset::new(vec![]).is_err());
        assert_eq!(Dataset::new(vec![a.clone(), a]).unwrap().len(), 2);
    }
}
