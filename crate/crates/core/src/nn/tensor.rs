use serde::{Deserialize, Serialize};

use crate::{Error, Real, Result};

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Tensor<T = f64> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), data: vec![T::zero(); shape.iter().product()] }
    }

    pub fn filled(shape: &[usize], v: T) -> Self {
        Self { shape: shape.to_vec(), data: vec![v; shape.iter().product()] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape(format!("{shape:?} ({n} values)"), data.len()));
        }
        Ok(Self { shape: shape.to_vec(), data })
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

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::shape(self.data.len(), format!("{shape:?}")));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn dims4(&self) -> [usize; 4] {
        match *self.shape.as_slice() {
            [a, b, c, d] => [a, b, c, d],
            [a, b] => [a, b, 1, 1],
            _ => panic!("expected a 2-D or 4-D tensor, got {:?}", self.shape),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum_sq(&self) -> T {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn add_assign(&mut self, other: &Self) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Concatenates two `[B, C, H, W]` tensors along channels.
    pub fn concat_channels(a: &Self, b: &Self) -> Result<Self> {
        let [ba, ca, h, w] = a.dims4();
        let [bb, cb, hb, wb] = b.dims4();
        if ba != bb || h != hb || w != wb {
            return Err(Error::shape(format!("{:?}", a.shape), format!("{:?}", b.shape)));
        }
        let plane = h * w;
        let mut data = Vec::with_capacity(a.len() + b.len());
        for n in 0..ba {
            data.extend_from_slice(&a.data[n * ca * plane..(n + 1) * ca * plane]);
            data.extend_from_slice(&b.data[n * cb * plane..(n + 1) * cb * plane]);
        }
        Ok(Self { shape: vec![ba, ca + cb, h, w], data })
    }

    /// Inverse of [`Tensor::concat_channels`].
    pub fn split_channels(&self, first: usize) -> (Self, Self) {
        let [b, c, h, w] = self.dims4();
        let plane = h * w;
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for n in 0..b {
            let base = n * c * plane;
            x.extend_from_slice(&self.data[base..base + first * plane]);
            y.extend_from_slice(&self.data[base + first * plane..base + c * plane]);
        }
        (Self { shape: vec![b, first, h, w], data: x }, Self { shape: vec![b, c - first, h, w], data: y })
    }

    /// Concatenates `[B, n]` tensors along features.
    pub fn concat_features(parts: &[&Self]) -> Result<Self> {
        let b = parts.first().map(|p| p.shape[0]).unwrap_or(0);
        if parts.iter().any(|p| p.shape.len() != 2 || p.shape[0] != b) {
            return Err(Error::shape("[B, n] tensors with equal B", "mismatched parts"));
        }
        let width: usize = parts.iter().map(|p| p.shape[1]).sum();
        let mut data = Vec::with_capacity(b * width);
        for n in 0..b {
            for p in parts {
                data.extend_from_slice(&p.data[n * p.shape[1]..(n + 1) * p.shape[1]]);
            }
        }
        Ok(Self { shape: vec![b, width], data })
    }

    pub fn split_features(&self, widths: &[usize]) -> Vec<Self> {
        let b = self.shape[0];
        let total = self.shape[1];
        let mut out: Vec<Vec<T>> = widths.iter().map(|w| Vec::with_capacity(b * w)).collect();
        for n in 0..b {
            let mut off = n * total;
            for (o, &w) in out.iter_mut().zip(widths) {
                o.extend_from_slice(&self.data[off..off + w]);
                off += w;
            }
        }
        out.into_iter().zip(widths).map(|(d, &w)| Self { shape: vec![b, w], data: d }).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_concat_round_trip() {
        let a = Tensor::from_vec(&[2, 1, 1, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::from_vec(&[2, 2, 1, 2], (10..18).map(f64::from).collect()).unwrap();
        let c = Tensor::concat_channels(&a, &b).unwrap();
        assert_eq!(c.shape(), &[2, 3, 1, 2]);
        assert_eq!(&c.data()[..6], &[1.0, 2.0, 10.0, 11.0, 12.0, 13.0]);
        let (x, y) = c.split_channels(1);
        assert_eq!((x, y), (a, b));
    }

    #[test]
    fn feature_concat_round_trip() {
        let a = Tensor::from_vec(&[2, 1], vec![1.0, 2.0]).unwrap();
        let b = Tensor::from_vec(&[2, 2], vec![3.0, 4.0, 5.0, 6.0]).unwrap();
        let c = Tensor::concat_features(&[&a, &b]).unwrap();
        assert_eq!(c.data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        assert_eq!(c.split_features(&[1, 2]), vec![a, b]);
    }

    #[test]
    fn shape_checked() {
        assert!(Tensor::<f64>::from_vec(&[2, 2], vec![0.0; 3]).is_err());
        assert!(Tensor::<f64>::zeros(&[4]).reshape(&[3]).is_err());
    }
}
