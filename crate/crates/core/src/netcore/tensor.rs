use crate::error::{Error, Result};

use super::Real;

/// Dense `(batch, channels, height, width)` tensor, row-major within each plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<T> {
    dims: [usize; 4],
    data: Vec<T>,
}

impl<T: Real> Tensor4<T> {
    pub fn zeros(dims: [usize; 4]) -> Self {
        assert!(dims.iter().all(|&d| d >= 1), "tensor dims must be >= 1: {dims:?}");
        Self {
            dims,
            data: vec![T::zero(); dims.iter().product()],
        }
    }

    pub fn from_vec(dims: [usize; 4], data: Vec<T>) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Shape(format!("zero dimension in {dims:?}")));
        }
        let expected: usize = dims.iter().product();
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "{} values for dims {dims:?} (expected {expected})",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    /// Single-sample, single-channel tensor from a row-major grid.
    pub fn from_grid(rows: usize, cols: usize, grid: &[f64]) -> Result<Self> {
        Self::from_vec([1, 1, rows, cols], grid.iter().map(|&v| T::from_f64(v)).collect())
    }

    /// Stacks equally-shaped single-channel grids into a batch.
    pub fn stack_grids(rows: usize, cols: usize, grids: &[&[f64]]) -> Result<Self> {
        let mut data = Vec::with_capacity(grids.len() * rows * cols);
        for g in grids {
            if g.len() != rows * cols {
                return Err(Error::Shape(format!("grid of {} cells, expected {}", g.len(), rows * cols)));
            }
            data.extend(g.iter().map(|&v| T::from_f64(v)));
        }
        Self::from_vec([grids.len(), 1, rows, cols], data)
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn batch(&self) -> usize {
        self.dims[0]
    }

    pub fn channels(&self) -> usize {
        self.dims[1]
    }

    pub fn height(&self) -> usize {
        self.dims[2]
    }

    pub fn width(&self) -> usize {
        self.dims[3]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn sample_len(&self) -> usize {
        self.dims[1] * self.dims[2] * self.dims[3]
    }

    pub fn sample(&self, b: usize) -> &[T] {
        let n = self.sample_len();
        &self.data[b * n..(b + 1) * n]
    }

    pub fn sample_mut(&mut self, b: usize) -> &mut [T] {
        let n = self.sample_len();
        &mut self.data[b * n..(b + 1) * n]
    }

    /// Channel plane `c` of sample `b`.
    pub fn plane(&self, b: usize, c: usize) -> &[T] {
        let hw = self.dims[2] * self.dims[3];
        let start = (b * self.dims[1] + c) * hw;
        &self.data[start..start + hw]
    }

    pub fn get(&self, b: usize, c: usize, i: usize, j: usize) -> T {
        self.data[self.index(b, c, i, j)]
    }

    pub fn set(&mut self, b: usize, c: usize, i: usize, j: usize, v: T) {
        let k = self.index(b, c, i, j);
        self.data[k] = v;
    }

    fn index(&self, b: usize, c: usize, i: usize, j: usize) -> usize {
        let [_, cs, h, w] = self.dims;
        ((b * cs + c) * h + i) * w + j
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.as_f64() * b.as_f64())
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.as_f64()).collect()
    }

    pub fn ensure_same_dims(&self, other: &Self, what: &str) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!(
                "{what}: {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }
}
