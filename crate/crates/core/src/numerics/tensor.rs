use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major array with an explicit shape.
#[derive(Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("data", &self.data)
            .finish()
    }
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::Config(format!("zero-sized dimension in shape {shape:?}")));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::dim("Tensor::new", &shape, &[data.len()]));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, T::zero())
    }

    pub fn filled(shape: &[usize], value: T) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    /// Builds a tensor by evaluating `f` at each flat row-major index.
    pub fn from_fn(shape: &[usize], f: impl FnMut(usize) -> T) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..len).map(f).collect(),
        }
    }

    pub fn vector(data: Vec<T>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(&[n, n], |k| if k / n == k % n { T::one() } else { T::zero() })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Rows and columns of a rank-2 tensor.
    pub fn dims2(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::dim(op, &self.shape, &[0, 0])),
        }
    }

    pub fn dims3(&self, op: &'static str) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [a, b, c] => Ok((a, b, c)),
            _ => Err(Error::dim(op, &self.shape, &[0, 0, 0])),
        }
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        Self::new(shape.to_vec(), self.data)
    }

    pub fn at2(&self, row: usize, col: usize) -> T {
        self.data[row * self.shape[1] + col]
    }

    pub fn set2(&mut self, row: usize, col: usize, v: T) {
        let cols = self.shape[1];
        self.data[row * cols + col] = v;
    }

    pub fn row(&self, row: usize) -> &[T] {
        let cols = self.shape[self.shape.len() - 1];
        &self.data[row * cols..(row + 1) * cols]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, op: &'static str, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::dim(op, &self.shape, &other.shape));
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "sub", |a, b| a - b)
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::dim("add_assign", &self.shape, &other.shape));
        }
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn dot(&self, other: &Self) -> Result<T> {
        if self.shape != other.shape {
            return Err(Error::dim("dot", &self.shape, &other.shape));
        }
        Ok(self.data.iter().zip(&other.data).map(|(&a, &b)| a * b).sum())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        Ok(self.sub(other)?.max_abs())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Result<Self> {
        let (r, c) = self.dims2("transpose")?;
        let mut out = Vec::with_capacity(self.data.len());
        for j in 0..c {
            for i in 0..r {
                out.push(self.data[i * c + j]);
            }
        }
        Ok(Self {
            shape: vec![c, r],
            data: out,
        })
    }

    /// Standard product `self · b`.
    ///
    /// Each output entry accumulates its `k` terms in increasing inner index,
    /// starting from zero, so results are bit-reproducible.
    pub fn matmul(&self, b: &Self) -> Result<Self> {
        let (m, k) = self.dims2("matmul")?;
        let (k2, n) = b.dims2("matmul")?;
        if k != k2 {
            return Err(Error::dim("matmul", &self.shape, &b.shape));
        }
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            let a_row = &self.data[i * k..(i + 1) * k];
            let o_row = &mut out[i * n..(i + 1) * n];
            for (p, &a) in a_row.iter().enumerate() {
                let b_row = &b.data[p * n..(p + 1) * n];
                for (o, &bv) in o_row.iter_mut().zip(b_row) {
                    *o += a * bv;
                }
            }
        }
        Ok(Self {
            shape: vec![m, n],
            data: out,
        })
    }

    /// `self · bᵀ` without materializing the transpose.
    pub fn matmul_nt(&self, b: &Self) -> Result<Self> {
        let (m, k) = self.dims2("matmul_nt")?;
        let (n, k2) = b.dims2("matmul_nt")?;
        if k != k2 {
            return Err(Error::dim("matmul_nt", &self.shape, &b.shape));
        }
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            let a_row = &self.data[i * k..(i + 1) * k];
            for j in 0..n {
                let b_row = &b.data[j * k..(j + 1) * k];
                let mut acc = T::zero();
                for (&x, &y) in a_row.iter().zip(b_row) {
                    acc += x * y;
                }
                out.push(acc);
            }
        }
        Ok(Self {
            shape: vec![m, n],
            data: out,
        })
    }

    /// `selfᵀ · b` without materializing the transpose.
    pub fn matmul_tn(&self, b: &Self) -> Result<Self> {
        let (_, m) = self.dims2("matmul_tn")?;
        let (_, n) = b.dims2("matmul_tn")?;
        let mut out = vec![T::zero(); m * n];
        self.matmul_tn_into(b, &mut out)?;
        Ok(Self {
            shape: vec![m, n],
            data: out,
        })
    }

    /// `selfᵀ b` written into a caller-owned row-major buffer.
    pub fn matmul_tn_into(&self, b: &Self, out: &mut [T]) -> Result<()> {
        let (k, m) = self.dims2("matmul_tn")?;
        let (k2, n) = b.dims2("matmul_tn")?;
        if k != k2 || out.len() != m * n {
            return Err(Error::dim("matmul_tn", &self.shape, &b.shape));
        }
        out.iter_mut().for_each(|o| *o = T::zero());
        for p in 0..k {
            let a_row = &self.data[p * m..(p + 1) * m];
            let b_row = &b.data[p * n..(p + 1) * n];
            for (i, &a) in a_row.iter().enumerate() {
                let o_row = &mut out[i * n..(i + 1) * n];
                for (o, &bv) in o_row.iter_mut().zip(b_row) {
                    *o += a * bv;
                }
            }
        }
        Ok(())
    }

    /// Adds `bias` to every row of a rank-2 tensor.
    pub fn add_row_vector(&mut self, bias: &Self) -> Result<()> {
        let (_, c) = self.dims2("add_row_vector")?;
        if bias.len() != c {
            return Err(Error::dim("add_row_vector", &self.shape, &bias.shape));
        }
        for row in self.data.chunks_mut(c) {
            for (v, &b) in row.iter_mut().zip(&bias.data) {
                *v += b;
            }
        }
        Ok(())
    }

    /// Column sums of a rank-2 tensor.
    pub fn sum_rows(&self) -> Result<Self> {
        let (_, c) = self.dims2("sum_rows")?;
        let mut out = vec![T::zero(); c];
        for row in self.data.chunks(c) {
            for (o, &v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        Ok(Self::vector(out))
    }

    /// Mean over rows of a rank-2 tensor, returning a vector of length `cols`.
    pub fn mean_rows(&self) -> Result<Self> {
        let (r, _) = self.dims2("mean_rows")?;
        let inv = T::one() / T::from_count(r);
        Ok(self.sum_rows()?.scale(inv))
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::from_f64_lossy(v.to_f64_lossy())).collect(),
        }
    }
}
