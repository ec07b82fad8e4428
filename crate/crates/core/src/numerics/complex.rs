use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Split real/imaginary storage for a length-`len` complex sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexBuffer<T> {
    re: Vec<T>,
    im: Vec<T>,
}

impl<T: Scalar> ComplexBuffer<T> {
    pub fn new(re: Vec<T>, im: Vec<T>) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::dim("ComplexBuffer::new", &[re.len()], &[im.len()]));
        }
        Ok(Self { re, im })
    }

    pub fn from_real(re: &[T]) -> Self {
        Self {
            re: re.to_vec(),
            im: vec![T::zero(); re.len()],
        }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            re: vec![T::zero(); len],
            im: vec![T::zero(); len],
        }
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn re(&self) -> &[T] {
        &self.re
    }

    pub fn im(&self) -> &[T] {
        &self.im
    }

    pub fn get(&self, k: usize) -> Complex<T> {
        Complex::new(self.re[k], self.im[k])
    }

    pub fn to_complex(&self) -> Vec<Complex<T>> {
        self.re.iter().zip(&self.im).map(|(&r, &i)| Complex::new(r, i)).collect()
    }

    pub fn from_complex(values: &[Complex<T>]) -> Self {
        Self {
            re: values.iter().map(|c| c.re).collect(),
            im: values.iter().map(|c| c.im).collect(),
        }
    }

    /// Largest modulus of the element-wise difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.re
            .iter()
            .zip(&self.im)
            .zip(other.re.iter().zip(&other.im))
            .fold(T::zero(), |m, ((&ar, &ai), (&br, &bi))| m.max((ar - br).hypot(ai - bi)))
    }

    pub fn energy(&self) -> T {
        self.re.iter().zip(&self.im).map(|(&r, &i)| r * r + i * i).sum()
    }
}
