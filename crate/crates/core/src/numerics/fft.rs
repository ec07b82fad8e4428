//! Arbitrary-length discrete Fourier transform.
//!
//! Every length goes through Bluestein's chirp-z reformulation: the length-`n`
//! DFT becomes a circular convolution of chirp-modulated sequences, evaluated
//! with a radix-2 transform of length `m`, the smallest power of two `>= 2n - 1`.
//!
//! Conventions: the forward transform is unnormalized,
//! `X_k = sum_j x_j exp(-2 pi i jk / n)`, and the inverse carries `1/n`.

use num_complex::Complex;

use super::complex::ComplexBuffer;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sign of the exponent in the transform kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `exp(-2 pi i jk / n)`
    Forward,
    /// `exp(+2 pi i jk / n)`, without the `1/n` factor.
    Inverse,
}

/// Precomputed chirp and kernel tables for one transform length.
///
/// Plans are immutable after construction and can be shared across threads.
#[derive(Debug, Clone)]
pub struct FftPlan<T> {
    len: usize,
    chirp: Vec<Complex<T>>,
    kernel_spectrum: Vec<Complex<T>>,
    radix2: Radix2<T>,
}

impl<T: Scalar> FftPlan<T> {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::Empty("fft"));
        }
        let m = (2 * len - 1).next_power_of_two();
        let radix2 = Radix2::new(m);

        // chirp_k = exp(-i pi k^2 / n); k^2 is reduced mod 2n so the angle stays exact.
        let two_n = 2 * len as u64;
        let chirp: Vec<Complex<T>> = (0..len as u64)
            .map(|k| {
                let r = (k * k) % two_n;
                let angle = -T::PI() * T::lit(r as f64) / T::from_count(len);
                Complex::new(angle.cos(), angle.sin())
            })
            .collect();

        let mut kernel = vec![Complex::new(T::zero(), T::zero()); m];
        kernel[0] = chirp[0].conj();
        for k in 1..len {
            let c = chirp[k].conj();
            kernel[k] = c;
            kernel[m - k] = c;
        }
        radix2.forward(&mut kernel);

        Ok(Self {
            len,
            chirp,
            kernel_spectrum: kernel,
            radix2,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Length of the internal power-of-two convolution.
    pub fn padded_len(&self) -> usize {
        self.radix2.len
    }

    /// Unnormalized transform in the requested direction, in place.
    pub fn process(&self, data: &mut [Complex<T>], direction: Direction) -> Result<()> {
        let mut work = vec![Complex::new(T::zero(), T::zero()); self.radix2.len];
        self.process_with(data, direction, &mut work)
    }

    /// [`process`](Self::process) with a caller-owned work buffer of [`padded_len`](Self::padded_len) entries.
    pub fn process_with(&self, data: &mut [Complex<T>], direction: Direction, work: &mut [Complex<T>]) -> Result<()> {
        if data.len() != self.len {
            return Err(Error::dim("fft", &[self.len], &[data.len()]));
        }
        let m = self.radix2.len;
        if work.len() != m {
            return Err(Error::dim("fft work buffer", &[m], &[work.len()]));
        }
        // The inverse kernel is the conjugate of the forward one.
        if direction == Direction::Inverse {
            data.iter_mut().for_each(|c| *c = c.conj());
        }
        work.iter_mut().for_each(|w| *w = Complex::new(T::zero(), T::zero()));
        for ((w, &x), &c) in work.iter_mut().zip(data.iter()).zip(&self.chirp) {
            *w = x * c;
        }
        self.radix2.forward(work);
        for (w, &k) in work.iter_mut().zip(&self.kernel_spectrum) {
            *w = *w * k;
        }
        self.radix2.inverse_unscaled(work);
        let inv_m = T::one() / T::from_count(m);
        for ((x, &w), &c) in data.iter_mut().zip(work.iter()).zip(&self.chirp) {
            *x = w * c * inv_m;
        }
        if direction == Direction::Inverse {
            data.iter_mut().for_each(|c| *c = c.conj());
        }
        Ok(())
    }

    pub fn forward(&self, data: &mut [Complex<T>]) -> Result<()> {
        self.process(data, Direction::Forward)
    }

    /// Inverse transform including the `1/n` factor.
    pub fn inverse(&self, data: &mut [Complex<T>]) -> Result<()> {
        self.process(data, Direction::Inverse)?;
        let inv_n = T::one() / T::from_count(self.len);
        data.iter_mut().for_each(|c| *c = *c * inv_n);
        Ok(())
    }
}

/// Iterative in-place radix-2 transform for power-of-two lengths.
#[derive(Debug, Clone)]
struct Radix2<T> {
    len: usize,
    /// Twiddles of every stage back to back: `size / 2` entries for sizes 2, 4, ..., len.
    twiddles: Vec<Complex<T>>,
}

impl<T: Scalar> Radix2<T> {
    fn new(len: usize) -> Self {
        debug_assert!(len.is_power_of_two());
        let mut twiddles = Vec::with_capacity(len.saturating_sub(1));
        let mut size = 2;
        while size <= len {
            for k in 0..size / 2 {
                // Same angle as k * (len / size) on the full circle, so every stage reuses exact values.
                let angle = -T::TAU() * T::from_count(k * (len / size)) / T::from_count(len);
                twiddles.push(Complex::new(angle.cos(), angle.sin()));
            }
            size *= 2;
        }
        Self { len, twiddles }
    }

    fn forward(&self, data: &mut [Complex<T>]) {
        let n = self.len;
        if n <= 1 {
            return;
        }
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if i < j {
                data.swap(i, j);
            }
        }
        let mut size = 2;
        let mut offset = 0;
        while size <= n {
            let half = size / 2;
            let tw = &self.twiddles[offset..offset + half];
            for chunk in data.chunks_exact_mut(size) {
                let (lo, hi) = chunk.split_at_mut(half);
                for ((u, v), &w) in lo.iter_mut().zip(hi.iter_mut()).zip(tw) {
                    let t = *v * w;
                    *v = *u - t;
                    *u = *u + t;
                }
            }
            offset += half;
            size *= 2;
        }
    }

    fn inverse_unscaled(&self, data: &mut [Complex<T>]) {
        data.iter_mut().for_each(|c| *c = c.conj());
        self.forward(data);
        data.iter_mut().for_each(|c| *c = c.conj());
    }
}

/// Unnormalized transform of `x` in the given direction.
pub fn transform<T: Scalar>(x: &ComplexBuffer<T>, direction: Direction) -> Result<ComplexBuffer<T>> {
    let plan = FftPlan::new(x.len())?;
    let mut data = x.to_complex();
    plan.process(&mut data, direction)?;
    Ok(ComplexBuffer::from_complex(&data))
}

/// Forward DFT in `O(n log n)` for any `n >= 1`.
pub fn fft<T: Scalar>(x: &ComplexBuffer<T>) -> Result<ComplexBuffer<T>> {
    transform(x, Direction::Forward)
}

/// Inverse DFT including the `1/n` normalization.
pub fn ifft<T: Scalar>(x: &ComplexBuffer<T>) -> Result<ComplexBuffer<T>> {
    let plan = FftPlan::new(x.len())?;
    let mut data = x.to_complex();
    plan.inverse(&mut data)?;
    Ok(ComplexBuffer::from_complex(&data))
}

/// Direct `O(n^2)` DFT; the reference the fast path is checked against.
pub fn dft_naive<T: Scalar>(x: &ComplexBuffer<T>) -> Result<ComplexBuffer<T>> {
    let n = x.len();
    if n == 0 {
        return Err(Error::Empty("dft_naive"));
    }
    let input = x.to_complex();
    let out: Vec<Complex<T>> = (0..n)
        .map(|k| {
            let mut acc = Complex::new(T::zero(), T::zero());
            for (j, &v) in input.iter().enumerate() {
                let r = (j * k) % n;
                let angle = -T::TAU() * T::from_count(r) / T::from_count(n);
                acc = acc + v * Complex::new(angle.cos(), angle.sin());
            }
            acc
        })
        .collect();
    Ok(ComplexBuffer::from_complex(&out))
}
