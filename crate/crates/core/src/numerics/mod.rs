//! Dense tensors and the discrete Fourier transform.

mod complex;
pub mod fft;
mod tensor;

pub use complex::ComplexBuffer;
pub use fft::{dft_naive, fft, ifft, Direction, FftPlan};
pub use tensor::Tensor;
