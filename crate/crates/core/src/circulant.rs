//! Circulant channel-specific (CCS) token mixing.
//!
//! A circulant `N x N` matrix is determined by its first column `w`; entry
//! `(j, i)` is `w[(j - i) mod N]`. Right-multiplying a `C x N` feature map by it
//! is the circular correlation
//!
//! ```text
//! out[c, i] = sum_j w[j] * u[c, (i + j) mod N]
//! ```
//!
//! which is the normative semantics here. The FFT backend evaluates the same
//! product as `Re(FFT[IFFT(u) * FFT(w)])` and must agree with the direct sum.
//!
//! Channels are split into `G` groups with the interleaved assignment
//! `group(c) = c mod G`; every group owns one generator row.

use num_complex::Complex;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{Direction, FftPlan, Tensor};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    Direct,
    Fft,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Direct => "direct",
            Backend::Fft => "fft",
        }
    }
}

/// Generator vectors for `G` circulant matrices, stored as a `G x N` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct CcsWeights<T> {
    w: Tensor<T>,
}

impl<T: Scalar> CcsWeights<T> {
    pub fn new(w: Tensor<T>) -> Result<Self> {
        w.dims2("CcsWeights::new")?;
        Ok(Self { w })
    }

    pub fn zeros(groups: usize, tokens: usize) -> Self {
        Self {
            w: Tensor::zeros(&[groups, tokens]),
        }
    }

    /// Uniform on `[-1/sqrt(N), 1/sqrt(N)]`, the fan-in default of a linear layer over `N` inputs.
    pub fn uniform_init<R: Rng + ?Sized>(groups: usize, tokens: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (tokens as f64).sqrt();
        Self {
            w: Tensor::from_fn(&[groups, tokens], |_| T::lit(rng.gen_range(-bound..=bound))),
        }
    }

    pub fn groups(&self) -> usize {
        self.w.shape()[0]
    }

    pub fn tokens(&self) -> usize {
        self.w.shape()[1]
    }

    pub fn row(&self, group: usize) -> &[T] {
        self.w.row(group)
    }

    pub fn tensor(&self) -> &Tensor<T> {
        &self.w
    }

    pub fn tensor_mut(&mut self) -> &mut Tensor<T> {
        &mut self.w
    }

    pub fn into_tensor(self) -> Tensor<T> {
        self.w
    }

    /// Always `G * N`.
    pub fn param_count(&self) -> usize {
        self.w.len()
    }

    fn check_against(&self, tokens: usize, channels: usize) -> Result<GroupLayout> {
        if self.tokens() != tokens {
            return Err(Error::dim("ccs_mix", &[self.groups(), self.tokens()], &[tokens, channels]));
        }
        GroupLayout::new(channels, self.groups())
    }
}

/// Channel-to-group assignment `group(c) = c mod G`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupLayout {
    channels: usize,
    groups: usize,
}

impl GroupLayout {
    pub fn new(channels: usize, groups: usize) -> Result<Self> {
        if groups == 0 || channels % groups != 0 {
            return Err(Error::Config(format!(
                "{groups} groups do not divide {channels} channels"
            )));
        }
        Ok(Self { channels, groups })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    #[inline]
    pub fn group_of(&self, channel: usize) -> usize {
        channel % self.groups
    }

    pub fn channels_in(&self, group: usize) -> impl Iterator<Item = usize> {
        (group..self.channels).step_by(self.groups)
    }
}

/// Dense `N x N` circulant with `w` as its first column.
pub fn materialize_circulant<T: Scalar>(w: &[T]) -> Tensor<T> {
    let n = w.len();
    Tensor::from_fn(&[n, n], |k| {
        let (j, i) = (k / n, k % n);
        w[(j + n - i) % n]
    })
}

/// `out[i] = sum_j w[j] * x[(i + j) mod N]`, with the wrap split out of the inner loop.
pub(crate) fn correlate_row<T: Scalar>(x: &[T], w: &[T], out: &mut [T]) {
    let n = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = T::zero();
        let split = n - i;
        for (&wj, &xv) in w[..split].iter().zip(&x[i..]) {
            acc += wj * xv;
        }
        for (&wj, &xv) in w[split..].iter().zip(&x[..i]) {
            acc += wj * xv;
        }
        *o = acc;
    }
}

fn reversed_generator<T: Scalar>(w: &[T]) -> Vec<T> {
    let n = w.len();
    (0..n).map(|j| w[(n - j) % n]).collect()
}

fn check_row_len(op: &'static str, u_shape: &[usize], n: usize, w_len: usize) -> Result<()> {
    if n != w_len {
        return Err(Error::dim(op, u_shape, &[w_len]));
    }
    Ok(())
}

/// Circular correlation of every row of a `C x N` map with `w`, by direct summation.
pub fn circulant_correlate_direct<T: Scalar>(u_hat: &Tensor<T>, w: &[T]) -> Result<Tensor<T>> {
    let (_, n) = u_hat.dims2("circulant_correlate_direct")?;
    check_row_len("circulant_correlate_direct", u_hat.shape(), n, w.len())?;
    let mut out = Tensor::zeros(u_hat.shape());
    for (src, dst) in u_hat.data().chunks(n).zip(out.data_mut().chunks_mut(n)) {
        correlate_row(src, w, dst);
    }
    Ok(out)
}

/// Same product as [`circulant_correlate_direct`], evaluated through the DFT.
pub fn circulant_correlate_fft<T: Scalar>(u_hat: &Tensor<T>, w: &[T]) -> Result<Tensor<T>> {
    let (_, n) = u_hat.dims2("circulant_correlate_fft")?;
    check_row_len("circulant_correlate_fft", u_hat.shape(), n, w.len())?;
    let plan = SpectralPlan::from_rows(std::iter::once(w), n)?;
    let mut out = Tensor::zeros(u_hat.shape());
    let MixWorkspace { mut scratch, mut work, .. } = MixWorkspace::new(n);
    for (src, dst) in u_hat.data().chunks(n).zip(out.data_mut().chunks_mut(n)) {
        plan.correlate_row(0, src, dst, &mut scratch, &mut work);
    }
    Ok(out)
}

/// FFT tables for a fixed set of generator rows: the length-`N` chirp plan and
/// `FFT(w_g)` for every group.
#[derive(Debug, Clone)]
pub struct SpectralPlan<T> {
    fft: FftPlan<T>,
    spectra: Vec<Vec<Complex<T>>>,
    max_w: T,
}

impl<T: Scalar> SpectralPlan<T> {
    pub fn new(weights: &CcsWeights<T>) -> Result<Self> {
        Self::from_rows((0..weights.groups()).map(|g| weights.row(g)), weights.tokens())
    }

    fn from_rows<'a>(rows: impl Iterator<Item = &'a [T]>, n: usize) -> Result<Self> {
        let fft = FftPlan::new(n)?;
        let mut max_w = T::zero();
        let mut spectra = Vec::new();
        for row in rows {
            let mut spec: Vec<Complex<T>> = row
                .iter()
                .map(|&v| {
                    max_w = max_w.max(v.abs());
                    Complex::new(v, T::zero())
                })
                .collect();
            fft.forward(&mut spec)?;
            spectra.push(spec);
        }
        Ok(Self { fft, spectra, max_w })
    }

    pub fn tokens(&self) -> usize {
        self.fft.len()
    }

    pub fn groups(&self) -> usize {
        self.spectra.len()
    }

    fn correlate_row(&self, group: usize, x: &[T], out: &mut [T], scratch: &mut [Complex<T>], work: &mut [Complex<T>]) {
        for (s, &v) in scratch.iter_mut().zip(x) {
            *s = Complex::new(v, T::zero());
        }
        // Lengths are fixed by construction, so the plan cannot reject them.
        self.fft
            .process_with(scratch, Direction::Inverse, work)
            .expect("scratch sized to plan");
        let inv_n = T::one() / T::from_count(x.len());
        for (s, &k) in scratch.iter_mut().zip(&self.spectra[group]) {
            *s = *s * k * inv_n;
        }
        self.fft
            .process_with(scratch, Direction::Forward, work)
            .expect("scratch sized to plan");

        if cfg!(debug_assertions) {
            let n = x.len();
            let max_x = x.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            let scale = T::one() + max_x * self.max_w * T::from_count(n);
            let tol = T::lit(1e-9).max(T::epsilon() * T::lit(1e4)) * scale;
            let residue = scratch.iter().fold(T::zero(), |m, c| m.max(c.im.abs()));
            debug_assert!(residue <= tol, "imaginary residue {residue} exceeds {tol}");
        }
        for (o, s) in out.iter_mut().zip(scratch.iter()) {
            *o = s.re;
        }
    }
}

fn gather_column<T: Scalar>(x: &[T], n: usize, c_total: usize, b: usize, c: usize, col: &mut [T]) {
    let base = b * n * c_total + c;
    for (i, v) in col.iter_mut().enumerate() {
        *v = x[base + i * c_total];
    }
}

fn scatter_column<T: Scalar>(out: &mut [T], n: usize, c_total: usize, b: usize, c: usize, col: &[T]) {
    let base = b * n * c_total + c;
    for (i, &v) in col.iter().enumerate() {
        out[base + i * c_total] = v;
    }
}

/// Reusable buffers for one `ccs_mix` call at a fixed token count.
#[derive(Debug, Clone)]
pub struct MixWorkspace<T> {
    col: Vec<T>,
    res: Vec<T>,
    scratch: Vec<Complex<T>>,
    work: Vec<Complex<T>>,
}

impl<T: Scalar> MixWorkspace<T> {
    pub fn new(tokens: usize) -> Self {
        let zero = Complex::new(T::zero(), T::zero());
        let padded = (2 * tokens.max(1) - 1).next_power_of_two();
        Self {
            col: vec![T::zero(); tokens],
            res: vec![T::zero(); tokens],
            scratch: vec![zero; tokens],
            work: vec![zero; padded],
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.col.len() != n {
            return Err(Error::dim("ccs_mix workspace", &[self.col.len()], &[n]));
        }
        Ok(())
    }
}

/// Grouped circulant mixing along the token axis of a `B x N x C` tensor.
///
/// Channel `c` is correlated with generator row `c mod G`. Residual and
/// normalization are not applied here.
pub fn ccs_mix<T: Scalar>(x: &Tensor<T>, weights: &CcsWeights<T>, backend: Backend) -> Result<Tensor<T>> {
    let (_, n, _) = x.dims3("ccs_mix")?;
    let mut out = Tensor::zeros(x.shape());
    ccs_mix_into(x, weights, backend, &mut out, &mut MixWorkspace::new(n))?;
    Ok(out)
}

/// [`ccs_mix`] writing into `out`. The FFT backend builds its tables on every call.
pub fn ccs_mix_into<T: Scalar>(
    x: &Tensor<T>,
    weights: &CcsWeights<T>,
    backend: Backend,
    out: &mut Tensor<T>,
    ws: &mut MixWorkspace<T>,
) -> Result<()> {
    let (b_total, n, c_total) = x.dims3("ccs_mix")?;
    let layout = weights.check_against(n, c_total)?;
    if out.shape() != x.shape() {
        return Err(Error::dim("ccs_mix", out.shape(), x.shape()));
    }
    ws.check(n)?;
    match backend {
        Backend::Direct => {
            for b in 0..b_total {
                for c in 0..c_total {
                    gather_column(x.data(), n, c_total, b, c, &mut ws.col);
                    correlate_row(&ws.col, weights.row(layout.group_of(c)), &mut ws.res);
                    scatter_column(out.data_mut(), n, c_total, b, c, &ws.res);
                }
            }
            Ok(())
        }
        Backend::Fft => ccs_mix_planned_into(x, &SpectralPlan::new(weights)?, out, ws),
    }
}

/// FFT-backend mixing with precomputed tables.
pub fn ccs_mix_planned<T: Scalar>(x: &Tensor<T>, plan: &SpectralPlan<T>) -> Result<Tensor<T>> {
    let (_, n, _) = x.dims3("ccs_mix")?;
    let mut out = Tensor::zeros(x.shape());
    ccs_mix_planned_into(x, plan, &mut out, &mut MixWorkspace::new(n))?;
    Ok(out)
}

pub fn ccs_mix_planned_into<T: Scalar>(
    x: &Tensor<T>,
    plan: &SpectralPlan<T>,
    out: &mut Tensor<T>,
    ws: &mut MixWorkspace<T>,
) -> Result<()> {
    let (b_total, n, c_total) = x.dims3("ccs_mix")?;
    if plan.tokens() != n {
        return Err(Error::dim("ccs_mix", &[plan.groups(), plan.tokens()], &[n, c_total]));
    }
    if out.shape() != x.shape() {
        return Err(Error::dim("ccs_mix", out.shape(), x.shape()));
    }
    ws.check(n)?;
    let layout = GroupLayout::new(c_total, plan.groups())?;
    let MixWorkspace { col, res, scratch, work } = ws;
    for b in 0..b_total {
        for c in 0..c_total {
            gather_column(x.data(), n, c_total, b, c, col);
            plan.correlate_row(layout.group_of(c), col, res, scratch, work);
            scatter_column(out.data_mut(), n, c_total, b, c, res);
        }
    }
    Ok(())
}

/// Reverse-mode derivative of [`ccs_mix`].
///
/// Returns `(grad_x, grad_w)` where, per channel `c` in group `g`,
/// `grad_x[i] = sum_j w[j] * grad_out[(i - j) mod N]` (the transposed
/// circulant) and `grad_w[g, j]` accumulates `sum_i grad_out[i] * x[(i + j) mod N]`
/// over batch elements and channels of the group.
pub fn ccs_mix_adjoint<T: Scalar>(
    grad_out: &Tensor<T>,
    x: &Tensor<T>,
    weights: &CcsWeights<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let (b_total, n, c_total) = x.dims3("ccs_mix_adjoint")?;
    if grad_out.shape() != x.shape() {
        return Err(Error::dim("ccs_mix_adjoint", grad_out.shape(), x.shape()));
    }
    let layout = weights.check_against(n, c_total)?;
    let reversed: Vec<Vec<T>> = (0..layout.groups())
        .map(|g| reversed_generator(weights.row(g)))
        .collect();

    let mut grad_x = Tensor::zeros(x.shape());
    let mut grad_w = Tensor::zeros(weights.tensor().shape());
    let mut g_col = vec![T::zero(); n];
    let mut x_col = vec![T::zero(); n];
    let mut res = vec![T::zero(); n];
    for b in 0..b_total {
        for c in 0..c_total {
            let group = layout.group_of(c);
            gather_column(grad_out.data(), n, c_total, b, c, &mut g_col);
            gather_column(x.data(), n, c_total, b, c, &mut x_col);
            correlate_row(&g_col, &reversed[group], &mut res);
            scatter_column(grad_x.data_mut(), n, c_total, b, c, &res);
            correlate_row(&x_col, &g_col, &mut res);
            for (acc, &v) in grad_w.data_mut()[group * n..(group + 1) * n].iter_mut().zip(&res) {
                *acc += v;
            }
        }
    }
    Ok((grad_x, grad_w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
    }

    fn rel_err(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
        a.max_abs_diff(b).unwrap() / (1.0 + b.max_abs())
    }

    #[test]
    fn unit_generator_materializes_identity() {
        assert_eq!(materialize_circulant(&[1.0, 0.0, 0.0]), Tensor::identity(3));
    }

    #[test]
    fn shift_generator_materializes_cyclic_permutation() {
        let m = materialize_circulant(&[0.0, 1.0, 0.0]);
        assert_eq!(m.data(), &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn materialized_layout_matches_generator_rotation() {
        let m = materialize_circulant(&[10.0, 11.0, 12.0, 13.0]);
        let expected = [
            10.0, 13.0, 12.0, 11.0, //
            11.0, 10.0, 13.0, 12.0, //
            12.0, 11.0, 10.0, 13.0, //
            13.0, 12.0, 11.0, 10.0,
        ];
        assert_eq!(m.data(), &expected);
    }

    #[test]
    fn unit_generator_is_identity_for_direct() {
        let u = rand_tensor(&[3, 5], 1);
        let out = circulant_correlate_direct(&u, &[1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(out, u);
    }

    #[test]
    fn second_unit_generator_shifts_columns() {
        let u = Tensor::matrix(1, 4, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let out = circulant_correlate_direct(&u, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert_eq!(out.data(), &[2.0, 3.0, 4.0, 1.0]);
    }

    #[test]
    fn direct_equals_dense_circulant_product() {
        let u = rand_tensor(&[2, 4], 2);
        let w = [0.3, -1.2, 0.7, 2.0];
        let direct = circulant_correlate_direct(&u, &w).unwrap();
        let dense = u.matmul(&materialize_circulant(&w)).unwrap();
        assert!(direct.max_abs_diff(&dense).unwrap() < 1e-15);
    }

    #[test]
    fn fft_unit_generator_is_identity() {
        let u = rand_tensor(&[2, 6], 3);
        let out = circulant_correlate_fft(&u, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(out.max_abs_diff(&u).unwrap() <= 1e-12);
    }

    #[test]
    fn fft_matches_direct_at_196_and_7() {
        for (c, n, seed) in [(3, 196, 4), (2, 7, 5)] {
            let u = rand_tensor(&[c, n], seed);
            let w = rand_tensor(&[n], seed + 100).into_data();
            let direct = circulant_correlate_direct(&u, &w).unwrap();
            let fast = circulant_correlate_fft(&u, &w).unwrap();
            assert!(rel_err(&fast, &direct) <= 1e-9);
        }
    }

    #[test]
    fn generator_length_is_checked() {
        let u = rand_tensor(&[2, 4], 6);
        assert!(matches!(
            circulant_correlate_direct(&u, &[1.0, 0.0]),
            Err(Error::Dimension { .. })
        ));
        assert!(circulant_correlate_fft(&u, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn single_group_applies_same_generator_everywhere() {
        let x = rand_tensor(&[2, 5, 3], 7);
        let w = rand_tensor(&[1, 5], 8);
        let weights = CcsWeights::new(w.clone()).unwrap();
        let out = ccs_mix(&x, &weights, Backend::Direct).unwrap();
        for b in 0..2 {
            for c in 0..3 {
                let col: Vec<f64> = (0..5).map(|i| x.data()[b * 15 + i * 3 + c]).collect();
                let u = Tensor::matrix(1, 5, col).unwrap();
                let expected = circulant_correlate_direct(&u, w.data()).unwrap();
                for i in 0..5 {
                    assert_eq!(out.data()[b * 15 + i * 3 + c], expected.data()[i]);
                }
            }
        }
    }

    #[test]
    fn per_channel_identity_generators() {
        let x = rand_tensor(&[1, 4, 4], 9);
        let mut w = Tensor::zeros(&[4, 4]);
        for g in 0..4 {
            w.set2(g, 0, 1.0);
        }
        let weights = CcsWeights::new(w).unwrap();
        for backend in [Backend::Direct, Backend::Fft] {
            let out = ccs_mix(&x, &weights, backend).unwrap();
            assert!(out.max_abs_diff(&x).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn interleaved_groups_match_per_channel_dense_loop() {
        let x = rand_tensor(&[1, 4, 4], 10);
        let weights = CcsWeights::new(rand_tensor(&[2, 4], 11)).unwrap();
        let out = ccs_mix(&x, &weights, Backend::Direct).unwrap();
        let fast = ccs_mix(&x, &weights, Backend::Fft).unwrap();
        for c in 0..4 {
            let dense = materialize_circulant(weights.row(c % 2));
            let col: Vec<f64> = (0..4).map(|i| x.data()[i * 4 + c]).collect();
            let expected = Tensor::matrix(1, 4, col).unwrap().matmul(&dense).unwrap();
            for i in 0..4 {
                let got = out.data()[i * 4 + c];
                assert!((got - expected.data()[i]).abs() < 1e-15);
                assert!((fast.data()[i * 4 + c] - got).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn indivisible_groups_are_a_configuration_error() {
        let x = rand_tensor(&[1, 4, 6], 12);
        let weights = CcsWeights::<f64>::zeros(4, 4);
        assert!(matches!(ccs_mix(&x, &weights, Backend::Direct), Err(Error::Config(_))));
        assert!(matches!(ccs_mix(&x, &weights, Backend::Fft), Err(Error::Config(_))));
        let wrong_n = CcsWeights::<f64>::zeros(2, 5);
        assert!(matches!(ccs_mix(&x, &wrong_n, Backend::Direct), Err(Error::Dimension { .. })));
    }

    #[test]
    fn unit_generator_has_identity_adjoint() {
        let x = rand_tensor(&[2, 5, 2], 13);
        let g = rand_tensor(&[2, 5, 2], 14);
        let mut w = Tensor::zeros(&[1, 5]);
        w.set2(0, 0, 1.0);
        let (gx, _) = ccs_mix_adjoint(&g, &x, &CcsWeights::new(w).unwrap()).unwrap();
        assert_eq!(gx, g);
    }

    #[test]
    fn adjoint_matches_dense_transpose() {
        let x = rand_tensor(&[1, 4, 1], 15);
        let g = rand_tensor(&[1, 4, 1], 16);
        let w = rand_tensor(&[1, 4], 17);
        let (gx, _) = ccs_mix_adjoint(&g, &x, &CcsWeights::new(w.clone()).unwrap()).unwrap();
        let dense_t = materialize_circulant(w.data()).transpose().unwrap();
        let g_row = Tensor::matrix(1, 4, g.data().to_vec()).unwrap();
        // Row-vector form: forward is x·W, so the adjoint is g·Wᵀ.
        let expected = g_row.matmul(&dense_t).unwrap();
        assert!((gx.data().iter().zip(expected.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)) < 1e-15);
    }

    #[test]
    fn adjoint_weight_gradient_matches_finite_differences() {
        let x = rand_tensor(&[2, 6, 4], 18);
        let g = rand_tensor(&[2, 6, 4], 19);
        let weights = CcsWeights::new(rand_tensor(&[2, 6], 20)).unwrap();
        let (_, gw) = ccs_mix_adjoint(&g, &x, &weights).unwrap();
        let loss = |w: &CcsWeights<f64>| ccs_mix(&x, w, Backend::Direct).unwrap().dot(&g).unwrap();
        let h = 1e-5;
        for k in 0..gw.len() {
            let mut plus = weights.clone();
            plus.tensor_mut().data_mut()[k] += h;
            let mut minus = weights.clone();
            minus.tensor_mut().data_mut()[k] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let a = gw.data()[k];
            assert!((a - fd).abs() <= 1e-6 * a.abs().max(fd.abs()).max(1.0), "k={k} {a} vs {fd}");
        }
    }

    #[test]
    fn group_layout_is_round_robin() {
        let layout = GroupLayout::new(8, 4).unwrap();
        assert_eq!(layout.channels_in(1).collect::<Vec<_>>(), vec![1, 5]);
        assert_eq!(layout.group_of(6), 2);
        assert!(GroupLayout::new(8, 3).is_err());
    }

    #[test]
    fn init_bounds_and_param_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = CcsWeights::<f64>::uniform_init(8, 196, &mut rng);
        assert_eq!(w.param_count(), 1568);
        let bound = 1.0 / 196f64.sqrt();
        assert!(w.tensor().data().iter().all(|v| v.abs() <= bound));
    }
}
