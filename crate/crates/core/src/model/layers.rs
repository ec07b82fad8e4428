//! Forward definitions of the individual backbone layers.
//!
//! Activations are token-major `N x C` tensors (one row per token). The token
//! mixers work along the row axis, which is the transpose of the `C x N`
//! picture the mixing formulas are usually written in.

use super::config::NormKind;
use super::params::{ChannelMlp, NormParams, TokenParams};
use crate::circulant::{ccs_mix, Backend, CcsWeights};
use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::scalar::Scalar;

pub const LAYER_NORM_EPS: f64 = 1e-6;

/// Cuts a `3 x H x W` image into non-overlapping `p x p` patches in raster order.
///
/// Each row of the result is one patch unfolded channel-major:
/// index `ch * p * p + dy * p + dx`.
pub fn patchify<T: Scalar>(image: &Tensor<T>, patch: usize) -> Result<Tensor<T>> {
    let (ch, h, w) = image.dims3("patchify")?;
    if ch != 3 {
        return Err(Error::dim("patchify", image.shape(), &[3, h, w]));
    }
    if patch == 0 || h % patch != 0 || w % patch != 0 {
        return Err(Error::Config(format!("patch {patch} does not divide image {h}x{w}")));
    }
    let (gh, gw) = (h / patch, w / patch);
    let dim = 3 * patch * patch;
    let src = image.data();
    let mut out = Vec::with_capacity(gh * gw * dim);
    for py in 0..gh {
        for px in 0..gw {
            for c in 0..3 {
                for dy in 0..patch {
                    let row = c * h * w + (py * patch + dy) * w + px * patch;
                    out.extend_from_slice(&src[row..row + patch]);
                }
            }
        }
    }
    Tensor::matrix(gh * gw, dim, out)
}

/// Inverse of [`patchify`].
pub fn unpatchify<T: Scalar>(patches: &Tensor<T>, patch: usize, height: usize, width: usize) -> Result<Tensor<T>> {
    let (n, dim) = patches.dims2("unpatchify")?;
    let (gh, gw) = (height / patch, width / patch);
    if dim != 3 * patch * patch || n != gh * gw || height % patch != 0 || width % patch != 0 {
        return Err(Error::dim("unpatchify", patches.shape(), &[3, height, width]));
    }
    let mut out = Tensor::zeros(&[3, height, width]);
    let data = out.data_mut();
    for (t, p) in patches.data().chunks(dim).enumerate() {
        let (py, px) = (t / gw, t % gw);
        for c in 0..3 {
            for dy in 0..patch {
                let row = c * height * width + (py * patch + dy) * width + px * patch;
                let s = c * patch * patch + dy * patch;
                data[row..row + patch].copy_from_slice(&p[s..s + patch]);
            }
        }
    }
    Ok(out)
}

/// `x_i = W0ᵀ p_i + b0` for every unfolded patch row (`W0` is `3p^2 x C`).
pub fn embed_patches<T: Scalar>(patches: &Tensor<T>, w0: &Tensor<T>, b0: &Tensor<T>) -> Result<Tensor<T>> {
    let mut x = patches.matmul(w0)?;
    x.add_row_vector(b0)?;
    Ok(x)
}

pub fn patch_embed<T: Scalar>(image: &Tensor<T>, w0: &Tensor<T>, b0: &Tensor<T>, patch: usize) -> Result<Tensor<T>> {
    embed_patches(&patchify(image, patch)?, w0, b0)
}

fn check_norm<T: Scalar>(op: &'static str, x: &Tensor<T>, params: &NormParams<T>) -> Result<usize> {
    let (_, c) = x.dims2(op)?;
    if params.scale.len() != c || params.bias.len() != c {
        return Err(Error::dim(op, x.shape(), params.scale.shape()));
    }
    Ok(c)
}

/// Per-token normalization over channels, then `scale * x + bias`.
pub fn layer_norm<T: Scalar>(x: &Tensor<T>, params: &NormParams<T>) -> Result<Tensor<T>> {
    let c = check_norm("layer_norm", x, params)?;
    let inv_c = T::one() / T::from_count(c);
    let eps = T::lit(LAYER_NORM_EPS);
    let mut out = x.clone();
    for row in out.data_mut().chunks_mut(c) {
        let mean = row.iter().copied().sum::<T>() * inv_c;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_c;
        let inv_std = T::one() / (var + eps).sqrt();
        for ((v, &s), &b) in row.iter_mut().zip(params.scale.data()).zip(params.bias.data()) {
            *v = (*v - mean) * inv_std * s + b;
        }
    }
    Ok(out)
}

/// `scale * x + bias` per channel, no statistics.
pub fn affine<T: Scalar>(x: &Tensor<T>, params: &NormParams<T>) -> Result<Tensor<T>> {
    let c = check_norm("affine", x, params)?;
    let mut out = x.clone();
    for row in out.data_mut().chunks_mut(c) {
        for ((v, &s), &b) in row.iter_mut().zip(params.scale.data()).zip(params.bias.data()) {
            *v = *v * s + b;
        }
    }
    Ok(out)
}

pub fn normalize<T: Scalar>(x: &Tensor<T>, params: &NormParams<T>, kind: NormKind) -> Result<Tensor<T>> {
    match kind {
        NormKind::LayerNorm => layer_norm(x, params),
        NormKind::Affine => affine(x, params),
    }
}

/// Exact GELU, `x * Phi(x)`.
#[inline]
pub fn gelu_scalar<T: Scalar>(x: T) -> T {
    let half = T::lit(0.5);
    x * half * (T::one() + (x * T::FRAC_1_SQRT_2()).erf())
}

pub fn gelu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(gelu_scalar)
}

/// `U = X + gelu(norm(X) W1ᵀ + b1) W2ᵀ + b2`, applied per token.
pub fn channel_mixing<T: Scalar>(
    x: &Tensor<T>,
    norm: &NormParams<T>,
    kind: NormKind,
    mlp: &ChannelMlp<T>,
) -> Result<Tensor<T>> {
    let x_hat = normalize(x, norm, kind)?;
    let mut h = x_hat.matmul_nt(&mlp.w1)?;
    h.add_row_vector(&mlp.b1)?;
    let mut o = gelu(&h).matmul_nt(&mlp.w2)?;
    o.add_row_vector(&mlp.b2)?;
    x.add(&o)
}

/// `Y = U + gelu(norm(U) W3) W4` in the `C x N` picture.
pub fn token_mixing_original<T: Scalar>(
    u: &Tensor<T>,
    w3: &Tensor<T>,
    w4: &Tensor<T>,
    norm: &NormParams<T>,
    kind: NormKind,
) -> Result<Tensor<T>> {
    let u_hat = normalize(u, norm, kind)?;
    // (Ûᵀ W3)ᵀ = W3ᵀ Û, so the token-major hidden map is W3ᵀ Û.
    let hidden = w3.matmul_tn(&u_hat)?;
    let mixed = w4.matmul_tn(&gelu(&hidden))?;
    u.add(&mixed)
}

/// `Y = U + norm(U) W3` in the `C x N` picture.
pub fn token_mixing_simplified<T: Scalar>(
    u: &Tensor<T>,
    w3: &Tensor<T>,
    norm: &NormParams<T>,
    kind: NormKind,
) -> Result<Tensor<T>> {
    let (n, _) = u.dims2("token_mixing_simplified")?;
    if w3.shape() != [n, n] {
        return Err(Error::dim("token_mixing_simplified", u.shape(), w3.shape()));
    }
    let u_hat = normalize(u, norm, kind)?;
    u.add(&w3.matmul_tn(&u_hat)?)
}

/// Mixes a token-major `N x C` map with grouped circulant generators.
pub(crate) fn ccs_tokens<T: Scalar>(u_hat: &Tensor<T>, weights: &CcsWeights<T>, backend: Backend) -> Result<Tensor<T>> {
    let (n, c) = u_hat.dims2("token_mixing_ccs")?;
    let batched = u_hat.clone().reshape(&[1, n, c])?;
    ccs_mix(&batched, weights, backend)?.reshape(&[n, c])
}

/// `Y = U + ccs_mix(norm(U))`.
pub fn token_mixing_ccs<T: Scalar>(
    u: &Tensor<T>,
    weights: &CcsWeights<T>,
    norm: &NormParams<T>,
    kind: NormKind,
    backend: Backend,
) -> Result<Tensor<T>> {
    let u_hat = normalize(u, norm, kind)?;
    u.add(&ccs_tokens(&u_hat, weights, backend)?)
}

pub fn token_mixing<T: Scalar>(
    u: &Tensor<T>,
    token: &TokenParams<T>,
    norm: &NormParams<T>,
    kind: NormKind,
    backend: Backend,
) -> Result<Tensor<T>> {
    match token {
        TokenParams::Original { w3, w4 } => token_mixing_original(u, w3, w4, norm, kind),
        TokenParams::Simplified { w3 } => token_mixing_simplified(u, w3, norm, kind),
        TokenParams::Ccs(w) => token_mixing_ccs(u, w, norm, kind, backend),
    }
}

/// `logits = pooledᵀ Wh + bh` with `Wh: C x classes`.
pub fn head<T: Scalar>(pooled: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let c = pooled.len();
    let mut logits = pooled.clone().reshape(&[1, c])?.matmul(w)?;
    logits.add_row_vector(b)?;
    logits.reshape(&[b.len()])
}
