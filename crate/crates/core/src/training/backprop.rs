//! Hand-written reverse-mode derivatives for every layer, and the full
//! backward pass composed from them.
//!
//! Each `*_backward` takes the layer input (intermediates are recomputed) and
//! the gradient of a scalar loss with respect to the layer output.

use crate::circulant::{ccs_mix_adjoint, Backend, CcsWeights};
use crate::error::{Error, Result};
use crate::model::layers::{gelu, normalize, patchify, LAYER_NORM_EPS};
use crate::model::{
    channel_mixing, head, token_mixing, BlockParams, ChannelMlp, MixerConfig, ModelParams, NormKind, NormParams,
    TokenParams,
};
use crate::numerics::Tensor;
use crate::scalar::Scalar;

/// Gradient container: same layout as the parameters it differentiates.
pub type ParamGrads<T> = ModelParams<T>;

/// `d gelu / dx = Phi(x) + x phi(x)`.
#[inline]
pub fn gelu_derivative<T: Scalar>(x: T) -> T {
    let half = T::lit(0.5);
    let cdf = half * (T::one() + (x * T::FRAC_1_SQRT_2()).erf());
    let pdf = (-half * x * x).exp() * T::lit(0.398_942_280_401_432_7);
    cdf + x * pdf
}

pub fn gelu_backward<T: Scalar>(x: &Tensor<T>, grad: &Tensor<T>) -> Result<Tensor<T>> {
    x.zip_map(grad, "gelu_backward", |v, g| gelu_derivative(v) * g)
}

fn norm_grads<T: Scalar>(c: usize) -> NormParams<T> {
    NormParams {
        scale: Tensor::zeros(&[c]),
        bias: Tensor::zeros(&[c]),
    }
}

/// Returns `(grad_x, grad_params)`.
pub fn layer_norm_backward<T: Scalar>(
    x: &Tensor<T>,
    params: &NormParams<T>,
    grad: &Tensor<T>,
) -> Result<(Tensor<T>, NormParams<T>)> {
    let (_, c) = x.dims2("layer_norm_backward")?;
    if grad.shape() != x.shape() || params.channels() != c {
        return Err(Error::dim("layer_norm_backward", x.shape(), grad.shape()));
    }
    let inv_c = T::one() / T::from_count(c);
    let eps = T::lit(LAYER_NORM_EPS);
    let mut gp = norm_grads(c);
    let mut gx = Tensor::zeros(x.shape());
    let mut x_hat = vec![T::zero(); c];
    let mut gxh = vec![T::zero(); c];
    for ((row, g_row), out) in x.data().chunks(c).zip(grad.data().chunks(c)).zip(gx.data_mut().chunks_mut(c)) {
        let mean = row.iter().copied().sum::<T>() * inv_c;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_c;
        let inv_std = T::one() / (var + eps).sqrt();
        for k in 0..c {
            x_hat[k] = (row[k] - mean) * inv_std;
            gxh[k] = g_row[k] * params.scale.data()[k];
            gp.scale.data_mut()[k] += g_row[k] * x_hat[k];
            gp.bias.data_mut()[k] += g_row[k];
        }
        let mean_g = gxh.iter().copied().sum::<T>() * inv_c;
        let mean_gx = gxh.iter().zip(&x_hat).map(|(&a, &b)| a * b).sum::<T>() * inv_c;
        for k in 0..c {
            out[k] = inv_std * (gxh[k] - mean_g - x_hat[k] * mean_gx);
        }
    }
    Ok((gx, gp))
}

pub fn affine_backward<T: Scalar>(
    x: &Tensor<T>,
    params: &NormParams<T>,
    grad: &Tensor<T>,
) -> Result<(Tensor<T>, NormParams<T>)> {
    let (_, c) = x.dims2("affine_backward")?;
    if grad.shape() != x.shape() || params.channels() != c {
        return Err(Error::dim("affine_backward", x.shape(), grad.shape()));
    }
    let mut gp = norm_grads(c);
    let mut gx = Tensor::zeros(x.shape());
    for ((row, g_row), out) in x.data().chunks(c).zip(grad.data().chunks(c)).zip(gx.data_mut().chunks_mut(c)) {
        for k in 0..c {
            out[k] = g_row[k] * params.scale.data()[k];
            gp.scale.data_mut()[k] += g_row[k] * row[k];
            gp.bias.data_mut()[k] += g_row[k];
        }
    }
    Ok((gx, gp))
}

pub fn normalize_backward<T: Scalar>(
    x: &Tensor<T>,
    params: &NormParams<T>,
    kind: NormKind,
    grad: &Tensor<T>,
) -> Result<(Tensor<T>, NormParams<T>)> {
    match kind {
        NormKind::LayerNorm => layer_norm_backward(x, params, grad),
        NormKind::Affine => affine_backward(x, params, grad),
    }
}

/// Gradients of `embed_patches` with respect to the patches, `W0` and `b0`.
pub fn patch_embed_backward<T: Scalar>(
    patches: &Tensor<T>,
    w0: &Tensor<T>,
    grad: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let d_patches = grad.matmul_nt(w0)?;
    let d_w = patches.matmul_tn(grad)?;
    let d_b = grad.sum_rows()?;
    Ok((d_patches, d_w, d_b))
}

/// Returns `(grad_x, grad_norm, grad_mlp)`.
pub fn channel_mixing_backward<T: Scalar>(
    x: &Tensor<T>,
    norm: &NormParams<T>,
    kind: NormKind,
    mlp: &ChannelMlp<T>,
    grad: &Tensor<T>,
) -> Result<(Tensor<T>, NormParams<T>, ChannelMlp<T>)> {
    let x_hat = normalize(x, norm, kind)?;
    let mut h = x_hat.matmul_nt(&mlp.w1)?;
    h.add_row_vector(&mlp.b1)?;
    let a = gelu(&h);

    let d_w2 = grad.matmul_tn(&a)?;
    let d_b2 = grad.sum_rows()?;
    let d_a = grad.matmul(&mlp.w2)?;
    let d_h = gelu_backward(&h, &d_a)?;
    let d_w1 = d_h.matmul_tn(&x_hat)?;
    let d_b1 = d_h.sum_rows()?;
    let d_x_hat = d_h.matmul(&mlp.w1)?;
    let (mut d_x, d_norm) = normalize_backward(x, norm, kind, &d_x_hat)?;
    d_x.add_assign(grad)?;
    Ok((
        d_x,
        d_norm,
        ChannelMlp {
            w1: d_w1,
            b1: d_b1,
            w2: d_w2,
            b2: d_b2,
        },
    ))
}

/// Returns `(grad_u, grad_norm, grad_token)`; the token gradient has the same
/// variant as `token`.
pub fn token_mixing_backward<T: Scalar>(
    u: &Tensor<T>,
    token: &TokenParams<T>,
    norm: &NormParams<T>,
    kind: NormKind,
    grad: &Tensor<T>,
) -> Result<(Tensor<T>, NormParams<T>, TokenParams<T>)> {
    let u_hat = normalize(u, norm, kind)?;
    let (d_u_hat, d_token) = match token {
        TokenParams::Original { w3, w4 } => {
            let hidden = w3.matmul_tn(&u_hat)?;
            let s = gelu(&hidden);
            let d_w4 = s.matmul_nt(grad)?;
            let d_s = w4.matmul(grad)?;
            let d_hidden = gelu_backward(&hidden, &d_s)?;
            let d_w3 = u_hat.matmul_nt(&d_hidden)?;
            (w3.matmul(&d_hidden)?, TokenParams::Original { w3: d_w3, w4: d_w4 })
        }
        TokenParams::Simplified { w3 } => {
            let d_w3 = u_hat.matmul_nt(grad)?;
            (w3.matmul(grad)?, TokenParams::Simplified { w3: d_w3 })
        }
        TokenParams::Ccs(weights) => {
            let (n, c) = u_hat.dims2("token_mixing_backward")?;
            let g = grad.clone().reshape(&[1, n, c])?;
            let x = u_hat.clone().reshape(&[1, n, c])?;
            let (d_x, d_w) = ccs_mix_adjoint(&g, &x, weights)?;
            (d_x.reshape(&[n, c])?, TokenParams::Ccs(CcsWeights::new(d_w)?))
        }
    };
    let (mut d_u, d_norm) = normalize_backward(u, norm, kind, &d_u_hat)?;
    d_u.add_assign(grad)?;
    Ok((d_u, d_norm, d_token))
}

/// Returns `(grad_pooled, grad_w, grad_b)`.
pub fn head_backward<T: Scalar>(
    pooled: &Tensor<T>,
    w: &Tensor<T>,
    grad_logits: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (c, k) = w.dims2("head_backward")?;
    if pooled.len() != c || grad_logits.len() != k {
        return Err(Error::dim("head_backward", pooled.shape(), grad_logits.shape()));
    }
    let p = pooled.clone().reshape(&[c, 1])?;
    let g = grad_logits.clone().reshape(&[1, k])?;
    let d_w = p.matmul(&g)?;
    let d_pooled = w.matmul_nt(&g)?.reshape(&[c])?;
    Ok((d_pooled, d_w, grad_logits.clone()))
}

/// Softmax cross-entropy of one sample; returns `(loss, grad_logits)`.
pub fn cross_entropy<T: Scalar>(logits: &Tensor<T>, label: usize) -> Result<(T, Tensor<T>)> {
    let k = logits.len();
    if label >= k {
        return Err(Error::Config(format!("label {label} out of range for {k} classes")));
    }
    let max = logits.data().iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let exps: Vec<T> = logits.data().iter().map(|&v| (v - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    let loss = total.ln() + max - logits.data()[label];
    let mut grad = Tensor::vector(exps.iter().map(|&e| e / total).collect());
    grad.data_mut()[label] -= T::one();
    Ok((loss, grad))
}

/// Activations recorded by [`forward_cached`].
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    pub patches: Tensor<T>,
    /// Input of each block's channel mixing.
    pub block_inputs: Vec<Tensor<T>>,
    /// Input of each block's token mixing.
    pub token_inputs: Vec<Tensor<T>>,
    /// Input of the final norm.
    pub stack_output: Tensor<T>,
    pub pooled: Tensor<T>,
    pub logits: Tensor<T>,
}

fn ensure_finite<T: Scalar>(t: &Tensor<T>, what: impl FnOnce() -> String) -> Result<()> {
    if t.all_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what()))
    }
}

/// Forward pass over unfolded patches, keeping every layer input.
///
/// Fails with [`Error::NonFinite`] naming the first layer whose output is not finite.
pub fn forward_cached<T: Scalar>(
    patches: &Tensor<T>,
    params: &ModelParams<T>,
    config: &MixerConfig,
    backend: Backend,
) -> Result<ForwardCache<T>> {
    let (n, dim) = patches.dims2("forward_cached")?;
    if n != config.tokens || dim != config.patch_dim() {
        return Err(Error::dim("forward_cached", patches.shape(), &[config.tokens, config.patch_dim()]));
    }
    let mut x = crate::model::layers::embed_patches(patches, &params.patch_w, &params.patch_b)?;
    ensure_finite(&x, || "patch_embed".into())?;
    let mut block_inputs = Vec::with_capacity(params.blocks.len());
    let mut token_inputs = Vec::with_capacity(params.blocks.len());
    for (i, BlockParams { channel_norm, channel_mlp, token_norm, token }) in params.blocks.iter().enumerate() {
        let u = channel_mixing(&x, channel_norm, config.norm, channel_mlp).map_err(|e| e.in_block(i))?;
        ensure_finite(&u, || format!("block {i} channel_mixing"))?;
        let y = token_mixing(&u, token, token_norm, config.norm, backend).map_err(|e| e.in_block(i))?;
        ensure_finite(&y, || format!("block {i} token_mixing"))?;
        block_inputs.push(x);
        token_inputs.push(u);
        x = y;
    }
    let normed = normalize(&x, &params.final_norm, config.norm)?;
    ensure_finite(&normed, || "final_norm".into())?;
    let pooled = normed.mean_rows()?;
    let logits = head(&pooled, &params.head_w, &params.head_b)?;
    ensure_finite(&logits, || "head".into())?;
    Ok(ForwardCache {
        patches: patches.clone(),
        block_inputs,
        token_inputs,
        stack_output: x,
        pooled,
        logits,
    })
}

/// Loss and exact parameter gradients for one unfolded sample.
pub fn backward_patches<T: Scalar>(
    patches: &Tensor<T>,
    label: usize,
    params: &ModelParams<T>,
    config: &MixerConfig,
    backend: Backend,
) -> Result<(T, ParamGrads<T>)> {
    let cache = forward_cached(patches, params, config, backend)?;
    let (loss, d_logits) = cross_entropy(&cache.logits, label)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("cross_entropy".into()));
    }

    let mut grads = params.zeros_like();
    let (d_pooled, d_hw, d_hb) = head_backward(&cache.pooled, &params.head_w, &d_logits)?;
    grads.head_w = d_hw;
    grads.head_b = d_hb;

    let n = config.tokens;
    let inv_n = T::one() / T::from_count(n);
    let c = config.hidden;
    let d_normed = Tensor::from_fn(&[n, c], |k| d_pooled.data()[k % c] * inv_n);
    let (mut d_x, d_final) = normalize_backward(&cache.stack_output, &params.final_norm, config.norm, &d_normed)?;
    grads.final_norm = d_final;

    for i in (0..params.blocks.len()).rev() {
        let block = &params.blocks[i];
        let (d_u, d_tnorm, d_token) =
            token_mixing_backward(&cache.token_inputs[i], &block.token, &block.token_norm, config.norm, &d_x)
                .map_err(|e| e.in_block(i))?;
        let (d_in, d_cnorm, d_mlp) = channel_mixing_backward(
            &cache.block_inputs[i],
            &block.channel_norm,
            config.norm,
            &block.channel_mlp,
            &d_u,
        )
        .map_err(|e| e.in_block(i))?;
        grads.blocks[i] = BlockParams {
            channel_norm: d_cnorm,
            channel_mlp: d_mlp,
            token_norm: d_tnorm,
            token: d_token,
        };
        d_x = d_in;
    }

    let (_, d_w0, d_b0) = patch_embed_backward(&cache.patches, &params.patch_w, &d_x)?;
    grads.patch_w = d_w0;
    grads.patch_b = d_b0;
    Ok((loss, grads))
}

/// Softmax cross-entropy loss of one image and its gradients with respect to every parameter.
pub fn backward<T: Scalar>(
    image: &Tensor<T>,
    label: usize,
    params: &ModelParams<T>,
    config: &MixerConfig,
) -> Result<(T, ParamGrads<T>)> {
    backward_patches(&patchify(image, config.patch)?, label, params, config, Backend::Direct)
}

/// Forward-only loss, for finite differences and evaluation.
pub fn loss_patches<T: Scalar>(
    patches: &Tensor<T>,
    label: usize,
    params: &ModelParams<T>,
    config: &MixerConfig,
    backend: Backend,
) -> Result<T> {
    let logits = crate::model::forward_patches(patches, params, config, backend)?;
    Ok(cross_entropy(&logits, label)?.0)
}
