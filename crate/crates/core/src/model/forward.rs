use super::config::MixerConfig;
use super::layers::{channel_mixing, embed_patches, head, normalize, patchify, token_mixing};
use super::params::ModelParams;
use crate::circulant::Backend;
use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::scalar::Scalar;

/// Logits for one `3 x H x W` image, using the direct circulant backend.
pub fn model_forward<T: Scalar>(image: &Tensor<T>, params: &ModelParams<T>, config: &MixerConfig) -> Result<Tensor<T>> {
    model_forward_with(image, params, config, Backend::Direct)
}

pub fn model_forward_with<T: Scalar>(
    image: &Tensor<T>,
    params: &ModelParams<T>,
    config: &MixerConfig,
    backend: Backend,
) -> Result<Tensor<T>> {
    let (_, h, w) = image.dims3("model_forward")?;
    if h != config.image_height || w != config.image_width {
        return Err(Error::dim(
            "model_forward",
            image.shape(),
            &[3, config.image_height, config.image_width],
        ));
    }
    forward_patches(&patchify(image, config.patch)?, params, config, backend)
}

/// Embeds the block stack output; shared by the forward pass and tests that
/// need the pre-pool activations.
pub fn encode_patches<T: Scalar>(
    patches: &Tensor<T>,
    params: &ModelParams<T>,
    config: &MixerConfig,
    backend: Backend,
) -> Result<Tensor<T>> {
    let (n, dim) = patches.dims2("forward_patches")?;
    if n != config.tokens || dim != config.patch_dim() {
        return Err(Error::dim("forward_patches", patches.shape(), &[config.tokens, config.patch_dim()]));
    }
    let mut x = embed_patches(patches, &params.patch_w, &params.patch_b)?;
    for (i, block) in params.blocks.iter().enumerate() {
        let step = || -> Result<Tensor<T>> {
            let u = channel_mixing(&x, &block.channel_norm, config.norm, &block.channel_mlp)?;
            token_mixing(&u, &block.token, &block.token_norm, config.norm, backend)
        };
        x = step().map_err(|e| e.in_block(i))?;
    }
    normalize(&x, &params.final_norm, config.norm)
}

/// Forward pass from already unfolded patches (`N x 3p^2`).
pub fn forward_patches<T: Scalar>(
    patches: &Tensor<T>,
    params: &ModelParams<T>,
    config: &MixerConfig,
    backend: Backend,
) -> Result<Tensor<T>> {
    let x = encode_patches(patches, params, config, backend)?;
    head(&x.mean_rows()?, &params.head_w, &params.head_b)
}
