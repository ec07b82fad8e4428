//! Backbone assembly: patch embedding, mixer blocks, classification head and
//! parameter accounting.

mod config;
mod count;
mod forward;
pub mod layers;
mod params;

pub use config::{MixerConfig, NormKind, TokenMixerKind, PRESETS};
pub use count::{count_params, param_breakdown, token_mixing_params, ParamBreakdown};
pub use forward::{encode_patches, forward_patches, model_forward, model_forward_with};
pub use layers::{
    affine, channel_mixing, gelu, head, layer_norm, normalize, patch_embed, patchify, token_mixing, token_mixing_ccs,
    token_mixing_original, token_mixing_simplified,
};
pub use params::{BlockParams, ChannelMlp, ModelParams, NormParams, TokenParams};
