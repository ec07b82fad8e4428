use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which token-mixing block each layer uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenMixerKind {
    /// Two-layer token MLP `U + gelu(norm(U) W3) W4`.
    Original,
    /// Single dense `N x N` matrix, `U + norm(U) W3`.
    Simplified,
    /// Grouped circulant generators, `U + ccs_mix(norm(U))`.
    Ccs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormKind {
    LayerNorm,
    /// Per-channel scale and bias with no statistics.
    Affine,
}

impl TokenMixerKind {
    pub fn name(self) -> &'static str {
        match self {
            TokenMixerKind::Original => "original",
            TokenMixerKind::Simplified => "simplified",
            TokenMixerKind::Ccs => "ccs",
        }
    }

    pub fn code(self) -> u32 {
        match self {
            TokenMixerKind::Original => 0,
            TokenMixerKind::Simplified => 1,
            TokenMixerKind::Ccs => 2,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(TokenMixerKind::Original),
            1 => Some(TokenMixerKind::Simplified),
            2 => Some(TokenMixerKind::Ccs),
            _ => None,
        }
    }
}

impl NormKind {
    pub fn name(self) -> &'static str {
        match self {
            NormKind::LayerNorm => "layernorm",
            NormKind::Affine => "affine",
        }
    }

    pub fn code(self) -> u32 {
        match self {
            NormKind::LayerNorm => 0,
            NormKind::Affine => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(NormKind::LayerNorm),
            1 => Some(NormKind::Affine),
            _ => None,
        }
    }
}

impl fmt::Display for TokenMixerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TokenMixerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(TokenMixerKind::Original),
            "simplified" => Ok(TokenMixerKind::Simplified),
            "ccs" => Ok(TokenMixerKind::Ccs),
            other => Err(Error::Config(format!("unknown token mixer '{other}'"))),
        }
    }
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "layernorm" => Ok(NormKind::LayerNorm),
            "affine" => Ok(NormKind::Affine),
            other => Err(Error::Config(format!("unknown norm '{other}'"))),
        }
    }
}

/// Full architectural description of a backbone.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MixerConfig {
    pub tokens: usize,
    pub depth: usize,
    pub hidden: usize,
    pub ratio: usize,
    pub patch: usize,
    pub groups: usize,
    pub image_height: usize,
    pub image_width: usize,
    pub token_mixer: TokenMixerKind,
    /// Hidden width of the original token MLP; unused by the other mixers.
    pub token_mlp_dim: usize,
    pub norm: NormKind,
    pub num_classes: usize,
}

/// Names accepted by [`MixerConfig::preset`].
pub const PRESETS: [&str; 4] = ["mixer-b16", "mixer-b16-ccs", "resmlp-36", "resmlp-36-ccs"];

impl MixerConfig {
    fn imagenet(depth: usize, hidden: usize, token_mixer: TokenMixerKind, norm: NormKind, groups: usize) -> Self {
        Self {
            tokens: 196,
            depth,
            hidden,
            ratio: 4,
            patch: 16,
            groups,
            image_height: 224,
            image_width: 224,
            token_mixer,
            token_mlp_dim: 384,
            norm,
            num_classes: 1000,
        }
    }

    /// Mixer-B/16 with its two-layer token MLP (`M = 384`).
    pub fn mixer_b16() -> Self {
        Self::imagenet(12, 768, TokenMixerKind::Original, NormKind::LayerNorm, 1)
    }

    pub fn mixer_b16_ccs() -> Self {
        Self::imagenet(12, 768, TokenMixerKind::Ccs, NormKind::LayerNorm, 8)
    }

    pub fn resmlp36() -> Self {
        Self::imagenet(36, 384, TokenMixerKind::Simplified, NormKind::Affine, 1)
    }

    pub fn resmlp36_ccs() -> Self {
        Self::imagenet(36, 384, TokenMixerKind::Ccs, NormKind::Affine, 8)
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "mixer-b16" => Some(Self::mixer_b16()),
            "mixer-b16-ccs" => Some(Self::mixer_b16_ccs()),
            "resmlp-36" => Some(Self::resmlp36()),
            "resmlp-36-ccs" => Some(Self::resmlp36_ccs()),
            _ => None,
        }
    }

    /// Length of one unfolded RGB patch, `3 p^2`.
    pub fn patch_dim(&self) -> usize {
        3 * self.patch * self.patch
    }

    pub fn expanded(&self) -> usize {
        self.ratio * self.hidden
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.patch == 0 || self.image_height == 0 || self.image_width == 0 {
            return bad("patch size and image sides must be positive".into());
        }
        if self.image_height % self.patch != 0 || self.image_width % self.patch != 0 {
            return bad(format!(
                "patch {} does not divide image {}x{}",
                self.patch, self.image_height, self.image_width
            ));
        }
        let grid = (self.image_height / self.patch) * (self.image_width / self.patch);
        if grid != self.tokens {
            return bad(format!("image grid yields {grid} tokens, config says {}", self.tokens));
        }
        if self.hidden == 0 || self.num_classes == 0 {
            return bad("hidden size and class count must be positive".into());
        }
        if self.ratio < 1 {
            return bad("expansion ratio must be at least 1".into());
        }
        if self.groups == 0 || self.hidden % self.groups != 0 {
            return bad(format!("{} groups do not divide {} channels", self.groups, self.hidden));
        }
        if self.token_mixer == TokenMixerKind::Original && self.token_mlp_dim == 0 {
            return bad("original token mixer needs a positive token MLP width".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for name in PRESETS {
            MixerConfig::preset(name).unwrap().validate().unwrap();
        }
        assert!(MixerConfig::preset("vit-b16").is_none());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = MixerConfig::resmlp36_ccs();
        c.groups = 5;
        assert!(c.validate().is_err());
        let mut c = MixerConfig::resmlp36_ccs();
        c.patch = 15;
        assert!(c.validate().is_err());
        let mut c = MixerConfig::resmlp36_ccs();
        c.tokens = 100;
        assert!(c.validate().is_err());
        let mut c = MixerConfig::mixer_b16();
        c.token_mlp_dim = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn kinds_parse_and_round_trip_codes() {
        for k in [TokenMixerKind::Original, TokenMixerKind::Simplified, TokenMixerKind::Ccs] {
            assert_eq!(k.name().parse::<TokenMixerKind>().unwrap(), k);
            assert_eq!(TokenMixerKind::from_code(k.code()), Some(k));
        }
        for k in [NormKind::LayerNorm, NormKind::Affine] {
            assert_eq!(k.name().parse::<NormKind>().unwrap(), k);
            assert_eq!(NormKind::from_code(k.code()), Some(k));
        }
        assert!("gmlp".parse::<TokenMixerKind>().is_err());
    }
}
