use super::config::{MixerConfig, TokenMixerKind};

/// Parameter totals split by layer type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ParamBreakdown {
    pub patch_embed: usize,
    pub norms: usize,
    pub channel_mixing: usize,
    pub token_mixing: usize,
    pub head: usize,
}

impl ParamBreakdown {
    pub fn total(&self) -> usize {
        self.patch_embed + self.norms + self.channel_mixing + self.token_mixing + self.head
    }
}

/// Learnable parameters of one token-mixing layer.
pub fn token_mixing_params(config: &MixerConfig) -> usize {
    let n = config.tokens;
    match config.token_mixer {
        TokenMixerKind::Original => 2 * n * config.token_mlp_dim,
        TokenMixerKind::Simplified => n * n,
        TokenMixerKind::Ccs => config.groups * n,
    }
}

pub fn param_breakdown(config: &MixerConfig) -> ParamBreakdown {
    let (c, rc, l, k) = (config.hidden, config.expanded(), config.depth, config.num_classes);
    ParamBreakdown {
        patch_embed: config.patch_dim() * c + c,
        // two norms per block plus the one before pooling, scale and bias each
        norms: (2 * l + 1) * 2 * c,
        channel_mixing: l * (rc * c + rc + c * rc + c),
        token_mixing: l * token_mixing_params(config),
        head: c * k + k,
    }
}

pub fn count_params(config: &MixerConfig) -> usize {
    param_breakdown(config).total()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn within(actual: usize, millions: f64, tol: f64) -> bool {
        let target = millions * 1e6;
        (actual as f64 - target).abs() <= tol * target
    }

    #[test]
    fn table_totals() {
        assert_eq!(count_params(&MixerConfig::resmlp36_ccs()), 43_329_256);
        assert_eq!(count_params(&MixerConfig::mixer_b16_ccs()), 58_085_992);
        assert_eq!(count_params(&MixerConfig::resmlp36()), 44_655_784);
        assert_eq!(count_params(&MixerConfig::mixer_b16()), 59_873_512);
        assert!(within(count_params(&MixerConfig::resmlp36_ccs()), 43.0, 0.02));
        assert!(within(count_params(&MixerConfig::mixer_b16_ccs()), 57.0, 0.02));
    }

    #[test]
    fn per_layer_token_counts() {
        assert_eq!(token_mixing_params(&MixerConfig::resmlp36()), 38_416);
        assert_eq!(token_mixing_params(&MixerConfig::resmlp36_ccs()), 1_568);
        assert_eq!(token_mixing_params(&MixerConfig::mixer_b16()), 150_528);
    }

    #[test]
    fn group_ablation() {
        for (g, m) in [(1, 43.0), (4, 43.0), (8, 43.0), (384, 46.0)] {
            let mut c = MixerConfig::resmlp36_ccs();
            c.groups = g;
            assert!(within(count_params(&c), m, 0.02), "G={g}: {}", count_params(&c));
        }
    }
}
