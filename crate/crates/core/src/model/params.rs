use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::{MixerConfig, TokenMixerKind};
use crate::circulant::CcsWeights;
use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::scalar::Scalar;

const INIT_STD: f64 = 0.02;

#[derive(Clone, Copy)]
enum Slot {
    Dense,
    Ccs,
    Bias,
    NormScale,
}

/// Normal(0, 0.02) truncated to two standard deviations.
fn trunc_normal<T: Scalar, R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Tensor<T> {
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    Tensor::from_fn(shape, |_| loop {
        let v: f64 = normal.sample(rng);
        if v.abs() <= 2.0 * INIT_STD {
            break T::lit(v);
        }
    })
}

/// Scale and bias of a normalization layer, one value per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct NormParams<T> {
    pub scale: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> NormParams<T> {
    pub fn identity(channels: usize) -> Self {
        Self {
            scale: Tensor::filled(&[channels], T::one()),
            bias: Tensor::zeros(&[channels]),
        }
    }

    pub fn channels(&self) -> usize {
        self.scale.len()
    }
}

/// Two-layer per-token MLP: `W1: rC x C`, `W2: C x rC`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMlp<T> {
    pub w1: Tensor<T>,
    pub b1: Tensor<T>,
    pub w2: Tensor<T>,
    pub b2: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenParams<T> {
    /// `W3: N x M`, `W4: M x N`.
    Original { w3: Tensor<T>, w4: Tensor<T> },
    /// `W3: N x N`.
    Simplified { w3: Tensor<T> },
    Ccs(CcsWeights<T>),
}

impl<T: Scalar> TokenParams<T> {
    pub fn kind(&self) -> TokenMixerKind {
        match self {
            TokenParams::Original { .. } => TokenMixerKind::Original,
            TokenParams::Simplified { .. } => TokenMixerKind::Simplified,
            TokenParams::Ccs(_) => TokenMixerKind::Ccs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams<T> {
    pub channel_norm: NormParams<T>,
    pub channel_mlp: ChannelMlp<T>,
    pub token_norm: NormParams<T>,
    pub token: TokenParams<T>,
}

/// Every learnable array of a backbone.
///
/// The same structure doubles as the gradient container; a mixer variant only
/// carries the arrays it actually uses.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    /// `W0: 3p^2 x C`.
    pub patch_w: Tensor<T>,
    pub patch_b: Tensor<T>,
    pub blocks: Vec<BlockParams<T>>,
    pub final_norm: NormParams<T>,
    /// `C x num_classes`.
    pub head_w: Tensor<T>,
    pub head_b: Tensor<T>,
}

impl<T: Scalar> ModelParams<T> {
    /// Truncated-normal dense weights, zero biases, unit norm scales and
    /// uniform circulant generators.
    pub fn init<R: Rng + ?Sized>(config: &MixerConfig, rng: &mut R) -> Result<Self> {
        let n = config.tokens;
        Self::build(config, |slot, shape| match slot {
            Slot::Dense => trunc_normal(shape, rng),
            Slot::Ccs => CcsWeights::uniform_init(shape[0], n, rng).into_tensor(),
            Slot::Bias => Tensor::zeros(shape),
            Slot::NormScale => Tensor::filled(shape, T::one()),
        })
    }

    /// Same structure as `init`, with every array (norm scales included) zero.
    pub fn zeros(config: &MixerConfig) -> Result<Self> {
        Self::build(config, |_, shape| Tensor::zeros(shape))
    }

    fn build(config: &MixerConfig, mut make: impl FnMut(Slot, &[usize]) -> Tensor<T>) -> Result<Self> {
        config.validate()?;
        let (n, c, rc, k) = (config.tokens, config.hidden, config.expanded(), config.num_classes);
        let norm = |make: &mut dyn FnMut(Slot, &[usize]) -> Tensor<T>| NormParams {
            scale: make(Slot::NormScale, &[c]),
            bias: make(Slot::Bias, &[c]),
        };
        let patch_w = make(Slot::Dense, &[config.patch_dim(), c]);
        let patch_b = make(Slot::Bias, &[c]);
        let mut blocks = Vec::with_capacity(config.depth);
        for _ in 0..config.depth {
            let channel_norm = norm(&mut make);
            let channel_mlp = ChannelMlp {
                w1: make(Slot::Dense, &[rc, c]),
                b1: make(Slot::Bias, &[rc]),
                w2: make(Slot::Dense, &[c, rc]),
                b2: make(Slot::Bias, &[c]),
            };
            let token_norm = norm(&mut make);
            let token = match config.token_mixer {
                TokenMixerKind::Original => TokenParams::Original {
                    w3: make(Slot::Dense, &[n, config.token_mlp_dim]),
                    w4: make(Slot::Dense, &[config.token_mlp_dim, n]),
                },
                TokenMixerKind::Simplified => TokenParams::Simplified {
                    w3: make(Slot::Dense, &[n, n]),
                },
                TokenMixerKind::Ccs => TokenParams::Ccs(CcsWeights::new(make(Slot::Ccs, &[config.groups, n]))?),
            };
            blocks.push(BlockParams {
                channel_norm,
                channel_mlp,
                token_norm,
                token,
            });
        }
        let final_norm = norm(&mut make);
        Ok(Self {
            patch_w,
            patch_b,
            blocks,
            final_norm,
            head_w: make(Slot::Dense, &[c, k]),
            head_b: make(Slot::Bias, &[k]),
        })
    }

    pub fn zeros_like(&self) -> Self {
        let mut p = self.clone();
        p.fill(T::zero());
        p
    }

    pub fn fill(&mut self, v: T) {
        for (_, t) in self.arrays_mut() {
            t.data_mut().iter_mut().for_each(|x| *x = v);
        }
    }

    /// Named arrays in a fixed order.
    pub fn arrays(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = vec![
            ("patch_embed.weight".to_string(), &self.patch_w),
            ("patch_embed.bias".to_string(), &self.patch_b),
        ];
        for (i, b) in self.blocks.iter().enumerate() {
            let p = format!("blocks.{i}");
            out.push((format!("{p}.channel_norm.scale"), &b.channel_norm.scale));
            out.push((format!("{p}.channel_norm.bias"), &b.channel_norm.bias));
            out.push((format!("{p}.channel_mlp.w1"), &b.channel_mlp.w1));
            out.push((format!("{p}.channel_mlp.b1"), &b.channel_mlp.b1));
            out.push((format!("{p}.channel_mlp.w2"), &b.channel_mlp.w2));
            out.push((format!("{p}.channel_mlp.b2"), &b.channel_mlp.b2));
            out.push((format!("{p}.token_norm.scale"), &b.token_norm.scale));
            out.push((format!("{p}.token_norm.bias"), &b.token_norm.bias));
            match &b.token {
                TokenParams::Original { w3, w4 } => {
                    out.push((format!("{p}.token_mix.w3"), w3));
                    out.push((format!("{p}.token_mix.w4"), w4));
                }
                TokenParams::Simplified { w3 } => out.push((format!("{p}.token_mix.w3"), w3)),
                TokenParams::Ccs(w) => out.push((format!("{p}.token_mix.ccs"), w.tensor())),
            }
        }
        out.push(("final_norm.scale".to_string(), &self.final_norm.scale));
        out.push(("final_norm.bias".to_string(), &self.final_norm.bias));
        out.push(("head.weight".to_string(), &self.head_w));
        out.push(("head.bias".to_string(), &self.head_b));
        out
    }

    /// Mutable counterpart of [`arrays`](Self::arrays), same order.
    pub fn arrays_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = vec![
            ("patch_embed.weight".to_string(), &mut self.patch_w),
            ("patch_embed.bias".to_string(), &mut self.patch_b),
        ];
        for (i, b) in self.blocks.iter_mut().enumerate() {
            let p = format!("blocks.{i}");
            out.push((format!("{p}.channel_norm.scale"), &mut b.channel_norm.scale));
            out.push((format!("{p}.channel_norm.bias"), &mut b.channel_norm.bias));
            out.push((format!("{p}.channel_mlp.w1"), &mut b.channel_mlp.w1));
            out.push((format!("{p}.channel_mlp.b1"), &mut b.channel_mlp.b1));
            out.push((format!("{p}.channel_mlp.w2"), &mut b.channel_mlp.w2));
            out.push((format!("{p}.channel_mlp.b2"), &mut b.channel_mlp.b2));
            out.push((format!("{p}.token_norm.scale"), &mut b.token_norm.scale));
            out.push((format!("{p}.token_norm.bias"), &mut b.token_norm.bias));
            match &mut b.token {
                TokenParams::Original { w3, w4 } => {
                    out.push((format!("{p}.token_mix.w3"), w3));
                    out.push((format!("{p}.token_mix.w4"), w4));
                }
                TokenParams::Simplified { w3 } => out.push((format!("{p}.token_mix.w3"), w3)),
                TokenParams::Ccs(w) => out.push((format!("{p}.token_mix.ccs"), w.tensor_mut())),
            }
        }
        out.push(("final_norm.scale".to_string(), &mut self.final_norm.scale));
        out.push(("final_norm.bias".to_string(), &mut self.final_norm.bias));
        out.push(("head.weight".to_string(), &mut self.head_w));
        out.push(("head.bias".to_string(), &mut self.head_b));
        out
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.arrays().into_iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn param_count(&self) -> usize {
        self.arrays().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.arrays().iter().all(|(_, t)| t.all_finite())
    }

    /// Checks that every array has the shape `config` prescribes.
    pub fn check_config(&self, config: &MixerConfig) -> Result<()> {
        let expected = Self::zeros(config)?;
        let mine = self.arrays();
        let theirs = expected.arrays();
        if mine.len() != theirs.len() {
            return Err(Error::Config(format!(
                "parameter set has {} arrays, config implies {}",
                mine.len(),
                theirs.len()
            )));
        }
        for ((name, a), (ename, e)) in mine.iter().zip(&theirs) {
            if name != ename {
                return Err(Error::Config(format!("expected array {ename}, found {name}")));
            }
            if a.shape() != e.shape() {
                return Err(Error::Config(format!(
                    "{name}: shape {:?}, config implies {:?}",
                    a.shape(),
                    e.shape()
                )));
            }
        }
        Ok(())
    }

    /// Rebuilds a parameter set for `config` from named arrays in [`arrays`](Self::arrays) order.
    pub fn from_arrays(config: &MixerConfig, arrays: Vec<(String, Tensor<T>)>) -> Result<Self> {
        let mut params = Self::zeros(config)?;
        {
            let slots = params.arrays_mut();
            if slots.len() != arrays.len() {
                return Err(Error::Config(format!(
                    "config implies {} arrays, got {}",
                    slots.len(),
                    arrays.len()
                )));
            }
            for ((name, slot), (got_name, t)) in slots.into_iter().zip(arrays) {
                if name != got_name {
                    return Err(Error::Config(format!("expected array {name}, found {got_name}")));
                }
                if slot.shape() != t.shape() {
                    return Err(Error::Config(format!(
                        "{name}: shape {:?}, config implies {:?}",
                        t.shape(),
                        slot.shape()
                    )));
                }
                *slot = t;
            }
        }
        Ok(params)
    }
}
