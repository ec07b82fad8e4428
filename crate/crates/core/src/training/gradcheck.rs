//! Gradient verification in binary64: central finite differences against the
//! hand-written adjoints, and dot-product (adjoint) tests against independent
//! forward-mode derivatives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::backprop::{
    affine_backward, backward_patches, channel_mixing_backward, cross_entropy, gelu_backward, gelu_derivative,
    head_backward, layer_norm_backward, loss_patches, patch_embed_backward, token_mixing_backward,
};
use crate::circulant::{ccs_mix, ccs_mix_adjoint, Backend, CcsWeights};
use crate::error::Result;
use crate::model::layers::{embed_patches, normalize, LAYER_NORM_EPS};
use crate::model::{
    affine, channel_mixing, gelu, head, layer_norm, token_mixing, ChannelMlp, MixerConfig, ModelParams, NormKind,
    NormParams, TokenMixerKind, TokenParams,
};
use crate::numerics::Tensor;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-5;
pub const ADJOINT_TOLERANCE: f64 = 1e-10;

/// Outcome of one numerical check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub error: f64,
    pub tolerance: f64,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, error: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            error,
            tolerance,
        }
    }

    pub fn passed(&self) -> bool {
        self.error.is_finite() && self.error <= self.tolerance
    }
}

/// `max|a - b| / max(max|a|, max|b|, 1e-6)` over a whole array.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let scale = analytic
        .iter()
        .chain(numeric)
        .fold(1e-6f64, |m, v| m.max(v.abs()));
    diff / scale
}

/// Central differences of `f` with respect to every entry of `at`.
pub fn finite_difference(at: &Tensor<f64>, mut f: impl FnMut(&Tensor<f64>) -> f64) -> Tensor<f64> {
    let mut probe = at.clone();
    let mut out = Tensor::zeros(at.shape());
    for k in 0..at.len() {
        let orig = probe.data()[k];
        probe.data_mut()[k] = orig + FD_STEP;
        let plus = f(&probe);
        probe.data_mut()[k] = orig - FD_STEP;
        let minus = f(&probe);
        probe.data_mut()[k] = orig;
        out.data_mut()[k] = (plus - minus) / (2.0 * FD_STEP);
    }
    out
}

fn fd_report(name: &str, analytic: &Tensor<f64>, at: &Tensor<f64>, f: impl FnMut(&Tensor<f64>) -> f64) -> CheckReport {
    let numeric = finite_difference(at, f);
    CheckReport::new(name, relative_error(analytic.data(), numeric.data()), FD_TOLERANCE)
}

fn adjoint_report(name: &str, lhs: f64, rhs: f64) -> CheckReport {
    let err = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0);
    CheckReport::new(name, err, ADJOINT_TOLERANCE)
}

fn uniform(shape: &[usize], rng: &mut ChaCha8Rng, bound: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.gen_range(-bound..bound))
}

fn random_norm(c: usize, rng: &mut ChaCha8Rng) -> NormParams<f64> {
    NormParams {
        scale: Tensor::from_fn(&[c], |_| rng.gen_range(0.5..1.5)),
        bias: uniform(&[c], rng, 0.5),
    }
}

fn random_mlp(c: usize, r: usize, rng: &mut ChaCha8Rng) -> ChannelMlp<f64> {
    ChannelMlp {
        w1: uniform(&[r * c, c], rng, 0.8),
        b1: uniform(&[r * c], rng, 0.5),
        w2: uniform(&[c, r * c], rng, 0.8),
        b2: uniform(&[c], rng, 0.5),
    }
}

/// Parameters with O(1) entries, so gradients are well above finite-difference noise.
pub fn random_params(config: &MixerConfig, seed: u64) -> Result<ModelParams<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ModelParams::zeros(config)?;
    for (name, t) in p.arrays_mut() {
        let scale_like = name.ends_with(".scale");
        for v in t.data_mut() {
            *v = if scale_like {
                rng.gen_range(0.5..1.5)
            } else {
                rng.gen_range(-0.6..0.6)
            };
        }
    }
    Ok(p)
}

/// The small configuration used by the end-to-end checks: `N=4, L=2, C=4, G=2`, three classes.
pub fn tiny_config(token_mixer: TokenMixerKind, norm: NormKind) -> MixerConfig {
    MixerConfig {
        tokens: 4,
        depth: 2,
        hidden: 4,
        ratio: 2,
        patch: 1,
        groups: 2,
        image_height: 2,
        image_width: 2,
        token_mixer,
        token_mlp_dim: 3,
        norm,
        num_classes: 3,
    }
}

fn norm_fd(
    prefix: &str,
    analytic: &NormParams<f64>,
    params: &NormParams<f64>,
    mut loss: impl FnMut(&NormParams<f64>) -> f64,
) -> Vec<CheckReport> {
    let scale = fd_report(&format!("{prefix}.scale"), &analytic.scale, &params.scale, |s| {
        loss(&NormParams {
            scale: s.clone(),
            bias: params.bias.clone(),
        })
    });
    let bias = fd_report(&format!("{prefix}.bias"), &analytic.bias, &params.bias, |b| {
        loss(&NormParams {
            scale: params.scale.clone(),
            bias: b.clone(),
        })
    });
    vec![scale, bias]
}

/// Finite-difference checks of every layer's adjoint, using `<f(inputs), g>` for a random `g`.
pub fn layer_gradient_checks(seed: u64) -> Result<Vec<CheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, c, r, m) = (5usize, 4usize, 2usize, 3usize);
    let mut out = Vec::new();

    // gelu
    let x = uniform(&[n, c], &mut rng, 2.0);
    let g = uniform(&[n, c], &mut rng, 1.0);
    let analytic = gelu_backward(&x, &g)?;
    out.push(fd_report("gelu.x", &analytic, &x, |x| gelu(x).dot(&g).unwrap()));

    // norms
    for kind in [NormKind::LayerNorm, NormKind::Affine] {
        let norm = random_norm(c, &mut rng);
        let f = |x: &Tensor<f64>, p: &NormParams<f64>| match kind {
            NormKind::LayerNorm => layer_norm(x, p).unwrap(),
            NormKind::Affine => affine(x, p).unwrap(),
        };
        let (gx, gp) = match kind {
            NormKind::LayerNorm => layer_norm_backward(&x, &norm, &g)?,
            NormKind::Affine => affine_backward(&x, &norm, &g)?,
        };
        let name = kind.name();
        out.push(fd_report(&format!("{name}.x"), &gx, &x, |x| f(x, &norm).dot(&g).unwrap()));
        out.extend(norm_fd(name, &gp, &norm, |p| f(&x, p).dot(&g).unwrap()));
    }

    // patch embedding
    let patches = uniform(&[n, 6], &mut rng, 1.0);
    let w0 = uniform(&[6, c], &mut rng, 0.8);
    let b0 = uniform(&[c], &mut rng, 0.5);
    let (gp, gw, gb) = patch_embed_backward(&patches, &w0, &g)?;
    let embed = |p: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>| embed_patches(p, w, b).unwrap().dot(&g).unwrap();
    out.push(fd_report("patch_embed.patches", &gp, &patches, |p| embed(p, &w0, &b0)));
    out.push(fd_report("patch_embed.weight", &gw, &w0, |w| embed(&patches, w, &b0)));
    out.push(fd_report("patch_embed.bias", &gb, &b0, |b| embed(&patches, &w0, b)));

    // channel mixing
    for kind in [NormKind::LayerNorm, NormKind::Affine] {
        let norm = random_norm(c, &mut rng);
        let mlp = random_mlp(c, r, &mut rng);
        let (gx, gn, gm) = channel_mixing_backward(&x, &norm, kind, &mlp, &g)?;
        let p = format!("channel_mixing[{}]", kind.name());
        let f = |x: &Tensor<f64>, norm: &NormParams<f64>, mlp: &ChannelMlp<f64>| {
            channel_mixing(x, norm, kind, mlp).unwrap().dot(&g).unwrap()
        };
        out.push(fd_report(&format!("{p}.x"), &gx, &x, |x| f(x, &norm, &mlp)));
        out.extend(norm_fd(&format!("{p}.norm"), &gn, &norm, |nn| f(&x, nn, &mlp)));
        let with = |slot: usize, t: &Tensor<f64>| {
            let mut m2 = mlp.clone();
            match slot {
                0 => m2.w1 = t.clone(),
                1 => m2.b1 = t.clone(),
                2 => m2.w2 = t.clone(),
                _ => m2.b2 = t.clone(),
            }
            f(&x, &norm, &m2)
        };
        out.push(fd_report(&format!("{p}.w1"), &gm.w1, &mlp.w1, |t| with(0, t)));
        out.push(fd_report(&format!("{p}.b1"), &gm.b1, &mlp.b1, |t| with(1, t)));
        out.push(fd_report(&format!("{p}.w2"), &gm.w2, &mlp.w2, |t| with(2, t)));
        out.push(fd_report(&format!("{p}.b2"), &gm.b2, &mlp.b2, |t| with(3, t)));
    }

    // token mixers
    let tokens_x = uniform(&[n, c], &mut rng, 1.5);
    let token_variants = [
        TokenParams::Original {
            w3: uniform(&[n, m], &mut rng, 0.8),
            w4: uniform(&[m, n], &mut rng, 0.8),
        },
        TokenParams::Simplified {
            w3: uniform(&[n, n], &mut rng, 0.8),
        },
        TokenParams::Ccs(CcsWeights::new(uniform(&[2, n], &mut rng, 0.8))?),
    ];
    for token in &token_variants {
        for kind in [NormKind::LayerNorm, NormKind::Affine] {
            let norm = random_norm(c, &mut rng);
            let (gu, gn, gt) = token_mixing_backward(&tokens_x, token, &norm, kind, &g)?;
            let p = format!("token_mixing_{}[{}]", token.kind().name(), kind.name());
            let f = |u: &Tensor<f64>, norm: &NormParams<f64>, token: &TokenParams<f64>| {
                token_mixing(u, token, norm, kind, Backend::Direct).unwrap().dot(&g).unwrap()
            };
            out.push(fd_report(&format!("{p}.u"), &gu, &tokens_x, |u| f(u, &norm, token)));
            out.extend(norm_fd(&format!("{p}.norm"), &gn, &norm, |nn| f(&tokens_x, nn, token)));
            match (token, &gt) {
                (TokenParams::Original { w3, w4 }, TokenParams::Original { w3: g3, w4: g4 }) => {
                    out.push(fd_report(&format!("{p}.w3"), g3, w3, |t| {
                        f(&tokens_x, &norm, &TokenParams::Original { w3: t.clone(), w4: w4.clone() })
                    }));
                    out.push(fd_report(&format!("{p}.w4"), g4, w4, |t| {
                        f(&tokens_x, &norm, &TokenParams::Original { w3: w3.clone(), w4: t.clone() })
                    }));
                }
                (TokenParams::Simplified { w3 }, TokenParams::Simplified { w3: g3 }) => {
                    out.push(fd_report(&format!("{p}.w3"), g3, w3, |t| {
                        f(&tokens_x, &norm, &TokenParams::Simplified { w3: t.clone() })
                    }));
                }
                (TokenParams::Ccs(w), TokenParams::Ccs(gw)) => {
                    out.push(fd_report(&format!("{p}.ccs"), gw.tensor(), w.tensor(), |t| {
                        f(&tokens_x, &norm, &TokenParams::Ccs(CcsWeights::new(t.clone()).unwrap()))
                    }));
                }
                _ => unreachable!("gradient variant follows parameter variant"),
            }
        }
    }

    // head
    let pooled = uniform(&[c], &mut rng, 1.0);
    let hw = uniform(&[c, 3], &mut rng, 0.8);
    let hb = uniform(&[3], &mut rng, 0.5);
    let gl = uniform(&[3], &mut rng, 1.0);
    let (gp, gw, gb) = head_backward(&pooled, &hw, &gl)?;
    let hf = |p: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>| head(p, w, b).unwrap().dot(&gl).unwrap();
    out.push(fd_report("head.pooled", &gp, &pooled, |p| hf(p, &hw, &hb)));
    out.push(fd_report("head.weight", &gw, &hw, |w| hf(&pooled, w, &hb)));
    out.push(fd_report("head.bias", &gb, &hb, |b| hf(&pooled, &hw, b)));

    // cross-entropy
    let logits = uniform(&[5], &mut rng, 2.0);
    let (_, gz) = cross_entropy(&logits, 2)?;
    out.push(fd_report("cross_entropy.logits", &gz, &logits, |z| cross_entropy(z, 2).unwrap().0));

    Ok(out)
}

/// Finite-difference check of the full backward pass, one report per parameter array.
pub fn model_gradient_checks(config: &MixerConfig, seed: u64) -> Result<Vec<CheckReport>> {
    let params = random_params(config, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let patches = uniform(&[config.tokens, config.patch_dim()], &mut rng, 1.0);
    let label = rng.gen_range(0..config.num_classes);
    let (_, grads) = backward_patches(&patches, label, &params, config, Backend::Direct)?;

    let prefix = format!("model[{},{}]", config.token_mixer.name(), config.norm.name());
    let names: Vec<String> = params.arrays().into_iter().map(|(n, _)| n).collect();
    let mut out = Vec::with_capacity(names.len());
    for (idx, name) in names.iter().enumerate() {
        let analytic = grads.arrays()[idx].1.clone();
        let at = params.arrays()[idx].1.clone();
        let numeric = finite_difference(&at, |t| {
            let mut probe = params.clone();
            *probe.arrays_mut().swap_remove(idx).1 = t.clone();
            loss_patches(&patches, label, &probe, config, Backend::Direct).unwrap()
        });
        out.push(CheckReport::new(
            format!("{prefix}.{name}"),
            relative_error(analytic.data(), numeric.data()),
            FD_TOLERANCE,
        ));
    }
    Ok(out)
}

// Forward-mode derivatives, written independently of the reverse-mode code.

fn layer_norm_jvp(x: &Tensor<f64>, p: &NormParams<f64>, dx: &Tensor<f64>) -> Tensor<f64> {
    let c = x.shape()[1];
    let cf = c as f64;
    let mut out = Tensor::zeros(x.shape());
    for ((row, drow), orow) in x.data().chunks(c).zip(dx.data().chunks(c)).zip(out.data_mut().chunks_mut(c)) {
        let mean = row.iter().sum::<f64>() / cf;
        let dmean = drow.iter().sum::<f64>() / cf;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / cf;
        let dvar = row.iter().zip(drow).map(|(v, d)| 2.0 * (v - mean) * (d - dmean)).sum::<f64>() / cf;
        let sigma = (var + LAYER_NORM_EPS).sqrt();
        let dsigma = dvar / (2.0 * sigma);
        for k in 0..c {
            let d_hat = (drow[k] - dmean) / sigma - (row[k] - mean) * dsigma / (sigma * sigma);
            orow[k] = p.scale.data()[k] * d_hat;
        }
    }
    out
}

fn affine_jvp(p: &NormParams<f64>, dx: &Tensor<f64>) -> Tensor<f64> {
    let c = p.channels();
    Tensor::from_fn(dx.shape(), |k| dx.data()[k] * p.scale.data()[k % c])
}

fn norm_jvp(x: &Tensor<f64>, p: &NormParams<f64>, kind: NormKind, dx: &Tensor<f64>) -> Tensor<f64> {
    match kind {
        NormKind::LayerNorm => layer_norm_jvp(x, p, dx),
        NormKind::Affine => affine_jvp(p, dx),
    }
}

fn gelu_jvp(x: &Tensor<f64>, dx: &Tensor<f64>) -> Tensor<f64> {
    x.zip_map(dx, "gelu_jvp", |v, d| gelu_derivative(v) * d).unwrap()
}

fn channel_mixing_jvp(
    x: &Tensor<f64>,
    norm: &NormParams<f64>,
    kind: NormKind,
    mlp: &ChannelMlp<f64>,
    dx: &Tensor<f64>,
) -> Tensor<f64> {
    let x_hat = normalize(x, norm, kind).unwrap();
    let dx_hat = norm_jvp(x, norm, kind, dx);
    let mut h = x_hat.matmul_nt(&mlp.w1).unwrap();
    h.add_row_vector(&mlp.b1).unwrap();
    let dh = dx_hat.matmul_nt(&mlp.w1).unwrap();
    let da = gelu_jvp(&h, &dh);
    dx.add(&da.matmul_nt(&mlp.w2).unwrap()).unwrap()
}

fn token_mixing_jvp(
    u: &Tensor<f64>,
    token: &TokenParams<f64>,
    norm: &NormParams<f64>,
    kind: NormKind,
    du: &Tensor<f64>,
) -> Tensor<f64> {
    let u_hat = normalize(u, norm, kind).unwrap();
    let du_hat = norm_jvp(u, norm, kind, du);
    let mixed = match token {
        TokenParams::Original { w3, w4 } => {
            let hidden = w3.matmul_tn(&u_hat).unwrap();
            let d_hidden = w3.matmul_tn(&du_hat).unwrap();
            w4.matmul_tn(&gelu_jvp(&hidden, &d_hidden)).unwrap()
        }
        TokenParams::Simplified { w3 } => w3.matmul_tn(&du_hat).unwrap(),
        TokenParams::Ccs(w) => {
            let shape = du_hat.shape().to_vec();
            let batched = du_hat.clone().reshape(&[1, shape[0], shape[1]]).unwrap();
            ccs_mix(&batched, w, Backend::Direct).unwrap().reshape(&shape).unwrap()
        }
    };
    du.add(&mixed).unwrap()
}

/// Dot-product tests `<J dx, g> = <dx, Jᵀ g>` for every layer.
pub fn adjoint_checks(seed: u64) -> Result<Vec<CheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, c, r, m) = (6usize, 4usize, 2usize, 3usize);
    let mut out = Vec::new();
    let x = uniform(&[n, c], &mut rng, 1.5);
    let dx = uniform(&[n, c], &mut rng, 1.0);
    let g = uniform(&[n, c], &mut rng, 1.0);

    let lhs = gelu_jvp(&x, &dx).dot(&g)?;
    out.push(adjoint_report("gelu", lhs, dx.dot(&gelu_backward(&x, &g)?)?));

    for kind in [NormKind::LayerNorm, NormKind::Affine] {
        let norm = random_norm(c, &mut rng);
        let lhs = norm_jvp(&x, &norm, kind, &dx).dot(&g)?;
        let (gx, _) = match kind {
            NormKind::LayerNorm => layer_norm_backward(&x, &norm, &g)?,
            NormKind::Affine => affine_backward(&x, &norm, &g)?,
        };
        out.push(adjoint_report(kind.name(), lhs, dx.dot(&gx)?));
    }

    let w0 = uniform(&[5, c], &mut rng, 1.0);
    let dp = uniform(&[n, 5], &mut rng, 1.0);
    let lhs = dp.matmul(&w0)?.dot(&g)?;
    let (gp, _, _) = patch_embed_backward(&dp, &w0, &g)?;
    out.push(adjoint_report("patch_embed", lhs, dp.dot(&gp)?));

    for kind in [NormKind::LayerNorm, NormKind::Affine] {
        let norm = random_norm(c, &mut rng);
        let mlp = random_mlp(c, r, &mut rng);
        let lhs = channel_mixing_jvp(&x, &norm, kind, &mlp, &dx).dot(&g)?;
        let (gx, _, _) = channel_mixing_backward(&x, &norm, kind, &mlp, &g)?;
        out.push(adjoint_report(&format!("channel_mixing[{}]", kind.name()), lhs, dx.dot(&gx)?));
    }

    let token_variants = [
        TokenParams::Original {
            w3: uniform(&[n, m], &mut rng, 0.8),
            w4: uniform(&[m, n], &mut rng, 0.8),
        },
        TokenParams::Simplified {
            w3: uniform(&[n, n], &mut rng, 0.8),
        },
        TokenParams::Ccs(CcsWeights::new(uniform(&[2, n], &mut rng, 0.8))?),
    ];
    for token in &token_variants {
        for kind in [NormKind::LayerNorm, NormKind::Affine] {
            let norm = random_norm(c, &mut rng);
            let lhs = token_mixing_jvp(&x, token, &norm, kind, &dx).dot(&g)?;
            let (gu, _, _) = token_mixing_backward(&x, token, &norm, kind, &g)?;
            out.push(adjoint_report(
                &format!("token_mixing_{}[{}]", token.kind().name(), kind.name()),
                lhs,
                dx.dot(&gu)?,
            ));
        }
    }

    // grouped circulant mixing over a batch, in both the input and weight directions
    let xb = uniform(&[2, n, c], &mut rng, 1.0);
    let dxb = uniform(&[2, n, c], &mut rng, 1.0);
    let gb = uniform(&[2, n, c], &mut rng, 1.0);
    let w = CcsWeights::new(uniform(&[2, n], &mut rng, 1.0))?;
    let dw = CcsWeights::new(uniform(&[2, n], &mut rng, 1.0))?;
    let (gx, gw) = ccs_mix_adjoint(&gb, &xb, &w)?;
    let lhs = ccs_mix(&dxb, &w, Backend::Direct)?.dot(&gb)?;
    out.push(adjoint_report("ccs_mix.x", lhs, dxb.dot(&gx)?));
    let lhs = ccs_mix(&xb, &dw, Backend::Direct)?.dot(&gb)?;
    out.push(adjoint_report("ccs_mix.w", lhs, dw.tensor().dot(&gw)?));

    let hw = uniform(&[c, 3], &mut rng, 1.0);
    let dpool = uniform(&[c], &mut rng, 1.0);
    let gl = uniform(&[3], &mut rng, 1.0);
    let lhs = head(&dpool, &hw, &Tensor::zeros(&[3]))?.dot(&gl)?;
    let (gp, _, _) = head_backward(&dpool, &hw, &gl)?;
    out.push(adjoint_report("head", lhs, dpool.dot(&gp)?));

    Ok(out)
}

/// Every layer check, every adjoint check and the end-to-end checks over all
/// mixer/norm combinations of [`tiny_config`].
pub fn full_gradient_suite(seed: u64) -> Result<Vec<CheckReport>> {
    let mut out = layer_gradient_checks(seed)?;
    out.extend(adjoint_checks(seed.wrapping_add(1))?);
    for mixer in [TokenMixerKind::Original, TokenMixerKind::Simplified, TokenMixerKind::Ccs] {
        for norm in [NormKind::LayerNorm, NormKind::Affine] {
            out.extend(model_gradient_checks(&tiny_config(mixer, norm), seed.wrapping_add(2))?);
        }
    }
    Ok(out)
}
