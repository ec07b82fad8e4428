use ccs_core::circulant::{ccs_mix, materialize_circulant, Backend, CcsWeights};
use ccs_core::model::{
    count_params, model_forward, normalize, patchify, token_mixing_ccs, token_mixing_simplified, MixerConfig,
    ModelParams, NormKind, NormParams, TokenMixerKind, TokenParams,
};
use ccs_core::numerics::{dft_naive, fft, ifft, ComplexBuffer, Tensor};
use ccs_core::training::{circular_shift, make_shift_task, train, ShiftTaskSpec, TrainOptions};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FFT_LENGTHS: [usize; 7] = [1, 2, 7, 49, 100, 196, 256];

fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng, scale: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.gen_range(-scale..scale))
}

fn random_buffer(n: usize, rng: &mut ChaCha8Rng) -> ComplexBuffer<f64> {
    let re = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let im = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ComplexBuffer::new(re, im).unwrap()
}

/// Rolls the token axis of a `B x N x C` tensor by `s`.
fn shift3(x: &Tensor<f64>, s: usize) -> Tensor<f64> {
    let [b, n, c] = [x.shape()[0], x.shape()[1], x.shape()[2]];
    Tensor::from_fn(x.shape(), |k| {
        let (bi, rest) = (k / (n * c), k % (n * c));
        let (i, ch) = (rest / c, rest % c);
        x.data()[bi * n * c + ((i + n - s % n) % n) * c + ch]
    })
    .reshape(&[b, n, c])
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fft_round_trip_and_dft_agreement(seed in any::<u64>(), idx in 0..FFT_LENGTHS.len()) {
        let n = FFT_LENGTHS[idx];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_buffer(n, &mut rng);
        let spectrum = fft(&x).unwrap();
        let back = ifft(&spectrum).unwrap();
        let max_x = x.re().iter().chain(x.im()).fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(back.max_abs_diff(&x) <= 1e-12 * (1.0 + max_x));
        prop_assert!(spectrum.max_abs_diff(&dft_naive(&x).unwrap()) <= 1e-10);
    }

    #[test]
    fn fft_is_linear(seed in any::<u64>(), idx in 0..FFT_LENGTHS.len(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let n = FFT_LENGTHS[idx];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_buffer(n, &mut rng);
        let y = random_buffer(n, &mut rng);
        let combo: Vec<_> = x.to_complex().iter().zip(y.to_complex()).map(|(p, q)| p * a + q * b).collect();
        let lhs = fft(&ComplexBuffer::from_complex(&combo)).unwrap();
        let (fx, fy) = (fft(&x).unwrap(), fft(&y).unwrap());
        let rhs: Vec<_> = fx.to_complex().iter().zip(fy.to_complex()).map(|(p, q)| p * a + q * b).collect();
        prop_assert!(lhs.max_abs_diff(&ComplexBuffer::from_complex(&rhs)) <= 1e-10);
    }

    #[test]
    fn fft_preserves_energy(seed in any::<u64>(), idx in 0..FFT_LENGTHS.len()) {
        let n = FFT_LENGTHS[idx];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_buffer(n, &mut rng);
        let time = x.energy();
        let freq = fft(&x).unwrap().energy() / n as f64;
        prop_assert!((time - freq).abs() <= 1e-10 * time.max(1e-300));
    }

    #[test]
    fn backends_agree(
        seed in any::<u64>(),
        n in prop::sample::select(vec![1usize, 4, 7, 16, 49, 196]),
        c in prop::sample::select(vec![1usize, 2, 8, 32]),
        batch in 1usize..3,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = if c % 8 == 0 { 8 } else { c };
        let x = random_tensor(&[batch, n, c], &mut rng, 3.0);
        let w = CcsWeights::new(random_tensor(&[g, n], &mut rng, 2.0)).unwrap();
        let direct = ccs_mix(&x, &w, Backend::Direct).unwrap();
        let spectral = ccs_mix(&x, &w, Backend::Fft).unwrap();
        let bound = 1e-9 * (1.0 + x.max_abs() * w.tensor().max_abs() * n as f64);
        prop_assert!(direct.max_abs_diff(&spectral).unwrap() <= bound);
    }

    #[test]
    fn blocks_preserve_shape(
        seed in any::<u64>(),
        side in 1usize..4,
        hidden_groups in 1usize..4,
        groups in prop::sample::select(vec![1usize, 2]),
        mixer in prop::sample::select(vec![TokenMixerKind::Original, TokenMixerKind::Simplified, TokenMixerKind::Ccs]),
        norm in prop::sample::select(vec![NormKind::LayerNorm, NormKind::Affine]),
    ) {
        let config = MixerConfig {
            tokens: side * side,
            depth: 2,
            hidden: hidden_groups * groups,
            ratio: 2,
            patch: 1,
            groups,
            image_height: side,
            image_width: side,
            token_mixer: mixer,
            token_mlp_dim: 3,
            norm,
            num_classes: 3,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params: ModelParams<f64> = ModelParams::init(&config, &mut rng).unwrap();
        let x = random_tensor(&[config.tokens, config.hidden], &mut rng, 1.0);
        for block in &params.blocks {
            let u = ccs_core::model::channel_mixing(&x, &block.channel_norm, norm, &block.channel_mlp).unwrap();
            prop_assert_eq!(u.shape(), x.shape());
            let y = ccs_core::model::token_mixing(&u, &block.token, &block.token_norm, norm, Backend::Direct).unwrap();
            prop_assert_eq!(y.shape(), x.shape());
        }
        let image = random_tensor(&[3, side, side], &mut rng, 1.0);
        let logits = model_forward(&image, &params, &config).unwrap();
        prop_assert_eq!(logits.shape(), &[3]);
    }
}

#[test]
fn ccs_mix_commutes_with_every_shift_on_small_lengths() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 1..=16 {
        let x = random_tensor(&[2, n, 4], &mut rng, 1.0);
        let w = CcsWeights::new(random_tensor(&[2, n], &mut rng, 1.0)).unwrap();
        for backend in [Backend::Direct, Backend::Fft] {
            let base = ccs_mix(&x, &w, backend).unwrap();
            for s in 0..n {
                let lhs = ccs_mix(&shift3(&x, s), &w, backend).unwrap();
                assert!(lhs.max_abs_diff(&shift3(&base, s)).unwrap() <= 1e-10, "n={n} s={s}");
            }
        }
    }
}

#[test]
fn ccs_mix_commutes_with_sampled_shifts_at_196_tokens() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 196;
    let x = random_tensor(&[1, n, 16], &mut rng, 1.0);
    let w = CcsWeights::new(random_tensor(&[8, n], &mut rng, 1.0)).unwrap();
    let base = ccs_mix(&x, &w, Backend::Direct).unwrap();
    for _ in 0..12 {
        let s = rng.gen_range(1..n);
        let lhs = ccs_mix(&shift3(&x, s), &w, Backend::Direct).unwrap();
        assert!(lhs.max_abs_diff(&shift3(&base, s)).unwrap() <= 1e-10);
    }
}

#[test]
fn dense_token_mixing_breaks_shift_equivariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let n = 16;
    let u = random_tensor(&[n, 4], &mut rng, 1.0);
    let w3 = random_tensor(&[n, n], &mut rng, 1.0);
    let norm = NormParams::identity(4);
    let base = token_mixing_simplified(&u, &w3, &norm, NormKind::Affine).unwrap();
    let shifted = token_mixing_simplified(&circular_shift(&u, 3), &w3, &norm, NormKind::Affine).unwrap();
    let violation = shifted.max_abs_diff(&circular_shift(&base, 3)).unwrap();
    assert!(violation >= 1e-3, "violation {violation}");
}

#[test]
fn ccs_block_commutes_with_shifts_under_affine_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let n = 12;
    let u = random_tensor(&[n, 6], &mut rng, 1.0);
    let w = CcsWeights::new(random_tensor(&[3, n], &mut rng, 1.0)).unwrap();
    let norm = NormParams {
        scale: random_tensor(&[6], &mut rng, 2.0),
        bias: random_tensor(&[6], &mut rng, 1.0),
    };
    let base = token_mixing_ccs(&u, &w, &norm, NormKind::Affine, Backend::Direct).unwrap();
    for s in 1..n {
        let lhs = token_mixing_ccs(&circular_shift(&u, s), &w, &norm, NormKind::Affine, Backend::Fft).unwrap();
        assert!(lhs.max_abs_diff(&circular_shift(&base, s)).unwrap() <= 1e-10);
    }
}

#[test]
fn groups_make_mixing_channel_specific() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let n = 9;
    let column: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    // Every channel sees the same token sequence.
    let x = Tensor::from_fn(&[1, n, 4], |k| column[k / 4]).reshape(&[1, n, 4]).unwrap();
    let channel = |y: &Tensor<f64>, c: usize| -> Vec<f64> { (0..n).map(|i| y.data()[i * 4 + c]).collect() };

    let grouped = CcsWeights::new(random_tensor(&[2, n], &mut rng, 1.0)).unwrap();
    let y = ccs_mix(&x, &grouped, Backend::Direct).unwrap();
    let gap = channel(&y, 0).iter().zip(channel(&y, 1)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap > 1e-6);
    assert_eq!(channel(&y, 0), channel(&y, 2));

    let shared = CcsWeights::new(random_tensor(&[1, n], &mut rng, 1.0)).unwrap();
    let y = ccs_mix(&x, &shared, Backend::Direct).unwrap();
    for c in 1..4 {
        assert_eq!(channel(&y, 0), channel(&y, c));
    }
}

#[test]
fn ccs_generator_count_matches_table() {
    let w = CcsWeights::<f64>::zeros(8, 196);
    assert_eq!(w.param_count(), 1568);
    let dense = materialize_circulant(&vec![0.0f64; 196]);
    assert_eq!(dense.len(), 38416);
}

#[test]
fn ccs_saves_exactly_the_dense_minus_generator_count() {
    for (n, g, depth, side) in [(196, 8, 12, 14), (16, 4, 3, 4), (9, 1, 2, 3), (196, 98, 36, 14)] {
        let hidden = 4 * g;
        let ccs = MixerConfig {
            tokens: n,
            depth,
            hidden,
            ratio: 4,
            patch: 1,
            groups: g,
            image_height: side,
            image_width: side,
            token_mixer: TokenMixerKind::Ccs,
            token_mlp_dim: 7,
            norm: NormKind::Affine,
            num_classes: 10,
        };
        let simplified = MixerConfig {
            token_mixer: TokenMixerKind::Simplified,
            ..ccs.clone()
        };
        assert_eq!(count_params(&simplified) - count_params(&ccs), depth * (n * n - g * n));
    }
}

#[test]
fn single_group_ccs_equals_materialized_dense_mixer() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let n = 10;
    let u = random_tensor(&[n, 5], &mut rng, 1.0);
    let w = CcsWeights::new(random_tensor(&[1, n], &mut rng, 1.0)).unwrap();
    for kind in [NormKind::LayerNorm, NormKind::Affine] {
        let norm = NormParams {
            scale: random_tensor(&[5], &mut rng, 1.5),
            bias: random_tensor(&[5], &mut rng, 0.5),
        };
        let ccs = token_mixing_ccs(&u, &w, &norm, kind, Backend::Fft).unwrap();
        let dense = materialize_circulant(w.row(0));
        let simplified = token_mixing_simplified(&u, &dense, &norm, kind).unwrap();
        assert!(ccs.max_abs_diff(&simplified).unwrap() <= 1e-10);
    }
}

fn tiny(mixer: TokenMixerKind, norm: NormKind) -> MixerConfig {
    MixerConfig {
        tokens: 4,
        depth: 1,
        hidden: 4,
        ratio: 2,
        patch: 1,
        groups: 2,
        image_height: 2,
        image_width: 2,
        token_mixer: mixer,
        token_mlp_dim: 3,
        norm,
        num_classes: 3,
    }
}

#[test]
fn zero_mixing_weights_reduce_model_to_pooled_embedding() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for mixer in [TokenMixerKind::Original, TokenMixerKind::Simplified, TokenMixerKind::Ccs] {
        for norm in [NormKind::LayerNorm, NormKind::Affine] {
            let config = MixerConfig { depth: 3, ..tiny(mixer, norm) };
            let mut params: ModelParams<f64> = ModelParams::init(&config, &mut rng).unwrap();
            for block in &mut params.blocks {
                let mlp = &mut block.channel_mlp;
                for t in [&mut mlp.w1, &mut mlp.b1, &mut mlp.w2, &mut mlp.b2] {
                    t.data_mut().iter_mut().for_each(|v| *v = 0.0);
                }
                match &mut block.token {
                    TokenParams::Original { w4, .. } => w4.data_mut().iter_mut().for_each(|v| *v = 0.0),
                    TokenParams::Simplified { w3 } => w3.data_mut().iter_mut().for_each(|v| *v = 0.0),
                    TokenParams::Ccs(w) => w.tensor_mut().data_mut().iter_mut().for_each(|v| *v = 0.0),
                }
            }
            params.head_b = random_tensor(&[3], &mut rng, 1.0);
            let image = random_tensor(&[3, 2, 2], &mut rng, 1.0);
            let logits = model_forward(&image, &params, &config).unwrap();

            let mut embedded = patchify(&image, 1).unwrap().matmul(&params.patch_w).unwrap();
            embedded.add_row_vector(&params.patch_b).unwrap();
            let finished = normalize(&embedded, &params.final_norm, norm).unwrap();
            let mut expected = finished.mean_rows().unwrap().reshape(&[1, 4]).unwrap().matmul(&params.head_w).unwrap();
            expected.add_row_vector(&params.head_b).unwrap();
            let expected = expected.reshape(&[3]).unwrap();
            assert!(logits.max_abs_diff(&expected).unwrap() <= 1e-12, "{mixer} {norm}");
        }
    }
}

fn erf_gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

/// Row-wise layer norm on nested vectors.
fn ln_rows(x: &[Vec<f64>], scale: &[f64], bias: &[f64]) -> Vec<Vec<f64>> {
    x.iter()
        .map(|row| {
            let c = row.len() as f64;
            let mean = row.iter().sum::<f64>() / c;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / c;
            row.iter()
                .enumerate()
                .map(|(k, v)| (v - mean) / (var + 1e-6).sqrt() * scale[k] + bias[k])
                .collect()
        })
        .collect()
}

#[test]
fn tiny_ccs_model_matches_hand_composed_loops() {
    let config = tiny(TokenMixerKind::Ccs, NormKind::LayerNorm);
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let mut params: ModelParams<f64> = ModelParams::init(&config, &mut rng).unwrap();
    for (_, t) in params.arrays_mut() {
        t.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-0.8..0.8));
    }
    let image = random_tensor(&[3, 2, 2], &mut rng, 1.0);
    let logits = model_forward(&image, &params, &config).unwrap();

    let p = |name: &str| params.get(name).unwrap().data().to_vec();
    let (n, c, hidden) = (4, 4, 8);
    // Token t = pixel (t / 2, t % 2); features are its three colour values.
    let patches: Vec<Vec<f64>> = (0..n).map(|t| (0..3).map(|ch| image.data()[ch * 4 + t]).collect()).collect();
    let (w0, b0) = (p("patch_embed.weight"), p("patch_embed.bias"));
    let mut x: Vec<Vec<f64>> = patches
        .iter()
        .map(|f| (0..c).map(|k| b0[k] + (0..3).map(|d| f[d] * w0[d * c + k]).sum::<f64>()).collect())
        .collect();

    let xh = ln_rows(&x, &p("blocks.0.channel_norm.scale"), &p("blocks.0.channel_norm.bias"));
    let (w1, b1, w2, b2) = (
        p("blocks.0.channel_mlp.w1"),
        p("blocks.0.channel_mlp.b1"),
        p("blocks.0.channel_mlp.w2"),
        p("blocks.0.channel_mlp.b2"),
    );
    for t in 0..n {
        let h: Vec<f64> = (0..hidden)
            .map(|j| erf_gelu(b1[j] + (0..c).map(|k| w1[j * c + k] * xh[t][k]).sum::<f64>()))
            .collect();
        for k in 0..c {
            x[t][k] += b2[k] + (0..hidden).map(|j| w2[k * hidden + j] * h[j]).sum::<f64>();
        }
    }

    let uh = ln_rows(&x, &p("blocks.0.token_norm.scale"), &p("blocks.0.token_norm.bias"));
    let w = p("blocks.0.token_mix.ccs");
    let mut y = x.clone();
    for (i, row) in y.iter_mut().enumerate() {
        for (k, v) in row.iter_mut().enumerate() {
            let g = k % 2;
            *v += (0..n).map(|j| w[g * n + j] * uh[(i + j) % n][k]).sum::<f64>();
        }
    }

    let z = ln_rows(&y, &p("final_norm.scale"), &p("final_norm.bias"));
    let pooled: Vec<f64> = (0..c).map(|k| z.iter().map(|r| r[k]).sum::<f64>() / n as f64).collect();
    let (hw, hb) = (p("head.weight"), p("head.bias"));
    for cls in 0..3 {
        let expected = hb[cls] + (0..c).map(|k| pooled[k] * hw[k * 3 + cls]).sum::<f64>();
        assert!((logits.data()[cls] - expected).abs() <= 1e-12, "class {cls}");
    }
}

fn short_run(lr: f64, seed: u64) -> Vec<(f64, f64)> {
    let spec = ShiftTaskSpec {
        seed,
        train_count: 64,
        test_count: 32,
        ..ShiftTaskSpec::default()
    };
    let (train_set, test_set) = make_shift_task::<f64>(&spec).unwrap();
    let config = ccs_core::training::shift_task_model(&spec, TokenMixerKind::Ccs).unwrap();
    let opts = TrainOptions {
        epochs: 3,
        lr,
        batch_size: 16,
        seed,
        ..TrainOptions::default()
    };
    train(&config, &train_set, &test_set, &opts)
        .unwrap()
        .history
        .iter()
        .map(|m| (m.train_loss, m.test_acc))
        .collect()
}

#[test]
fn training_is_reproducible_for_a_fixed_seed() {
    let a = short_run(1e-2, 5);
    let b = short_run(1e-2, 5);
    assert_eq!(a, b);
    assert_ne!(a, short_run(1e-2, 6));
}

#[test]
fn zero_learning_rate_keeps_loss_constant() {
    let history = short_run(0.0, 7);
    assert!(history.windows(2).all(|w| w[0].0 == w[1].0));
}
