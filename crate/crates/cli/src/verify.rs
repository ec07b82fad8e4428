//! The invariant suite behind `ccsmix verify`.
//!
//! Each property reduces to one observed number and a bound. Most are error
//! magnitudes that must stay below a tolerance; witnesses of a violation
//! (dense mixers are not shift equivariant) must stay above one.

use std::fmt;

use ccs_core::circulant::{ccs_mix, materialize_circulant, Backend, CcsWeights};
use ccs_core::model::{
    channel_mixing, count_params, model_forward, normalize, patchify, token_mixing, token_mixing_ccs,
    token_mixing_simplified, MixerConfig, ModelParams, NormKind, NormParams, TokenMixerKind, TokenParams,
};
use ccs_core::numerics::fft::{transform, Direction};
use ccs_core::numerics::{dft_naive, fft, ifft, ComplexBuffer, Tensor};
use ccs_core::training::gradcheck::{
    adjoint_checks, full_gradient_suite, CheckReport, ADJOINT_TOLERANCE, FD_TOLERANCE,
};
use ccs_core::training::{
    circular_shift, make_shift_task, shift_task_model, train, ShiftTaskSpec, TrainOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::weights::{decode, encode, Width};

/// Lengths of the FFT invariants.
pub const FFT_LENGTHS: [usize; 7] = [1, 2, 7, 49, 100, 196, 256];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    AtMost(f64),
    AtLeast(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    pub name: String,
    pub observed: f64,
    pub bound: Bound,
}

impl PropertyReport {
    pub fn at_most(name: impl Into<String>, observed: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            observed,
            bound: Bound::AtMost(limit),
        }
    }

    pub fn at_least(name: impl Into<String>, observed: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            observed,
            bound: Bound::AtLeast(limit),
        }
    }

    pub fn passed(&self) -> bool {
        match self.bound {
            Bound::AtMost(t) => self.observed.is_finite() && self.observed <= t,
            Bound::AtLeast(t) => self.observed.is_finite() && self.observed >= t,
        }
    }
}

impl fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        let bound = match self.bound {
            Bound::AtMost(t) => format!("<= {t:.1e}"),
            Bound::AtLeast(t) => format!(">= {t:.1e}"),
        };
        write!(f, "{status} {:<40} observed {:.3e} (bound {bound})", self.name, self.observed)
    }
}

/// Deliberate defects used to check that the suite notices them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// The FFT under test runs with the opposite exponent sign.
    FftSign,
}

fn random_buffer(n: usize, rng: &mut ChaCha8Rng) -> ComplexBuffer<f64> {
    let re = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let im = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    ComplexBuffer::new(re, im).expect("equal lengths")
}

fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng, scale: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.gen_range(-scale..scale))
}

fn buffer_max(x: &ComplexBuffer<f64>) -> f64 {
    x.re().iter().chain(x.im()).fold(0.0, |m, v| m.max(v.abs()))
}

fn fft_under_test(x: &ComplexBuffer<f64>, fault: Fault) -> ComplexBuffer<f64> {
    let direction = match fault {
        Fault::None => Direction::Forward,
        Fault::FftSign => Direction::Inverse,
    };
    transform(x, direction).expect("non-empty input")
}

/// `max |ifft(fft(x)) - x| / (1 + max|x|)`.
pub fn fft_round_trip(lengths: &[usize], trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for &n in lengths {
        for _ in 0..trials {
            let x = random_buffer(n, &mut rng);
            let back = ifft(&fft(&x).expect("len > 0")).expect("len > 0");
            worst = worst.max(back.max_abs_diff(&x) / (1.0 + buffer_max(&x)));
        }
    }
    worst
}

/// Largest absolute deviation of the FFT from the O(N^2) DFT.
pub fn fft_dft_oracle(lengths: &[usize], trials: usize, seed: u64, fault: Fault) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for &n in lengths {
        for _ in 0..trials {
            let x = random_buffer(n, &mut rng);
            let oracle = dft_naive(&x).expect("len > 0");
            worst = worst.max(fft_under_test(&x, fault).max_abs_diff(&oracle));
        }
    }
    worst
}

/// `max |fft(ax + by) - (a fft(x) + b fft(y))|`.
pub fn fft_linearity(lengths: &[usize], trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for &n in lengths {
        for _ in 0..trials {
            let (x, y) = (random_buffer(n, &mut rng), random_buffer(n, &mut rng));
            let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let mix = |p: &ComplexBuffer<f64>, q: &ComplexBuffer<f64>| {
                let v: Vec<_> = p.to_complex().iter().zip(q.to_complex()).map(|(u, w)| u * a + w * b).collect();
                ComplexBuffer::from_complex(&v)
            };
            let lhs = fft(&mix(&x, &y)).expect("len > 0");
            let rhs = mix(&fft(&x).expect("len > 0"), &fft(&y).expect("len > 0"));
            worst = worst.max(lhs.max_abs_diff(&rhs));
        }
    }
    worst
}

/// Relative gap between `sum |x|^2` and `sum |X|^2 / N`.
pub fn fft_parseval(lengths: &[usize], trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for &n in lengths {
        for _ in 0..trials {
            let x = random_buffer(n, &mut rng);
            let time = x.energy();
            let freq = fft(&x).expect("len > 0").energy() / n as f64;
            worst = worst.max((time - freq).abs() / time.max(f64::MIN_POSITIVE));
        }
    }
    worst
}

/// `max |fft - direct| / (1 + max|x| max|w| N)` over random trials cycling
/// through every `(N, C)` pair.
pub fn backend_equivalence(tokens: &[usize], channels: &[usize], trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(usize, usize)> = tokens.iter().flat_map(|&n| channels.iter().map(move |&c| (n, c))).collect();
    let mut worst = 0.0f64;
    for t in 0..trials {
        let (n, c) = pairs[t % pairs.len()];
        let groups = [8, 4, 2, 1].into_iter().find(|g| c % g == 0).expect("1 divides");
        let batch = rng.gen_range(1..3);
        let x = random_tensor(&[batch, n, c], &mut rng, 3.0);
        let w = CcsWeights::new(random_tensor(&[groups, n], &mut rng, 1.0)).expect("rank 2");
        let direct = ccs_mix(&x, &w, Backend::Direct).expect("shapes match");
        let spectral = ccs_mix(&x, &w, Backend::Fft).expect("shapes match");
        let scale = 1.0 + x.max_abs() * w.tensor().max_abs() * n as f64;
        worst = worst.max(direct.max_abs_diff(&spectral).expect("same shape") / scale);
    }
    worst
}

fn shift_batched(x: &Tensor<f64>, s: usize) -> Tensor<f64> {
    let (b, n, c) = x.dims3("shift").expect("rank 3");
    let rows: Vec<f64> = (0..b)
        .flat_map(|bi| {
            let slice = Tensor::matrix(n, c, x.data()[bi * n * c..(bi + 1) * n * c].to_vec()).expect("slice");
            circular_shift(&slice, s).into_data()
        })
        .collect();
    Tensor::new(vec![b, n, c], rows).expect("same size")
}

/// Inputs shared by the equivariance property and its dense counterexample.
fn equivariance_cases(seed: u64) -> Vec<(Tensor<f64>, CcsWeights<f64>, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases: Vec<_> = (1..=16)
        .map(|n| {
            let x = random_tensor(&[2, n, 4], &mut rng, 1.0);
            let w = CcsWeights::new(random_tensor(&[2, n], &mut rng, 1.0)).expect("rank 2");
            (x, w, (0..n).collect())
        })
        .collect();
    let x = random_tensor(&[1, 196, 16], &mut rng, 1.0);
    let w = CcsWeights::new(random_tensor(&[8, 196], &mut rng, 1.0)).expect("rank 2");
    let shifts = (0..16).map(|_| rng.gen_range(1..196)).collect();
    cases.push((x, w, shifts));
    cases
}

/// `max |ccs_mix(S x) - S ccs_mix(x)|` over every shift for N <= 16 and sampled shifts at N = 196.
pub fn shift_equivariance(seed: u64) -> f64 {
    let mut worst = 0.0f64;
    for (x, w, shifts) in equivariance_cases(seed) {
        for backend in [Backend::Direct, Backend::Fft] {
            let base = ccs_mix(&x, &w, backend).expect("shapes match");
            for &s in &shifts {
                let lhs = ccs_mix(&shift_batched(&x, s), &w, backend).expect("shapes match");
                worst = worst.max(lhs.max_abs_diff(&shift_batched(&base, s)).expect("same shape"));
            }
        }
    }
    worst
}

/// Largest shift violation of a random dense token mixer on the equivariance inputs.
pub fn dense_shift_violation(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut worst = 0.0f64;
    for (x, _, shifts) in equivariance_cases(seed) {
        let (b, n, c) = x.dims3("dense").expect("rank 3");
        let w3 = random_tensor(&[n, n], &mut rng, 1.0);
        let mix = |x: &Tensor<f64>| {
            let mut out = Vec::with_capacity(x.len());
            for bi in 0..b {
                let u = Tensor::matrix(n, c, x.data()[bi * n * c..(bi + 1) * n * c].to_vec()).expect("slice");
                out.extend(w3.matmul_tn(&u).expect("n x n by n x c").into_data());
            }
            Tensor::new(vec![b, n, c], out).expect("same size")
        };
        let base = mix(&x);
        for &s in &shifts {
            let lhs = mix(&shift_batched(&x, s));
            worst = worst.max(lhs.max_abs_diff(&shift_batched(&base, s)).expect("same shape"));
        }
    }
    worst
}

/// `(spread, gap)`: the largest output difference between channels sharing one
/// generator (G = 1), and the smallest difference between channels of
/// different groups (G >= 2), both under identical per-channel input.
pub fn channel_specificity(seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, c) = (12, 8);
    let column: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let x = Tensor::new(vec![1, n, c], (0..n * c).map(|k| column[k / c]).collect()).expect("sized");
    let channel = |y: &Tensor<f64>, ch: usize| -> Vec<f64> { (0..n).map(|i| y.data()[i * c + ch]).collect() };
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));

    let shared = CcsWeights::new(random_tensor(&[1, n], &mut rng, 1.0)).expect("rank 2");
    let y = ccs_mix(&x, &shared, Backend::Direct).expect("shapes match");
    let spread = (1..c).map(|ch| diff(&channel(&y, 0), &channel(&y, ch))).fold(0.0, f64::max);

    let grouped = CcsWeights::new(random_tensor(&[4, n], &mut rng, 1.0)).expect("rank 2");
    let y = ccs_mix(&x, &grouped, Backend::Direct).expect("shapes match");
    let mut gap = f64::INFINITY;
    for a in 0..c {
        for b in 0..c {
            if a % 4 != b % 4 {
                gap = gap.min(diff(&channel(&y, a), &channel(&y, b)));
            }
        }
    }
    (spread, gap)
}

/// Small configuration family used by the model properties.
fn small_configs() -> Vec<MixerConfig> {
    let mut out = Vec::new();
    for (side, hidden, groups) in [(1, 2, 1), (2, 4, 2), (3, 6, 3), (4, 8, 4)] {
        for mixer in [TokenMixerKind::Original, TokenMixerKind::Simplified, TokenMixerKind::Ccs] {
            for norm in [NormKind::LayerNorm, NormKind::Affine] {
                out.push(MixerConfig {
                    tokens: side * side,
                    depth: 2,
                    hidden,
                    ratio: 2,
                    patch: 1,
                    groups,
                    image_height: side,
                    image_width: side,
                    token_mixer: mixer,
                    token_mlp_dim: 3,
                    norm,
                    num_classes: 3,
                });
            }
        }
    }
    out
}

/// Number of shape-contract violations over the small configuration family.
pub fn shape_contract(seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    for config in small_configs() {
        let params: ModelParams<f64> = ModelParams::init(&config, &mut rng).expect("valid config");
        let x = random_tensor(&[config.tokens, config.hidden], &mut rng, 1.0);
        for block in &params.blocks {
            let ok = channel_mixing(&x, &block.channel_norm, config.norm, &block.channel_mlp)
                .and_then(|u| {
                    let same = u.shape() == x.shape();
                    token_mixing(&u, &block.token, &block.token_norm, config.norm, Backend::Direct)
                        .map(|y| same && y.shape() == x.shape())
                })
                .unwrap_or(false);
            violations += usize::from(!ok);
        }
        let image = random_tensor(&[3, config.image_height, config.image_width], &mut rng, 1.0);
        let logits_ok = model_forward(&image, &params, &config)
            .map(|l| l.shape() == [config.num_classes])
            .unwrap_or(false);
        violations += usize::from(!logits_ok);
    }
    violations
}

/// With all mixing weights zero, `max |model_forward - head(mean(norm(patch_embed)))|`.
pub fn zero_weight_identity(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for config in small_configs() {
        let mut params: ModelParams<f64> = ModelParams::init(&config, &mut rng).expect("valid config");
        for block in &mut params.blocks {
            let mlp = &mut block.channel_mlp;
            for t in [&mut mlp.w1, &mut mlp.b1, &mut mlp.w2, &mut mlp.b2] {
                t.data_mut().fill(0.0);
            }
            match &mut block.token {
                TokenParams::Original { w4, .. } => w4.data_mut().fill(0.0),
                TokenParams::Simplified { w3 } => w3.data_mut().fill(0.0),
                TokenParams::Ccs(w) => w.tensor_mut().data_mut().fill(0.0),
            }
        }
        params.head_b = random_tensor(&[config.num_classes], &mut rng, 1.0);
        let image = random_tensor(&[3, config.image_height, config.image_width], &mut rng, 1.0);
        let logits = model_forward(&image, &params, &config).expect("valid shapes");

        let mut embedded = patchify(&image, config.patch)
            .and_then(|p| p.matmul(&params.patch_w))
            .expect("valid shapes");
        embedded.add_row_vector(&params.patch_b).expect("bias length");
        let pooled = normalize(&embedded, &params.final_norm, config.norm)
            .and_then(|t| t.mean_rows())
            .expect("valid shapes");
        let mut expected = pooled
            .reshape(&[1, config.hidden])
            .and_then(|p| p.matmul(&params.head_w))
            .expect("valid shapes");
        expected.add_row_vector(&params.head_b).expect("bias length");
        let gap = logits
            .data()
            .iter()
            .zip(expected.data())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(gap);
    }
    worst
}

fn random_norm(c: usize, rng: &mut ChaCha8Rng) -> NormParams<f64> {
    NormParams {
        scale: Tensor::from_fn(&[c], |_| rng.gen_range(0.5..1.5)),
        bias: random_tensor(&[c], rng, 0.5),
    }
}

/// `(ccs_error, dense_violation)` for a whole token-mixing block under the affine norm.
pub fn block_shift(seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, c) = (12, 6);
    let u = random_tensor(&[n, c], &mut rng, 1.0);
    let norm = random_norm(c, &mut rng);
    let w = CcsWeights::new(random_tensor(&[3, n], &mut rng, 1.0)).expect("rank 2");
    let w3 = random_tensor(&[n, n], &mut rng, 1.0);
    let ccs = |x: &Tensor<f64>| token_mixing_ccs(x, &w, &norm, NormKind::Affine, Backend::Direct).expect("shapes");
    let dense = |x: &Tensor<f64>| token_mixing_simplified(x, &w3, &norm, NormKind::Affine).expect("shapes");
    let (base_ccs, base_dense) = (ccs(&u), dense(&u));
    let (mut err, mut violation) = (0.0f64, 0.0f64);
    for s in 1..n {
        let shifted = circular_shift(&u, s);
        err = err.max(ccs(&shifted).max_abs_diff(&circular_shift(&base_ccs, s)).expect("same shape"));
        violation = violation.max(
            dense(&shifted)
                .max_abs_diff(&circular_shift(&base_dense, s))
                .expect("same shape"),
        );
    }
    (err, violation)
}

/// Largest deviation of `count(simplified) - count(ccs)` from `L (N^2 - G N)` over configs with `G < N`.
pub fn count_difference() -> usize {
    let mut worst = 0usize;
    for (n, side, groups, depth, hidden) in [(4, 2, 2, 3, 4), (16, 4, 4, 2, 8), (196, 14, 8, 12, 768), (196, 14, 8, 36, 384)]
    {
        let ccs = MixerConfig {
            tokens: n,
            depth,
            hidden,
            ratio: 4,
            patch: 16,
            groups,
            image_height: side * 16,
            image_width: side * 16,
            token_mixer: TokenMixerKind::Ccs,
            token_mlp_dim: 384,
            norm: NormKind::Affine,
            num_classes: 1000,
        };
        let simplified = MixerConfig {
            token_mixer: TokenMixerKind::Simplified,
            ..ccs.clone()
        };
        let gap = count_params(&simplified) as i64 - count_params(&ccs) as i64;
        let expected = (depth * (n * n - groups * n)) as i64;
        worst = worst.max(gap.abs_diff(expected) as usize);
    }
    worst
}

/// `max |token_mixing_ccs(G = 1) - token_mixing_simplified(materialized circulant)|`.
pub fn single_group_consistency(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for n in [3, 10, 49] {
        let u = random_tensor(&[n, 5], &mut rng, 1.0);
        let w = CcsWeights::new(random_tensor(&[1, n], &mut rng, 1.0)).expect("rank 2");
        let dense = materialize_circulant(w.row(0));
        for kind in [NormKind::LayerNorm, NormKind::Affine] {
            let norm = random_norm(5, &mut rng);
            for backend in [Backend::Direct, Backend::Fft] {
                let a = token_mixing_ccs(&u, &w, &norm, kind, backend).expect("shapes");
                let b = token_mixing_simplified(&u, &dense, &norm, kind).expect("shapes");
                worst = worst.max(a.max_abs_diff(&b).expect("same shape"));
            }
        }
    }
    worst
}

fn worst(reports: &[CheckReport]) -> f64 {
    reports.iter().map(|r| r.error).fold(0.0, f64::max)
}

/// `(finite-difference worst, adjoint worst)` over every layer and the tiny end-to-end models.
pub fn gradient_checks(seed: u64) -> ccs_core::Result<(f64, f64)> {
    let mut reports = full_gradient_suite(seed)?;
    reports.extend(adjoint_checks(seed.wrapping_add(17))?);
    let (adjoint, fd): (Vec<_>, Vec<_>) = reports.into_iter().partition(|r| r.tolerance == ADJOINT_TOLERANCE);
    Ok((worst(&fd), worst(&adjoint)))
}

/// Worst dot-product error of the circulant mixing adjoint alone.
pub fn ccs_adjoint(seed: u64) -> ccs_core::Result<f64> {
    let reports = adjoint_checks(seed)?;
    Ok(worst(
        &reports.into_iter().filter(|r| r.name.starts_with("ccs_mix")).collect::<Vec<_>>(),
    ))
}

/// Metrics of a short training run.
fn short_run(seed: u64, lr: f64) -> ccs_core::Result<Vec<(f64, f64)>> {
    let spec = ShiftTaskSpec {
        seed,
        train_count: 64,
        test_count: 32,
        ..ShiftTaskSpec::default()
    };
    let (train_set, test_set) = make_shift_task::<f64>(&spec)?;
    let config = shift_task_model(&spec, TokenMixerKind::Ccs)?;
    let opts = TrainOptions {
        epochs: 3,
        lr,
        batch_size: 16,
        seed,
        ..TrainOptions::default()
    };
    let report = train(&config, &train_set, &test_set, &opts)?;
    Ok(report.history.iter().map(|m| (m.train_loss, m.test_acc)).collect())
}

/// 0 when two runs with one seed give identical metrics, 1 otherwise.
pub fn training_reproducible(seed: u64) -> ccs_core::Result<f64> {
    Ok(if short_run(seed, 1e-2)? == short_run(seed, 1e-2)? { 0.0 } else { 1.0 })
}

/// Final shifted-test accuracies `(ccs, simplified)` under the default training budget.
pub fn shift_task_accuracies(seed: u64) -> ccs_core::Result<(f64, f64)> {
    let spec = ShiftTaskSpec {
        seed,
        ..ShiftTaskSpec::default()
    };
    let (train_set, test_set) = make_shift_task::<f64>(&spec)?;
    let opts = TrainOptions {
        seed,
        ..TrainOptions::default()
    };
    let mut acc = [0.0; 2];
    for (slot, mixer) in acc.iter_mut().zip([TokenMixerKind::Ccs, TokenMixerKind::Simplified]) {
        let config = shift_task_model(&spec, mixer)?;
        *slot = train(&config, &train_set, &test_set, &opts)?.final_test_accuracy();
    }
    Ok((acc[0], acc[1]))
}

/// `(width-8 mismatches, width-4 mismatches)` against bitwise identity and
/// per-element binary32 rounding respectively.
pub fn weight_round_trip(seed: u64) -> (usize, usize) {
    let config = ccs_core::training::gradcheck::tiny_config(TokenMixerKind::Ccs, NormKind::LayerNorm);
    let mut params = ccs_core::training::gradcheck::random_params(&config, seed).expect("valid config");
    // Values that stress the encoding: subnormals, signed zero, huge magnitudes.
    let specials = [f64::MIN_POSITIVE / 3.0, -0.0, 1e300, -1e-300, 1.0 / 3.0];
    for (v, s) in params.patch_w.data_mut().iter_mut().zip(specials) {
        *v = s;
    }
    let mut mismatches = [0usize; 2];
    for (slot, width) in mismatches.iter_mut().zip([Width::F64, Width::F32]) {
        let loaded = encode(&config, &params, width).and_then(|b| decode(&b));
        *slot = match loaded {
            Ok(file) if file.config == config => params
                .arrays()
                .iter()
                .zip(file.params.arrays())
                .flat_map(|((_, a), (_, b))| a.data().iter().zip(b.data()))
                .filter(|(&x, &y)| {
                    let expected = match width {
                        Width::F64 => x,
                        Width::F32 => x as f32 as f64,
                    };
                    expected.to_bits() != y.to_bits()
                })
                .count(),
            _ => usize::MAX,
        };
    }
    (mismatches[0], mismatches[1])
}

/// Runs every property of the suite.
pub fn run_suite(seed: u64, fault: Fault) -> ccs_core::Result<Vec<PropertyReport>> {
    let lengths = &FFT_LENGTHS;
    let mut out = vec![
        PropertyReport::at_most("fft.round_trip", fft_round_trip(lengths, 4, seed), 1e-12),
        PropertyReport::at_most("fft.dft_oracle", fft_dft_oracle(lengths, 4, seed, fault), 1e-10),
        PropertyReport::at_most("fft.linearity", fft_linearity(lengths, 4, seed), 1e-10),
        PropertyReport::at_most("fft.parseval", fft_parseval(lengths, 4, seed), 1e-10),
        PropertyReport::at_most(
            "circulant.backend_equivalence",
            backend_equivalence(&[4, 7, 49, 196], &[1, 8, 32], 120, seed),
            1e-9,
        ),
        PropertyReport::at_most("circulant.shift_equivariance", shift_equivariance(seed), 1e-10),
        PropertyReport::at_least("circulant.dense_shift_violation", dense_shift_violation(seed), 1e-3),
    ];
    let (spread, gap) = channel_specificity(seed);
    out.push(PropertyReport::at_most("circulant.shared_generator_spread", spread, 0.0));
    out.push(PropertyReport::at_least("circulant.channel_specificity_gap", gap, 1e-6));
    out.push(PropertyReport::at_most("circulant.adjoint", ccs_adjoint(seed)?, ADJOINT_TOLERANCE));
    let count = CcsWeights::<f64>::zeros(8, 196).param_count();
    out.push(PropertyReport::at_most(
        "circulant.param_count_1568",
        count.abs_diff(1568) as f64,
        0.0,
    ));
    out.push(PropertyReport::at_most("model.shape_contract", shape_contract(seed) as f64, 0.0));
    out.push(PropertyReport::at_most("model.zero_weight_identity", zero_weight_identity(seed), 1e-12));
    let (block_err, block_violation) = block_shift(seed);
    out.push(PropertyReport::at_most("model.ccs_block_shift", block_err, 1e-10));
    out.push(PropertyReport::at_least("model.dense_block_shift_violation", block_violation, 1e-3));
    out.push(PropertyReport::at_most("model.count_difference", count_difference() as f64, 0.0));
    out.push(PropertyReport::at_most(
        "model.single_group_consistency",
        single_group_consistency(seed),
        1e-10,
    ));
    let (fd, adjoint) = gradient_checks(seed)?;
    out.push(PropertyReport::at_most("training.finite_difference", fd, FD_TOLERANCE));
    out.push(PropertyReport::at_most("training.adjoint", adjoint, ADJOINT_TOLERANCE));
    out.push(PropertyReport::at_most(
        "training.reproducible",
        training_reproducible(seed)?,
        0.0,
    ));
    let (ccs, simplified) = shift_task_accuracies(seed)?;
    out.push(PropertyReport::at_least("training.shift_task_ccs_margin", ccs - simplified, 0.0));
    let (w8, w4) = weight_round_trip(seed);
    out.push(PropertyReport::at_most("weights.width8_bit_exact", w8 as f64, 0.0));
    out.push(PropertyReport::at_most("weights.width4_rounding", w4 as f64, 0.0));
    Ok(out)
}
