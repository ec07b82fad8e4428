//! Synthetic circular-shift classification task.
//!
//! Every class owns a motif: a fixed ordering of a shared vocabulary of token
//! vectors. A sample writes its class motif at some circular offset into a
//! sequence of small noise tokens. All classes use the same tokens, so only
//! their relative order identifies the class, and a circular shift of a sample
//! is a valid sample of the same class.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftPolicy {
    /// Motif always starts at token 0.
    None,
    /// Motif starts at a uniformly random token.
    Uniform,
}

#[derive(Debug, Clone)]
pub struct Sample<T> {
    /// `N x C_in` tokens.
    pub tokens: Tensor<T>,
    pub label: usize,
    pub offset: usize,
}

#[derive(Debug, Clone)]
pub struct SynthDataset<T> {
    pub samples: Vec<Sample<T>>,
    pub seed: u64,
    pub shift_policy: ShiftPolicy,
}

impl<T> SynthDataset<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftTaskSpec {
    pub seed: u64,
    pub tokens: usize,
    pub channels_in: usize,
    pub classes: usize,
    /// Motif length; also the vocabulary size.
    pub motif_len: usize,
    /// Standard deviation of background tokens.
    pub noise: f64,
    pub train_count: usize,
    pub test_count: usize,
    /// Offset policy for the training split; the test split is always shifted.
    pub shift_policy: ShiftPolicy,
}

impl Default for ShiftTaskSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            tokens: 16,
            channels_in: 3,
            classes: 4,
            motif_len: 4,
            noise: 0.1,
            train_count: 512,
            test_count: 256,
            shift_policy: ShiftPolicy::None,
        }
    }
}

/// Class motifs of the task: `classes` distinct orderings of `motif_len` vocabulary tokens.
#[derive(Debug, Clone)]
pub struct MotifBank {
    /// One `motif_len x C_in` block per class.
    pub motifs: Vec<Tensor<f64>>,
}

fn factorial_at_least(k: usize, needed: usize) -> bool {
    let mut f = 1usize;
    for i in 2..=k {
        f = f.saturating_mul(i);
        if f >= needed {
            return true;
        }
    }
    f >= needed
}

impl MotifBank {
    pub fn generate(spec: &ShiftTaskSpec, rng: &mut ChaCha8Rng) -> Result<Self> {
        if spec.classes < 2 {
            return Err(Error::Config("shift task needs at least 2 classes".into()));
        }
        if spec.motif_len == 0 || spec.motif_len > spec.tokens || spec.channels_in == 0 {
            return Err(Error::Config(format!(
                "motif length {} must be in 1..={} with positive channels",
                spec.motif_len, spec.tokens
            )));
        }
        if !factorial_at_least(spec.motif_len, spec.classes) {
            return Err(Error::Config(format!(
                "{} tokens have fewer than {} distinct orderings",
                spec.motif_len, spec.classes
            )));
        }
        // Unit-RMS vocabulary vectors.
        let vocab: Vec<Vec<f64>> = (0..spec.motif_len)
            .map(|_| {
                let v: Vec<f64> = (0..spec.channels_in).map(|_| StandardNormal.sample(rng)).collect();
                let rms = (v.iter().map(|x| x * x).sum::<f64>() / spec.channels_in as f64).sqrt();
                v.into_iter().map(|x| x / rms).collect()
            })
            .collect();
        let mut orders: Vec<Vec<usize>> = Vec::with_capacity(spec.classes);
        while orders.len() < spec.classes {
            let mut order: Vec<usize> = (0..spec.motif_len).collect();
            order.shuffle(rng);
            if !orders.contains(&order) {
                orders.push(order);
            }
        }
        let motifs = orders
            .iter()
            .map(|order| {
                let data = order.iter().flat_map(|&t| vocab[t].iter().copied()).collect();
                Tensor::matrix(spec.motif_len, spec.channels_in, data).expect("motif shape")
            })
            .collect();
        Ok(Self { motifs })
    }

    /// Motif of `class` written at circular `offset` over `background`.
    pub fn render(&self, class: usize, offset: usize, background: &mut Tensor<f64>) {
        let (n, c) = (background.shape()[0], background.shape()[1]);
        let motif = &self.motifs[class];
        for k in 0..motif.shape()[0] {
            let row = (offset + k) % n;
            background.data_mut()[row * c..(row + 1) * c].copy_from_slice(motif.row(k));
        }
    }

    /// Noise-free sample: the motif at `offset`, zeros elsewhere.
    pub fn clean(&self, class: usize, offset: usize, tokens: usize) -> Tensor<f64> {
        let c = self.motifs[class].shape()[1];
        let mut t = Tensor::zeros(&[tokens, c]);
        self.render(class, offset, &mut t);
        t
    }
}

/// Rolls the token axis: row `i` of the result is row `(i - shift) mod N` of `x`.
pub fn circular_shift<T: Scalar>(x: &Tensor<T>, shift: usize) -> Tensor<T> {
    let (n, c) = (x.shape()[0], x.shape()[1]);
    Tensor::from_fn(x.shape(), |k| {
        let (i, ch) = (k / c, k % c);
        x.data()[((i + n - shift % n) % n) * c + ch]
    })
}

fn draw<T: Scalar>(
    bank: &MotifBank,
    spec: &ShiftTaskSpec,
    count: usize,
    policy: ShiftPolicy,
    rng: &mut ChaCha8Rng,
) -> Vec<Sample<T>> {
    (0..count)
        .map(|_| {
            let label = rng.gen_range(0..spec.classes);
            let offset = match policy {
                ShiftPolicy::None => 0,
                ShiftPolicy::Uniform => rng.gen_range(0..spec.tokens),
            };
            let mut tokens = Tensor::from_fn(&[spec.tokens, spec.channels_in], |_| {
                {
                let z: f64 = StandardNormal.sample(rng);
                spec.noise * z
            }
            });
            bank.render(label, offset, &mut tokens);
            Sample {
                tokens: tokens.cast(),
                label,
                offset,
            }
        })
        .collect()
}

/// Builds `(train, test)` splits. The test split always uses uniform offsets.
pub fn make_shift_task<T: Scalar>(spec: &ShiftTaskSpec) -> Result<(SynthDataset<T>, SynthDataset<T>)> {
    if spec.train_count == 0 || spec.test_count == 0 {
        return Err(Error::Config("shift task needs non-empty splits".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let bank = MotifBank::generate(spec, &mut rng)?;
    let train = draw(&bank, spec, spec.train_count, spec.shift_policy, &mut rng);
    let test = draw(&bank, spec, spec.test_count, ShiftPolicy::Uniform, &mut rng);
    Ok((
        SynthDataset {
            samples: train,
            seed: spec.seed,
            shift_policy: spec.shift_policy,
        },
        SynthDataset {
            samples: test,
            seed: spec.seed,
            shift_policy: ShiftPolicy::Uniform,
        },
    ))
}

/// Motif bank the datasets of `spec` are drawn from.
pub fn motif_bank(spec: &ShiftTaskSpec) -> Result<MotifBank> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    MotifBank::generate(spec, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> ShiftTaskSpec {
        ShiftTaskSpec {
            train_count: 64,
            test_count: 32,
            ..ShiftTaskSpec::default()
        }
    }

    /// Exhaustive matcher: best (class, offset) by squared distance to the clean rendering.
    fn nearest_motif(bank: &MotifBank, x: &Tensor<f64>) -> usize {
        let n = x.shape()[0];
        let mut best = (f64::INFINITY, 0);
        for class in 0..bank.motifs.len() {
            for offset in 0..n {
                let d = bank.clean(class, offset, n).sub(x).unwrap().data().iter().map(|v| v * v).sum::<f64>();
                if d < best.0 {
                    best = (d, class);
                }
            }
        }
        best.1
    }

    #[test]
    fn unshifted_policy_places_motif_at_zero() {
        let (train, test) = make_shift_task::<f64>(&spec()).unwrap();
        assert!(train.samples.iter().all(|s| s.offset == 0));
        assert_eq!(test.shift_policy, ShiftPolicy::Uniform);
        assert!(test.samples.iter().any(|s| s.offset != 0));
    }

    #[test]
    fn shifted_sample_is_a_sample_of_the_same_class() {
        let bank = motif_bank(&spec()).unwrap();
        for class in 0..4 {
            let base = bank.clean(class, 0, 16);
            for s in [1, 5, 15] {
                assert_eq!(circular_shift(&base, s), bank.clean(class, s, 16));
                assert_eq!(nearest_motif(&bank, &circular_shift(&base, s)), class);
            }
        }
    }

    #[test]
    fn clean_samples_are_perfectly_separable() {
        let bank = motif_bank(&spec()).unwrap();
        for class in 0..4 {
            for offset in 0..16 {
                assert_eq!(nearest_motif(&bank, &bank.clean(class, offset, 16)), class);
            }
        }
    }

    #[test]
    fn classes_share_one_vocabulary() {
        let bank = motif_bank(&spec()).unwrap();
        let sorted_rows = |t: &Tensor<f64>| {
            let mut rows: Vec<Vec<u64>> = (0..4).map(|r| t.row(r).iter().map(|v| v.to_bits()).collect()).collect();
            rows.sort();
            rows
        };
        let first = sorted_rows(&bank.motifs[0]);
        for m in &bank.motifs[1..] {
            assert_eq!(sorted_rows(m), first);
            assert_ne!(m, &bank.motifs[0]);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let (a, _) = make_shift_task::<f64>(&spec()).unwrap();
        let (b, _) = make_shift_task::<f64>(&spec()).unwrap();
        assert!(a.samples.iter().zip(&b.samples).all(|(x, y)| x.tokens == y.tokens && x.label == y.label));
    }

    #[test]
    fn degenerate_sizes_are_rejected() {
        let mut s = spec();
        s.classes = 1;
        assert!(make_shift_task::<f64>(&s).is_err());
        let mut s = spec();
        s.classes = 7;
        s.motif_len = 3;
        assert!(make_shift_task::<f64>(&s).is_err());
        let mut s = spec();
        s.motif_len = 20;
        assert!(make_shift_task::<f64>(&s).is_err());
        let mut s = spec();
        s.train_count = 0;
        assert!(make_shift_task::<f64>(&s).is_err());
    }
}
