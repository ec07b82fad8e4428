//! Direct vs FFT circulant mixing timings.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use ccs_core::circulant::{
    ccs_mix_into, ccs_mix_planned_into, materialize_circulant, Backend, CcsWeights, MixWorkspace, SpectralPlan,
};
use ccs_core::numerics::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CSV_VERSION_LINE: &str = "# ccsmix bench v1";
pub const CSV_HEADER: &str = "backend,N,C,batch,reps,median_ns,checksum";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchBackend {
    Direct,
    Fft,
    /// A dense `N x N` token matrix, the cost the circulant replaces.
    DenseSimplified,
}

impl BenchBackend {
    pub fn name(self) -> &'static str {
        match self {
            BenchBackend::Direct => "direct",
            BenchBackend::Fft => "fft",
            BenchBackend::DenseSimplified => "dense-simplified",
        }
    }
}

impl fmt::Display for BenchBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchBackend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "direct" => Ok(BenchBackend::Direct),
            "fft" => Ok(BenchBackend::Fft),
            "dense-simplified" => Ok(BenchBackend::DenseSimplified),
            other => Err(format!("unknown backend '{other}' (direct, fft, dense-simplified)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub n_list: Vec<usize>,
    pub channels: usize,
    pub batch: usize,
    pub groups: usize,
    pub backends: Vec<BenchBackend>,
    pub reps: usize,
    pub warmup: usize,
    /// Time FFT table construction as part of every product.
    pub include_plan: bool,
    pub seed: u64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            n_list: vec![196, 392, 784, 1568],
            channels: 64,
            batch: 1,
            groups: 8,
            backends: vec![BenchBackend::Direct, BenchBackend::Fft],
            reps: 7,
            warmup: 2,
            include_plan: true,
            seed: 0,
        }
    }
}

pub const MIN_REPS: usize = 5;
pub const MIN_WARMUP: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub backend: BenchBackend,
    pub n: usize,
    pub c: usize,
    pub batch: usize,
    pub reps: usize,
    pub median_ns: u128,
    pub checksum: f64,
}

impl BenchRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.6e}",
            self.backend, self.n, self.c, self.batch, self.reps, self.median_ns, self.checksum
        )
    }
}

/// Position-weighted sum, so permuted outputs do not collide.
fn checksum(t: &Tensor<f64>) -> f64 {
    t.data().iter().enumerate().map(|(k, v)| v * (1 + k % 7) as f64).sum()
}

fn median(samples: &mut [u128]) -> u128 {
    samples.sort_unstable();
    let m = samples.len() / 2;
    if samples.len() % 2 == 1 {
        samples[m]
    } else {
        (samples[m - 1] + samples[m]) / 2
    }
}

pub fn validate(opts: &BenchOptions) -> Result<(), String> {
    if opts.n_list.is_empty() || opts.n_list.contains(&0) {
        return Err("N list must be non-empty and positive".into());
    }
    if opts.backends.is_empty() {
        return Err("no backends selected".into());
    }
    if opts.channels == 0 || opts.batch == 0 {
        return Err("channels and batch must be positive".into());
    }
    if opts.groups == 0 || opts.channels % opts.groups != 0 {
        return Err(format!("{} groups do not divide {} channels", opts.groups, opts.channels));
    }
    if opts.reps < MIN_REPS || opts.warmup < MIN_WARMUP {
        return Err(format!("need at least {MIN_REPS} timed and {MIN_WARMUP} warmup runs"));
    }
    Ok(())
}

/// Inputs, outputs and tables for one token count, allocated before timing.
struct Case {
    n: usize,
    x: Tensor<f64>,
    w: CcsWeights<f64>,
    out: Tensor<f64>,
    ws: MixWorkspace<f64>,
    plan: Option<SpectralPlan<f64>>,
    dense: Option<(Tensor<f64>, Vec<Tensor<f64>>)>,
}

impl Case {
    fn new(n: usize, opts: &BenchOptions, rng: &mut ChaCha8Rng) -> Result<Self, String> {
        let shape = [opts.batch, n, opts.channels];
        let x = Tensor::from_fn(&shape, |_| rng.gen_range(-1.0..1.0));
        let w = CcsWeights::new(Tensor::from_fn(&[opts.groups, n], |_| rng.gen_range(-1.0..1.0)))
            .map_err(|e| e.to_string())?;
        let plan = if opts.include_plan {
            None
        } else {
            Some(SpectralPlan::new(&w).map_err(|e| e.to_string())?)
        };
        let dense = opts.backends.contains(&BenchBackend::DenseSimplified).then(|| {
            let size = n * opts.channels;
            let slices = x
                .data()
                .chunks(size)
                .map(|c| Tensor::matrix(n, opts.channels, c.to_vec()).expect("slice"))
                .collect();
            (materialize_circulant(w.row(0)), slices)
        });
        Ok(Self {
            n,
            out: Tensor::zeros(&shape),
            ws: MixWorkspace::new(n),
            x,
            w,
            plan,
            dense,
        })
    }

    fn run(&mut self, backend: BenchBackend) {
        match backend {
            BenchBackend::Direct => ccs_mix_into(&self.x, &self.w, Backend::Direct, &mut self.out, &mut self.ws),
            BenchBackend::Fft => match &self.plan {
                None => ccs_mix_into(&self.x, &self.w, Backend::Fft, &mut self.out, &mut self.ws),
                Some(plan) => ccs_mix_planned_into(&self.x, plan, &mut self.out, &mut self.ws),
            },
            BenchBackend::DenseSimplified => {
                let (dense, slices) = self.dense.as_ref().expect("built when selected");
                let size = slices[0].len();
                slices
                    .iter()
                    .zip(self.out.data_mut().chunks_mut(size))
                    .try_for_each(|(u, o)| dense.matmul_tn_into(u, o))
            }
        }
        .expect("buffers sized at construction");
    }

    fn time(&mut self, backend: BenchBackend) -> u128 {
        let start = Instant::now();
        self.run(backend);
        start.elapsed().as_nanos()
    }
}

/// One record per `(backend, N)`.
///
/// Measurements run one at a time on the calling thread. Repetitions are
/// interleaved round-robin over all records, so a transient slowdown of the
/// host spreads over every record instead of skewing one.
pub fn run_bench(opts: &BenchOptions) -> Result<Vec<BenchRecord>, String> {
    validate(opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut cases = opts
        .n_list
        .iter()
        .map(|&n| Case::new(n, opts, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    let mut samples = vec![vec![Vec::with_capacity(opts.reps); opts.backends.len()]; cases.len()];
    for case in &mut cases {
        for &backend in &opts.backends {
            for _ in 0..opts.warmup {
                case.run(backend);
            }
        }
    }
    for _ in 0..opts.reps {
        for (case, per_backend) in cases.iter_mut().zip(&mut samples) {
            for (&backend, s) in opts.backends.iter().zip(per_backend.iter_mut()) {
                s.push(case.time(backend));
            }
        }
    }
    let mut records = Vec::new();
    for (case, per_backend) in cases.iter_mut().zip(&mut samples) {
        for (&backend, s) in opts.backends.iter().zip(per_backend.iter_mut()) {
            // The output buffer is shared, so recompute it for this backend's checksum.
            case.run(backend);
            records.push(BenchRecord {
                backend,
                n: case.n,
                c: opts.channels,
                batch: opts.batch,
                reps: opts.reps,
                median_ns: median(s),
                checksum: checksum(&case.out),
            });
        }
    }
    Ok(records)
}

pub fn write_csv(mut w: impl Write, records: &[BenchRecord]) -> std::io::Result<()> {
    writeln!(w, "{CSV_VERSION_LINE}")?;
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Least-squares slope of `ln t` against `ln N`.
pub fn fit_exponent(points: &[(usize, u128)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let xy: Vec<(f64, f64)> = points
        .iter()
        .map(|&(n, t)| ((n as f64).ln(), (t.max(1) as f64).ln()))
        .collect();
    let k = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / k;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn series(records: &[BenchRecord], backend: BenchBackend) -> Vec<(usize, u128)> {
    records
        .iter()
        .filter(|r| r.backend == backend)
        .map(|r| (r.n, r.median_ns))
        .collect()
}

fn time_at(records: &[BenchRecord], backend: BenchBackend, n: usize) -> Option<u128> {
    records.iter().find(|r| r.backend == backend && r.n == n).map(|r| r.median_ns)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSummary {
    pub direct_exponent: Option<f64>,
    pub fft_exponent: Option<f64>,
    /// Smallest measured N where FFT beats direct.
    pub crossover: Option<usize>,
    /// `Some(true)` when FFT is no faster than direct at the smallest measured N.
    pub no_fft_advantage_at_smallest: Option<bool>,
    /// Checksum disagreements between direct and FFT rows of one N.
    pub checksum_mismatches: Vec<usize>,
}

pub fn summarize(records: &[BenchRecord]) -> BenchSummary {
    let mut ns: Vec<usize> = records.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let crossover = ns.iter().copied().find(|&n| {
        matches!(
            (time_at(records, BenchBackend::Fft, n), time_at(records, BenchBackend::Direct, n)),
            (Some(f), Some(d)) if f < d
        )
    });
    let no_fft_advantage_at_smallest = ns.first().and_then(|&n| {
        Some(time_at(records, BenchBackend::Fft, n)? >= time_at(records, BenchBackend::Direct, n)?)
    });
    let checksum_mismatches = ns
        .iter()
        .copied()
        .filter(|&n| {
            let sum = |b| {
                records
                    .iter()
                    .find(|r| r.backend == b && r.n == n)
                    .map(|r| format!("{:.6e}", r.checksum))
            };
            matches!((sum(BenchBackend::Direct), sum(BenchBackend::Fft)), (Some(a), Some(b)) if a != b)
        })
        .collect();
    BenchSummary {
        direct_exponent: fit_exponent(&series(records, BenchBackend::Direct)),
        fft_exponent: fit_exponent(&series(records, BenchBackend::Fft)),
        crossover,
        no_fft_advantage_at_smallest,
        checksum_mismatches,
    }
}

/// Median-time ratio of `backend` between two lengths.
pub fn ratio(records: &[BenchRecord], backend: BenchBackend, small: usize, large: usize) -> Option<f64> {
    Some(time_at(records, backend, large)? as f64 / time_at(records, backend, small)?.max(1) as f64)
}

impl fmt::Display for BenchSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let exp = |e: Option<f64>| e.map_or("n/a".to_string(), |v| format!("{v:.2}"));
        writeln!(f, "fitted exponent direct: {}", exp(self.direct_exponent))?;
        writeln!(f, "fitted exponent fft:    {}", exp(self.fft_exponent))?;
        match self.crossover {
            Some(n) => writeln!(f, "crossover: fft faster from N = {n}")?,
            None => writeln!(f, "crossover: fft not faster at any measured N")?,
        }
        match self.no_fft_advantage_at_smallest {
            Some(true) => writeln!(f, "smallest N: fft shows no advantage over direct")?,
            Some(false) => writeln!(f, "smallest N: fft already faster than direct")?,
            None => {}
        }
        if self.checksum_mismatches.is_empty() {
            write!(f, "checksums: direct and fft agree")
        } else {
            write!(f, "checksums: disagree at N = {:?}", self.checksum_mismatches)
        }
    }
}
