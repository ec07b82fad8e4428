//! Acceptance criteria, one line each. Runs as a plain binary so the report is
//! printed under `cargo test`; exits non-zero if any criterion fails.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use ccs_cli::bench::{self, BenchBackend, BenchOptions};
use ccs_cli::verify;
use ccs_core::model::{token_mixing_params, MixerConfig};
use ccs_core::numerics::{dft_naive, fft, ifft, ComplexBuffer};
use ccs_core::training::gradcheck::{ADJOINT_TOLERANCE, FD_TOLERANCE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn total_from_cli(args: &[&str]) -> Option<usize> {
    let out = Command::new(env!("CARGO_BIN_EXE_ccsmix")).arg("params").args(args).output().ok()?;
    if !out.status.success() {
        return None;
    }
    let text = String::from_utf8(out.stdout).ok()?;
    let line = text.lines().find(|l| l.trim_start().starts_with("total"))?;
    line.split_whitespace().last()?.replace(',', "").parse().ok()
}

fn parameter_tables() -> Outcome {
    let cases: [(&str, &[&str], f64); 8] = [
        ("mixer-b16-ccs", &["--preset", "mixer-b16-ccs"], 57e6),
        ("resmlp-36-ccs", &["--preset", "resmlp-36-ccs"], 43e6),
        ("mixer-b16", &["--preset", "mixer-b16"], 59e6),
        ("resmlp-36", &["--preset", "resmlp-36"], 44e6),
        ("G=1", &["--preset", "resmlp-36-ccs", "--groups", "1"], 43e6),
        ("G=4", &["--preset", "resmlp-36-ccs", "--groups", "4"], 43e6),
        ("G=8", &["--preset", "resmlp-36-ccs", "--groups", "8"], 43e6),
        ("G=384", &["--preset", "resmlp-36-ccs", "--groups", "384"], 46e6),
    ];
    let mut passed = true;
    let mut parts = Vec::new();
    for (label, args, reference) in cases {
        match total_from_cli(args) {
            Some(total) => {
                let dev = (total as f64 - reference) / reference;
                passed &= dev.abs() <= 0.02;
                parts.push(format!("{label} {:.2}M ({:+.1}%)", total as f64 / 1e6, dev * 100.0));
            }
            None => {
                passed = false;
                parts.push(format!("{label} unavailable"));
            }
        }
    }
    outcome(passed, parts.join(", "))
}

fn token_mixing_counts() -> Outcome {
    let dense = token_mixing_params(&MixerConfig::resmlp36());
    let ccs = token_mixing_params(&MixerConfig::resmlp36_ccs());
    outcome(
        dense == 38416 && ccs == 1568,
        format!("simplified {dense} (want 38416), ccs {ccs} (want 1568)"),
    )
}

fn fft_correctness() -> Outcome {
    let mut lengths: Vec<usize> = (1..=64).collect();
    lengths.extend([100, 196, 256]);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut oracle, mut round_trip) = (0.0f64, 0.0f64);
    for &n in &lengths {
        for _ in 0..3 {
            let re = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let im = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = ComplexBuffer::new(re, im).expect("equal lengths");
            let spectrum = fft(&x).expect("non-empty");
            oracle = oracle.max(spectrum.max_abs_diff(&dft_naive(&x).expect("non-empty")));
            round_trip = round_trip.max(ifft(&spectrum).expect("non-empty").max_abs_diff(&x));
        }
    }
    outcome(
        oracle <= 1e-10 && round_trip <= 1e-12,
        format!(
            "{} lengths: max |fft - dft| {oracle:.2e} (<= 1e-10), round trip {round_trip:.2e} (<= 1e-12)",
            lengths.len()
        ),
    )
}

fn backend_equivalence() -> Outcome {
    let trials = 120;
    let err = verify::backend_equivalence(&[4, 7, 49, 196], &[1, 8, 32], trials, 4);
    outcome(
        err <= 1e-9,
        format!("{trials} trials over N {{4,7,49,196}} x C {{1,8,32}}: relative error {err:.2e} (<= 1e-9)"),
    )
}

fn shift_equivariance() -> Outcome {
    let err = verify::shift_equivariance(5);
    let violation = verify::dense_shift_violation(5);
    outcome(
        err <= 1e-10 && violation >= 1e-3,
        format!("ccs_mix error {err:.2e} (<= 1e-10), dense mixer violation {violation:.2e} (>= 1e-3)"),
    )
}

fn gradient_suite() -> Outcome {
    let mut fd = 0.0f64;
    let mut adjoint = 0.0f64;
    for seed in [6, 7] {
        match verify::gradient_checks(seed) {
            Ok((f, a)) => {
                fd = fd.max(f);
                adjoint = adjoint.max(a);
            }
            Err(e) => return outcome(false, format!("gradient suite error: {e}")),
        }
    }
    outcome(
        fd <= FD_TOLERANCE && adjoint <= ADJOINT_TOLERANCE,
        format!("finite differences {fd:.2e} (<= {FD_TOLERANCE:.0e}), adjoint {adjoint:.2e} (<= {ADJOINT_TOLERANCE:.0e})"),
    )
}

fn complexity() -> Outcome {
    let opts = BenchOptions {
        n_list: vec![196, 392, 784, 1568],
        reps: 9,
        ..BenchOptions::default()
    };
    let records = match bench::run_bench(&opts) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("bench error: {e}")),
    };
    let s = bench::summarize(&records);
    let direct = s.direct_exponent.unwrap_or(f64::NAN);
    let spectral = s.fft_exponent.unwrap_or(f64::NAN);
    let direct_ratio = bench::ratio(&records, BenchBackend::Direct, 196, 1568).unwrap_or(f64::NAN);
    let fft_ratio = bench::ratio(&records, BenchBackend::Fft, 196, 1568).unwrap_or(f64::NAN);
    let passed = (direct - 2.0).abs() <= 0.3
        && spectral <= 1.5
        && (32.0..=128.0).contains(&direct_ratio)
        && fft_ratio <= 16.0
        && s.checksum_mismatches.is_empty();
    let crossover = s.crossover.map_or("none measured".to_string(), |n| format!("N={n}"));
    let at_196 = match s.no_fft_advantage_at_smallest {
        Some(true) => "holds on this host (fft not faster at N=196)",
        Some(false) => "does not hold on this host (fft already faster at N=196)",
        None => "not measured",
    };
    outcome(
        passed,
        format!(
            "exponent direct {direct:.2} (2.0 +- 0.3), fft {spectral:.2} (<= 1.5); \
             1568/196 time ratio direct {direct_ratio:.1} ([32,128]), fft {fft_ratio:.1} (<= 16); \
             crossover {crossover}; no-advantage-at-196 prediction {at_196}"
        ),
    )
}

fn shift_task_training() -> Outcome {
    let mut wins = 0;
    let mut parts = Vec::new();
    for seed in 0..3 {
        match verify::shift_task_accuracies(seed) {
            Ok((ccs, simplified)) => {
                let win = ccs >= 0.9 && ccs > simplified;
                wins += usize::from(win);
                parts.push(format!("seed {seed}: ccs {ccs:.3} vs simplified {simplified:.3}"));
            }
            Err(e) => parts.push(format!("seed {seed}: error {e}")),
        }
    }
    outcome(wins >= 2, format!("{wins}/3 seeds with ccs >= 0.90 and above simplified; {}", parts.join("; ")))
}

fn main() -> ExitCode {
    type Criterion = (u32, &'static str, Duration, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        (1, "parameter tables", Duration::from_secs(5), parameter_tables),
        (2, "token-mixing parameter counts", Duration::from_secs(1), token_mixing_counts),
        (3, "fft correctness", Duration::from_secs(10), fft_correctness),
        (4, "backend equivalence", Duration::from_secs(30), backend_equivalence),
        (5, "shift equivariance", Duration::from_secs(30), shift_equivariance),
        (6, "gradient suite", Duration::from_secs(120), gradient_suite),
        (7, "complexity measurement", Duration::from_secs(300), complexity),
        (8, "shift-task training", Duration::from_secs(600), shift_task_training),
    ];
    let mut failures = 0;
    for (id, name, limit, run) in criteria {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let passed = result.passed && elapsed <= limit;
        failures += usize::from(!passed);
        println!(
            "criterion {id} [{name}]: {} ({:.2}s, limit {}s) {}",
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs(),
            result.detail
        );
    }
    println!(
        "criterion 9 [ImageNet-1K accuracy]: EXCLUDED top-1/top-5 numbers need full ImageNet training \
         and are not reproduced; accuracy behaviour is covered by criteria 5 and 8"
    );
    if failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria failed");
        ExitCode::FAILURE
    }
}
