use ccs_cli::bench::{
    fit_exponent, run_bench, summarize, write_csv, BenchBackend, BenchOptions, BenchRecord, CSV_HEADER,
};

fn record(backend: BenchBackend, n: usize, median_ns: u128, checksum: f64) -> BenchRecord {
    BenchRecord {
        backend,
        n,
        c: 8,
        batch: 1,
        reps: 5,
        median_ns,
        checksum,
    }
}

#[test]
fn exponent_fit_recovers_power_laws() {
    let quadratic: Vec<_> = [100usize, 200, 400, 800].iter().map(|&n| (n, (n * n) as u128)).collect();
    assert!((fit_exponent(&quadratic).unwrap() - 2.0).abs() < 1e-9);
    let linear: Vec<_> = [10usize, 1000].iter().map(|&n| (n, 7 * n as u128)).collect();
    assert!((fit_exponent(&linear).unwrap() - 1.0).abs() < 1e-9);
    assert!(fit_exponent(&[(5, 10)]).is_none());
}

#[test]
fn summary_reports_crossover_and_checksum_agreement() {
    let records = vec![
        record(BenchBackend::Direct, 100, 1_000, 1.5),
        record(BenchBackend::Fft, 100, 2_000, 1.5),
        record(BenchBackend::Direct, 200, 4_000, 2.5),
        record(BenchBackend::Fft, 200, 3_000, 2.5),
    ];
    let s = summarize(&records);
    assert_eq!(s.crossover, Some(200));
    assert_eq!(s.no_fft_advantage_at_smallest, Some(true));
    assert!(s.checksum_mismatches.is_empty());
    assert!((s.direct_exponent.unwrap() - 2.0).abs() < 1e-9);

    let mut skewed = records;
    skewed[3].checksum = 2.6;
    assert_eq!(summarize(&skewed).checksum_mismatches, vec![200]);
}

#[test]
fn small_run_produces_one_row_per_backend_and_length() {
    let opts = BenchOptions {
        n_list: vec![7, 16],
        channels: 4,
        batch: 2,
        groups: 2,
        backends: vec![BenchBackend::Direct, BenchBackend::Fft, BenchBackend::DenseSimplified],
        reps: 5,
        warmup: 2,
        include_plan: false,
        seed: 1,
    };
    let records = run_bench(&opts).unwrap();
    assert_eq!(records.len(), 6);
    for n in [7, 16] {
        let sum = |b| records.iter().find(|r| r.backend == b && r.n == n).unwrap().checksum;
        assert_eq!(
            format!("{:.6e}", sum(BenchBackend::Direct)),
            format!("{:.6e}", sum(BenchBackend::Fft))
        );
    }
    let mut csv = Vec::new();
    write_csv(&mut csv, &records).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with('#'));
    assert_eq!(lines[1], CSV_HEADER);
    assert_eq!(lines.len(), 8);
    assert!(lines[2..].iter().all(|l| l.split(',').count() == 7));
}

#[test]
fn options_below_the_measurement_floor_are_rejected() {
    let base = BenchOptions {
        n_list: vec![8],
        channels: 8,
        ..BenchOptions::default()
    };
    for bad in [
        BenchOptions { reps: 4, ..base.clone() },
        BenchOptions { warmup: 1, ..base.clone() },
        BenchOptions { n_list: vec![], ..base.clone() },
        BenchOptions { groups: 3, ..base.clone() },
    ] {
        assert!(run_bench(&bad).is_err());
    }
}
