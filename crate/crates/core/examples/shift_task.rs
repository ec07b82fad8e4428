//! Trains the CCS and dense-simplified backbones on the circular-shift task
//! (train unshifted, test shifted) and prints their per-epoch metrics.
//!
//! Usage: shift_task [seed] [epochs] [lr]

use std::time::Instant;

use ccs_core::model::TokenMixerKind;
use ccs_core::training::{make_shift_task, shift_task_model, train, ShiftTaskSpec, TrainOptions};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(30);
    let lr: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let spec = ShiftTaskSpec {
        seed,
        ..ShiftTaskSpec::default()
    };
    let (train_set, test_set) = make_shift_task::<f64>(&spec).expect("task");
    for mixer in [TokenMixerKind::Ccs, TokenMixerKind::Simplified] {
        let config = shift_task_model(&spec, mixer).expect("config");
        let opts = TrainOptions {
            epochs,
            lr,
            seed,
            ..TrainOptions::default()
        };
        let start = Instant::now();
        let report = train(&config, &train_set, &test_set, &opts).expect("train");
        for m in &report.history {
            println!("{mixer} epoch {:>3} loss {:.4} test_acc {:.3}", m.epoch, m.train_loss, m.test_acc);
        }
        println!("{mixer}: {:.1}s", start.elapsed().as_secs_f64());
    }
}
