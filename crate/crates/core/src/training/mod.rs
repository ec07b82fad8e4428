//! Reverse-mode gradients, gradient verification, AdamW, the synthetic shift
//! task and the training loop.

mod adamw;
pub mod backprop;
mod data;
pub mod gradcheck;
mod train;

pub use adamw::{adamw_step, OptimizerState};
pub use backprop::{backward, backward_patches, cross_entropy, forward_cached, loss_patches, ParamGrads};
pub use data::{circular_shift, make_shift_task, motif_bank, MotifBank, Sample, ShiftPolicy, ShiftTaskSpec, SynthDataset};
pub use train::{evaluate, learning_rate, shift_task_model, train, EpochMetrics, TrainOptions, TrainReport};
