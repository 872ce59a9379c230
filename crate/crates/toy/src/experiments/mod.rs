//! Cramming, curve fitting and copying experiments.

pub mod copy;
pub mod cram;
pub mod fit;
pub mod optim;
pub mod presets;

pub use copy::{copy_eval, copy_finetune, CopyConfig, CopyEval, CopyLog};
pub use cram::{accessibility_grid, cram_one, AccessibilityGrid, CramConfig, CramOptimizer, CramOutcome, TargetSource};
pub use fit::{sigmoid_fit, slope_fit, LineFit, SigmoidFit};
pub use optim::{AdamConfig, AdamW};
pub use presets::{cram_study, CramStudy};
pub use cram::make_target;
