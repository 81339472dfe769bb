//! End-to-end experiment orchestration: synthetic categories, per-variant
//! training, both evaluation procedures, persistence and reports.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod eval;
pub mod report;
pub mod sweep;

pub use config::{PromptSource, RunConfig};
pub use data::{synth_dataset, CategoryData, CategorySpec, CATEGORIES};
pub use eval::{run_augmentation_eval, run_full_eval, run_robustness_eval};
pub use report::{emit_report, EvalReport};
