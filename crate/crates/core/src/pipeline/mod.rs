//! End-to-end inpainting: configuration, single-view and progressive runs,
//! fine-tuning and evaluation.

mod config;
mod evaluate;
mod finetune;
mod session;
mod single;

pub use config::{
    BackendConfig, BackendKind, CodecKind, DenoiserKind, InpaintConfig, LearningRates, OutlierConfig,
};
pub use evaluate::{evaluate_views, EvalTable, HeldOutView, ViewMetrics};
pub use finetune::{finetune, FinetuneOptions, FinetuneResult, ADAM_BETAS};
pub use session::{progressive_inpaint, uncovered_mask, InpaintSession, StepRecord};
pub use single::{inpaint_single_view, render_options, InpaintReport, ReferenceView, StageTiming, StepArtifacts};
