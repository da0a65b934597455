use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::depth::{
    make_schedule, CompletionBackend, Denoiser, DiffusionBackend, HaarCodec, LatentCodec, LinearDenoiser,
    ProcessBackend, ZeroDenoiser,
};
use crate::error::{Error, Result};
use crate::pointcloud::MergeInit;
use crate::removal::DEFAULT_VOTE_THRESHOLD;

/// Run configuration, loadable from TOML. Missing keys take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InpaintConfig {
    /// Weight of D-SSIM against L1.
    pub lambda: f64,
    pub finetune_iters: usize,
    pub ddim_steps: usize,
    pub dilation_radius: usize,
    pub learning_rates: LearningRates,
    pub outliers: OutlierConfig,
    pub merge: MergeInit,
    pub backend: BackendConfig,
    /// Only the merged Gaussians are optimized during fine-tuning.
    pub freeze_original: bool,
    /// Divide rendered depth by accumulated opacity before completion.
    pub normalize_depth: bool,
    pub vote_threshold: f64,
    pub seed: u64,
}

impl Default for InpaintConfig {
    fn default() -> Self {
        Self {
            lambda: 0.2,
            finetune_iters: 150,
            ddim_steps: 50,
            dilation_radius: 9,
            learning_rates: LearningRates::default(),
            outliers: OutlierConfig::default(),
            merge: MergeInit::default(),
            backend: BackendConfig::default(),
            freeze_original: false,
            normalize_depth: true,
            vote_threshold: DEFAULT_VOTE_THRESHOLD,
            seed: 0,
        }
    }
}

impl InpaintConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            offset: e.span().map_or(0, |s| s.start),
            message: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidArgument(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        if self.finetune_iters < 1 {
            return Err(Error::InvalidArgument("finetune_iters must be at least 1".into()));
        }
        if self.ddim_steps < 1 || self.ddim_steps > self.backend.schedule_steps {
            return Err(Error::InvalidArgument(format!(
                "ddim_steps {} must lie in 1..={}",
                self.ddim_steps, self.backend.schedule_steps
            )));
        }
        if self.outliers.min_neighbors < 1 {
            return Err(Error::InvalidArgument("min_neighbors must be at least 1".into()));
        }
        let lr = &self.learning_rates;
        let rates = [lr.position, lr.sh, lr.opacity, lr.scale, lr.rotation];
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::InvalidArgument("learning rates must be finite and non-negative".into()));
        }
        if !(lr.position_final_ratio > 0.0 && lr.position_final_ratio.is_finite()) {
            return Err(Error::InvalidArgument("position_final_ratio must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.vote_threshold) {
            return Err(Error::InvalidArgument("vote_threshold outside [0, 1]".into()));
        }
        Ok(())
    }
}

/// Adam step sizes per parameter class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningRates {
    /// Multiplied by the scene extent.
    pub position: f64,
    /// Position rate at the last iteration relative to the first; decays log-linearly.
    pub position_final_ratio: f64,
    /// Degree-0 SH; higher degrees use a twentieth of it.
    pub sh: f64,
    pub opacity: f64,
    pub scale: f64,
    pub rotation: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            position: 1.6e-4,
            position_final_ratio: 0.01,
            sh: 2.5e-3,
            opacity: 1.5e-2,
            scale: 5e-3,
            rotation: 1e-3,
        }
    }
}

/// Outlier removal around the merged cloud. Unset distances default to
/// twice the median nearest-neighbor spacing of the new cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutlierConfig {
    pub enabled: bool,
    pub dist_threshold: Option<f64>,
    pub radius: Option<f64>,
    pub min_neighbors: usize,
    pub spacing_multiple: f64,
}

impl Default for OutlierConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            dist_threshold: None,
            radius: None,
            min_neighbors: 8,
            spacing_multiple: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Harmonic,
    Diffusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodecKind {
    Haar,
    Process,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenoiserKind {
    Zero,
    Linear,
    Process,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub codec: CodecKind,
    pub denoiser: DenoiserKind,
    /// Program and arguments for the process backend.
    pub command: Vec<String>,
    /// Spatial reduction of the process codec.
    pub downsample_factor: usize,
    /// JSON weights for the linear denoiser.
    pub linear_weights: Option<PathBuf>,
    pub schedule_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Harmonic,
            codec: CodecKind::Haar,
            denoiser: DenoiserKind::Zero,
            command: Vec::new(),
            downsample_factor: 8,
            linear_weights: None,
            schedule_steps: crate::depth::schedule::DEFAULT_STEPS,
            beta_start: crate::depth::schedule::DEFAULT_BETA_START,
            beta_end: crate::depth::schedule::DEFAULT_BETA_END,
        }
    }
}

impl InpaintConfig {
    /// Instantiates the completion backend described by `backend`.
    pub fn build_backend(&self) -> Result<CompletionBackend> {
        let b = &self.backend;
        if b.kind == BackendKind::Harmonic {
            return Ok(CompletionBackend::Harmonic);
        }
        let schedule = make_schedule(b.schedule_steps, b.beta_start, b.beta_end)?;
        let process = || -> Result<ProcessBackend> {
            let (program, args) = b
                .command
                .split_first()
                .ok_or_else(|| Error::InvalidArgument("process backend needs `command`".into()))?;
            ProcessBackend::spawn(program, args, b.downsample_factor)
        };
        let shared = if b.codec == CodecKind::Process || b.denoiser == DenoiserKind::Process {
            Some(process()?)
        } else {
            None
        };
        let codec: Box<dyn LatentCodec + Send> = match b.codec {
            CodecKind::Haar => Box::new(HaarCodec),
            CodecKind::Process => Box::new(shared.clone().expect("spawned above")),
        };
        let denoiser: Box<dyn Denoiser + Send> = match b.denoiser {
            DenoiserKind::Zero => Box::new(ZeroDenoiser),
            DenoiserKind::Process => Box::new(shared.expect("spawned above")),
            DenoiserKind::Linear => {
                let path = b
                    .linear_weights
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArgument("linear denoiser needs `linear_weights`".into()))?;
                let model: LinearDenoiser = serde_json::from_str(&std::fs::read_to_string(path)?)
                    .map_err(|e| Error::Schema(format!("linear weights: {e}")))?;
                if model.alpha_bar.len() != schedule.steps() {
                    return Err(Error::Schema("linear weights were trained on another schedule".into()));
                }
                Box::new(model)
            }
        };
        Ok(CompletionBackend::Diffusion(DiffusionBackend {
            codec,
            denoiser,
            schedule,
            steps: self.ddim_steps,
            seed: self.seed,
        }))
    }
}
