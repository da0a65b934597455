//! Progressive multi-reference inpainting with an append-only history.

use serde::Serialize;

use crate::depth::CompletionBackend;
use crate::error::{Error, Result};
use crate::mask::MaskImage;
use crate::render::render_with;
use crate::scene::GaussianScene;

use super::config::InpaintConfig;
use super::single::{inpaint_with_artifacts, render_options, InpaintReport, ReferenceView, StepArtifacts};

/// Masked pixels of `mask` whose rendered accumulated opacity is below the
/// validity threshold.
pub fn uncovered_mask(scene: &GaussianScene, reference: &ReferenceView, cfg: &InpaintConfig) -> MaskImage {
    let opts = render_options(cfg);
    let out = render_with(scene, &reference.pose, &opts);
    let mut m = reference.mask.clone();
    for (b, &a) in m.bits.iter_mut().zip(&out.alpha_acc) {
        *b = *b && a < opts.valid_alpha;
    }
    m
}

#[derive(Debug, Clone, Serialize)]
pub struct StepRecord {
    pub view: String,
    /// Index into the session history of the state this step started from.
    pub parent: usize,
    pub uncovered_before: usize,
    pub uncovered_after: usize,
    pub report: InpaintReport,
    #[serde(skip)]
    pub reduced_mask: MaskImage,
    #[serde(skip)]
    pub artifacts: StepArtifacts,
}

/// History of scene states: `states[0]` is the input, `states[k]` the result
/// of step `k`.
#[derive(Debug, Clone)]
pub struct InpaintSession {
    states: Vec<GaussianScene>,
    steps: Vec<StepRecord>,
}

impl InpaintSession {
    pub fn new(scene: GaussianScene) -> Self {
        Self {
            states: vec![scene],
            steps: Vec::new(),
        }
    }

    pub fn current(&self) -> &GaussianScene {
        self.states.last().expect("session always has an initial state")
    }

    pub fn states(&self) -> &[GaussianScene] {
        &self.states
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    /// Inpaints from one more reference view. The first step uses the mask
    /// as given; later steps shrink it to pixels the current scene leaves
    /// uncovered. An empty reduced mask makes the step a no-op. On error the
    /// session is left unchanged.
    pub fn step(
        &mut self,
        reference: &ReferenceView,
        cfg: &InpaintConfig,
        backend: &mut CompletionBackend,
    ) -> Result<&StepRecord> {
        reference.validate()?;
        let scene = self.current();
        let uncovered = uncovered_mask(scene, reference, cfg);
        let reduced = if self.steps.is_empty() {
            reference.mask.clone()
        } else {
            uncovered.clone()
        };
        let step_ref = ReferenceView {
            pose: reference.pose.clone(),
            mask: reduced.clone(),
            image: reference.image.clone(),
        };
        let (next, report, artifacts) =
            inpaint_with_artifacts(scene, &step_ref, cfg, backend, self.steps.len())?;
        let uncovered_after = uncovered_mask(&next, reference, cfg).count();
        self.steps.push(StepRecord {
            view: reference.pose.name.clone(),
            parent: self.states.len() - 1,
            uncovered_before: uncovered.count(),
            uncovered_after,
            report,
            reduced_mask: reduced,
            artifacts,
        });
        self.states.push(next);
        Ok(self.steps.last().expect("just pushed"))
    }

    /// Drops the most recent step; returns false when nothing is left to undo.
    pub fn undo(&mut self) -> bool {
        if self.steps.pop().is_some() {
            self.states.pop();
            true
        } else {
            false
        }
    }
}

/// Folds single-view inpainting over the references in order.
pub fn progressive_inpaint(
    scene: &GaussianScene,
    refs: &[ReferenceView],
    cfg: &InpaintConfig,
    backend: &mut CompletionBackend,
) -> Result<(GaussianScene, InpaintSession)> {
    if refs.is_empty() {
        return Err(Error::InvalidArgument("progressive inpainting needs at least one reference".into()));
    }
    let mut session = InpaintSession::new(scene.clone());
    for r in refs {
        session.step(r, cfg, backend)?;
    }
    Ok((session.current().clone(), session))
}
