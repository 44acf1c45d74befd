//! Self-consistency pipeline: generate a scene, generate QA from it, answer
//! every question with its own ground truth, and score the "predictions".
//! An internally consistent generator/codec/metric stack scores perfectly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::BevBox;
use crate::metrics::{bleu4, grounding_miou, GroundingSample};
use crate::qa::{generate_all, GenConfig, QaError, TaskCounts, TaskId};
use crate::scene::{generate_scene, RigPreset, SceneError, SceneSpec};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Qa(#[from] QaError),
    #[error("qa record {0} lacks ground-truth meta field {1}")]
    MissingMeta(String, &'static str),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineReport {
    pub n_records: usize,
    pub n_grounding: usize,
    pub grounding_miou: f64,
    pub bleu4: f64,
}

fn meta_f64(rec: &crate::qa::QARecord, key: &'static str) -> Result<f64, PipelineError> {
    rec.meta
        .get(key)
        .and_then(|v| v.as_f64())
        .ok_or_else(|| PipelineError::MissingMeta(rec.id.clone(), key))
}

/// Runs the oracle self-evaluation. Grounding uses the identify tasks
/// (SP-02/03/04); text similarity uses every record's answer against itself.
pub fn run_pipeline(seed: u64, per_task: usize) -> Result<PipelineReport, PipelineError> {
    let spec = SceneSpec {
        seed,
        n_frames: 8,
        n_agents: 14,
        n_lanes: 3,
        map_extent: 100.0,
        rig: RigPreset::SurroundSix,
        timestep: 0.5,
    };
    let scene = generate_scene(&spec)?;
    let cfg = GenConfig::with_seed(seed.wrapping_add(1), TaskCounts::uniform(per_task));
    let records = generate_all(&scene, &cfg)?;

    let mut grounding = Vec::new();
    for rec in &records {
        if !matches!(rec.task, TaskId::Sp02 | TaskId::Sp03 | TaskId::Sp04) {
            continue;
        }
        // The rounded ground truth recorded at generation time; the answer
        // text encodes exactly these values.
        let gt = BevBox {
            x: meta_f64(rec, "x")?,
            y: meta_f64(rec, "y")?,
            length: meta_f64(rec, "length")?,
            width: meta_f64(rec, "width")?,
            yaw: meta_f64(rec, "yaw_deg")?.to_radians(),
        };
        grounding.push(GroundingSample {
            predicted_text: rec.answer.clone(),
            gt,
            gt_distance: meta_f64(rec, "distance")?,
        });
    }
    let gr = grounding_miou(&grounding);

    let candidates: Vec<String> = records.iter().map(|r| r.answer.clone()).collect();
    let references: Vec<Vec<String>> = records.iter().map(|r| vec![r.answer.clone()]).collect();
    let b = bleu4(&candidates, &references);

    Ok(PipelineReport {
        n_records: records.len(),
        n_grounding: grounding.len(),
        grounding_miou: gr.miou,
        bleu4: b,
    })
}
