#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use samjam_core::geometry::{BBox, Mask, TemporalId};
use samjam_core::graph::{FrameRef, FrameSceneGraph, GraphsFile};
use samjam_core::pipeline::RunOutput;
use samjam_core::providers::{
    DetectorContext, MaskGenerator, MaskPropagator, ProviderError, Providers, SceneGraphDetector,
};

/// Object as (canonical id, label, bbox, mask runs).
pub type CanonObject = (u64, String, BBox, Option<Vec<u64>>);
pub type CanonFrame = (Vec<CanonObject>, Vec<(u64, String, u64)>);

/// Renames temporal ids by first appearance: frames in order, objects within
/// a frame by box. Boxes are distinct within a frame in every scenario this
/// is used on, so the renaming does not depend on the original ids.
pub fn canonical(file: &GraphsFile) -> Vec<CanonFrame> {
    let mut names: BTreeMap<TemporalId, u64> = BTreeMap::new();
    let mut out = Vec::new();
    for g in &file.frames {
        let mut objs: Vec<_> = g.objects.iter().collect();
        objs.sort_by_key(|o| o.bbox);
        for o in &objs {
            let next = names.len() as u64;
            names.entry(o.tid).or_insert(next);
        }
        let mut objects: Vec<CanonObject> = objs
            .iter()
            .map(|o| {
                (
                    names[&o.tid],
                    o.class_label.clone(),
                    o.bbox,
                    o.mask.as_ref().map(|m| m.runs().to_vec()),
                )
            })
            .collect();
        objects.sort();
        let mut rels: Vec<_> = g
            .relationships
            .iter()
            .map(|r| (names[&r.subject], r.predicate.clone(), names[&r.object]))
            .collect();
        rels.sort();
        out.push((objects, rels));
    }
    out
}

struct MemDetector(Arc<Vec<FrameSceneGraph>>);
struct MemGenerator(Arc<Vec<Vec<Mask>>>);
struct MemPropagator {
    frames: Arc<Vec<Vec<Mask>>>,
    tracked: Vec<TemporalId>,
}

impl SceneGraphDetector for MemDetector {
    fn generate(&self, frame: &FrameRef, _: &DetectorContext<'_>) -> Result<FrameSceneGraph, ProviderError> {
        Ok(self.0[frame.frame_index].clone())
    }
}

impl MaskGenerator for MemGenerator {
    fn generate_masks(&self, frame: &FrameRef) -> Result<Vec<Mask>, ProviderError> {
        Ok(self.0[frame.frame_index].clone())
    }
}

impl MaskPropagator for MemPropagator {
    fn add_masks(&mut self, _: usize, masks: &[Mask]) -> Result<(), ProviderError> {
        self.tracked.extend(masks.iter().filter_map(Mask::tid));
        Ok(())
    }

    fn propagate_to(&mut self, frame_index: usize) -> Result<Vec<Mask>, ProviderError> {
        Ok(self.frames[frame_index]
            .iter()
            .filter(|m| m.tid().is_some_and(|t| self.tracked.contains(&t)))
            .cloned()
            .collect())
    }
}

/// Provider outputs captured from a mask-grounded run, replayed from memory.
#[derive(Clone)]
pub struct Captured {
    detector: Arc<Vec<FrameSceneGraph>>,
    generated: Arc<Vec<Vec<Mask>>>,
    propagated: Arc<Vec<Vec<Mask>>>,
}

impl Captured {
    pub fn from_run(run: &RunOutput) -> Self {
        Captured {
            detector: Arc::new(run.frames.iter().map(|f| f.trace.detector_graph.clone()).collect()),
            generated: Arc::new(
                run.frames
                    .iter()
                    .map(|f| f.trace.generated.iter().map(|m| m.clone().with_tid(None)).collect())
                    .collect(),
            ),
            propagated: Arc::new(run.frames.iter().map(|f| f.trace.propagated.clone()).collect()),
        }
    }

    pub fn providers(&self) -> Providers {
        Providers {
            detector: Box::new(MemDetector(self.detector.clone())),
            generator: Box::new(MemGenerator(self.generated.clone())),
            propagator: Box::new(MemPropagator {
                frames: self.propagated.clone(),
                tracked: Vec::new(),
            }),
        }
    }
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

/// Compares `actual` with a checked-in file, rewriting it instead when
/// `UPDATE_GOLDEN` is set.
pub fn check_golden(name: &str, actual: &str) -> Result<(), String> {
    let path = golden_dir().join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(golden_dir()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return Ok(());
    }
    let expected = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == actual {
        Ok(())
    } else {
        Err(format!("{} differs from the current output", path.display()))
    }
}
