//! Temporally consistent video scene graphs from per-frame detections and
//! tracked segmentation masks.
//!
//! The engine is model-agnostic: detector, mask generator and mask
//! propagator sit behind the traits in [`providers`], with recorded-file and
//! simulated implementations shipped here.

pub mod evaluation;
pub mod experiment;
pub mod geometry;
pub mod graph;
pub mod matching;
pub mod pipeline;
pub mod providers;
pub mod ratio;
pub mod simulator;

pub use evaluation::{clip_recall, evaluate, evaluate_clip, mean_recall, EvalConfig, EvalError, EvalReport};
pub use experiment::{bench, record, BenchReport, ExperimentError, Source};
pub use geometry::{bbox_iou, mask_area, mask_to_bbox, overlap_fraction, BBox, GeometryError, Mask, TemporalId};
pub use graph::{
    Clip, DetectedObject, FrameRef, FrameSceneGraph, GraphsFile, Relationship, TemporalObject,
    TemporalRelationship, TemporalSceneGraph, Triplet,
};
pub use matching::{match_objects, MatchPair, MatchResult};
pub use pipeline::{run, Method, Pipeline, PipelineConfig, PipelineError, RunOutput};
pub use providers::{
    ContextMode, DetectorContext, MaskGenerator, MaskPropagator, ProviderError, ProviderSelector, Providers,
    SceneGraphDetector,
};
pub use ratio::Ratio;
pub use simulator::{NoiseProfile, Scenario, SimWorld};
