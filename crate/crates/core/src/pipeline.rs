//! Per-frame orchestration.
//!
//! Every frame goes through five stages:
//!
//! 1. propagate previously matched masks to the frame (`P`),
//! 2. generate fresh masks and drop the ones mostly covered by `P`,
//! 3. ask the detector for a frame-level scene graph,
//! 4. match detected objects to masks,
//! 5. synthesize the temporal scene graph keyed by mask temporal ids.
//!
//! The first frame skips stage 1 and the filter in stage 2. After each frame
//! the matched masks whose tids were never tracked are handed to the
//! propagator, so a tid is added at most once per run.
//!
//! Baseline methods bypass stages 1, 2, 4 and 5 and emit the detector graph
//! verbatim, using detector-local ids as temporal ids.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use log::debug;
use serde::Serialize;
use thiserror::Error;

use crate::geometry::{mask_union, overlap_fraction, GeometryError, Mask, TemporalId};
use crate::graph::{
    Clip, FrameRef, FrameSceneGraph, GraphsFile, TemporalObject, TemporalRelationship,
    TemporalSceneGraph, Triplet,
};
use crate::matching::{match_objects, MatchResult, DEFAULT_IOU_THRESHOLD};
use crate::providers::{
    generate_tracked_masks, ContextMode, DetectorContext, ProviderError, Providers, TidAllocator,
};
use crate::ratio::Ratio;

pub const DEFAULT_OVERLAP_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("frame {frame}: {source}")]
    Provider {
        frame: usize,
        #[source]
        source: ProviderError,
    },
    #[error("frame {frame}: {source}")]
    Geometry {
        frame: usize,
        #[source]
        source: GeometryError,
    },
    #[error("frame {got} is out of order (last processed: {last:?})")]
    OutOfOrderFrame { got: usize, last: Option<usize> },
    #[error("clip has no frames")]
    EmptyClip,
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Which system produces the per-frame graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Full mask-grounded pipeline.
    Samjam,
    /// Detector alone, given the stated context.
    Baseline(ContextMode),
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Baseline(ContextMode::CurrentFrame),
        Method::Baseline(ContextMode::LastGraph),
        Method::Baseline(ContextMode::AllGraphs),
        Method::Samjam,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Samjam => "samjam",
            Method::Baseline(mode) => mode.name(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineConfig {
    pub method: Method,
    pub iou_threshold: Ratio,
    pub overlap_threshold: Ratio,
    /// Context given to the detector in `Samjam` mode.
    pub detector_context: ContextMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            method: Method::Samjam,
            iou_threshold: Ratio::from_decimal(DEFAULT_IOU_THRESHOLD).unwrap(),
            overlap_threshold: Ratio::from_decimal(DEFAULT_OVERLAP_THRESHOLD).unwrap(),
            detector_context: ContextMode::CurrentFrame,
        }
    }
}

impl PipelineConfig {
    pub fn with_method(method: Method) -> Self {
        PipelineConfig {
            method,
            ..Default::default()
        }
    }

    /// Builds a config from decimal thresholds, which must lie in `(0, 1)`.
    pub fn from_decimals(method: Method, iou: f64, overlap: f64) -> Result<Self, PipelineError> {
        let check = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(Ratio::from_decimal(v).unwrap())
            } else {
                Err(PipelineError::Config(format!("{name} must be in (0, 1), got {v}")))
            }
        };
        Ok(PipelineConfig {
            method,
            iou_threshold: check("iou threshold", iou)?,
            overlap_threshold: check("overlap threshold", overlap)?,
            detector_context: ContextMode::CurrentFrame,
        })
    }

    fn detector_mode(&self) -> ContextMode {
        match self.method {
            Method::Samjam => self.detector_context,
            Method::Baseline(mode) => mode,
        }
    }
}

/// Tracking bookkeeping carried across frames.
#[derive(Debug, Clone, Default)]
pub struct PipelineState {
    tids: TidAllocator,
    tracked_tids: BTreeSet<TemporalId>,
    matched_history: Vec<Vec<Mask>>,
    last_frame: Option<usize>,
}

impl PipelineState {
    pub fn tids_issued(&self) -> u64 {
        self.tids.issued()
    }

    pub fn tracked_tids(&self) -> &BTreeSet<TemporalId> {
        &self.tracked_tids
    }

    /// Matched masks of each processed frame, in processing order.
    pub fn matched_history(&self) -> &[Vec<Mask>] {
        &self.matched_history
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StageTimings {
    pub propagate: Duration,
    pub generate_filter: Duration,
    pub detect: Duration,
    pub matching: Duration,
    pub synthesize: Duration,
}

/// Everything observed while processing one frame.
#[derive(Debug, Clone)]
pub struct FrameTrace {
    pub detector_graph: FrameSceneGraph,
    /// Generator output with the tids the engine assigned.
    pub generated: Vec<Mask>,
    pub propagated: Vec<Mask>,
    /// The filtered working set the detector objects were matched against.
    pub candidates: Vec<Mask>,
    pub matches: Option<MatchResult>,
    /// Masks handed to the propagator after this frame.
    pub newly_tracked: Vec<TemporalId>,
    pub timings: StageTimings,
}

#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub graph: TemporalSceneGraph,
    pub trace: FrameTrace,
}

/// Keeps the propagated masks and every generated mask covered by their union
/// strictly less than `overlap_threshold`. Generated masks never filter each
/// other.
pub fn filter_generated(
    generated: &[Mask],
    propagated: &[Mask],
    overlap_threshold: Ratio,
) -> Result<Vec<Mask>, GeometryError> {
    let Some(first) = propagated.first().or(generated.first()) else {
        return Ok(Vec::new());
    };
    let covered = mask_union(first.width(), first.height(), propagated)?;
    let mut out = propagated.to_vec();
    for m in generated {
        if m.is_empty() {
            continue;
        }
        if overlap_fraction(m, &covered)? < overlap_threshold {
            out.push(m.clone());
        }
    }
    Ok(out)
}

/// Builds the temporal graph from a match: one object per matched mask,
/// labelled by its representative, and relationships relabelled through the
/// object-to-mask map. Relabelled self-loops and duplicates are dropped.
pub fn synthesize(
    matches: &MatchResult,
    masks: &[Mask],
    detector_graph: &FrameSceneGraph,
) -> TemporalSceneGraph {
    let objects = matches
        .representatives
        .iter()
        .filter_map(|(&tid, &object_id)| {
            let mask = masks.iter().find(|m| m.tid() == Some(tid))?;
            let label = detector_graph
                .objects
                .iter()
                .find(|o| o.local_id == object_id)?
                .class_label
                .clone();
            Some(TemporalObject {
                tid,
                class_label: label,
                bbox: mask.bbox().ok()?,
                mask: Some(mask.clone()),
            })
        })
        .collect();

    let mut seen = HashSet::new();
    let mut relationships = Vec::new();
    for r in &matches.surviving_relationships {
        let (Some(s), Some(o)) = (matches.mask_for(r.subject), matches.mask_for(r.object)) else {
            continue;
        };
        if s == o {
            continue;
        }
        let t = Triplet::new(s, r.predicate.clone(), o);
        if seen.insert(t.clone()) {
            relationships.push(t);
        }
    }
    TemporalSceneGraph {
        frame_index: detector_graph.frame_index,
        objects,
        relationships,
    }
}

/// Detector graph re-labelled as a temporal graph, local ids used as tids.
pub fn passthrough(graph: &FrameSceneGraph) -> TemporalSceneGraph {
    TemporalSceneGraph {
        frame_index: graph.frame_index,
        objects: graph
            .objects
            .iter()
            .map(|o| TemporalObject {
                tid: TemporalId(o.local_id),
                class_label: o.class_label.clone(),
                bbox: o.bbox,
                mask: None,
            })
            .collect(),
        relationships: graph
            .relationships
            .iter()
            .map(|r| {
                TemporalRelationship::new(TemporalId(r.subject), r.predicate.clone(), TemporalId(r.object))
            })
            .collect(),
    }
}

pub struct Pipeline {
    config: PipelineConfig,
    providers: Providers,
    state: PipelineState,
    history: Vec<TemporalSceneGraph>,
}

impl Pipeline {
    pub fn new(providers: Providers, config: PipelineConfig) -> Self {
        Pipeline {
            config,
            providers,
            state: PipelineState::default(),
            history: Vec::new(),
        }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn state(&self) -> &PipelineState {
        &self.state
    }

    /// Graphs emitted so far.
    pub fn history(&self) -> &[TemporalSceneGraph] {
        &self.history
    }

    /// Base case: no propagation and no filtering.
    pub fn process_first_frame(&mut self, frame: &FrameRef) -> Result<FrameOutput, PipelineError> {
        if let Some(last) = self.state.last_frame {
            return Err(PipelineError::OutOfOrderFrame {
                got: frame.frame_index,
                last: Some(last),
            });
        }
        self.process(frame, false)
    }

    pub fn process_frame(&mut self, frame: &FrameRef) -> Result<FrameOutput, PipelineError> {
        match self.state.last_frame {
            Some(last) if frame.frame_index > last => self.process(frame, true),
            last => Err(PipelineError::OutOfOrderFrame {
                got: frame.frame_index,
                last,
            }),
        }
    }

    fn detect(&self, frame: &FrameRef) -> Result<FrameSceneGraph, PipelineError> {
        let idx = frame.frame_index;
        let ctx = DetectorContext::new(self.config.detector_mode(), &self.history);
        let graph = self
            .providers
            .detector
            .generate(frame, &ctx)
            .map_err(|source| PipelineError::Provider { frame: idx, source })?;
        graph.validate().map_err(|e| PipelineError::Provider {
            frame: idx,
            source: ProviderError::MalformedOutput {
                source_name: "detector".into(),
                reason: e.to_string(),
            },
        })?;
        Ok(graph)
    }

    fn process(&mut self, frame: &FrameRef, propagate: bool) -> Result<FrameOutput, PipelineError> {
        let idx = frame.frame_index;
        let provider_err = |source| PipelineError::Provider { frame: idx, source };
        let mut timings = StageTimings::default();

        if let Method::Baseline(_) = self.config.method {
            let t = Instant::now();
            let detector_graph = self.detect(frame)?;
            timings.detect = t.elapsed();
            let graph = passthrough(&detector_graph);
            return Ok(self.finish(
                graph,
                FrameTrace {
                    detector_graph,
                    generated: Vec::new(),
                    propagated: Vec::new(),
                    candidates: Vec::new(),
                    matches: None,
                    newly_tracked: Vec::new(),
                    timings,
                },
            ));
        }

        // stage 1
        let t = Instant::now();
        let propagated = if propagate {
            let masks = self.providers.propagator.propagate_to(idx).map_err(provider_err)?;
            for m in &masks {
                if !m.tid().is_some_and(|tid| self.state.tracked_tids.contains(&tid)) {
                    return Err(provider_err(ProviderError::MalformedOutput {
                        source_name: "propagator".into(),
                        reason: format!("propagated mask carries untracked tid {:?}", m.tid()),
                    }));
                }
            }
            masks.into_iter().filter(|m| !m.is_empty()).collect()
        } else {
            Vec::new()
        };
        timings.propagate = t.elapsed();

        // stage 2
        let t = Instant::now();
        let generated = generate_tracked_masks(
            self.providers.generator.as_ref(),
            frame,
            &mut self.state.tids,
        )
        .map_err(provider_err)?;
        let candidates = filter_generated(&generated, &propagated, self.config.overlap_threshold)
            .map_err(|source| PipelineError::Geometry { frame: idx, source })?;
        timings.generate_filter = t.elapsed();

        // stage 3
        let t = Instant::now();
        let detector_graph = self.detect(frame)?;
        timings.detect = t.elapsed();

        // stage 4
        let t = Instant::now();
        let matches = match_objects(&detector_graph, &candidates, self.config.iou_threshold);
        timings.matching = t.elapsed();

        // stage 5
        let t = Instant::now();
        let graph = synthesize(&matches, &candidates, &detector_graph);
        timings.synthesize = t.elapsed();

        let matched: Vec<Mask> = candidates
            .iter()
            .filter(|m| m.tid().is_some_and(|t| matches.representatives.contains_key(&t)))
            .cloned()
            .collect();
        let newly: Vec<Mask> = matched
            .iter()
            .filter(|m| !self.state.tracked_tids.contains(&m.tid().unwrap()))
            .cloned()
            .collect();
        if !newly.is_empty() {
            self.providers
                .propagator
                .add_masks(idx, &newly)
                .map_err(provider_err)?;
        }
        let newly_tracked: Vec<_> = newly.iter().filter_map(Mask::tid).collect();
        self.state.tracked_tids.extend(newly_tracked.iter().copied());
        self.state.matched_history.push(matched);

        Ok(self.finish(
            graph,
            FrameTrace {
                detector_graph,
                generated,
                propagated,
                candidates,
                matches: Some(matches),
                newly_tracked,
                timings,
            },
        ))
    }

    fn finish(&mut self, graph: TemporalSceneGraph, trace: FrameTrace) -> FrameOutput {
        let t = &trace.timings;
        debug!(
            "frame {}: propagate {:?}, generate+filter {:?}, detect {:?}, match {:?}, synthesize {:?} ({} objects, {} relationships)",
            graph.frame_index,
            t.propagate,
            t.generate_filter,
            t.detect,
            t.matching,
            t.synthesize,
            graph.objects.len(),
            graph.relationships.len()
        );
        self.state.last_frame = Some(graph.frame_index);
        self.history.push(graph.clone());
        FrameOutput { graph, trace }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub clip: String,
    pub frames: Vec<FrameOutput>,
}

impl RunOutput {
    pub fn graphs(&self) -> Vec<TemporalSceneGraph> {
        self.frames.iter().map(|f| f.graph.clone()).collect()
    }

    pub fn graphs_file(&self) -> GraphsFile {
        GraphsFile {
            clip: self.clip.clone(),
            frames: self.graphs(),
        }
    }
}

/// Processes every frame of `clip` in order.
pub fn run(clip: &Clip, providers: Providers, config: PipelineConfig) -> Result<RunOutput, PipelineError> {
    let (first, rest) = clip.frames.split_first().ok_or(PipelineError::EmptyClip)?;
    let mut pipeline = Pipeline::new(providers, config);
    let mut frames = Vec::with_capacity(clip.len());
    frames.push(pipeline.process_first_frame(first)?);
    for frame in rest {
        frames.push(pipeline.process_frame(frame)?);
    }
    Ok(RunOutput {
        clip: clip.id.clone(),
        frames,
    })
}
