//! The three external model roles the engine depends on, and file-backed
//! implementations that replay pre-computed outputs.
//!
//! A recorded clip lives under `<root>/frames/<clip>/` with one JSON file per
//! frame and role:
//!
//! * `<idx>.detector.json` holds the frame-level scene graph,
//! * `<idx>.masks.json` holds generator output (temporal ids are `null`; the
//!   engine assigns them),
//! * `<idx>.propagated.json` holds propagator output for that frame.

use std::collections::BTreeSet;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Mask, TemporalId};
use crate::graph::{FrameRef, FrameSceneGraph, TemporalSceneGraph};

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("malformed provider output in {source_name}: {reason}")]
    MalformedOutput { source_name: String, reason: String },
    #[error("temporal id {0} is already tracked")]
    DuplicateTrackedId(TemporalId),
    #[error("cannot propagate to frame {requested}: masks were already added at frame {latest}")]
    NonIncreasingFrame { requested: usize, latest: usize },
    #[error("invalid provider selector {0:?}")]
    InvalidSelector(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// How much prior output the frame-level detector is allowed to see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum ContextMode {
    CurrentFrame,
    LastGraph,
    AllGraphs,
}

impl ContextMode {
    pub const ALL: [ContextMode; 3] = [
        ContextMode::CurrentFrame,
        ContextMode::LastGraph,
        ContextMode::AllGraphs,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ContextMode::CurrentFrame => "current_frame",
            ContextMode::LastGraph => "last_graph",
            ContextMode::AllGraphs => "all_graphs",
        }
    }

    /// Slice of `previous` (all graphs emitted so far) the detector may see.
    pub fn window<'a>(&self, previous: &'a [TemporalSceneGraph]) -> &'a [TemporalSceneGraph] {
        match self {
            ContextMode::CurrentFrame => &[],
            ContextMode::LastGraph => &previous[previous.len().saturating_sub(1)..],
            ContextMode::AllGraphs => previous,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DetectorContext<'a> {
    pub mode: ContextMode,
    pub history: &'a [TemporalSceneGraph],
}

impl<'a> DetectorContext<'a> {
    pub fn current_frame() -> Self {
        DetectorContext {
            mode: ContextMode::CurrentFrame,
            history: &[],
        }
    }

    pub fn new(mode: ContextMode, previous: &'a [TemporalSceneGraph]) -> Self {
        DetectorContext {
            mode,
            history: mode.window(previous),
        }
    }
}

/// Frame-level scene graph detector.
pub trait SceneGraphDetector: Send + Sync {
    fn generate(
        &self,
        frame: &FrameRef,
        ctx: &DetectorContext<'_>,
    ) -> Result<FrameSceneGraph, ProviderError>;
}

/// Automatic mask generator. Returned masks carry no temporal id; use
/// [`generate_tracked_masks`] to stamp fresh ones.
pub trait MaskGenerator: Send + Sync {
    fn generate_masks(&self, frame: &FrameRef) -> Result<Vec<Mask>, ProviderError>;
}

/// Stateful video mask tracker.
pub trait MaskPropagator: Send {
    /// Registers masks observed at `frame_index`. Every mask must carry a
    /// temporal id that was never added before.
    fn add_masks(&mut self, frame_index: usize, masks: &[Mask]) -> Result<(), ProviderError>;

    /// Returns tracked masks advanced to `frame_index`, each with the temporal
    /// id of its source. Tracks whose object is out of view are omitted.
    fn propagate_to(&mut self, frame_index: usize) -> Result<Vec<Mask>, ProviderError>;
}

/// Monotonic per-video temporal id counter.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TidAllocator {
    next: u64,
}

impl TidAllocator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fresh(&mut self) -> TemporalId {
        let tid = TemporalId(self.next);
        self.next += 1;
        tid
    }

    pub fn issued(&self) -> u64 {
        self.next
    }
}

/// Runs the generator, drops empty masks and stamps each survivor with a
/// never-before-issued temporal id.
pub fn generate_tracked_masks(
    generator: &dyn MaskGenerator,
    frame: &FrameRef,
    tids: &mut TidAllocator,
) -> Result<Vec<Mask>, ProviderError> {
    let masks = generator.generate_masks(frame)?;
    Ok(masks
        .into_iter()
        .filter(|m| !m.is_empty())
        .map(|m| m.with_tid(Some(tids.fresh())))
        .collect())
}

/// Bookkeeping shared by propagators: which tids are tracked and the latest
/// frame masks were added at.
#[derive(Debug, Clone, Default)]
pub struct TrackRegistry {
    tracked: BTreeSet<TemporalId>,
    latest_added: Option<usize>,
}

impl TrackRegistry {
    pub fn register(&mut self, frame_index: usize, masks: &[Mask]) -> Result<(), ProviderError> {
        let mut batch = BTreeSet::new();
        for m in masks {
            let tid = m.tid().ok_or_else(|| ProviderError::MalformedOutput {
                source_name: "add_masks".into(),
                reason: "mask without temporal id".into(),
            })?;
            if self.tracked.contains(&tid) || !batch.insert(tid) {
                return Err(ProviderError::DuplicateTrackedId(tid));
            }
        }
        self.tracked.extend(batch);
        self.latest_added = Some(self.latest_added.map_or(frame_index, |f| f.max(frame_index)));
        Ok(())
    }

    pub fn check_target(&self, frame_index: usize) -> Result<(), ProviderError> {
        match self.latest_added {
            Some(latest) if frame_index <= latest => Err(ProviderError::NonIncreasingFrame {
                requested: frame_index,
                latest,
            }),
            _ => Ok(()),
        }
    }

    pub fn contains(&self, tid: TemporalId) -> bool {
        self.tracked.contains(&tid)
    }

    pub fn len(&self) -> usize {
        self.tracked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracked.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MasksFile {
    pub frame: usize,
    pub masks: Vec<Mask>,
}

/// Parsed `--providers` value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderSelector {
    Recorded { dir: PathBuf },
    /// `scenario` and `noise` are either canned names or JSON file paths.
    Sim {
        scenario: String,
        noise: String,
        seed: u64,
    },
}

impl std::str::FromStr for ProviderSelector {
    type Err = ProviderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ProviderError::InvalidSelector(s.to_string());
        if let Some(dir) = s.strip_prefix("recorded:") {
            if dir.is_empty() {
                return Err(bad());
            }
            return Ok(ProviderSelector::Recorded { dir: dir.into() });
        }
        let rest = s.strip_prefix("sim:").ok_or_else(bad)?;
        let (rest, seed) = rest.rsplit_once(':').ok_or_else(bad)?;
        let (scenario, noise) = rest.rsplit_once(':').ok_or_else(bad)?;
        let seed = seed.parse().map_err(|_| bad())?;
        if scenario.is_empty() || noise.is_empty() {
            return Err(bad());
        }
        Ok(ProviderSelector::Sim {
            scenario: scenario.to_string(),
            noise: noise.to_string(),
            seed,
        })
    }
}

/// A clip directory in the recorded layout.
#[derive(Debug, Clone)]
pub struct RecordedClip {
    dir: PathBuf,
    clip: String,
}

impl RecordedClip {
    pub fn new(root: impl AsRef<Path>, clip: impl Into<String>) -> Self {
        let clip = clip.into();
        RecordedClip {
            dir: root.as_ref().join("frames").join(&clip),
            clip,
        }
    }

    /// Clip names present under `<root>/frames`, sorted.
    pub fn list(root: impl AsRef<Path>) -> Result<Vec<String>, ProviderError> {
        let frames = root.as_ref().join("frames");
        let entries = fs::read_dir(&frames).map_err(|source| ProviderError::Io {
            path: frames.clone(),
            source,
        })?;
        let mut names = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|source| ProviderError::Io {
                path: frames.clone(),
                source,
            })?;
            if entry.path().is_dir() {
                names.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        names.sort();
        Ok(names)
    }

    pub fn id(&self) -> &str {
        &self.clip
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, frame_index: usize, role: &str) -> PathBuf {
        self.dir.join(format!("{frame_index}.{role}.json"))
    }

    /// Number of consecutive detector files starting at frame 0.
    pub fn frame_count(&self) -> usize {
        (0..).take_while(|&i| self.path(i, "detector").is_file()).count()
    }

    fn read<T: serde::de::DeserializeOwned>(&self, path: &Path) -> Result<T, ProviderError> {
        let text = fs::read_to_string(path).map_err(|e| {
            if e.kind() == io::ErrorKind::NotFound {
                ProviderError::Unavailable(format!("missing {}", path.display()))
            } else {
                ProviderError::Io {
                    path: path.to_path_buf(),
                    source: e,
                }
            }
        })?;
        serde_json::from_str(&text).map_err(|e| ProviderError::MalformedOutput {
            source_name: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    fn write<T: Serialize>(&self, path: &Path, value: &T) -> Result<(), ProviderError> {
        fs::create_dir_all(&self.dir).map_err(|source| ProviderError::Io {
            path: self.dir.clone(),
            source,
        })?;
        let mut text = serde_json::to_string(value).expect("provider output serialises");
        text.push('\n');
        fs::write(path, text).map_err(|source| ProviderError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    fn read_masks(&self, frame_index: usize, role: &str) -> Result<Vec<Mask>, ProviderError> {
        let path = self.path(frame_index, role);
        let file: MasksFile = self.read(&path)?;
        if file.frame != frame_index {
            return Err(ProviderError::MalformedOutput {
                source_name: path.display().to_string(),
                reason: format!("frame field is {}, expected {frame_index}", file.frame),
            });
        }
        Ok(file.masks)
    }

    pub fn write_detector(&self, graph: &FrameSceneGraph) -> Result<(), ProviderError> {
        self.write(&self.path(graph.frame_index, "detector"), graph)
    }

    pub fn write_generated(&self, frame_index: usize, masks: &[Mask]) -> Result<(), ProviderError> {
        let masks = masks.iter().map(|m| m.clone().with_tid(None)).collect();
        self.write(
            &self.path(frame_index, "masks"),
            &MasksFile {
                frame: frame_index,
                masks,
            },
        )
    }

    pub fn write_propagated(&self, frame_index: usize, masks: &[Mask]) -> Result<(), ProviderError> {
        self.write(
            &self.path(frame_index, "propagated"),
            &MasksFile {
                frame: frame_index,
                masks: masks.to_vec(),
            },
        )
    }
}

/// Replays `<idx>.detector.json`. The context is ignored: whatever was
/// recorded is returned.
#[derive(Debug, Clone)]
pub struct RecordedDetector {
    clip: RecordedClip,
}

impl RecordedDetector {
    pub fn new(clip: RecordedClip) -> Self {
        RecordedDetector { clip }
    }
}

impl SceneGraphDetector for RecordedDetector {
    fn generate(
        &self,
        frame: &FrameRef,
        _ctx: &DetectorContext<'_>,
    ) -> Result<FrameSceneGraph, ProviderError> {
        let path = self.clip.path(frame.frame_index, "detector");
        let graph: FrameSceneGraph = self.clip.read(&path)?;
        let malformed = |reason: String| ProviderError::MalformedOutput {
            source_name: path.display().to_string(),
            reason,
        };
        if graph.frame_index != frame.frame_index {
            return Err(malformed(format!(
                "frame field is {}, expected {}",
                graph.frame_index, frame.frame_index
            )));
        }
        graph.validate().map_err(|e| malformed(e.to_string()))?;
        Ok(graph)
    }
}

#[derive(Debug, Clone)]
pub struct RecordedGenerator {
    clip: RecordedClip,
}

impl RecordedGenerator {
    pub fn new(clip: RecordedClip) -> Self {
        RecordedGenerator { clip }
    }
}

impl MaskGenerator for RecordedGenerator {
    fn generate_masks(&self, frame: &FrameRef) -> Result<Vec<Mask>, ProviderError> {
        Ok(self
            .clip
            .read_masks(frame.frame_index, "masks")?
            .into_iter()
            .filter(|m| !m.is_empty())
            .map(|m| m.with_tid(None))
            .collect())
    }
}

/// Replays `<idx>.propagated.json`, returning only masks whose temporal id
/// was handed to [`MaskPropagator::add_masks`]. A missing file is an empty
/// result while nothing is tracked, and an error otherwise.
#[derive(Debug, Clone)]
pub struct RecordedPropagator {
    clip: RecordedClip,
    registry: TrackRegistry,
}

impl RecordedPropagator {
    pub fn new(clip: RecordedClip) -> Self {
        RecordedPropagator {
            clip,
            registry: TrackRegistry::default(),
        }
    }
}

impl MaskPropagator for RecordedPropagator {
    fn add_masks(&mut self, frame_index: usize, masks: &[Mask]) -> Result<(), ProviderError> {
        self.registry.register(frame_index, masks)
    }

    fn propagate_to(&mut self, frame_index: usize) -> Result<Vec<Mask>, ProviderError> {
        self.registry.check_target(frame_index)?;
        let masks = match self.clip.read_masks(frame_index, "propagated") {
            Err(ProviderError::Unavailable(_)) if self.registry.is_empty() => return Ok(Vec::new()),
            other => other?,
        };
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for m in masks {
            let Some(tid) = m.tid() else {
                return Err(ProviderError::MalformedOutput {
                    source_name: self.clip.path(frame_index, "propagated").display().to_string(),
                    reason: "propagated mask without temporal id".into(),
                });
            };
            if self.registry.contains(tid) && !m.is_empty() && seen.insert(tid) {
                out.push(m);
            }
        }
        Ok(out)
    }
}

/// Detector, generator and propagator for one pipeline run.
pub struct Providers {
    pub detector: Box<dyn SceneGraphDetector>,
    pub generator: Box<dyn MaskGenerator>,
    pub propagator: Box<dyn MaskPropagator>,
}

impl Providers {
    pub fn recorded(clip: RecordedClip) -> Self {
        Providers {
            detector: Box::new(RecordedDetector::new(clip.clone())),
            generator: Box::new(RecordedGenerator::new(clip.clone())),
            propagator: Box::new(RecordedPropagator::new(clip)),
        }
    }
}
