//! Scene graph data model: detector-level frame graphs and the synthesized
//! temporally-consistent graphs, plus their JSON file forms.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BBox, Mask, TemporalId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("duplicate object id {0}")]
    DuplicateObject(u64),
    #[error("object {0} has an empty label")]
    EmptyLabel(u64),
    #[error("relationship {0} -[{1}]-> {2} references a missing object")]
    DanglingRelationship(u64, String, u64),
    #[error("relationship on object {0} points at itself")]
    SelfLoop(u64),
    #[error("relationship with empty predicate")]
    EmptyPredicate,
    #[error("duplicate triplet {0} -[{1}]-> {2}")]
    DuplicateTriplet(u64, String, u64),
    #[error("object {tid} bbox does not match its mask")]
    BBoxMaskMismatch { tid: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRef {
    pub clip_id: String,
    pub frame_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<String>,
}

impl FrameRef {
    pub fn new(clip_id: impl Into<String>, frame_index: usize) -> Self {
        FrameRef {
            clip_id: clip_id.into(),
            frame_index,
            image_path: None,
        }
    }
}

/// Ordered frames of one clip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clip {
    pub id: String,
    pub frames: Vec<FrameRef>,
}

impl Clip {
    pub fn with_len(id: impl Into<String>, len: usize) -> Self {
        let id = id.into();
        let frames = (0..len).map(|i| FrameRef::new(id.clone(), i)).collect();
        Clip { id, frames }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectedObject {
    #[serde(rename = "id")]
    pub local_id: u64,
    #[serde(rename = "label")]
    pub class_label: String,
    pub bbox: BBox,
}

/// A `<subject, predicate, object>` triplet over some id space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triplet<Id> {
    #[serde(rename = "s")]
    pub subject: Id,
    #[serde(rename = "p")]
    pub predicate: String,
    #[serde(rename = "o")]
    pub object: Id,
}

impl<Id> Triplet<Id> {
    pub fn new(subject: Id, predicate: impl Into<String>, object: Id) -> Self {
        Triplet {
            subject,
            predicate: predicate.into(),
            object,
        }
    }
}

/// Relationship between detector-local object ids.
pub type Relationship = Triplet<u64>;

/// Relationship between temporal ids.
pub type TemporalRelationship = Triplet<TemporalId>;

/// Detector output for one frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSceneGraph {
    #[serde(rename = "frame")]
    pub frame_index: usize,
    pub objects: Vec<DetectedObject>,
    pub relationships: Vec<Relationship>,
}

impl FrameSceneGraph {
    pub fn empty(frame_index: usize) -> Self {
        FrameSceneGraph {
            frame_index,
            objects: Vec::new(),
            relationships: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let mut ids = HashSet::new();
        for o in &self.objects {
            if !ids.insert(o.local_id) {
                return Err(GraphError::DuplicateObject(o.local_id));
            }
            if o.class_label.trim().is_empty() {
                return Err(GraphError::EmptyLabel(o.local_id));
            }
        }
        let mut seen = HashSet::new();
        for r in &self.relationships {
            if r.predicate.trim().is_empty() {
                return Err(GraphError::EmptyPredicate);
            }
            if r.subject == r.object {
                return Err(GraphError::SelfLoop(r.subject));
            }
            if !ids.contains(&r.subject) || !ids.contains(&r.object) {
                return Err(GraphError::DanglingRelationship(
                    r.subject,
                    r.predicate.clone(),
                    r.object,
                ));
            }
            if !seen.insert(r) {
                return Err(GraphError::DuplicateTriplet(r.subject, r.predicate.clone(), r.object));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalObject {
    pub tid: TemporalId,
    #[serde(rename = "label")]
    pub class_label: String,
    pub bbox: BBox,
    /// `None` for baseline graphs, which have no segmentation.
    pub mask: Option<Mask>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalSceneGraph {
    #[serde(rename = "frame")]
    pub frame_index: usize,
    pub objects: Vec<TemporalObject>,
    pub relationships: Vec<TemporalRelationship>,
}

impl TemporalSceneGraph {
    pub fn empty(frame_index: usize) -> Self {
        TemporalSceneGraph {
            frame_index,
            objects: Vec::new(),
            relationships: Vec::new(),
        }
    }

    pub fn object(&self, tid: TemporalId) -> Option<&TemporalObject> {
        self.objects.iter().find(|o| o.tid == tid)
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let mut ids = HashSet::new();
        for o in &self.objects {
            if !ids.insert(o.tid) {
                return Err(GraphError::DuplicateObject(o.tid.0));
            }
            if o.class_label.trim().is_empty() {
                return Err(GraphError::EmptyLabel(o.tid.0));
            }
            if let Some(mask) = &o.mask {
                if mask.bbox().ok() != Some(o.bbox) {
                    return Err(GraphError::BBoxMaskMismatch { tid: o.tid.0 });
                }
            }
        }
        let mut seen = HashSet::new();
        for r in &self.relationships {
            if r.predicate.trim().is_empty() {
                return Err(GraphError::EmptyPredicate);
            }
            if r.subject == r.object {
                return Err(GraphError::SelfLoop(r.subject.0));
            }
            if !ids.contains(&r.subject) || !ids.contains(&r.object) {
                return Err(GraphError::DanglingRelationship(
                    r.subject.0,
                    r.predicate.clone(),
                    r.object.0,
                ));
            }
            if !seen.insert(r) {
                return Err(GraphError::DuplicateTriplet(
                    r.subject.0,
                    r.predicate.clone(),
                    r.object.0,
                ));
            }
        }
        Ok(())
    }
}

/// Contents of `graphs.json` (and of ground-truth files, which share the
/// schema).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphsFile {
    pub clip: String,
    pub frames: Vec<TemporalSceneGraph>,
}

impl GraphsFile {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("graphs serialise");
        s.push('\n');
        s
    }
}
