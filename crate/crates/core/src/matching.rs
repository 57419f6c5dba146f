//! Object-to-mask matching.
//!
//! Each detected object is assigned, independently, the mask whose tight
//! bounding box has the highest IoU with the object's box. The assignment is
//! kept only when that IoU is strictly above the threshold; otherwise the
//! object and every relationship touching it are discarded. Several objects
//! may land on the same mask, so the resulting map is onto the matched masks
//! but not necessarily one-to-one. For each matched mask a single
//! representative object is chosen to supply its class label.
//!
//! This is deliberately not a global (Hungarian) assignment.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::geometry::{bbox_iou, BBox, Mask, TemporalId};
use crate::graph::{FrameSceneGraph, Relationship};
use crate::ratio::Ratio;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchPair {
    pub object_id: u64,
    pub tid: TemporalId,
    pub iou: Ratio,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    /// Sorted by object id.
    pub pairs: Vec<MatchPair>,
    /// Matched mask -> representative object id.
    pub representatives: BTreeMap<TemporalId, u64>,
    /// Sorted object ids whose best IoU did not clear the threshold.
    pub discarded_objects: Vec<u64>,
    /// Input relationships with both endpoints matched, in input order.
    pub surviving_relationships: Vec<Relationship>,
}

impl MatchResult {
    pub fn mask_for(&self, object_id: u64) -> Option<TemporalId> {
        self.pairs
            .binary_search_by_key(&object_id, |p| p.object_id)
            .ok()
            .map(|i| self.pairs[i].tid)
    }

    pub fn matched_tids(&self) -> impl Iterator<Item = TemporalId> + '_ {
        self.representatives.keys().copied()
    }
}

/// Candidate masks sorted by tid, with their tight boxes. Masks lacking a
/// tid or pixels cannot be matched and are skipped.
fn candidates(masks: &[Mask]) -> Vec<(TemporalId, BBox)> {
    let mut out: Vec<_> = masks
        .iter()
        .filter_map(|m| Some((m.tid()?, m.bbox().ok()?)))
        .collect();
    out.sort_by_key(|(tid, _)| *tid);
    out
}

/// Matches every object of `graph` against `masks`.
pub fn match_objects(graph: &FrameSceneGraph, masks: &[Mask], iou_threshold: Ratio) -> MatchResult {
    let cands = candidates(masks);
    let mut objects: Vec<_> = graph.objects.iter().collect();
    objects.sort_by_key(|o| o.local_id);

    let mut pairs = Vec::new();
    let mut discarded_objects = Vec::new();
    for obj in objects {
        let mut best: Option<(TemporalId, Ratio)> = None;
        for &(tid, bbox) in &cands {
            let iou = bbox_iou(&obj.bbox, &bbox);
            // strict comparison keeps the lowest tid on ties
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((tid, iou));
            }
        }
        match best {
            Some((tid, iou)) if iou > iou_threshold => pairs.push(MatchPair {
                object_id: obj.local_id,
                tid,
                iou,
            }),
            _ => discarded_objects.push(obj.local_id),
        }
    }

    let matched: BTreeSet<u64> = pairs.iter().map(|p| p.object_id).collect();
    let surviving_relationships = graph
        .relationships
        .iter()
        .filter(|r| matched.contains(&r.subject) && matched.contains(&r.object))
        .cloned()
        .collect();
    let representatives = pseudo_inverse(&pairs);
    MatchResult {
        pairs,
        representatives,
        discarded_objects,
        surviving_relationships,
    }
}

/// Picks one object per matched mask: highest IoU, then lowest object id.
pub fn pseudo_inverse(pairs: &[MatchPair]) -> BTreeMap<TemporalId, u64> {
    let mut best: BTreeMap<TemporalId, (Ratio, u64)> = BTreeMap::new();
    for p in pairs {
        best.entry(p.tid)
            .and_modify(|(iou, id)| {
                if p.iou > *iou || (p.iou == *iou && p.object_id < *id) {
                    *iou = p.iou;
                    *id = p.object_id;
                }
            })
            .or_insert((p.iou, p.object_id));
    }
    best.into_iter().map(|(tid, (_, id))| (tid, id)).collect()
}
