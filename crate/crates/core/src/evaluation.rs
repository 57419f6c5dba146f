//! Relationship recall with identity consistency.
//!
//! A predicted triplet is a true positive when it names a ground-truth
//! triplet (labels and predicate), both endpoint boxes are tight, and both
//! endpoints carry the temporal id the object was first identified with.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{bbox_iou, TemporalId};
use crate::graph::{GraphError, GraphsFile, TemporalObject, TemporalSceneGraph};
use crate::ratio::Ratio;

pub const DEFAULT_TIGHT_IOU: f64 = 0.5;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction has {pred} frames, ground truth has {gt}")]
    FrameCountMismatch { pred: usize, gt: usize },
    #[error("frame {position}: prediction is frame {pred}, ground truth is frame {gt}")]
    FrameIndexMismatch { position: usize, pred: usize, gt: usize },
    #[error("no clips to average")]
    EmptyInput,
    #[error("tight_iou must be in (0, 1), got {0}")]
    InvalidThreshold(f64),
    #[error("{which} frame {frame}: {source}")]
    Schema {
        which: &'static str,
        frame: usize,
        #[source]
        source: GraphError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalConfig {
    /// Minimum box IoU for an endpoint to count as tightly localised.
    pub tight_iou: Ratio,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            tight_iou: Ratio::new(1, 2),
        }
    }
}

impl EvalConfig {
    pub fn from_decimal(tight_iou: f64) -> Result<Self, EvalError> {
        match Ratio::from_decimal(tight_iou) {
            Some(r) if r > Ratio::ZERO && r < Ratio::ONE => Ok(EvalConfig { tight_iou: r }),
            _ => Err(EvalError::InvalidThreshold(tight_iou)),
        }
    }
}

pub fn normalize_label(label: &str) -> String {
    label.trim().to_lowercase()
}

/// Why a predicted triplet is not a true positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FpReason {
    /// No ground-truth triplet with these labels and predicate.
    Triplet,
    /// Labels match but an endpoint box is loose.
    BBox,
    /// Localised correctly but an endpoint id is inconsistent.
    Id,
    /// Would be a hit, but its ground-truth triplet is already taken.
    Duplicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// Index of the absorbed ground-truth triplet.
    Tp(usize),
    Fp(FpReason),
}

/// Ground-truth object -> predicted tid at its first correct
/// identification. Entries are never overwritten.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdLedger {
    entries: BTreeMap<TemporalId, TemporalId>,
}

impl IdLedger {
    pub fn get(&self, gt: TemporalId) -> Option<TemporalId> {
        self.entries.get(&gt).copied()
    }

    /// Records `pred` for `gt` unless `gt` already has an entry; returns
    /// whether anything was written.
    pub fn record(&mut self, gt: TemporalId, pred: TemporalId) -> bool {
        if self.entries.contains_key(&gt) {
            return false;
        }
        self.entries.insert(gt, pred);
        true
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TemporalId, TemporalId)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, *v))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FailureTallies {
    pub triplet: u64,
    pub bbox: u64,
    pub id: u64,
    pub duplicate: u64,
}

impl FailureTallies {
    fn add(&mut self, reason: FpReason) {
        match reason {
            FpReason::Triplet => self.triplet += 1,
            FpReason::BBox => self.bbox += 1,
            FpReason::Id => self.id += 1,
            FpReason::Duplicate => self.duplicate += 1,
        }
    }

    fn merge(&mut self, other: &FailureTallies) {
        self.triplet += other.triplet;
        self.bbox += other.bbox;
        self.id += other.id;
        self.duplicate += other.duplicate;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameEval {
    /// One entry per predicted relationship, in prediction order.
    pub outcomes: Vec<Outcome>,
    pub tp: u64,
    pub gt: u64,
}

/// Per-pair verdict on criteria 1 (labels) and 2 (tightness), before ids.
struct Candidate {
    labels: bool,
    tight: bool,
}

fn label_match(p: &TemporalObject, g: &TemporalObject) -> bool {
    normalize_label(&p.class_label) == normalize_label(&g.class_label)
}

fn tight(p: &TemporalObject, g: &TemporalObject, cfg: &EvalConfig) -> bool {
    bbox_iou(&p.bbox, &g.bbox) >= cfg.tight_iou
}

/// Scores every predicted relationship of one frame and updates `ledger`.
///
/// Ledger entries are written first, scanning ground-truth triplets in
/// order and predictions in order, for every pair passing labels and
/// tightness. Then each ground-truth triplet takes the first unused
/// prediction that also passes the id check.
pub fn evaluate_frame(
    pred: &TemporalSceneGraph,
    gt: &TemporalSceneGraph,
    ledger: &mut IdLedger,
    cfg: &EvalConfig,
) -> FrameEval {
    let pred_obj: BTreeMap<TemporalId, &TemporalObject> = pred.objects.iter().map(|o| (o.tid, o)).collect();
    let gt_obj: BTreeMap<TemporalId, &TemporalObject> = gt.objects.iter().map(|o| (o.tid, o)).collect();
    let n_pred = pred.relationships.len();
    let n_gt = gt.relationships.len();

    let mut cand: Vec<Vec<Candidate>> = Vec::with_capacity(n_gt);
    for g in &gt.relationships {
        let (gs, go) = (gt_obj[&g.subject], gt_obj[&g.object]);
        let g_pred = normalize_label(&g.predicate);
        cand.push(
            pred.relationships
                .iter()
                .map(|p| {
                    let (ps, po) = (pred_obj[&p.subject], pred_obj[&p.object]);
                    let labels = normalize_label(&p.predicate) == g_pred && label_match(ps, gs) && label_match(po, go);
                    Candidate {
                        labels,
                        tight: labels && tight(ps, gs, cfg) && tight(po, go, cfg),
                    }
                })
                .collect(),
        );
    }

    for (gi, g) in gt.relationships.iter().enumerate() {
        for (pi, p) in pred.relationships.iter().enumerate() {
            if cand[gi][pi].tight {
                ledger.record(g.subject, p.subject);
                ledger.record(g.object, p.object);
            }
        }
    }

    let id_ok = |gt_id: TemporalId, pred_id: TemporalId| -> bool {
        ledger.get(gt_id) == Some(pred_id)
            && !gt
                .objects
                .iter()
                .any(|o| o.tid != gt_id && ledger.get(o.tid) == Some(pred_id))
    };
    let eligible: Vec<Vec<bool>> = gt
        .relationships
        .iter()
        .enumerate()
        .map(|(gi, g)| {
            pred.relationships
                .iter()
                .enumerate()
                .map(|(pi, p)| cand[gi][pi].tight && id_ok(g.subject, p.subject) && id_ok(g.object, p.object))
                .collect()
        })
        .collect();

    let mut outcomes: Vec<Option<Outcome>> = vec![None; n_pred];
    for (gi, row) in eligible.iter().enumerate() {
        if let Some(pi) = (0..n_pred).find(|&pi| outcomes[pi].is_none() && row[pi]) {
            outcomes[pi] = Some(Outcome::Tp(gi));
        }
    }
    let outcomes: Vec<Outcome> = outcomes
        .into_iter()
        .enumerate()
        .map(|(pi, o)| {
            o.unwrap_or_else(|| {
                let reason = if (0..n_gt).any(|gi| eligible[gi][pi]) {
                    FpReason::Duplicate
                } else if (0..n_gt).any(|gi| cand[gi][pi].tight) {
                    FpReason::Id
                } else if (0..n_gt).any(|gi| cand[gi][pi].labels) {
                    FpReason::BBox
                } else {
                    FpReason::Triplet
                };
                Outcome::Fp(reason)
            })
        })
        .collect();
    let tp = outcomes.iter().filter(|o| matches!(o, Outcome::Tp(_))).count() as u64;
    FrameEval {
        outcomes,
        tp,
        gt: n_gt as u64,
    }
}

/// Scores one predicted relationship in isolation against a frame; the
/// ledger is updated as [`evaluate_frame`] would.
pub fn classify_relationship(
    index: usize,
    pred: &TemporalSceneGraph,
    gt: &TemporalSceneGraph,
    ledger: &mut IdLedger,
    cfg: &EvalConfig,
) -> Outcome {
    evaluate_frame(pred, gt, ledger, cfg).outcomes[index]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrameCounts {
    pub frame: usize,
    pub tp: u64,
    pub gt: u64,
    pub fp: FailureTallies,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClipReport {
    pub clip: String,
    pub tp: u64,
    pub gt: u64,
    pub recall: f64,
    pub frames: Vec<FrameCounts>,
    pub failures: FailureTallies,
}

impl ClipReport {
    /// `tp / gt`; a clip with no ground-truth relationships has nothing to
    /// miss and scores 1.
    pub fn recall_ratio(&self) -> Ratio {
        if self.gt == 0 {
            Ratio::ONE
        } else {
            Ratio::new(self.tp, self.gt)
        }
    }
}

fn validate_all(file: &GraphsFile, which: &'static str) -> Result<(), EvalError> {
    for g in &file.frames {
        g.validate().map_err(|source| EvalError::Schema {
            which,
            frame: g.frame_index,
            source,
        })?;
    }
    Ok(())
}

pub fn evaluate_clip(pred: &GraphsFile, gt: &GraphsFile, cfg: &EvalConfig) -> Result<ClipReport, EvalError> {
    if pred.frames.len() != gt.frames.len() {
        return Err(EvalError::FrameCountMismatch {
            pred: pred.frames.len(),
            gt: gt.frames.len(),
        });
    }
    validate_all(pred, "prediction")?;
    validate_all(gt, "ground truth")?;
    let mut ledger = IdLedger::default();
    let mut frames = Vec::with_capacity(gt.frames.len());
    let mut failures = FailureTallies::default();
    let (mut tp, mut total) = (0, 0);
    for (position, (p, g)) in pred.frames.iter().zip(&gt.frames).enumerate() {
        if p.frame_index != g.frame_index {
            return Err(EvalError::FrameIndexMismatch {
                position,
                pred: p.frame_index,
                gt: g.frame_index,
            });
        }
        let eval = evaluate_frame(p, g, &mut ledger, cfg);
        let mut fp = FailureTallies::default();
        for o in &eval.outcomes {
            if let Outcome::Fp(r) = o {
                fp.add(*r);
            }
        }
        failures.merge(&fp);
        tp += eval.tp;
        total += eval.gt;
        frames.push(FrameCounts {
            frame: g.frame_index,
            tp: eval.tp,
            gt: eval.gt,
            fp,
        });
    }
    let mut report = ClipReport {
        clip: gt.clip.clone(),
        tp,
        gt: total,
        recall: 0.0,
        frames,
        failures,
    };
    report.recall = report.recall_ratio().to_f64();
    Ok(report)
}

pub fn clip_recall(pred: &GraphsFile, gt: &GraphsFile, cfg: &EvalConfig) -> Result<Ratio, EvalError> {
    Ok(evaluate_clip(pred, gt, cfg)?.recall_ratio())
}

/// Unweighted mean of per-clip recalls.
pub fn mean_recall(recalls: &[f64]) -> Result<f64, EvalError> {
    if recalls.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(recalls.iter().sum::<f64>() / recalls.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub tight_iou: f64,
    pub clips: Vec<ClipReport>,
    pub mean_recall: f64,
    pub failures: FailureTallies,
}

/// Evaluates `(prediction, ground truth)` pairs, one thread per clip.
pub fn evaluate(pairs: &[(GraphsFile, GraphsFile)], cfg: &EvalConfig) -> Result<EvalReport, EvalError> {
    let clips: Vec<ClipReport> = std::thread::scope(|s| {
        let handles: Vec<_> = pairs
            .iter()
            .map(|(p, g)| s.spawn(move || evaluate_clip(p, g, cfg)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("evaluation thread panicked"))
            .collect::<Result<_, _>>()
    })?;
    let mean = mean_recall(&clips.iter().map(|c| c.recall).collect::<Vec<_>>())?;
    let mut failures = FailureTallies::default();
    for c in &clips {
        failures.merge(&c.failures);
    }
    Ok(EvalReport {
        tight_iou: cfg.tight_iou.to_f64(),
        clips,
        mean_recall: mean,
        failures,
    })
}
