//! Simulated detector, generator and propagator.
//!
//! All three are pure functions of `(scenario, noise, seed, frame)` plus, for
//! the propagator, the masks it has been given. The detector is stateless: the
//! id bookkeeping it needs for history-aware modes is recomputed by replaying
//! the scripted frames up to the requested one.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use super::noise::{gaussian_px, poisson_free_count, rng_for, NoiseProfile, Stream};
use super::scenario::Scenario;
use crate::geometry::{BBox, Mask, TemporalId};
use crate::graph::{DetectedObject, FrameRef, FrameSceneGraph, Triplet};
use crate::providers::{
    ContextMode, DetectorContext, MaskGenerator, MaskPropagator, ProviderError, SceneGraphDetector,
    TrackRegistry,
};

fn check_frame(scenario: &Scenario, frame: &FrameRef) -> Result<(), ProviderError> {
    if frame.frame_index >= scenario.len() {
        return Err(ProviderError::Unavailable(format!(
            "scenario {} has {} frames, asked for {}",
            scenario.name,
            scenario.len(),
            frame.frame_index
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SimDetector {
    scenario: Arc<Scenario>,
    noise: NoiseProfile,
    seed: u64,
}

struct Hallucination {
    label: String,
    bbox: BBox,
    predicate: String,
    /// Index into the frame's present objects.
    target: Option<usize>,
}

impl SimDetector {
    pub fn new(scenario: Arc<Scenario>, noise: NoiseProfile, seed: u64) -> Self {
        SimDetector { scenario, noise, seed }
    }

    /// Visible, non-dropped gt ids at `frame`, ascending.
    fn present(&self, frame: usize) -> Vec<u64> {
        let mut ids: Vec<u64> = self.scenario.frames[frame]
            .visible()
            .map(|o| o.gt_id)
            .filter(|&gt| {
                self.noise.drop_prob <= 0.0
                    || !rng_for(self.seed, frame, Stream::DetectorDrop, gt).random_bool(self.noise.drop_prob)
            })
            .collect();
        ids.sort_unstable();
        ids
    }

    fn hallucination_count(&self, frame: usize) -> usize {
        if self.noise.halluc_rate <= 0.0 {
            return 0;
        }
        poisson_free_count(&mut rng_for(self.seed, frame, Stream::Hallucination, 0), self.noise.halluc_rate)
    }

    fn hallucinations(&self, frame: usize, n_present: usize) -> Vec<Hallucination> {
        let (w, h) = (self.scenario.width, self.scenario.height);
        let labels = self.scenario.label_vocabulary();
        let predicates = self.scenario.predicate_vocabulary();
        (0..self.hallucination_count(frame))
            .map(|k| {
                let mut rng = rng_for(self.seed, frame, Stream::Hallucination, k as u64 + 1);
                let bw = rng.random_range(1..=(w / 4).max(1));
                let bh = rng.random_range(1..=(h / 4).max(1));
                let x = rng.random_range(0..=w - bw);
                let y = rng.random_range(0..=h - bh);
                let label = labels[rng.random_range(0..labels.len())].clone();
                let predicate = if predicates.is_empty() {
                    "near".to_string()
                } else {
                    predicates[rng.random_range(0..predicates.len())].clone()
                };
                let target = (n_present > 0).then(|| rng.random_range(0..n_present));
                Hallucination {
                    label,
                    bbox: BBox::new(x, y, x + bw, y + bh).unwrap(),
                    predicate,
                    target,
                }
            })
            .collect()
    }

    fn permutation(&self, frame: usize, n: usize) -> Vec<u64> {
        let mut ids: Vec<u64> = (1..=n as u64).collect();
        ids.shuffle(&mut rng_for(self.seed, frame, Stream::IdPermutation, 0));
        ids
    }

    /// Local ids at `frame` for present objects (aligned with
    /// [`Self::present`]) and for hallucinations.
    fn assign_ids(&self, mode: ContextMode, frame: usize) -> (Vec<u64>, Vec<u64>) {
        let present = self.present(frame);
        let n_halluc = self.hallucination_count(frame);
        let n = present.len() + n_halluc;
        let split = |ids: Vec<u64>| {
            let (a, b) = ids.split_at(present.len());
            (a.to_vec(), b.to_vec())
        };
        let scramble = self.noise.id_scramble.get(mode);
        match (mode, scramble) {
            (ContextMode::CurrentFrame, false) => split(self.permutation(frame, n)),
            (_, false) => {
                let base = self.scenario.max_gt_id() + 2;
                (
                    present.iter().map(|gt| gt + 1).collect(),
                    (0..n_halluc as u64).map(|k| base + k).collect(),
                )
            }
            (ContextMode::CurrentFrame, true) => {
                // never reuse an id from an earlier frame
                let offset: u64 = (0..frame)
                    .map(|g| (self.present(g).len() + self.hallucination_count(g)) as u64)
                    .sum();
                split(self.permutation(frame, n).into_iter().map(|id| id + offset).collect())
            }
            (mode, true) => self.replay_history_ids(mode, frame),
        }
    }

    /// Scrambled ids for history-aware modes. Frame 0 is a random
    /// permutation. Afterwards an object keeps its id while the detector can
    /// still "see" it in context (present in the previous output for
    /// `last_graph`, continuously in view for `all_graphs`); otherwise it gets
    /// the smallest free id other than its old one, which recycles ids of
    /// objects that left.
    fn replay_history_ids(&self, mode: ContextMode, upto: usize) -> (Vec<u64>, Vec<u64>) {
        let mut last_id: BTreeMap<u64, u64> = BTreeMap::new();
        let mut prev_present: BTreeSet<u64> = BTreeSet::new();
        let mut result = (Vec::new(), Vec::new());
        for g in 0..=upto {
            let present = self.present(g);
            let n_halluc = self.hallucination_count(g);
            let mut ids = vec![0u64; present.len()];
            let mut halluc = Vec::with_capacity(n_halluc);
            if g == 0 {
                let perm = self.permutation(0, present.len() + n_halluc);
                ids.copy_from_slice(&perm[..present.len()]);
                halluc.extend_from_slice(&perm[present.len()..]);
            } else {
                let script_prev = &self.scenario.frames[g - 1];
                let mut taken = BTreeSet::new();
                let mut fresh = Vec::new();
                for (i, gt) in present.iter().enumerate() {
                    let remembered = match mode {
                        ContextMode::LastGraph => prev_present.contains(gt),
                        _ => script_prev.is_visible(*gt),
                    };
                    match last_id.get(gt) {
                        Some(&id) if remembered && taken.insert(id) => ids[i] = id,
                        _ => fresh.push(i),
                    }
                }
                let next_free = |avoid: Option<u64>, taken: &mut BTreeSet<u64>| {
                    let id = (1..)
                        .find(|k| !taken.contains(k) && Some(*k) != avoid)
                        .unwrap();
                    taken.insert(id);
                    id
                };
                for i in fresh {
                    ids[i] = next_free(last_id.get(&present[i]).copied(), &mut taken);
                }
                for _ in 0..n_halluc {
                    halluc.push(next_free(None, &mut taken));
                }
            }
            for (gt, id) in present.iter().zip(&ids) {
                last_id.insert(*gt, *id);
            }
            prev_present = present.into_iter().collect();
            result = (ids, halluc);
        }
        result
    }

    fn observe_bbox(&self, frame: usize, gt: u64, bbox: BBox) -> BBox {
        let sigma = self.noise.bbox_jitter_sigma;
        if sigma <= 0.0 {
            return bbox;
        }
        let mut rng = rng_for(self.seed, frame, Stream::DetectorJitter, gt);
        let d: Vec<i64> = (0..4).map(|_| gaussian_px(&mut rng, sigma)).collect();
        BBox::clamped(
            bbox.x_min() as i64 + d[0],
            bbox.y_min() as i64 + d[1],
            bbox.x_max() as i64 + d[2],
            bbox.y_max() as i64 + d[3],
            self.scenario.width,
            self.scenario.height,
        )
    }

    fn observe_label(&self, frame: usize, gt: u64, label: &str) -> String {
        let p = self.noise.label_flip_prob;
        if p <= 0.0 {
            return label.to_string();
        }
        let mut rng = rng_for(self.seed, frame, Stream::DetectorLabel, gt);
        if !rng.random_bool(p) {
            return label.to_string();
        }
        let others: Vec<String> = self
            .scenario
            .label_vocabulary()
            .into_iter()
            .filter(|l| l != label)
            .collect();
        if others.is_empty() {
            "unknown".to_string()
        } else {
            others[rng.random_range(0..others.len())].clone()
        }
    }
}

impl SceneGraphDetector for SimDetector {
    fn generate(
        &self,
        frame: &FrameRef,
        ctx: &DetectorContext<'_>,
    ) -> Result<FrameSceneGraph, ProviderError> {
        check_frame(&self.scenario, frame)?;
        let f = frame.frame_index;
        let truth = self.scenario.rasterize(f).graph;
        let present = self.present(f);
        let (ids, halluc_ids) = self.assign_ids(ctx.mode, f);
        let id_of: BTreeMap<u64, u64> = present.iter().copied().zip(ids.iter().copied()).collect();

        let mut objects: Vec<DetectedObject> = truth
            .objects
            .iter()
            .filter_map(|o| {
                let id = *id_of.get(&o.local_id)?;
                Some(DetectedObject {
                    local_id: id,
                    class_label: self.observe_label(f, o.local_id, &o.class_label),
                    bbox: self.observe_bbox(f, o.local_id, o.bbox),
                })
            })
            .collect();
        let mut relationships: Vec<_> = truth
            .relationships
            .iter()
            .filter_map(|r| {
                Some(Triplet::new(*id_of.get(&r.subject)?, r.predicate.clone(), *id_of.get(&r.object)?))
            })
            .collect();
        for (h, id) in self.hallucinations(f, present.len()).into_iter().zip(halluc_ids) {
            if let Some(t) = h.target {
                relationships.push(Triplet::new(id, h.predicate, ids[t]));
            }
            objects.push(DetectedObject {
                local_id: id,
                class_label: h.label,
                bbox: h.bbox,
            });
        }
        objects.sort_by_key(|o| o.local_id);
        Ok(FrameSceneGraph {
            frame_index: f,
            objects,
            relationships,
        })
    }
}

/// Ground-truth masks, optionally grown or eroded, plus spurious part masks.
#[derive(Debug, Clone)]
pub struct SimGenerator {
    scenario: Arc<Scenario>,
    noise: NoiseProfile,
    seed: u64,
}

impl SimGenerator {
    pub fn new(scenario: Arc<Scenario>, noise: NoiseProfile, seed: u64) -> Self {
        SimGenerator { scenario, noise, seed }
    }

    fn spurious(&self, frame: usize, truth: &[(u64, Mask)]) -> Vec<Mask> {
        if self.noise.overseg_rate <= 0.0 {
            return Vec::new();
        }
        let (w, h) = (self.scenario.width, self.scenario.height);
        let n = poisson_free_count(&mut rng_for(self.seed, frame, Stream::Overseg, 0), self.noise.overseg_rate);
        (0..n)
            .filter_map(|k| {
                let mut rng = rng_for(self.seed, frame, Stream::Overseg, k as u64 + 1);
                if truth.is_empty() {
                    let bw = rng.random_range(1..=(w / 4).max(1));
                    let bh = rng.random_range(1..=(h / 4).max(1));
                    let x = rng.random_range(0..=w - bw);
                    let y = rng.random_range(0..=h - bh);
                    return Mask::from_bbox(w, h, &BBox::new(x, y, x + bw, y + bh).ok()?).ok();
                }
                // one half of a real object
                let (_, mask) = &truth[rng.random_range(0..truth.len())];
                let b = mask.bbox().ok()?;
                let (mx, my) = ((b.x_min() + b.x_max()) / 2, (b.y_min() + b.y_max()) / 2);
                let half = match rng.random_range(0..4) {
                    0 => BBox::new(b.x_min(), b.y_min(), mx, b.y_max()),
                    1 => BBox::new(mx, b.y_min(), b.x_max(), b.y_max()),
                    2 => BBox::new(b.x_min(), b.y_min(), b.x_max(), my),
                    _ => BBox::new(b.x_min(), my, b.x_max(), b.y_max()),
                }
                .ok()?;
                let part = Mask::from_bbox(w, h, &half).ok()?.intersection(mask).ok()?;
                (!part.is_empty()).then_some(part)
            })
            .collect()
    }
}

impl MaskGenerator for SimGenerator {
    fn generate_masks(&self, frame: &FrameRef) -> Result<Vec<Mask>, ProviderError> {
        check_frame(&self.scenario, frame)?;
        let f = frame.frame_index;
        let (w, h) = (self.scenario.width, self.scenario.height);
        let mut objects: Vec<_> = self.scenario.frames[f].visible().collect();
        objects.sort_by_key(|o| o.gt_id);
        let truth: Vec<(u64, Mask)> = objects
            .iter()
            .map(|o| (o.gt_id, o.shape.rasterize(w, h)))
            .collect();
        let mut out: Vec<Mask> = objects
            .iter()
            .filter_map(|o| o.shape.grown(self.noise.mask_margin))
            .map(|s| s.rasterize(w, h))
            .filter(|m| !m.is_empty())
            .collect();
        out.extend(self.spurious(f, &truth));
        Ok(out)
    }
}

#[derive(Debug, Clone)]
enum Anchor {
    /// Follows the ground-truth mask of this object.
    Whole(u64),
    /// A fragment moved rigidly with an object's box origin.
    Part { gt: u64, mask: Mask, origin: (i64, i64) },
    /// Not on any object; stays put.
    Static(Mask),
}

#[derive(Debug, Clone)]
struct Track {
    tid: TemporalId,
    anchor: Anchor,
    lost: bool,
}

/// Moves tracked masks to their object's ground-truth position.
#[derive(Debug, Clone)]
pub struct SimPropagator {
    scenario: Arc<Scenario>,
    noise: NoiseProfile,
    seed: u64,
    registry: TrackRegistry,
    tracks: Vec<Track>,
}

impl SimPropagator {
    pub fn new(scenario: Arc<Scenario>, noise: NoiseProfile, seed: u64) -> Self {
        SimPropagator {
            scenario,
            noise,
            seed,
            registry: TrackRegistry::default(),
            tracks: Vec::new(),
        }
    }

    fn gt_mask(&self, frame: usize, gt: u64) -> Option<Mask> {
        let o = self.scenario.frames[frame].visible().find(|o| o.gt_id == gt)?;
        Some(o.shape.rasterize(self.scenario.width, self.scenario.height))
    }

    fn anchor_for(&self, frame: usize, mask: &Mask) -> Anchor {
        let rendered = self.scenario.rasterize(frame);
        let mut best: Option<(u64, u64, &Mask)> = None;
        for (gt, m) in &rendered.masks {
            let inter = mask.intersection_area(m).unwrap_or(0);
            if inter > 0 && best.is_none_or(|(_, b, _)| inter > b) {
                best = Some((*gt, inter, m));
            }
        }
        match best {
            None => Anchor::Static(mask.clone()),
            Some((gt, _, m)) if mask.pixel_iou(m).map(|r| r.num() * 2 >= r.den()).unwrap_or(false) => {
                Anchor::Whole(gt)
            }
            Some((gt, _, m)) => {
                let b = m.bbox().unwrap();
                Anchor::Part {
                    gt,
                    mask: mask.clone(),
                    origin: (b.x_min() as i64, b.y_min() as i64),
                }
            }
        }
    }
}

impl MaskPropagator for SimPropagator {
    fn add_masks(&mut self, frame_index: usize, masks: &[Mask]) -> Result<(), ProviderError> {
        if frame_index >= self.scenario.len() {
            return Err(ProviderError::Unavailable(format!("no frame {frame_index}")));
        }
        self.registry.register(frame_index, masks)?;
        for m in masks {
            let anchor = self.anchor_for(frame_index, m);
            self.tracks.push(Track {
                tid: m.tid().unwrap(),
                anchor,
                lost: false,
            });
        }
        self.tracks.sort_by_key(|t| t.tid);
        Ok(())
    }

    fn propagate_to(&mut self, frame_index: usize) -> Result<Vec<Mask>, ProviderError> {
        self.registry.check_target(frame_index)?;
        if frame_index >= self.scenario.len() {
            return Err(ProviderError::Unavailable(format!("no frame {frame_index}")));
        }
        let f = frame_index;
        let mut out = Vec::new();
        for i in 0..self.tracks.len() {
            let track = &self.tracks[i];
            if track.lost {
                continue;
            }
            let tid = track.tid;
            let p = self.noise.track_loss_prob;
            if p > 0.0 && rng_for(self.seed, f, Stream::TrackLoss, tid.0).random_bool(p) {
                self.tracks[i].lost = true;
                continue;
            }
            let placed = match &track.anchor {
                Anchor::Whole(gt) => self.gt_mask(f, *gt),
                Anchor::Part { gt, mask, origin } => self.gt_mask(f, *gt).map(|m| {
                    let b = m.bbox().unwrap();
                    mask.translated(b.x_min() as i64 - origin.0, b.y_min() as i64 - origin.1)
                }),
                Anchor::Static(mask) => Some(mask.clone()),
            };
            let Some(mask) = placed else {
                // object out of view
                if !self.noise.revive_after_occlusion {
                    self.tracks[i].lost = true;
                }
                continue;
            };
            let mut rng = rng_for(self.seed, f, Stream::Drift, tid.0);
            let dx = gaussian_px(&mut rng, self.noise.drift_sigma);
            let dy = gaussian_px(&mut rng, self.noise.drift_sigma);
            let mask = mask.translated(dx, dy).with_tid(Some(tid));
            if !mask.is_empty() {
                out.push(mask);
            }
        }
        Ok(out)
    }
}
