use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::geometry::{BBox, Mask, TemporalId};
use crate::graph::{
    DetectedObject, FrameSceneGraph, GraphsFile, Relationship, TemporalObject, TemporalSceneGraph,
    Triplet,
};

/// Object outline inside its `[x0, y0, x1, y1]` box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Rect([u32; 4]),
    /// Ellipse inscribed in the box; a pixel is set when its centre lies
    /// inside or on the ellipse.
    Ellipse([u32; 4]),
}

impl Shape {
    pub fn bounds(&self) -> [u32; 4] {
        match *self {
            Shape::Rect(b) | Shape::Ellipse(b) => b,
        }
    }

    /// Same shape with every side pushed out by `margin` (in when negative).
    /// Returns `None` when erosion collapses it.
    pub fn grown(&self, margin: i32) -> Option<Shape> {
        let [x0, y0, x1, y1] = self.bounds().map(|v| v as i64);
        let m = margin as i64;
        let (x0, y0, x1, y1) = ((x0 - m).max(0), (y0 - m).max(0), x1 + m, y1 + m);
        if x0 >= x1 || y0 >= y1 {
            return None;
        }
        let b = [x0 as u32, y0 as u32, x1 as u32, y1 as u32];
        Some(match self {
            Shape::Rect(_) => Shape::Rect(b),
            Shape::Ellipse(_) => Shape::Ellipse(b),
        })
    }

    /// Row spans `(y, x0, x1)` of the filled shape, clipped to the frame.
    pub fn row_spans(&self, width: u32, height: u32) -> Vec<(u32, u32, u32)> {
        let [x0, y0, x1, y1] = self.bounds();
        let (cx1, cy1) = (x1.min(width), y1.min(height));
        let mut spans = Vec::new();
        if x0 >= cx1 || y0 >= cy1 {
            return spans;
        }
        match self {
            Shape::Rect(_) => spans.extend((y0..cy1).map(|y| (y, x0, cx1))),
            Shape::Ellipse(_) => {
                // doubled coordinates keep the test in integers
                let (cx, cy) = (x0 as i64 + x1 as i64, y0 as i64 + y1 as i64);
                let (rx, ry) = (x1 as i64 - x0 as i64, y1 as i64 - y0 as i64);
                let rhs = (rx * rx) as i128 * (ry * ry) as i128;
                for y in y0..cy1 {
                    let dy = (2 * y as i64 + 1 - cy) as i128;
                    let inside = |x: u32| {
                        let dx = (2 * x as i64 + 1 - cx) as i128;
                        dx * dx * (ry * ry) as i128 + dy * dy * (rx * rx) as i128 <= rhs
                    };
                    // rows of an ellipse are convex: find the first and last
                    // set pixel
                    let Some(first) = (x0..cx1).find(|&x| inside(x)) else {
                        continue;
                    };
                    let last = (first..cx1).rev().find(|&x| inside(x)).unwrap();
                    spans.push((y, first, last + 1));
                }
            }
        }
        spans
    }

    pub fn rasterize(&self, width: u32, height: u32) -> Mask {
        Mask::from_row_spans(width, height, self.row_spans(width, height))
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedObject {
    pub gt_id: u64,
    pub label: String,
    pub shape: Shape,
    #[serde(default = "default_true")]
    pub visible: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameScript {
    pub objects: Vec<ScriptedObject>,
    #[serde(default)]
    pub relationships: Vec<Relationship>,
}

impl FrameScript {
    pub fn visible(&self) -> impl Iterator<Item = &ScriptedObject> {
        self.objects.iter().filter(|o| o.visible)
    }

    pub fn is_visible(&self, gt_id: u64) -> bool {
        self.visible().any(|o| o.gt_id == gt_id)
    }
}

/// A scripted ground-truth clip.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub frames: Vec<FrameScript>,
}

/// Ground truth for one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rendered {
    /// Exact shape fills keyed by gt id, in gt id order.
    pub masks: Vec<(u64, Mask)>,
    /// Frame graph with gt ids as local ids and tight boxes.
    pub graph: FrameSceneGraph,
    /// Temporal graph with gt ids as temporal ids.
    pub temporal: TemporalSceneGraph,
}

impl Scenario {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let invalid = |frame: usize, reason: String| SimError::InvalidScenario { frame, reason };
        if self.width == 0 || self.height == 0 {
            return Err(invalid(0, "frame dimensions must be non-zero".into()));
        }
        if self.frames.is_empty() {
            return Err(invalid(0, "scenario has no frames".into()));
        }
        let mut labels: Vec<(u64, &str)> = Vec::new();
        for (i, f) in self.frames.iter().enumerate() {
            let mut ids = HashSet::new();
            for o in &f.objects {
                if !ids.insert(o.gt_id) {
                    return Err(invalid(i, format!("duplicate gt id {}", o.gt_id)));
                }
                if o.label.trim().is_empty() {
                    return Err(invalid(i, format!("object {} has an empty label", o.gt_id)));
                }
                match labels.iter().find(|(id, _)| *id == o.gt_id) {
                    Some((_, l)) if *l != o.label => {
                        return Err(invalid(i, format!("object {} changes label", o.gt_id)))
                    }
                    Some(_) => {}
                    None => labels.push((o.gt_id, &o.label)),
                }
                if !o.visible {
                    continue;
                }
                let [x0, y0, x1, y1] = o.shape.bounds();
                if BBox::new(x0, y0, x1, y1).map(|b| !b.fits_in(self.width, self.height)).unwrap_or(true) {
                    return Err(invalid(i, format!("object {} has out-of-bounds geometry", o.gt_id)));
                }
                if o.shape.rasterize(self.width, self.height).is_empty() {
                    return Err(invalid(i, format!("object {} rasterizes to nothing", o.gt_id)));
                }
            }
            let visible: HashSet<u64> = f.visible().map(|o| o.gt_id).collect();
            let mut seen = HashSet::new();
            for r in &f.relationships {
                if !visible.contains(&r.subject) || !visible.contains(&r.object) || r.subject == r.object {
                    return Err(invalid(i, format!("relationship {r:?} needs two distinct visible objects")));
                }
                if r.predicate.trim().is_empty() || !seen.insert(r) {
                    return Err(invalid(i, format!("bad or duplicate relationship {r:?}")));
                }
            }
        }
        Ok(())
    }

    pub fn rasterize(&self, frame_index: usize) -> Rendered {
        let script = &self.frames[frame_index];
        let mut visible: Vec<&ScriptedObject> = script.visible().collect();
        visible.sort_by_key(|o| o.gt_id);
        let masks: Vec<(u64, Mask)> = visible
            .iter()
            .map(|o| (o.gt_id, o.shape.rasterize(self.width, self.height)))
            .collect();
        let mut objects = Vec::new();
        let mut temporal_objects = Vec::new();
        for (o, (_, mask)) in visible.iter().zip(&masks) {
            let bbox = mask.bbox().expect("validated scenarios have non-empty objects");
            objects.push(DetectedObject {
                local_id: o.gt_id,
                class_label: o.label.clone(),
                bbox,
            });
            temporal_objects.push(TemporalObject {
                tid: TemporalId(o.gt_id),
                class_label: o.label.clone(),
                bbox,
                mask: Some(mask.clone().with_tid(Some(TemporalId(o.gt_id)))),
            });
        }
        Rendered {
            masks,
            graph: FrameSceneGraph {
                frame_index,
                objects,
                relationships: script.relationships.clone(),
            },
            temporal: TemporalSceneGraph {
                frame_index,
                objects: temporal_objects,
                relationships: script
                    .relationships
                    .iter()
                    .map(|r| Triplet::new(TemporalId(r.subject), r.predicate.clone(), TemporalId(r.object)))
                    .collect(),
            },
        }
    }

    pub fn ground_truth(&self) -> GraphsFile {
        GraphsFile {
            clip: self.name.clone(),
            frames: (0..self.len()).map(|i| self.rasterize(i).temporal).collect(),
        }
    }

    /// Every class label, sorted.
    pub fn label_vocabulary(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self
            .frames
            .iter()
            .flat_map(|f| f.objects.iter().map(|o| o.label.as_str()))
            .collect();
        set.into_iter().map(str::to_string).collect()
    }

    pub fn predicate_vocabulary(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self
            .frames
            .iter()
            .flat_map(|f| f.relationships.iter().map(|r| r.predicate.as_str()))
            .collect();
        set.into_iter().map(str::to_string).collect()
    }

    pub fn max_gt_id(&self) -> u64 {
        self.frames
            .iter()
            .flat_map(|f| f.objects.iter().map(|o| o.gt_id))
            .max()
            .unwrap_or(0)
    }
}
