//! Scenarios shipped with the crate. All are 11 frames on a 128x96 grid,
//! except the parameterised [`crowd`].

use super::scenario::{FrameScript, Scenario, ScriptedObject, Shape};
use crate::graph::Triplet;

pub const NAMES: [&str; 3] = ["pick_up", "occlusion_return", "swap"];

const W: u32 = 128;
const H: u32 = 96;
const FRAMES: u32 = 11;

pub fn by_name(name: &str) -> Option<Scenario> {
    match name {
        "pick_up" => Some(pick_up()),
        "occlusion_return" => Some(occlusion_return()),
        "swap" => Some(swap()),
        _ => None,
    }
}

fn obj(gt_id: u64, label: &str, shape: Shape) -> ScriptedObject {
    ScriptedObject {
        gt_id,
        label: label.into(),
        shape,
        visible: true,
    }
}

fn hidden(gt_id: u64, label: &str) -> ScriptedObject {
    ScriptedObject {
        visible: false,
        ..obj(gt_id, label, Shape::Rect([0, 0, 1, 1]))
    }
}

fn scenario(name: &str, frame: impl Fn(u32) -> FrameScript) -> Scenario {
    Scenario {
        name: name.into(),
        width: W,
        height: H,
        frames: (0..FRAMES).map(frame).collect(),
    }
}

/// A hand reaches for a cereal bag on the counter and lifts it.
pub fn pick_up() -> Scenario {
    scenario("pick_up", |f| {
        let lift = f.saturating_sub(5) * 4;
        let hand_x = 100 - 10 * f.min(5);
        let bag = [40, 30 - lift, 56, 62 - lift];
        let mut relationships = vec![Triplet::new(4, "on", 1)];
        if f <= 5 {
            relationships.push(Triplet::new(2, "on", 1));
        }
        if (3..5).contains(&f) {
            relationships.push(Triplet::new(3, "near", 2));
        }
        if f >= 5 {
            relationships.push(Triplet::new(3, "holding", 2));
        }
        FrameScript {
            objects: vec![
                obj(1, "counter", Shape::Rect([0, 60, 128, 96])),
                obj(2, "cereal bag", Shape::Rect(bag)),
                obj(3, "hand", Shape::Ellipse([hand_x, 24 - lift, hand_x + 20, 48 - lift])),
                obj(4, "bowl", Shape::Ellipse([8, 44, 30, 64])),
            ],
            relationships,
        }
    })
}

/// A mug slides along the table, leaves view for frames 4-5 and returns.
pub fn occlusion_return() -> Scenario {
    scenario("occlusion_return", |f| {
        let mug = match f {
            0..=3 => Some([20 + 8 * f, 36, 36 + 8 * f, 58]),
            4 | 5 => None,
            _ => Some([70 + 2 * (f - 6), 36, 86 + 2 * (f - 6), 58]),
        };
        let mut relationships = vec![Triplet::new(3, "on", 1), Triplet::new(4, "above", 1)];
        if mug.is_some() {
            relationships.insert(0, Triplet::new(2, "on", 1));
        }
        FrameScript {
            objects: vec![
                obj(1, "table", Shape::Rect([0, 56, 128, 96])),
                match mug {
                    Some(b) => obj(2, "mug", Shape::Rect(b)),
                    None => hidden(2, "mug"),
                },
                obj(3, "spoon", Shape::Rect([100, 50, 120, 58])),
                obj(4, "hand", Shape::Ellipse([50, 4, 74, 30])),
            ],
            relationships,
        }
    })
}

/// Two cups of the same class cross paths above a table.
pub fn swap() -> Scenario {
    scenario("swap", |f| {
        let a = [10 + 10 * f, 30, 26 + 10 * f, 50];
        let b = [100 - 8 * f, 40, 116 - 8 * f, 60];
        let mut relationships = vec![
            Triplet::new(2, "on", 1),
            Triplet::new(3, "on", 1),
            Triplet::new(4, "on", 1),
        ];
        match f {
            0..=4 => relationships.push(Triplet::new(2, "left of", 3)),
            5 => {}
            _ => relationships.push(Triplet::new(3, "left of", 2)),
        }
        FrameScript {
            objects: vec![
                obj(1, "table", Shape::Rect([0, 64, 128, 96])),
                obj(2, "cup", Shape::Rect(a)),
                obj(3, "cup", Shape::Rect(b)),
                obj(4, "plate", Shape::Ellipse([50, 70, 80, 90])),
            ],
            relationships,
        }
    })
}

/// `n` drifting objects laid out on a grid, each related to its successor.
/// Used for load testing.
pub fn crowd(n: u32, width: u32, height: u32, frames: u32) -> Scenario {
    let cols = (n as f64).sqrt().ceil().max(1.0) as u32;
    let rows = n.div_ceil(cols);
    let (cw, ch) = (width / cols, height / rows.max(1));
    let size_w = (cw / 2).max(2);
    let size_h = (ch / 2).max(2);
    Scenario {
        name: format!("crowd_{n}"),
        width,
        height,
        frames: (0..frames)
            .map(|f| {
                let objects = (0..n)
                    .map(|i| {
                        let (c, r) = (i % cols, i / cols);
                        let travel = (cw - size_w).max(1);
                        let dx = (f * (1 + i % 3)) % travel;
                        let x0 = c * cw + dx;
                        let y0 = r * ch + (ch - size_h) / 2;
                        let b = [x0, y0, x0 + size_w, y0 + size_h];
                        let shape = if i % 2 == 0 { Shape::Rect(b) } else { Shape::Ellipse(b) };
                        obj(i as u64, ["cup", "plate", "knife", "bowl"][i as usize % 4], shape)
                    })
                    .collect();
                let relationships = (1..n as u64)
                    .map(|i| Triplet::new(i - 1, if i % 2 == 0 { "near" } else { "left of" }, i))
                    .collect();
                FrameScript { objects, relationships }
            })
            .collect(),
    }
}
