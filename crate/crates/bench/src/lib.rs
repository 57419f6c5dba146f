//! Fixtures shared by the engine benchmarks.

use samjam_core::geometry::{Mask, TemporalId};
use samjam_core::graph::FrameSceneGraph;
use samjam_core::simulator::{canned, NoiseProfile, SimWorld};

/// A crowded simulated clip: `n` objects on a `size` x `size` grid.
pub fn crowd_world(n: u32, size: u32, frames: u32, noise: NoiseProfile) -> SimWorld {
    SimWorld::new(canned::crowd(n, size, size, frames), noise, 7).expect("crowd scenario is valid")
}

/// Ground-truth masks of one frame, tagged with their gt ids, and the
/// matching detector graph.
pub fn frame_fixture(world: &SimWorld, frame: usize) -> (Vec<Mask>, FrameSceneGraph) {
    let r = world.scenario().rasterize(frame);
    let masks = r
        .masks
        .into_iter()
        .map(|(gt, m)| m.with_tid(Some(TemporalId(gt))))
        .collect();
    (masks, r.graph)
}
