//! Deterministic synthetic clips.
//!
//! A [`Scenario`] scripts ground-truth objects and relationships frame by
//! frame; a [`NoiseProfile`] corrupts them to stand in for a frame-level
//! detector, an automatic mask generator and a video mask propagator.

pub mod canned;
mod noise;
mod providers;
mod scenario;

use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

pub use noise::{rng_for, IdScramble, NoiseProfile, Stream};
pub use providers::{SimDetector, SimGenerator, SimPropagator};
pub use scenario::{FrameScript, Rendered, Scenario, ScriptedObject, Shape};

use crate::graph::{Clip, GraphsFile};
use crate::providers::Providers;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario at frame {frame}: {reason}")]
    InvalidScenario { frame: usize, reason: String },
    #[error("invalid noise profile: {0}")]
    InvalidNoise(String),
    #[error("{0:?} is neither a canned name nor a readable file: {1}")]
    Load(String, String),
}

fn load_json<T: serde::de::DeserializeOwned>(spec: &str) -> Result<T, SimError> {
    let text = std::fs::read_to_string(Path::new(spec))
        .map_err(|e| SimError::Load(spec.to_string(), e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| SimError::Load(spec.to_string(), e.to_string()))
}

/// Canned scenario name or path to a `scenario.json`.
pub fn load_scenario(spec: &str) -> Result<Scenario, SimError> {
    let s = match canned::by_name(spec) {
        Some(s) => s,
        None => load_json(spec)?,
    };
    s.validate()?;
    Ok(s)
}

/// Canned profile name (`zero`, `churn`, `realistic`) or path to a
/// `noise.json`.
pub fn load_noise(spec: &str) -> Result<NoiseProfile, SimError> {
    let n = match NoiseProfile::canned(spec) {
        Some(n) => n,
        None => load_json(spec)?,
    };
    n.validate()?;
    Ok(n)
}

/// A scenario, a noise profile and a seed: everything needed to build
/// simulated providers.
#[derive(Debug, Clone)]
pub struct SimWorld {
    scenario: Arc<Scenario>,
    noise: NoiseProfile,
    seed: u64,
}

impl SimWorld {
    pub fn new(scenario: Scenario, noise: NoiseProfile, seed: u64) -> Result<Self, SimError> {
        scenario.validate()?;
        noise.validate()?;
        Ok(SimWorld {
            scenario: Arc::new(scenario),
            noise,
            seed,
        })
    }

    pub fn load(scenario: &str, noise: &str, seed: u64) -> Result<Self, SimError> {
        SimWorld::new(load_scenario(scenario)?, load_noise(noise)?, seed)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn noise(&self) -> &NoiseProfile {
        &self.noise
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn clip(&self) -> Clip {
        Clip::with_len(self.scenario.name.clone(), self.scenario.len())
    }

    pub fn detector(&self) -> SimDetector {
        SimDetector::new(self.scenario.clone(), self.noise.clone(), self.seed)
    }

    pub fn generator(&self) -> SimGenerator {
        SimGenerator::new(self.scenario.clone(), self.noise.clone(), self.seed)
    }

    pub fn propagator(&self) -> SimPropagator {
        SimPropagator::new(self.scenario.clone(), self.noise.clone(), self.seed)
    }

    /// Fresh providers; the propagator starts with no tracks.
    pub fn providers(&self) -> Providers {
        Providers {
            detector: Box::new(self.detector()),
            generator: Box::new(self.generator()),
            propagator: Box::new(self.propagator()),
        }
    }

    pub fn ground_truth(&self) -> GraphsFile {
        self.scenario.ground_truth()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::FrameRef;
    use crate::providers::{ContextMode, DetectorContext, MaskGenerator, MaskPropagator, SceneGraphDetector};

    fn frame(world: &SimWorld, i: usize) -> FrameRef {
        world.clip().frames[i].clone()
    }

    fn ids_for(world: &SimWorld, mode: ContextMode, i: usize) -> Vec<(String, u64)> {
        let det = world.detector();
        let g = det.generate(&frame(world, i), &DetectorContext::new(mode, &[])).unwrap();
        let mut v: Vec<_> = g.objects.iter().map(|o| (o.class_label.clone(), o.local_id)).collect();
        v.sort();
        v
    }

    #[test]
    fn zero_noise_detector_reports_truth_up_to_ids() {
        let world = SimWorld::load("pick_up", "zero", 3).unwrap();
        for i in 0..world.scenario().len() {
            let truth = world.scenario().rasterize(i).graph;
            let got = world
                .detector()
                .generate(&frame(&world, i), &DetectorContext::current_frame())
                .unwrap();
            got.validate().unwrap();
            let mut a: Vec<_> = truth.objects.iter().map(|o| (o.class_label.clone(), o.bbox)).collect();
            let mut b: Vec<_> = got.objects.iter().map(|o| (o.class_label.clone(), o.bbox)).collect();
            a.sort();
            b.sort();
            assert_eq!(a, b);
            assert_eq!(truth.relationships.len(), got.relationships.len());
        }
    }

    #[test]
    fn churn_never_reuses_current_frame_ids() {
        let world = SimWorld::load("swap", "churn", 9).unwrap();
        let mut seen = std::collections::HashSet::new();
        for i in 0..world.scenario().len() {
            for (_, id) in ids_for(&world, ContextMode::CurrentFrame, i) {
                assert!(seen.insert(id), "id {id} reused at frame {i}");
            }
        }
    }

    #[test]
    fn churn_history_ids_break_only_for_returning_objects() {
        let world = SimWorld::load("occlusion_return", "churn", 5).unwrap();
        for mode in [ContextMode::LastGraph, ContextMode::AllGraphs] {
            let before = ids_for(&world, mode, 3);
            let after = ids_for(&world, mode, 6);
            let id = |v: &[(String, u64)], l: &str| v.iter().find(|(x, _)| x == l).unwrap().1;
            for l in ["table", "spoon", "hand"] {
                assert_eq!(id(&before, l), id(&after, l), "{mode:?} {l}");
            }
            assert_ne!(id(&before, "mug"), id(&after, "mug"), "{mode:?}");
        }
    }

    #[test]
    fn propagator_follows_objects() {
        let world = SimWorld::load("pick_up", "zero", 0).unwrap();
        let mut prop = world.propagator();
        let first = world.scenario().rasterize(0);
        let masks: Vec<_> = first
            .masks
            .iter()
            .map(|(gt, m)| m.clone().with_tid(Some(crate::geometry::TemporalId(*gt))))
            .collect();
        prop.add_masks(0, &masks).unwrap();
        let later = world.scenario().rasterize(7);
        let moved = prop.propagate_to(7).unwrap();
        assert_eq!(moved.len(), later.masks.len());
        for (m, (gt, truth)) in moved.iter().zip(&later.masks) {
            assert_eq!(m.tid(), Some(crate::geometry::TemporalId(*gt)));
            assert_eq!(m.runs(), truth.runs());
        }
        assert!(prop.propagate_to(0).is_err());
    }

    #[test]
    fn same_seed_same_output() {
        let a = SimWorld::load("swap", "realistic", 17).unwrap();
        let b = SimWorld::load("swap", "realistic", 17).unwrap();
        for i in 0..a.scenario().len() {
            let ctx = DetectorContext::new(ContextMode::AllGraphs, &[]);
            assert_eq!(
                a.detector().generate(&frame(&a, i), &ctx).unwrap(),
                b.detector().generate(&frame(&b, i), &ctx).unwrap()
            );
            assert_eq!(
                a.generator().generate_masks(&frame(&a, i)).unwrap(),
                b.generator().generate_masks(&frame(&b, i)).unwrap()
            );
        }
    }

    #[test]
    fn unknown_names_fail_to_load() {
        assert!(load_scenario("no_such_scenario").is_err());
        assert!(load_noise("no_such_noise").is_err());
    }
}
