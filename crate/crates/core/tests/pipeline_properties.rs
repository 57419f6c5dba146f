use std::collections::BTreeSet;
use std::sync::{Arc, Mutex};

use proptest::prelude::*;
use samjam_core::geometry::{mask_union, overlap_fraction, Mask, TemporalId};
use samjam_core::graph::{FrameRef, FrameSceneGraph};
use samjam_core::pipeline::{run, Method, PipelineConfig, RunOutput};
use samjam_core::providers::{ContextMode, DetectorContext, ProviderError, SceneGraphDetector};
use samjam_core::simulator::{canned, IdScramble, NoiseProfile, SimWorld};
use samjam_core::Ratio;

fn noise_strategy() -> impl Strategy<Value = NoiseProfile> {
    (
        any::<bool>(),
        0.0..3.0f64,
        0.0..0.3f64,
        0.0..0.3f64,
        0.0..1.5f64,
        0.0..2.0f64,
        -1i32..3,
        0.0..0.2f64,
        0.0..1.5f64,
        any::<bool>(),
    )
        .prop_map(
            |(scramble, jitter, flip, drop, halluc, overseg, margin, loss, drift, revive)| NoiseProfile {
                id_scramble: if scramble { IdScramble::ALL } else { IdScramble::default() },
                bbox_jitter_sigma: jitter,
                label_flip_prob: flip,
                drop_prob: drop,
                halluc_rate: halluc,
                overseg_rate: overseg,
                mask_margin: margin,
                track_loss_prob: loss,
                drift_sigma: drift,
                revive_after_occlusion: revive,
                seed: 0,
            },
        )
}

fn world(scenario: &str, noise: NoiseProfile, seed: u64) -> SimWorld {
    SimWorld::new(canned::by_name(scenario).unwrap(), noise, seed).unwrap()
}

fn run_world(w: &SimWorld, method: Method) -> RunOutput {
    run(&w.clip(), w.providers(), PipelineConfig::with_method(method)).unwrap()
}

fn tids(masks: &[Mask]) -> BTreeSet<TemporalId> {
    masks.iter().filter_map(Mask::tid).collect()
}

/// Checks the engine's per-frame bookkeeping on a finished run.
fn check_samjam_invariants(out: &RunOutput) -> Result<(), TestCaseError> {
    let overlap = PipelineConfig::default().overlap_threshold;
    let mut tracked: BTreeSet<TemporalId> = BTreeSet::new();
    let mut issued: BTreeSet<TemporalId> = BTreeSet::new();
    for (i, f) in out.frames.iter().enumerate() {
        let g = &f.graph;
        let t = &f.trace;
        prop_assert!(g.validate().is_ok(), "frame {i}: {:?}", g.validate());
        if i == 0 {
            prop_assert!(t.propagated.is_empty());
        }

        // Propagated masks survive into the candidate set untouched.
        let cand = tids(&t.candidates);
        prop_assert_eq!(cand.len(), t.candidates.len(), "candidate tids are unique");
        let prop = tids(&t.propagated);
        prop_assert!(prop.is_subset(&cand));
        prop_assert!(prop.is_subset(&tracked), "only tracked tids come back");

        // Fresh candidates never reuse a tid and were not covered by P.
        for m in t.candidates.iter().filter(|m| !prop.contains(&m.tid().unwrap())) {
            let tid = m.tid().unwrap();
            prop_assert!(issued.insert(tid), "tid {tid:?} issued twice");
            if !t.propagated.is_empty() {
                let union = mask_union(m.width(), m.height(), &t.propagated).unwrap();
                let frac = overlap_fraction(m, &union).unwrap();
                prop_assert!(frac < overlap, "kept a mask covered {frac:?}");
            }
        }
        for tid in &prop {
            issued.insert(*tid);
        }

        // Objects live on candidate masks, and carry them.
        for o in &g.objects {
            prop_assert!(cand.contains(&o.tid));
            let m = o.mask.as_ref().expect("samjam objects carry masks");
            prop_assert_eq!(m.tid(), Some(o.tid));
            prop_assert_eq!(m.bbox().unwrap(), o.bbox);
        }
        let present: BTreeSet<_> = g.objects.iter().map(|o| o.tid).collect();
        for r in &g.relationships {
            prop_assert!(present.contains(&r.subject) && present.contains(&r.object));
            prop_assert_ne!(r.subject, r.object);
        }

        // Newly tracked tids were matched this frame and never tracked before.
        let matches = t.matches.as_ref().expect("samjam frames have matches");
        let matched: BTreeSet<_> = matches.matched_tids().collect();
        for tid in &t.newly_tracked {
            prop_assert!(matched.contains(tid));
            prop_assert!(tracked.insert(*tid), "tid {tid:?} added twice");
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn samjam_bookkeeping_holds_under_noise(
        noise in noise_strategy(),
        seed in any::<u64>(),
        scenario in prop::sample::select(canned::NAMES.to_vec()),
    ) {
        let w = world(scenario, noise, seed);
        check_samjam_invariants(&run_world(&w, Method::Samjam))?;
    }

    #[test]
    fn temporal_ids_are_unique_per_frame_for_every_method(
        noise in noise_strategy(),
        seed in any::<u64>(),
        mode in prop::sample::select(ContextMode::ALL.to_vec()),
    ) {
        let w = world("swap", noise, seed);
        let out = run_world(&w, Method::Baseline(mode));
        for f in &out.frames {
            prop_assert!(f.graph.validate().is_ok());
            prop_assert!(f.graph.objects.iter().all(|o| o.mask.is_none()));
            prop_assert_eq!(f.graph.objects.len(), f.trace.detector_graph.objects.len());
        }
    }

    #[test]
    fn runs_are_deterministic(noise in noise_strategy(), seed in any::<u64>()) {
        let w = world("occlusion_return", noise, seed);
        prop_assert_eq!(
            run_world(&w, Method::Samjam).graphs_file().to_json(),
            run_world(&w, Method::Samjam).graphs_file().to_json()
        );
    }
}

type Seen = Arc<Mutex<Vec<(ContextMode, Vec<usize>)>>>;

/// Wraps a detector and records how much history it was shown.
struct Spy<D> {
    inner: D,
    seen: Seen,
}

impl<D: SceneGraphDetector> SceneGraphDetector for Spy<D> {
    fn generate(&self, frame: &FrameRef, ctx: &DetectorContext<'_>) -> Result<FrameSceneGraph, ProviderError> {
        let frames = ctx.history.iter().map(|g| g.frame_index).collect();
        self.seen.lock().unwrap().push((ctx.mode, frames));
        self.inner.generate(frame, ctx)
    }
}

fn spied(w: &SimWorld, method: Method) -> Vec<(ContextMode, Vec<usize>)> {
    let seen = Arc::new(Mutex::new(Vec::new()));
    let mut providers = w.providers();
    providers.detector = Box::new(Spy {
        inner: w.detector(),
        seen: seen.clone(),
    });
    run(&w.clip(), providers, PipelineConfig::with_method(method)).unwrap();
    let out = seen.lock().unwrap().clone();
    out
}

#[test]
fn detector_context_grows_per_mode() {
    let w = SimWorld::load("pick_up", "churn", 3).unwrap();
    for mode in ContextMode::ALL {
        let seen = spied(&w, Method::Baseline(mode));
        assert_eq!(seen.len(), w.clip().len());
        for (i, (m, frames)) in seen.iter().enumerate() {
            assert_eq!(*m, mode);
            let expected: Vec<usize> = match mode {
                ContextMode::CurrentFrame => vec![],
                ContextMode::LastGraph => i.checked_sub(1).into_iter().collect(),
                ContextMode::AllGraphs => (0..i).collect(),
            };
            assert_eq!(frames, &expected, "{mode:?} frame {i}");
        }
    }
    let seen = spied(&w, Method::Samjam);
    assert!(seen.iter().all(|(m, f)| *m == ContextMode::CurrentFrame && f.is_empty()));
}

#[test]
fn zero_noise_local_ids_are_a_permutation() {
    for name in canned::NAMES {
        let w = SimWorld::load(name, "zero", 9).unwrap();
        let out = run_world(&w, Method::Baseline(ContextMode::CurrentFrame));
        for f in &out.frames {
            let mut ids: Vec<u64> = f.trace.detector_graph.objects.iter().map(|o| o.local_id).collect();
            ids.sort();
            let n = ids.len() as u64;
            assert_eq!(ids, (1..=n).collect::<Vec<_>>(), "{name} frame {}", f.graph.frame_index);
        }
    }
}

#[test]
fn dropping_everything_gives_empty_graphs() {
    let noise = NoiseProfile {
        drop_prob: 1.0,
        ..NoiseProfile::zero()
    };
    let w = world("pick_up", noise, 1);
    for f in &run_world(&w, Method::Samjam).frames {
        assert!(f.trace.detector_graph.objects.is_empty());
        assert!(f.graph.objects.is_empty() && f.graph.relationships.is_empty());
    }
}

#[test]
fn oversegmentation_adds_masks() {
    let noise = NoiseProfile {
        overseg_rate: 4.0,
        ..NoiseProfile::zero()
    };
    let noisy = world("pick_up", noise, 2).generator();
    let clean = SimWorld::load("pick_up", "zero", 2).unwrap().generator();
    use samjam_core::providers::MaskGenerator;
    let mut extra = 0;
    for i in 0..11 {
        let frame = FrameRef::new("pick_up", i);
        let a = noisy.generate_masks(&frame).unwrap().len();
        let b = clean.generate_masks(&frame).unwrap().len();
        assert!(a >= b);
        extra += a - b;
    }
    assert!(extra >= 1);
}

#[test]
fn losing_every_track_empties_propagation() {
    let noise = NoiseProfile {
        track_loss_prob: 1.0,
        ..NoiseProfile::zero()
    };
    let w = world("swap", noise, 5);
    let out = run_world(&w, Method::Samjam);
    assert!(out.frames.iter().all(|f| f.trace.propagated.is_empty()));
    // Without tracking every frame starts over, so ids churn.
    let first: BTreeSet<_> = out.frames[0].graph.objects.iter().map(|o| o.tid).collect();
    let last: BTreeSet<_> = out.frames[10].graph.objects.iter().map(|o| o.tid).collect();
    assert!(first.is_disjoint(&last));
}

#[test]
fn small_drift_keeps_matches() {
    let noise = NoiseProfile {
        drift_sigma: 0.5,
        ..NoiseProfile::zero()
    };
    let w = world("pick_up", noise, 8);
    let out = run_world(&w, Method::Samjam);
    let threshold = PipelineConfig::default().iou_threshold;
    for f in &out.frames {
        let m = f.trace.matches.as_ref().unwrap();
        assert!(m.discarded_objects.is_empty(), "frame {}", f.graph.frame_index);
        assert!(m.pairs.iter().all(|p| p.iou > threshold));
    }
    let tids: BTreeSet<_> = out.frames.iter().flat_map(|f| f.graph.objects.iter().map(|o| o.tid)).collect();
    assert_eq!(tids.len(), 4);
}

#[test]
fn returning_object_keeps_its_tid() {
    let w = SimWorld::load("occlusion_return", "zero", 0).unwrap();
    let out = run_world(&w, Method::Samjam);
    let mug = |i: usize| {
        out.frames[i]
            .graph
            .objects
            .iter()
            .find(|o| o.class_label == "mug")
            .map(|o| o.tid)
    };
    assert!(mug(4).is_none() && mug(5).is_none());
    assert_eq!(mug(3), mug(6));
    assert!(mug(3).is_some());
}

#[test]
fn union_of_disjoint_masks_adds_areas() {
    let a = Mask::from_runs(4, 2, vec![0, 2, 6]).unwrap();
    let b = Mask::from_runs(4, 2, vec![4, 3, 1]).unwrap();
    let u = mask_union(4, 2, &[a.clone(), b.clone()]).unwrap();
    assert_eq!(u.area(), a.area() + b.area());
    assert_eq!(mask_union(4, 2, &[]).unwrap().area(), 0);
    assert_eq!(overlap_fraction(&a, &u).unwrap(), Ratio::new(1, 1));
}
