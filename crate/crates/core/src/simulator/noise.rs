use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::providers::ContextMode;

/// Whether detector ids are scrambled, per context mode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdScramble {
    pub current_frame: bool,
    pub last_graph: bool,
    pub all_graphs: bool,
}

impl IdScramble {
    pub const ALL: IdScramble = IdScramble {
        current_frame: true,
        last_graph: true,
        all_graphs: true,
    };

    pub fn get(&self, mode: ContextMode) -> bool {
        match mode {
            ContextMode::CurrentFrame => self.current_frame,
            ContextMode::LastGraph => self.last_graph,
            ContextMode::AllGraphs => self.all_graphs,
        }
    }
}

/// Corruption applied to ground truth to emulate detector, generator and
/// propagator failure modes. Every field defaults to "no noise".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseProfile {
    pub id_scramble: IdScramble,
    /// Std-dev of per-coordinate detector box jitter, in pixels.
    pub bbox_jitter_sigma: f64,
    pub label_flip_prob: f64,
    pub drop_prob: f64,
    /// Expected hallucinated detector objects per frame.
    pub halluc_rate: f64,
    /// Expected spurious part masks per frame from the generator.
    pub overseg_rate: f64,
    /// Generator dilation (positive) or erosion (negative), in pixels.
    pub mask_margin: i32,
    /// Per-frame probability that a propagated track is lost for good.
    pub track_loss_prob: f64,
    /// Std-dev of per-frame propagated mask displacement, in pixels.
    pub drift_sigma: f64,
    /// Whether a track resumes when its object comes back into view.
    pub revive_after_occlusion: bool,
    pub seed: u64,
}

impl Default for NoiseProfile {
    fn default() -> Self {
        NoiseProfile {
            id_scramble: IdScramble::default(),
            bbox_jitter_sigma: 0.0,
            label_flip_prob: 0.0,
            drop_prob: 0.0,
            halluc_rate: 0.0,
            overseg_rate: 0.0,
            mask_margin: 0,
            track_loss_prob: 0.0,
            drift_sigma: 0.0,
            revive_after_occlusion: true,
            seed: 0,
        }
    }
}

impl NoiseProfile {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Detector ids scrambled in every mode, everything else exact.
    pub fn churn() -> Self {
        NoiseProfile {
            id_scramble: IdScramble::ALL,
            ..Self::default()
        }
    }

    /// Mild corruption on every channel.
    pub fn realistic() -> Self {
        NoiseProfile {
            id_scramble: IdScramble::ALL,
            bbox_jitter_sigma: 1.5,
            label_flip_prob: 0.05,
            drop_prob: 0.05,
            halluc_rate: 0.3,
            overseg_rate: 1.0,
            mask_margin: 0,
            track_loss_prob: 0.02,
            drift_sigma: 0.5,
            revive_after_occlusion: true,
            seed: 0,
        }
    }

    pub fn canned(name: &str) -> Option<Self> {
        match name {
            "zero" => Some(Self::zero()),
            "churn" => Some(Self::churn()),
            "realistic" => Some(Self::realistic()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let probs = [
            ("label_flip_prob", self.label_flip_prob),
            ("drop_prob", self.drop_prob),
            ("track_loss_prob", self.track_loss_prob),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::InvalidNoise(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        let non_neg = [
            ("bbox_jitter_sigma", self.bbox_jitter_sigma),
            ("drift_sigma", self.drift_sigma),
            ("halluc_rate", self.halluc_rate),
            ("overseg_rate", self.overseg_rate),
        ];
        for (name, v) in non_neg {
            if !v.is_finite() || v < 0.0 {
                return Err(SimError::InvalidNoise(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Independent random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    DetectorDrop = 1,
    DetectorLabel = 2,
    DetectorJitter = 3,
    Hallucination = 4,
    IdPermutation = 5,
    Overseg = 6,
    TrackLoss = 7,
    Drift = 8,
}

/// ChaCha8 keyed directly by `(seed, frame, stream, item)`, so every draw is
/// addressable without replaying earlier ones and identical on every platform.
pub fn rng_for(seed: u64, frame: usize, stream: Stream, item: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(frame as u64).to_le_bytes());
    key[16..24].copy_from_slice(&(stream as u64).to_le_bytes());
    key[24..].copy_from_slice(&item.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// `floor(rate)` plus one more with probability `fract(rate)`.
pub fn poisson_free_count(rng: &mut impl Rng, rate: f64) -> usize {
    let whole = rate.floor();
    let extra = rng.random_bool((rate - whole).clamp(0.0, 1.0));
    whole as usize + extra as usize
}

/// Rounded zero-mean normal sample; zero when `sigma` is zero.
pub fn gaussian_px(rng: &mut impl Rng, sigma: f64) -> i64 {
    if sigma <= 0.0 {
        return 0;
    }
    Normal::new(0.0, sigma).expect("finite sigma").sample(rng).round() as i64
}
