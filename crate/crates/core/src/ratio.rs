//! Exact non-negative rationals used for every IoU, overlap and recall value.
//!
//! Comparisons go through `u128` cross-multiplication so thresholds such as
//! `0.1` and `0.5` never suffer floating-point tie ambiguity.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Denominator used when converting a decimal threshold into a [`Ratio`].
const THRESHOLD_SCALE: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Ratio {
    num: u64,
    den: u64,
}

impl Ratio {
    pub const ZERO: Ratio = Ratio { num: 0, den: 1 };
    pub const ONE: Ratio = Ratio { num: 1, den: 1 };

    /// Panics if `den` is zero.
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den != 0, "ratio with zero denominator");
        Ratio { num, den }
    }

    /// Converts a decimal in `[0, 1]` to a ratio over one million, rounding to
    /// the nearest step. `0.1` becomes exactly `100000/1000000`.
    pub fn from_decimal(value: f64) -> Option<Self> {
        if !value.is_finite() || !(0.0..=1.0).contains(&value) {
            return None;
        }
        let num = (value * THRESHOLD_SCALE as f64).round() as u64;
        Some(Ratio::new(num, THRESHOLD_SCALE))
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    fn cross(&self, other: &Ratio) -> (u128, u128) {
        (
            self.num as u128 * other.den as u128,
            other.num as u128 * self.den as u128,
        )
    }
}

impl PartialEq for Ratio {
    fn eq(&self, other: &Self) -> bool {
        let (a, b) = self.cross(other);
        a == b
    }
}

impl Eq for Ratio {}

impl PartialOrd for Ratio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ratio {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = self.cross(other);
        a.cmp(&b)
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}
