//! Binary masks and bounding boxes.
//!
//! Masks are stored as row-major run-length encodings over a fixed frame grid.
//! The first run always counts background pixels (it may be zero), runs then
//! alternate background/foreground, and every run after the first is non-zero.
//! That makes the encoding canonical: two masks with the same pixels have the
//! same `runs`.
//!
//! Boxes use inclusive-min / exclusive-max integer pixel coordinates.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ratio::Ratio;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("mask has no set pixels")]
    EmptyMask,
    #[error("mask dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("malformed RLE: runs sum to {sum}, expected {expected}")]
    MalformedRle { sum: u64, expected: u64 },
    #[error("frame dimensions must be non-zero, got {0}x{1}")]
    ZeroDimension(u32, u32),
    #[error("invalid bounding box [{0}, {1}, {2}, {3}]")]
    InvalidBBox(u32, u32, u32, u32),
}

/// Video-global identifier of a tracked mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TemporalId(pub u64);

impl fmt::Display for TemporalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[u32; 4]", into = "[u32; 4]")]
pub struct BBox {
    x_min: u32,
    y_min: u32,
    x_max: u32,
    y_max: u32,
}

impl BBox {
    pub fn new(x_min: u32, y_min: u32, x_max: u32, y_max: u32) -> Result<Self, GeometryError> {
        if x_min >= x_max || y_min >= y_max {
            return Err(GeometryError::InvalidBBox(x_min, y_min, x_max, y_max));
        }
        Ok(BBox {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn x_min(&self) -> u32 {
        self.x_min
    }
    pub fn y_min(&self) -> u32 {
        self.y_min
    }
    pub fn x_max(&self) -> u32 {
        self.x_max
    }
    pub fn y_max(&self) -> u32 {
        self.y_max
    }

    pub fn width(&self) -> u32 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> u32 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    pub fn fits_in(&self, width: u32, height: u32) -> bool {
        self.x_max <= width && self.y_max <= height
    }

    pub fn contains_pixel(&self, x: u32, y: u32) -> bool {
        x >= self.x_min && x < self.x_max && y >= self.y_min && y < self.y_max
    }

    pub fn intersection_area(&self, other: &BBox) -> u64 {
        let w = self.x_max.min(other.x_max).saturating_sub(self.x_min.max(other.x_min));
        let h = self.y_max.min(other.y_max).saturating_sub(self.y_min.max(other.y_min));
        w as u64 * h as u64
    }

    /// Builds a box from signed corners, clamping into `width x height` and
    /// widening degenerate results to at least one pixel.
    pub fn clamped(x0: i64, y0: i64, x1: i64, y1: i64, width: u32, height: u32) -> BBox {
        let (x0, x1) = clamp_span(x0.min(x1), x0.max(x1), width);
        let (y0, y1) = clamp_span(y0.min(y1), y0.max(y1), height);
        BBox {
            x_min: x0,
            y_min: y0,
            x_max: x1,
            y_max: y1,
        }
    }
}

fn clamp_span(lo: i64, hi: i64, limit: u32) -> (u32, u32) {
    let limit = limit as i64;
    let lo = lo.clamp(0, limit - 1);
    let hi = hi.clamp(lo + 1, limit);
    (lo as u32, hi as u32)
}

impl TryFrom<[u32; 4]> for BBox {
    type Error = GeometryError;

    fn try_from(v: [u32; 4]) -> Result<Self, Self::Error> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [u32; 4] {
    fn from(b: BBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

/// Intersection over union of two boxes as an exact ratio.
pub fn bbox_iou(a: &BBox, b: &BBox) -> Ratio {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    Ratio::new(inter, union)
}

/// Uncompressed row-major bitmap, mostly useful for tests and I/O.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitmap {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl Bitmap {
    pub fn new(width: u32, height: u32) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::ZeroDimension(width, height));
        }
        Ok(Bitmap {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        })
    }

    pub fn from_fn(
        width: u32,
        height: u32,
        mut f: impl FnMut(u32, u32) -> bool,
    ) -> Result<Self, GeometryError> {
        let mut bitmap = Bitmap::new(width, height)?;
        for y in 0..height {
            for x in 0..width {
                bitmap.set(x, y, f(x, y));
            }
        }
        Ok(bitmap)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[(y * self.width + x) as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.bits[(y * self.width + x) as usize] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MaskJson", into = "MaskJson")]
pub struct Mask {
    width: u32,
    height: u32,
    runs: Vec<u64>,
    tid: Option<TemporalId>,
}

#[derive(Serialize, Deserialize)]
struct MaskJson {
    tid: Option<TemporalId>,
    width: u32,
    height: u32,
    runs: Vec<u64>,
}

impl TryFrom<MaskJson> for Mask {
    type Error = GeometryError;

    fn try_from(m: MaskJson) -> Result<Self, Self::Error> {
        Ok(Mask::from_runs(m.width, m.height, m.runs)?.with_tid(m.tid))
    }
}

impl From<Mask> for MaskJson {
    fn from(m: Mask) -> Self {
        MaskJson {
            tid: m.tid,
            width: m.width,
            height: m.height,
            runs: m.runs,
        }
    }
}

impl Mask {
    /// Validates and canonicalises a run list. Zero-length runs after the
    /// first are merged away.
    pub fn from_runs(width: u32, height: u32, runs: Vec<u64>) -> Result<Self, GeometryError> {
        check_dims(width, height)?;
        let expected = width as u64 * height as u64;
        let sum = runs.iter().try_fold(0u64, |acc, r| acc.checked_add(*r));
        match sum {
            Some(sum) if sum == expected => {}
            sum => {
                return Err(GeometryError::MalformedRle {
                    sum: sum.unwrap_or(u64::MAX),
                    expected,
                })
            }
        }
        let intervals: Vec<_> = runs_to_intervals(&runs).collect();
        Ok(Mask::from_sorted_intervals(width, height, intervals))
    }

    pub fn empty(width: u32, height: u32) -> Result<Self, GeometryError> {
        check_dims(width, height)?;
        Ok(Mask::from_sorted_intervals(width, height, std::iter::empty()))
    }

    pub fn full(width: u32, height: u32) -> Result<Self, GeometryError> {
        check_dims(width, height)?;
        let total = width as u64 * height as u64;
        Ok(Mask::from_sorted_intervals(width, height, [(0, total)]))
    }

    /// Fills a box. The box is clipped to the frame.
    pub fn from_bbox(width: u32, height: u32, bbox: &BBox) -> Result<Self, GeometryError> {
        check_dims(width, height)?;
        let x1 = bbox.x_max.min(width);
        let y1 = bbox.y_max.min(height);
        let spans = (bbox.y_min..y1)
            .filter(|_| bbox.x_min < x1)
            .map(|y| (y, bbox.x_min, x1));
        Ok(Mask::from_row_spans(width, height, spans))
    }

    /// Builds a mask from per-row `[x0, x1)` spans. Rows must be ascending and
    /// spans within one row non-overlapping and ascending. Spans are clipped
    /// to the frame width.
    pub fn from_row_spans(
        width: u32,
        height: u32,
        spans: impl IntoIterator<Item = (u32, u32, u32)>,
    ) -> Self {
        let w = width as u64;
        let intervals = spans.into_iter().filter_map(move |(y, x0, x1)| {
            let x1 = x1.min(width);
            (y < height && x0 < x1).then(|| (y as u64 * w + x0 as u64, y as u64 * w + x1 as u64))
        });
        Mask::from_sorted_intervals(width, height, intervals)
    }

    /// `intervals` must be sorted, non-overlapping `[start, end)` pixel index
    /// ranges. Adjacent intervals are merged.
    fn from_sorted_intervals(
        width: u32,
        height: u32,
        intervals: impl IntoIterator<Item = (u64, u64)>,
    ) -> Self {
        let total = width as u64 * height as u64;
        let mut runs = Vec::new();
        let mut pos = 0u64;
        for (start, end) in intervals {
            if end <= start {
                continue;
            }
            debug_assert!(start >= pos && end <= total);
            if start == pos && !runs.is_empty() {
                *runs.last_mut().unwrap() += end - start;
            } else {
                runs.push(start - pos);
                runs.push(end - start);
            }
            pos = end;
        }
        if pos < total {
            runs.push(total - pos);
        }
        Mask {
            width,
            height,
            runs,
            tid: None,
        }
    }

    pub fn with_tid(mut self, tid: Option<TemporalId>) -> Self {
        self.tid = tid;
        self
    }

    pub fn set_tid(&mut self, tid: TemporalId) {
        self.tid = Some(tid);
    }

    pub fn tid(&self) -> Option<TemporalId> {
        self.tid
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn runs(&self) -> &[u64] {
        &self.runs
    }

    /// Foreground pixel ranges as `[start, end)` row-major indices.
    pub fn intervals(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        runs_to_intervals(&self.runs)
    }

    pub fn area(&self) -> u64 {
        self.runs.iter().skip(1).step_by(2).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.area() == 0
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        let idx = y as u64 * self.width as u64 + x as u64;
        self.intervals()
            .take_while(|&(s, _)| s <= idx)
            .any(|(s, e)| idx >= s && idx < e)
    }

    /// Tightest box containing every set pixel.
    pub fn bbox(&self) -> Result<BBox, GeometryError> {
        let w = self.width as u64;
        let mut bounds: Option<(u64, u64, u64, u64)> = None;
        for (start, end) in self.intervals() {
            let (y0, y1) = (start / w, (end - 1) / w);
            let (x0, x1) = if y0 == y1 {
                (start % w, (end - 1) % w + 1)
            } else {
                // a run crossing a row boundary touches both the last and the
                // first column
                (0, w)
            };
            bounds = Some(match bounds {
                None => (x0, y0, x1, y1 + 1),
                Some((bx0, by0, bx1, by1)) => (bx0.min(x0), by0.min(y0), bx1.max(x1), by1.max(y1 + 1)),
            });
        }
        let (x0, y0, x1, y1) = bounds.ok_or(GeometryError::EmptyMask)?;
        BBox::new(x0 as u32, y0 as u32, x1 as u32, y1 as u32)
    }

    fn check_same_dims(&self, other: &Mask) -> Result<(), GeometryError> {
        if self.width != other.width || self.height != other.height {
            return Err(GeometryError::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    fn intersect_intervals(&self, other: &Mask) -> Vec<(u64, u64)> {
        let mut a = self.intervals().peekable();
        let mut b = other.intervals().peekable();
        let mut out = Vec::new();
        while let (Some(&(a0, a1)), Some(&(b0, b1))) = (a.peek(), b.peek()) {
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if hi > lo {
                out.push((lo, hi));
            }
            if a1 <= b1 {
                a.next();
            } else {
                b.next();
            }
        }
        out
    }

    pub fn intersection_area(&self, other: &Mask) -> Result<u64, GeometryError> {
        self.check_same_dims(other)?;
        Ok(self.intersect_intervals(other).iter().map(|(s, e)| e - s).sum())
    }

    /// Pixelwise AND, keeping `self`'s temporal id.
    pub fn intersection(&self, other: &Mask) -> Result<Mask, GeometryError> {
        self.check_same_dims(other)?;
        let intervals = self.intersect_intervals(other);
        Ok(Mask::from_sorted_intervals(self.width, self.height, intervals).with_tid(self.tid))
    }

    /// Pixel IoU, used only by the simulator; matching works on boxes.
    pub fn pixel_iou(&self, other: &Mask) -> Result<Ratio, GeometryError> {
        let inter = self.intersection_area(other)?;
        let union = self.area() + other.area() - inter;
        Ok(if union == 0 { Ratio::ZERO } else { Ratio::new(inter, union) })
    }

    /// Shifts the mask by `(dx, dy)`, dropping pixels that leave the frame.
    /// The temporal ID is kept.
    pub fn translated(&self, dx: i64, dy: i64) -> Mask {
        let w = self.width as i64;
        let h = self.height as i64;
        let mut spans = Vec::new();
        for (start, end) in self.intervals() {
            let (start, end) = (start as i64, end as i64);
            let mut row = start / w;
            while row * w < end {
                let x0 = (start.max(row * w) - row * w) + dx;
                let x1 = (end.min((row + 1) * w) - row * w) + dx;
                let y = row + dy;
                let (x0, x1) = (x0.max(0), x1.min(w));
                if (0..h).contains(&y) && x0 < x1 {
                    spans.push((y as u32, x0 as u32, x1 as u32));
                }
                row += 1;
            }
        }
        Mask::from_row_spans(self.width, self.height, spans).with_tid(self.tid)
    }

    pub fn to_bitmap(&self) -> Bitmap {
        rle_decode(self)
    }
}

fn check_dims(width: u32, height: u32) -> Result<(), GeometryError> {
    if width == 0 || height == 0 {
        Err(GeometryError::ZeroDimension(width, height))
    } else {
        Ok(())
    }
}

fn runs_to_intervals(runs: &[u64]) -> impl Iterator<Item = (u64, u64)> + '_ {
    let mut pos = 0u64;
    runs.iter().enumerate().filter_map(move |(i, &len)| {
        let start = pos;
        pos += len;
        (i % 2 == 1 && len > 0).then_some((start, pos))
    })
}

pub fn mask_area(mask: &Mask) -> u64 {
    mask.area()
}

pub fn mask_to_bbox(mask: &Mask) -> Result<BBox, GeometryError> {
    mask.bbox()
}

/// Pixelwise OR. The union of no masks is the empty `width x height` mask.
pub fn mask_union(width: u32, height: u32, masks: &[Mask]) -> Result<Mask, GeometryError> {
    check_dims(width, height)?;
    let mut intervals = Vec::new();
    for m in masks {
        if m.width != width || m.height != height {
            return Err(GeometryError::DimensionMismatch(width, height, m.width, m.height));
        }
        intervals.extend(m.intervals());
    }
    intervals.sort_unstable();
    let mut merged: Vec<(u64, u64)> = Vec::with_capacity(intervals.len());
    for (s, e) in intervals {
        match merged.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    Ok(Mask::from_sorted_intervals(width, height, merged))
}

/// Fraction of `mask` covered by `cover`: `|mask ∩ cover| / |mask|`.
pub fn overlap_fraction(mask: &Mask, cover: &Mask) -> Result<Ratio, GeometryError> {
    let inter = mask.intersection_area(cover)?;
    let area = mask.area();
    if area == 0 {
        return Err(GeometryError::EmptyMask);
    }
    Ok(Ratio::new(inter, area))
}

pub fn rle_encode(bitmap: &Bitmap) -> Mask {
    let mut intervals = Vec::new();
    let mut start = None;
    for (i, &bit) in bitmap.bits.iter().enumerate() {
        match (bit, start) {
            (true, None) => start = Some(i as u64),
            (false, Some(s)) => {
                intervals.push((s, i as u64));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        intervals.push((s, bitmap.bits.len() as u64));
    }
    Mask::from_sorted_intervals(bitmap.width, bitmap.height, intervals)
}

pub fn rle_decode(mask: &Mask) -> Bitmap {
    let mut bits = vec![false; mask.width as usize * mask.height as usize];
    for (s, e) in mask.intervals() {
        bits[s as usize..e as usize].fill(true);
    }
    Bitmap {
        width: mask.width,
        height: mask.height,
        bits,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(x0: u32, y0: u32, x1: u32, y1: u32) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn iou_examples() {
        let a = bb(0, 0, 10, 10);
        assert_eq!(bbox_iou(&a, &a), Ratio::ONE);
        assert_eq!(bbox_iou(&a, &bb(20, 20, 30, 30)), Ratio::ZERO);
        // pixel counting on the 15x10 grid: 50 shared, 150 covered
        let b = bb(5, 0, 15, 10);
        let (mut inter, mut union) = (0, 0);
        for y in 0..10 {
            for x in 0..15 {
                let (ia, ib) = (a.contains_pixel(x, y), b.contains_pixel(x, y));
                inter += (ia && ib) as u64;
                union += (ia || ib) as u64;
            }
        }
        assert_eq!((inter, union), (50, 150));
        assert_eq!(bbox_iou(&a, &b), Ratio::new(1, 3));
    }

    #[test]
    fn bbox_rejects_degenerate() {
        assert_eq!(BBox::new(3, 3, 3, 5), Err(GeometryError::InvalidBBox(3, 3, 3, 5)));
        assert!(serde_json::from_str::<BBox>("[5,0,2,4]").is_err());
    }

    #[test]
    fn area_and_bbox_basics() {
        assert_eq!(Mask::empty(8, 8).unwrap().area(), 0);
        assert_eq!(Mask::full(8, 8).unwrap().area(), 64);
        assert_eq!(Mask::full(8, 8).unwrap().bbox().unwrap(), bb(0, 0, 8, 8));
        let single = Mask::from_row_spans(8, 8, [(4, 3, 4)]);
        assert_eq!(single.bbox().unwrap(), bb(3, 4, 4, 5));
        assert_eq!(Mask::empty(8, 8).unwrap().bbox(), Err(GeometryError::EmptyMask));
    }

    #[test]
    fn rle_conventions() {
        let b = Bitmap::from_fn(4, 1, |x, _| x == 1 || x == 2).unwrap();
        assert_eq!(rle_encode(&b).runs(), &[1, 2, 1]);
        let ones = Bitmap::from_fn(2, 2, |_, _| true).unwrap();
        assert_eq!(rle_encode(&ones).runs(), &[0, 4]);
        assert_eq!(
            Mask::from_runs(2, 2, vec![1, 2]),
            Err(GeometryError::MalformedRle { sum: 3, expected: 4 })
        );
    }

    #[test]
    fn from_runs_canonicalises_zero_runs() {
        let m = Mask::from_runs(3, 2, vec![1, 2, 0, 1, 2]).unwrap();
        assert_eq!(m.runs(), &[1, 3, 2]);
    }

    #[test]
    fn union_examples() {
        assert!(mask_union(8, 8, &[]).unwrap().is_empty());
        let m = Mask::from_row_spans(8, 8, [(1, 1, 4), (2, 2, 6)]);
        assert_eq!(mask_union(8, 8, &[m.clone(), m.clone()]).unwrap(), m);
        let other = Mask::from_row_spans(8, 8, [(6, 0, 8)]);
        let u = mask_union(8, 8, &[m.clone(), other.clone()]).unwrap();
        assert_eq!(u.area(), m.area() + other.area());
        let wrong = Mask::empty(4, 4).unwrap();
        assert!(matches!(
            mask_union(8, 8, &[wrong]),
            Err(GeometryError::DimensionMismatch(..))
        ));
    }

    #[test]
    fn overlap_examples() {
        let row = Mask::from_row_spans(16, 2, [(0, 0, 10)]);
        let half = Mask::from_row_spans(16, 2, [(0, 5, 16)]);
        assert_eq!(overlap_fraction(&row, &half).unwrap(), Ratio::new(1, 2));
        let sup = Mask::full(16, 2).unwrap();
        assert_eq!(overlap_fraction(&row, &sup).unwrap(), Ratio::ONE);
        let disjoint = Mask::from_row_spans(16, 2, [(1, 0, 16)]);
        assert_eq!(overlap_fraction(&row, &disjoint).unwrap(), Ratio::ZERO);
        let empty = Mask::empty(16, 2).unwrap();
        assert_eq!(overlap_fraction(&empty, &row), Err(GeometryError::EmptyMask));
    }

    #[test]
    fn translation_clips_and_keeps_tid() {
        let m = Mask::from_bbox(10, 10, &bb(2, 2, 6, 6))
            .unwrap()
            .with_tid(Some(TemporalId(7)));
        let t = m.translated(5, 0);
        assert_eq!(t.bbox().unwrap(), bb(7, 2, 10, 6));
        assert_eq!(t.area(), 12);
        assert_eq!(t.tid(), Some(TemporalId(7)));
        assert!(m.translated(20, 0).is_empty());
        assert_eq!(m.translated(-2, -2).bbox().unwrap(), bb(0, 0, 4, 4));
    }

    #[test]
    fn mask_json_shape() {
        let m = Mask::from_row_spans(4, 1, [(0, 1, 3)]).with_tid(Some(TemporalId(3)));
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, r#"{"tid":3,"width":4,"height":1,"runs":[1,2,1]}"#);
        assert_eq!(serde_json::from_str::<Mask>(&json).unwrap(), m);
        assert!(serde_json::from_str::<Mask>(r#"{"tid":null,"width":4,"height":1,"runs":[1]}"#).is_err());
    }

    fn bitmap_strategy() -> impl Strategy<Value = Bitmap> {
        (1u32..24, 1u32..24).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<bool>(), (w * h) as usize).prop_map(move |bits| Bitmap {
                width: w,
                height: h,
                bits,
            })
        })
    }

    proptest! {
        #[test]
        fn rle_round_trip(b in bitmap_strategy()) {
            let m = rle_encode(&b);
            prop_assert_eq!(rle_decode(&m), b);
            prop_assert!(m.runs().iter().skip(1).all(|&r| r > 0));
        }

        #[test]
        fn iou_symmetric_and_bounded(
            a in (0u32..30, 0u32..30, 1u32..20, 1u32..20),
            b in (0u32..30, 0u32..30, 1u32..20, 1u32..20),
        ) {
            let a = bb(a.0, a.1, a.0 + a.2, a.1 + a.3);
            let b = bb(b.0, b.1, b.0 + b.2, b.1 + b.3);
            prop_assert_eq!(bbox_iou(&a, &b), bbox_iou(&b, &a));
            prop_assert!(bbox_iou(&a, &b) <= Ratio::ONE);
            prop_assert_eq!(bbox_iou(&a, &a), Ratio::ONE);
        }

        #[test]
        fn bbox_is_tight(b in bitmap_strategy()) {
            let m = rle_encode(&b);
            match m.bbox() {
                Err(_) => prop_assert!(b.bits().iter().all(|&x| !x)),
                Ok(bx) => {
                    let set: Vec<(u32, u32)> = (0..b.height())
                        .flat_map(|y| (0..b.width()).map(move |x| (x, y)))
                        .filter(|&(x, y)| b.get(x, y))
                        .collect();
                    prop_assert!(set.iter().all(|&(x, y)| bx.contains_pixel(x, y)));
                    prop_assert!(set.iter().any(|&(x, _)| x == bx.x_min()));
                    prop_assert!(set.iter().any(|&(x, _)| x + 1 == bx.x_max()));
                    prop_assert!(set.iter().any(|&(_, y)| y == bx.y_min()));
                    prop_assert!(set.iter().any(|&(_, y)| y + 1 == bx.y_max()));
                }
            }
        }

        #[test]
        fn translation_matches_pixel_shift(b in bitmap_strategy(), dx in -6i64..6, dy in -6i64..6) {
            let m = rle_encode(&b);
            let t = m.translated(dx, dy).to_bitmap();
            for y in 0..b.height() {
                for x in 0..b.width() {
                    let sx = x as i64 - dx;
                    let sy = y as i64 - dy;
                    let expect = sx >= 0 && sy >= 0 && sx < b.width() as i64 && sy < b.height() as i64
                        && b.get(sx as u32, sy as u32);
                    prop_assert_eq!(t.get(x, y), expect);
                }
            }
        }
    }
}
