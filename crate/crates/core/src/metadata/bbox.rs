use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeTuple, Serializer};
use serde::{Deserialize, Serialize};
use std::fmt;

use super::MetadataError;

/// Largest absolute coordinate accepted from input files.
pub const COORD_LIMIT: f64 = 1.0e9;

/// Axis-aligned rectangle in screenshot pixel space, stored as corner + size.
///
/// Serialized as `[x, y, w, h]`. Fractional input is rounded half-up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BBox {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

impl BBox {
    pub fn new(x: i64, y: i64, w: i64, h: i64) -> Self {
        assert!(w >= 0 && h >= 0, "negative bbox size {w}x{h}");
        BBox { x, y, w, h }
    }

    pub fn right(&self) -> i64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> i64 {
        self.y + self.h
    }

    pub fn area(&self) -> i64 {
        self.w * self.h
    }

    pub fn is_degenerate(&self) -> bool {
        self.area() == 0
    }

    pub fn center(&self) -> (f64, f64) {
        (
            self.x as f64 + self.w as f64 / 2.0,
            self.y as f64 + self.h as f64 / 2.0,
        )
    }

    /// Overlap with positive area; edge-touching boxes yield `None`.
    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        if x1 > x0 && y1 > y0 {
            Some(BBox::new(x0, y0, x1 - x0, y1 - y0))
        } else {
            None
        }
    }

    pub fn overlaps(&self, other: &BBox) -> bool {
        self.intersection(other).is_some()
    }

    pub fn union(&self, other: &BBox) -> BBox {
        let x0 = self.x.min(other.x);
        let y0 = self.y.min(other.y);
        let x1 = self.right().max(other.right());
        let y1 = self.bottom().max(other.bottom());
        BBox::new(x0, y0, x1 - x0, y1 - y0)
    }

    pub fn contains(&self, other: &BBox) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.right() <= self.right()
            && other.bottom() <= self.bottom()
    }

    /// Intersection over union. Two identical boxes score 1 even when degenerate.
    pub fn iou(&self, other: &BBox) -> f64 {
        if self == other {
            return 1.0;
        }
        let inter = bbox_intersection_area(self, other);
        let union = self.area() + other.area() - inter;
        if union <= 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Clamp into `bounds`. The result may be degenerate.
    pub fn clamp_to(&self, bounds: &BBox) -> BBox {
        let x0 = self.x.clamp(bounds.x, bounds.right());
        let y0 = self.y.clamp(bounds.y, bounds.bottom());
        let x1 = self.right().clamp(bounds.x, bounds.right());
        let y1 = self.bottom().clamp(bounds.y, bounds.bottom());
        BBox::new(x0, y0, x1 - x0, y1 - y0)
    }

    /// Reading-order key: top-left y, then x.
    pub fn reading_key(&self) -> (i64, i64) {
        (self.y, self.x)
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.x, self.y, self.w, self.h)
    }
}

/// Smallest rectangle containing every input box.
pub fn bbox_union(boxes: &[BBox]) -> Result<BBox, MetadataError> {
    let (first, rest) = boxes.split_first().ok_or(MetadataError::EmptyInput)?;
    Ok(rest.iter().fold(*first, |acc, b| acc.union(b)))
}

/// Area of strict (positive-area) overlap; 0 for disjoint or edge-touching boxes.
pub fn bbox_intersection_area(a: &BBox, b: &BBox) -> i64 {
    a.intersection(b).map_or(0, |i| i.area())
}

/// Round half-up to the integer pixel grid.
pub(crate) fn round_px(v: f64) -> Option<i64> {
    if !v.is_finite() || v.abs() > COORD_LIMIT {
        return None;
    }
    Some((v + 0.5).floor() as i64)
}

impl Serialize for BBox {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut t = serializer.serialize_tuple(4)?;
        t.serialize_element(&self.x)?;
        t.serialize_element(&self.y)?;
        t.serialize_element(&self.w)?;
        t.serialize_element(&self.h)?;
        t.end()
    }
}

impl<'de> Deserialize<'de> for BBox {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct BBoxVisitor;

        impl<'de> Visitor<'de> for BBoxVisitor {
            type Value = BBox;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an array [x, y, w, h]")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<BBox, A::Error> {
                let mut vals = [0i64; 4];
                for (i, slot) in vals.iter_mut().enumerate() {
                    let v: f64 = seq
                        .next_element()?
                        .ok_or_else(|| de::Error::invalid_length(i, &self))?;
                    *slot = round_px(v)
                        .ok_or_else(|| de::Error::custom(format!("coordinate {v} out of range")))?;
                }
                if seq.next_element::<de::IgnoredAny>()?.is_some() {
                    return Err(de::Error::invalid_length(5, &self));
                }
                let [x, y, w, h] = vals;
                if w < 0 || h < 0 {
                    return Err(de::Error::custom(format!("negative bbox size {w}x{h}")));
                }
                Ok(BBox { x, y, w, h })
            }
        }

        deserializer.deserialize_seq(BBoxVisitor)
    }
}
