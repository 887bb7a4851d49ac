//! Shared geometric and dataset primitives.
//!
//! Boxes are stored as corner pairs with the y axis growing downward in both
//! views. Pixel coordinates are real-valued.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frame size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameDims {
    pub width: u32,
    pub height: u32,
}

impl Default for FrameDims {
    fn default() -> Self {
        Self {
            width: 1920,
            height: 1080,
        }
    }
}

impl FrameDims {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Config(format!(
                "frame dimensions must be positive, got {width}x{height}"
            )));
        }
        Ok(Self { width, height })
    }

    pub fn w(&self) -> f64 {
        self.width as f64
    }

    pub fn h(&self) -> f64 {
        self.height as f64
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.w()).contains(&x) && (0.0..=self.h()).contains(&y)
    }
}

impl fmt::Display for FrameDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

impl FromStr for FrameDims {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (w, h) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| Error::Config(format!("expected WIDTHxHEIGHT, got {s:?}")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<u32>()
                .map_err(|e| Error::Config(format!("bad frame dimension {v:?}: {e}")))
        };
        FrameDims::new(parse(w)?, parse(h)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Space {
    Pixel,
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum View {
    Frontal,
    Birdeye,
}

/// A 2D point in pixel or normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned rectangle tagged with its coordinate space and view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub space: Space,
    pub view: View,
}

impl BBox {
    /// Builds a box, checking corner ordering and (for normalized boxes) range.
    pub fn new(
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
        space: Space,
        view: View,
    ) -> Result<Self> {
        let coords = [x_min, y_min, x_max, y_max];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidBox(format!("non-finite coordinate in {coords:?}")));
        }
        if x_min > x_max || y_min > y_max {
            return Err(Error::InvalidBox(format!(
                "corners out of order: ({x_min}, {y_min}, {x_max}, {y_max})"
            )));
        }
        if space == Space::Normalized && coords.iter().any(|c| c.abs() > 1.0) {
            return Err(Error::InvalidBox(format!(
                "normalized coordinates outside [-1, 1]: {coords:?}"
            )));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
            space,
            view,
        })
    }

    pub fn pixel(view: View, coords: [f64; 4]) -> Result<Self> {
        Self::new(coords[0], coords[1], coords[2], coords[3], Space::Pixel, view)
    }

    /// Builds a box from two arbitrary corners, swapping per axis as needed.
    pub fn from_corners(a: Point, b: Point, space: Space, view: View) -> Result<Self> {
        Self::new(
            a.x.min(b.x),
            a.y.min(b.y),
            a.x.max(b.x),
            a.y.max(b.y),
            space,
            view,
        )
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point {
        Point::new(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn top_left(&self) -> Point {
        Point::new(self.x_min, self.y_min)
    }

    pub fn bottom_right(&self) -> Point {
        Point::new(self.x_max, self.y_max)
    }

    pub fn bottom_left(&self) -> Point {
        Point::new(self.x_min, self.y_max)
    }

    /// True when the box lies inside `[0, width] x [0, height]`.
    pub fn inside(&self, dims: FrameDims) -> bool {
        dims.contains(self.x_min, self.y_min) && dims.contains(self.x_max, self.y_max)
    }

    /// Intersects a pixel box with the frame. `None` if nothing remains.
    pub fn clamped_to(&self, dims: FrameDims) -> Option<Self> {
        let x_min = self.x_min.clamp(0.0, dims.w());
        let x_max = self.x_max.clamp(0.0, dims.w());
        let y_min = self.y_min.clamp(0.0, dims.h());
        let y_max = self.y_max.clamp(0.0, dims.h());
        if self.x_min > dims.w() || self.x_max < 0.0 || self.y_min > dims.h() || self.y_max < 0.0 {
            return None;
        }
        Some(Self {
            x_min,
            y_min,
            x_max,
            y_max,
            ..*self
        })
    }

    /// Maps each pixel coordinate `c` to `2 c / extent - 1`.
    pub fn normalize(&self, dims: FrameDims) -> Result<Self> {
        if self.space != Space::Pixel {
            return Err(Error::InvalidBox("normalize expects a pixel-space box".into()));
        }
        let nx = |v: f64| norm_coord(v, dims.w(), "x");
        let ny = |v: f64| norm_coord(v, dims.h(), "y");
        Ok(Self {
            x_min: nx(self.x_min)?,
            y_min: ny(self.y_min)?,
            x_max: nx(self.x_max)?,
            y_max: ny(self.y_max)?,
            space: Space::Normalized,
            view: self.view,
        })
    }

    /// Inverse of [`BBox::normalize`].
    pub fn denormalize(&self, dims: FrameDims) -> Self {
        let px = |v: f64, extent: f64| (v + 1.0) * 0.5 * extent;
        Self {
            x_min: px(self.x_min, dims.w()),
            y_min: px(self.y_min, dims.h()),
            x_max: px(self.x_max, dims.w()),
            y_max: px(self.y_max, dims.h()),
            space: Space::Pixel,
            view: self.view,
        }
    }
}

fn norm_coord(value: f64, extent: f64, axis: &'static str) -> Result<f64> {
    if !(0.0..=extent).contains(&value) {
        return Err(Error::OutOfRange {
            axis,
            value,
            extent,
        });
    }
    Ok(2.0 * (value / extent) - 1.0)
}

pub fn normalize_bbox(b: &BBox, dims: FrameDims) -> Result<BBox> {
    b.normalize(dims)
}

pub fn denormalize_bbox(b: &BBox, dims: FrameDims) -> BBox {
    b.denormalize(dims)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Car,
    Truck,
    Bus,
    Van,
    Motorbike,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 5] = [
        ClassLabel::Car,
        ClassLabel::Truck,
        ClassLabel::Bus,
        ClassLabel::Van,
        ClassLabel::Motorbike,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Car => "car",
            ClassLabel::Truck => "truck",
            ClassLabel::Bus => "bus",
            ClassLabel::Van => "van",
            ClassLabel::Motorbike => "motorbike",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClassLabel::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown class label {s:?}")))
    }
}

/// One entity observed in both views of a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub frame_id: String,
    pub entity_id: u64,
    pub model_id: u64,
    pub class_label: ClassLabel,
    pub frontal_box: BBox,
    pub birdeye_box: BBox,
    pub distance_m: f64,
    pub yaw_deg: f64,
}

impl DetectionRecord {
    /// Key used to look up per-record side data such as appearance features.
    pub fn key(&self) -> String {
        format!("{}/{}", self.frame_id, self.entity_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hd() -> FrameDims {
        FrameDims::default()
    }

    fn px(c: [f64; 4]) -> BBox {
        BBox::pixel(View::Frontal, c).unwrap()
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(
            px([960.0, 540.0, 960.0, 540.0]).normalize(hd()).unwrap().coords(),
            [0.0; 4]
        );
        assert_eq!(
            px([0.0, 0.0, 1920.0, 1080.0]).normalize(hd()).unwrap().coords(),
            [-1.0, -1.0, 1.0, 1.0]
        );
        assert_eq!(
            px([480.0, 270.0, 1440.0, 810.0]).normalize(hd()).unwrap().coords(),
            [-0.5, -0.5, 0.5, 0.5]
        );
    }

    #[test]
    fn normalize_rejects_outside_frame() {
        let err = px([-1.0, 0.0, 10.0, 10.0]).normalize(hd()).unwrap_err();
        assert!(matches!(err, Error::OutOfRange { axis: "x", .. }));
        let err = px([0.0, 0.0, 10.0, 1081.0]).normalize(hd()).unwrap_err();
        assert!(matches!(err, Error::OutOfRange { axis: "y", .. }));
    }

    #[test]
    fn denormalize_examples() {
        let n = |c: [f64; 4]| {
            BBox::new(c[0], c[1], c[2], c[3], Space::Normalized, View::Birdeye).unwrap()
        };
        assert_eq!(n([0.0; 4]).denormalize(hd()).coords(), [960.0, 540.0, 960.0, 540.0]);
        assert_eq!(
            n([-1.0, -1.0, 1.0, 1.0]).denormalize(hd()).coords(),
            [0.0, 0.0, 1920.0, 1080.0]
        );
    }

    #[test]
    fn box_validation() {
        assert!(BBox::pixel(View::Frontal, [5.0, 0.0, 4.0, 1.0]).is_err());
        assert!(BBox::new(0.0, 0.0, 1.5, 0.5, Space::Normalized, View::Frontal).is_err());
        assert!(BBox::pixel(View::Frontal, [f64::NAN, 0.0, 4.0, 1.0]).is_err());
    }

    #[test]
    fn frame_dims_parse() {
        assert_eq!("1920x1080".parse::<FrameDims>().unwrap(), hd());
        assert!("0x10".parse::<FrameDims>().is_err());
        assert!("1920".parse::<FrameDims>().is_err());
    }

    fn pixel_box() -> impl Strategy<Value = BBox> {
        (0.0..=1920.0f64, 0.0..=1920.0f64, 0.0..=1080.0f64, 0.0..=1080.0f64).prop_map(
            |(a, b, c, d)| px([a.min(b), c.min(d), a.max(b), c.max(d)]),
        )
    }

    proptest! {
        #[test]
        fn normalize_roundtrip(b in pixel_box()) {
            let n = b.normalize(hd()).unwrap();
            prop_assert!(n.coords().iter().all(|c| (-1.0..=1.0).contains(c)));
            prop_assert!(n.x_min <= n.x_max && n.y_min <= n.y_max);
            let back = n.denormalize(hd());
            for (u, v) in back.coords().iter().zip(b.coords()) {
                prop_assert!((u - v).abs() < 1e-9);
            }
        }
    }
}
