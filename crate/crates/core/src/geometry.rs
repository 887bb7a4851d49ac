//! Homography baseline: a projective map from frontal bottom corners to
//! bird's-eye bottom corners, fitted by normalized DLT, with the bird's-eye
//! box height filled in from the training-set mean.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{BBox, DetectionRecord, Point, Space, View};

/// `|w|` below this maps a point to infinity.
const MIN_W: f64 = 1e-12;
/// Relative gap between the two smallest singular values below which the
/// DLT null space is not one-dimensional.
const DEGENERACY_GAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub frontal: Point,
    pub birdeye: Point,
}

/// Fitted homography baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct Homography {
    /// Frontal pixels to bird's-eye pixels; unit Frobenius norm, `h[2][2] >= 0`.
    pub matrix: Matrix3<f64>,
    pub avg_height_px: f64,
}

#[derive(Serialize, Deserialize)]
struct HomographyFile {
    matrix: [f64; 9],
    avg_height_px: f64,
}

impl Homography {
    pub fn fit(train: &[DetectionRecord]) -> Result<Self> {
        let pairs = collect_correspondences(train)?;
        Ok(Self {
            matrix: estimate_homography(&pairs)?,
            avg_height_px: mean_training_height(train)?,
        })
    }

    pub fn predict(&self, frontal_box: &BBox) -> Result<BBox> {
        homography_predict(self, frontal_box)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut matrix = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                matrix[3 * r + c] = self.matrix[(r, c)];
            }
        }
        let file = HomographyFile {
            matrix,
            avg_height_px: self.avg_height_px,
        };
        Ok(serde_json::to_string_pretty(&file)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: HomographyFile = serde_json::from_str(text)?;
        Ok(Self {
            matrix: Matrix3::from_row_slice(&file.matrix),
            avg_height_px: file.avg_height_px,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Two pairs per record: bottom-left to bottom-left and bottom-right to
/// bottom-right, in pixels.
pub fn collect_correspondences(train: &[DetectionRecord]) -> Result<Vec<Correspondence>> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    Ok(train
        .iter()
        .flat_map(|r| {
            [
                Correspondence {
                    frontal: r.frontal_box.bottom_left(),
                    birdeye: r.birdeye_box.bottom_left(),
                },
                Correspondence {
                    frontal: r.frontal_box.bottom_right(),
                    birdeye: r.birdeye_box.bottom_right(),
                },
            ]
        })
        .collect())
}

/// Similarity taking the points to zero mean and mean distance sqrt(2).
fn conditioning(points: impl Iterator<Item = Point> + Clone) -> Result<Matrix3<f64>> {
    let n = points.clone().count() as f64;
    let (sx, sy) = points.clone().fold((0.0, 0.0), |(a, b), p| (a + p.x, b + p.y));
    let (mx, my) = (sx / n, sy / n);
    let mean_dist = points.map(|p| (p.x - mx).hypot(p.y - my)).sum::<f64>() / n;
    if !(mean_dist > 0.0) || !mean_dist.is_finite() {
        return Err(Error::Degenerate("all points coincide".into()));
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(s, 0.0, -s * mx, 0.0, s, -s * my, 0.0, 0.0, 1.0))
}

fn transform(m: &Matrix3<f64>, p: Point) -> Point {
    let v = m * Vector3::new(p.x, p.y, 1.0);
    Point::new(v.x / v.z, v.y / v.z)
}

/// Normalized DLT: condition both point sets, take the right singular
/// vector of the smallest singular value of the `2N x 9` system, undo the
/// conditioning and fix scale and sign.
pub fn estimate_homography(pairs: &[Correspondence]) -> Result<Matrix3<f64>> {
    if pairs.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: pairs.len(),
        });
    }
    let t_src = conditioning(pairs.iter().map(|c| c.frontal))?;
    let t_dst = conditioning(pairs.iter().map(|c| c.birdeye))?;

    let rows = (2 * pairs.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, c) in pairs.iter().enumerate() {
        let s = transform(&t_src, c.frontal);
        let d = transform(&t_dst, c.birdeye);
        let (r0, r1) = (2 * i, 2 * i + 1);
        a[(r0, 0)] = -s.x;
        a[(r0, 1)] = -s.y;
        a[(r0, 2)] = -1.0;
        a[(r0, 6)] = d.x * s.x;
        a[(r0, 7)] = d.x * s.y;
        a[(r0, 8)] = d.x;
        a[(r1, 3)] = -s.x;
        a[(r1, 4)] = -s.y;
        a[(r1, 5)] = -1.0;
        a[(r1, 6)] = d.y * s.x;
        a[(r1, 7)] = d.y * s.y;
        a[(r1, 8)] = d.y;
    }

    let svd = a.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Degenerate("singular value decomposition failed".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let smallest = svd.singular_values[order[0]];
    let second = svd.singular_values[order[1]];
    let largest = svd.singular_values[order[order.len() - 1]];
    if second - smallest <= DEGENERACY_GAP * largest {
        return Err(Error::Degenerate(format!(
            "null space is not one-dimensional (singular values {smallest:e}, {second:e})"
        )));
    }

    let h = v_t.row(order[0]);
    let h_norm = Matrix3::from_fn(|r, c| h[3 * r + c]);
    let t_dst_inv = t_dst
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("conditioning not invertible".into()))?;
    Ok(normalize_scale(t_dst_inv * h_norm * t_src))
}

/// Unit Frobenius norm with non-negative bottom-right entry.
pub fn normalize_scale(m: Matrix3<f64>) -> Matrix3<f64> {
    let m = m / m.norm();
    if m[(2, 2)] < 0.0 {
        -m
    } else {
        m
    }
}

pub fn apply_homography(h: &Matrix3<f64>, p: Point) -> Result<Point> {
    let v = h * Vector3::new(p.x, p.y, 1.0);
    if v.z.abs() < MIN_W {
        return Err(Error::PointAtInfinity { w: v.z });
    }
    Ok(Point::new(v.x / v.z, v.y / v.z))
}

/// Projects both frontal bottom corners; the bird's-eye box spans their
/// x-range with its bottom edge at their mean y and the training-mean height.
pub fn homography_predict(model: &Homography, frontal_box: &BBox) -> Result<BBox> {
    let l = apply_homography(&model.matrix, frontal_box.bottom_left())?;
    let r = apply_homography(&model.matrix, frontal_box.bottom_right())?;
    let bottom = 0.5 * (l.y + r.y);
    BBox::new(
        l.x.min(r.x),
        bottom - model.avg_height_px,
        l.x.max(r.x),
        bottom,
        Space::Pixel,
        View::Birdeye,
    )
}

pub fn mean_training_height(train: &[DetectionRecord]) -> Result<f64> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let sum: f64 = train.iter().map(|r| r.birdeye_box.height()).sum();
    Ok(sum / train.len() as f64)
}

/// Max and RMS pixel distance between `H * frontal` and `birdeye`.
pub fn reprojection_errors(h: &Matrix3<f64>, pairs: &[Correspondence]) -> Result<(f64, f64)> {
    let mut max = 0.0f64;
    let mut sq = 0.0;
    for c in pairs {
        let e = apply_homography(h, c.frontal)?.distance(&c.birdeye);
        max = max.max(e);
        sq += e * e;
    }
    Ok((max, (sq / pairs.len().max(1) as f64).sqrt()))
}
