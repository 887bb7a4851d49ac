//! Synthetic flat-world driving scenes.
//!
//! Vehicles are boxes resting on a ground plane around the ego car (player at
//! the origin, +y forward, +x right, +z up). Each one is projected into a
//! pinhole dashboard camera and a top-down orthographic map. Entities visible
//! in both views form the per-frame candidate set; optional corruptions
//! imitate unreliable engine dumps so the filter has something to reject.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{BBox, ClassLabel, DetectionRecord, FrameDims, Point, Space, View};

/// Geometry closer than this to the camera plane is clipped away.
const NEAR_PLANE_M: f64 = 0.1;
const MAX_VEHICLES_PER_FRAME: u32 = 999;
const MAX_MODELS_PER_CLASS: u32 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub label: ClassLabel,
    pub length_m: f64,
    pub width_m: f64,
    pub height_m: f64,
    pub frequency: f64,
    /// Number of distinct vehicle models (model ids) in this class.
    #[serde(default = "default_models")]
    pub models: u32,
}

fn default_models() -> u32 {
    4
}

impl ClassSpec {
    pub fn new(label: ClassLabel, dims: (f64, f64, f64), frequency: f64) -> Self {
        Self {
            label,
            length_m: dims.0,
            width_m: dims.1,
            height_m: dims.2,
            frequency,
            models: default_models(),
        }
    }
}

pub fn default_catalog() -> Vec<ClassSpec> {
    vec![
        ClassSpec::new(ClassLabel::Car, (4.5, 1.8, 1.5), 0.55),
        ClassSpec::new(ClassLabel::Truck, (8.5, 2.5, 3.2), 0.12),
        ClassSpec::new(ClassLabel::Bus, (12.0, 2.5, 3.0), 0.08),
        ClassSpec::new(ClassLabel::Van, (5.5, 2.0, 2.2), 0.15),
        ClassSpec::new(ClassLabel::Motorbike, (2.2, 0.8, 1.2), 0.10),
    ]
}

/// Mixture of von Mises modes over yaw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct YawMixture {
    pub modes_deg: Vec<f64>,
    pub weights: Vec<f64>,
    /// von Mises concentration; 0 is uniform, infinity pins yaw to the modes.
    pub concentration: f64,
}

impl Default for YawMixture {
    fn default() -> Self {
        Self {
            modes_deg: vec![0.0, 180.0],
            weights: vec![0.5, 0.5],
            concentration: 25.0,
        }
    }
}

impl YawMixture {
    fn validate(&self) -> Result<()> {
        if self.modes_deg.is_empty() || self.modes_deg.len() != self.weights.len() {
            return Err(Error::Config(
                "yaw mixture needs one weight per mode and at least one mode".into(),
            ));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) || self.weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config("yaw weights must be non-negative with positive sum".into()));
        }
        if !(self.concentration >= 0.0) {
            return Err(Error::Config("yaw concentration must be >= 0".into()));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        let mode = self.modes_deg[pick_weighted(&self.weights, rng)];
        let offset = sample_von_mises(self.concentration, rng).to_degrees();
        (mode + offset).rem_euclid(360.0)
    }
}

/// Draws an angle in (-pi, pi] from a zero-mean von Mises distribution
/// (Best & Fisher rejection sampler).
fn sample_von_mises(kappa: f64, rng: &mut impl Rng) -> f64 {
    if kappa.is_infinite() {
        return 0.0;
    }
    if kappa < 1e-8 {
        return rng.random_range(-PI..PI);
    }
    if kappa > 1e6 {
        return Normal::new(0.0, 1.0 / kappa.sqrt()).unwrap().sample(rng);
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let u3: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let theta = f.clamp(-1.0, 1.0).acos();
            return if u3 < 0.5 { -theta } else { theta };
        }
    }
}

fn pick_weighted(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if target < *w {
            return i;
        }
        target -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Dashboard camera at `height_m` above the player origin, looking along +y,
/// tilted down by `pitch_deg`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PinholeCamera {
    pub focal_px: f64,
    pub principal: (f64, f64),
    pub height_m: f64,
    pub pitch_deg: f64,
    pub dims: FrameDims,
}

impl Default for PinholeCamera {
    fn default() -> Self {
        Self {
            focal_px: 1000.0,
            principal: (960.0, 540.0),
            height_m: 1.5,
            pitch_deg: 0.0,
            dims: FrameDims::default(),
        }
    }
}

impl PinholeCamera {
    /// Camera-frame coordinates (x right, y down, z forward) of a world point.
    fn to_camera(&self, p: Vector3<f64>) -> Vector3<f64> {
        let (s, c) = self.pitch_deg.to_radians().sin_cos();
        let d = Vector3::new(p.x, p.y, p.z - self.height_m);
        let forward = Vector3::new(0.0, c, -s);
        let down = Vector3::new(0.0, -s, -c);
        Vector3::new(d.x, d.dot(&down), d.dot(&forward))
    }

    fn project_camera(&self, c: Vector3<f64>) -> Point {
        Point::new(
            self.principal.0 + self.focal_px * c.x / c.z,
            self.principal.1 + self.focal_px * c.y / c.z,
        )
    }

    /// Projects a world point; `None` when it is not in front of the camera.
    pub fn project(&self, p: Vector3<f64>) -> Option<Point> {
        let c = self.to_camera(p);
        (c.z > NEAR_PLANE_M).then(|| self.project_camera(c))
    }

    /// Homography from ground-plane meters `(x, y, 1)` to frontal pixels.
    pub fn ground_to_image(&self) -> Matrix3<f64> {
        let (s, c) = self.pitch_deg.to_radians().sin_cos();
        let h = self.height_m;
        let k = Matrix3::new(
            self.focal_px, 0.0, self.principal.0,
            0.0, self.focal_px, self.principal.1,
            0.0, 0.0, 1.0,
        );
        let m = Matrix3::new(
            1.0, 0.0, 0.0,
            0.0, -s, h * c,
            0.0, c, h * s,
        );
        k * m
    }
}

/// Top-down orthographic map centered on the player, +y forward drawn upward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrthoCamera {
    pub scale_px_per_m: f64,
    pub dims: FrameDims,
}

impl Default for OrthoCamera {
    fn default() -> Self {
        Self {
            scale_px_per_m: 14.0,
            dims: FrameDims::default(),
        }
    }
}

impl OrthoCamera {
    pub fn project(&self, x: f64, y: f64) -> Point {
        Point::new(
            0.5 * self.dims.w() + self.scale_px_per_m * x,
            0.5 * self.dims.h() - self.scale_px_per_m * y,
        )
    }

    /// Map extent in meters (width, height).
    pub fn extent_m(&self) -> (f64, f64) {
        (
            self.dims.w() / self.scale_px_per_m,
            self.dims.h() / self.scale_px_per_m,
        )
    }

    /// Homography from ground-plane meters `(x, y, 1)` to map pixels.
    pub fn ground_to_image(&self) -> Matrix3<f64> {
        let s = self.scale_px_per_m;
        Matrix3::new(
            s, 0.0, 0.5 * self.dims.w(),
            0.0, -s, 0.5 * self.dims.h(),
            0.0, 0.0, 1.0,
        )
    }
}

/// Exact frontal-pixel to bird's-eye-pixel map for points on the ground plane.
pub fn ground_plane_homography(frontal: &PinholeCamera, birdeye: &OrthoCamera) -> Result<Matrix3<f64>> {
    let g = frontal
        .ground_to_image()
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("frontal camera ground map is singular".into()))?;
    Ok(birdeye.ground_to_image() * g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Standard deviation of per-coordinate Gaussian jitter, both views.
    pub jitter_px: f64,
    /// Probability that an entity is dropped from exactly one of the views.
    pub drop_one_view_prob: f64,
    /// Probability that a record's bird's-eye box is replaced by a huge box.
    pub absurd_size_prob: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            jitter_px: 0.0,
            drop_one_view_prob: 0.0,
            absurd_size_prob: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub rng_seed: u64,
    /// Inclusive range of vehicles spawned per frame.
    pub vehicles_per_frame: (u32, u32),
    pub distance_range_m: (f64, f64),
    /// Vehicles are placed at bearings uniform in `[-a, a]` around +y.
    pub bearing_half_angle_deg: f64,
    pub yaw: YawMixture,
    pub class_catalog: Vec<ClassSpec>,
    pub frontal_camera: PinholeCamera,
    pub birdeye_camera: OrthoCamera,
    pub noise: NoiseConfig,
    /// Hide vehicles whose frontal box is fully covered by a nearer one.
    pub occlusion_culling: bool,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            rng_seed: 0,
            vehicles_per_frame: (2, 8),
            distance_range_m: (5.0, 30.0),
            bearing_half_angle_deg: 35.0,
            yaw: YawMixture::default(),
            class_catalog: default_catalog(),
            frontal_camera: PinholeCamera::default(),
            birdeye_camera: OrthoCamera::default(),
            noise: NoiseConfig::default(),
            occlusion_culling: false,
        }
    }
}

impl SceneConfig {
    /// Scene used by the model comparison benchmark: classes share their
    /// frontal cross-section (taller than the camera, so roofs stay hidden)
    /// and differ only in length, with 1 px jitter in both views.
    pub fn benchmark(seed: u64) -> Self {
        let cross = |len: f64| (len, 2.0, 1.9);
        let mut catalog = vec![
            ClassSpec::new(ClassLabel::Car, cross(4.5), 0.40),
            ClassSpec::new(ClassLabel::Van, cross(6.5), 0.25),
            ClassSpec::new(ClassLabel::Truck, cross(9.0), 0.20),
            ClassSpec::new(ClassLabel::Bus, cross(12.0), 0.15),
        ];
        for c in &mut catalog {
            c.models = 5;
        }
        Self {
            rng_seed: seed,
            class_catalog: catalog,
            frontal_camera: PinholeCamera {
                pitch_deg: 10.0,
                ..PinholeCamera::default()
            },
            noise: NoiseConfig {
                jitter_px: 1.0,
                ..NoiseConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.vehicles_per_frame;
        if lo > hi || hi > MAX_VEHICLES_PER_FRAME {
            return Err(Error::Config(format!(
                "vehicles_per_frame must satisfy min <= max <= {MAX_VEHICLES_PER_FRAME}"
            )));
        }
        let (dmin, dmax) = self.distance_range_m;
        if !(dmin >= 0.0 && dmin < dmax && dmax.is_finite()) {
            return Err(Error::Config(format!(
                "distance_range_m must satisfy 0 <= min < max, got ({dmin}, {dmax})"
            )));
        }
        if !(0.0..=180.0).contains(&self.bearing_half_angle_deg) {
            return Err(Error::Config("bearing_half_angle_deg must be in [0, 180]".into()));
        }
        self.yaw.validate()?;
        if self.class_catalog.is_empty() {
            return Err(Error::Config("class catalog is empty".into()));
        }
        let total: f64 = self.class_catalog.iter().map(|c| c.frequency).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "class frequencies must sum to 1, got {total}"
            )));
        }
        for c in &self.class_catalog {
            if !(c.frequency >= 0.0) {
                return Err(Error::Config(format!("negative frequency for {}", c.label)));
            }
            if !(c.length_m > 0.0 && c.width_m > 0.0 && c.height_m > 0.0) {
                return Err(Error::Config(format!("extents of {} must be positive", c.label)));
            }
            if c.models == 0 || c.models > MAX_MODELS_PER_CLASS {
                return Err(Error::Config(format!(
                    "models per class must be in 1..={MAX_MODELS_PER_CLASS}"
                )));
            }
        }
        let cam = &self.frontal_camera;
        if !(cam.focal_px > 0.0) {
            return Err(Error::Config("frontal focal length must be positive".into()));
        }
        if !(cam.height_m > 0.0) {
            return Err(Error::Config("camera height must be positive".into()));
        }
        if !(self.birdeye_camera.scale_px_per_m > 0.0) {
            return Err(Error::Config("bird's-eye scale must be positive".into()));
        }
        let n = &self.noise;
        for (name, p) in [
            ("drop_one_view_prob", n.drop_one_view_prob),
            ("absurd_size_prob", n.absurd_size_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0, 1]")));
            }
        }
        if !(n.jitter_px >= 0.0) {
            return Err(Error::Config("jitter_px must be >= 0".into()));
        }
        Ok(())
    }

    pub fn model_id(&self, class_index: usize, variant: u32) -> u64 {
        class_index as u64 * MAX_MODELS_PER_CLASS as u64 + variant as u64
    }
}

/// Ground-truth 3D vehicle behind both projections.
#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle3D {
    pub entity_id: u64,
    pub model_id: u64,
    pub class_label: ClassLabel,
    /// Ground-plane center, meters.
    pub center: (f64, f64),
    pub yaw_deg: f64,
    /// (length, width, height) in meters.
    pub extents: (f64, f64, f64),
}

impl Vehicle3D {
    /// Footprint corners on the ground, counter-clockwise.
    pub fn footprint(&self) -> [(f64, f64); 4] {
        let (len, wid, _) = self.extents;
        let (s, c) = self.yaw_deg.to_radians().sin_cos();
        // Heading for yaw 0 is +y; yaw rotates counter-clockwise seen from above.
        let fwd = (-s, c);
        let right = (c, s);
        let (hl, hw) = (0.5 * len, 0.5 * wid);
        let at = |a: f64, b: f64| {
            (
                self.center.0 + a * fwd.0 + b * right.0,
                self.center.1 + a * fwd.1 + b * right.1,
            )
        };
        [at(-hl, -hw), at(-hl, hw), at(hl, hw), at(hl, -hw)]
    }

    pub fn corners(&self) -> [Vector3<f64>; 8] {
        let f = self.footprint();
        let h = self.extents.2;
        let mut out = [Vector3::zeros(); 8];
        for (i, (x, y)) in f.iter().enumerate() {
            out[i] = Vector3::new(*x, *y, 0.0);
            out[i + 4] = Vector3::new(*x, *y, h);
        }
        out
    }

    pub fn distance_m(&self) -> f64 {
        self.center.0.hypot(self.center.1)
    }
}

const BOX_EDGES: [(usize, usize); 12] = [
    (0, 1), (1, 2), (2, 3), (3, 0),
    (4, 5), (5, 6), (6, 7), (7, 4),
    (0, 4), (1, 5), (2, 6), (3, 7),
];

/// Frontal box: hull of the projected 3D box, near-plane clipped, cut to the frame.
pub fn project_frontal(v: &Vehicle3D, cam: &PinholeCamera) -> Option<BBox> {
    let cam_pts = v.corners().map(|p| cam.to_camera(p));
    let mut pts: Vec<Point> = cam_pts
        .iter()
        .filter(|c| c.z >= NEAR_PLANE_M)
        .map(|c| cam.project_camera(*c))
        .collect();
    if pts.len() < 8 {
        for (a, b) in BOX_EDGES {
            let (pa, pb) = (cam_pts[a], cam_pts[b]);
            if (pa.z - NEAR_PLANE_M) * (pb.z - NEAR_PLANE_M) < 0.0 {
                let t = (NEAR_PLANE_M - pa.z) / (pb.z - pa.z);
                pts.push(cam.project_camera(pa + (pb - pa) * t));
            }
        }
    }
    hull_in_frame(&pts, cam.dims, View::Frontal)
}

/// Bird's-eye box: hull of the yaw-rotated footprint, cut to the map.
pub fn project_birdeye(v: &Vehicle3D, cam: &OrthoCamera) -> Option<BBox> {
    let pts: Vec<Point> = v
        .footprint()
        .iter()
        .map(|(x, y)| cam.project(*x, *y))
        .collect();
    hull_in_frame(&pts, cam.dims, View::Birdeye)
}

fn hull_in_frame(pts: &[Point], dims: FrameDims, view: View) -> Option<BBox> {
    if pts.is_empty() {
        return None;
    }
    let fold = |f: fn(f64, f64) -> f64, init: f64, get: fn(&Point) -> f64| {
        pts.iter().map(get).fold(init, f)
    };
    let x_min = fold(f64::min, f64::INFINITY, |p| p.x);
    let x_max = fold(f64::max, f64::NEG_INFINITY, |p| p.x);
    let y_min = fold(f64::min, f64::INFINITY, |p| p.y);
    let y_max = fold(f64::max, f64::NEG_INFINITY, |p| p.y);
    if x_min >= dims.w() || y_min >= dims.h() || x_max <= 0.0 || y_max <= 0.0 {
        return None;
    }
    BBox::new(x_min, y_min, x_max, y_max, Space::Pixel, view)
        .ok()?
        .clamped_to(dims)
}

/// Entities visible in both views.
pub fn candidate_set(frontal_ids: &BTreeSet<u64>, birdeye_ids: &BTreeSet<u64>) -> BTreeSet<u64> {
    frontal_ids.intersection(birdeye_ids).copied().collect()
}

/// Everything generated for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    pub frame_id: String,
    pub records: Vec<DetectionRecord>,
    pub frontal_only: Vec<u64>,
    pub birdeye_only: Vec<u64>,
    /// Entities whose bird's-eye box was replaced by an absurd-size box.
    pub corrupted: Vec<u64>,
    pub vehicles: Vec<Vehicle3D>,
}

/// Deterministic frame source; frame `i` depends only on `(rng_seed, i)`.
#[derive(Debug, Clone)]
pub struct SceneGenerator {
    cfg: SceneConfig,
    class_weights: Vec<f64>,
}

impl SceneGenerator {
    pub fn new(cfg: SceneConfig) -> Result<Self> {
        cfg.validate()?;
        let class_weights = cfg.class_catalog.iter().map(|c| c.frequency).collect();
        Ok(Self { cfg, class_weights })
    }

    pub fn config(&self) -> &SceneConfig {
        &self.cfg
    }

    fn frame_rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.rng_seed);
        rng.set_stream(index);
        rng
    }

    pub fn frame_id(&self, index: u64) -> String {
        format!("s{}-f{:06}", self.cfg.rng_seed, index)
    }

    fn spawn(&self, index: u64, k: u32, rng: &mut ChaCha8Rng) -> Vehicle3D {
        let cfg = &self.cfg;
        let ci = pick_weighted(&self.class_weights, rng);
        let class = &cfg.class_catalog[ci];
        let variant = rng.random_range(0..class.models);
        let (dmin, dmax) = cfg.distance_range_m;
        let distance = rng.random_range(dmin..=dmax);
        let half = cfg.bearing_half_angle_deg.to_radians();
        let bearing = if half > 0.0 { rng.random_range(-half..=half) } else { 0.0 };
        Vehicle3D {
            entity_id: index * 1000 + k as u64 + 1,
            model_id: cfg.model_id(ci, variant),
            class_label: class.label,
            center: (distance * bearing.sin(), distance * bearing.cos()),
            yaw_deg: cfg.yaw.sample(rng),
            extents: (class.length_m, class.width_m, class.height_m),
        }
    }

    pub fn frame(&self, index: u64) -> FrameOutput {
        let cfg = &self.cfg;
        let mut rng = self.frame_rng(index);
        let (lo, hi) = cfg.vehicles_per_frame;
        let count = rng.random_range(lo..=hi);
        let vehicles: Vec<Vehicle3D> = (0..count).map(|k| self.spawn(index, k, &mut rng)).collect();

        let mut frontal: Vec<Option<BBox>> = vehicles
            .iter()
            .map(|v| project_frontal(v, &cfg.frontal_camera))
            .collect();
        let mut birdeye: Vec<Option<BBox>> = vehicles
            .iter()
            .map(|v| project_birdeye(v, &cfg.birdeye_camera))
            .collect();

        if cfg.occlusion_culling {
            cull_occluded(&vehicles, &mut frontal);
        }

        for i in 0..vehicles.len() {
            if frontal[i].is_some() && birdeye[i].is_some() {
                let u: f64 = rng.random();
                let which: bool = rng.random();
                if u < cfg.noise.drop_one_view_prob {
                    if which {
                        frontal[i] = None;
                    } else {
                        birdeye[i] = None;
                    }
                }
            }
        }

        let ids_with = |boxes: &[Option<BBox>]| -> BTreeSet<u64> {
            vehicles
                .iter()
                .zip(boxes)
                .filter(|(_, b)| b.is_some())
                .map(|(v, _)| v.entity_id)
                .collect()
        };
        let frontal_ids = ids_with(&frontal);
        let birdeye_ids = ids_with(&birdeye);
        let candidates = candidate_set(&frontal_ids, &birdeye_ids);

        let frame_id = self.frame_id(index);
        let jitter = Normal::new(0.0, cfg.noise.jitter_px).unwrap();
        let mut records = Vec::new();
        let mut corrupted = Vec::new();
        for (i, v) in vehicles.iter().enumerate() {
            if !candidates.contains(&v.entity_id) {
                continue;
            }
            let mut f = frontal[i].unwrap();
            let mut b = birdeye[i].unwrap();
            if cfg.noise.jitter_px > 0.0 {
                f = jittered(&f, &jitter, &mut rng);
                b = jittered(&b, &jitter, &mut rng);
            }
            let u: f64 = rng.random();
            if u < cfg.noise.absurd_size_prob {
                b = absurd_box(cfg.birdeye_camera.dims, &mut rng);
                corrupted.push(v.entity_id);
            }
            records.push(DetectionRecord {
                frame_id: frame_id.clone(),
                entity_id: v.entity_id,
                model_id: v.model_id,
                class_label: v.class_label,
                frontal_box: f,
                birdeye_box: b,
                distance_m: v.distance_m(),
                yaw_deg: v.yaw_deg,
            });
        }

        FrameOutput {
            frame_id,
            records,
            frontal_only: frontal_ids.difference(&birdeye_ids).copied().collect(),
            birdeye_only: birdeye_ids.difference(&frontal_ids).copied().collect(),
            corrupted,
            vehicles,
        }
    }

    pub fn frames(&self, n_frames: u64) -> impl Iterator<Item = FrameOutput> + '_ {
        (0..n_frames).map(move |i| self.frame(i))
    }
}

fn jittered(b: &BBox, noise: &Normal<f64>, rng: &mut impl Rng) -> BBox {
    let mut c = b.coords();
    for v in &mut c {
        *v += noise.sample(rng);
    }
    BBox::from_corners(Point::new(c[0], c[1]), Point::new(c[2], c[3]), b.space, b.view)
        .expect("finite jittered corners")
}

fn absurd_box(dims: FrameDims, rng: &mut impl Rng) -> BBox {
    let w = rng.random_range(0.5..0.9) * dims.w();
    let h = rng.random_range(0.5..0.9) * dims.h();
    let x = rng.random_range(0.0..(dims.w() - w));
    let y = rng.random_range(0.0..(dims.h() - h));
    BBox::pixel(View::Birdeye, [x, y, x + w, y + h]).expect("valid absurd box")
}

fn cull_occluded(vehicles: &[Vehicle3D], frontal: &mut [Option<BBox>]) {
    let snapshot: Vec<Option<BBox>> = frontal.to_vec();
    for (i, slot) in frontal.iter_mut().enumerate() {
        let Some(b) = snapshot[i] else { continue };
        let covered = snapshot.iter().enumerate().any(|(j, other)| {
            j != i
                && vehicles[j].distance_m() < vehicles[i].distance_m()
                && other.is_some_and(|o| {
                    o.x_min <= b.x_min && o.y_min <= b.y_min && o.x_max >= b.x_max && o.y_max >= b.y_max
                })
        });
        if covered {
            *slot = None;
        }
    }
}

/// Generates `n_frames` frames from `cfg`.
pub fn generate_frames(cfg: &SceneConfig, n_frames: u64) -> Result<Vec<FrameOutput>> {
    if n_frames == 0 {
        return Err(Error::Config("n_frames must be positive".into()));
    }
    let generator = SceneGenerator::new(cfg.clone())?;
    Ok(generator.frames(n_frames).collect())
}
