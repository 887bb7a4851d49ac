use std::collections::HashMap;

use bev_core::datagen::{ClassSpec, SceneConfig, SceneGenerator, YawMixture};
use bev_core::eval::iou;
use bev_core::geometry::{homography_predict, Homography};
use bev_core::gridmap::{cell_of, fit_grid, CornerRole, GridSpec, PredictMode};
use bev_core::{BBox, ClassLabel, DetectionRecord, View};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn record(frontal: [f64; 4], birdeye: [f64; 4], id: u64) -> DetectionRecord {
    DetectionRecord {
        frame_id: "g".into(),
        entity_id: id,
        model_id: 0,
        class_label: ClassLabel::Car,
        frontal_box: BBox::pixel(View::Frontal, frontal).unwrap(),
        birdeye_box: BBox::pixel(View::Birdeye, birdeye).unwrap(),
        distance_m: 10.0,
        yaw_deg: 0.0,
    }
}

fn generated(seed: u64, n: usize) -> Vec<DetectionRecord> {
    let generator = SceneGenerator::new(SceneConfig {
        rng_seed: seed,
        ..SceneConfig::default()
    })
    .unwrap();
    generator.frames(u64::MAX).flat_map(|f| f.records).take(n).collect()
}

#[test]
fn sampling_frequency_within_binomial_band() {
    // Frontal TL always in cell (5, 5); nine records go to bird's-eye cell
    // (10, 20), one to (40, 60).
    let mut train = Vec::new();
    for i in 0..10 {
        let be = if i < 9 { [205.0, 105.0, 300.0, 300.0] } else { [605.0, 405.0, 700.0, 500.0] };
        train.push(record([55.0, 55.0, 80.0, 80.0], be, i));
    }
    let (model, _) = fit_grid(&train, GridSpec::default()).unwrap();
    let a_center = (205.0, 105.0);
    let query = BBox::pixel(View::Frontal, [51.0, 52.0, 85.0, 79.0]).unwrap();

    let p = model.predict(&query, &mut PredictMode::<ChaCha8Rng>::Argmax).unwrap();
    assert_eq!((p.x_min, p.y_min), a_center);

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mode = PredictMode::Sample(&mut rng);
    let draws = 100_000;
    let mut hits = 0;
    for _ in 0..draws {
        let b = model.predict(&query, &mut mode).unwrap();
        if (b.x_min, b.y_min) == a_center {
            hits += 1;
        }
    }
    let freq = hits as f64 / draws as f64;
    assert!((0.894..=0.906).contains(&freq), "{freq}");
}

#[test]
fn fit_counts_match_tally_oracle() {
    let train = generated(3, 10_000);
    let spec = GridSpec::default();
    let (model, report) = fit_grid(&train, spec).unwrap();
    assert_eq!(report.used + report.skipped, 10_000);

    let mut tally: HashMap<(u8, u32, u32, u32, u32), u64> = HashMap::new();
    let cell = |x: f64, y: f64, w: u32, h: u32| -> Option<(u32, u32)> {
        if !(0.0..=w as f64).contains(&x) || !(0.0..=h as f64).contains(&y) {
            return None;
        }
        let c = ((x / 10.0).floor() as u32).min(w.div_ceil(10) - 1);
        let r = ((y / 10.0).floor() as u32).min(h.div_ceil(10) - 1);
        Some((r, c))
    };
    let mut used = 0;
    for r in &train {
        let f = &r.frontal_box;
        let b = &r.birdeye_box;
        let cells = [
            cell(f.x_min, f.y_min, 1920, 1080),
            cell(f.x_max, f.y_max, 1920, 1080),
            cell(b.x_min, b.y_min, 1920, 1080),
            cell(b.x_max, b.y_max, 1920, 1080),
        ];
        let [Some(ftl), Some(fbr), Some(btl), Some(bbr)] = cells else { continue };
        used += 1;
        *tally.entry((0, ftl.0, ftl.1, btl.0, btl.1)).or_default() += 1;
        *tally.entry((1, fbr.0, fbr.1, bbr.0, bbr.1)).or_default() += 1;
    }
    assert_eq!(report.used, used);

    let mut from_model: HashMap<(u8, u32, u32, u32, u32), u64> = HashMap::new();
    for (ri, role) in [CornerRole::TopLeft, CornerRole::BottomRight].into_iter().enumerate() {
        for (from, dist) in model.table(role) {
            for (to, count) in dist.counts() {
                from_model.insert((ri as u8, from.0, from.1, to.0, to.1), *count);
            }
        }
    }
    assert_eq!(from_model, tally);
}

#[test]
fn grid_fit_is_permutation_invariant_and_argmax_pure() {
    let train = generated(4, 2000);
    let mut shuffled = train.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    let (a, _) = fit_grid(&train, GridSpec::default()).unwrap();
    let (b, _) = fit_grid(&shuffled, GridSpec::default()).unwrap();
    assert_eq!(a, b);
    for r in generated(5, 200) {
        let p = a.predict(&r.frontal_box, &mut PredictMode::<ChaCha8Rng>::Argmax).unwrap();
        let q = a.predict(&r.frontal_box, &mut PredictMode::<ChaCha8Rng>::Argmax).unwrap();
        assert_eq!(p, q);
        assert!(p.x_min <= p.x_max && p.y_min <= p.y_max);
    }
}

#[test]
fn cell_of_covers_the_grid() {
    let spec = GridSpec::default();
    let mut seen = std::collections::HashSet::new();
    for y in (0..1080).step_by(5) {
        for x in (0..1920).step_by(5) {
            seen.insert(cell_of(bev_core::Point::new(x as f64, y as f64), &spec, View::Frontal).unwrap());
        }
    }
    assert_eq!(seen.len(), 108 * 192);
}

#[test]
fn homography_is_accurate_in_a_flat_world() {
    // One class, yaw pinned to the driving direction, vehicles straddling the
    // optical axis: the frontal bottom corners are images of ground points.
    let mut catalog = vec![ClassSpec::new(ClassLabel::Car, (4.5, 1.8, 1.5), 1.0)];
    catalog[0].models = 1;
    let cfg = SceneConfig {
        rng_seed: 8,
        bearing_half_angle_deg: 1.0,
        yaw: YawMixture {
            modes_deg: vec![0.0],
            weights: vec![1.0],
            concentration: f64::INFINITY,
        },
        class_catalog: catalog,
        ..SceneConfig::default()
    };
    let generator = SceneGenerator::new(cfg).unwrap();
    let records: Vec<DetectionRecord> = generator.frames(400).flat_map(|f| f.records).collect();
    let (train, test) = records.split_at(records.len() * 4 / 5);
    let model = Homography::fit(train).unwrap();
    let mean: f64 = test
        .iter()
        .map(|r| iou(&homography_predict(&model, &r.frontal_box).unwrap(), &r.birdeye_box))
        .sum::<f64>()
        / test.len() as f64;
    assert!(mean > 0.8, "{mean}");
    for r in test {
        let p = homography_predict(&model, &r.frontal_box).unwrap();
        assert!((p.height() - model.avg_height_px).abs() < 1e-9);
    }
}
