//! Box metrics, per-model aggregation with distance buckets, and report files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{BBox, DetectionRecord};

pub const DEFAULT_BUCKET_EDGES: [f64; 6] = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0];

/// Intersection over union; 0 for disjoint boxes or when both are degenerate.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let ih = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

pub fn centroid_distance(a: &BBox, b: &BBox) -> f64 {
    a.center().distance(&b.center())
}

/// `(|Δh| / h, |Δw| / w)` relative to the truth box.
pub fn size_errors(pred: &BBox, truth: &BBox) -> Result<(f64, f64)> {
    if truth.height() <= 0.0 || truth.width() <= 0.0 {
        return Err(Error::InvalidBox(format!("degenerate truth box {:?}", truth.coords())));
    }
    Ok((
        (pred.height() - truth.height()).abs() / truth.height(),
        (pred.width() - truth.width()).abs() / truth.width(),
    ))
}

/// `|w/h (pred) - w/h (truth)|`.
pub fn aspect_ratio_error(pred: &BBox, truth: &BBox) -> Result<f64> {
    if pred.height() <= 0.0 || truth.height() <= 0.0 {
        return Err(Error::InvalidBox("zero-height box in aspect ratio".into()));
    }
    Ok((pred.width() / pred.height() - truth.width() / truth.height()).abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairMetrics {
    pub iou: f64,
    pub cd: f64,
    pub h_err: f64,
    pub w_err: f64,
    pub ar_err: f64,
}

pub fn pair_metrics(pred: &BBox, truth: &BBox) -> Result<PairMetrics> {
    let (h_err, w_err) = size_errors(pred, truth)?;
    Ok(PairMetrics {
        iou: iou(pred, truth),
        cd: centroid_distance(pred, truth),
        h_err,
        w_err,
        ar_err: aspect_ratio_error(pred, truth)?,
    })
}

/// Neumaier compensated sum, so means do not depend on accumulation order
/// beyond the last bit or two.
#[derive(Debug, Clone, Copy, Default)]
struct Sum {
    sum: f64,
    comp: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn mean(&self, n: usize) -> f64 {
        (self.sum + self.comp) / n as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketEdges(Vec<f64>);

impl Default for BucketEdges {
    fn default() -> Self {
        Self(DEFAULT_BUCKET_EDGES.to_vec())
    }
}

impl BucketEdges {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::Config("need at least two bucket edges".into()));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("bucket edges must increase strictly: {edges:?}")));
        }
        Ok(Self(edges))
    }

    pub fn edges(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Bucket `[e_i, e_{i+1})`; distances outside the edges go to the end buckets.
    pub fn index(&self, distance: f64) -> usize {
        let inner = &self.0[1..self.0.len() - 1];
        inner.partition_point(|e| *e <= distance)
    }

    pub fn bounds(&self, i: usize) -> (f64, f64) {
        (self.0[i], self.0[i + 1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketStat {
    pub count: usize,
    pub mean_iou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelMetrics {
    pub model: String,
    /// Records that contributed to the means.
    pub count: usize,
    /// Records without a usable prediction or with a degenerate truth box.
    pub skipped: usize,
    pub iou: f64,
    pub cd: f64,
    pub h_err: f64,
    pub w_err: f64,
    pub ar_err: f64,
    pub buckets: Vec<BucketStat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub edges: BucketEdges,
    pub models: Vec<ModelMetrics>,
}

impl MetricReport {
    pub fn get(&self, model: &str) -> Option<&ModelMetrics> {
        self.models.iter().find(|m| m.model == model)
    }
}

/// Aggregates metrics of `predictions[i]` against `records[i].birdeye_box`.
pub fn evaluate(
    model: &str,
    records: &[DetectionRecord],
    predictions: &[Result<BBox>],
    edges: &BucketEdges,
) -> Result<ModelMetrics> {
    if records.is_empty() {
        return Err(Error::Empty("test set"));
    }
    if records.len() != predictions.len() {
        return Err(Error::Shape(format!(
            "{} records but {} predictions",
            records.len(),
            predictions.len()
        )));
    }
    let mut sums = [Sum::default(); 5];
    let mut bucket_sums = vec![(0usize, Sum::default()); edges.len()];
    let mut count = 0;
    let mut skipped = 0;
    for (r, p) in records.iter().zip(predictions) {
        let Ok(m) = p.as_ref().map_err(|_| ()).and_then(|p| pair_metrics(p, &r.birdeye_box).map_err(|_| ())) else {
            skipped += 1;
            continue;
        };
        count += 1;
        for (s, v) in sums.iter_mut().zip([m.iou, m.cd, m.h_err, m.w_err, m.ar_err]) {
            s.add(v);
        }
        let b = &mut bucket_sums[edges.index(r.distance_m)];
        b.0 += 1;
        b.1.add(m.iou);
    }
    let mean = |i: usize| if count == 0 { f64::NAN } else { sums[i].mean(count) };
    Ok(ModelMetrics {
        model: model.to_string(),
        count,
        skipped,
        iou: mean(0),
        cd: mean(1),
        h_err: mean(2),
        w_err: mean(3),
        ar_err: mean(4),
        buckets: bucket_sums
            .into_iter()
            .map(|(n, s)| BucketStat {
                count: n,
                mean_iou: (n > 0).then(|| s.mean(n)),
            })
            .collect(),
    })
}

pub const METRICS_HEADER: &str = "model,count,skipped,iou,cd,hE,wE,arE";

pub fn metrics_csv(report: &MetricReport) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for m in &report.models {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            m.model, m.count, m.skipped, m.iou, m.cd, m.h_err, m.w_err, m.ar_err
        );
    }
    s
}

/// Parses `metrics.csv` back into `(model, [count, skipped, iou, cd, hE, wE, arE])`.
pub fn parse_metrics_csv(text: &str) -> Result<Vec<(String, [f64; 7])>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == METRICS_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header {METRICS_HEADER}"),
            })
        }
    }
    lines
        .map(|(i, line)| {
            let err = |message: String| Error::Parse { line: i + 1, message };
            let mut fields = line.split(',');
            let name = fields.next().unwrap_or_default().to_string();
            let values: Vec<f64> = fields
                .map(|f| f.parse::<f64>().map_err(|e| err(format!("{f}: {e}"))))
                .collect::<Result<_>>()?;
            let values: [f64; 7] = values
                .try_into()
                .map_err(|v: Vec<f64>| err(format!("expected 7 values, got {}", v.len())))?;
            Ok((name, values))
        })
        .collect()
}

/// Rows are buckets; per model a mean IoU column and a count column.
/// Empty buckets leave the IoU cell empty.
pub fn iou_by_distance_csv(report: &MetricReport) -> String {
    let mut s = String::from("bucket_min_m,bucket_max_m");
    for m in &report.models {
        let _ = write!(s, ",{0},{0}_n", m.model);
    }
    s.push('\n');
    for i in 0..report.edges.len() {
        let (lo, hi) = report.edges.bounds(i);
        let _ = write!(s, "{lo},{hi}");
        for m in &report.models {
            let b = &m.buckets[i];
            match b.mean_iou {
                Some(v) => {
                    let _ = write!(s, ",{v},{}", b.count);
                }
                None => {
                    let _ = write!(s, ",,{}", b.count);
                }
            }
        }
        s.push('\n');
    }
    s
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// IoU against bucket midpoint, one polyline per model, broken at empty buckets.
pub fn iou_chart_svg(report: &MetricReport) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (60.0, 140.0, 20.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let edges = report.edges.edges();
    let (x0, x1) = (edges[0], edges[edges.len() - 1]);
    let px = |d: f64| left + (d - x0) / (x1 - x0) * pw;
    let py = |v: f64| top + (1.0 - v) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{left} {top} V{:.2} H{:.2}" stroke="black" fill="none"/>"#,
        top + ph,
        left + pw
    );
    for e in edges {
        let x = px(*e);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{e}</text>"#,
            top + ph + 16.0
        );
    }
    for k in 0..=5 {
        let v = k as f64 / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.1}</text>"#,
            left - 6.0,
            py(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">distance (m)</text>"#,
        left + pw / 2.0,
        h - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">mean IoU</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );
    for (mi, m) in report.models.iter().enumerate() {
        let color = PALETTE[mi % PALETTE.len()];
        let mut segment: Vec<(f64, f64)> = Vec::new();
        let mut segments = Vec::new();
        for (i, b) in m.buckets.iter().enumerate() {
            let (lo, hi) = report.edges.bounds(i);
            match b.mean_iou {
                Some(v) => segment.push((px((lo + hi) / 2.0), py(v))),
                None => segments.push(std::mem::take(&mut segment)),
            }
        }
        segments.push(segment);
        for seg in segments.iter().filter(|s| !s.is_empty()) {
            let pts: Vec<String> = seg.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" stroke="{color}" stroke-width="2" fill="none"/>"#,
                pts.join(" ")
            );
            for (x, y) in seg {
                let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#);
            }
        }
        let ly = top + 10.0 + 18.0 * mi as f64;
        let lx = left + pw + 14.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            m.model
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `metrics.csv`, `iou_by_distance.csv` and `iou_by_distance.svg` into `dir`.
pub fn emit_report(report: &MetricReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, body) in [
        ("metrics.csv", metrics_csv(report)),
        ("iou_by_distance.csv", iou_by_distance_csv(report)),
        ("iou_by_distance.svg", iou_chart_svg(report)),
    ] {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{ClassLabel, View};
    use proptest::prelude::*;

    fn bx(c: [f64; 4]) -> BBox {
        BBox::pixel(View::Birdeye, c).unwrap()
    }

    fn rec(truth: [f64; 4], distance: f64) -> DetectionRecord {
        DetectionRecord {
            frame_id: "f".into(),
            entity_id: 1,
            model_id: 0,
            class_label: ClassLabel::Car,
            frontal_box: BBox::pixel(View::Frontal, [0.0, 0.0, 1.0, 1.0]).unwrap(),
            birdeye_box: bx(truth),
            distance_m: distance,
            yaw_deg: 0.0,
        }
    }

    #[test]
    fn metric_examples() {
        let a = bx([0.0, 0.0, 10.0, 10.0]);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bx([20.0, 20.0, 30.0, 30.0])), 0.0);
        assert_eq!(iou(&a, &bx([0.0, 5.0, 10.0, 15.0])), 1.0 / 3.0);
        let p = bx([5.0, 5.0, 5.0, 5.0]);
        assert_eq!(iou(&p, &p), 0.0);

        assert_eq!(centroid_distance(&a, &a), 0.0);
        let b = bx([3.0, 4.0, 13.0, 14.0]);
        assert_eq!(centroid_distance(&a, &b), 5.0);
        assert_eq!(centroid_distance(&b, &a), 5.0);

        assert_eq!(size_errors(&a, &a).unwrap(), (0.0, 0.0));
        assert_eq!(size_errors(&bx([0.0, 0.0, 10.0, 20.0]), &a).unwrap().0, 1.0);
        let (he, we) = size_errors(&bx([0.0, 0.0, 8.0, 12.0]), &a).unwrap();
        assert!((he - 0.2).abs() < 1e-15 && (we - 0.2).abs() < 1e-15);
        assert!(size_errors(&a, &bx([0.0, 0.0, 0.0, 10.0])).is_err());

        assert_eq!(aspect_ratio_error(&a, &a).unwrap(), 0.0);
        assert_eq!(aspect_ratio_error(&bx([0.0, 0.0, 20.0, 10.0]), &a).unwrap(), 1.0);
        assert_eq!(
            aspect_ratio_error(&bx([0.0, 0.0, 3.0, 2.0]), &bx([0.0, 0.0, 4.0, 2.0])).unwrap(),
            0.5
        );
        assert!(aspect_ratio_error(&bx([0.0, 0.0, 3.0, 0.0]), &a).is_err());
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (0.0..500.0f64, 0.0..500.0f64, 0.1..200.0f64, 0.1..200.0f64)
            .prop_map(|(x, y, w, h)| bx([x, y, x + w, y + h]))
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
            let v = iou(&a, &b);
            prop_assert_eq!(v, iou(&b, &a));
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert_eq!(iou(&a, &a), 1.0);
            if v == 1.0 {
                prop_assert!((a.area() - b.area()).abs() < 1e-9 * a.area().max(1.0));
            }
        }

        #[test]
        fn nested_iou_is_area_ratio(outer in arb_box(), fx in 0.0..1.0f64, fy in 0.0..1.0f64, sw in 0.05..1.0f64, sh in 0.05..1.0f64) {
            let w = outer.width() * sw;
            let h = outer.height() * sh;
            let x = outer.x_min + (outer.width() - w) * fx;
            let y = outer.y_min + (outer.height() - h) * fy;
            let inner = bx([x, y, (x + w).min(outer.x_max), (y + h).min(outer.y_max)]);
            let expect = inner.area() / outer.area();
            prop_assert!((iou(&inner, &outer) - expect).abs() < 1e-9);
        }

        #[test]
        fn centroid_distance_symmetric(a in arb_box(), b in arb_box()) {
            prop_assert_eq!(centroid_distance(&a, &b), centroid_distance(&b, &a));
            prop_assert!(centroid_distance(&a, &b) >= 0.0);
        }
    }

    #[test]
    fn oracle_model_is_perfect() {
        let recs: Vec<_> = (0..30).map(|i| rec([i as f64, 0.0, i as f64 + 5.0, 9.0], 5.0 + i as f64)).collect();
        let preds: Vec<Result<BBox>> = recs.iter().map(|r| Ok(r.birdeye_box)).collect();
        let m = evaluate("oracle", &recs, &preds, &BucketEdges::default()).unwrap();
        assert_eq!((m.iou, m.cd, m.h_err, m.w_err, m.ar_err), (1.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!(m.count, 30);
        assert_eq!(m.buckets.iter().map(|b| b.count).sum::<usize>(), 30);
        assert!(m.buckets.iter().all(|b| b.mean_iou == Some(1.0)));
    }

    #[test]
    fn single_record_means() {
        let r = rec([0.0, 0.0, 10.0, 10.0], 12.0);
        let p = bx([0.0, 5.0, 10.0, 15.0]);
        let m = evaluate("x", std::slice::from_ref(&r), &[Ok(p)], &BucketEdges::default()).unwrap();
        let pm = pair_metrics(&p, &r.birdeye_box).unwrap();
        assert_eq!((m.iou, m.cd, m.h_err, m.w_err, m.ar_err), (pm.iou, pm.cd, pm.h_err, pm.w_err, pm.ar_err));
        assert_eq!(m.buckets[1].count, 1);
        assert_eq!(m.buckets[0].mean_iou, None);
    }

    #[test]
    fn means_match_loop_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut recs = Vec::new();
        let mut preds = Vec::new();
        for _ in 0..1000 {
            let (x, y) = (rng.random_range(0.0..800.0), rng.random_range(0.0..800.0));
            let (w, h) = (rng.random_range(1.0..60.0), rng.random_range(1.0..60.0));
            recs.push(rec([x, y, x + w, y + h], rng.random_range(0.0..40.0)));
            let (dx, dy) = (rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
            let s: f64 = rng.random_range(0.5..1.5);
            preds.push(Ok(bx([x + dx, y + dy, x + dx + w * s, y + dy + h])));
        }
        let edges = BucketEdges::default();
        let m = evaluate("m", &recs, &preds, &edges).unwrap();

        let mut tot = [0.0; 5];
        let mut bucket = vec![(0usize, 0.0); 5];
        for (r, p) in recs.iter().zip(&preds) {
            let p = p.as_ref().unwrap();
            let t = &r.birdeye_box;
            let v = iou(p, t);
            tot[0] += v;
            tot[1] += ((p.center().x - t.center().x).powi(2) + (p.center().y - t.center().y).powi(2)).sqrt();
            tot[2] += (p.height() - t.height()).abs() / t.height();
            tot[3] += (p.width() - t.width()).abs() / t.width();
            tot[4] += (p.width() / p.height() - t.width() / t.height()).abs();
            let b = if r.distance_m < 10.0 {
                0
            } else if r.distance_m >= 25.0 {
                4
            } else {
                ((r.distance_m - 5.0) / 5.0).floor() as usize
            };
            bucket[b].0 += 1;
            bucket[b].1 += v;
        }
        let got = [m.iou, m.cd, m.h_err, m.w_err, m.ar_err];
        for (g, t) in got.iter().zip(tot) {
            assert!((g - t / 1000.0).abs() < 1e-9, "{g} vs {}", t / 1000.0);
        }
        for (b, (n, s)) in m.buckets.iter().zip(bucket) {
            assert_eq!(b.count, n);
            assert!((b.mean_iou.unwrap() - s / n as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn missing_predictions_are_skipped() {
        let recs = vec![rec([0.0, 0.0, 10.0, 10.0], 6.0), rec([0.0, 0.0, 10.0, 10.0], 6.0)];
        let preds = vec![Ok(recs[0].birdeye_box), Err(Error::MissingFeature("f/1".into()))];
        let m = evaluate("m", &recs, &preds, &BucketEdges::default()).unwrap();
        assert_eq!((m.count, m.skipped), (1, 1));
        assert!(evaluate("m", &[], &[], &BucketEdges::default()).is_err());
    }

    #[test]
    fn bucket_edges() {
        let e = BucketEdges::default();
        assert_eq!(e.len(), 5);
        assert_eq!(e.index(2.0), 0);
        assert_eq!(e.index(5.0), 0);
        assert_eq!(e.index(10.0), 1);
        assert_eq!(e.index(29.9), 4);
        assert_eq!(e.index(45.0), 4);
        assert!(BucketEdges::new(vec![5.0, 5.0]).is_err());
        assert!(BucketEdges::new(vec![5.0]).is_err());
    }

    fn sample_report() -> MetricReport {
        let recs = vec![
            rec([0.0, 0.0, 10.0, 10.0], 6.0),
            rec([0.0, 0.0, 10.0, 10.0], 27.0),
            rec([0.0, 0.0, 30.0, 7.0], 13.0),
        ];
        let preds: Vec<Result<BBox>> = vec![
            Ok(bx([1.0, 0.3, 10.7, 11.0])),
            Ok(bx([0.0, 5.0, 10.0, 15.0])),
            Ok(bx([2.0, 1.0, 29.0, 7.1])),
        ];
        let edges = BucketEdges::default();
        MetricReport {
            models: vec![
                evaluate("grid", &recs, &preds, &edges).unwrap(),
                evaluate("sdpn", &recs[..1], &preds[..1], &edges).unwrap(),
            ],
            edges,
        }
    }

    #[test]
    fn csv_roundtrip_full_precision() {
        let report = sample_report();
        let rows = parse_metrics_csv(&metrics_csv(&report)).unwrap();
        assert_eq!(rows.len(), 2);
        for (m, (name, v)) in report.models.iter().zip(rows) {
            assert_eq!(m.model, name);
            assert_eq!(v, [m.count as f64, m.skipped as f64, m.iou, m.cd, m.h_err, m.w_err, m.ar_err]);
        }
    }

    #[test]
    fn empty_buckets_leave_gaps() {
        let report = sample_report();
        let csv = iou_by_distance_csv(&report);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "bucket_min_m,bucket_max_m,grid,grid_n,sdpn,sdpn_n");
        assert_eq!(lines.len(), 6);
        assert!(lines[2].starts_with("10,15,"));
        assert!(lines[2].ends_with(",,0"));
        assert!(lines[4].contains(",,0,,0"));
        let svg = iou_chart_svg(&report);
        // grid: buckets 0..=1 then a gap, then bucket 4 alone
        assert_eq!(svg.matches("<polyline").count(), 3);
    }

    #[test]
    fn emission_is_deterministic() {
        let report = sample_report();
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        emit_report(&report, &a).unwrap();
        emit_report(&report, &b).unwrap();
        for name in ["metrics.csv", "iou_by_distance.csv", "iou_by_distance.svg"] {
            assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
        }
    }
}
