//! Learnable projection models: the coordinates-only MLP baseline and SDPN,
//! which fuses a per-detection appearance vector with an encoding of the
//! frontal box.
//!
//! The appearance backbone is frozen, so it is replaced here by a
//! [`FeatureProvider`]: either vectors loaded from a feature file computed
//! offline, or deterministic class-prototype vectors for synthetic data.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetHeader;
use crate::error::{Error, Result};
use crate::neuralnet::{
    self, Activation, EpochLoss, Hyper, LayerSpec, NetInput, NetworkSpec, NetworkState, TrainSet,
};
use crate::types::{BBox, ClassLabel, DetectionRecord, FrameDims, Point, Space, View};

pub const COORD_DIM: usize = 4;
pub const ENCODER_WIDTHS: [usize; 3] = [256, 256, 256];
pub const DECODER_WIDTHS: [usize; 6] = [1024, 1024, 512, 256, 128, 4];
pub const DROPOUT_P: f64 = 0.25;
pub const DEFAULT_FEATURE_DIM: usize = 2048;
const MLP_DEPTH: usize = 6;
const PARAM_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mlp,
    Sdpn,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Sdpn => "sdpn",
        }
    }
}

fn dense_stack(in_dim: usize, widths: &[usize], last_activation: Activation, last_dropout: f64) -> Vec<LayerSpec> {
    let mut prev = in_dim;
    widths
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let last = i + 1 == widths.len();
            let spec = if last {
                LayerSpec::new(prev, w, last_activation, last_dropout)
            } else {
                LayerSpec::new(prev, w, Activation::Relu, DROPOUT_P)
            };
            prev = w;
            spec
        })
        .collect()
}

/// Coordinate encoder (256, 256, 256) and decoder (1024, 1024, 512, 256, 128, 4)
/// over `concat[feature, code]`; ReLU throughout except the tanh output.
pub fn build_sdpn(feature_dim: usize) -> Result<NetworkSpec> {
    if feature_dim == 0 {
        return Err(Error::Config("feature_dim must be positive".into()));
    }
    let code = *ENCODER_WIDTHS.last().expect("non-empty");
    let spec = NetworkSpec {
        branch: dense_stack(COORD_DIM, &ENCODER_WIDTHS, Activation::Relu, DROPOUT_P),
        side_dim: feature_dim,
        trunk: dense_stack(feature_dim + code, &DECODER_WIDTHS, Activation::Tanh, 0.0),
    };
    spec.validate()?;
    Ok(spec)
}

fn mlp_params(width: usize) -> usize {
    // input layer, (depth - 1) hidden-to-hidden layers, output layer
    (COORD_DIM + 1) * width + (MLP_DEPTH - 1) * (width * width + width) + (width + 1) * COORD_DIM
}

/// Fully connected 4 -> 6 hidden layers of one width -> 4 (tanh), with the
/// width chosen so the parameter count is closest to `reference_params`.
pub fn build_mlp_baseline(reference_params: usize) -> Result<NetworkSpec> {
    if reference_params == 0 {
        return Err(Error::Config("reference parameter count must be positive".into()));
    }
    // 5 w^2 + 14 w + 4 = reference, then check the integer neighbours.
    let a = (MLP_DEPTH - 1) as f64;
    let b = (COORD_DIM + 1 + MLP_DEPTH - 1 + COORD_DIM) as f64;
    let c = COORD_DIM as f64 - reference_params as f64;
    let root = ((-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a)).max(1.0);
    let guess = root.round() as usize;
    let width = (guess.saturating_sub(1).max(1)..=guess + 1)
        .min_by_key(|w| (mlp_params(*w) as i64 - reference_params as i64).abs())
        .expect("candidates");
    let got = mlp_params(width) as f64;
    let rel = (got - reference_params as f64).abs() / reference_params as f64;
    if rel > PARAM_TOLERANCE {
        return Err(Error::Config(format!(
            "no uniform width gets within 5% of {reference_params} parameters (best {got})"
        )));
    }
    let spec = NetworkSpec::mlp(dense_stack(
        COORD_DIM,
        &[vec![width; MLP_DEPTH], vec![COORD_DIM]].concat(),
        Activation::Tanh,
        0.0,
    ));
    spec.validate()?;
    Ok(spec)
}

/// Where appearance vectors come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum FeatureSource {
    /// Class prototype plus a per-model perturbation of norm about `perturbation`.
    Synthetic {
        seed: u64,
        dim: usize,
        perturbation: f64,
    },
    /// Vectors read from a feature file keyed by record key.
    File { dim: usize },
}

impl FeatureSource {
    pub fn dim(&self) -> usize {
        match self {
            FeatureSource::Synthetic { dim, .. } | FeatureSource::File { dim } => *dim,
        }
    }
}

#[derive(Debug, Clone)]
pub enum FeatureProvider {
    Synthetic {
        seed: u64,
        dim: usize,
        perturbation: f64,
    },
    File {
        dim: usize,
        vectors: HashMap<String, Vec<f32>>,
    },
}

impl FeatureProvider {
    pub fn synthetic(seed: u64, dim: usize) -> Self {
        FeatureProvider::Synthetic {
            seed,
            dim,
            perturbation: 0.1,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let (dim, vectors) = read_feature_file(path)?;
        Ok(FeatureProvider::File {
            dim,
            vectors: vectors.into_iter().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureProvider::Synthetic { dim, .. } | FeatureProvider::File { dim, .. } => *dim,
        }
    }

    pub fn source(&self) -> FeatureSource {
        match self {
            FeatureProvider::Synthetic {
                seed,
                dim,
                perturbation,
            } => FeatureSource::Synthetic {
                seed: *seed,
                dim: *dim,
                perturbation: *perturbation,
            },
            FeatureProvider::File { dim, .. } => FeatureSource::File { dim: *dim },
        }
    }

    pub fn from_source(source: FeatureSource) -> Option<Self> {
        match source {
            FeatureSource::Synthetic {
                seed,
                dim,
                perturbation,
            } => Some(FeatureProvider::Synthetic {
                seed,
                dim,
                perturbation,
            }),
            FeatureSource::File { .. } => None,
        }
    }

    pub fn feature(&self, r: &DetectionRecord) -> Result<Vec<f64>> {
        match self {
            FeatureProvider::Synthetic {
                seed,
                dim,
                perturbation,
            } => Ok(synth_feature(r.model_id, r.class_label, *seed, *dim, *perturbation)),
            FeatureProvider::File { vectors, .. } => {
                let key = r.key();
                vectors
                    .get(&key)
                    .map(|v| v.iter().map(|x| *x as f64).collect())
                    .ok_or(Error::MissingFeature(key))
            }
        }
    }
}

fn gaussian_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in &mut v {
        *x /= norm;
    }
    v
}

/// Deterministic stand-in for a backbone embedding: the class's random unit
/// prototype plus a per-model Gaussian offset of expected norm `perturbation`.
pub fn synth_feature(model_id: u64, class: ClassLabel, seed: u64, dim: usize, perturbation: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(class.index() as u64);
    let mut v = gaussian_unit(&mut rng, dim);
    if perturbation != 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1 << 32 | model_id);
        let scale = perturbation / (dim as f64).sqrt();
        for x in &mut v {
            let n: f64 = StandardNormal.sample(&mut rng);
            *x += scale * n;
        }
    }
    v
}

const FEATURE_MAGIC: &[u8; 8] = b"BEVFEAT1";

/// Feature file: magic `BEVFEAT1`, `u32` dim, `u64` count, then per record a
/// `u32` key length, the UTF-8 key and `dim` little-endian `f32` values.
pub fn write_feature_file(path: &Path, dim: usize, entries: &[(String, Vec<f32>)]) -> Result<()> {
    if let Some((key, _)) = entries.iter().find(|(_, v)| v.len() != dim) {
        return Err(Error::Shape(format!("feature for {key} does not have {dim} values")));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        w.write_all(FEATURE_MAGIC)?;
        w.write_all(&(dim as u32).to_le_bytes())?;
        w.write_all(&(entries.len() as u64).to_le_bytes())?;
        for (key, v) in entries {
            w.write_all(&(key.len() as u32).to_le_bytes())?;
            w.write_all(key.as_bytes())?;
            for x in v {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_feature_file(path: &Path) -> Result<(usize, Vec<(String, Vec<f32>)>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let io = |e| Error::io(path, e);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != FEATURE_MAGIC {
        return Err(Error::Model(format!("{}: not a feature file", path.display())));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4).map_err(io)?;
    let dim = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b8).map_err(io)?;
    let count = u64::from_le_bytes(b8) as usize;
    let mut out = Vec::with_capacity(count);
    let mut raw = vec![0u8; dim * 4];
    for _ in 0..count {
        r.read_exact(&mut b4).map_err(io)?;
        let mut key = vec![0u8; u32::from_le_bytes(b4) as usize];
        r.read_exact(&mut key).map_err(io)?;
        let key = String::from_utf8(key).map_err(|e| Error::Model(e.to_string()))?;
        r.read_exact(&mut raw).map_err(io)?;
        let v = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        out.push((key, v));
    }
    Ok((dim, out))
}

/// Normalized `[-1, 1]` coordinates of a pixel box, after clipping to the frame.
pub fn encode_box(b: &BBox, dims: FrameDims) -> [f64; 4] {
    let clipped = b.clamped_to(dims).unwrap_or_else(|| {
        // Entirely outside: collapse onto the nearest frame point.
        let p = Point::new(b.center().x.clamp(0.0, dims.w()), b.center().y.clamp(0.0, dims.h()));
        BBox::from_corners(p, p, b.space, b.view).expect("finite")
    });
    clipped.normalize(dims).expect("clipped box is inside the frame").coords()
}

/// Bird's-eye pixel box from a normalized network output row.
pub fn decode_box(row: ArrayView1<'_, f64>, dims: FrameDims) -> Result<BBox> {
    let c = |i: usize| row[i].clamp(-1.0, 1.0);
    BBox::from_corners(Point::new(c(0), c(1)), Point::new(c(2), c(3)), Space::Normalized, View::Birdeye)
        .map(|b| b.denormalize(dims))
}

/// A trained MLP or SDPN together with everything needed to run it.
#[derive(Debug, Clone)]
pub struct TrainedNetwork {
    pub kind: ModelKind,
    pub state: NetworkState,
    pub frontal_dims: FrameDims,
    pub birdeye_dims: FrameDims,
    pub features: Option<FeatureSource>,
}

#[derive(Serialize, Deserialize)]
struct NetworkMetadata {
    kind: ModelKind,
    frontal_dims: FrameDims,
    birdeye_dims: FrameDims,
    features: Option<FeatureSource>,
}

impl TrainedNetwork {
    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = serde_json::to_value(NetworkMetadata {
            kind: self.kind,
            frontal_dims: self.frontal_dims,
            birdeye_dims: self.birdeye_dims,
            features: self.features,
        })?;
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        neuralnet::write_container(BufWriter::new(file), &self.state, &meta)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let (state, meta) = neuralnet::read_container(BufReader::new(file))?;
        let meta: NetworkMetadata = serde_json::from_value(meta)?;
        Ok(Self {
            kind: meta.kind,
            state,
            frontal_dims: meta.frontal_dims,
            birdeye_dims: meta.birdeye_dims,
            features: meta.features,
        })
    }

    /// Predicts bird's-eye boxes; records without a feature get an error
    /// naming the record, the rest are still predicted.
    pub fn predict(&self, records: &[DetectionRecord], features: Option<&FeatureProvider>) -> Result<Vec<Result<BBox>>> {
        const CHUNK: usize = 512;
        let mut out: Vec<Result<BBox>> = Vec::with_capacity(records.len());
        for chunk in records.chunks(CHUNK) {
            let mut rows = Vec::with_capacity(chunk.len());
            let mut side = Vec::new();
            let mut slots: Vec<Result<usize>> = Vec::with_capacity(chunk.len());
            for r in chunk {
                let feature = match self.kind {
                    ModelKind::Mlp => Ok(None),
                    ModelKind::Sdpn => match features {
                        None => Err(Error::MissingFeature(r.key())),
                        Some(p) => p.feature(r).and_then(|f| {
                            if f.len() == self.state.spec.side_dim {
                                Ok(Some(f))
                            } else {
                                Err(Error::Shape(format!(
                                    "feature for {} has {} values, model expects {}",
                                    r.key(),
                                    f.len(),
                                    self.state.spec.side_dim
                                )))
                            }
                        }),
                    },
                };
                match feature {
                    Ok(f) => {
                        slots.push(Ok(rows.len()));
                        rows.push(encode_box(&r.frontal_box, self.frontal_dims));
                        if let Some(f) = f {
                            side.extend(f);
                        }
                    }
                    Err(e) => slots.push(Err(e)),
                }
            }
            let pred = if rows.is_empty() {
                Array2::zeros((0, COORD_DIM))
            } else {
                let main = Array2::from_shape_vec((rows.len(), COORD_DIM), rows.concat())
                    .map_err(|e| Error::Shape(e.to_string()))?;
                let side = match self.kind {
                    ModelKind::Sdpn => Some(
                        Array2::from_shape_vec((rows.len(), self.state.spec.side_dim), side)
                            .map_err(|e| Error::Shape(e.to_string()))?,
                    ),
                    ModelKind::Mlp => None,
                };
                neuralnet::predict(&self.state, NetInput::new(main.view(), side.as_ref().map(|s| s.view())))?
            };
            for slot in slots {
                out.push(slot.and_then(|i| decode_box(pred.row(i), self.birdeye_dims)));
            }
        }
        Ok(out)
    }
}

/// Builds network inputs and normalized targets for `records`.
pub fn training_set(
    kind: ModelKind,
    records: &[DetectionRecord],
    header: &DatasetHeader,
    features: Option<&FeatureProvider>,
) -> Result<TrainSet> {
    let n = records.len();
    let mut main = Array2::zeros((n, COORD_DIM));
    let mut target = Array2::zeros((n, COORD_DIM));
    let mut side = match (kind, features) {
        (ModelKind::Sdpn, Some(p)) => Some(Array2::zeros((n, p.dim()))),
        (ModelKind::Sdpn, None) => {
            return Err(Error::Config("SDPN training needs a feature provider".into()))
        }
        (ModelKind::Mlp, _) => None,
    };
    for (i, r) in records.iter().enumerate() {
        let f = encode_box(&r.frontal_box, header.frontal_dims);
        let t = encode_box(&r.birdeye_box, header.birdeye_dims);
        for j in 0..COORD_DIM {
            main[(i, j)] = f[j];
            target[(i, j)] = t[j];
        }
        if let (Some(side), Some(p)) = (side.as_mut(), features) {
            let v = p.feature(r)?;
            if v.len() != side.ncols() {
                return Err(Error::Shape(format!("feature for {} has {} values", r.key(), v.len())));
            }
            for (j, x) in v.into_iter().enumerate() {
                side[(i, j)] = x;
            }
        }
    }
    Ok(TrainSet { main, side, target })
}

/// Network spec for `kind`; the MLP matches SDPN's parameter count for `feature_dim`.
pub fn network_spec(kind: ModelKind, feature_dim: usize) -> Result<NetworkSpec> {
    let sdpn = build_sdpn(feature_dim)?;
    match kind {
        ModelKind::Sdpn => Ok(sdpn),
        ModelKind::Mlp => build_mlp_baseline(sdpn.param_count()),
    }
}

/// Trains an MLP or SDPN on `train`, early-stopping on `val`.
pub fn train_network(
    kind: ModelKind,
    train: &[DetectionRecord],
    val: &[DetectionRecord],
    header: &DatasetHeader,
    features: &FeatureProvider,
    hyper: &Hyper,
    on_epoch: impl FnMut(&EpochLoss),
) -> Result<(TrainedNetwork, Vec<EpochLoss>)> {
    let spec = network_spec(kind, features.dim())?;
    let provider = (kind == ModelKind::Sdpn).then_some(features);
    let train_set = training_set(kind, train, header, provider)?;
    let val_set = training_set(kind, val, header, provider)?;
    let outcome = neuralnet::train_with(spec, &train_set, &val_set, hyper, on_epoch)?;
    Ok((
        TrainedNetwork {
            kind,
            state: outcome.state,
            frontal_dims: header.frontal_dims,
            birdeye_dims: header.birdeye_dims,
            features: provider.map(FeatureProvider::source),
        },
        outcome.history,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    /// Independent per-layer arithmetic for the SDPN parameter count.
    fn sdpn_params_by_hand(fd: usize) -> usize {
        let enc = (4 * 256 + 256) + (256 * 256 + 256) * 2;
        let dims = [fd + 256, 1024, 1024, 512, 256, 128, 4];
        let dec: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        enc + dec
    }

    #[test]
    fn sdpn_layout() {
        let spec = build_sdpn(2048).unwrap();
        assert_eq!(spec.trunk[0].in_dim, 2304);
        assert_eq!(spec.side_dim, 2048);
        assert_eq!(spec.input_dim(), 4);
        assert_eq!(spec.output_dim(), 4);
        let widths: Vec<usize> = spec.branch.iter().map(|l| l.out_dim).collect();
        assert_eq!(widths, ENCODER_WIDTHS);
        let widths: Vec<usize> = spec.trunk.iter().map(|l| l.out_dim).collect();
        assert_eq!(widths, DECODER_WIDTHS);
        let layers: Vec<&LayerSpec> = spec.layers().collect();
        let (last, hidden) = layers.split_last().unwrap();
        assert_eq!(last.activation, Activation::Tanh);
        assert_eq!(last.dropout_p, 0.0);
        assert!(hidden.iter().all(|l| l.activation == Activation::Relu && l.dropout_p == 0.25));
        for fd in [1, 64, 256, 2048] {
            assert_eq!(build_sdpn(fd).unwrap().param_count(), sdpn_params_by_hand(fd));
        }
        assert!(build_sdpn(0).is_err());
    }

    #[test]
    fn mlp_matches_reference_count() {
        for fd in [16, 256, 2048] {
            let reference = build_sdpn(fd).unwrap().param_count();
            let spec = build_mlp_baseline(reference).unwrap();
            assert_eq!(spec.input_dim(), 4);
            assert_eq!(spec.output_dim(), 4);
            assert_eq!(spec.trunk.len(), 7);
            // Brute-force: scan every width for the closest count.
            let best = (1..5000)
                .min_by_key(|w| (mlp_params(*w) as i64 - reference as i64).abs())
                .unwrap();
            assert_eq!(spec.trunk[0].out_dim, best);
            let counted: usize = spec.layers().map(|l| l.in_dim * l.out_dim + l.out_dim).sum();
            let rel = (counted as f64 - reference as f64).abs() / reference as f64;
            assert!(rel <= 0.05, "{rel}");
            assert_eq!(spec, build_mlp_baseline(reference).unwrap());
        }
        assert!(build_mlp_baseline(10).is_err());
    }

    #[test]
    fn synthetic_features() {
        let a = synth_feature(101, ClassLabel::Van, 3, 64, 0.1);
        assert_eq!(a, synth_feature(101, ClassLabel::Van, 3, 64, 0.1));
        assert_ne!(a, synth_feature(102, ClassLabel::Van, 3, 64, 0.1));
        let proto = synth_feature(101, ClassLabel::Van, 3, 64, 0.0);
        assert_eq!(proto, synth_feature(999, ClassLabel::Van, 3, 64, 0.0));
        let norm: f64 = proto.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);

        let mut total = 0.0;
        for k in 0..100u64 {
            let x = synth_feature(k, ClassLabel::Car, 1000 + k, 2048, 0.1);
            let y = synth_feature(k + 7, ClassLabel::Bus, 1000 + k, 2048, 0.1);
            total += cosine(&x, &y).abs();
        }
        assert!(total / 100.0 < 0.2);
    }

    #[test]
    fn feature_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        let entries = vec![("a/1".to_string(), vec![1.0f32, -2.5]), ("b/2".to_string(), vec![0.0, 3.25])];
        write_feature_file(&path, 2, &entries).unwrap();
        let (dim, back) = read_feature_file(&path).unwrap();
        assert_eq!(dim, 2);
        assert_eq!(back, entries);
    }

    fn record(frontal: [f64; 4]) -> DetectionRecord {
        DetectionRecord {
            frame_id: "f".into(),
            entity_id: 1,
            model_id: 3,
            class_label: ClassLabel::Car,
            frontal_box: BBox::pixel(View::Frontal, frontal).unwrap(),
            birdeye_box: BBox::pixel(View::Birdeye, [900.0, 300.0, 930.0, 360.0]).unwrap(),
            distance_m: 12.0,
            yaw_deg: 0.0,
        }
    }

    fn zero_head(kind: ModelKind, fd: usize) -> TrainedNetwork {
        let spec = network_spec(kind, fd).unwrap();
        let mut state = NetworkState::init(spec, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let last = state.layers.last_mut().unwrap();
        last.weight.fill(0.0);
        last.bias.fill(0.0);
        TrainedNetwork {
            kind,
            state,
            frontal_dims: FrameDims::default(),
            birdeye_dims: FrameDims::default(),
            features: None,
        }
    }

    #[test]
    fn zero_head_predicts_frame_center() {
        let model = zero_head(ModelKind::Mlp, 8);
        let out = model.predict(&[record([10.0, 20.0, 30.0, 40.0])], None).unwrap();
        assert_eq!(out[0].as_ref().unwrap().coords(), [960.0, 540.0, 960.0, 540.0]);
    }

    #[test]
    fn sdpn_requires_features() {
        let model = zero_head(ModelKind::Sdpn, 8);
        let out = model.predict(&[record([10.0, 20.0, 30.0, 40.0])], None).unwrap();
        match &out[0] {
            Err(Error::MissingFeature(key)) => assert_eq!(key, "f/1"),
            other => panic!("{other:?}"),
        }
        let provider = FeatureProvider::File {
            dim: 8,
            vectors: HashMap::new(),
        };
        let out = model.predict(&[record([10.0, 20.0, 30.0, 40.0])], Some(&provider)).unwrap();
        assert!(matches!(out[0], Err(Error::MissingFeature(_))));
    }

    #[test]
    fn outputs_stay_inside_birdeye_frame() {
        let spec = network_spec(ModelKind::Sdpn, 8).unwrap();
        let mut state = NetworkState::init(spec, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        // Blow up the head so tanh saturates.
        state.layers.last_mut().unwrap().weight.mapv_inplace(|w| w * 1e3);
        let model = TrainedNetwork {
            kind: ModelKind::Sdpn,
            state,
            frontal_dims: FrameDims::default(),
            birdeye_dims: FrameDims::default(),
            features: None,
        };
        let provider = FeatureProvider::synthetic(0, 8);
        let recs: Vec<DetectionRecord> = (0..50)
            .map(|i| record([i as f64 * 30.0, 10.0, i as f64 * 30.0 + 60.0, 500.0]))
            .collect();
        for b in model.predict(&recs, Some(&provider)).unwrap() {
            let b = b.unwrap();
            assert!(b.inside(FrameDims::default()));
            assert!(b.x_min <= b.x_max && b.y_min <= b.y_max);
        }
    }

    #[test]
    fn constant_features_make_sdpn_box_only() {
        let spec = network_spec(ModelKind::Sdpn, 16).unwrap();
        let state = NetworkState::init(spec, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let model = TrainedNetwork {
            kind: ModelKind::Sdpn,
            state,
            frontal_dims: FrameDims::default(),
            birdeye_dims: FrameDims::default(),
            features: None,
        };
        let constant = vec![0.25f32; 16];
        let mut a = record([100.0, 200.0, 300.0, 400.0]);
        let mut b = a.clone();
        a.model_id = 1;
        b.model_id = 2;
        b.entity_id = 2;
        let provider = FeatureProvider::File {
            dim: 16,
            vectors: [(a.key(), constant.clone()), (b.key(), constant)].into_iter().collect(),
        };
        let out = model.predict(&[a, b], Some(&provider)).unwrap();
        assert_eq!(out[0].as_ref().unwrap(), out[1].as_ref().unwrap());
    }

    #[test]
    fn encode_clips_out_of_frame_boxes() {
        let dims = FrameDims::default();
        let b = BBox::pixel(View::Frontal, [-5.0, 10.0, 1925.0, 20.0]).unwrap();
        let e = encode_box(&b, dims);
        assert_eq!(e[0], -1.0);
        assert_eq!(e[2], 1.0);
    }
}
