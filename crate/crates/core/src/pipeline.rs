//! Uniform handling of the four model kinds: loading artifacts by content and
//! batch prediction.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::{evaluate, BucketEdges, ModelMetrics};
use crate::geometry::{homography_predict, Homography};
use crate::gridmap::{GridModel, PredictMode};
use crate::models::{FeatureProvider, TrainedNetwork};
use crate::neuralnet;
use crate::types::{BBox, DetectionRecord};

#[derive(Debug, Clone)]
pub enum ModelArtifact {
    Homography(Homography),
    Grid(GridModel),
    Network(TrainedNetwork),
}

#[derive(Debug, Clone, Default)]
pub struct PredictOptions<'a> {
    /// Overrides the feature source stored with an SDPN model.
    pub features: Option<&'a FeatureProvider>,
    /// Grid models sample instead of taking the argmax when set.
    pub grid_sample_seed: Option<u64>,
}

impl ModelArtifact {
    pub fn name(&self) -> &'static str {
        match self {
            ModelArtifact::Homography(_) => "homography",
            ModelArtifact::Grid(_) => "grid",
            ModelArtifact::Network(n) => n.kind.name(),
        }
    }

    /// Detects the artifact type from its leading bytes.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if neuralnet::is_container(&bytes) {
            return TrainedNetwork::load(path).map(ModelArtifact::Network);
        }
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| Error::Model(format!("{}: unrecognized model file", path.display())))?;
        let head = text.trim_start();
        if head.starts_with('{') {
            Homography::from_json(text).map(ModelArtifact::Homography)
        } else if head.starts_with("# grid") {
            GridModel::from_csv(text).map(ModelArtifact::Grid)
        } else {
            Err(Error::Model(format!("{}: unrecognized model file", path.display())))
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        match self {
            ModelArtifact::Homography(h) => h.save(path),
            ModelArtifact::Grid(g) => g.save(path),
            ModelArtifact::Network(n) => n.save(path),
        }
    }

    /// One prediction per record; failures stay per record.
    pub fn predict(&self, records: &[DetectionRecord], opts: &PredictOptions<'_>) -> Result<Vec<Result<BBox>>> {
        match self {
            ModelArtifact::Homography(h) => Ok(records.iter().map(|r| homography_predict(h, &r.frontal_box)).collect()),
            ModelArtifact::Grid(g) => Ok(match opts.grid_sample_seed {
                Some(seed) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let mut mode = PredictMode::Sample(&mut rng);
                    records.iter().map(|r| g.predict(&r.frontal_box, &mut mode)).collect()
                }
                None => {
                    let mut mode = PredictMode::<ChaCha8Rng>::Argmax;
                    records.iter().map(|r| g.predict(&r.frontal_box, &mut mode)).collect()
                }
            }),
            ModelArtifact::Network(n) => {
                let stored = n.features.and_then(FeatureProvider::from_source);
                n.predict(records, opts.features.or(stored.as_ref()))
            }
        }
    }

    pub fn evaluate(
        &self,
        records: &[DetectionRecord],
        opts: &PredictOptions<'_>,
        edges: &BucketEdges,
    ) -> Result<ModelMetrics> {
        let preds = self.predict(records, opts)?;
        evaluate(self.name(), records, &preds, edges)
    }
}
