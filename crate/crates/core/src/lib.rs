//! Frontal-to-bird's-eye bounding box projection: synthetic data generation,
//! dataset filtering, four projection models (homography, grid, MLP, SDPN)
//! and evaluation.

pub mod datagen;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod filter;
pub mod geometry;
pub mod gridmap;
pub mod models;
pub mod neuralnet;
pub mod pipeline;
pub mod types;

pub use error::{Error, Result};
pub use types::{BBox, ClassLabel, DetectionRecord, FrameDims, Point, Space, View};
