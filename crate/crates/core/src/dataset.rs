//! Line-delimited dataset files.
//!
//! The first line is a header object carrying `frontal_dims` and
//! `birdeye_dims`. Every following line is one record:
//!
//! ```text
//! {"frame_id":"s1-f000000","entity_id":3,"model_id":101,"class_label":"car",
//!  "frontal_box":[x_min,y_min,x_max,y_max],"birdeye_box":[...],
//!  "distance_m":12.5,"yaw_deg":3.1}
//! ```
//!
//! Box coordinates are pixels in the frame dimensions declared by the header.
//! Prediction files use the same layout with an extra `predicted_birdeye_box`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{BBox, ClassLabel, DetectionRecord, FrameDims, View};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub frontal_dims: FrameDims,
    pub birdeye_dims: FrameDims,
}

impl Default for DatasetHeader {
    fn default() -> Self {
        Self {
            frontal_dims: FrameDims::default(),
            birdeye_dims: FrameDims::default(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    frame_id: String,
    entity_id: u64,
    model_id: u64,
    class_label: ClassLabel,
    frontal_box: [f64; 4],
    birdeye_box: [f64; 4],
    distance_m: f64,
    yaw_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    predicted_birdeye_box: Option<[f64; 4]>,
}

impl RecordLine {
    fn from_record(r: &DetectionRecord, predicted: Option<&BBox>) -> Self {
        Self {
            frame_id: r.frame_id.clone(),
            entity_id: r.entity_id,
            model_id: r.model_id,
            class_label: r.class_label,
            frontal_box: r.frontal_box.coords(),
            birdeye_box: r.birdeye_box.coords(),
            distance_m: r.distance_m,
            yaw_deg: r.yaw_deg,
            predicted_birdeye_box: predicted.map(BBox::coords),
        }
    }

    fn into_record(self) -> std::result::Result<(DetectionRecord, Option<BBox>), String> {
        if !(self.distance_m >= 0.0) {
            return Err(format!("distance_m must be >= 0, got {}", self.distance_m));
        }
        let frontal = BBox::pixel(View::Frontal, self.frontal_box)
            .map_err(|e| format!("frontal_box: {e}"))?;
        let birdeye = BBox::pixel(View::Birdeye, self.birdeye_box)
            .map_err(|e| format!("birdeye_box: {e}"))?;
        let predicted = self
            .predicted_birdeye_box
            .map(|c| BBox::pixel(View::Birdeye, c))
            .transpose()
            .map_err(|e| format!("predicted_birdeye_box: {e}"))?;
        Ok((
            DetectionRecord {
                frame_id: self.frame_id,
                entity_id: self.entity_id,
                model_id: self.model_id,
                class_label: self.class_label,
                frontal_box: frontal,
                birdeye_box: birdeye,
                distance_m: self.distance_m,
                yaw_deg: self.yaw_deg,
            },
            predicted,
        ))
    }
}

/// A parsed dataset file.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<DetectionRecord>,
}

/// A dataset line that failed to parse; the line was skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

/// Result of a lenient read: good records plus per-line diagnostics.
#[derive(Debug, Clone, Default)]
pub struct ParsedFile {
    pub header: DatasetHeader,
    pub records: Vec<DetectionRecord>,
    /// Parallel to `records`; populated only for prediction files.
    pub predictions: Vec<Option<BBox>>,
    pub errors: Vec<LineError>,
}

impl ParsedFile {
    pub fn into_dataset(self) -> Dataset {
        Dataset {
            header: self.header,
            records: self.records,
        }
    }
}

/// Reads header and records, collecting malformed lines instead of failing.
///
/// A missing or unreadable header is a hard error.
pub fn read_lenient(reader: impl BufRead) -> Result<ParsedFile> {
    let mut lines = reader.lines().enumerate();
    let header = loop {
        let Some((idx, line)) = lines.next() else {
            return Err(Error::Parse {
                line: 1,
                message: "missing header line".into(),
            });
        };
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        break serde_json::from_str::<DatasetHeader>(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            message: format!("bad header: {e}"),
        })?;
    };

    let mut out = ParsedFile {
        header,
        ..Default::default()
    };
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<RecordLine>(&line)
            .map_err(|e| e.to_string())
            .and_then(RecordLine::into_record);
        match parsed {
            Ok((record, predicted)) => {
                out.records.push(record);
                out.predictions.push(predicted);
            }
            Err(message) => out.errors.push(LineError {
                line: idx + 1,
                message,
            }),
        }
    }
    Ok(out)
}

pub fn read_lenient_path(path: &Path) -> Result<ParsedFile> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_lenient(BufReader::new(file))
}

/// Reads a dataset, failing on the first malformed line.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let parsed = read_lenient_path(path)?;
    if let Some(e) = parsed.errors.first() {
        return Err(Error::Parse {
            line: e.line,
            message: format!("{}: {}", path.display(), e.message),
        });
    }
    Ok(parsed.into_dataset())
}

pub fn write_records<'a>(
    mut w: impl Write,
    header: &DatasetHeader,
    records: impl IntoIterator<Item = (&'a DetectionRecord, Option<&'a BBox>)>,
) -> Result<()> {
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    for (record, predicted) in records {
        serde_json::to_writer(&mut w, &RecordLine::from_record(record, predicted))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_records(
        BufWriter::new(file),
        &dataset.header,
        dataset.records.iter().map(|r| (r, None)),
    )
    .map_err(|e| with_path(e, path))
}

pub fn write_predictions(
    path: &Path,
    header: &DatasetHeader,
    records: &[DetectionRecord],
    predictions: &[Option<BBox>],
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_records(
        BufWriter::new(file),
        header,
        records.iter().zip(predictions.iter().map(Option::as_ref)),
    )
    .map_err(|e| with_path(e, path))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::IoRaw(source) => Error::io(path, source),
        other => other,
    }
}
