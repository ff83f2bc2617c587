//! Data model and the line-delimited annotation and channel file formats.
//!
//! Annotation files hold one JSON object per line. An optional first line
//! carrying a `format` key declares the class list and registered channels:
//!
//! ```text
//! {"format":"facelayout-annot/1","classes":["kissing","speech"],"channels":{}}
//! {"id":"img1","width":640,"height":480,"label":"kissing","faces":[{"cx":100,"cy":120,"w":40,"h":48,"orientation":15,"source":"ground-truth"}]}
//! ```
//!
//! Channel files hold one `{"image_id":...,"values":[...]}` row per line.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::io::{read_lines, to_json_line, write_atomic};

pub const ANNOTATION_FORMAT: &str = "facelayout-annot/1";
pub const CHANNEL_FORMAT: &str = "facelayout-chan/1";

/// Orientation quantization step in degrees.
pub const ORIENTATION_STEP: i32 = 15;
pub const ORIENTATION_MIN: i32 = -90;
pub const ORIENTATION_MAX: i32 = 90;
/// Number of distinct quantized orientations.
pub const ORIENTATION_BINS: usize = 13;

/// The ten interaction classes of the reference dataset, in its table order.
pub const DEFAULT_CLASSES: [&str; 10] = [
    "boxing-punching",
    "dining",
    "handshaking",
    "highfive",
    "hugging",
    "kicking",
    "kissing",
    "partying",
    "speech",
    "talking",
];

/// Clamps an angle to [-90, 90] and rounds it to the nearest multiple of 15.
/// Exact halves round away from zero.
pub fn snap_orientation(degrees: f64) -> i32 {
    let clamped = degrees.clamp(ORIENTATION_MIN as f64, ORIENTATION_MAX as f64);
    let steps = (clamped / ORIENTATION_STEP as f64).round() as i32;
    steps * ORIENTATION_STEP
}

/// Bin index of a quantized orientation, in `0..13`.
pub fn orientation_bin(orientation: i32) -> usize {
    ((orientation - ORIENTATION_MIN) / ORIENTATION_STEP) as usize
}

pub fn is_quantized(orientation: i32) -> bool {
    (ORIENTATION_MIN..=ORIENTATION_MAX).contains(&orientation) && orientation % ORIENTATION_STEP == 0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FaceSource {
    OrientedDetector,
    VjFrontal,
    VjProfile,
    Merged,
    GroundTruth,
}

impl fmt::Display for FaceSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FaceSource::OrientedDetector => "oriented-detector",
            FaceSource::VjFrontal => "vj-frontal",
            FaceSource::VjProfile => "vj-profile",
            FaceSource::Merged => "merged",
            FaceSource::GroundTruth => "ground-truth",
        };
        f.write_str(s)
    }
}

/// One detected or annotated face. Coordinates are in pixels, `(cx, cy)` is the box center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFace")]
pub struct FaceBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    /// Quantized orientation in degrees; positive means turned toward +x.
    pub orientation: Option<i32>,
    pub source: FaceSource,
    /// Set on profile detections whose detector ran on the mirrored image (face turned toward -x).
    #[serde(default, skip_serializing_if = "is_false")]
    pub mirrored: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFace {
    cx: f64,
    cy: f64,
    w: f64,
    h: f64,
    #[serde(default)]
    orientation: Option<f64>,
    source: FaceSource,
    #[serde(default)]
    mirrored: bool,
}

impl TryFrom<RawFace> for FaceBox {
    type Error = String;

    fn try_from(raw: RawFace) -> std::result::Result<Self, String> {
        let orientation = match raw.orientation {
            Some(o) if !o.is_finite() => return Err("orientation is not finite".into()),
            Some(o) => Some(snap_orientation(o)),
            None => None,
        };
        Ok(FaceBox {
            cx: raw.cx,
            cy: raw.cy,
            w: raw.w,
            h: raw.h,
            orientation,
            source: raw.source,
            mirrored: raw.mirrored,
        })
    }
}

impl FaceBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, source: FaceSource) -> Self {
        FaceBox {
            cx,
            cy,
            w,
            h,
            orientation: None,
            source,
            mirrored: false,
        }
    }

    pub fn with_orientation(mut self, degrees: i32) -> Self {
        self.orientation = Some(degrees);
        self
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Largest edge, used to normalize distances between faces.
    pub fn size(&self) -> f64 {
        self.w.max(self.h)
    }

    pub fn left(&self) -> f64 {
        self.cx - self.w / 2.0
    }

    pub fn right(&self) -> f64 {
        self.cx + self.w / 2.0
    }

    pub fn top(&self) -> f64 {
        self.cy - self.h / 2.0
    }

    pub fn bottom(&self) -> f64 {
        self.cy + self.h / 2.0
    }

    fn validate(&self, record: &str) -> Result<()> {
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(Error::validation(record, "face center is not finite"));
        }
        if !(self.w.is_finite() && self.w > 0.0 && self.h.is_finite() && self.h > 0.0) {
            return Err(Error::validation(
                record,
                format!("face size must be positive, got w={} h={}", self.w, self.h),
            ));
        }
        if let Some(o) = self.orientation {
            if !is_quantized(o) {
                return Err(Error::validation(
                    record,
                    format!("orientation {o} is not a multiple of 15 in [-90, 90]"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageRecord {
    pub id: String,
    pub width: f64,
    pub height: f64,
    pub label: String,
    #[serde(default)]
    pub faces: Vec<FaceBox>,
}

impl ImageRecord {
    pub fn new(id: impl Into<String>, width: f64, height: f64, label: impl Into<String>) -> Self {
        ImageRecord {
            id: id.into(),
            width,
            height,
            label: label.into(),
            faces: Vec::new(),
        }
    }

    pub fn with_faces(mut self, faces: Vec<FaceBox>) -> Self {
        self.faces = faces;
        self
    }

    /// Clamps face centers into the image frame, warning about each moved face.
    pub fn clamp_faces(&mut self) {
        for (i, face) in self.faces.iter_mut().enumerate() {
            let cx = face.cx.clamp(0.0, self.width);
            let cy = face.cy.clamp(0.0, self.height);
            if cx != face.cx || cy != face.cy {
                log::warn!(
                    "record {}: face {} center ({}, {}) outside {}x{} frame, clamped",
                    self.id,
                    i,
                    face.cx,
                    face.cy,
                    self.width,
                    self.height
                );
                face.cx = cx;
                face.cy = cy;
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::validation("<empty>", "image id is empty"));
        }
        if !(self.width.is_finite() && self.width > 0.0 && self.height.is_finite() && self.height > 0.0) {
            return Err(Error::validation(
                &self.id,
                format!("image size must be positive, got {}x{}", self.width, self.height),
            ));
        }
        for face in &self.faces {
            face.validate(&self.id)?;
        }
        Ok(())
    }
}

/// A dense per-image vector belonging to a named channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureVector {
    pub image_id: String,
    #[serde(skip)]
    pub channel: String,
    pub values: Vec<f64>,
}

/// All vectors of one channel, uniform in dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    name: String,
    dim: usize,
    vectors: Vec<FeatureVector>,
    index: HashMap<String, usize>,
}

impl Channel {
    pub fn new(name: impl Into<String>, vectors: Vec<FeatureVector>) -> Result<Self> {
        let name = name.into();
        let dim = vectors.first().map_or(0, |v| v.values.len());
        let mut index = HashMap::with_capacity(vectors.len());
        let mut out = Vec::with_capacity(vectors.len());
        for (i, mut v) in vectors.into_iter().enumerate() {
            if v.values.len() != dim {
                return Err(Error::DimensionMismatch {
                    channel: name,
                    image_id: v.image_id,
                    expected: dim,
                    found: v.values.len(),
                });
            }
            if v.values.iter().any(|x| !x.is_finite()) {
                return Err(Error::validation(
                    &v.image_id,
                    format!("channel {name} has a non-finite value"),
                ));
            }
            if index.insert(v.image_id.clone(), i).is_some() {
                return Err(Error::validation(
                    &v.image_id,
                    format!("duplicate row in channel {name}"),
                ));
            }
            v.channel = name.clone();
            out.push(v);
        }
        Ok(Channel {
            name,
            dim,
            vectors: out,
            index,
        })
    }

    /// Builds a channel from `(image_id, values)` pairs.
    pub fn from_rows<I, S>(name: impl Into<String>, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let name = name.into();
        let vectors = rows
            .into_iter()
            .map(|(id, values)| FeatureVector {
                image_id: id.into(),
                channel: name.clone(),
                values,
            })
            .collect();
        Channel::new(name, vectors)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[FeatureVector] {
        &self.vectors
    }

    pub fn get(&self, image_id: &str) -> Option<&[f64]> {
        self.index.get(image_id).map(|&i| self.vectors[i].values.as_slice())
    }

    /// Returns the vectors for `ids` in order, or the list of ids without a vector.
    pub fn gather<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<Vec<Vec<f64>>> {
        let mut rows = Vec::new();
        let mut missing = Vec::new();
        for id in ids {
            match self.get(id) {
                Some(v) => rows.push(v.to_vec()),
                None => missing.push(id.to_string()),
            }
        }
        if missing.is_empty() {
            Ok(rows)
        } else {
            Err(Error::MissingChannel {
                channel: self.name.clone(),
                image_ids: missing,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub records: Vec<ImageRecord>,
    pub class_names: Vec<String>,
    /// Registered channel name to dimensionality.
    pub channels: BTreeMap<String, usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationHeader {
    format: String,
    classes: Vec<String>,
    #[serde(default)]
    channels: BTreeMap<String, usize>,
}

impl DatasetManifest {
    /// Validates records against `class_names`. An empty class list is derived from the labels in
    /// order of first appearance.
    pub fn new(records: Vec<ImageRecord>, class_names: Vec<String>) -> Result<Self> {
        let class_names = if class_names.is_empty() {
            let mut seen = HashSet::new();
            records
                .iter()
                .filter(|r| seen.insert(r.label.clone()))
                .map(|r| r.label.clone())
                .collect()
        } else {
            class_names
        };
        let m = DatasetManifest {
            records,
            class_names,
            channels: BTreeMap::new(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let mut classes = HashSet::new();
        for c in &self.class_names {
            if !classes.insert(c.as_str()) {
                return Err(Error::Config(format!("duplicate class name {c}")));
            }
        }
        let mut ids = HashSet::new();
        for r in &self.records {
            r.validate()?;
            if !ids.insert(r.id.as_str()) {
                return Err(Error::validation(&r.id, "duplicate image id"));
            }
            if !classes.contains(r.label.as_str()) {
                return Err(Error::validation(&r.id, format!("unknown label {:?}", r.label)));
            }
        }
        Ok(())
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == label)
    }

    /// Class index of every record, in record order.
    pub fn label_indices(&self) -> Vec<usize> {
        let lookup: HashMap<&str, usize> = self
            .class_names
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        self.records.iter().map(|r| lookup[r.label.as_str()]).collect()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.id.as_str())
    }

    /// Checks that every row of `channel` names a known image and records its dimensionality.
    pub fn register_channel(&mut self, channel: &Channel) -> Result<()> {
        let ids: HashSet<&str> = self.ids().collect();
        for v in channel.vectors() {
            if !ids.contains(v.image_id.as_str()) {
                return Err(Error::UnknownImage {
                    channel: channel.name().to_string(),
                    image_id: v.image_id.clone(),
                });
            }
        }
        if let Some(&dim) = self.channels.get(channel.name()) {
            if dim != channel.dim() && !channel.is_empty() {
                let first = &channel.vectors()[0];
                return Err(Error::DimensionMismatch {
                    channel: channel.name().to_string(),
                    image_id: first.image_id.clone(),
                    expected: dim,
                    found: channel.dim(),
                });
            }
        }
        self.channels.insert(channel.name().to_string(), channel.dim());
        Ok(())
    }
}

fn parse_error(path: &Path, line: usize, record: Option<String>, message: impl fmt::Display) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        record,
        message: message.to_string(),
    }
}

/// Reads an annotation file. Orientations are clamped and snapped to the 15° grid, face centers are
/// clamped into the frame.
pub fn load_annotations(path: &Path) -> Result<DatasetManifest> {
    let lines = read_lines(path)?;
    let mut header: Option<AnnotationHeader> = None;
    let mut records = Vec::with_capacity(lines.len());
    for (pos, (line_no, line)) in lines.iter().enumerate() {
        let value: Value = serde_json::from_str(line).map_err(|e| parse_error(path, *line_no, None, e))?;
        let record_id = value.get("id").and_then(Value::as_str).map(str::to_string);
        if pos == 0 && value.get("format").is_some() {
            let h: AnnotationHeader =
                serde_json::from_value(value).map_err(|e| parse_error(path, *line_no, None, e))?;
            if h.format != ANNOTATION_FORMAT {
                return Err(Error::Format {
                    expected: ANNOTATION_FORMAT.into(),
                    found: h.format,
                });
            }
            header = Some(h);
            continue;
        }
        let mut record: ImageRecord =
            serde_json::from_value(value).map_err(|e| parse_error(path, *line_no, record_id, e))?;
        record.validate()?;
        record.clamp_faces();
        records.push(record);
    }
    let (classes, channels) = match header {
        Some(h) => (h.classes, h.channels),
        None => (Vec::new(), BTreeMap::new()),
    };
    let mut manifest = DatasetManifest::new(records, classes)?;
    manifest.channels = channels;
    Ok(manifest)
}

pub fn annotations_to_string(manifest: &DatasetManifest) -> String {
    let header = AnnotationHeader {
        format: ANNOTATION_FORMAT.to_string(),
        classes: manifest.class_names.clone(),
        channels: manifest.channels.clone(),
    };
    let mut out = to_json_line(&header);
    out.push('\n');
    for r in &manifest.records {
        out.push_str(&to_json_line(r));
        out.push('\n');
    }
    out
}

pub fn save_annotations(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    manifest.validate()?;
    write_atomic(path, annotations_to_string(manifest).as_bytes())
}

/// Reads a channel file; rows must share one dimensionality.
pub fn load_channel(path: &Path, channel: &str) -> Result<Channel> {
    let mut vectors = Vec::new();
    for (line_no, line) in read_lines(path)? {
        let value: Value = serde_json::from_str(&line).map_err(|e| parse_error(path, line_no, None, e))?;
        let id = value.get("image_id").and_then(Value::as_str).map(str::to_string);
        let v: FeatureVector = serde_json::from_value(value).map_err(|e| parse_error(path, line_no, id, e))?;
        vectors.push(v);
    }
    Channel::new(channel, vectors)
}

pub fn channel_to_string(channel: &Channel) -> String {
    let mut out = String::new();
    for v in channel.vectors() {
        out.push_str(&to_json_line(v));
        out.push('\n');
    }
    out
}

pub fn save_channel(channel: &Channel, path: &Path) -> Result<()> {
    write_atomic(path, channel_to_string(channel).as_bytes())
}
