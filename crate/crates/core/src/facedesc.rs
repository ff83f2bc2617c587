//! Image-level descriptors of face layout and orientation.
//!
//! Six parts are computed from the faces of one image and concatenated in this order:
//!
//! | part        | bins                 | content                                            |
//! |-------------|----------------------|----------------------------------------------------|
//! | `hfo`       | 13                   | counts per quantized orientation, -90° … 90°      |
//! | `hfd`       | 3                    | left / front / right direction counts              |
//! | `df`        | `k`                  | face-to-centroid distance in units of largest face |
//! | `chfl`      | `360 / alpha`        | pie sector of each face around the centroid        |
//! | `ghfl`      | `grid_rows * grid_cols` | grid cell around the centroid                   |
//! | `dir_count` | 1                    | number of directions present                       |
//!
//! With the defaults this is 13 + 3 + 5 + 6 + 3 + 1 = 31 values.
//!
//! Offsets from the centroid are computed as `N * x_i - sum(x)` rather than `x_i - mean(x)`,
//! so integer pixel coordinates produce exact offsets and the descriptors are exactly
//! translation invariant for such inputs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{orientation_bin, Channel, DatasetManifest, ImageRecord, ORIENTATION_BINS};
use crate::error::{Error, Result};

/// Direction (0 = left, 1 = front, 2 = right) of each orientation bin.
/// Left covers -90°..-45°, front -30°..30°, right 45°..90°.
pub const DIRECTION_OF_BIN: [usize; ORIENTATION_BINS] = [0, 0, 0, 0, 1, 1, 1, 1, 1, 2, 2, 2, 2];

pub const DIRECTIONS: usize = 3;

/// The 3x13 0/1 matrix mapping an orientation histogram onto direction counts.
pub fn aggregation_matrix() -> [[f64; ORIENTATION_BINS]; DIRECTIONS] {
    let mut a = [[0.0; ORIENTATION_BINS]; DIRECTIONS];
    for (bin, &dir) in DIRECTION_OF_BIN.iter().enumerate() {
        a[dir][bin] = 1.0;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptorConfig {
    /// Number of distance bins; distances are clamped to `1..=k`.
    pub k: usize,
    /// Pie sector angle in whole degrees; must divide 360.
    pub alpha: u32,
    pub grid_rows: usize,
    pub grid_cols: usize,
    /// L1-normalize each histogram part. `dir_count` is left as a count.
    pub normalize: bool,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        DescriptorConfig {
            k: 5,
            alpha: 60,
            grid_rows: 1,
            grid_cols: 3,
            normalize: false,
        }
    }
}

impl DescriptorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("distance bins k must be at least 1".into()));
        }
        if self.alpha == 0 || 360 % self.alpha != 0 {
            return Err(Error::Config(format!("pie angle {} does not divide 360", self.alpha)));
        }
        if self.grid_rows == 0 || self.grid_cols == 0 {
            return Err(Error::Config("grid must have at least one cell".into()));
        }
        Ok(())
    }

    pub fn pie_bins(&self) -> usize {
        (360 / self.alpha) as usize
    }

    pub fn grid_bins(&self) -> usize {
        self.grid_rows * self.grid_cols
    }

    /// Length of the combined vector.
    pub fn dim(&self) -> usize {
        ORIENTATION_BINS + DIRECTIONS + self.k + self.pie_bins() + self.grid_bins() + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacialDescriptor {
    pub hfo: Vec<f64>,
    pub hfd: Vec<f64>,
    pub df: Vec<f64>,
    pub chfl: Vec<f64>,
    pub ghfl: Vec<f64>,
    pub dir_count: f64,
}

impl FacialDescriptor {
    pub fn combined(&self) -> Vec<f64> {
        let mut v =
            Vec::with_capacity(self.hfo.len() + self.hfd.len() + self.df.len() + self.chfl.len() + self.ghfl.len() + 1);
        v.extend_from_slice(&self.hfo);
        v.extend_from_slice(&self.hfd);
        v.extend_from_slice(&self.df);
        v.extend_from_slice(&self.chfl);
        v.extend_from_slice(&self.ghfl);
        v.push(self.dir_count);
        v
    }
}

/// Sum in ascending order, so the result does not depend on face order.
fn canonical_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

/// Face positions relative to the centroid, scaled by the face count.
struct Offsets {
    n: f64,
    scaled: Vec<(f64, f64)>,
}

impl Offsets {
    fn of(record: &ImageRecord) -> Self {
        let n = record.faces.len() as f64;
        let sx = canonical_sum(record.faces.iter().map(|f| f.cx).collect());
        let sy = canonical_sum(record.faces.iter().map(|f| f.cy).collect());
        let scaled = record.faces.iter().map(|f| (n * f.cx - sx, n * f.cy - sy)).collect();
        Offsets { n, scaled }
    }
}

/// Mean face center.
pub fn face_center(record: &ImageRecord) -> Result<(f64, f64)> {
    if record.faces.is_empty() {
        return Err(Error::UndefinedCenter);
    }
    let n = record.faces.len() as f64;
    let sx = canonical_sum(record.faces.iter().map(|f| f.cx).collect());
    let sy = canonical_sum(record.faces.iter().map(|f| f.cy).collect());
    Ok((sx / n, sy / n))
}

fn l1_normalize(mut v: Vec<f64>, on: bool) -> Vec<f64> {
    if on {
        let total: f64 = v.iter().sum();
        if total > 0.0 {
            v.iter_mut().for_each(|x| *x /= total);
        }
    }
    v
}

fn hfo_counts(record: &ImageRecord) -> Vec<f64> {
    let mut bins = vec![0.0; ORIENTATION_BINS];
    for o in record.faces.iter().filter_map(|f| f.orientation) {
        bins[orientation_bin(o)] += 1.0;
    }
    bins
}

fn hfd_counts(hfo: &[f64]) -> Vec<f64> {
    let a = aggregation_matrix();
    a.iter()
        .map(|row| row.iter().zip(hfo).map(|(w, c)| w * c).sum())
        .collect()
}

/// Histogram of face orientations, one bin per 15° step.
pub fn hfo(record: &ImageRecord, cfg: &DescriptorConfig) -> Vec<f64> {
    l1_normalize(hfo_counts(record), cfg.normalize)
}

/// Histogram of face directions: left, front, right.
pub fn hfd(record: &ImageRecord, cfg: &DescriptorConfig) -> Vec<f64> {
    l1_normalize(hfd_counts(&hfo_counts(record)), cfg.normalize)
}

/// Histogram of centroid distances normalized by the largest face edge, clamped to `1..=k`.
pub fn df(record: &ImageRecord, cfg: &DescriptorConfig) -> Vec<f64> {
    let mut bins = vec![0.0; cfg.k];
    if record.faces.is_empty() {
        return bins;
    }
    let largest = record.faces.iter().map(|f| f.size()).fold(0.0, f64::max);
    let offsets = Offsets::of(record);
    let scale = offsets.n * largest;
    for &(dx, dy) in &offsets.scaled {
        let d = ((dx * dx + dy * dy).sqrt() / scale).ceil();
        let d = if d.is_finite() {
            d.max(1.0).min(cfg.k as f64)
        } else {
            cfg.k as f64
        };
        bins[d as usize - 1] += 1.0;
    }
    l1_normalize(bins, cfg.normalize)
}

/// Pie-sector histogram of face positions around the centroid. Angles are measured with
/// `atan2(dy, dx)` in image coordinates over [0°, 360°); a face on the centroid falls in sector 0.
pub fn chfl(record: &ImageRecord, cfg: &DescriptorConfig) -> Vec<f64> {
    let n_bins = cfg.pie_bins();
    let mut bins = vec![0.0; n_bins];
    let offsets = Offsets::of(record);
    for &(dx, dy) in &offsets.scaled {
        let bin = if dx == 0.0 && dy == 0.0 {
            0
        } else {
            let mut angle = dy.atan2(dx).to_degrees();
            if angle < 0.0 {
                angle += 360.0;
            }
            if angle >= 360.0 {
                angle = 0.0;
            }
            ((angle / cfg.alpha as f64).floor() as usize).min(n_bins - 1)
        };
        bins[bin] += 1.0;
    }
    l1_normalize(bins, cfg.normalize)
}

/// Index of the grid cell along one axis. Cells are `extent / cells` wide and the grid is centered
/// on the centroid; positions beyond the outer cells clamp into them.
fn grid_cell(scaled_offset: f64, n: f64, extent: f64, cells: usize) -> usize {
    let c = cells as f64;
    let t = (c * scaled_offset / (n * extent) + c / 2.0).floor();
    t.clamp(0.0, c - 1.0) as usize
}

/// Grid histogram of face positions; the middle cell is centered on the centroid.
pub fn ghfl(record: &ImageRecord, cfg: &DescriptorConfig) -> Vec<f64> {
    let mut bins = vec![0.0; cfg.grid_bins()];
    let offsets = Offsets::of(record);
    for &(dx, dy) in &offsets.scaled {
        let col = grid_cell(dx, offsets.n, record.width, cfg.grid_cols);
        let row = grid_cell(dy, offsets.n, record.height, cfg.grid_rows);
        bins[row * cfg.grid_cols + col] += 1.0;
    }
    l1_normalize(bins, cfg.normalize)
}

/// Number of directions (left/front/right) with at least one face.
pub fn dir_count(record: &ImageRecord) -> f64 {
    hfd_counts(&hfo_counts(record)).iter().filter(|&&c| c > 0.0).count() as f64
}

pub fn describe(record: &ImageRecord, cfg: &DescriptorConfig) -> FacialDescriptor {
    FacialDescriptor {
        hfo: hfo(record, cfg),
        hfd: hfd(record, cfg),
        df: df(record, cfg),
        chfl: chfl(record, cfg),
        ghfl: ghfl(record, cfg),
        dir_count: dir_count(record),
    }
}

/// The concatenated descriptor, 31 values at the default configuration.
pub fn combined(record: &ImageRecord, cfg: &DescriptorConfig) -> Vec<f64> {
    describe(record, cfg).combined()
}

/// Channel names for [`extract_channels`].
pub const COMBINED_CHANNEL: &str = "facedesc";
pub const PART_CHANNELS: [&str; 5] = ["hfo", "hfd", "df", "chfl", "ghfl"];

/// Computes the combined descriptor for every record, in record order.
pub fn extract_channel(manifest: &DatasetManifest, cfg: &DescriptorConfig) -> Result<Channel> {
    cfg.validate()?;
    let rows: Vec<(String, Vec<f64>)> = manifest
        .records
        .par_iter()
        .map(|r| (r.id.clone(), combined(r, cfg)))
        .collect();
    Channel::from_rows(COMBINED_CHANNEL, rows)
}

/// Computes the combined channel followed by one channel per histogram part.
pub fn extract_channels(manifest: &DatasetManifest, cfg: &DescriptorConfig) -> Result<Vec<Channel>> {
    cfg.validate()?;
    let descs: Vec<FacialDescriptor> = manifest.records.par_iter().map(|r| describe(r, cfg)).collect();
    let ids = || manifest.records.iter().map(|r| r.id.clone());
    let part = |name: &str, f: fn(&FacialDescriptor) -> &Vec<f64>| {
        Channel::from_rows(name, ids().zip(descs.iter().map(|d| f(d).clone())))
    };
    Ok(vec![
        Channel::from_rows(
            COMBINED_CHANNEL,
            ids().zip(descs.iter().map(FacialDescriptor::combined)),
        )?,
        part("hfo", |d| &d.hfo)?,
        part("hfd", |d| &d.hfd)?,
        part("df", |d| &d.df)?,
        part("chfl", |d| &d.chfl)?,
        part("ghfl", |d| &d.ghfl)?,
    ])
}
