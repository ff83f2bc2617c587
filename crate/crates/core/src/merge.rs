//! Combining an orientation-estimating detector with a frontal/profile detector.
//!
//! Rules, applied per image:
//! - an oriented detection overlapping any frontal/profile detection wins and the other is dropped;
//! - a lone frontal detection is assigned 0°;
//! - a lone profile detection is assigned 90° (-90° when mirrored);
//! - an overlapping frontal/profile pair collapses to one face at `quantize((1 - IoU) * 90°)`.
//!
//! Two boxes are "in the same region" when their IoU reaches [`MergeConfig::same_region_iou`].

use std::cmp::Ordering;

use crate::data::{snap_orientation, FaceBox, FaceSource};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeConfig {
    same_region_iou: f64,
}

impl Default for MergeConfig {
    fn default() -> Self {
        MergeConfig { same_region_iou: 0.3 }
    }
}

impl MergeConfig {
    pub fn new(same_region_iou: f64) -> Result<Self> {
        if !(same_region_iou > 0.0 && same_region_iou <= 1.0) {
            return Err(Error::Config(format!(
                "same-region IoU must lie in (0, 1], got {same_region_iou}"
            )));
        }
        Ok(MergeConfig { same_region_iou })
    }

    pub fn same_region_iou(&self) -> f64 {
        self.same_region_iou
    }

    fn same_region(&self, a: &FaceBox, b: &FaceBox) -> bool {
        iou(a, b) >= self.same_region_iou
    }
}

/// Intersection over union of two axis-aligned boxes.
pub fn iou(a: &FaceBox, b: &FaceBox) -> f64 {
    let ix = (a.right().min(b.right()) - a.left().max(b.left())).max(0.0);
    let iy = (a.bottom().min(b.bottom()) - a.top().max(b.top())).max(0.0);
    let inter = ix * iy;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Total order used for greedy processing: larger area first, then `(cx, cy)`, then the rest of
/// the fields so that equal keys only occur for identical boxes.
fn canonical(a: &FaceBox, b: &FaceBox) -> Ordering {
    b.area()
        .total_cmp(&a.area())
        .then(a.cx.total_cmp(&b.cx))
        .then(a.cy.total_cmp(&b.cy))
        .then(a.w.total_cmp(&b.w))
        .then(a.h.total_cmp(&b.h))
        .then(a.orientation.cmp(&b.orientation))
        .then(a.source.cmp(&b.source))
        .then(a.mirrored.cmp(&b.mirrored))
}

fn sorted(boxes: &[FaceBox]) -> Vec<FaceBox> {
    let mut v = boxes.to_vec();
    v.sort_by(canonical);
    v
}

/// Orientation for a frontal/profile pair firing on the same face.
pub fn pair_orientation(frontal: &FaceBox, profile: &FaceBox) -> i32 {
    let magnitude = snap_orientation((1.0 - iou(frontal, profile)) * 90.0);
    if profile.mirrored {
        -magnitude
    } else {
        magnitude
    }
}

/// Merges the two detectors' outputs for one image.
///
/// Oriented boxes without an orientation are treated as frontal (0°). The output is sorted in
/// canonical order and contains no two boxes in the same region.
pub fn merge_detections(oriented: &[FaceBox], vj: &[FaceBox], cfg: &MergeConfig) -> Vec<FaceBox> {
    let mut accepted: Vec<FaceBox> = Vec::with_capacity(oriented.len() + vj.len());
    let admit = |accepted: &mut Vec<FaceBox>, b: FaceBox| {
        if accepted.iter().all(|a| !cfg.same_region(a, &b)) {
            accepted.push(b);
        }
    };

    for mut b in sorted(oriented) {
        b.orientation.get_or_insert(0);
        admit(&mut accepted, b);
    }

    // Detections already explained by an oriented face are dropped.
    let survivors: Vec<FaceBox> = sorted(vj)
        .into_iter()
        .filter(|b| accepted.iter().all(|a| !cfg.same_region(a, b)))
        .collect();
    let (frontal, profile): (Vec<FaceBox>, Vec<FaceBox>) =
        survivors.into_iter().partition(|b| b.source != FaceSource::VjProfile);

    let mut profile_used = vec![false; profile.len()];
    let mut candidates = Vec::with_capacity(frontal.len() + profile.len());
    for f in frontal {
        let partner = profile
            .iter()
            .enumerate()
            .filter(|(j, p)| !profile_used[*j] && cfg.same_region(&f, p))
            .map(|(j, p)| (j, iou(&f, p)))
            // highest overlap, earliest canonical profile on ties
            .fold(None, |best: Option<(usize, f64)>, (j, o)| match best {
                Some((_, bo)) if bo >= o => best,
                _ => Some((j, o)),
            });
        match partner {
            Some((j, _)) => {
                profile_used[j] = true;
                let mut m = f.clone();
                m.orientation = Some(pair_orientation(&f, &profile[j]));
                m.source = FaceSource::Merged;
                m.mirrored = false;
                candidates.push(m);
            }
            None => candidates.push(f.with_orientation(0)),
        }
    }
    for (p, used) in profile.into_iter().zip(profile_used) {
        if !used {
            let o = if p.mirrored { -90 } else { 90 };
            candidates.push(p.with_orientation(o));
        }
    }

    candidates.sort_by(canonical);
    for c in candidates {
        admit(&mut accepted, c);
    }
    accepted.sort_by(canonical);
    accepted
}
