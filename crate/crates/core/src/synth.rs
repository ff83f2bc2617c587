//! Synthetic face layouts with class-dependent geometry.
//!
//! Each archetype draws a face count, places faces according to its layout and assigns
//! orientations. Positions and sizes are whole pixels. Optional noise jitters positions,
//! flips orientation signs and drops faces. Every image uses its own seeded stream, so output
//! does not depend on scheduling.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{snap_orientation, DatasetManifest, FaceBox, FaceSource, ImageRecord};
use crate::error::{Error, Result};
use crate::rng::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// One frontal speaker near a side edge; everyone else turned toward the speaker.
    ConvergingOrientations,
    /// Faces on an ellipse, turned toward its center.
    Circular,
    /// Two faces about one face-width apart, turned toward each other.
    FacingPairClose,
    /// Two faces three to five face-widths apart, turned toward each other.
    FacingPairApart,
    /// Faces anywhere with uniformly random orientations.
    ScatteredRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeSpec {
    pub name: String,
    pub min_faces: usize,
    pub max_faces: usize,
    pub layout: Layout,
    /// Standard deviation of position noise, pixels.
    pub jitter: f64,
    /// Probability of negating each face's orientation.
    pub flip_prob: f64,
    /// Probability of dropping each face.
    pub dropout: f64,
}

impl ArchetypeSpec {
    pub fn new(name: impl Into<String>, layout: Layout, min_faces: usize, max_faces: usize) -> Self {
        ArchetypeSpec {
            name: name.into(),
            min_faces,
            max_faces,
            layout,
            jitter: 0.0,
            flip_prob: 0.0,
            dropout: 0.0,
        }
    }

    pub fn with_noise(mut self, jitter: f64, flip_prob: f64) -> Self {
        self.jitter = jitter;
        self.flip_prob = flip_prob;
        self
    }

    pub fn with_dropout(mut self, dropout: f64) -> Self {
        self.dropout = dropout;
        self
    }

    fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if self.min_faces > self.max_faces {
            return Err(Error::Config(format!("{}: empty face-count range", self.name)));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite() && prob(self.flip_prob) && prob(self.dropout)) {
            return Err(Error::Config(format!("{}: invalid noise parameters", self.name)));
        }
        let pairs = matches!(self.layout, Layout::FacingPairClose | Layout::FacingPairApart);
        if pairs && self.min_faces < 2 {
            return Err(Error::Config(format!("{}: pair layouts need two faces", self.name)));
        }
        if self.min_faces == 0 {
            return Err(Error::Config(format!("{}: at least one face per image", self.name)));
        }
        Ok(())
    }
}

/// Five archetypes, one per layout.
pub fn default_archetypes() -> Vec<ArchetypeSpec> {
    vec![
        ArchetypeSpec::new("speech", Layout::ConvergingOrientations, 3, 7),
        ArchetypeSpec::new("partying", Layout::Circular, 4, 8),
        ArchetypeSpec::new("kissing", Layout::FacingPairClose, 2, 2),
        ArchetypeSpec::new("talking", Layout::FacingPairApart, 2, 2),
        ArchetypeSpec::new("boxing-punching", Layout::ScatteredRandom, 2, 6),
    ]
}

/// Applies the same noise settings to every spec.
pub fn with_noise(specs: &[ArchetypeSpec], jitter: f64, flip_prob: f64) -> Vec<ArchetypeSpec> {
    specs.iter().cloned().map(|s| s.with_noise(jitter, flip_prob)).collect()
}

/// Face placed before noise: center, edge size, orientation.
struct Placed {
    x: f64,
    y: f64,
    size: f64,
    orientation: i32,
}

fn toward(dx: f64, magnitude: i32) -> i32 {
    if dx >= 0.0 {
        magnitude
    } else {
        -magnitude
    }
}

fn layout_faces<R: Rng>(layout: Layout, n: usize, w: f64, h: f64, rng: &mut R) -> Vec<Placed> {
    let size = rng.gen_range(36..=72) as f64;
    let mut faces = Vec::with_capacity(n);
    match layout {
        Layout::ConvergingOrientations => {
            let on_left = rng.gen_bool(0.5);
            let sx = if on_left { w * 0.15 } else { w * 0.85 };
            let sy = h * rng.gen_range(0.2..0.35);
            faces.push(Placed {
                x: sx,
                y: sy,
                size: (size * 1.3).round(),
                orientation: 0,
            });
            for _ in 1..n {
                let x = if on_left {
                    rng.gen_range(w * 0.4..w * 0.95)
                } else {
                    rng.gen_range(w * 0.05..w * 0.6)
                };
                let y = rng.gen_range(h * 0.55..h * 0.9);
                let magnitude = 15 * rng.gen_range(3..=6);
                faces.push(Placed {
                    x,
                    y,
                    size,
                    orientation: toward(sx - x, magnitude),
                });
            }
        }
        Layout::Circular => {
            let (cx, cy) = (w / 2.0, h / 2.0);
            let (rx, ry) = (w * rng.gen_range(0.25..0.35), h * rng.gen_range(0.15..0.25));
            let phase = rng.gen_range(0.0..TAU);
            for i in 0..n {
                let t = phase + TAU * i as f64 / n as f64;
                let (x, y) = (cx + rx * t.cos(), cy + ry * t.sin());
                faces.push(Placed {
                    x,
                    y,
                    size,
                    orientation: snap_orientation(-90.0 * (x - cx) / rx),
                });
            }
        }
        Layout::FacingPairClose | Layout::FacingPairApart => {
            let gap = match layout {
                Layout::FacingPairClose => rng.gen_range(0.8..1.2),
                _ => rng.gen_range(3.0..5.0),
            } * size;
            let mx = rng.gen_range(w * 0.4..w * 0.6);
            let my = rng.gen_range(h * 0.3..h * 0.6);
            let (lo, hi) = match layout {
                Layout::FacingPairClose => (5, 6),
                _ => (3, 6),
            };
            faces.push(Placed {
                x: mx - gap / 2.0,
                y: my + rng.gen_range(-0.1..0.1) * size,
                size,
                orientation: 15 * rng.gen_range(lo..=hi),
            });
            faces.push(Placed {
                x: mx + gap / 2.0,
                y: my + rng.gen_range(-0.1..0.1) * size,
                size,
                orientation: -15 * rng.gen_range(lo..=hi),
            });
        }
        Layout::ScatteredRandom => {
            for _ in 0..n {
                faces.push(Placed {
                    x: rng.gen_range(w * 0.05..w * 0.95),
                    y: rng.gen_range(h * 0.1..h * 0.9),
                    size,
                    orientation: 15 * rng.gen_range(-6..=6),
                });
            }
        }
    }
    faces
}

fn generate_one(spec: &ArchetypeSpec, id: String, seed: u64, class: usize, index: usize) -> ImageRecord {
    let mut rng = rng_for(seed, &[class as u64, index as u64]);
    let w = rng.gen_range(560..=720) as f64;
    let h = rng.gen_range(420..=540) as f64;
    let n = rng.gen_range(spec.min_faces..=spec.max_faces);
    let placed = layout_faces(spec.layout, n, w, h, &mut rng);
    let jitter = (spec.jitter > 0.0).then(|| Normal::new(0.0, spec.jitter).expect("finite jitter"));
    let mut faces = Vec::with_capacity(placed.len());
    for p in placed {
        let (mut x, mut y) = (p.x, p.y);
        if let Some(noise) = &jitter {
            x += noise.sample(&mut rng);
            y += noise.sample(&mut rng);
        }
        let flip = spec.flip_prob > 0.0 && rng.gen_bool(spec.flip_prob);
        let drop = spec.dropout > 0.0 && rng.gen_bool(spec.dropout);
        if drop {
            continue;
        }
        let orientation = if flip { -p.orientation } else { p.orientation };
        faces.push(
            FaceBox::new(
                x.round().clamp(0.0, w),
                y.round().clamp(0.0, h),
                p.size,
                (p.size * 1.2).round(),
                FaceSource::GroundTruth,
            )
            .with_orientation(orientation),
        );
    }
    ImageRecord::new(id, w, h, spec.name.clone()).with_faces(faces)
}

/// Generates `per_class` images for every spec; class names follow spec order.
pub fn generate(specs: &[ArchetypeSpec], per_class: usize, seed: u64) -> Result<DatasetManifest> {
    if specs.is_empty() {
        return Err(Error::Config("no archetypes given".into()));
    }
    for s in specs {
        s.validate()?;
    }
    let jobs: Vec<(usize, usize)> = (0..specs.len())
        .flat_map(|c| (0..per_class).map(move |i| (c, i)))
        .collect();
    let records: Vec<ImageRecord> = jobs
        .par_iter()
        .map(|&(c, i)| generate_one(&specs[c], format!("{}-{:05}", specs[c].name, i), seed, c, i))
        .collect();
    DatasetManifest::new(records, specs.iter().map(|s| s.name.clone()).collect())
}
