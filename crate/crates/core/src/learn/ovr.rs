use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{Gram, Kernel};
use super::smo::{solve, SmoSolution};
use super::svm::{BinarySvm, SvmParams};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// Feature rows with class indices into `class_names`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
    pub class_names: Vec<String>,
}

impl LabeledData {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Config(format!("{} rows but {} labels", x.len(), y.len())));
        }
        if let Some(&bad) = y.iter().find(|&&c| c >= class_names.len()) {
            return Err(Error::Config(format!("label index {bad} out of range")));
        }
        let dim = x.first().map_or(0, Vec::len);
        if let Some((i, row)) = x.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                channel: "data".into(),
                image_id: format!("#{i}"),
                expected: dim,
                found: row.len(),
            });
        }
        Ok(LabeledData { x, y, class_names })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn subset(&self, idx: &[usize]) -> LabeledData {
        LabeledData {
            x: idx.iter().map(|&i| self.x[i].clone()).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            class_names: self.class_names.clone(),
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &c in &self.y {
            counts[c] += 1;
        }
        counts
    }

    /// Fails unless there are at least two classes and every class has a positive example.
    pub(crate) fn check_trainable(&self) -> Result<()> {
        if self.n_classes() < 2 {
            return Err(Error::DegenerateTraining("at least two classes are required".into()));
        }
        if let Some(c) = self.class_counts().iter().position(|&n| n == 0) {
            return Err(Error::DegenerateTraining(format!(
                "class {} has no training examples",
                self.class_names[c]
            )));
        }
        Ok(())
    }

    /// `+1` for class `c`, `-1` otherwise.
    pub(crate) fn one_vs_rest(&self, c: usize) -> Vec<f64> {
        self.y.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect()
    }
}

/// Per-dimension z-scoring with statistics from training data. Constant dimensions map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd.is_finite() && sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn transform_all(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform(r)).collect()
    }
}

/// One-vs-rest RBF machines for one feature channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedChannelModel {
    pub channel: String,
    pub class_names: Vec<String>,
    pub params: SvmParams,
    pub scaler: Standardizer,
    /// One machine per class, in `class_names` order.
    pub models: Vec<BinarySvm>,
}

impl TrainedChannelModel {
    pub fn dim(&self) -> usize {
        self.scaler.mean.len()
    }

    /// Decision value of every class for a raw (unscaled) vector.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                channel: self.channel.clone(),
                image_id: "<query>".into(),
                expected: self.dim(),
                found: x.len(),
            });
        }
        let z = self.scaler.transform(x);
        self.models.iter().map(|m| m.decision(&z)).collect()
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.scores(x)?))
    }
}

/// Index of the largest value; the first one on ties.
pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
        )
        .0
}

pub(crate) fn class_seed(params: &SvmParams, class: usize) -> u64 {
    derive_seed(params.seed, &[class as u64])
}

/// Solves every one-vs-rest problem on a shared kernel matrix, in parallel over classes.
pub(crate) fn solve_all_classes(
    gram: &Gram,
    data_y: &[usize],
    n_classes: usize,
    params: &SvmParams,
) -> Vec<(Vec<f64>, SmoSolution)> {
    (0..n_classes)
        .into_par_iter()
        .map(|c| {
            let y: Vec<f64> = data_y.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
            let sol = solve(gram, &y, &params.smo(class_seed(params, c)));
            (y, sol)
        })
        .collect()
}

/// Trains one RBF machine per class on z-scored features.
pub fn train_channel(channel: &str, data: &LabeledData, params: &SvmParams) -> Result<TrainedChannelModel> {
    params.validate()?;
    data.check_trainable()?;
    let scaler = Standardizer::fit(&data.x);
    let z = scaler.transform_all(&data.x);
    let kernel = Kernel::Rbf { gamma: params.gamma };
    let gram = Gram::new(&z, &kernel);
    let models = solve_all_classes(&gram, &data.y, data.n_classes(), params)
        .into_iter()
        .enumerate()
        .map(|(c, (y, sol))| {
            if !sol.converged {
                log::warn!(
                    "channel {channel}, class {}: SMO hit the iteration cap (violation {})",
                    data.class_names[c],
                    sol.violation
                );
            }
            BinarySvm::from_solution(kernel, params.cost, &z, &y, &sol)
        })
        .collect();
    Ok(TrainedChannelModel {
        channel: channel.to_string(),
        class_names: data.class_names.clone(),
        params: *params,
        scaler,
        models,
    })
}
