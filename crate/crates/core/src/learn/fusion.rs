//! Second-layer linear SVM over concatenated first-layer decision values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{dot, Gram, Kernel};
use super::ovr::{argmax, LabeledData, Standardizer};
use super::smo::{solve, SmoSettings};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionParams {
    pub cost: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for FusionParams {
    fn default() -> Self {
        FusionParams {
            cost: 1.0,
            tol: 1e-3,
            max_iter: 10_000_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionModel {
    /// Input layout: for each channel in order, one score per class.
    pub channels: Vec<String>,
    pub class_names: Vec<String>,
    pub params: FusionParams,
    pub scaler: Standardizer,
    /// Per-class weight vectors over the standardized scores.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl FusionModel {
    pub fn input_dim(&self) -> usize {
        self.channels.len() * self.class_names.len()
    }

    pub fn scores(&self, stacked: &[f64]) -> Result<Vec<f64>> {
        if stacked.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                channel: "fusion".into(),
                image_id: "<query>".into(),
                expected: self.input_dim(),
                found: stacked.len(),
            });
        }
        let z = self.scaler.transform(stacked);
        Ok(self
            .weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| dot(w, &z) + b)
            .collect())
    }

    pub fn predict(&self, stacked: &[f64]) -> Result<usize> {
        Ok(argmax(&self.scores(stacked)?))
    }
}

/// Trains the fusion layer. `data.x` rows are per-channel score vectors concatenated in
/// `channels` order; their dimension must be `channels.len() * classes`.
pub fn train_fusion(channels: &[String], data: &LabeledData, params: &FusionParams) -> Result<FusionModel> {
    let expected = channels.len() * data.n_classes();
    if let Some((i, row)) = data.x.iter().enumerate().find(|(_, r)| r.len() != expected) {
        return Err(Error::DimensionMismatch {
            channel: "fusion".into(),
            image_id: format!("#{i}"),
            expected,
            found: row.len(),
        });
    }
    if !(params.cost > 0.0 && params.tol > 0.0) {
        return Err(Error::Config("fusion cost and tol must be positive".into()));
    }
    data.check_trainable()?;
    let scaler = Standardizer::fit(&data.x);
    let z = scaler.transform_all(&data.x);
    let gram = Gram::new(&z, &Kernel::Linear);
    let per_class: Vec<(Vec<f64>, f64)> = (0..data.n_classes())
        .into_par_iter()
        .map(|c| {
            let y = data.one_vs_rest(c);
            let settings = SmoSettings {
                cost: params.cost,
                tol: params.tol,
                max_iter: params.max_iter,
                seed: derive_seed(params.seed, &[c as u64]),
                record_trace: false,
            };
            let sol = solve(&gram, &y, &settings);
            if !sol.converged {
                log::warn!("fusion class {}: SMO hit the iteration cap", data.class_names[c]);
            }
            let mut w = vec![0.0; expected];
            for ((zi, a), yi) in z.iter().zip(&sol.alpha).zip(&y) {
                if *a > 0.0 {
                    for (wk, v) in w.iter_mut().zip(zi) {
                        *wk += a * yi * v;
                    }
                }
            }
            (w, -sol.rho)
        })
        .collect();
    let (weights, bias) = per_class.into_iter().unzip();
    Ok(FusionModel {
        channels: channels.to_vec(),
        class_names: data.class_names.clone(),
        params: *params,
        scaler,
        weights,
        bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_checked() {
        let data = LabeledData::new(
            vec![vec![0.0; 3], vec![1.0; 3]],
            vec![0, 1],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let err = train_fusion(&["x".into()], &data, &FusionParams::default()).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                expected: 2,
                found: 3,
                ..
            }
        ));
    }

    #[test]
    fn constant_column_gets_zero_weight() {
        let x: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let pos = i % 2 == 0;
                let s = if pos {
                    1.0 + i as f64 * 0.01
                } else {
                    -1.0 - i as f64 * 0.01
                };
                vec![s, -s, 0.7, 0.7]
            })
            .collect();
        let y = (0..20).map(|i| i % 2).collect();
        let data = LabeledData::new(x.clone(), y, vec!["a".into(), "b".into()]).unwrap();
        let m = train_fusion(&["one".into(), "flat".into()], &data, &FusionParams::default()).unwrap();
        for w in &m.weights {
            assert_eq!(w[2], 0.0);
            assert_eq!(w[3], 0.0);
        }
        for (i, row) in x.iter().enumerate() {
            assert_eq!(m.predict(row).unwrap(), i % 2);
        }
    }
}
