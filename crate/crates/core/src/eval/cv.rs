//! K-fold cross-validated evaluation of per-channel classifiers and their late fusion.
//!
//! For each outer fold, every model that scores a held-out image is trained only on images of
//! the other folds: hyperparameters are searched on the training split, the fusion layer is fit
//! on out-of-fold first-layer scores from an inner split of the training folds, and held-out
//! scores from all folds are pooled into one ranked list per class.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ap::{average_precision, mean_ap};
use super::folds::{make_folds, stratified_assignment, FoldPlan};
use super::report::{ChannelResult, EvalReport, FoldResult, RankedEntry, RankedList, FUSED, REPORT_FORMAT};
use crate::data::{Channel, DatasetManifest};
use crate::error::{Error, Result};
use crate::learn::{
    grid_search, train_channel, train_fusion, FusionParams, LabeledData, ModelBundle, ParamGrid, SvmParams,
};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub seed: u64,
    /// A one-point grid fixes the parameters.
    pub grid: ParamGrid,
    /// Inner folds for the grid search.
    pub search_folds: usize,
    /// Tolerance and iteration cap for the first-layer machines; cost and gamma come from the grid.
    pub svm: SvmParams,
    pub fusion: FusionParams,
    /// Inner folds producing the fusion layer's training scores.
    pub fusion_folds: usize,
    /// Fit a fusion layer even for a single channel.
    pub always_fuse: bool,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: 5,
            seed: 0,
            grid: ParamGrid::default(),
            search_folds: 3,
            svm: SvmParams::default(),
            fusion: FusionParams::default(),
            fusion_folds: 5,
            always_fuse: false,
        }
    }
}

const FUSION_TAG: u64 = 0x6675_7365;

/// Per-channel feature rows aligned with the manifest's record order.
struct ChannelRows<'a> {
    name: &'a str,
    rows: Vec<Vec<f64>>,
}

struct FoldOutcome {
    test: Vec<usize>,
    /// `[channel][test position][class]`
    channel_scores: Vec<Vec<Vec<f64>>>,
    channel_params: Vec<SvmParams>,
    fused_scores: Option<Vec<Vec<f64>>>,
}

fn gather_rows<'a>(manifest: &DatasetManifest, channels: &'a [Channel]) -> Result<Vec<ChannelRows<'a>>> {
    let mut seen = HashSet::new();
    channels
        .iter()
        .map(|ch| {
            if !seen.insert(ch.name()) {
                return Err(Error::Config(format!("channel {} given twice", ch.name())));
            }
            Ok(ChannelRows {
                name: ch.name(),
                rows: ch.gather(manifest.ids())?,
            })
        })
        .collect()
}

fn smallest_class(labels: &[usize], n_classes: usize) -> usize {
    let mut counts = vec![0usize; n_classes];
    for &l in labels {
        counts[l] += 1;
    }
    counts.into_iter().min().unwrap_or(0)
}

/// Out-of-fold first-layer scores for every training image, channels concatenated.
fn stacked_training_scores(
    channels: &[ChannelRows<'_>],
    params: &[SvmParams],
    train: &[usize],
    labels: &[usize],
    class_names: &[String],
    cfg: &CvConfig,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let y: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let k = cfg.fusion_folds.min(smallest_class(&y, class_names.len()));
    if k < 2 {
        return Err(Error::DegenerateTraining(
            "fusion needs at least 2 training images per class".into(),
        ));
    }
    let inner = stratified_assignment(&y, class_names, k, seed)?;
    let n_classes = class_names.len();
    let mut stacked = vec![vec![0.0; channels.len() * n_classes]; train.len()];
    for g in 0..k {
        let (held, fit): (Vec<usize>, Vec<usize>) = (0..train.len()).partition(|&p| inner[p] == g);
        for (ci, ch) in channels.iter().enumerate() {
            let data = LabeledData::new(
                fit.iter().map(|&p| ch.rows[train[p]].clone()).collect(),
                fit.iter().map(|&p| y[p]).collect(),
                class_names.to_vec(),
            )?;
            let model = train_channel(ch.name, &data, &params[ci])?;
            for &p in &held {
                let s = model.scores(&ch.rows[train[p]])?;
                stacked[p][ci * n_classes..(ci + 1) * n_classes].copy_from_slice(&s);
            }
        }
    }
    Ok(stacked)
}

fn run_fold(
    fold: usize,
    plan_folds: &[usize],
    channels: &[ChannelRows<'_>],
    labels: &[usize],
    class_names: &[String],
    cfg: &CvConfig,
) -> Result<FoldOutcome> {
    let (test, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| plan_folds[i] == fold);
    let y_train: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let n_classes = class_names.len();

    let mut channel_scores = Vec::with_capacity(channels.len());
    let mut channel_params = Vec::with_capacity(channels.len());
    for ch in channels {
        let data = LabeledData::new(
            train.iter().map(|&i| ch.rows[i].clone()).collect(),
            y_train.clone(),
            class_names.to_vec(),
        )?;
        let base = SvmParams {
            seed: derive_seed(cfg.seed, &[fold as u64]),
            ..cfg.svm
        };
        let params = grid_search(&data, &cfg.grid, &base, cfg.search_folds)?;
        let model = train_channel(ch.name, &data, &params)?;
        let scores = test
            .iter()
            .map(|&i| model.scores(&ch.rows[i]))
            .collect::<Result<Vec<_>>>()?;
        channel_scores.push(scores);
        channel_params.push(params);
    }

    let fused_scores = if channels.len() >= 2 || cfg.always_fuse {
        let seed = derive_seed(cfg.seed, &[fold as u64, FUSION_TAG]);
        let stacked = stacked_training_scores(channels, &channel_params, &train, labels, class_names, cfg, seed)?;
        let names: Vec<String> = channels.iter().map(|c| c.name.to_string()).collect();
        let data = LabeledData::new(stacked, y_train, class_names.to_vec())?;
        let fusion = train_fusion(&names, &data, &FusionParams { seed, ..cfg.fusion })?;
        let scores = (0..test.len())
            .map(|t| {
                let row: Vec<f64> = channel_scores.iter().flat_map(|s| s[t].iter().copied()).collect();
                debug_assert_eq!(row.len(), names.len() * n_classes);
                fusion.scores(&row)
            })
            .collect::<Result<Vec<_>>>()?;
        Some(scores)
    } else {
        None
    };

    Ok(FoldOutcome {
        test,
        channel_scores,
        channel_params,
        fused_scores,
    })
}

/// Pools held-out scores over folds and computes per-class and per-fold AP.
struct Pooling<'a> {
    fold_of: &'a [usize],
    k: usize,
    labels: &'a [usize],
    ids: &'a [&'a str],
    class_names: &'a [String],
}

fn summarize(name: &str, pooled: &[Vec<f64>], ctx: &Pooling<'_>, params: Vec<SvmParams>) -> Result<ChannelResult> {
    let Pooling {
        fold_of,
        k,
        labels,
        ids,
        class_names,
    } = *ctx;
    let n_classes = class_names.len();
    let mut per_class_ap = Vec::with_capacity(n_classes);
    let mut ranked = Vec::with_capacity(n_classes);
    for c in 0..n_classes {
        let scored: Vec<(f64, bool)> = pooled.iter().zip(labels).map(|(s, &l)| (s[c], l == c)).collect();
        per_class_ap.push(average_precision(&scored)?);
        let mut order: Vec<usize> = (0..scored.len()).collect();
        order.sort_by(|&a, &b| scored[b].0.total_cmp(&scored[a].0));
        ranked.push(RankedList {
            class: class_names[c].clone(),
            entries: order
                .into_iter()
                .map(|i| RankedEntry {
                    image_id: ids[i].to_string(),
                    score: scored[i].0,
                    positive: scored[i].1,
                })
                .collect(),
        });
    }
    let per_fold = (0..k)
        .map(|f| {
            let aps: Vec<Option<f64>> = (0..n_classes)
                .map(|c| {
                    let scored: Vec<(f64, bool)> = (0..labels.len())
                        .filter(|&i| fold_of[i] == f)
                        .map(|i| (pooled[i][c], labels[i] == c))
                        .collect();
                    average_precision(&scored).ok()
                })
                .collect();
            let defined: Vec<f64> = aps.iter().flatten().copied().collect();
            FoldResult {
                fold: f,
                map: (defined.len() == n_classes).then(|| mean_ap(&defined)),
                per_class_ap: aps,
            }
        })
        .collect();
    Ok(ChannelResult {
        name: name.to_string(),
        map: mean_ap(&per_class_ap),
        per_class_ap,
        per_fold,
        params,
        ranked,
    })
}

fn check_inputs<'a>(
    manifest: &DatasetManifest,
    channels: &'a [Channel],
    cfg: &CvConfig,
) -> Result<Vec<ChannelRows<'a>>> {
    if channels.is_empty() {
        return Err(Error::Config("no channels given".into()));
    }
    cfg.svm.validate()?;
    cfg.grid.points()?;
    gather_rows(manifest, channels)
}

/// Fits the pipeline on every image of `manifest`: parameters per channel by grid search, then,
/// with two or more channels (or `always_fuse`), a fusion layer on out-of-fold scores.
pub fn train_bundle(manifest: &DatasetManifest, channels: &[Channel], cfg: &CvConfig) -> Result<ModelBundle> {
    let rows = check_inputs(manifest, channels, cfg)?;
    let labels = manifest.label_indices();
    let class_names = &manifest.class_names;
    let base = SvmParams {
        seed: cfg.seed,
        ..cfg.svm
    };
    let mut models = Vec::with_capacity(rows.len());
    let mut params = Vec::with_capacity(rows.len());
    for ch in &rows {
        let data = LabeledData::new(ch.rows.clone(), labels.clone(), class_names.clone())?;
        let p = grid_search(&data, &cfg.grid, &base, cfg.search_folds)?;
        models.push(train_channel(ch.name, &data, &p)?);
        params.push(p);
    }
    let fusion = if rows.len() >= 2 || cfg.always_fuse {
        let seed = derive_seed(cfg.seed, &[FUSION_TAG]);
        let all: Vec<usize> = (0..labels.len()).collect();
        let stacked = stacked_training_scores(&rows, &params, &all, &labels, class_names, cfg, seed)?;
        let names: Vec<String> = rows.iter().map(|c| c.name.to_string()).collect();
        let data = LabeledData::new(stacked, labels, class_names.clone())?;
        Some(train_fusion(&names, &data, &FusionParams { seed, ..cfg.fusion })?)
    } else {
        None
    };
    let mut bundle = ModelBundle::new(class_names.clone(), models, fusion);
    bundle.config = serde_json::to_value(cfg).map_err(|e| Error::Config(e.to_string()))?;
    Ok(bundle)
}

/// Cross-validates each channel and, with two or more channels, their late fusion.
pub fn run_cv(manifest: &DatasetManifest, channels: &[Channel], cfg: &CvConfig) -> Result<EvalReport> {
    let rows = check_inputs(manifest, channels, cfg)?;
    let labels = manifest.label_indices();
    let plan: FoldPlan = make_folds(manifest, cfg.folds, cfg.seed)?;
    let fold_of: Vec<usize> = manifest.ids().map(|id| plan.assignments[id]).collect();
    let class_names = &manifest.class_names;

    let outcomes: Vec<FoldOutcome> = (0..cfg.folds)
        .into_par_iter()
        .map(|f| run_fold(f, &fold_of, &rows, &labels, class_names, cfg))
        .collect::<Result<Vec<_>>>()?;

    let n = labels.len();
    let ids: Vec<&str> = manifest.ids().collect();
    let ctx = Pooling {
        fold_of: &fold_of,
        k: cfg.folds,
        labels: &labels,
        ids: &ids,
        class_names,
    };
    let mut results = Vec::new();
    for (ci, ch) in rows.iter().enumerate() {
        let mut pooled = vec![Vec::new(); n];
        for o in &outcomes {
            for (t, &i) in o.test.iter().enumerate() {
                pooled[i] = o.channel_scores[ci][t].clone();
            }
        }
        let params = outcomes.iter().map(|o| o.channel_params[ci]).collect();
        results.push(summarize(ch.name, &pooled, &ctx, params)?);
    }
    if outcomes[0].fused_scores.is_some() {
        let mut pooled = vec![Vec::new(); n];
        for o in &outcomes {
            let fused = o.fused_scores.as_ref().expect("fusion ran in every fold");
            for (t, &i) in o.test.iter().enumerate() {
                pooled[i] = fused[t].clone();
            }
        }
        results.push(summarize(FUSED, &pooled, &ctx, Vec::new())?);
    }

    Ok(EvalReport {
        format: REPORT_FORMAT.to_string(),
        class_names: class_names.clone(),
        channels: rows.iter().map(|r| r.name.to_string()).collect(),
        config: cfg.clone(),
        tie_break: "dataset order".to_string(),
        folds: plan,
        results,
    })
}
