use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use facelayout_core::data::{load_annotations, load_channel, save_annotations, save_channel};
use facelayout_core::facedesc::{extract_channel, extract_channels, COMBINED_CHANNEL};
use facelayout_core::io::{write_atomic, write_json};
use facelayout_core::learn::{FusionParams, ModelBundle, ParamGrid};
use facelayout_core::synth::{default_archetypes, with_noise};
use facelayout_core::{
    generate, merge_detections, run_cv, train_bundle, Channel, CvConfig, DatasetManifest, DescriptorConfig, Error,
    EvalReport, FaceSource, ImageRecord, MergeConfig, Result, SvmParams,
};
use serde::Serialize;

use crate::{ChannelArgs, Cli, Command, DescriptorArgs, SvmArgs};

/// Everything needed to reproduce a run, written next to each output as `<out>.run.json`.
#[derive(Serialize)]
struct RunConfig<'a> {
    tool: String,
    verbosity: u8,
    #[serde(flatten)]
    command: &'a Command,
    /// Settings derived from the arguments, as used by the library.
    #[serde(skip_serializing_if = "Option::is_none")]
    resolved: Option<serde_json::Value>,
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".run.json");
    out.with_file_name(name)
}

struct Run<'a> {
    cli: &'a Cli,
}

impl Run<'_> {
    fn echo(&self, out: &Path, resolved: Option<serde_json::Value>) -> Result<()> {
        let config = RunConfig {
            tool: format!("facelayout {}", env!("CARGO_PKG_VERSION")),
            verbosity: self.cli.verbose,
            command: &self.cli.command,
            resolved,
        };
        write_json(&sidecar_path(out), &config)
    }
}

fn to_value<T: Serialize>(v: &T) -> Option<serde_json::Value> {
    serde_json::to_value(v).ok()
}

fn descriptor_config(a: &DescriptorArgs) -> Result<DescriptorConfig> {
    let bad = || Error::Config(format!("grid must look like ROWSxCOLS, got {:?}", a.grid));
    let (rows, cols) = a.grid.split_once(['x', 'X']).ok_or_else(bad)?;
    let cfg = DescriptorConfig {
        k: a.k,
        alpha: a.alpha,
        grid_rows: rows.trim().parse().map_err(|_| bad())?,
        grid_cols: cols.trim().parse().map_err(|_| bad())?,
        normalize: a.normalize,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn cv_config(a: &SvmArgs, folds: usize) -> CvConfig {
    let defaults = ParamGrid::default();
    let grid = match (a.cost, a.gamma) {
        (Some(c), Some(g)) => ParamGrid::single(c, g),
        _ => ParamGrid {
            costs: a.costs.clone().unwrap_or(defaults.costs),
            gammas: a.gammas.clone().unwrap_or(defaults.gammas),
        },
    };
    CvConfig {
        folds,
        seed: a.seed,
        grid,
        search_folds: a.search_folds,
        svm: SvmParams {
            tol: a.tol,
            seed: a.seed,
            ..SvmParams::default()
        },
        fusion: FusionParams {
            cost: a.fusion_cost,
            tol: a.tol,
            seed: a.seed,
            ..FusionParams::default()
        },
        always_fuse: a.always_fuse,
        ..CvConfig::default()
    }
}

/// Loads the annotations and every requested channel, registering each with the manifest.
fn load_inputs(a: &ChannelArgs) -> Result<(DatasetManifest, Vec<Channel>)> {
    let mut manifest = load_annotations(&a.annotations)?;
    let dir = a
        .channel_dir
        .clone()
        .unwrap_or_else(|| a.annotations.parent().map(Path::to_path_buf).unwrap_or_default());
    let mut channels = Vec::with_capacity(a.channels.len());
    for spec in &a.channels {
        let (name, path) = match spec.split_once('=') {
            Some((n, p)) => (n.trim(), PathBuf::from(p.trim())),
            None => (spec.trim(), dir.join(format!("{}.chan", spec.trim()))),
        };
        if name.is_empty() {
            return Err(Error::Config(format!("empty channel name in {spec:?}")));
        }
        let ch = load_channel(&path, name)?;
        manifest.register_channel(&ch)?;
        channels.push(ch);
    }
    Ok((manifest, channels))
}

fn merge(run: &Run, a: &crate::MergeArgs) -> Result<()> {
    let cfg = MergeConfig::new(a.iou)?;
    let oriented = load_annotations(&a.oriented)?;
    let vj = load_annotations(&a.vj)?;
    let vj_faces: HashMap<&str, &ImageRecord> = vj.records.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut records = Vec::with_capacity(oriented.records.len());
    for r in &oriented.records {
        let mut faces = r.faces.clone();
        for f in &mut faces {
            f.source = FaceSource::OrientedDetector;
        }
        let other = vj_faces
            .get(r.id.as_str())
            .map(|v| v.faces.as_slice())
            .unwrap_or_default();
        let merged = merge_detections(&faces, other, &cfg);
        records.push(ImageRecord::new(&r.id, r.width, r.height, &r.label).with_faces(merged));
    }
    let known: std::collections::HashSet<&str> = oriented.ids().collect();
    for r in vj.records.iter().filter(|r| !known.contains(r.id.as_str())) {
        let merged = merge_detections(&[], &r.faces, &cfg);
        records.push(ImageRecord::new(&r.id, r.width, r.height, &r.label).with_faces(merged));
    }
    let mut classes = oriented.class_names.clone();
    for c in &vj.class_names {
        if !classes.contains(c) {
            classes.push(c.clone());
        }
    }
    let manifest = DatasetManifest::new(records, classes)?;
    save_annotations(&manifest, &a.out)?;
    run.echo(&a.out, None)
}

fn extract(run: &Run, a: &crate::ExtractArgs) -> Result<()> {
    let cfg = descriptor_config(&a.descriptor)?;
    let manifest = load_annotations(&a.input)?;
    if a.per_descriptor {
        let dir = a.out.parent().map(Path::to_path_buf).unwrap_or_default();
        for ch in extract_channels(&manifest, &cfg)? {
            let path = if ch.name() == COMBINED_CHANNEL {
                a.out.clone()
            } else {
                dir.join(format!("{}.chan", ch.name()))
            };
            save_channel(&ch, &path)?;
            run.echo(&path, to_value(&cfg))?;
        }
    } else {
        save_channel(&extract_channel(&manifest, &cfg)?, &a.out)?;
        run.echo(&a.out, to_value(&cfg))?;
    }
    Ok(())
}

fn synth(run: &Run, a: &crate::SynthArgs) -> Result<()> {
    let specs: Vec<_> = with_noise(&default_archetypes(), a.jitter, a.flip)
        .into_iter()
        .map(|s| s.with_dropout(a.dropout))
        .collect();
    let manifest = generate(&specs, a.per_class, a.seed)?;
    save_annotations(&manifest, &a.out)?;
    run.echo(&a.out, to_value(&specs))
}

fn train(run: &Run, a: &crate::TrainArgs) -> Result<()> {
    let (manifest, channels) = load_inputs(&a.data)?;
    let cfg = cv_config(&a.svm, CvConfig::default().folds);
    let bundle = train_bundle(&manifest, &channels, &cfg)?;
    bundle.save(&a.out)?;
    run.echo(&a.out, to_value(&cfg))
}

#[derive(Serialize)]
struct Prediction<'a> {
    image_id: &'a str,
    predicted: &'a str,
    scores: BTreeMap<&'a str, f64>,
}

fn predict(run: &Run, a: &crate::PredictArgs) -> Result<()> {
    let bundle = ModelBundle::load(&a.model)?;
    let (manifest, channels) = load_inputs(&a.data)?;
    let by_name: HashMap<&str, &Channel> = channels.iter().map(|c| (c.name(), c)).collect();
    let ordered: Vec<&Channel> = bundle
        .channels
        .iter()
        .map(|m| {
            by_name
                .get(m.channel.as_str())
                .copied()
                .ok_or_else(|| Error::MissingChannel {
                    channel: m.channel.clone(),
                    image_ids: Vec::new(),
                })
        })
        .collect::<Result<_>>()?;
    let mut out = String::new();
    for id in manifest.ids() {
        let vectors: Vec<&[f64]> = ordered
            .iter()
            .map(|c| {
                c.get(id).ok_or_else(|| Error::MissingChannel {
                    channel: c.name().to_string(),
                    image_ids: vec![id.to_string()],
                })
            })
            .collect::<Result<_>>()?;
        let scores = bundle.scores(&vectors)?;
        let best = facelayout_core::learn::argmax(&scores);
        let line = Prediction {
            image_id: id,
            predicted: &bundle.class_names[best],
            scores: bundle
                .class_names
                .iter()
                .map(String::as_str)
                .zip(scores.iter().copied())
                .collect(),
        };
        out.push_str(&serde_json::to_string(&line).map_err(|e| Error::Config(e.to_string()))?);
        out.push('\n');
    }
    write_atomic(&a.out, out.as_bytes())?;
    run.echo(&a.out, None)
}

fn eval(run: &Run, a: &crate::EvalArgs) -> Result<()> {
    let (manifest, channels) = load_inputs(&a.data)?;
    let cfg = cv_config(&a.svm, a.folds);
    let report = run_cv(&manifest, &channels, &cfg)?;
    report.save(&a.out)?;
    run.echo(&a.out, to_value(&cfg))?;
    print!("{}", report.to_table());
    Ok(())
}

fn report(a: &crate::ReportArgs) -> Result<()> {
    print!("{}", EvalReport::load(&a.input)?.to_table());
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    let run = Run { cli };
    match &cli.command {
        Command::Merge(a) => merge(&run, a),
        Command::Extract(a) => extract(&run, a),
        Command::Synth(a) => synth(&run, a),
        Command::Train(a) => train(&run, a),
        Command::Predict(a) => predict(&run, a),
        Command::Eval(a) => eval(&run, a),
        Command::Report(a) => report(a),
    }
}
