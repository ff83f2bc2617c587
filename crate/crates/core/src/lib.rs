//! Facial layout descriptors for recognizing human interactions in still images.
//!
//! The pipeline ingests face annotations ([`data`]), optionally merges two face detectors'
//! outputs ([`merge`]), computes layout and orientation histograms ([`facedesc`]), trains
//! one-vs-rest RBF-SVMs per feature channel with a linear late-fusion layer ([`learn`]) and
//! scores them with cross-validated average precision ([`eval`]). [`synth`] generates
//! labelled face layouts for exercising all of it.

pub mod data;
pub mod error;
pub mod eval;
pub mod facedesc;
pub mod io;
pub mod learn;
pub mod merge;
pub mod rng;
pub mod synth;

pub use data::{Channel, DatasetManifest, FaceBox, FaceSource, FeatureVector, ImageRecord};
pub use error::{Error, Result};
pub use eval::{average_precision, make_folds, run_cv, train_bundle, CvConfig, EvalReport, FoldPlan};
pub use facedesc::{combined, describe, DescriptorConfig, FacialDescriptor};
pub use learn::{
    train_binary, train_channel, train_fusion, BinarySvm, FusionModel, Kernel, ParamGrid, SvmParams,
    TrainedChannelModel,
};
pub use merge::{iou, merge_detections, MergeConfig};
pub use synth::{generate, ArchetypeSpec, Layout};
