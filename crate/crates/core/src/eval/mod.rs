//! Cross-validation, average precision and evaluation reports.

mod ap;
mod cv;
mod folds;
mod report;

pub use ap::{average_precision, mean_ap};
pub use cv::{run_cv, train_bundle, CvConfig};
pub use folds::{make_folds, stratified_assignment, FoldPlan};
pub use report::{ChannelResult, EvalReport, FoldResult, RankedEntry, RankedList, FUSED, REPORT_FORMAT};
