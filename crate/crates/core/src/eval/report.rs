use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::cv::CvConfig;
use super::folds::FoldPlan;
use crate::error::{Error, Result};
use crate::io::{read_json, write_json};
use crate::learn::SvmParams;

pub const REPORT_FORMAT: &str = "facelayout-report/1";

/// Name of the late-fusion row in a report.
pub const FUSED: &str = "fused";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub image_id: String,
    pub score: f64,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub class: String,
    pub entries: Vec<RankedEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    /// `None` where the fold holds no positive of the class.
    pub per_class_ap: Vec<Option<f64>>,
    pub map: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelResult {
    pub name: String,
    /// Pooled AP per class, in the report's class order.
    pub per_class_ap: Vec<f64>,
    pub map: f64,
    pub per_fold: Vec<FoldResult>,
    /// Selected first-layer parameters per fold; empty for the fusion row.
    pub params: Vec<SvmParams>,
    pub ranked: Vec<RankedList>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub format: String,
    pub class_names: Vec<String>,
    pub channels: Vec<String>,
    pub config: CvConfig,
    /// How equal scores are ordered when ranking.
    pub tie_break: String,
    pub folds: FoldPlan,
    /// Single-channel rows in input order, then the fusion row when present.
    pub results: Vec<ChannelResult>,
}

impl EvalReport {
    pub fn result(&self, name: &str) -> Option<&ChannelResult> {
        self.results.iter().find(|r| r.name == name)
    }

    pub fn fused(&self) -> Option<&ChannelResult> {
        self.result(FUSED)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let r: EvalReport = read_json(path)?;
        if r.format != REPORT_FORMAT {
            return Err(Error::Format {
                expected: REPORT_FORMAT.into(),
                found: r.format,
            });
        }
        Ok(r)
    }

    /// Plain-text table: one row per channel (and fusion), one column per class, AP in percent.
    pub fn to_table(&self) -> String {
        let label_w = self
            .results
            .iter()
            .map(|r| r.name.len())
            .chain(std::iter::once(5))
            .max()
            .unwrap_or(5);
        let widths: Vec<usize> = self.class_names.iter().map(|c| c.len().max(5)).collect();
        let mut out = String::new();
        let _ = write!(out, "{:<label_w$} |", "Feat.");
        for (c, w) in self.class_names.iter().zip(&widths) {
            let _ = write!(out, " {c:>w$}");
        }
        let _ = writeln!(out, " | {:>5}", "AVG");
        let rule = label_w + 2 + widths.iter().map(|w| w + 1).sum::<usize>() + 8;
        let _ = writeln!(out, "{}", "-".repeat(rule));
        for r in &self.results {
            let _ = write!(out, "{:<label_w$} |", r.name);
            for (ap, w) in r.per_class_ap.iter().zip(&widths) {
                let _ = write!(out, " {:>w$.1}", ap * 100.0);
            }
            let _ = writeln!(out, " | {:>5.1}", r.map * 100.0);
        }
        out
    }
}
