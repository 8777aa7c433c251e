//! Result artifacts: one CSV row per sweep point plus a JSON document with
//! the full configuration echo, per-slot statistics and the fitted slope.
//!
//! Nothing run-dependent (wall clock, thread count) is stored, so identical
//! configurations produce identical bytes.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::analysis::{ExponentKind, ScalingFit};
use crate::error::Result;
use crate::metrics::ThroughputOutageEstimate;
use crate::schemes::SlotStats;

pub const SCHEMA_VERSION: u32 = 1;

/// Per-slot statistics averaged over realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotSummary {
    pub label: String,
    pub cluster_side: Option<f64>,
    pub sinr_floor: Option<f64>,
    pub mean_bits: f64,
    pub mean_served_users: f64,
    pub mean_link_rate: f64,
    pub mean_link_distance: f64,
    pub min_sinr: Option<f64>,
    pub floor_violations: usize,
}

impl SlotSummary {
    pub(crate) fn empty(label: &str, cluster_side: Option<f64>, sinr_floor: Option<f64>) -> Self {
        Self {
            label: label.to_string(),
            cluster_side,
            sinr_floor,
            mean_bits: 0.0,
            mean_served_users: 0.0,
            mean_link_rate: 0.0,
            mean_link_distance: 0.0,
            min_sinr: None,
            floor_violations: 0,
        }
    }

    pub(crate) fn absorb(&mut self, s: &SlotStats) {
        self.mean_bits += s.bits_total;
        self.mean_served_users += s.served_users as f64;
        self.mean_link_rate += s.mean_link_rate;
        self.mean_link_distance += s.mean_link_distance;
        if s.min_sinr.is_finite() {
            self.min_sinr = Some(self.min_sinr.map_or(s.min_sinr, |m: f64| m.min(s.min_sinr)));
        }
        self.floor_violations += s.floor_violations;
    }

    pub(crate) fn finish(&mut self, realizations: f64) {
        self.mean_bits /= realizations;
        self.mean_served_users /= realizations;
        self.mean_link_rate /= realizations;
        self.mean_link_distance /= realizations;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub index: usize,
    pub swept: BTreeMap<String, f64>,
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub q: f64,
    pub epsilon: Option<f64>,
    pub driving_ratio: f64,
    pub cells_per_side: Vec<usize>,
    pub cluster_sides: Vec<f64>,
    pub occupancies: Vec<f64>,
    pub closed_form_outage: Vec<f64>,
    pub estimate: ThroughputOutageEstimate,
    pub c_gamma_mean: f64,
    pub bound_slack_min: Option<f64>,
    pub bound_violations: usize,
    pub slots: Vec<SlotSummary>,
    /// Share of realizations whose slot-2 served users beat slot-1-only
    /// users on mean bits.
    pub remark7_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFailure {
    pub index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultArtifact {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub driving_ratio: String,
    pub exponent_kind: ExponentKind,
    pub predicted_exponent: Option<f64>,
    /// Log-log fit of pooled mean throughput against the driving ratio.
    pub fit: Option<ScalingFit>,
    /// Same fit on the worst index-wise mean.
    pub fit_t_min: Option<ScalingFit>,
    pub points: Vec<PointResult>,
    pub failures: Vec<PointFailure>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    #[default]
    Both,
}

fn num(x: f64) -> String {
    // Display for f64 is the shortest string that round-trips.
    format!("{x}")
}

impl ResultArtifact {
    /// Swept parameter names in column order.
    fn swept_columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = Vec::new();
        for p in &self.points {
            for k in p.swept.keys() {
                if !cols.contains(k) {
                    cols.push(k.clone());
                }
            }
        }
        cols
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let cols = self.swept_columns();
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["point".to_string()];
        header.extend(cols.iter().cloned());
        header.extend(
            [
                "T_min_avg",
                "T_stderr",
                "T_mean",
                "T_mean_stderr",
                "p_o_hat",
                "p_o_stderr",
                "C_gamma_mean",
                "bound_slack_min",
            ]
            .map(String::from),
        );
        out.write_record(&header)?;
        for p in &self.points {
            let e = &p.estimate;
            let mut row = vec![p.index.to_string()];
            row.extend(cols.iter().map(|c| p.swept.get(c).map_or(String::new(), |v| num(*v))));
            row.extend([
                num(e.t_min_avg),
                num(e.t_stderr),
                num(e.t_mean),
                num(e.t_mean_stderr),
                num(e.p_o_hat),
                num(e.p_o_stderr),
                num(p.c_gamma_mean),
                p.bound_slack_min.map_or(String::new(), num),
            ]);
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Writes `<stem>.csv` and/or `<stem>.json` into `dir`.
    pub fn write_outputs(&self, dir: &Path, stem: &str, format: OutputFormat) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        if matches!(format, OutputFormat::Csv | OutputFormat::Both) {
            let path = dir.join(format!("{stem}.csv"));
            self.write_csv(std::fs::File::create(&path)?)?;
            written.push(path);
        }
        if matches!(format, OutputFormat::Json | OutputFormat::Both) {
            let path = dir.join(format!("{stem}.json"));
            std::fs::write(&path, self.to_json()?)?;
            written.push(path);
        }
        Ok(written)
    }
}
