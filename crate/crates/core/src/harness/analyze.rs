//! Closed-form evaluation of a configuration, without Monte Carlo.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SchemeKind};
use super::run::{driving_ratio, exponent_kind, prepare_point};
use crate::analysis::{po_sec_gamma_gt1, po_sec_gamma_lt1, predicted_exponent, solve_c1_c2, FixedPointConstants};
use crate::error::Result;
use crate::phy::{interference_upper_bound, sinr_floor_prop1};
use crate::schemes::Regime;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointAnalysis {
    pub index: usize,
    pub swept: BTreeMap<String, f64>,
    pub driving_ratio: f64,
    pub cells_per_side: Vec<usize>,
    pub cluster_sides: Vec<f64>,
    pub occupancies: Vec<f64>,
    /// Optimised-policy cluster outage per cache policy.
    pub closed_form_outage: Vec<f64>,
    pub epsilon: Option<f64>,
    /// Small-cluster outage and its constants at the slot-2 occupancy.
    pub po_sec: Option<f64>,
    pub fixed_point: Option<FixedPointConstants>,
    pub interference_bound: f64,
    pub sinr_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub predicted_exponent: Option<f64>,
    pub points: Vec<PointAnalysis>,
}

pub fn analyze(cfg: &ExperimentConfig) -> Result<AnalysisReport> {
    cfg.validate()?;
    let p_max = cfg.phy.p_max;
    let mut points = Vec::new();
    for i in 0..cfg.num_points() {
        let prep = prepare_point(cfg, i)?;
        let (po_sec, fixed_point) = match (prep.kind, cfg.scheme.regime) {
            (SchemeKind::Scenario2, regime @ (Regime::GammaLt1 | Regime::GammaGt1)) => {
                let g2 = prep.occupancies[1];
                let s_half = prep.point.s / 2;
                let po = if regime == Regime::GammaLt1 {
                    po_sec_gamma_lt1(g2, &prep.model, s_half)
                } else {
                    po_sec_gamma_gt1(g2, &prep.model, s_half)
                };
                (po.ok(), solve_c1_c2(g2, prep.point.q, s_half, prep.point.gamma).ok())
            }
            _ => (None, None),
        };
        let d = prep.grids[0].realized;
        points.push(PointAnalysis {
            index: i,
            swept: prep.point.swept.clone(),
            driving_ratio: driving_ratio(cfg.scheme.regime, &prep.point),
            cells_per_side: prep.grids.iter().map(|g| g.k).collect(),
            cluster_sides: prep.grids.iter().map(|g| g.realized).collect(),
            occupancies: prep.occupancies.clone(),
            closed_form_outage: prep.closed_form_outage.clone(),
            epsilon: (prep.kind == SchemeKind::Scenario2).then_some(prep.scheme.epsilon),
            po_sec,
            fixed_point,
            interference_bound: interference_upper_bound(d, &cfg.phy, p_max)?,
            sinr_floor: sinr_floor_prop1(d, &cfg.phy, p_max, p_max)?,
        });
    }
    Ok(AnalysisReport {
        predicted_exponent: predicted_exponent(exponent_kind(cfg.experiment.scheme, cfg.scheme.regime), cfg.network.gamma)
            .ok(),
        points,
    })
}
