//! Sweep execution. Trials are seeded `base_seed + trial`, run in parallel
//! chunks and reduced in trial order, so results do not depend on the
//! thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::artifact::{PointFailure, PointResult, ResultArtifact, SlotSummary, SCHEMA_VERSION};
use super::config::{ExperimentConfig, PointConfig, SchemeKind};
use crate::analysis::{fit_loglog, predicted_exponent, ExponentKind};
use crate::caching::{build_split_policy, closed_form_outage, optimize_policy, CachePlacer, CachingPolicy, SplitCachingPolicy};
use crate::error::{Error, Result};
use crate::geometry::{grid_from_target_side, CachePlacement, GridSide, NetworkRealization};
use crate::metrics::{check_transport_bound, EstimateAccumulator, TransportRecord};
use crate::phy::PhyConfig;
use crate::popularity::PopularityModel;
use crate::schemes::{
    cluster_side, epsilon_from_product, run_scenario1, run_scenario2, slot2_side, tune_epsilon, Regime,
    SchemeConfig, SchemeResult,
};

#[derive(Debug, Clone)]
pub enum CacheLayout {
    Single {
        policy: CachingPolicy,
        placer: CachePlacer,
    },
    Split {
        policy: SplitCachingPolicy,
        slot1: CachePlacer,
        slot2: CachePlacer,
    },
}

/// Everything a trial needs that does not depend on its seed.
#[derive(Debug, Clone)]
pub struct PreparedPoint {
    pub point: PointConfig,
    pub kind: SchemeKind,
    pub model: PopularityModel,
    pub scheme: SchemeConfig,
    pub layout: CacheLayout,
    /// Unrounded slot-1 cluster side, also the transport-bound reference.
    pub reference_side: f64,
    pub grids: Vec<GridSide>,
    /// Design occupancy `N/k²` of each policy.
    pub occupancies: Vec<f64>,
    /// Cluster outage predicted by the design occupancy, per policy.
    pub closed_form_outage: Vec<f64>,
}

/// Mean cluster occupancy of a `k × k` grid.
pub fn design_occupancy(n: usize, k: usize) -> f64 {
    n as f64 / (k * k) as f64
}

pub fn prepare_point(cfg: &ExperimentConfig, index: usize) -> Result<PreparedPoint> {
    let point = cfg.point(index)?;
    point.validate(cfg.experiment.scheme, cfg.scheme.regime)?;
    let model = PopularityModel::new(point.m, point.gamma, point.q)?;
    let regime = cfg.scheme.regime;
    let d1 = cluster_side(regime, &model, point.s, point.n, point.rho_or_alpha1)?;
    let side1 = grid_from_target_side(d1)?;
    let g1 = design_occupancy(point.n, side1.k);

    let mut scheme = SchemeConfig::new(regime, point.rho_or_alpha1);
    scheme.t_prime = cfg.scheme.t_prime;
    scheme.frequency_plan = cfg.scheme.frequency_plan;
    scheme.record_schedule = cfg.experiment.check_bound;

    let (layout, grids, occupancies, closed) = match cfg.experiment.scheme {
        SchemeKind::Scenario1 => {
            let policy = optimize_policy(&model, point.s, g1)?;
            let closed = closed_form_outage(&policy, &model, g1)?;
            let placer = CachePlacer::new(&policy);
            (CacheLayout::Single { policy, placer }, vec![side1], vec![g1], vec![closed])
        }
        SchemeKind::Scenario2 => {
            scheme.epsilon = match point.c_sec {
                Some(c) => epsilon_from_product(tune_epsilon(regime, &model, point.s, c)?, point.rho_or_alpha1)?,
                None => point.epsilon.ok_or_else(|| Error::Config("scenario 2 needs c_sec or epsilon".into()))?,
            };
            let side2 = slot2_side(d1, scheme.epsilon)?;
            let g2 = design_occupancy(point.n, side2.k);
            let policy = build_split_policy(&model, point.s, g1, g2)?;
            let closed = vec![
                closed_form_outage(&policy.policy_slot1, &model, g1)?,
                closed_form_outage(&policy.policy_slot2, &model, g2)?,
            ];
            let (slot1, slot2) = policy.placers();
            (CacheLayout::Split { policy, slot1, slot2 }, vec![side1, side2], vec![g1, g2], closed)
        }
    };
    scheme.validate()?;
    Ok(PreparedPoint {
        point,
        kind: cfg.experiment.scheme,
        model,
        scheme,
        layout,
        reference_side: d1,
        grids,
        occupancies,
        closed_form_outage: closed,
    })
}

impl PreparedPoint {
    pub fn realization(&self, seed: u64) -> Result<NetworkRealization> {
        let placement = match &self.layout {
            CacheLayout::Single { placer, .. } => CachePlacement::Single(placer),
            CacheLayout::Split { slot1, slot2, .. } => CachePlacement::Split(slot1, slot2),
        };
        NetworkRealization::generate(self.point.n, &self.model, placement, seed)
    }

    pub fn run(&self, real: &NetworkRealization, phy: &PhyConfig) -> Result<SchemeResult> {
        match self.kind {
            SchemeKind::Scenario1 => run_scenario1(real, &self.model, &self.scheme, phy),
            SchemeKind::Scenario2 => run_scenario2(real, &self.model, &self.scheme, phy),
        }
    }

    /// One full trial; the schedule is consumed by the bound check.
    pub fn trial(&self, phy: &PhyConfig, seed: u64, eps0: f64) -> Result<Trial> {
        let real = self.realization(seed)?;
        let mut result = self.run(&real, phy)?;
        let transport = match result.schedule.take() {
            Some(s) => Some(check_transport_bound(&s, phy, self.scheme.t_prime, self.reference_side, eps0)?),
            None => None,
        };
        Ok(Trial { result, transport })
    }
}

#[derive(Debug, Clone)]
pub struct Trial {
    pub result: SchemeResult,
    pub transport: Option<TransportRecord>,
}

/// Order-sensitive reduction of trials into a point summary.
struct PointReducer {
    t_prime: f64,
    acc: EstimateAccumulator,
    c_gamma_sum: f64,
    slack_min: Option<f64>,
    bound_violations: usize,
    slots: Vec<SlotSummary>,
    remark7_hits: usize,
    remark7_cases: usize,
}

impl PointReducer {
    fn new(n: usize, t_prime: f64) -> Self {
        Self {
            t_prime,
            acc: EstimateAccumulator::new(n, t_prime),
            c_gamma_sum: 0.0,
            slack_min: None,
            bound_violations: 0,
            slots: Vec::new(),
            remark7_hits: 0,
            remark7_cases: 0,
        }
    }

    fn add(&mut self, t: &Trial, scenario2: bool) -> Result<()> {
        let r = &t.result;
        self.acc.add(r)?;
        self.c_gamma_sum += r.transport_capacity(self.t_prime);
        if let Some(rec) = &t.transport {
            self.slack_min = Some(self.slack_min.map_or(rec.slack, |s: f64| s.min(rec.slack)));
            if !rec.holds {
                self.bound_violations += 1;
            }
        }
        if self.slots.is_empty() {
            self.slots = r.slots.iter().map(|s| SlotSummary::empty(s.label, s.cluster_side, s.sinr_floor)).collect();
        }
        for (summary, s) in self.slots.iter_mut().zip(&r.slots) {
            summary.absorb(s);
        }
        if scenario2 {
            if let (Some(with2), Some(only1)) = r.slot_split_means(1) {
                self.remark7_cases += 1;
                if with2 > only1 {
                    self.remark7_hits += 1;
                }
            }
        }
        Ok(())
    }
}

/// Runs one prepared point over `n_realizations` trials.
pub fn run_point(prep: &PreparedPoint, cfg: &ExperimentConfig) -> Result<PointResult> {
    let n_real = cfg.experiment.n_realizations;
    let base = cfg.experiment.base_seed;
    let eps0 = cfg.experiment.eps0;
    let chunk = (rayon::current_num_threads() * 2).max(1);
    let scenario2 = prep.kind == SchemeKind::Scenario2;
    let mut red = PointReducer::new(prep.point.n, prep.scheme.t_prime);
    let mut start = 0;
    while start < n_real {
        let end = (start + chunk).min(n_real);
        let trials: Vec<Result<Trial>> = (start..end)
            .into_par_iter()
            .map(|t| prep.trial(&cfg.phy, base.wrapping_add(t as u64), eps0))
            .collect();
        for t in trials {
            red.add(&t?, scenario2)?;
        }
        start = end;
    }
    let estimate = red.acc.finish()?;
    let r = n_real as f64;
    for s in &mut red.slots {
        s.finish(r);
    }
    Ok(PointResult {
        index: prep.point.index,
        swept: prep.point.swept.clone(),
        n: prep.point.n,
        m: prep.point.m,
        s: prep.point.s,
        q: prep.point.q,
        epsilon: scenario2.then_some(prep.scheme.epsilon),
        driving_ratio: driving_ratio(cfg.scheme.regime, &prep.point),
        cells_per_side: prep.grids.iter().map(|g| g.k).collect(),
        cluster_sides: prep.grids.iter().map(|g| g.realized).collect(),
        occupancies: prep.occupancies.clone(),
        closed_form_outage: prep.closed_form_outage.clone(),
        estimate,
        c_gamma_mean: red.c_gamma_sum / r,
        bound_slack_min: red.slack_min,
        bound_violations: red.bound_violations,
        slots: red.slots,
        remark7_fraction: (red.remark7_cases > 0).then(|| red.remark7_hits as f64 / red.remark7_cases as f64),
    })
}

/// `S/M` in the γ < 1 and Zipf regimes, `S/q` for γ > 1.
pub fn driving_ratio(regime: Regime, p: &PointConfig) -> f64 {
    match regime {
        Regime::GammaGt1 => p.s as f64 / p.q,
        Regime::GammaLt1 | Regime::ZipfGt1 => p.s as f64 / p.m as f64,
    }
}

pub fn exponent_kind(kind: SchemeKind, regime: Regime) -> ExponentKind {
    match (kind, regime) {
        (SchemeKind::Scenario1, Regime::GammaLt1) => ExponentKind::Scenario1Lt1,
        (SchemeKind::Scenario2, Regime::GammaLt1) => ExponentKind::Scenario2Lt1,
        (SchemeKind::Scenario1, Regime::GammaGt1) => ExponentKind::Scenario1Gt1,
        (SchemeKind::Scenario2, Regime::GammaGt1) => ExponentKind::Scenario2Gt1,
        (_, Regime::ZipfGt1) => ExponentKind::ZipfGt1,
    }
}

/// Options that do not change results.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct RunOptions {
    /// Worker threads; `None` uses every available core.
    pub threads: Option<usize>,
}

/// Runs every sweep point, then fits throughput against the driving ratio.
pub fn run(cfg: &ExperimentConfig, opts: RunOptions) -> Result<ResultArtifact> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = opts.threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_in_pool(cfg))
}

fn run_in_pool(cfg: &ExperimentConfig) -> Result<ResultArtifact> {
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for i in 0..cfg.num_points() {
        let started = std::time::Instant::now();
        match prepare_point(cfg, i).and_then(|p| run_point(&p, cfg)) {
            Ok(p) => {
                log::info!(
                    "point {i}: T_mean = {:.6e}, p_o = {:.4} ({:.1}s)",
                    p.estimate.t_mean,
                    p.estimate.p_o_hat,
                    started.elapsed().as_secs_f64()
                );
                points.push(p);
            }
            Err(e) => {
                log::warn!("point {i} skipped: {e}");
                failures.push(PointFailure {
                    index: i,
                    message: e.to_string(),
                });
            }
        }
    }

    let kind = exponent_kind(cfg.experiment.scheme, cfg.scheme.regime);
    let predicted = predicted_exponent(kind, cfg.network.gamma).ok();
    let fit_on = |f: fn(&PointResult) -> f64| {
        if cfg.sweep.is_none() || points.len() < 2 {
            return None;
        }
        let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.driving_ratio, f(p))).collect();
        fit_loglog(&xy).ok()
    };
    let fit = fit_on(|p| p.estimate.t_mean);
    let fit_t_min = fit_on(|p| p.estimate.t_min_avg);
    Ok(ResultArtifact {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        driving_ratio: match cfg.scheme.regime {
            Regime::GammaGt1 => "S/q".into(),
            _ => "S/M".into(),
        },
        exponent_kind: kind,
        predicted_exponent: predicted,
        fit,
        fit_t_min,
        points,
        failures,
    })
}
