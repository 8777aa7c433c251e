//! Achievable delivery schemes.
//!
//! * Scenario 1: half the epoch is network-wide TDMA at full band, the other
//!   half is clustered round-robin with frequency reuse.
//! * Scenario 2: both halves are clustered round-robin, the second with
//!   shrunken clusters served from a dedicated cache subspace.
//!
//! Epochs are evaluated analytically as rate × airtime.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{
    build_grid, color_grid, grid_from_target_side, pair_within_clusters, GridSide, Link, NetworkRealization,
    PairingOutcome, Subspace,
};
use crate::phy::{path_gain, rate_from_sinr, sinr_floor_prop1, Activation, ActiveSet, PhyConfig};
use crate::popularity::PopularityModel;

/// Popularity regime, which fixes the quantity driving cluster sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    GammaLt1,
    GammaGt1,
    ZipfGt1,
}

/// How clusters are mapped onto sub-channels in clustered slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyPlan {
    /// Colour `(cx mod 2(K+1), cy mod 2(K+1))`.
    #[default]
    Reuse,
    /// Every cluster on sub-channel 0. Breaks the interference guarantee;
    /// kept for mutation testing of the validation suites.
    Universal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub regime: Regime,
    /// ρ (γ < 1), α₁ (γ > 1) or α₂′ (Zipf, γ > 1).
    pub rho_or_alpha1: f64,
    /// Slot-2 shrink factor; scenario 2 only.
    #[serde(default = "one")]
    pub epsilon: f64,
    #[serde(default = "one")]
    pub t_prime: f64,
    #[serde(default)]
    pub frequency_plan: FrequencyPlan,
    /// Keep the per-resource schedule for transport-capacity checks.
    #[serde(default)]
    pub record_schedule: bool,
}

fn one() -> f64 {
    1.0
}

impl SchemeConfig {
    pub fn new(regime: Regime, rho_or_alpha1: f64) -> Self {
        Self {
            regime,
            rho_or_alpha1,
            epsilon: 1.0,
            t_prime: 1.0,
            frequency_plan: FrequencyPlan::Reuse,
            record_schedule: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho_or_alpha1.is_finite() && self.rho_or_alpha1 > 0.0) {
            return Err(invalid("rho_or_alpha1", "must be > 0"));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(invalid("epsilon", format!("must lie in (0, 1], got {}", self.epsilon)));
        }
        if !(self.t_prime.is_finite() && self.t_prime > 0.0) {
            return Err(invalid("t_prime", "must be > 0"));
        }
        Ok(())
    }
}

/// Target cluster side: `√(ρM/(SN))`, `√(α₁q/(SN))` or `√(α₂′/(SN))`.
pub fn cluster_side(regime: Regime, model: &PopularityModel, s: usize, n: usize, rho_or_alpha1: f64) -> Result<f64> {
    if s == 0 || n == 0 {
        return Err(invalid("S/N", "cache size and user count must be positive"));
    }
    let numerator = match regime {
        Regime::GammaLt1 => rho_or_alpha1 * model.library_size() as f64,
        Regime::GammaGt1 => rho_or_alpha1 * model.plateau(),
        Regime::ZipfGt1 => rho_or_alpha1,
    };
    let d = (numerator / (s as f64 * n as f64)).sqrt();
    if !(d > 0.0) {
        return Err(Error::Config(format!("cluster side {d} is not positive (q = 0 in the gamma > 1 regime?)")));
    }
    if d > 1.0 {
        return Err(Error::Config(format!("cluster side {d} exceeds the network side")));
    }
    Ok(d)
}

/// Slot-2 product `ε·ρ = C_sec·(S/M)^{1/(2-γ)}` (γ < 1) or
/// `ε·α₁ = C_sec·(S/q)^{1/2}` (γ > 1).
pub fn tune_epsilon(regime: Regime, model: &PopularityModel, s: usize, c_sec: f64) -> Result<f64> {
    if !(c_sec > 0.0) {
        return Err(invalid("c_sec", "must be > 0"));
    }
    let s = s as f64;
    match regime {
        Regime::GammaLt1 => {
            let g = model.gamma();
            if g >= 1.0 {
                return Err(invalid("gamma", "the gamma < 1 rule needs gamma < 1"));
            }
            Ok(c_sec * (s / model.library_size() as f64).powf(1.0 / (2.0 - g)))
        }
        Regime::GammaGt1 => {
            if model.plateau() <= 0.0 {
                return Err(invalid("q", "the gamma > 1 rule needs q > 0"));
            }
            Ok(c_sec * (s / model.plateau()).sqrt())
        }
        Regime::ZipfGt1 => Err(invalid("regime", "no slot-2 tuning rule for the Zipf regime")),
    }
}

/// `ε` from the tuned product; fails when the network is too small for the
/// requested constant.
pub fn epsilon_from_product(product: f64, rho_or_alpha1: f64) -> Result<f64> {
    let eps = product / rho_or_alpha1;
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Config(format!(
            "epsilon = {eps} outside (0, 1]: network too small for this C_sec"
        )));
    }
    Ok(eps)
}

/// One time-frequency resource: `τ` seconds on `bandwidth` Hz.
#[derive(Debug, Clone, Serialize)]
pub struct ResourceBlock {
    pub airtime: f64,
    pub bandwidth: f64,
    pub first: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScheduledLink {
    pub tx: u32,
    pub rx: u32,
    pub distance: f64,
    pub power: f64,
    /// Capped path gain of the link itself.
    pub gain: f64,
    /// Spectral efficiency `log₂(1 + SINR)`.
    pub efficiency: f64,
}

/// Every resource used during an epoch and the links active on it.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Schedule {
    pub blocks: Vec<ResourceBlock>,
    pub links: Vec<ScheduledLink>,
}

impl Schedule {
    pub fn block_links(&self, b: &ResourceBlock) -> &[ScheduledLink] {
        &self.links[b.first..b.first + b.len]
    }

    fn push_block(&mut self, airtime: f64, bandwidth: f64, links: impl IntoIterator<Item = ScheduledLink>) {
        let first = self.links.len();
        self.links.extend(links);
        let len = self.links.len() - first;
        self.blocks.push(ResourceBlock {
            airtime,
            bandwidth,
            first,
            len,
        });
    }
}

/// Aggregates of one delivery slot.
#[derive(Debug, Clone, Serialize)]
pub struct SlotStats {
    pub label: &'static str,
    pub duration: f64,
    pub cluster_side: Option<f64>,
    pub served_users: usize,
    pub rounds: usize,
    pub bits_total: f64,
    /// `Σ r·bits` over the slot's activations.
    pub distance_bits: f64,
    /// Mean instantaneous rate over activated links.
    pub mean_link_rate: f64,
    pub mean_link_distance: f64,
    pub min_sinr: f64,
    pub sinr_floor: Option<f64>,
    pub floor_violations: usize,
}

#[derive(Debug, Clone)]
pub struct SchemeResult {
    pub per_user_bits: Vec<f64>,
    pub per_user_served: Vec<bool>,
    /// Bit `i` set when the user was served in slot `i`.
    pub served_mask: Vec<u8>,
    pub slots: Vec<SlotStats>,
    pub grids: Vec<GridSide>,
    pub schedule: Option<Schedule>,
}

impl SchemeResult {
    pub fn num_users(&self) -> usize {
        self.per_user_bits.len()
    }

    pub fn outage_fraction(&self) -> f64 {
        let out = self.per_user_served.iter().filter(|&&s| !s).count();
        out as f64 / self.per_user_served.len() as f64
    }

    /// Transport capacity `C_Γ = Σ r_u·C_u` over the epoch.
    pub fn transport_capacity(&self, t_prime: f64) -> f64 {
        self.slots.iter().map(|s| s.distance_bits).sum::<f64>() / t_prime
    }

    pub fn total_bits(&self) -> f64 {
        crate::sum::sum(self.per_user_bits.iter().copied())
    }

    /// Mean bits of users served in `slot`, and of users served only in
    /// other slots. `None` for an empty group.
    pub fn slot_split_means(&self, slot: u8) -> (Option<f64>, Option<f64>) {
        let bit = 1u8 << slot;
        let mut with = (0.0, 0usize);
        let mut without = (0.0, 0usize);
        for (&b, &m) in self.per_user_bits.iter().zip(&self.served_mask) {
            if m & bit != 0 {
                with.0 += b;
                with.1 += 1;
            } else if m != 0 {
                without.0 += b;
                without.1 += 1;
            }
        }
        let mean = |(s, c): (f64, usize)| (c > 0).then(|| s / c as f64);
        (mean(with), mean(without))
    }
}

fn full_band_rate(link: &Link, phy: &PhyConfig) -> (f64, f64) {
    let g = path_gain(link.distance, phy);
    let snr = phy.p_max * g / (phy.bandwidth * phy.n0);
    (g, rate_from_sinr(snr, phy.bandwidth, phy))
}

/// TDMA half: each served pair alone on the full band for `T′/(2N)`.
fn tdma_slot(
    pairing: &PairingOutcome,
    n: usize,
    duration: f64,
    phy: &PhyConfig,
    bits: &mut [f64],
    schedule: Option<&mut Schedule>,
) -> SlotStats {
    let airtime = duration / n as f64;
    let mut total = 0.0;
    let mut distance_bits = 0.0;
    let mut rate_sum = 0.0;
    let mut dist_sum = 0.0;
    let mut min_sinr = f64::INFINITY;
    let mut sched = schedule;
    for link in &pairing.links {
        let (g, rate) = full_band_rate(link, phy);
        let b = rate * airtime;
        bits[link.rx as usize] += b;
        total += b;
        distance_bits += link.distance * b;
        rate_sum += rate;
        dist_sum += link.distance;
        min_sinr = min_sinr.min(phy.p_max * g / (phy.bandwidth * phy.n0));
        if let Some(s) = sched.as_deref_mut() {
            s.push_block(
                airtime,
                phy.bandwidth,
                [ScheduledLink {
                    tx: link.tx,
                    rx: link.rx,
                    distance: link.distance,
                    power: phy.p_max,
                    gain: g,
                    efficiency: rate / phy.bandwidth,
                }],
            );
        }
    }
    // Idle TDMA sub-slots still occupy the band.
    if let Some(s) = sched {
        for _ in pairing.links.len()..n {
            s.push_block(airtime, phy.bandwidth, []);
        }
    }
    let links = pairing.links.len();
    SlotStats {
        label: "tdma",
        duration,
        cluster_side: None,
        served_users: links,
        rounds: n,
        bits_total: total,
        distance_bits,
        mean_link_rate: if links > 0 { rate_sum / links as f64 } else { 0.0 },
        mean_link_distance: if links > 0 { dist_sum / links as f64 } else { 0.0 },
        min_sinr,
        sinr_floor: None,
        floor_violations: 0,
    }
}

/// Clustered round-robin with reuse colouring. In round `r` every cluster
/// with more than `r` pairs activates its `r`-th pair; each activation lasts
/// `duration / R_max`.
#[allow(clippy::too_many_arguments)]
fn clustered_slot(
    label: &'static str,
    real: &NetworkRealization,
    grid_side: &GridSide,
    which: Subspace,
    duration: f64,
    scheme: &SchemeConfig,
    phy: &PhyConfig,
    bits: &mut [f64],
    schedule: Option<&mut Schedule>,
) -> Result<(SlotStats, PairingOutcome)> {
    let grid = build_grid(grid_side.k, &real.positions)?;
    let pairing = pair_within_clusters(real, &grid, which);
    let colors = match scheme.frequency_plan {
        FrequencyPlan::Reuse => color_grid(&grid, phy.reuse_k),
        FrequencyPlan::Universal => vec![0; grid.num_cells()],
    };

    // Links grouped by cell, receiver order preserved within each cell.
    let cells = grid.num_cells();
    let mut offsets = vec![0usize; cells + 1];
    for l in &pairing.links {
        offsets[l.cell as usize + 1] += 1;
    }
    for c in 0..cells {
        offsets[c + 1] += offsets[c];
    }
    let mut fill = offsets.clone();
    let mut by_cell = vec![0usize; pairing.links.len()];
    for (i, l) in pairing.links.iter().enumerate() {
        by_cell[fill[l.cell as usize]] = i;
        fill[l.cell as usize] += 1;
    }
    let rounds = (0..cells).map(|c| offsets[c + 1] - offsets[c]).max().unwrap_or(0);

    let bw = phy.subchannel_bandwidth();
    let floor = sinr_floor_prop1(grid_side.realized, phy, phy.p_max, phy.p_max)?;
    let airtime = if rounds > 0 { duration / rounds as f64 } else { 0.0 };
    let n_colors = crate::geometry::reuse_colors(phy.reuse_k);

    let mut active = ActiveSet::new();
    let mut link_of = Vec::new();
    let mut total = 0.0;
    let mut distance_bits = 0.0;
    let mut rate_sum = 0.0;
    let mut dist_sum = 0.0;
    let mut min_sinr = f64::INFINITY;
    let mut violations = 0usize;
    let mut sched = schedule;
    let mut round_links: Vec<(u32, ScheduledLink)> = Vec::new();

    for r in 0..rounds {
        active.clear();
        link_of.clear();
        for c in 0..cells {
            if offsets[c] + r < offsets[c + 1] {
                let li = by_cell[offsets[c] + r];
                let l = &pairing.links[li];
                active.push(Activation {
                    tx: l.tx,
                    rx: l.rx,
                    power: phy.p_max,
                    subchannel: colors[c],
                });
                link_of.push(li);
            }
        }
        let sinrs = active.sinrs(&real.positions, phy, bw);
        round_links.clear();
        for ((a, &li), &s) in active.activations.iter().zip(&link_of).zip(&sinrs) {
            let l = &pairing.links[li];
            let rate = rate_from_sinr(s, bw, phy);
            let b = rate * airtime;
            bits[l.rx as usize] += b;
            total += b;
            distance_bits += l.distance * b;
            rate_sum += rate;
            dist_sum += l.distance;
            min_sinr = min_sinr.min(s);
            if s < floor {
                violations += 1;
            }
            if sched.is_some() {
                round_links.push((
                    a.subchannel,
                    ScheduledLink {
                        tx: l.tx,
                        rx: l.rx,
                        distance: l.distance,
                        power: a.power,
                        gain: path_gain(l.distance, phy),
                        efficiency: rate / bw,
                    },
                ));
            }
        }
        if let Some(s) = sched.as_deref_mut() {
            round_links.sort_by_key(|(ch, _)| *ch);
            for ch in 0..n_colors as u32 {
                let lo = round_links.partition_point(|(c, _)| *c < ch);
                let hi = round_links.partition_point(|(c, _)| *c <= ch);
                s.push_block(airtime, bw, round_links[lo..hi].iter().map(|(_, l)| *l));
            }
        }
    }

    let links = pairing.links.len();
    let stats = SlotStats {
        label,
        duration,
        cluster_side: Some(grid_side.realized),
        served_users: links,
        rounds,
        bits_total: total,
        distance_bits,
        mean_link_rate: if links > 0 { rate_sum / links as f64 } else { 0.0 },
        mean_link_distance: if links > 0 { dist_sum / links as f64 } else { 0.0 },
        min_sinr,
        sinr_floor: Some(floor),
        floor_violations: violations,
    };
    Ok((stats, pairing))
}

/// Scenario 1 on a realization with unsplit caches.
pub fn run_scenario1(
    real: &NetworkRealization,
    model: &PopularityModel,
    scheme: &SchemeConfig,
    phy: &PhyConfig,
) -> Result<SchemeResult> {
    scheme.validate()?;
    if real.is_split() {
        return Err(invalid("caches", "scenario 1 expects unsplit caches"));
    }
    let n = real.num_users();
    let d = cluster_side(scheme.regime, model, real.cache_size(), n, scheme.rho_or_alpha1)?;
    let side = grid_from_target_side(d)?;
    let half = scheme.t_prime / 2.0;

    let mut bits = vec![0.0; n];
    let mut schedule = scheme.record_schedule.then(Schedule::default);
    let (clustered, pairing) = clustered_slot(
        "clustered",
        real,
        &side,
        Subspace::Whole,
        half,
        scheme,
        phy,
        &mut bits,
        schedule.as_mut(),
    )?;
    let tdma = tdma_slot(&pairing, n, half, phy, &mut bits, schedule.as_mut());

    let served: Vec<bool> = pairing.outage.iter().map(|&o| !o).collect();
    let served_mask = served.iter().map(|&s| if s { 0b11 } else { 0 }).collect();
    Ok(SchemeResult {
        per_user_bits: bits,
        per_user_served: served,
        served_mask,
        slots: vec![tdma, clustered],
        grids: vec![side],
        schedule,
    })
}

/// Slot-2 grid: side `√ε·d₁`.
pub fn slot2_side(d1: f64, epsilon: f64) -> Result<GridSide> {
    grid_from_target_side(epsilon.sqrt() * d1)
}

/// Scenario 2 on a realization with split caches.
pub fn run_scenario2(
    real: &NetworkRealization,
    model: &PopularityModel,
    scheme: &SchemeConfig,
    phy: &PhyConfig,
) -> Result<SchemeResult> {
    scheme.validate()?;
    if !real.is_split() {
        return Err(invalid("caches", "scenario 2 expects split caches"));
    }
    let n = real.num_users();
    let d1 = cluster_side(scheme.regime, model, real.cache_size(), n, scheme.rho_or_alpha1)?;
    let side1 = grid_from_target_side(d1)?;
    let side2 = slot2_side(d1, scheme.epsilon)?;
    let half = scheme.t_prime / 2.0;

    let mut bits = vec![0.0; n];
    let mut schedule = scheme.record_schedule.then(Schedule::default);
    let (s1, p1) = clustered_slot(
        "slot1",
        real,
        &side1,
        Subspace::Slot1,
        half,
        scheme,
        phy,
        &mut bits,
        schedule.as_mut(),
    )?;
    let (s2, p2) = clustered_slot(
        "slot2",
        real,
        &side2,
        Subspace::Slot2,
        half,
        scheme,
        phy,
        &mut bits,
        schedule.as_mut(),
    )?;
    let served_mask: Vec<u8> = p1
        .outage
        .iter()
        .zip(&p2.outage)
        .map(|(&a, &b)| u8::from(!a) | (u8::from(!b) << 1))
        .collect();
    let served = served_mask.iter().map(|&m| m != 0).collect();
    Ok(SchemeResult {
        per_user_bits: bits,
        per_user_served: served,
        served_mask,
        slots: vec![s1, s2],
        grids: vec![side1, side2],
        schedule,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caching::{build_split_policy, optimize_policy, CachePlacer, CachingPolicy};
    use crate::geometry::CachePlacement;
    use approx::assert_relative_eq;

    #[test]
    fn cluster_side_examples() {
        let m = PopularityModel::new(100, 0.6, 0.0).unwrap();
        assert_relative_eq!(cluster_side(Regime::GammaLt1, &m, 4, 10_000, 1.0).unwrap(), 0.05, max_relative = 1e-12);
        let g = PopularityModel::new(1000, 1.5, 50.0).unwrap();
        assert_relative_eq!(
            cluster_side(Regime::GammaGt1, &g, 2, 100_000, 2.0).unwrap(),
            (100.0f64 / 200_000.0).sqrt(),
            max_relative = 1e-12
        );
        let big = PopularityModel::new(200, 0.6, 0.0).unwrap();
        let ratio = cluster_side(Regime::GammaLt1, &big, 4, 10_000, 1.0).unwrap() / 0.05;
        assert_relative_eq!(ratio, 2f64.sqrt(), max_relative = 1e-12);
        assert!(cluster_side(Regime::GammaLt1, &m, 1, 10, 1.0).is_err());
    }

    #[test]
    fn tune_epsilon_examples() {
        let m = PopularityModel::new(400, 0.6, 10.0).unwrap();
        let p = tune_epsilon(Regime::GammaLt1, &m, 4, 1.0).unwrap();
        assert_relative_eq!(p, 0.01f64.powf(1.0 / 1.4), max_relative = 1e-12);
        assert_relative_eq!(p, 0.037275937203149, max_relative = 1e-9);
        assert_relative_eq!(tune_epsilon(Regime::GammaLt1, &m, 4, 2.0).unwrap(), 2.0 * p, max_relative = 1e-15);
        let g = PopularityModel::new(4000, 1.5, 400.0).unwrap();
        assert_relative_eq!(tune_epsilon(Regime::GammaGt1, &g, 4, 1.0).unwrap(), 0.1, max_relative = 1e-12);
        assert!(epsilon_from_product(5.0, 4.0).is_err());
        assert_relative_eq!(epsilon_from_product(2.0, 4.0).unwrap(), 0.5);
    }

    fn realization(n: usize, m: usize, s: usize, seed: u64, full: bool) -> (PopularityModel, NetworkRealization) {
        let model = PopularityModel::new(m, 0.6, 5.0).unwrap();
        let policy = if full {
            CachingPolicy::from_probs(vec![1.0; m]).unwrap()
        } else {
            optimize_policy(&model, s, 8.0).unwrap()
        };
        let placer = CachePlacer::new(&policy);
        let r = NetworkRealization::generate(n, &model, CachePlacement::Single(&placer), seed).unwrap();
        (model, r)
    }

    #[test]
    fn full_caches_mean_no_outage() {
        let (model, r) = realization(300, 10, 10, 1, true);
        let res = run_scenario1(&r, &model, &SchemeConfig::new(Regime::GammaLt1, 1.0), &PhyConfig::default()).unwrap();
        assert_eq!(res.outage_fraction(), 0.0);
        assert!(res.per_user_bits.iter().all(|&b| b > 0.0));
    }

    #[test]
    fn single_user_gets_half_epoch_full_band() {
        let model = PopularityModel::new(1, 0.6, 0.0).unwrap();
        let policy = CachingPolicy::from_probs(vec![1.0]).unwrap();
        let placer = CachePlacer::new(&policy);
        let r = NetworkRealization::generate(1, &model, CachePlacement::Single(&placer), 3).unwrap();
        let phy = PhyConfig::default();
        let res = run_scenario1(&r, &model, &SchemeConfig::new(Regime::GammaLt1, 1.0), &phy).unwrap();
        let tdma = &res.slots[0];
        let full = phy.bandwidth * (1.0 + phy.p_max * phy.gain_cap / (phy.bandwidth * phy.n0)).log2();
        assert_relative_eq!(tdma.bits_total, full * 0.5, max_relative = 1e-12);
    }

    #[test]
    fn round_robin_serves_everyone_once() {
        let (model, r) = realization(3000, 60, 2, 9, false);
        let mut cfg = SchemeConfig::new(Regime::GammaLt1, 2.0);
        cfg.record_schedule = true;
        let phy = PhyConfig::default();
        let res = run_scenario1(&r, &model, &cfg, &phy).unwrap();
        let sched = res.schedule.as_ref().unwrap();
        let mut tdma_hits = vec![0; r.num_users()];
        let mut clustered_hits = vec![0; r.num_users()];
        for b in &sched.blocks {
            let hits = if b.bandwidth == phy.bandwidth { &mut tdma_hits } else { &mut clustered_hits };
            for l in sched.block_links(b) {
                hits[l.rx as usize] += 1;
            }
        }
        for u in 0..r.num_users() {
            let expected = usize::from(res.per_user_served[u]);
            assert_eq!(tdma_hits[u], expected);
            assert_eq!(clustered_hits[u], expected);
        }
        // the resource grid exactly tiles the epoch in time × frequency
        let area: f64 = sched.blocks.iter().map(|b| b.airtime * b.bandwidth).sum();
        assert_relative_eq!(area, cfg.t_prime * phy.bandwidth, max_relative = 1e-12);
        assert_eq!(res.slots[1].floor_violations, 0);
    }

    #[test]
    fn universal_plan_breaks_floor() {
        let (model, r) = realization(20_000, 400, 2, 4, false);
        let mut cfg = SchemeConfig::new(Regime::GammaLt1, 4.0);
        cfg.frequency_plan = FrequencyPlan::Universal;
        let res = run_scenario1(&r, &model, &cfg, &PhyConfig::default()).unwrap();
        assert!(res.slots[1].floor_violations > 0);
    }

    fn split_realization(eps: f64, seed: u64) -> (PopularityModel, SchemeConfig, NetworkRealization) {
        let model = PopularityModel::new(200, 0.6, 10.0).unwrap();
        let n = 20_000;
        let mut cfg = SchemeConfig::new(Regime::GammaLt1, 4.0);
        cfg.epsilon = eps;
        let d1 = cluster_side(cfg.regime, &model, 4, n, cfg.rho_or_alpha1).unwrap();
        let k1 = grid_from_target_side(d1).unwrap().k;
        let k2 = slot2_side(d1, eps).unwrap().k;
        let gc = |k: usize| n as f64 / (k * k) as f64;
        let split = build_split_policy(&model, 4, gc(k1), gc(k2)).unwrap();
        let (a, b) = split.placers();
        let r = NetworkRealization::generate(n, &model, CachePlacement::Split(&a, &b), seed).unwrap();
        (model, cfg, r)
    }

    #[test]
    fn scenario2_short_links_in_slot2() {
        let (model, cfg, r) = split_realization(0.05, 12);
        let res = run_scenario2(&r, &model, &cfg, &PhyConfig::default()).unwrap();
        let (s1, s2) = (&res.slots[0], &res.slots[1]);
        assert!(s2.mean_link_distance < s1.mean_link_distance);
        assert!(s2.mean_link_rate > s1.mean_link_rate);
        assert_eq!(s1.floor_violations + s2.floor_violations, 0);
        let (with2, only1) = res.slot_split_means(1);
        assert!(with2.unwrap() > only1.unwrap());
        assert!(run_scenario1(&r, &model, &cfg, &PhyConfig::default()).is_err());
    }

    #[test]
    fn scenario2_symmetric_slots_at_unit_epsilon() {
        let mut t1 = 0.0;
        let mut t2 = 0.0;
        for seed in 0..4 {
            let (model, cfg, r) = split_realization(1.0, seed);
            let res = run_scenario2(&r, &model, &cfg, &PhyConfig::default()).unwrap();
            t1 += res.slots[0].bits_total;
            t2 += res.slots[1].bits_total;
        }
        assert!((t1 / t2 - 1.0).abs() < 0.05, "{t1} vs {t2}");
    }
}
