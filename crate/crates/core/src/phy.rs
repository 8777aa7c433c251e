//! Generalized physical channel: capped power-law path gain, SINR, link
//! rates, and the interference and SINR bounds for reuse-coloured clusters.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{reuse_colors, Point};
use crate::sum::KahanSum;

/// Channel parameters. Distances are in units of the network side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhyConfig {
    pub chi: f64,
    pub alpha: f64,
    pub n0: f64,
    pub bandwidth: f64,
    pub p_max: f64,
    pub reuse_k: usize,
    pub gain_cap: f64,
    /// Bounded physical model: SINR is clipped here before the rate map.
    pub sinr_ceiling: Option<f64>,
}

impl Default for PhyConfig {
    /// `χ = 1e-12` keeps the gain cap inactive beyond 1e-3 of the network
    /// side; `P_max/(N₀B) = 1e12` then gives a unit-distance full-band SNR
    /// of 1.
    fn default() -> Self {
        Self {
            chi: 1e-12,
            alpha: 4.0,
            n0: 1e-12,
            bandwidth: 1.0,
            p_max: 1.0,
            reuse_k: 1,
            gain_cap: 1.0,
            sinr_ceiling: None,
        }
    }
}

impl PhyConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("chi", self.chi),
            ("n0", self.n0),
            ("bandwidth", self.bandwidth),
            ("p_max", self.p_max),
            ("gain_cap", self.gain_cap),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.alpha.is_finite() && self.alpha > 2.0) {
            return Err(Error::Divergent(self.alpha));
        }
        if self.reuse_k == 0 {
            return Err(invalid("K", "reuse parameter must be at least 1"));
        }
        if self.gain_cap > 1.0 {
            return Err(invalid("gain_cap", "must not exceed 1"));
        }
        if let Some(c) = self.sinr_ceiling {
            if !(c > 0.0) {
                return Err(invalid("sinr_ceiling", "must be > 0"));
            }
        }
        Ok(())
    }

    /// Sub-channel bandwidth of one reuse colour, `B/(2(K+1))²`.
    pub fn subchannel_bandwidth(&self) -> f64 {
        self.bandwidth / reuse_colors(self.reuse_k) as f64
    }

    /// Precomputed gain evaluator for hot loops.
    pub fn gain_fn(&self) -> PathGain {
        let half = self.alpha / 2.0;
        let even = (half.fract() == 0.0 && half <= 16.0).then_some(half as i32);
        PathGain {
            chi: self.chi,
            neg_half_alpha: -half,
            even,
            cap: self.gain_cap,
        }
    }
}

/// `min(cap, χ/d^α)` evaluated from squared distance.
#[derive(Debug, Clone, Copy)]
pub struct PathGain {
    chi: f64,
    neg_half_alpha: f64,
    even: Option<i32>,
    cap: f64,
}

impl PathGain {
    #[inline]
    pub fn from_d2(&self, d2: f64) -> f64 {
        if d2 <= 0.0 {
            return self.cap;
        }
        let g = match self.even {
            Some(h) => self.chi / d2.powi(h),
            None => self.chi * d2.powf(self.neg_half_alpha),
        };
        g.min(self.cap)
    }
}

/// `min(gain_cap, χ/d^α)`; `d = 0` yields the cap.
pub fn path_gain(d: f64, cfg: &PhyConfig) -> f64 {
    if d <= 0.0 {
        cfg.gain_cap
    } else {
        (cfg.chi * d.powf(-cfg.alpha)).min(cfg.gain_cap)
    }
}

/// `P·l / (B_u·N₀ + I)`.
pub fn sinr(power: f64, gain: f64, interference: f64, subchannel_bw: f64, cfg: &PhyConfig) -> f64 {
    power * gain / (subchannel_bw * cfg.n0 + interference)
}

/// `B_u·log₂(1 + SINR)`, clipping SINR at the configured ceiling if any.
pub fn rate_from_sinr(sinr: f64, subchannel_bw: f64, cfg: &PhyConfig) -> f64 {
    let s = cfg.sinr_ceiling.map_or(sinr, |c| sinr.min(c));
    subchannel_bw * s.ln_1p() / std::f64::consts::LN_2
}

/// Rate of a link whose interferers are given as `(power, gain)` pairs.
pub fn link_rate(power: f64, gain: f64, interferers: &[(f64, f64)], subchannel_bw: f64, cfg: &PhyConfig) -> f64 {
    let interference: f64 = interferers.iter().map(|(p, g)| p * g).sum();
    rate_from_sinr(sinr(power, gain, interference, subchannel_bw, cfg), subchannel_bw, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Activation {
    pub tx: u32,
    pub rx: u32,
    pub power: f64,
    pub subchannel: u32,
}

/// Transmissions sharing one time resource (Γ_Co when restricted to one
/// sub-channel).
#[derive(Debug, Clone, Default)]
pub struct ActiveSet {
    pub activations: Vec<Activation>,
}

impl ActiveSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, a: Activation) {
        self.activations.push(a);
    }

    pub fn clear(&mut self) {
        self.activations.clear();
    }

    pub fn len(&self) -> usize {
        self.activations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.activations.is_empty()
    }

    /// Co-channel interference power at each activation's receiver, in
    /// activation order. Exact pairwise summation per sub-channel.
    pub fn interference(&self, positions: &[Point], cfg: &PhyConfig, out: &mut Vec<f64>) {
        let gain = cfg.gain_fn();
        let n = self.activations.len();
        out.clear();
        out.resize(n, 0.0);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| self.activations[i].subchannel);
        let mut start = 0;
        while start < n {
            let ch = self.activations[order[start]].subchannel;
            let end = start + order[start..].partition_point(|&i| self.activations[i].subchannel == ch);
            let group = &order[start..end];
            if group.len() > 1 {
                let tx: Vec<(f64, f64, f64)> = group
                    .iter()
                    .map(|&i| {
                        let a = &self.activations[i];
                        let p = positions[a.tx as usize];
                        (p.x, p.y, a.power)
                    })
                    .collect();
                for (j, &i) in group.iter().enumerate() {
                    let r = positions[self.activations[i].rx as usize];
                    let mut acc = 0.0;
                    for (k, &(x, y, p)) in tx.iter().enumerate() {
                        if k != j {
                            let dx = x - r.x;
                            let dy = y - r.y;
                            acc += p * gain.from_d2(dx * dx + dy * dy);
                        }
                    }
                    out[i] = acc;
                }
            }
            start = end;
        }
    }

    /// SINR of every activation on a sub-channel of bandwidth `subchannel_bw`.
    pub fn sinrs(&self, positions: &[Point], cfg: &PhyConfig, subchannel_bw: f64) -> Vec<f64> {
        let gain = cfg.gain_fn();
        let mut interference = Vec::new();
        self.interference(positions, cfg, &mut interference);
        self.activations
            .iter()
            .zip(&interference)
            .map(|(a, &i)| {
                let g = gain.from_d2(positions[a.tx as usize].dist2(&positions[a.rx as usize]));
                sinr(a.power, g, i, subchannel_bw, cfg)
            })
            .collect()
    }
}

/// `I_c = Σ_{i≥1} i^{1-α}`.
///
/// Partial sums plus a tail estimated between `∫_n^∞ f - f(n)/2` and
/// `∫_{n+½}^∞ f` (both valid since `f` is convex and decreasing). The
/// midpoint is used once the bracket is below `1e-10` of the total.
pub fn interference_series(alpha: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 2.0) {
        return Err(Error::Divergent(alpha));
    }
    let e = alpha - 2.0;
    let f = |i: f64| i.powf(1.0 - alpha);
    let tail_from = |x: f64| x.powf(-e) / e;
    let mut acc = KahanSum::new();
    let mut n = 0u64;
    let mut next = 16u64;
    loop {
        while n < next {
            n += 1;
            acc.add(f(n as f64));
        }
        let nf = n as f64;
        let lo = tail_from(nf) - f(nf) / 2.0;
        let hi = tail_from(nf + 0.5);
        let total = acc.value() + 0.5 * (lo + hi);
        if (hi - lo) / 2.0 <= 1e-10 * total {
            return Ok(total);
        }
        if n >= 1 << 34 {
            return Err(Error::Numeric(format!("interference series for alpha = {alpha} did not settle")));
        }
        next = n * 2;
    }
}

/// Upper bound on co-channel interference at any in-cluster receiver when
/// each co-channel cluster hosts at most one transmitter of power
/// `≤ nu_upp`: `8·ν_upp·χ·I_c / (d(K+1))^α`.
pub fn interference_upper_bound(d: f64, cfg: &PhyConfig, nu_upp: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(invalid("d", "cluster side must be > 0"));
    }
    let ic = interference_series(cfg.alpha)?;
    Ok(8.0 * nu_upp * cfg.chi * ic / (d * (cfg.reuse_k + 1) as f64).powf(cfg.alpha))
}

/// Guaranteed SINR `ϑ` of any in-cluster link under one-transmitter-per-
/// cluster reuse scheduling. The signal term uses the capped gain at the
/// cluster diagonal, which coincides with `χ/(√2·d)^α` whenever the cap is
/// inactive there.
pub fn sinr_floor_prop1(d: f64, cfg: &PhyConfig, nu_low: f64, nu_upp: f64) -> Result<f64> {
    if !(nu_low > 0.0 && nu_low <= nu_upp && nu_upp <= cfg.p_max) {
        return Err(invalid("nu", "need 0 < nu_low <= nu_upp <= p_max"));
    }
    let signal = nu_low * path_gain(std::f64::consts::SQRT_2 * d, cfg);
    let noise = cfg.subchannel_bandwidth() * cfg.n0;
    Ok(signal / (noise + interference_upper_bound(d, cfg, nu_upp)?))
}

/// Noise-free limit of the floor, `ν_low/(8·ν_upp·I_c)·((K+1)/√2)^α`.
pub fn sinr_floor_noise_free(cfg: &PhyConfig, nu_low: f64, nu_upp: f64) -> Result<f64> {
    let ic = interference_series(cfg.alpha)?;
    Ok(nu_low / (8.0 * nu_upp * ic) * ((cfg.reuse_k + 1) as f64 / std::f64::consts::SQRT_2).powf(cfg.alpha))
}

/// `ln(1 + x^α) ≤ α·x` for `x > 0`, `α ≥ 1`.
pub fn lemma5_holds(x: f64, alpha: f64) -> bool {
    // x^α computed in log space so huge arguments stay finite.
    let lhs = if alpha * x.ln() > 30.0 {
        alpha * x.ln() + (-alpha * x.ln()).exp().ln_1p()
    } else {
        x.powf(alpha).ln_1p()
    };
    lhs <= alpha * x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit_cfg() -> PhyConfig {
        PhyConfig {
            chi: 1.0,
            n0: 1.0,
            ..PhyConfig::default()
        }
    }

    #[test]
    fn path_gain_examples() {
        let cfg = unit_cfg();
        assert_eq!(path_gain(1.0, &cfg), 1.0);
        assert_eq!(path_gain(0.0, &cfg), 1.0);
        assert_eq!(path_gain(1e-9, &cfg), 1.0);
        assert_relative_eq!(path_gain(2.0, &cfg), 1.0 / 16.0, max_relative = 1e-15);
        let g = cfg.gain_fn();
        assert_relative_eq!(g.from_d2(4.0), 1.0 / 16.0, max_relative = 1e-15);
        let odd = PhyConfig { alpha: 3.3, ..unit_cfg() };
        assert_relative_eq!(odd.gain_fn().from_d2(4.0), path_gain(2.0, &odd), max_relative = 1e-14);
    }

    #[test]
    fn rate_examples() {
        let cfg = unit_cfg();
        // P·l/(B_u·N₀) = 1 → rate = B_u
        assert_relative_eq!(link_rate(0.5, 1.0, &[], 0.5, &cfg), 0.5, max_relative = 1e-15);
        assert_eq!(link_rate(0.0, 1.0, &[(1.0, 0.1)], 0.5, &cfg), 0.0);
        let capped = PhyConfig { sinr_ceiling: Some(1.0), ..unit_cfg() };
        assert_relative_eq!(link_rate(100.0, 1.0, &[], 1.0, &capped), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn mirror_symmetric_links_have_equal_sinr() {
        let cfg = PhyConfig::default();
        let pos = vec![
            Point::new(0.1, 0.5),
            Point::new(0.2, 0.5),
            Point::new(0.9, 0.5),
            Point::new(0.8, 0.5),
        ];
        let mut set = ActiveSet::new();
        set.push(Activation { tx: 0, rx: 1, power: 1.0, subchannel: 3 });
        set.push(Activation { tx: 2, rx: 3, power: 1.0, subchannel: 3 });
        let s = set.sinrs(&pos, &cfg, cfg.subchannel_bandwidth());
        assert_relative_eq!(s[0], s[1], max_relative = 1e-12);
        // other sub-channel removes the interference
        set.activations[1].subchannel = 4;
        let t = set.sinrs(&pos, &cfg, cfg.subchannel_bandwidth());
        assert!(t[0] > s[0]);
    }

    #[test]
    fn series_matches_zeta3() {
        let zeta3 = 1.202_056_903_159_594_2;
        assert_relative_eq!(interference_series(4.0).unwrap(), zeta3, max_relative = 1e-10);
        // ζ(2) at α = 3
        assert_relative_eq!(
            interference_series(3.0).unwrap(),
            std::f64::consts::PI.powi(2) / 6.0,
            max_relative = 1e-10
        );
        assert!(matches!(interference_series(2.0), Err(Error::Divergent(_))));
        assert!(interference_series(2.05).unwrap() > 20.0);
    }

    #[test]
    fn interference_bound_example() {
        let cfg = PhyConfig { chi: 1.0, ..PhyConfig::default() };
        let b = interference_upper_bound(0.1, &cfg, 1.0).unwrap();
        assert_relative_eq!(b, 6010.284515797971, max_relative = 1e-9);
        let k2 = PhyConfig { reuse_k: 2, ..cfg.clone() };
        assert!(interference_upper_bound(0.1, &k2, 1.0).unwrap() < b);
    }

    #[test]
    fn floor_properties() {
        let cfg = PhyConfig::default();
        let f1 = sinr_floor_prop1(0.05, &cfg, 1.0, 1.0).unwrap();
        let f2 = sinr_floor_prop1(0.05, &PhyConfig { reuse_k: 2, ..cfg.clone() }, 1.0, 1.0).unwrap();
        assert!(f2 > f1);
        let quiet = PhyConfig { n0: 1e-40, ..cfg.clone() };
        let limit = sinr_floor_noise_free(&quiet, 1.0, 1.0).unwrap();
        assert_relative_eq!(sinr_floor_prop1(0.05, &quiet, 1.0, 1.0).unwrap(), limit, max_relative = 1e-9);
        assert_relative_eq!(limit, (2.0 / std::f64::consts::SQRT_2).powi(4) / (8.0 * 1.2020569031595942), max_relative = 1e-9);
        assert!(sinr_floor_prop1(0.05, &cfg, 2.0, 1.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(PhyConfig::default().validate().is_ok());
        assert!(PhyConfig { alpha: 2.0, ..PhyConfig::default() }.validate().is_err());
        assert!(PhyConfig { gain_cap: 1.5, ..PhyConfig::default() }.validate().is_err());
        assert!(PhyConfig { reuse_k: 0, ..PhyConfig::default() }.validate().is_err());
        assert_relative_eq!(PhyConfig::default().subchannel_bandwidth(), 1.0 / 16.0);
    }

    proptest! {
        #[test]
        fn lemma5(x in 1e-6f64..100.0, alpha in 1.0f64..8.0) {
            prop_assert!(lemma5_holds(x, alpha));
        }

        #[test]
        fn rate_monotone(p_int in 0.0f64..10.0, extra in 0.0f64..10.0, d in 0.01f64..0.5, dd in 0.0f64..0.5) {
            let cfg = PhyConfig::default();
            let bw = cfg.subchannel_bandwidth();
            let g = path_gain(d, &cfg);
            let a = link_rate(1.0, g, &[(p_int, 1e-9)], bw, &cfg);
            let b = link_rate(1.0, g, &[(p_int + extra, 1e-9)], bw, &cfg);
            prop_assert!(b <= a);
            let far = link_rate(1.0, path_gain(d + dd, &cfg), &[(p_int, 1e-9)], bw, &cfg);
            prop_assert!(far <= a);
        }

        #[test]
        fn cap_bounds_sinr(d in 0.0f64..1e-2, i in 0.0f64..1.0) {
            let cfg = PhyConfig::default();
            let bw = cfg.subchannel_bandwidth();
            let s = sinr(cfg.p_max, path_gain(d, &cfg), i, bw, &cfg);
            prop_assert!(s <= cfg.p_max * cfg.gain_cap / (bw * cfg.n0) * (1.0 + 1e-12));
        }
    }
}
