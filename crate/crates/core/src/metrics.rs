//! Throughput, outage and transport-capacity extraction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phy::PhyConfig;
use crate::schemes::{Schedule, SchemeResult};
use crate::sum::KahanSum;

/// Monte Carlo summary of one configuration point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputOutageEstimate {
    /// `min_u T̄_u`, the worst index-wise mean throughput.
    pub t_min_avg: f64,
    /// Standard error of the minimising index's mean.
    pub t_stderr: f64,
    /// Throughput pooled over users and realizations.
    pub t_mean: f64,
    pub t_mean_stderr: f64,
    pub p_o_hat: f64,
    pub p_o_stderr: f64,
    pub n_realizations: usize,
    pub n_users: usize,
    /// Coefficient of variation of the index-wise means.
    pub index_cv: f64,
    /// CV those means would show from sampling noise alone.
    pub index_noise_cv: f64,
}

/// Streaming form of [`estimate`]: per-index first and second moments plus
/// per-realization aggregates, so memory stays `O(N + R)`.
#[derive(Debug, Clone)]
pub struct EstimateAccumulator {
    t_prime: f64,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
    outage: Vec<f64>,
    mean_t: Vec<f64>,
}

impl EstimateAccumulator {
    pub fn new(n_users: usize, t_prime: f64) -> Self {
        Self {
            t_prime,
            sum: vec![0.0; n_users],
            sumsq: vec![0.0; n_users],
            outage: Vec::new(),
            mean_t: Vec::new(),
        }
    }

    pub fn add(&mut self, r: &SchemeResult) -> Result<()> {
        if r.num_users() != self.sum.len() {
            return Err(Error::DimensionMismatch {
                expected: self.sum.len(),
                got: r.num_users(),
            });
        }
        for ((s, q), &b) in self.sum.iter_mut().zip(self.sumsq.iter_mut()).zip(&r.per_user_bits) {
            let t = b / self.t_prime;
            *s += t;
            *q += t * t;
        }
        self.outage.push(r.outage_fraction());
        self.mean_t.push(r.total_bits() / self.t_prime / r.num_users() as f64);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.outage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outage.is_empty()
    }

    /// Index-wise mean throughputs `T̄_u`.
    pub fn index_means(&self) -> Vec<f64> {
        let r = self.len() as f64;
        self.sum.iter().map(|s| s / r).collect()
    }

    pub fn finish(&self) -> Result<ThroughputOutageEstimate> {
        let r = self.len();
        if r == 0 {
            return Err(Error::EmptyInput("no realizations to aggregate"));
        }
        let rf = r as f64;
        let n = self.sum.len();
        let means = self.index_means();
        let var_of = |u: usize| {
            if r < 2 {
                0.0
            } else {
                ((self.sumsq[u] - self.sum[u] * self.sum[u] / rf) / (rf - 1.0)).max(0.0)
            }
        };
        let (argmin, &t_min) = means
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("at least one user");
        let (t_mean, t_mean_se) = mean_and_stderr(&self.mean_t);
        let (p_o, p_o_se) = mean_and_stderr(&self.outage);

        let grand = means.iter().copied().collect::<KahanSum>().value() / n as f64;
        let spread = if n > 1 {
            let ss: KahanSum = means.iter().map(|m| (m - grand).powi(2)).collect();
            (ss.value() / (n as f64 - 1.0)).sqrt()
        } else {
            0.0
        };
        let mean_var = (0..n).map(var_of).collect::<KahanSum>().value() / n as f64;
        let (index_cv, index_noise_cv) = if grand > 0.0 {
            (spread / grand, (mean_var / rf).sqrt() / grand)
        } else {
            (0.0, 0.0)
        };

        Ok(ThroughputOutageEstimate {
            t_min_avg: t_min,
            t_stderr: (var_of(argmin) / rf).sqrt(),
            t_mean,
            t_mean_stderr: t_mean_se,
            p_o_hat: p_o.clamp(0.0, 1.0),
            p_o_stderr: p_o_se,
            n_realizations: r,
            n_users: n,
            index_cv,
            index_noise_cv,
        })
    }
}

/// Sample mean and its standard error (zero for a single sample).
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().copied().collect::<KahanSum>().value() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: KahanSum = xs.iter().map(|x| (x - mean).powi(2)).collect();
    (mean, (ss.value() / (n - 1.0) / n).sqrt())
}

/// Aggregates scheme results over realizations.
pub fn estimate(results: &[SchemeResult], t_prime: f64) -> Result<ThroughputOutageEstimate> {
    let first = results.first().ok_or(Error::EmptyInput("no realizations to aggregate"))?;
    let mut acc = EstimateAccumulator::new(first.num_users(), t_prime);
    for r in results {
        acc.add(r)?;
    }
    acc.finish()
}

/// `C_Γ = Σ r_u·C_u` over `(distance, average rate)` pairs.
pub fn transport_capacity(links: &[(f64, f64)]) -> f64 {
    links.iter().map(|(r, c)| r * c).collect::<KahanSum>().value()
}

/// Outer-bound constant `α(3√2+1) + 2(2(√2+1))^α`.
pub fn transport_constant(alpha: f64) -> f64 {
    let s2 = std::f64::consts::SQRT_2;
    alpha * (3.0 * s2 + 1.0) + 2.0 * (2.0 * (s2 + 1.0)).powf(alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportRecord {
    pub c_gamma: f64,
    /// `B·C̄_W`.
    pub w_term: f64,
    /// `B·C̄_{Γ_R0}`.
    pub r0_term: f64,
    pub third_term: f64,
    pub r0: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Evaluates both sides of the transport-capacity outer bound on a
/// schedule. `reference_side` is `√(ρ′M/(SN))` (or `√(α₁′q/(SN))`), so that
/// `R₀ = ε₀·reference_side`. In every resource block the first maximum-power
/// link plays the role of `w`.
pub fn check_transport_bound(
    schedule: &Schedule,
    phy: &PhyConfig,
    t_prime: f64,
    reference_side: f64,
    eps0: f64,
) -> Result<TransportRecord> {
    if !(eps0 > 0.0 && reference_side > 0.0) {
        return Err(crate::error::invalid("eps0", "eps0 and the reference side must be > 0"));
    }
    let r0 = eps0 * reference_side;
    let mut lhs = KahanSum::new();
    let mut w = KahanSum::new();
    let mut short = KahanSum::new();
    for b in &schedule.blocks {
        let links = schedule.block_links(b);
        let scale = b.airtime * b.bandwidth / t_prime;
        let w_idx = links
            .iter()
            .enumerate()
            .fold(None::<(usize, f64)>, |best, (i, l)| match best {
                Some((_, p)) if p >= l.power => best,
                _ => Some((i, l.power)),
            })
            .map(|(i, _)| i);
        for (i, l) in links.iter().enumerate() {
            lhs.add(scale * l.distance * l.efficiency);
            if Some(i) == w_idx {
                let snr = phy.p_max * l.gain / (phy.n0 * b.bandwidth);
                w.add(scale * l.distance * snr.ln_1p() / std::f64::consts::LN_2);
            } else if l.distance < r0 {
                short.add(scale * l.distance * l.efficiency);
            }
        }
    }
    let third = phy.bandwidth * std::f64::consts::LOG2_E / r0 * transport_constant(phy.alpha);
    let rhs = w.value() + short.value() + third;
    let c_gamma = lhs.value();
    Ok(TransportRecord {
        c_gamma,
        w_term: w.value(),
        r0_term: short.value(),
        third_term: third,
        r0,
        rhs,
        slack: rhs - c_gamma,
        holds: c_gamma <= rhs,
    })
}
