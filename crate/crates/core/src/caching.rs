//! Decentralised random caching.
//!
//! Every user fills its cache independently from the same per-file inclusion
//! probabilities `Pc(f)`. The probabilities minimising the cluster outage
//! `Σ_f P(f)·exp(-g_c·Pc(f))` are found by water-filling, and exact-`S`
//! caches with those marginals are drawn by systematic sampling.

use std::io::{Read, Write};

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::popularity::PopularityModel;
use crate::sum::KahanSum;

/// Per-file inclusion probabilities summing to the cache size.
#[derive(Debug, Clone, PartialEq)]
pub struct CachingPolicy {
    probs: Vec<f64>,
    cache_size: usize,
}

const SUM_TOLERANCE: f64 = 1e-9;

impl CachingPolicy {
    /// Validates `probs` (index `f - 1` holds `Pc(f)`). The cache size is the
    /// rounded sum, which must be integral within 1e-9. A zero cache is
    /// accepted so the no-caching baseline can be expressed.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyInput("caching probabilities"));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && (0.0..=1.0).contains(*p)))
        {
            return Err(invalid("Pc", format!("Pc({}) = {p} outside [0, 1]", i + 1)));
        }
        let total = crate::sum::sum(probs.iter().copied());
        let s = total.round();
        if (total - s).abs() > SUM_TOLERANCE {
            return Err(invalid("Pc", format!("probabilities sum to {total}, not an integer")));
        }
        Ok(Self {
            probs,
            cache_size: s as usize,
        })
    }

    /// Every file cached with probability `S / M`.
    pub fn uniform(m: usize, s: usize) -> Result<Self> {
        if s > m {
            return Err(Error::Infeasible(format!("cache size {s} exceeds library size {m}")));
        }
        Self::from_probs(vec![s as f64 / m as f64; m])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, f: usize) -> f64 {
        self.probs[f - 1]
    }

    pub fn cache_size(&self) -> usize {
        self.cache_size
    }

    pub fn library_size(&self) -> usize {
        self.probs.len()
    }

    /// Writes the `f,pc` columnar form.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["f", "pc"])?;
        for (i, p) in self.probs.iter().enumerate() {
            w.write_record([(i + 1).to_string(), format!("{p:.16e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["f", "pc"] {
            return Err(Error::Config(format!("expected header `f,pc`, found {headers:?}")));
        }
        let mut probs = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let f: usize = rec[0]
                .trim()
                .parse()
                .map_err(|e| Error::Config(format!("row {}: bad file index: {e}", row + 1)))?;
            if f != row + 1 {
                return Err(Error::Config(format!("row {}: expected f = {}, got {f}", row + 1, row + 1)));
            }
            let p: f64 = rec[1]
                .trim()
                .parse()
                .map_err(|e| Error::Config(format!("row {}: bad probability: {e}", row + 1)))?;
            probs.push(p);
        }
        Self::from_probs(probs)
    }
}

/// Water-filling minimiser of `Σ_f P(f)·exp(-g_c·Pc(f))` subject to
/// `Σ Pc = S`, `0 <= Pc <= 1`.
///
/// Stationarity gives `Pc(f) = clamp((ln(g_c·P(f)) - ν) / g_c, 0, 1)` with
/// `ν = ln μ`. The multiplier is bracketed by bisection, then pinned exactly
/// by solving the linear equation on the final active set.
pub fn optimize_policy(model: &PopularityModel, s: usize, g_c: f64) -> Result<CachingPolicy> {
    let m = model.library_size();
    if s == 0 {
        return Err(invalid("S", "cache size must be at least 1"));
    }
    if s > m {
        return Err(Error::Infeasible(format!("cache size {s} exceeds library size {m}")));
    }
    if !(g_c.is_finite() && g_c > 0.0) {
        return Err(invalid("g_c", format!("must be finite and > 0, got {g_c}")));
    }
    if s == m {
        return Ok(CachingPolicy {
            probs: vec![1.0; m],
            cache_size: s,
        });
    }

    // ln(g_c·P(f)), non-increasing in f.
    let ln_norm = model.normalizer().ln();
    let lg = g_c.ln();
    let weights: Vec<f64> = (1..=m)
        .map(|f| lg - model.gamma() * (f as f64 + model.plateau()).ln() - ln_norm)
        .collect();
    let target = s as f64;

    let fill = |nu: f64| -> f64 {
        weights
            .iter()
            .map(|&w| ((w - nu) / g_c).clamp(0.0, 1.0))
            .collect::<KahanSum>()
            .value()
    };

    // fill(hi) = 0 < S and fill(lo) = M > S.
    let mut hi = weights[0];
    let mut lo = weights[m - 1] - g_c;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if fill(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.abs().max(1.0) {
            break;
        }
    }
    let mut nu = 0.5 * (lo + hi);

    // Exact solve on the active set identified by bisection.
    let mut saturated = 0usize;
    let mut interior = KahanSum::new();
    let mut n_interior = 0usize;
    for &w in &weights {
        let x = (w - nu) / g_c;
        if x >= 1.0 {
            saturated += 1;
        } else if x > 0.0 {
            interior.add(w);
            n_interior += 1;
        }
    }
    if n_interior > 0 {
        let candidate = (interior.value() - g_c * (target - saturated as f64)) / n_interior as f64;
        let consistent = weights.iter().all(|&w| {
            let before = (w - nu) / g_c;
            let after = (w - candidate) / g_c;
            (before >= 1.0) == (after >= 1.0) && (before > 0.0) == (after > 0.0)
        });
        if consistent {
            nu = candidate;
        }
    }

    let probs: Vec<f64> = weights
        .iter()
        .map(|&w| ((w - nu) / g_c).clamp(0.0, 1.0))
        .collect();
    let total = crate::sum::sum(probs.iter().copied());
    if (total - target).abs() > SUM_TOLERANCE {
        return Err(Error::Numeric(format!(
            "water-filling sum {total} misses cache size {s}"
        )));
    }
    Ok(CachingPolicy { probs, cache_size: s })
}

/// `ln μ` of an optimised policy, read off any interior coordinate as
/// `ln(g_c·P(f)) - g_c·Pc(f)`. `None` when no coordinate is interior.
pub fn policy_log_multiplier(policy: &CachingPolicy, model: &PopularityModel, g_c: f64) -> Option<f64> {
    policy
        .probs
        .iter()
        .enumerate()
        .find(|(_, p)| **p > 0.0 && **p < 1.0)
        .map(|(i, p)| (g_c * model.pmf(i + 1).expect("index in range")).ln() - g_c * p)
}

/// `Σ_f P(f)·exp(-g_c·Pc(f))`: outage of a cluster whose occupancy is
/// Poisson with mean `g_c`.
pub fn closed_form_outage(policy: &CachingPolicy, model: &PopularityModel, g_c: f64) -> Result<f64> {
    let m = model.library_size();
    if policy.library_size() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: policy.library_size(),
        });
    }
    if !(g_c.is_finite() && g_c >= 0.0) {
        return Err(invalid("g_c", format!("must be finite and >= 0, got {g_c}")));
    }
    let p = policy
        .probs
        .iter()
        .enumerate()
        .map(|(i, pc)| model.pmf(i + 1).expect("index in range") * (-g_c * pc).exp())
        .collect::<KahanSum>()
        .value();
    Ok(p.clamp(0.0, 1.0))
}

/// Files held by one user. In split mode the first `split_at` entries form
/// the slot-1 subspace and the rest the slot-2 subspace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheSet {
    files: Vec<u32>,
    split_at: Option<usize>,
}

impl CacheSet {
    pub fn single(files: Vec<u32>) -> Self {
        Self {
            files,
            split_at: None,
        }
    }

    pub fn split(slot1: Vec<u32>, slot2: Vec<u32>) -> Self {
        let split_at = slot1.len();
        let mut files = slot1;
        files.extend(slot2);
        Self {
            files,
            split_at: Some(split_at),
        }
    }

    pub fn files(&self) -> &[u32] {
        &self.files
    }

    pub fn is_split(&self) -> bool {
        self.split_at.is_some()
    }

    /// Subspace for a delivery slot (1 or 2); the whole cache when unsplit.
    pub fn subspace(&self, slot: u8) -> &[u32] {
        match (self.split_at, slot) {
            (None, _) => &self.files,
            (Some(k), 1) => &self.files[..k],
            (Some(k), _) => &self.files[k..],
        }
    }

    pub fn contains(&self, f: u32) -> bool {
        self.files.contains(&f)
    }
}

/// Precomputed systematic sampler for one policy.
///
/// Files with `Pc = 1` are always included. The remaining probabilities are
/// laid end to end on a segment of length `S'`; one uniform offset `u` picks
/// the files whose intervals contain `u, u+1, …, u+S'-1`.
#[derive(Debug, Clone)]
pub struct CachePlacer {
    forced: Vec<u32>,
    ids: Vec<u32>,
    cum: Vec<f64>,
    draws: usize,
}

impl CachePlacer {
    pub fn new(policy: &CachingPolicy) -> Self {
        let mut forced = Vec::new();
        let mut ids = Vec::new();
        let mut cum = Vec::new();
        let mut acc = KahanSum::new();
        for (i, &p) in policy.probs.iter().enumerate() {
            let f = (i + 1) as u32;
            if p >= 1.0 {
                forced.push(f);
            } else if p > 0.0 {
                acc.add(p);
                ids.push(f);
                cum.push(acc.value());
            }
        }
        let draws = policy.cache_size.saturating_sub(forced.len());
        if let Some(last) = cum.last().copied() {
            if draws > 0 {
                let scale = draws as f64 / last;
                for c in &mut cum {
                    *c *= scale;
                }
                *cum.last_mut().unwrap() = draws as f64;
            }
        }
        Self {
            forced,
            ids,
            cum,
            draws,
        }
    }

    pub fn cache_size(&self) -> usize {
        self.forced.len() + self.draws
    }

    /// Appends one cache draw (sorted, distinct) to `out`.
    pub fn place_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<u32>) {
        let start = out.len();
        out.extend_from_slice(&self.forced);
        if self.draws > 0 {
            let u: f64 = rng.random();
            let mut prev: Option<usize> = None;
            for j in 0..self.draws {
                let point = u + j as f64;
                let mut idx = self.cum.partition_point(|&c| c <= point).min(self.ids.len() - 1);
                // Only reachable through rounding when an interval is within
                // an ulp of length 1.
                if let Some(p) = prev {
                    if idx <= p {
                        idx = p + 1;
                    }
                }
                prev = Some(idx);
                out.push(self.ids[idx]);
            }
        }
        out[start..].sort_unstable();
    }

    pub fn place<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u32> {
        let mut v = Vec::with_capacity(self.cache_size());
        self.place_into(rng, &mut v);
        v
    }
}

/// Draws one exact-`S` cache whose inclusion marginals equal `Pc`.
pub fn place_caches<R: Rng + ?Sized>(policy: &CachingPolicy, rng: &mut R) -> CacheSet {
    CacheSet::single(CachePlacer::new(policy).place(rng))
}

/// Two half-size policies for the double time-slot scheme.
#[derive(Debug, Clone)]
pub struct SplitCachingPolicy {
    pub policy_slot1: CachingPolicy,
    pub policy_slot2: CachingPolicy,
    pub gc1: f64,
    pub gc2: f64,
}

impl SplitCachingPolicy {
    pub fn placers(&self) -> (CachePlacer, CachePlacer) {
        (CachePlacer::new(&self.policy_slot1), CachePlacer::new(&self.policy_slot2))
    }
}

/// Optimises each half of the cache (`S/2` files) for its own cluster
/// occupancy. `S` must be even and `gc2 <= gc1`.
pub fn build_split_policy(model: &PopularityModel, s: usize, gc1: f64, gc2: f64) -> Result<SplitCachingPolicy> {
    if !s.is_multiple_of(2) {
        return Err(invalid(
            "S",
            format!("split caching needs an even cache size, got {s}; round to {} or {}", s - 1, s + 1),
        ));
    }
    if !(gc1 > 0.0 && gc2 > 0.0) {
        return Err(invalid("g_c", "slot occupancies must be positive"));
    }
    if gc2 > gc1 {
        return Err(invalid("gc2", format!("slot-2 occupancy {gc2} exceeds slot-1 occupancy {gc1}")));
    }
    let half = s / 2;
    let policy_slot1 = optimize_policy(model, half, gc1)?;
    let policy_slot2 = if gc2 == gc1 {
        policy_slot1.clone()
    } else {
        optimize_policy(model, half, gc2)?
    };
    Ok(SplitCachingPolicy {
        policy_slot1,
        policy_slot2,
        gc1,
        gc2,
    })
}

/// One split-mode cache draw.
pub fn place_split_caches<R: Rng + ?Sized>(policy: &SplitCachingPolicy, rng: &mut R) -> CacheSet {
    let (p1, p2) = policy.placers();
    let a = p1.place(rng);
    let b = p2.place(rng);
    CacheSet::split(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_cache_saturates() {
        let model = PopularityModel::new(6, 0.7, 1.0).unwrap();
        let p = optimize_policy(&model, 6, 3.0).unwrap();
        assert!(p.probs().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn uniform_popularity_gives_uniform_policy() {
        let model = PopularityModel::new(40, 0.0, 0.0).unwrap();
        for g in [0.5, 7.0, 300.0] {
            let p = optimize_policy(&model, 3, g).unwrap();
            for &x in p.probs() {
                assert_relative_eq!(x, 3.0 / 40.0, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn infeasible_and_invalid() {
        let model = PopularityModel::new(4, 0.5, 0.0).unwrap();
        assert!(matches!(optimize_policy(&model, 5, 1.0), Err(Error::Infeasible(_))));
        assert!(optimize_policy(&model, 0, 1.0).is_err());
        assert!(optimize_policy(&model, 2, 0.0).is_err());
    }

    /// Projected grid search over `Σ Pc = 1` for `M = 4` at step 1e-3.
    fn grid_oracle(pr: &[f64], g: f64) -> f64 {
        let steps = 1000;
        let obj = |pc: [f64; 4]| -> f64 { pr.iter().zip(pc).map(|(p, c)| p * (-g * c).exp()).sum() };
        let mut best = f64::INFINITY;
        for a in 0..=steps {
            for b in 0..=(steps - a) {
                for c in 0..=(steps - a - b) {
                    let d = steps - a - b - c;
                    let v = obj([a, b, c, d].map(|k| k as f64 / steps as f64));
                    best = best.min(v);
                }
            }
        }
        best
    }

    #[test]
    fn matches_grid_search_oracle() {
        let model = PopularityModel::new(4, 0.8, 0.0).unwrap();
        let pr = model.pmf_vec();
        let oracle = grid_oracle(&pr, 10.0);
        let policy = optimize_policy(&model, 1, 10.0).unwrap();
        let value = closed_form_outage(&policy, &model, 10.0).unwrap();
        assert!(value <= oracle + 1e-12, "{value} vs grid {oracle}");
        assert!((value - oracle).abs() <= 1e-3);
    }

    #[test]
    fn closed_form_special_cases() {
        let model = PopularityModel::new(30, 0.9, 4.0).unwrap();
        let rho = 2.5;
        let s = 3;
        let g = rho * 30.0 / s as f64;
        let uni = CachingPolicy::uniform(30, s).unwrap();
        assert_relative_eq!(closed_form_outage(&uni, &model, g).unwrap(), (-rho).exp(), max_relative = 1e-12);

        let none = CachingPolicy::from_probs(vec![0.0; 30]).unwrap();
        assert_eq!(none.cache_size(), 0);
        assert_relative_eq!(closed_form_outage(&none, &model, g).unwrap(), 1.0, max_relative = 1e-12);

        let short = CachingPolicy::uniform(10, 1).unwrap();
        assert!(matches!(
            closed_form_outage(&short, &model, g),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn closed_form_matches_cluster_monte_carlo() {
        use rand_distr::{Distribution, Poisson};
        let model = PopularityModel::new(50, 0.6, 5.0).unwrap();
        let g = 25.0;
        let policy = optimize_policy(&model, 2, g).unwrap();
        let exact = closed_form_outage(&policy, &model, g).unwrap();

        let placer = CachePlacer::new(&policy);
        let poisson = Poisson::new(g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let draws = 100_000;
        let mut outages = 0u64;
        let mut cache = Vec::new();
        for _ in 0..draws {
            let f = model.sample_request(&mut rng) as u32;
            let n = poisson.sample(&mut rng) as usize;
            let mut hit = false;
            for _ in 0..n {
                cache.clear();
                placer.place_into(&mut rng, &mut cache);
                if cache.binary_search(&f).is_ok() {
                    hit = true;
                }
            }
            outages += u64::from(!hit);
        }
        let p_hat = outages as f64 / draws as f64;
        let se = (p_hat * (1.0 - p_hat) / draws as f64).sqrt();
        assert!((p_hat - exact).abs() <= 3.0 * se, "mc {p_hat} vs closed {exact} (se {se})");
    }

    #[test]
    fn forced_files_always_placed() {
        let policy = CachingPolicy::from_probs(vec![1.0, 0.5, 0.25, 0.25, 0.0]).unwrap();
        let placer = CachePlacer::new(&policy);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5000 {
            let c = placer.place(&mut rng);
            assert_eq!(c.len(), 2);
            assert_eq!(c[0], 1);
            assert!(!c.contains(&5));
        }
    }

    #[test]
    fn placement_marginals() {
        let model = PopularityModel::new(20, 0.9, 1.0).unwrap();
        let policy = optimize_policy(&model, 3, 6.0).unwrap();
        let placer = CachePlacer::new(&policy);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let draws = 100_000;
        let mut counts = [0u64; 20];
        for _ in 0..draws {
            let c = placer.place(&mut rng);
            assert_eq!(c.len(), 3);
            assert!(c.windows(2).all(|w| w[0] < w[1]));
            for f in c {
                counts[f as usize - 1] += 1;
            }
        }
        for (i, &k) in counts.iter().enumerate() {
            let p = policy.probs()[i];
            let sd = (draws as f64 * p * (1.0 - p)).sqrt().max(1e-9);
            assert!((k as f64 - draws as f64 * p).abs() <= 4.0 * sd, "file {} freq {k} vs {p}", i + 1);
        }
    }

    #[test]
    fn split_policy_examples() {
        let model = PopularityModel::new(100, 0.6, 10.0).unwrap();
        let same = build_split_policy(&model, 4, 20.0, 20.0).unwrap();
        assert_eq!(same.policy_slot1, same.policy_slot2);

        let two = build_split_policy(&model, 2, 20.0, 5.0).unwrap();
        assert_eq!(two.policy_slot1.cache_size(), 1);
        assert_eq!(two.policy_slot2.cache_size(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = place_split_caches(&two, &mut rng);
        assert_eq!(c.subspace(1).len(), 1);
        assert_eq!(c.subspace(2).len(), 1);

        let skew = build_split_policy(&model, 4, 50.0, 5.0).unwrap();
        assert!(skew.policy_slot2.prob(1) >= skew.policy_slot1.prob(1));

        assert!(build_split_policy(&model, 3, 20.0, 5.0).is_err());
        assert!(build_split_policy(&model, 4, 5.0, 20.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let model = PopularityModel::new(12, 1.1, 2.0).unwrap();
        let policy = optimize_policy(&model, 2, 9.0).unwrap();
        let mut buf = Vec::new();
        policy.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("f,pc\n"));
        let back = CachingPolicy::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, policy);
        assert!(CachingPolicy::read_csv("x,y\n1,0.5\n".as_bytes()).is_err());
    }

    // Compared in log space: the raw gradient underflows for large g_c.
    fn kkt_holds(model: &PopularityModel, policy: &CachingPolicy, g: f64) -> bool {
        let pr = model.pmf_vec();
        let log_grad = |pc: f64, p: f64| (g * p).ln() - g * pc;
        let Some(log_mu) = policy_log_multiplier(policy, model, g) else {
            return true;
        };
        let tol = 1e-6;
        policy.probs().iter().zip(&pr).all(|(&pc, &p)| {
            let lg = log_grad(pc, p);
            if pc <= 0.0 {
                lg <= log_mu + tol
            } else if pc >= 1.0 {
                lg >= log_mu - tol
            } else {
                (lg - log_mu).abs() <= tol
            }
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn optimality_properties(m in 2usize..300, s_frac in 0.0f64..1.0, gamma in 0.0f64..2.0,
                                 q in 0.0f64..50.0, g in 0.1f64..2000.0) {
            let s = 1 + ((m - 1) as f64 * s_frac) as usize;
            let model = PopularityModel::new(m, gamma, q).unwrap();
            let policy = optimize_policy(&model, s, g).unwrap();
            let total: f64 = crate::sum::sum(policy.probs().iter().copied());
            prop_assert!((total - s as f64).abs() <= 1e-9);
            prop_assert!(kkt_holds(&model, &policy, g));

            let opt = closed_form_outage(&policy, &model, g).unwrap();
            let uni = closed_form_outage(&CachingPolicy::uniform(m, s).unwrap(), &model, g).unwrap();
            prop_assert!(opt <= uni + 1e-12);

            let more = optimize_policy(&model, s, g * 1.5).unwrap();
            let opt_more = closed_form_outage(&more, &model, g * 1.5).unwrap();
            prop_assert!(opt_more <= opt + 1e-12);
        }

        #[test]
        fn placement_always_exact_size(seed in any::<u64>(), m in 2usize..80, s_frac in 0.0f64..1.0, g in 0.5f64..100.0) {
            let s = 1 + ((m - 1) as f64 * s_frac) as usize;
            let model = PopularityModel::new(m, 0.9, 3.0).unwrap();
            let policy = optimize_policy(&model, s, g).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = place_caches(&policy, &mut rng);
            prop_assert_eq!(c.files().len(), s);
            prop_assert!(c.files().windows(2).all(|w| w[0] < w[1]));
            prop_assert!(c.files().iter().all(|&f| f >= 1 && f as usize <= m));
        }
    }
}
