//! Closed-form cluster outage, the `C₁/C₂` fixed point, predicted scaling
//! exponents and log-log slope fitting.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::caching::CachingPolicy;
use crate::error::{invalid, Error, Result};
use crate::popularity::PopularityModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointConstants {
    pub c1: f64,
    pub c2: f64,
    pub gc_prime: f64,
    pub residual: f64,
}

/// `x - ln(1+x)` without cancellation for small `x`.
fn x_minus_ln1p(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        // x²/2 - x³/3 + x⁴/4 - ...
        let mut term = x * x;
        let mut acc = 0.0;
        for k in 2..14 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * term / k as f64;
            term *= x;
        }
        acc
    } else {
        x - x.ln_1p()
    }
}

/// `C₁ - 1 - C₂·ln(1 + C₁/C₂)`, rewritten as `C₂·(x - ln(1+x)) - 1` with
/// `x = C₁/C₂` so large `C₂` does not cancel catastrophically.
pub fn fixed_point_residual(c1: f64, c2: f64) -> f64 {
    if c2 == 0.0 {
        return c1 - 1.0;
    }
    c2 * x_minus_ln1p(c1 / c2) - 1.0
}

/// Solves `C₁ = 1 + C₂·ln(1 + C₁/C₂)` with `C₂ = qγ/(S·g_c′)`.
///
/// The residual is increasing in `C₁` (derivative `C₁/(C₁+C₂)`), so Newton
/// steps are kept inside a shrinking bracket and replaced by bisection
/// whenever they leave it.
pub fn solve_c1_c2(gc_prime: f64, q: f64, s: usize, gamma: f64) -> Result<FixedPointConstants> {
    if !(gc_prime.is_finite() && gc_prime > 0.0) {
        return Err(invalid("gc_prime", "must be > 0"));
    }
    if s == 0 || !(q >= 0.0) || !(gamma >= 0.0) {
        return Err(invalid("q/S/gamma", "need q >= 0, S >= 1, gamma >= 0"));
    }
    let c2 = q * gamma / (s as f64 * gc_prime);
    let c1 = solve_c1(c2)?;
    Ok(FixedPointConstants {
        c1,
        c2,
        gc_prime,
        residual: fixed_point_residual(c1, c2),
    })
}

/// `C₁` for a given `C₂ ≥ 0`.
pub fn solve_c1(c2: f64) -> Result<f64> {
    if !(c2.is_finite() && c2 >= 0.0) {
        return Err(invalid("C2", "must be finite and >= 0"));
    }
    if c2 == 0.0 {
        return Ok(1.0);
    }
    let g = |c1: f64| fixed_point_residual(c1, c2);
    let mut lo = 1.0;
    let mut hi = 2.0 + 2.0 * (2.0 * c2).sqrt();
    while g(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    let mut x = 1.0 + (2.0 * c2).sqrt();
    if !(x > lo && x < hi) {
        x = 0.5 * (lo + hi);
    }
    for _ in 0..10_000 {
        let fx = g(x);
        if fx.abs() <= 1e-13 * x.max(1.0) {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let step = fx * (x + c2) / x;
        let newton = x - step;
        x = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= f64::EPSILON * hi {
            return Ok(x);
        }
    }
    Err(Error::Numeric(format!("C1 fixed point did not converge for C2 = {c2}")))
}

/// Asymptotic constants for `ε′α₁′/γ → 0`: `(C₁, C₂, C₁/C₂)`.
pub fn lemma6(eps_alpha_over_gamma: f64) -> (f64, f64, f64) {
    let e = eps_alpha_over_gamma;
    let c1 = std::f64::consts::SQRT_2 / e.sqrt();
    (c1, 1.0 / e, std::f64::consts::SQRT_2 * e.sqrt())
}

fn settle_probability(p: f64) -> Result<f64> {
    const TOL: f64 = 1e-9;
    if !p.is_finite() || !(-TOL..=1.0 + TOL).contains(&p) {
        return Err(Error::Numeric(format!(
            "closed-form outage {p} is not a probability; parameters are outside the formula's regime"
        )));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Minimal outage of a small cluster with mean occupancy `g_c′`, heavy-tailed
/// popularity (`γ < 1`). The `(C₂/(C₁+C₂))^{γC₂/C₁}` factor is evaluated in
/// log space; both occupancy symbols of the printed form are read as `g_c′`.
pub fn po_sec_gamma_lt1(gc_prime: f64, model: &PopularityModel, s: usize) -> Result<f64> {
    let gamma = model.gamma();
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid("gamma", "this form needs 0 < gamma < 1"));
    }
    let fp = solve_c1_c2(gc_prime, model.plateau(), s, gamma)?;
    let (c1, c2) = (fp.c1, fp.c2);
    if c2 > 1.0 {
        log::warn!("C2 = {c2:.3} > 1: q is large against the slot-2 occupancy, closed form may be loose");
    }
    let m = model.library_size() as f64;
    let e = 1.0 - gamma;
    let scale = s as f64 * gc_prime / (gamma * m);
    let a = c1 * scale;
    let b = c2 * scale;
    let den = (1.0 + b).powf(e) - b.powf(e);
    let log_ratio_pow = if c2 == 0.0 { 0.0 } else { -gamma * (c2 / c1) * (c1 / c2).ln_1p() };
    let t1 = e * (-gamma * (1.0 / c1 - 1.0)).exp() * a.powf(e) * (-gamma * (c2 / c1).ln_1p() + log_ratio_pow).exp()
        / den;
    let t2 = a.powf(e) * ((1.0 + c2 / c1).powf(e) - (c2 / c1).powf(e)) / den;
    settle_probability(1.0 + t1 - t2)
}

/// Minimal outage of a small cluster with mean occupancy `g_c′`,
/// light-tailed popularity (`γ > 1`).
pub fn po_sec_gamma_gt1(gc_prime: f64, model: &PopularityModel, s: usize) -> Result<f64> {
    let gamma = model.gamma();
    if !(gamma > 1.0) {
        return Err(invalid("gamma", "this form needs gamma > 1"));
    }
    if !(model.plateau() > 0.0) {
        return Err(invalid("q", "this form needs q > 0"));
    }
    if gc_prime >= model.plateau() {
        log::warn!("g_c' = {gc_prime} is not small against q = {}", model.plateau());
    }
    let fp = solve_c1_c2(gc_prime, model.plateau(), s, gamma)?;
    let (c1, c2) = (fp.c1, fp.c2);
    let r = c2 / c1;
    let x = c1 / c2;
    let t1 = (gamma - 1.0)
        * (-gamma * (1.0 / c1 - 1.0) - gamma * r.ln_1p() - gamma * r * x.ln_1p() + (gamma - 1.0) * r.ln()).exp();
    // ((C₁/C₂)^{γ-1} - (C₁/(C₁+C₂))^{γ-1})·(C₂/C₁)^{γ-1} = 1 - (1 + C₁/C₂)^{1-γ}
    let t2 = -(-(gamma - 1.0) * x.ln_1p()).exp_m1();
    settle_probability(1.0 + t1 - t2)
}

/// Cluster-level Monte Carlo of `Σ_f P(f)·exp(-g·Pc(f))`: Poisson(`g`)
/// occupants, each caching the requested file independently with
/// probability `Pc(f)`. Returns the outage estimate and its standard error.
pub fn cluster_outage_monte_carlo<R: Rng + ?Sized>(
    policy: &CachingPolicy,
    model: &PopularityModel,
    g: f64,
    draws: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if policy.library_size() != model.library_size() {
        return Err(Error::DimensionMismatch {
            expected: model.library_size(),
            got: policy.library_size(),
        });
    }
    if draws == 0 {
        return Err(Error::EmptyInput("need at least one draw"));
    }
    let occupancy = Poisson::new(g).map_err(|e| invalid("g", e.to_string()))?;
    let mut misses = 0usize;
    for _ in 0..draws {
        let f = model.sample_request(rng);
        let n = occupancy.sample(rng) as u64;
        let pc = policy.prob(f);
        let holders = if n == 0 || pc <= 0.0 {
            0
        } else {
            Binomial::new(n, pc.min(1.0))
                .map_err(|e| Error::Numeric(e.to_string()))?
                .sample(rng)
        };
        if holders == 0 {
            misses += 1;
        }
    }
    let p = misses as f64 / draws as f64;
    Ok((p, (p * (1.0 - p) / draws as f64).sqrt()))
}

/// Which throughput law an exponent refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentKind {
    Scenario1Lt1,
    Scenario2Lt1,
    Scenario1Gt1,
    Scenario2Gt1,
    ZipfGt1,
}

/// Predicted throughput exponent in the driving ratio (`S/M` or `S/q`).
pub fn predicted_exponent(kind: ExponentKind, gamma: f64) -> Result<f64> {
    let lt1 = (0.0..1.0).contains(&gamma);
    let gt1 = gamma > 1.0;
    match kind {
        ExponentKind::Scenario1Lt1 if lt1 => Ok(1.0),
        ExponentKind::Scenario2Lt1 if lt1 => Ok((1.0 - gamma) / (2.0 - gamma)),
        ExponentKind::Scenario1Gt1 if gt1 => Ok(1.0),
        ExponentKind::Scenario2Gt1 if gt1 => Ok(0.5),
        ExponentKind::ZipfGt1 if gt1 => Ok(0.0),
        _ => Err(invalid("gamma", format!("gamma = {gamma} is inconsistent with {kind:?}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
    /// Present from three points on.
    pub slope_stderr: Option<f64>,
}

/// Ordinary least squares of `ln y` on `ln x`.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 2 {
        return Err(invalid("points", "need at least two points"));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::Domain {
            index: 0,
            max: points.len(),
        });
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("points", "all x values coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - ssr / syy).clamp(0.0, 1.0) };
    let slope_stderr = (points.len() >= 3).then(|| (ssr / (n - 2.0) / sxx).sqrt());
    Ok(ScalingFit {
        slope,
        intercept,
        r_squared,
        n_points: points.len(),
        slope_stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::caching::optimize_policy;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fixed_point_trivial_and_lemma6() {
        let fp = solve_c1_c2(10.0, 0.0, 2, 0.6).unwrap();
        assert_eq!((fp.c1, fp.c2), (1.0, 0.0));

        let e = 1e-6;
        let c1 = solve_c1(1.0 / e).unwrap();
        let (l1, l2, lr) = lemma6(e);
        assert_relative_eq!(l2, 1e6, max_relative = 1e-12);
        assert!((c1 / l1 - 1.0).abs() < 0.01);
        assert!((c1 * e / lr - 1.0).abs() < 0.01);
    }

    #[test]
    fn lemma6_ratio_converges_monotonically() {
        let errs: Vec<f64> = [1e-4, 1e-6, 1e-8]
            .iter()
            .map(|&e| (solve_c1(1.0 / e).unwrap() / lemma6(e).0 - 1.0).abs())
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    proptest! {
        #[test]
        fn residual_contract(gc in 1e-3f64..1e6, q in 0.0f64..1e5, s in 1usize..50, gamma in 0.0f64..3.0) {
            let fp = solve_c1_c2(gc, q, s, gamma).unwrap();
            prop_assert!(fp.residual.abs() <= 1e-12 * fp.c1.max(1.0));
            prop_assert!(fp.c1 >= 1.0);
        }

        #[test]
        fn c1_increasing_in_c2(a in 0.0f64..1e6, b in 0.0f64..1e6) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(solve_c1(lo).unwrap() <= solve_c1(hi).unwrap() * (1.0 + 1e-14));
        }
    }

    #[test]
    fn eq55_range_and_hit_scaling() {
        let model = PopularityModel::new(1_000_000, 0.6, 2.0).unwrap();
        for k in 4..=10 {
            let er = 2f64.powi(-k);
            let p = po_sec_gamma_lt1(er * 1e6 / 2.0, &model, 2).unwrap();
            assert!((0.0..=1.0).contains(&p));
        }
        // doubling ε′ρ′ multiplies p_h by ≈ 2^{1-γ} deep in the regime
        let ph = |er: f64| 1.0 - po_sec_gamma_lt1(er * 1e6 / 2.0, &model, 2).unwrap();
        let ratio = ph(2f64.powi(-9)) / ph(2f64.powi(-10));
        assert!((ratio / 2f64.powf(0.4) - 1.0).abs() < 0.05, "{ratio}");
        assert!(po_sec_gamma_lt1(10.0, &PopularityModel::new(100, 1.2, 1.0).unwrap(), 2).is_err());
    }

    #[test]
    fn eq55_matches_cluster_monte_carlo() {
        let model = PopularityModel::new(1_000_000, 0.6, 2.0).unwrap();
        let gc = 2f64.powi(-6) * 1e6 / 2.0;
        let policy = optimize_policy(&model, 2, gc).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let (mc, se) = cluster_outage_monte_carlo(&policy, &model, gc, 100_000, &mut rng).unwrap();
        let cf = po_sec_gamma_lt1(gc, &model, 2).unwrap();
        assert!((mc - cf).abs() <= 3.0 * se, "{mc} vs {cf} (se {se})");
    }

    #[test]
    fn eq70_range_and_linear_hit_scaling() {
        let gamma = 1.5;
        let s = 2;
        let q = 1000.0;
        let model = PopularityModel::new(50_000, gamma, q).unwrap();
        let ph = |ea: f64| 1.0 - po_sec_gamma_gt1(ea * q / s as f64, &model, s).unwrap();
        for ea in [1e-2, 1e-3, 1e-4, 1e-5, 1e-6] {
            let p = ph(ea);
            assert!(p > 0.0 && p < 1.0);
        }
        let ratio = ph(2e-6) / ph(1e-6);
        assert!((ratio / 2.0 - 1.0).abs() < 0.05, "{ratio}");
        // leading constant settles: each point within 10% of the deepest one
        let deep = ph(1e-6) / (1e-6 / gamma);
        for ea in [1e-3, 1e-4, 1e-5] {
            let c = ph(ea) / (ea / gamma);
            assert!((c / deep - 1.0).abs() < 0.10, "{ea}: {c} vs {deep}");
        }
    }

    #[test]
    fn exponents() {
        assert_relative_eq!(
            predicted_exponent(ExponentKind::Scenario2Lt1, 0.6).unwrap(),
            0.2857142857142857,
            max_relative = 1e-15
        );
        assert_eq!(predicted_exponent(ExponentKind::Scenario2Gt1, 1.5).unwrap(), 0.5);
        assert_relative_eq!(predicted_exponent(ExponentKind::Scenario2Lt1, 1e-9).unwrap(), 0.5, epsilon = 1e-9);
        assert_eq!(predicted_exponent(ExponentKind::ZipfGt1, 2.0).unwrap(), 0.0);
        assert!(predicted_exponent(ExponentKind::Scenario2Lt1, 1.5).is_err());
        assert!(predicted_exponent(ExponentKind::Scenario1Gt1, 0.5).is_err());
    }

    #[test]
    fn fit_examples() {
        let sq: Vec<(f64, f64)> = (1..6).map(|i| (i as f64, (i * i) as f64)).collect();
        let f = fit_loglog(&sq).unwrap();
        assert_relative_eq!(f.slope, 2.0, max_relative = 1e-12);
        assert_relative_eq!(f.r_squared, 1.0, max_relative = 1e-12);

        let flat: Vec<(f64, f64)> = (1..6).map(|i| (i as f64, 3.0)).collect();
        assert_eq!(fit_loglog(&flat).unwrap().slope, 0.0);

        assert!(fit_loglog(&[(1.0, 1.0)]).is_err());
        assert!(fit_loglog(&[(1.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(fit_loglog(&[(1.0, 1.0), (2.0, 2.0)]).unwrap().slope_stderr.is_none());
    }

    #[test]
    fn fit_recovers_noisy_power_law() {
        use rand_distr::Normal;
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let pts: Vec<(f64, f64)> = (0..10)
            .map(|i| {
                let x = 2f64.powi(i);
                (x, 3.0 * x.powf(0.7) * (1.0 + noise.sample(&mut rng)))
            })
            .collect();
        let f = fit_loglog(&pts).unwrap();
        assert!((f.slope - 0.7).abs() <= 3.0 * f.slope_stderr.unwrap());
    }
}
