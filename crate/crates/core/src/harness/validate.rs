//! Cross-module invariant suites run at pinned seeds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{cluster_outage_monte_carlo, lemma6, solve_c1, solve_c1_c2};
use crate::caching::{closed_form_outage, optimize_policy, policy_log_multiplier};
use crate::error::Result;
use crate::geometry::{grid_from_target_side, CachePlacement, NetworkRealization};
use crate::metrics::check_transport_bound;
use crate::phy::{lemma5_holds, PhyConfig};
use crate::popularity::PopularityModel;
use crate::schemes::{cluster_side, run_scenario1, FrequencyPlan, Regime, SchemeConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub seed: u64,
    pub cases: usize,
    pub failures: usize,
    pub detail: String,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub suites: Vec<SuiteReport>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteReport::passed)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.suites {
            s.push_str(&format!(
                "{:<6} {:<22} cases={:<8} failures={:<6} seed={:<6} {}\n",
                if r.passed() { "PASS" } else { "FAIL" },
                r.name,
                r.cases,
                r.failures,
                r.seed,
                r.detail
            ));
        }
        s.push_str(if self.passed() { "all suites passed\n" } else { "some suites FAILED\n" });
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidateOptions {
    pub seed: u64,
    /// Realizations for the network-level suites.
    pub realizations: usize,
    /// Override for mutation testing.
    pub frequency_plan: FrequencyPlan,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            seed: 2024,
            realizations: 10,
            frequency_plan: FrequencyPlan::Reuse,
        }
    }
}

/// The reference network: N = 2·10⁴, M = 400, S = 2, γ = 0.6, q = 20, ρ = 4.
pub struct ReferenceNetwork {
    pub model: PopularityModel,
    pub n: usize,
    pub s: usize,
    pub scheme: SchemeConfig,
    pub phy: PhyConfig,
    pub d_target: f64,
    pub occupancy: f64,
    pub placer: crate::caching::CachePlacer,
    pub policy: crate::caching::CachingPolicy,
}

impl ReferenceNetwork {
    pub fn new(plan: FrequencyPlan) -> Result<Self> {
        let model = PopularityModel::new(400, 0.6, 20.0)?;
        let (n, s) = (20_000, 2);
        let mut scheme = SchemeConfig::new(Regime::GammaLt1, 4.0);
        scheme.frequency_plan = plan;
        let d_target = cluster_side(scheme.regime, &model, s, n, scheme.rho_or_alpha1)?;
        let k = grid_from_target_side(d_target)?.k;
        let occupancy = n as f64 / (k * k) as f64;
        let policy = optimize_policy(&model, s, occupancy)?;
        let placer = crate::caching::CachePlacer::new(&policy);
        Ok(Self {
            model,
            n,
            s,
            scheme,
            phy: PhyConfig::default(),
            d_target,
            occupancy,
            placer,
            policy,
        })
    }

    pub fn realization(&self, seed: u64) -> Result<NetworkRealization> {
        NetworkRealization::generate(self.n, &self.model, CachePlacement::Single(&self.placer), seed)
    }
}

fn lemma5_suite(seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases = 100_000;
    let failures = (0..cases)
        .filter(|_| {
            let x = 100.0 * (1.0 - rng.random::<f64>());
            let a = rng.random_range(1.0..=8.0);
            !lemma5_holds(x, a)
        })
        .count();
    SuiteReport {
        name: "lemma5".into(),
        seed,
        cases,
        failures,
        detail: "ln(1+x^a) <= a*x, x in (0,100], a in [1,8]".into(),
    }
}

fn network_suites(opts: &ValidateOptions) -> Result<(SuiteReport, SuiteReport)> {
    let net = ReferenceNetwork::new(opts.frequency_plan)?;
    let mut scheme = net.scheme.clone();
    scheme.record_schedule = true;
    let mut links = 0;
    let mut floor_fail = 0;
    let mut worst_ratio = f64::INFINITY;
    let mut bound_fail = 0;
    let mut min_slack = f64::INFINITY;
    for t in 0..opts.realizations {
        let seed = opts.seed.wrapping_add(t as u64);
        let real = net.realization(seed)?;
        let res = run_scenario1(&real, &net.model, &scheme, &net.phy)?;
        let clustered = &res.slots[1];
        links += clustered.served_users;
        floor_fail += clustered.floor_violations;
        if let Some(f) = clustered.sinr_floor {
            worst_ratio = worst_ratio.min(clustered.min_sinr / f);
        }
        let rec = check_transport_bound(res.schedule.as_ref().expect("recorded"), &net.phy, scheme.t_prime, net.d_target, 0.1)?;
        if !rec.holds {
            bound_fail += 1;
        }
        min_slack = min_slack.min(rec.slack);
    }
    Ok((
        SuiteReport {
            name: "prop1_sinr_floor".into(),
            seed: opts.seed,
            cases: links,
            failures: floor_fail,
            detail: format!("min SINR / floor = {worst_ratio:.4}"),
        },
        SuiteReport {
            name: "transport_bound".into(),
            seed: opts.seed,
            cases: opts.realizations,
            failures: bound_fail,
            detail: format!("min slack = {min_slack:.6e}"),
        },
    ))
}

fn outage_oracle_suite(seed: u64) -> Result<SuiteReport> {
    let model = PopularityModel::new(50, 0.6, 5.0)?;
    let g = 25.0;
    let policy = optimize_policy(&model, 2, g)?;
    let closed = closed_form_outage(&policy, &model, g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mc, se) = cluster_outage_monte_carlo(&policy, &model, g, 100_000, &mut rng)?;
    let z = (mc - closed) / se;
    Ok(SuiteReport {
        name: "closed_form_outage".into(),
        seed,
        cases: 1,
        failures: usize::from(z.abs() > 3.0),
        detail: format!("closed {closed:.6}, monte carlo {mc:.6}, z = {z:.2}"),
    })
}

fn fixed_point_suite(seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases = 10_000;
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let gc = 10f64.powf(rng.random_range(-3.0..6.0));
        let q = 10f64.powf(rng.random_range(-2.0..5.0));
        let s = rng.random_range(1..=64);
        let gamma = rng.random_range(0.05..3.0);
        let fp = solve_c1_c2(gc, q, s, gamma)?;
        let rel = fp.residual.abs() / fp.c1.max(1.0);
        worst = worst.max(rel);
        if rel > 1e-12 || fp.c1 < 1.0 {
            failures += 1;
        }
    }
    Ok(SuiteReport {
        name: "fixed_point_residual".into(),
        seed,
        cases,
        failures,
        detail: format!("max relative residual {worst:.2e}"),
    })
}

fn lemma6_suite() -> Result<SuiteReport> {
    let mut errs = Vec::new();
    for e in [1e-4, 1e-6, 1e-8] {
        errs.push((solve_c1(1.0 / e)? / lemma6(e).0 - 1.0).abs());
    }
    let monotone = errs.windows(2).all(|w| w[1] < w[0]);
    let close = errs[1] <= 0.01;
    Ok(SuiteReport {
        name: "lemma6_asymptotics".into(),
        seed: 0,
        cases: 3,
        failures: usize::from(!monotone) + usize::from(!close),
        detail: format!("|C1/approx - 1| = {:.2e}, {:.2e}, {:.2e}", errs[0], errs[1], errs[2]),
    })
}

fn kkt_suite(seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases = 200;
    let mut failures = 0;
    for _ in 0..cases {
        let m = rng.random_range(2..500);
        let s = rng.random_range(1..m);
        let model = PopularityModel::new(m, rng.random_range(0.0..2.0), rng.random_range(0.0..50.0))?;
        let g = 10f64.powf(rng.random_range(-1.0..3.5));
        let policy = optimize_policy(&model, s, g)?;
        let Some(log_mu) = policy_log_multiplier(&policy, &model, g) else {
            continue;
        };
        let ok = policy.probs().iter().enumerate().all(|(i, &pc)| {
            let lg = (g * model.pmf(i + 1).expect("in range")).ln() - g * pc;
            if pc <= 0.0 {
                lg <= log_mu + 1e-6
            } else if pc >= 1.0 {
                lg >= log_mu - 1e-6
            } else {
                (lg - log_mu).abs() <= 1e-6
            }
        });
        if !ok {
            failures += 1;
        }
    }
    Ok(SuiteReport {
        name: "water_filling_kkt".into(),
        seed,
        cases,
        failures,
        detail: "stationarity and complementary slackness".into(),
    })
}

pub fn validate(opts: &ValidateOptions) -> Result<ValidationReport> {
    let (floor, bound) = network_suites(opts)?;
    Ok(ValidationReport {
        suites: vec![
            lemma5_suite(opts.seed),
            floor,
            bound,
            outage_oracle_suite(opts.seed)?,
            fixed_point_suite(opts.seed)?,
            lemma6_suite()?,
            kkt_suite(opts.seed)?,
        ],
    })
}
