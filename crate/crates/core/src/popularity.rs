//! MZipf request popularity: `P(f) ∝ (f + q)^(-γ)` over a library of `M` files.
//!
//! File indices are 1-based throughout the crate.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::sum::KahanSum;

/// Request distribution over a library of `m` files.
///
/// Immutable once built; the cumulative table used for sampling is computed
/// at construction.
#[derive(Debug, Clone)]
pub struct PopularityModel {
    m: usize,
    gamma: f64,
    q: f64,
    total: f64,
    cdf: Vec<f64>,
}

impl PopularityModel {
    pub fn new(m: usize, gamma: f64, q: f64) -> Result<Self> {
        if m == 0 {
            return Err(invalid("M", "library size must be at least 1"));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(invalid("gamma", format!("must be finite and >= 0, got {gamma}")));
        }
        if !(q.is_finite() && q >= 0.0) {
            return Err(invalid("q", format!("must be finite and >= 0, got {q}")));
        }

        let mut acc = KahanSum::new();
        let mut partial = Vec::with_capacity(m);
        for f in 1..=m {
            acc.add(term(f, gamma, q));
            partial.push(acc.value());
        }
        let total = acc.value();
        let mut cdf: Vec<f64> = partial.into_iter().map(|c| c / total).collect();
        // Pin the last entry so inverse-CDF lookups never fall off the end.
        cdf[m - 1] = 1.0;

        Ok(Self {
            m,
            gamma,
            q,
            total,
            cdf,
        })
    }

    /// Plain Zipf law (`q = 0`).
    pub fn zipf(m: usize, gamma: f64) -> Result<Self> {
        Self::new(m, gamma, 0.0)
    }

    pub fn library_size(&self) -> usize {
        self.m
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn plateau(&self) -> f64 {
        self.q
    }

    /// `H(1, M, γ, q)`, the normalising constant.
    pub fn normalizer(&self) -> f64 {
        self.total
    }

    /// `Σ_{f=a}^{b} (f+q)^(-γ)`.
    pub fn harmonic_sum(&self, a: usize, b: usize) -> Result<f64> {
        harmonic_sum(a, b, self.gamma, self.q).and_then(|h| {
            if b > self.m {
                Err(Error::Domain {
                    index: b,
                    max: self.m,
                })
            } else {
                Ok(h)
            }
        })
    }

    pub fn pmf(&self, f: usize) -> Result<f64> {
        if f == 0 || f > self.m {
            return Err(Error::Domain {
                index: f,
                max: self.m,
            });
        }
        Ok(term(f, self.gamma, self.q) / self.total)
    }

    /// The whole mass function, index `f - 1` holding `P(f)`.
    pub fn pmf_vec(&self) -> Vec<f64> {
        (1..=self.m)
            .map(|f| term(f, self.gamma, self.q) / self.total)
            .collect()
    }

    /// Cumulative probabilities, index `f - 1` holding `P(X <= f)`.
    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// Draws one request by inverse CDF over the cached cumulative table.
    pub fn sample_request<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u).min(self.m - 1) + 1
    }
}

#[inline]
fn term(f: usize, gamma: f64, q: f64) -> f64 {
    if gamma == 0.0 {
        1.0
    } else {
        (-gamma * (f as f64 + q).ln()).exp()
    }
}

/// `Σ_{f=a}^{b} (f+q)^(-γ)` with compensated accumulation.
pub fn harmonic_sum(a: usize, b: usize, gamma: f64, q: f64) -> Result<f64> {
    if a < 1 {
        return Err(Error::Domain { index: a, max: b });
    }
    if a > b {
        return Err(Error::EmptyRange { a, b });
    }
    Ok((a..=b)
        .map(|f| term(f, gamma, q))
        .collect::<KahanSum>()
        .value())
}
