//! Scenario distributions over `2^V` and expectations under them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_cap, Error, Result};
use crate::model::{validate_marginals, GroundSet, SetFunction, SubsetMask, MAX_EXACT_N};

/// Masses below this are treated as zero and dropped.
pub const MASS_EPS: f64 = 1e-12;
/// Allowed deviation of the total mass from one.
pub const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMass {
    pub mask: SubsetMask,
    pub p: f64,
}

/// A finitely supported distribution over subsets.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScenarioDistribution {
    pub support: Vec<ScenarioMass>,
}

impl ScenarioDistribution {
    /// Validates against a ground set of size `n`: masks in range, masses not
    /// below `-1e-12`, total mass within `1e-9` of one. Tiny masses are
    /// clamped to zero and dropped.
    pub fn new(n: usize, support: impl IntoIterator<Item = (SubsetMask, f64)>) -> Result<Self> {
        let ground = GroundSet::new(n)?;
        let mut kept = Vec::new();
        let mut total = 0.0;
        for (mask, p) in support {
            ground.check(mask)?;
            if !p.is_finite() || p < -MASS_EPS {
                return Err(Error::invalid(format!("scenario {mask:?} has invalid mass {p}")));
            }
            total += p.max(0.0);
            if p >= MASS_EPS {
                kept.push(ScenarioMass { mask, p });
            }
        }
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::invalid(format!("scenario masses sum to {total}, not 1")));
        }
        Ok(ScenarioDistribution { support: kept })
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        ScenarioDistribution::new(n, self.support.iter().map(|s| (s.mask, s.p))).map(|_| ())
    }

    pub fn total_mass(&self) -> f64 {
        self.support.iter().map(|s| s.p).sum()
    }

    /// Probability of an exact scenario (summing duplicate entries).
    pub fn mass_of(&self, mask: SubsetMask) -> f64 {
        self.support.iter().filter(|s| s.mask == mask).map(|s| s.p).sum()
    }
}

/// Per-element inclusion probabilities `sum_{S ∋ i} alpha_S`.
pub fn marginals_of(d: &ScenarioDistribution, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for s in &d.support {
        for i in s.mask.elements() {
            out[i] += s.p;
        }
    }
    out
}

/// `sum_S alpha_S f(S)`.
pub fn expectation_under(d: &ScenarioDistribution, f: &SetFunction) -> f64 {
    d.support.iter().map(|s| s.p * f.value(s.mask)).sum()
}

/// The product distribution with the given marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependentBernoulli {
    marginals: Vec<f64>,
}

impl IndependentBernoulli {
    pub fn new(marginals: Vec<f64>) -> Result<Self> {
        GroundSet::new(marginals.len())?;
        validate_marginals(&marginals, marginals.len())?;
        Ok(IndependentBernoulli { marginals })
    }

    pub fn marginals(&self) -> &[f64] {
        &self.marginals
    }

    pub fn probability(&self, s: SubsetMask) -> f64 {
        self.marginals
            .iter()
            .enumerate()
            .map(|(i, &p)| if s.contains(i) { p } else { 1.0 - p })
            .product()
    }

    /// Every scenario with positive probability, as an explicit distribution.
    pub fn materialize(&self) -> Result<ScenarioDistribution> {
        let n = self.marginals.len();
        ensure_cap("product distribution", n, MAX_EXACT_N)?;
        let ground = GroundSet::new(n)?;
        let support = ground
            .subsets()
            .map(|s| ScenarioMass { mask: s, p: self.probability(s) })
            .filter(|s| s.p > 0.0)
            .collect();
        Ok(ScenarioDistribution { support })
    }
}

/// Exact `E[f(S)]` when each element is present independently with its marginal.
pub fn independent_expectation_exact(f: &SetFunction, p: &[f64]) -> Result<f64> {
    let n = f.n();
    ensure_cap("independent expectation", n, MAX_EXACT_N)?;
    validate_marginals(p, n)?;
    let table = f.table()?;
    Ok(independent_expectation_of_table(&table, p))
}

pub(crate) fn independent_expectation_of_table(table: &[f64], p: &[f64]) -> f64 {
    table
        .iter()
        .enumerate()
        .map(|(s, v)| {
            let w: f64 = p.iter().enumerate().map(|(i, &pi)| if s >> i & 1 == 1 { pi } else { 1.0 - pi }).product();
            w * v
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    /// Standard error of the mean; infinite for a single sample.
    pub stderr: f64,
    pub samples: u64,
}

/// Samples per shard. Shard boundaries are fixed so results do not depend on
/// the number of worker threads.
const SHARD: u64 = 8192;

/// Monte Carlo estimate of the independent expectation.
///
/// The generator is ChaCha8 seeded from `seed`; shard `k` draws from stream `k`
/// of that seed, and shard statistics are merged in shard order.
pub fn independent_expectation_mc(f: &SetFunction, p: &[f64], samples: u64, seed: u64) -> Result<McEstimate> {
    if samples == 0 {
        return Err(Error::invalid("at least one sample is required"));
    }
    let n = f.n();
    GroundSet::new(n)?;
    validate_marginals(p, n)?;
    let shards = samples.div_ceil(SHARD);
    let parts: Vec<Moments> = (0..shards)
        .into_par_iter()
        .map(|k| {
            let count = SHARD.min(samples - k * SHARD);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let mut m = Moments::default();
            for _ in 0..count {
                let mut s = SubsetMask::EMPTY;
                for (i, &pi) in p.iter().enumerate() {
                    if rng.gen::<f64>() < pi {
                        s = s.with(i);
                    }
                }
                m.push(f.value(s));
            }
            m
        })
        .collect();
    let total = parts.into_iter().fold(Moments::default(), Moments::merge);
    let stderr = if total.count > 1 {
        (total.m2 / (total.count - 1) as f64 / total.count as f64).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(McEstimate { estimate: total.mean, stderr, samples })
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(a: Moments, b: Moments) -> Moments {
        if a.count == 0 {
            return b;
        }
        if b.count == 0 {
            return a;
        }
        let count = a.count + b.count;
        let delta = b.mean - a.mean;
        let mean = a.mean + delta * b.count as f64 / count as f64;
        let m2 = a.m2 + b.m2 + delta * delta * a.count as f64 * b.count as f64 / count as f64;
        Moments { count, mean, m2 }
    }
}
