//! Ground sets, subset masks and set-function oracles.
//!
//! Element `i` of a ground set of size `n` is bit `i` of a [`SubsetMask`], and an
//! explicit table stores `f(S)` at index `S.bits()`. The structural testers in
//! this module are exhaustive and therefore capped at small ground sets.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_cap, Error, Result};
use crate::split::SplitMap;

/// Largest ground set any oracle accepts.
pub const MAX_ORACLE_N: usize = 24;
/// Largest ground set the exact engines (enumeration, LP, property checks) accept.
pub const MAX_EXACT_N: usize = 16;
/// Largest ground set for the pairwise subadditivity scan.
pub const MAX_SUBADDITIVE_N: usize = 12;
/// Largest facility count for the brute-force facility-location evaluator.
pub const MAX_FACILITIES: usize = 12;
/// Default absolute tolerance of the property checkers.
pub const CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroundSet {
    n: usize,
}

impl GroundSet {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("ground set must have at least one element"));
        }
        ensure_cap("ground set", n, MAX_ORACLE_N)?;
        Ok(GroundSet { n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of subsets, `2^n`.
    pub fn subset_count(&self) -> usize {
        1usize << self.n
    }

    pub fn full(&self) -> SubsetMask {
        SubsetMask::full(self.n)
    }

    pub fn contains(&self, mask: SubsetMask) -> bool {
        (mask.0 as u64) < (1u64 << self.n)
    }

    pub fn check(&self, mask: SubsetMask) -> Result<()> {
        if self.contains(mask) {
            Ok(())
        } else {
            Err(Error::MaskOutOfRange { mask: mask.0 as u64, n: self.n })
        }
    }

    /// All subsets in increasing mask order.
    pub fn subsets(&self) -> impl Iterator<Item = SubsetMask> {
        (0..self.subset_count() as u32).map(SubsetMask)
    }
}

/// A subset of the ground set; bit `i` set means element `i` is present.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubsetMask(pub u32);

impl SubsetMask {
    pub const EMPTY: SubsetMask = SubsetMask(0);

    pub fn full(n: usize) -> Self {
        if n >= 32 {
            SubsetMask(u32::MAX)
        } else {
            SubsetMask((1u32 << n) - 1)
        }
    }

    pub fn singleton(i: usize) -> Self {
        SubsetMask(1 << i)
    }

    pub fn from_elements<I: IntoIterator<Item = usize>>(elements: I) -> Self {
        SubsetMask(elements.into_iter().fold(0, |acc, i| acc | (1 << i)))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn with(self, i: usize) -> Self {
        SubsetMask(self.0 | 1 << i)
    }

    pub fn without(self, i: usize) -> Self {
        SubsetMask(self.0 & !(1 << i))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: Self) -> Self {
        SubsetMask(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        SubsetMask(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        SubsetMask(self.0 & !other.0)
    }

    pub fn is_subset_of(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    /// Elements in increasing order.
    pub fn elements(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i)
            }
        })
    }

    /// All subsets of `self` (including the empty set and `self`).
    pub fn subsets(self) -> impl Iterator<Item = SubsetMask> {
        let full = self.0;
        let mut next = Some(0u32);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == full { None } else { Some((cur.wrapping_sub(full)) & full) };
            Some(SubsetMask(cur))
        })
    }
}

impl fmt::Debug for SubsetMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.elements().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{i}")?;
        }
        f.write_str("}")
    }
}

/// A set function `f: 2^V -> R` in one of several concrete representations.
///
/// The JSON encoding is tagged by `"type"`. Optional fields (`covered`,
/// `fixed_cost`) default to the plain function and are omitted on output when
/// unused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SetFunction {
    /// `2^n` values indexed by mask.
    Explicit { n: usize, values: Vec<f64> },
    /// `max_k |(S \ covered) ∩ A_k| + fixed_cost` for a partition `A_1..A_K`.
    CoverageMax {
        n: usize,
        partition: Vec<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        covered: Vec<usize>,
        #[serde(default, skip_serializing_if = "is_zero")]
        fixed_cost: f64,
    },
    /// Total weight of the items covered by the members of `S`; element `i`
    /// covers the item indices `covers[i]`.
    WeightedCoverage { covers: Vec<Vec<usize>>, weights: Vec<f64> },
    /// Two-stage capacity purchase: `c1(x) + 2^n (|S| - x)^+` where
    /// `c1(x) = x` for `x < n` and `c1(n) = n + 2`.
    TwoStageFlow { n: usize, x: usize },
    /// Uncapacitated facility location over clients `S`; `distances[c][j]` is
    /// the client-to-facility distance, facilities in `pre_open` are free, any
    /// other facility `j` costs `open_costs[j]`.
    FacilityLocation {
        open_costs: Vec<f64>,
        distances: Vec<Vec<f64>>,
        #[serde(default)]
        pre_open: Vec<usize>,
        #[serde(default, skip_serializing_if = "is_zero")]
        fixed_cost: f64,
    },
    /// `f'(S') = f(project(S'))` on a split ground set.
    Split { base: Box<SetFunction>, map: SplitMap },
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl SetFunction {
    pub fn explicit(n: usize, values: Vec<f64>) -> Result<Self> {
        let f = SetFunction::Explicit { n, values };
        f.validate()?;
        Ok(f)
    }

    /// Materialize any closure over masks as an explicit table.
    pub fn from_fn(n: usize, mut g: impl FnMut(SubsetMask) -> f64) -> Result<Self> {
        let ground = GroundSet::new(n)?;
        let values = ground.subsets().map(&mut g).collect();
        Ok(SetFunction::Explicit { n, values })
    }

    pub fn coverage_max(n: usize, partition: Vec<Vec<usize>>) -> Result<Self> {
        let f = SetFunction::CoverageMax { n, partition, covered: Vec::new(), fixed_cost: 0.0 };
        f.validate()?;
        Ok(f)
    }

    pub fn n(&self) -> usize {
        match self {
            SetFunction::Explicit { n, .. }
            | SetFunction::CoverageMax { n, .. }
            | SetFunction::TwoStageFlow { n, .. } => *n,
            SetFunction::WeightedCoverage { covers, .. } => covers.len(),
            SetFunction::FacilityLocation { distances, .. } => distances.len(),
            SetFunction::Split { map, .. } => map.split_size(),
        }
    }

    pub fn ground(&self) -> Result<GroundSet> {
        GroundSet::new(self.n())
    }

    /// Structural validation; every constructor path that accepts external
    /// data should call this.
    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        GroundSet::new(n)?;
        match self {
            SetFunction::Explicit { values, .. } => {
                if values.len() != 1usize << n {
                    return Err(Error::invalid(format!(
                        "explicit table has {} values, expected 2^{n} = {}",
                        values.len(),
                        1usize << n
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("explicit table contains a non-finite value"));
                }
            }
            SetFunction::CoverageMax { partition, covered, fixed_cost, .. } => {
                let mut seen = SubsetMask::EMPTY;
                for block in partition {
                    for &i in block {
                        if i >= n {
                            return Err(Error::invalid(format!("partition element {i} out of range")));
                        }
                        if seen.contains(i) {
                            return Err(Error::invalid(format!("partition element {i} appears twice")));
                        }
                        seen = seen.with(i);
                    }
                }
                if covered.iter().any(|&i| i >= n) {
                    return Err(Error::invalid("covered element out of range"));
                }
                if !fixed_cost.is_finite() {
                    return Err(Error::invalid("fixed_cost must be finite"));
                }
            }
            SetFunction::WeightedCoverage { covers, weights } => {
                if weights.len() > 64 {
                    return Err(Error::invalid("weighted coverage supports at most 64 items"));
                }
                if weights.iter().any(|w| !w.is_finite()) {
                    return Err(Error::invalid("coverage weight must be finite"));
                }
                if covers.iter().flatten().any(|&j| j >= weights.len()) {
                    return Err(Error::invalid("coverage item index out of range"));
                }
            }
            SetFunction::TwoStageFlow { x, .. } => {
                if *x > n {
                    return Err(Error::invalid(format!("first-stage capacity {x} exceeds n = {n}")));
                }
            }
            SetFunction::FacilityLocation { open_costs, distances, pre_open, fixed_cost } => {
                let m = open_costs.len();
                if m == 0 {
                    return Err(Error::invalid("facility location needs at least one facility"));
                }
                ensure_cap("facility count", m, MAX_FACILITIES)?;
                if distances.iter().any(|row| row.len() != m) {
                    return Err(Error::invalid("every distance row needs one entry per facility"));
                }
                if pre_open.iter().any(|&j| j >= m) {
                    return Err(Error::invalid("pre-opened facility out of range"));
                }
                let all_finite = open_costs.iter().chain(distances.iter().flatten()).all(|v| v.is_finite());
                if !all_finite || !fixed_cost.is_finite() {
                    return Err(Error::invalid("facility costs must be finite"));
                }
            }
            SetFunction::Split { base, map } => {
                base.validate()?;
                map.validate()?;
                if map.original_size() != base.n() {
                    return Err(Error::invalid("split map does not match the base ground set"));
                }
            }
        }
        Ok(())
    }

    /// `f(S)`, with a range check on the mask.
    pub fn evaluate(&self, s: SubsetMask) -> Result<f64> {
        self.ground()?.check(s)?;
        Ok(self.value(s))
    }

    /// `f(S)` without the range check. Callers must pass a valid mask.
    pub fn value(&self, s: SubsetMask) -> f64 {
        match self {
            SetFunction::Explicit { values, .. } => values[s.index()],
            SetFunction::CoverageMax { partition, covered, fixed_cost, .. } => {
                let rest = s.difference(SubsetMask::from_elements(covered.iter().copied()));
                let best = partition
                    .iter()
                    .map(|block| block.iter().filter(|&&i| rest.contains(i)).count())
                    .max()
                    .unwrap_or(0);
                best as f64 + fixed_cost
            }
            SetFunction::WeightedCoverage { covers, weights } => {
                let items = s.elements().fold(0u64, |acc, i| {
                    covers[i].iter().fold(acc, |a, &j| a | 1u64 << j)
                });
                weights.iter().enumerate().filter(|(j, _)| items >> j & 1 == 1).map(|(_, w)| w).sum()
            }
            SetFunction::TwoStageFlow { n, x } => {
                let shortfall = s.len().saturating_sub(*x);
                two_stage_first_cost(*n, *x) + (1u64 << n) as f64 * shortfall as f64
            }
            SetFunction::FacilityLocation { open_costs, distances, pre_open, fixed_cost } => {
                fixed_cost + facility_cost(open_costs, distances, pre_open, s)
            }
            SetFunction::Split { base, map } => base.value(map.project(s)),
        }
    }

    /// All `2^n` values by mask. Capped at [`MAX_EXACT_N`].
    pub fn table(&self) -> Result<Vec<f64>> {
        let ground = self.ground()?;
        ensure_cap("exact table", ground.len(), MAX_EXACT_N)?;
        if let SetFunction::Explicit { values, .. } = self {
            return Ok(values.clone());
        }
        Ok(ground.subsets().map(|s| self.value(s)).collect())
    }

    /// Explicit copy of this function.
    pub fn materialize(&self) -> Result<SetFunction> {
        Ok(SetFunction::Explicit { n: self.n(), values: self.table()? })
    }
}

/// First-stage capacity cost of the two-stage flow function.
pub fn two_stage_first_cost(n: usize, x: usize) -> f64 {
    if x >= n {
        (n + 2) as f64
    } else {
        x as f64
    }
}

/// Deterministic UFL cost for the client set `clients`, by brute force over the
/// subsets of facilities that are not already open.
pub fn facility_cost(open_costs: &[f64], distances: &[Vec<f64>], pre_open: &[usize], clients: SubsetMask) -> f64 {
    if clients.is_empty() {
        return 0.0;
    }
    let m = open_costs.len();
    let pre = pre_open.iter().fold(0u32, |acc, &j| acc | 1 << j);
    let optional = !pre & ((1u32 << m) - 1);
    let mut best = f64::INFINITY;
    for extra in SubsetMask(optional).subsets() {
        let open = pre | extra.0;
        if open == 0 {
            continue;
        }
        let opening: f64 = extra.elements().map(|j| open_costs[j]).sum();
        if opening >= best {
            continue;
        }
        let connect: f64 = clients
            .elements()
            .map(|c| {
                SubsetMask(open)
                    .elements()
                    .map(|j| distances[c][j])
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        best = best.min(opening + connect);
    }
    best
}

/// `(f, V, {p_i})`: a set function together with per-element marginals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub function: SetFunction,
    pub marginals: Vec<f64>,
}

impl Instance {
    pub fn new(function: SetFunction, marginals: Vec<f64>) -> Result<Self> {
        let inst = Instance { function, marginals };
        inst.validate()?;
        Ok(inst)
    }

    pub fn uniform(function: SetFunction, p: f64) -> Result<Self> {
        let n = function.n();
        Instance::new(function, vec![p; n])
    }

    pub fn n(&self) -> usize {
        self.function.n()
    }

    pub fn validate(&self) -> Result<()> {
        self.function.validate()?;
        validate_marginals(&self.marginals, self.function.n())
    }
}

pub(crate) fn validate_marginals(p: &[f64], n: usize) -> Result<()> {
    if p.len() != n {
        return Err(Error::invalid(format!("expected {n} marginals, got {}", p.len())));
    }
    for (index, &value) in p.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidMarginal { index, value });
        }
    }
    Ok(())
}

fn exact_table(f: &SetFunction, what: &'static str, cap: usize) -> Result<(usize, Vec<f64>)> {
    let n = f.n();
    ensure_cap(what, n, cap)?;
    Ok((n, f.table()?))
}

pub fn is_monotone(f: &SetFunction) -> Result<bool> {
    is_monotone_with_tol(f, CHECK_TOL)
}

/// `f(S) <= f(S + i) + tol` for every `S` and `i` outside `S`.
pub fn is_monotone_with_tol(f: &SetFunction, tol: f64) -> Result<bool> {
    let (n, t) = exact_table(f, "monotonicity check", MAX_EXACT_N)?;
    Ok((0..t.len()).all(|s| (0..n).filter(|i| s >> i & 1 == 0).all(|i| t[s] <= t[s | 1 << i] + tol)))
}

pub fn is_submodular(f: &SetFunction) -> Result<bool> {
    is_submodular_with_tol(f, CHECK_TOL)
}

/// Diminishing returns, checked in the equivalent local form
/// `f(S+i) + f(S+j) >= f(S+i+j) + f(S)` over all `S` and `i < j` outside `S`.
pub fn is_submodular_with_tol(f: &SetFunction, tol: f64) -> Result<bool> {
    let (n, t) = exact_table(f, "submodularity check", MAX_EXACT_N)?;
    let ok = second_differences(n, &t).all(|d| d <= tol);
    Ok(ok)
}

pub fn is_supermodular(f: &SetFunction) -> Result<bool> {
    is_supermodular_with_tol(f, CHECK_TOL)
}

/// Increasing returns: the local inequality of [`is_submodular_with_tol`] reversed.
pub fn is_supermodular_with_tol(f: &SetFunction, tol: f64) -> Result<bool> {
    let (n, t) = exact_table(f, "supermodularity check", MAX_EXACT_N)?;
    let ok = second_differences(n, &t).all(|d| d >= -tol);
    Ok(ok)
}

// f(S+i+j) - f(S+i) - f(S+j) + f(S)
fn second_differences(n: usize, t: &[f64]) -> impl Iterator<Item = f64> + '_ {
    (0..t.len()).flat_map(move |s| {
        (0..n).filter(move |i| s >> i & 1 == 0).flat_map(move |i| {
            (i + 1..n)
                .filter(move |j| s >> j & 1 == 0)
                .map(move |j| t[s | 1 << i | 1 << j] - t[s | 1 << i] - t[s | 1 << j] + t[s])
        })
    })
}

pub fn is_subadditive(f: &SetFunction) -> Result<bool> {
    is_subadditive_with_tol(f, CHECK_TOL)
}

/// `f(S ∪ T) <= f(S) + f(T) + tol` for all pairs.
pub fn is_subadditive_with_tol(f: &SetFunction, tol: f64) -> Result<bool> {
    let (_, t) = exact_table(f, "subadditivity check", MAX_SUBADDITIVE_N)?;
    Ok((0..t.len()).all(|s| (s..t.len()).all(|u| t[s | u] <= t[s] + t[u] + tol)))
}
