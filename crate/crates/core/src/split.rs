//! Element splitting: replace element `i` by `counts[i]` copies with marginal
//! `p_i / counts[i]` each, and evaluate `f'(S') = f(project(S'))`.
//!
//! Copies are laid out contiguously: the copies of element 0 come first, then
//! those of element 1, and so on.

use serde::{Deserialize, Serialize};

use crate::correlation_gap::kappa_of;
use crate::distributions::{independent_expectation_exact, ScenarioDistribution};
use crate::error::{ensure_cap, Error, Result};
use crate::model::{is_monotone, Instance, SetFunction, SubsetMask, MAX_EXACT_N, MAX_ORACLE_N};
use crate::worst_case::worst_case_lp;

/// Largest split ground set accepted by [`verify_split_properties`].
pub const MAX_VERIFY_SPLIT_N: usize = MAX_EXACT_N;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SplitMapRepr", into = "SplitMapRepr")]
pub struct SplitMap {
    counts: Vec<usize>,
    copy_of: Vec<usize>,
    copy_rank: Vec<usize>,
    copies: Vec<SubsetMask>,
    partition: Option<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct SplitMapRepr {
    counts: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    partition: Option<Vec<usize>>,
}

impl TryFrom<SplitMapRepr> for SplitMap {
    type Error = Error;

    fn try_from(r: SplitMapRepr) -> Result<Self> {
        let map = SplitMap::new(r.counts)?;
        match r.partition {
            Some(labels) => map.with_partition(labels),
            None => Ok(map),
        }
    }
}

impl From<SplitMap> for SplitMapRepr {
    fn from(m: SplitMap) -> Self {
        SplitMapRepr { counts: m.counts, partition: m.partition }
    }
}

impl SplitMap {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::invalid("split needs at least one element"));
        }
        if counts.contains(&0) {
            return Err(Error::invalid("every split count must be at least 1"));
        }
        let total: usize = counts.iter().sum();
        ensure_cap("split ground set", total, MAX_ORACLE_N)?;
        let mut copy_of = Vec::with_capacity(total);
        let mut copy_rank = Vec::with_capacity(total);
        let mut copies = Vec::with_capacity(counts.len());
        for (i, &c) in counts.iter().enumerate() {
            let start = copy_of.len();
            copies.push(SubsetMask::from_elements(start..start + c));
            for r in 0..c {
                copy_of.push(i);
                copy_rank.push(r);
            }
        }
        Ok(SplitMap { counts, copy_of, copy_rank, copies, partition: None })
    }

    /// Attach a block label to every copy. A block may hold at most one copy of
    /// any original element.
    pub fn with_partition(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.split_size() {
            return Err(Error::invalid("partition needs one label per copy"));
        }
        let mut seen = std::collections::HashSet::new();
        for (copy, &label) in labels.iter().enumerate() {
            if !seen.insert((label, self.copy_of[copy])) {
                return Err(Error::invalid(format!(
                    "block {label} holds two copies of element {}",
                    self.copy_of[copy]
                )));
            }
        }
        self.partition = Some(labels);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let rebuilt = SplitMap::new(self.counts.clone())?;
        if rebuilt.copy_of != self.copy_of {
            return Err(Error::invalid("inconsistent split map"));
        }
        match &self.partition {
            Some(labels) => rebuilt.with_partition(labels.clone()).map(|_| ()),
            None => Ok(()),
        }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn original_size(&self) -> usize {
        self.counts.len()
    }

    pub fn split_size(&self) -> usize {
        self.copy_of.len()
    }

    /// Original element of a copy.
    pub fn original_of(&self, copy: usize) -> usize {
        self.copy_of[copy]
    }

    /// Zero-based copy number of `copy` among the copies of its original.
    pub fn copy_rank(&self, copy: usize) -> usize {
        self.copy_rank[copy]
    }

    /// All copies of original element `i`.
    pub fn copies_of(&self, i: usize) -> SubsetMask {
        self.copies[i]
    }

    pub fn partition(&self) -> Option<&[usize]> {
        self.partition.as_deref()
    }

    /// Originals with at least one copy in `s`.
    pub fn project(&self, s: SubsetMask) -> SubsetMask {
        let mut out = SubsetMask::EMPTY;
        for (i, &c) in self.copies.iter().enumerate() {
            if !s.intersection(c).is_empty() {
                out = out.with(i);
            }
        }
        out
    }

    pub fn split_marginals(&self, p: &[f64]) -> Vec<f64> {
        self.copy_of.iter().map(|&i| p[i] / self.counts[i] as f64).collect()
    }
}

/// The split instance `(f', V', p')` and its map.
pub fn split_instance(inst: &Instance, counts: Vec<usize>) -> Result<(Instance, SplitMap)> {
    inst.validate()?;
    if counts.len() != inst.n() {
        return Err(Error::invalid(format!("expected {} split counts, got {}", inst.n(), counts.len())));
    }
    let map = SplitMap::new(counts)?;
    Ok((split_with_map(inst, map.clone()), map))
}

pub(crate) fn split_with_map(inst: &Instance, map: SplitMap) -> Instance {
    let marginals = map.split_marginals(&inst.marginals);
    let function = SetFunction::Split { base: Box::new(inst.function.clone()), map };
    Instance { function, marginals }
}

pub fn project(map: &SplitMap, s: SubsetMask) -> SubsetMask {
    map.project(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub counts: Vec<usize>,
    pub original_monotone: bool,
    /// The split function is monotone.
    pub p1_monotone: bool,
    pub worst_original: f64,
    pub worst_split: f64,
    /// Worst-case value unchanged within `1e-6`.
    pub p2_worst_case_preserved: bool,
    pub independent_original: f64,
    pub independent_split: f64,
    /// Independent expectation did not increase (slack `1e-9`).
    pub p3_independent_not_increased: bool,
    pub kappa_original: Option<f64>,
    pub kappa_split: Option<f64>,
    /// Gap did not decrease (slack `1e-6`).
    pub kappa_not_decreased: bool,
}

impl SplitReport {
    pub fn all_hold(&self) -> bool {
        self.p1_monotone && self.p2_worst_case_preserved && self.p3_independent_not_increased && self.kappa_not_decreased
    }
}

/// Checks monotonicity preservation, worst-case preservation and the
/// independent-expectation decrease on one split, by exact LP and enumeration.
pub fn verify_split_properties(inst: &Instance, counts: Vec<usize>) -> Result<SplitReport> {
    let (split, map) = split_instance(inst, counts)?;
    ensure_cap("split verification", map.split_size(), MAX_VERIFY_SPLIT_N)?;

    let original_monotone = is_monotone(&inst.function)?;
    let p1_monotone = is_monotone(&split.function)?;
    let worst_original = worst_case_lp(inst)?.value;
    let worst_split = worst_case_lp(&split)?.value;
    let independent_original = independent_expectation_exact(&inst.function, &inst.marginals)?;
    let independent_split = independent_expectation_exact(&split.function, &split.marginals)?;
    let kappa_original = kappa_of(worst_original, independent_original);
    let kappa_split = kappa_of(worst_split, independent_split);
    let kappa_not_decreased = match (kappa_original, kappa_split) {
        (Some(a), Some(b)) => b >= a - 1e-6,
        (None, None) => true,
        _ => false,
    };
    Ok(SplitReport {
        counts: map.counts().to_vec(),
        original_monotone,
        p1_monotone,
        worst_original,
        worst_split,
        p2_worst_case_preserved: (worst_original - worst_split).abs() <= 1e-6,
        independent_original,
        independent_split,
        p3_independent_not_increased: independent_split <= independent_original + 1e-9,
        kappa_original,
        kappa_split,
        kappa_not_decreased,
    })
}

/// One element split performed by [`reduce_to_partition`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitStep {
    pub element: usize,
    pub copies: usize,
    /// Expected value of the split distribution after this step.
    pub value_after: f64,
}

/// A worst-case distribution rewritten as `K` equally likely disjoint blocks of
/// a split ground set, each copy carrying marginal `1/K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReduction {
    pub k: usize,
    pub steps: Vec<SplitStep>,
    pub map: SplitMap,
    /// Block `b` is the set of copies labelled `b`; blocks may be empty.
    pub blocks: Vec<SubsetMask>,
    pub instance: Instance,
    /// `(1/K) sum_b f'(A_b)`.
    pub partition_value: f64,
}

/// Rewrites a distribution with rational masses as a partition-type
/// distribution on a split instance.
///
/// Every scenario of mass `m/K` becomes `m` blocks of mass `1/K`. Elements are
/// then processed in index order: an element found in `c > 1` blocks is split
/// into `c` copies, one per block. Requires every marginal to be positive and
/// every mass and marginal to be a multiple of `1/K` for some `K <= max_k`
/// (within `1e-7`).
pub fn reduce_to_partition(inst: &Instance, dist: &ScenarioDistribution, max_k: usize) -> Result<PartitionReduction> {
    inst.validate()?;
    let n = inst.n();
    dist.validate(n)?;
    if let Some(i) = inst.marginals.iter().position(|&p| p <= 0.0) {
        return Err(Error::invalid(format!("element {i} has zero marginal and cannot be placed in a block")));
    }
    let near_int = |x: f64| (x - x.round()).abs() <= 1e-7;
    let k = (1..=max_k)
        .find(|&k| {
            let kf = k as f64;
            dist.support.iter().all(|s| near_int(s.p * kf)) && inst.marginals.iter().all(|&p| near_int(p * kf))
        })
        .ok_or_else(|| Error::invalid(format!("no common denominator up to {max_k}")))?;

    let mut atoms: Vec<SubsetMask> = Vec::with_capacity(k);
    for s in &dist.support {
        let m = (s.p * k as f64).round() as usize;
        atoms.extend(std::iter::repeat_n(s.mask, m));
    }
    if atoms.len() != k {
        return Err(Error::invalid("scenario masses do not sum to one block count"));
    }
    for i in 0..n {
        let hits = atoms.iter().filter(|a| a.contains(i)).count();
        if hits as f64 != (inst.marginals[i] * k as f64).round() {
            return Err(Error::invalid(format!("distribution does not match marginal of element {i}")));
        }
    }

    let mut counts = vec![1usize; n];
    let mut steps = Vec::new();
    let base_value = atoms.iter().map(|&a| inst.function.value(a)).sum::<f64>() / k as f64;
    for i in 0..n {
        let hits = atoms.iter().filter(|a| a.contains(i)).count();
        if hits > 1 {
            counts[i] = hits;
            let map = SplitMap::new(counts.clone())?;
            let split = split_with_map(inst, map.clone());
            let blocks = label_blocks(&map, &atoms, i + 1);
            let value_after = blocks.iter().map(|&b| split.function.value(b)).sum::<f64>() / k as f64;
            steps.push(SplitStep { element: i, copies: hits, value_after });
        }
    }

    let map = SplitMap::new(counts)?;
    let blocks = label_blocks(&map, &atoms, n);
    let mut labels = vec![0usize; map.split_size()];
    for (b, block) in blocks.iter().enumerate() {
        for c in block.elements() {
            labels[c] = b;
        }
    }
    let map = map.with_partition(labels)?;
    let instance = split_with_map(inst, map.clone());
    let partition_value = blocks.iter().map(|&b| instance.function.value(b)).sum::<f64>() / k as f64;
    debug_assert!((partition_value - base_value).abs() <= 1e-9 * base_value.abs().max(1.0));
    Ok(PartitionReduction { k, steps, map, blocks, instance, partition_value })
}

// Blocks over the split ground set of `map`: the r-th atom containing element
// i (for i < processed) receives copy r of i; elements not yet processed keep
// their single copy in every atom.
fn label_blocks(map: &SplitMap, atoms: &[SubsetMask], processed: usize) -> Vec<SubsetMask> {
    let n = map.original_size();
    let mut next = vec![0usize; n];
    atoms
        .iter()
        .map(|atom| {
            let mut block = SubsetMask::EMPTY;
            for i in atom.elements() {
                let first = map.copies_of(i).elements().next().expect("at least one copy");
                let rank = if i < processed && map.counts()[i] > 1 {
                    let r = next[i];
                    next[i] += 1;
                    r
                } else {
                    0
                };
                block = block.with(first + rank);
            }
            block
        })
        .collect()
}
