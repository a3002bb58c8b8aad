//! Ordered cost-sharing schemes `chi(i, S, sigma_S)` and their exhaustive
//! certification on small ground sets.
//!
//! Certification skips `S = ∅`: there is nobody to charge, so no condition on
//! shares applies there.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_cap, Error, Result};
use crate::model::{SetFunction, SubsetMask};
use crate::split::SplitMap;

/// Largest ground set accepted by the exhaustive certifiers.
pub const MAX_CERTIFY_N: usize = 6;

const SHARE_TOL: f64 = 1e-9;

/// A subset together with an ordering of its members.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderedSet {
    mask: SubsetMask,
    order: Vec<usize>,
}

impl OrderedSet {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut mask = SubsetMask::EMPTY;
        for &i in &order {
            if i >= 32 || mask.contains(i) {
                return Err(Error::invalid(format!("ordering repeats or overflows at element {i}")));
            }
            mask = mask.with(i);
        }
        Ok(OrderedSet { mask, order })
    }

    /// Members in increasing index order.
    pub fn ascending(mask: SubsetMask) -> Self {
        OrderedSet { mask, order: mask.elements().collect() }
    }

    pub fn mask(&self) -> SubsetMask {
        self.mask
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// First `l` members.
    pub fn prefix(&self, l: usize) -> OrderedSet {
        let order = self.order[..l].to_vec();
        OrderedSet { mask: SubsetMask::from_elements(order.iter().copied()), order }
    }

    /// The ordering restricted to `mask ∩ self`.
    pub fn restrict(&self, mask: SubsetMask) -> OrderedSet {
        let order: Vec<usize> = self.order.iter().copied().filter(|&i| mask.contains(i)).collect();
        OrderedSet { mask: self.mask.intersection(mask), order }
    }
}

pub trait CostShareScheme: Sync {
    /// Size of the ground set the scheme is defined on.
    fn n(&self) -> usize;
    /// Share charged to `i`, a member of `s`.
    fn share(&self, i: usize, s: &OrderedSet) -> f64;
    fn declared_eta(&self) -> f64;
    fn declared_beta(&self) -> f64;
}

/// `chi(i, S, sigma) = f(S_j) - f(S_{j-1})` where `i` is the `j`-th member.
#[derive(Debug, Clone)]
pub struct IncrementalScheme {
    f: SetFunction,
}

pub fn incremental_scheme(f: SetFunction) -> IncrementalScheme {
    IncrementalScheme { f }
}

impl IncrementalScheme {
    pub fn function(&self) -> &SetFunction {
        &self.f
    }
}

impl CostShareScheme for IncrementalScheme {
    fn n(&self) -> usize {
        self.f.n()
    }

    fn share(&self, i: usize, s: &OrderedSet) -> f64 {
        let mut prefix = SubsetMask::EMPTY;
        for &j in s.order() {
            if j == i {
                return self.f.value(prefix.with(i)) - self.f.value(prefix);
            }
            prefix = prefix.with(j);
        }
        debug_assert!(false, "element {i} not in {:?}", s.mask());
        0.0
    }

    fn declared_eta(&self) -> f64 {
        1.0
    }

    fn declared_beta(&self) -> f64 {
        1.0
    }
}

/// A scheme given by a closure, mostly for experiments and tests.
pub struct FnScheme<F> {
    pub n: usize,
    pub eta: f64,
    pub beta: f64,
    pub share: F,
}

impl<F: Fn(usize, &OrderedSet) -> f64 + Sync> CostShareScheme for FnScheme<F> {
    fn n(&self) -> usize {
        self.n
    }

    fn share(&self, i: usize, s: &OrderedSet) -> f64 {
        (self.share)(i, s)
    }

    fn declared_eta(&self) -> f64 {
        self.eta
    }

    fn declared_beta(&self) -> f64 {
        self.beta
    }
}

/// Shares of a scheme on a split ground set: only the first copy of each
/// original element in the ordering is charged, and it pays what the original
/// element would pay on the projected set ordered by first copies.
pub struct LiftedScheme<S> {
    base: S,
    map: SplitMap,
}

pub fn lift_scheme<S: CostShareScheme>(base: S, map: SplitMap) -> Result<LiftedScheme<S>> {
    map.validate()?;
    if map.original_size() != base.n() {
        return Err(Error::invalid(format!(
            "split map covers {} elements but the scheme has {}",
            map.original_size(),
            base.n()
        )));
    }
    Ok(LiftedScheme { base, map })
}

impl<S> LiftedScheme<S> {
    pub fn map(&self) -> &SplitMap {
        &self.map
    }

    pub fn base(&self) -> &S {
        &self.base
    }

    /// The original elements of the first copies in `s`, in `s` order, and the
    /// first copy of each original element.
    fn representatives(&self, s: &OrderedSet) -> (OrderedSet, Vec<Option<usize>>) {
        let mut first = vec![None; self.map.original_size()];
        let mut order = Vec::new();
        for &c in s.order() {
            let i = self.map.original_of(c);
            if first[i].is_none() {
                first[i] = Some(c);
                order.push(i);
            }
        }
        (OrderedSet { mask: SubsetMask::from_elements(order.iter().copied()), order }, first)
    }
}

impl<S: CostShareScheme> CostShareScheme for LiftedScheme<S> {
    fn n(&self) -> usize {
        self.map.split_size()
    }

    fn share(&self, c: usize, s: &OrderedSet) -> f64 {
        let i = self.map.original_of(c);
        let (projected, first) = self.representatives(s);
        if first[i] == Some(c) {
            self.base.share(i, &projected)
        } else {
            0.0
        }
    }

    fn declared_eta(&self) -> f64 {
        self.base.declared_eta()
    }

    fn declared_beta(&self) -> f64 {
        self.base.declared_beta()
    }
}

/// A violation of cross-monotonicity: `chi(element, s) < chi(element, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossMonotoneWitness {
    pub element: usize,
    pub s: OrderedSet,
    pub t: OrderedSet,
    pub share_in_s: f64,
    pub share_in_t: f64,
}

/// Exact constants of a scheme over every nonempty `S` and every ordering.
///
/// `None` in a constant means no finite value works.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub n: usize,
    pub declared_eta: f64,
    pub declared_beta: f64,
    /// Smallest `beta >= 1` with `f(S) >= sum chi >= f(S)/beta`.
    pub beta_star: Option<f64>,
    /// `max (sum chi - f(S))`, clamped at 0; positive means the upper arm of
    /// budget balance fails.
    pub over_recovery: f64,
    /// `max sum_l chi(i_l, S_l) / f(S)` over all `S`.
    pub eta_star: Option<f64>,
    /// The same ratio restricted to `S = V`.
    pub eta_star_full_set: Option<f64>,
    pub cross_monotone: bool,
    pub cross_monotone_witness: Option<CrossMonotoneWitness>,
}

impl Certification {
    /// Whether the measured constants are within the declared ones.
    pub fn meets_declared(&self) -> bool {
        let within = |v: Option<f64>, d: f64| v.is_some_and(|v| v <= d + SHARE_TOL);
        within(self.beta_star, self.declared_beta) && within(self.eta_star, self.declared_eta) && self.cross_monotone
    }
}

#[derive(Default, Clone, Copy)]
struct Ratios {
    beta: f64,
    beta_unbounded: bool,
    over: f64,
    eta: f64,
    eta_unbounded: bool,
}

impl Ratios {
    fn merge(self, o: Ratios) -> Ratios {
        Ratios {
            beta: self.beta.max(o.beta),
            beta_unbounded: self.beta_unbounded || o.beta_unbounded,
            over: self.over.max(o.over),
            eta: self.eta.max(o.eta),
            eta_unbounded: self.eta_unbounded || o.eta_unbounded,
        }
    }
}

pub fn certify<S: CostShareScheme>(scheme: &S, f: &SetFunction) -> Result<Certification> {
    let n = check_sizes(scheme, f)?;
    let full = SubsetMask::full(n);

    let per_set = |s: SubsetMask| -> (Ratios, Option<CrossMonotoneWitness>) {
        let fs = f.value(s);
        let scale = fs.abs().max(1.0) * SHARE_TOL;
        let mut r = Ratios { beta: 1.0, ..Ratios::default() };
        let mut witness = None;
        for sigma in orderings(s) {
            let total: f64 = sigma.order().iter().map(|&i| scheme.share(i, &sigma)).sum();
            r.over = r.over.max(total - fs);
            if total > fs + scale {
                r.beta_unbounded = true;
            } else if fs > scale {
                if total <= scale {
                    r.beta_unbounded = true;
                } else {
                    r.beta = r.beta.max(fs / total);
                }
            } else if total < -scale {
                r.beta_unbounded = true;
            }

            let summed: f64 = (1..=sigma.len()).map(|l| scheme.share(sigma.order()[l - 1], &sigma.prefix(l))).sum();
            if fs > scale {
                r.eta = r.eta.max(summed / fs);
            } else if summed > scale {
                r.eta_unbounded = true;
            }

            if witness.is_none() {
                witness = cross_monotone_violation(scheme, &sigma, |_| true);
            }
        }
        (r, witness)
    };

    let results: Vec<(SubsetMask, Ratios, Option<CrossMonotoneWitness>)> = (1..1u32 << n)
        .into_par_iter()
        .map(|bits| {
            let s = SubsetMask(bits);
            let (r, w) = per_set(s);
            (s, r, w)
        })
        .collect();

    let mut all = Ratios { beta: 1.0, ..Ratios::default() };
    let mut full_ratios = None;
    let mut witness = None;
    for (s, r, w) in results {
        all = all.merge(r);
        if s == full {
            full_ratios = Some(r);
        }
        if witness.is_none() {
            witness = w;
        }
    }
    let finite = |v: f64, unbounded: bool| (!unbounded).then_some(v);
    let eta_star_full_set = full_ratios.and_then(|r| finite(r.eta, r.eta_unbounded));
    Ok(Certification {
        n,
        declared_eta: scheme.declared_eta(),
        declared_beta: scheme.declared_beta(),
        beta_star: finite(all.beta, all.beta_unbounded),
        over_recovery: all.over.max(0.0),
        eta_star: finite(all.eta, all.eta_unbounded),
        eta_star_full_set,
        cross_monotone: witness.is_none(),
        cross_monotone_witness: witness,
    })
}

/// Result of checking cross-monotonicity only on partial-prefix pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialPrefixCheck {
    /// Number of `(S', T', sigma_T')` triples examined.
    pub pairs_checked: usize,
    pub holds: bool,
    pub witness: Option<CrossMonotoneWitness>,
}

/// Cross-monotonicity of a lifted scheme restricted to orderings `sigma_T'`
/// that list blocks in decreasing label order and to `S' ⊆ T'` for which some
/// label `k` has every member of `S'` labelled `>= k` and every member of
/// `T' \ S'` labelled `<= k`.
pub fn certify_partial_prefix<S: CostShareScheme>(scheme: &LiftedScheme<S>) -> Result<PartialPrefixCheck> {
    let n = scheme.n();
    ensure_cap("partial-prefix certification", n, MAX_CERTIFY_N)?;
    let labels = scheme
        .map()
        .partition()
        .ok_or_else(|| Error::invalid("partial-prefix check needs a split map with block labels"))?
        .to_vec();

    let respects = |sigma: &OrderedSet| sigma.order().windows(2).all(|w| labels[w[0]] >= labels[w[1]]);
    let is_partial_prefix = |s: SubsetMask, t: SubsetMask| {
        let low = s.elements().map(|c| labels[c]).min();
        let high = t.difference(s).elements().map(|c| labels[c]).max();
        match (low, high) {
            (Some(l), Some(h)) => l >= h,
            _ => true,
        }
    };

    let results: Vec<(usize, Option<CrossMonotoneWitness>)> = (1..1u32 << n)
        .into_par_iter()
        .map(|bits| {
            let t = SubsetMask(bits);
            let mut pairs = 0;
            let mut witness = None;
            for sigma in orderings(t).filter(|s| respects(s)) {
                pairs += t.subsets().filter(|&s| !s.is_empty() && is_partial_prefix(s, t)).count();
                if witness.is_none() {
                    witness = cross_monotone_violation(scheme, &sigma, |s| is_partial_prefix(s, t));
                }
            }
            (pairs, witness)
        })
        .collect();

    let pairs_checked = results.iter().map(|r| r.0).sum();
    let witness = results.into_iter().find_map(|r| r.1);
    Ok(PartialPrefixCheck { pairs_checked, holds: witness.is_none(), witness })
}

// First `i ∈ S ⊆ T` (over admissible nonempty `S`) with
// `chi(i, S, sigma_T|S) < chi(i, T, sigma_T)`.
fn cross_monotone_violation<S: CostShareScheme>(
    scheme: &S,
    sigma_t: &OrderedSet,
    admissible: impl Fn(SubsetMask) -> bool,
) -> Option<CrossMonotoneWitness> {
    let t = sigma_t.mask();
    let in_t: Vec<(usize, f64)> = sigma_t.order().iter().map(|&i| (i, scheme.share(i, sigma_t))).collect();
    for s in t.subsets() {
        if s.is_empty() || s == t || !admissible(s) {
            continue;
        }
        let sigma_s = sigma_t.restrict(s);
        for &(i, share_t) in &in_t {
            if !s.contains(i) {
                continue;
            }
            let share_s = scheme.share(i, &sigma_s);
            if share_s < share_t - SHARE_TOL {
                return Some(CrossMonotoneWitness {
                    element: i,
                    s: sigma_s,
                    t: sigma_t.clone(),
                    share_in_s: share_s,
                    share_in_t: share_t,
                });
            }
        }
    }
    None
}

fn check_sizes<S: CostShareScheme>(scheme: &S, f: &SetFunction) -> Result<usize> {
    let n = f.n();
    ensure_cap("cost-share certification", n, MAX_CERTIFY_N)?;
    f.validate()?;
    if scheme.n() != n {
        return Err(Error::invalid(format!("scheme is on {} elements but f is on {n}", scheme.n())));
    }
    Ok(n)
}

/// Every ordering of `mask`, starting from the ascending one, in
/// lexicographic order.
pub fn orderings(mask: SubsetMask) -> impl Iterator<Item = OrderedSet> {
    let mut next: Option<Vec<usize>> = Some(mask.elements().collect());
    std::iter::from_fn(move || {
        let current = next.take()?;
        let mut following = current.clone();
        if next_permutation(&mut following) {
            next = Some(following);
        }
        Some(OrderedSet { mask, order: current })
    })
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).expect("suffix has a larger element");
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::split::SplitMap;

    fn min2(n: usize) -> SetFunction {
        SetFunction::from_fn(n, |s| s.len().min(2) as f64).unwrap()
    }

    #[test]
    fn ordering_count_and_uniqueness() {
        let all: Vec<_> = orderings(SubsetMask::from_elements([0, 2, 3, 5])).collect();
        assert_eq!(all.len(), 24);
        let unique: std::collections::HashSet<_> = all.iter().map(|o| o.order().to_vec()).collect();
        assert_eq!(unique.len(), 24);
        assert_eq!(orderings(SubsetMask::EMPTY).count(), 1);
    }

    #[test]
    fn ordered_set_rejects_repeats() {
        assert!(OrderedSet::new(vec![1, 0, 1]).is_err());
        let o = OrderedSet::new(vec![3, 0, 2]).unwrap();
        assert_eq!(o.restrict(SubsetMask::from_elements([0, 3])).order(), &[3, 0]);
        assert_eq!(o.prefix(2).mask(), SubsetMask::from_elements([0, 3]));
    }

    #[test]
    fn incremental_shares_on_min2() {
        let chi = incremental_scheme(min2(3));
        let s = OrderedSet::new(vec![0, 1, 2]).unwrap();
        let shares: Vec<f64> = (0..3).map(|i| chi.share(i, &s)).collect();
        assert_eq!(shares, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn incremental_on_threshold_charges_first() {
        let chi = incremental_scheme(SetFunction::from_fn(4, |s| (!s.is_empty()) as u8 as f64).unwrap());
        let s = OrderedSet::new(vec![2, 0, 3]).unwrap();
        assert_eq!(chi.share(2, &s), 1.0);
        assert_eq!(chi.share(0, &s), 0.0);
        assert_eq!(chi.share(3, &s), 0.0);
    }

    #[test]
    fn certify_submodular() {
        let f = min2(4);
        let c = certify(&incremental_scheme(f.clone()), &f).unwrap();
        assert_eq!(c.beta_star, Some(1.0));
        assert_eq!(c.eta_star, Some(1.0));
        assert_eq!(c.eta_star_full_set, Some(1.0));
        assert!(c.cross_monotone);
        assert!(c.meets_declared());
    }

    #[test]
    fn squares_are_not_cross_monotone() {
        let f = SetFunction::from_fn(3, |s| (s.len() * s.len()) as f64).unwrap();
        let c = certify(&incremental_scheme(f.clone()), &f).unwrap();
        assert!(!c.cross_monotone);
        let w = c.cross_monotone_witness.unwrap();
        assert!(w.share_in_s < w.share_in_t);
        assert!(w.s.mask().is_subset_of(w.t.mask()));
    }

    #[test]
    fn zero_scheme_has_unbounded_beta() {
        let f = min2(3);
        let zero = FnScheme { n: 3, eta: 1.0, beta: 1.0, share: |_: usize, _: &OrderedSet| 0.0 };
        let c = certify(&zero, &f).unwrap();
        assert_eq!(c.beta_star, None);
        assert_eq!(c.eta_star, Some(0.0));
        assert!(!c.meets_declared());
    }

    #[test]
    fn over_charging_is_reported() {
        let f = min2(3);
        let double = FnScheme { n: 3, eta: 1.0, beta: 1.0, share: |_: usize, _: &OrderedSet| 1.0 };
        let c = certify(&double, &f).unwrap();
        assert!((c.over_recovery - 1.0).abs() < 1e-12);
        assert_eq!(c.beta_star, None);
    }

    #[test]
    fn certify_caps_and_mismatch() {
        let f = min2(7);
        assert!(certify(&incremental_scheme(f.clone()), &f).unwrap_err().is_size_cap());
        assert!(certify(&incremental_scheme(min2(3)), &min2(4)).is_err());
    }

    #[test]
    fn lift_without_duplicates_is_identity() {
        let f = SetFunction::from_fn(3, |s| (s.bits() as f64).sqrt()).unwrap();
        let map = SplitMap::new(vec![2, 1, 2]).unwrap();
        let lifted = lift_scheme(incremental_scheme(f.clone()), map.clone()).unwrap();
        let base = incremental_scheme(f);
        // copies: 0,1 -> 0; 2 -> 1; 3,4 -> 2
        let s = OrderedSet::new(vec![4, 0, 2]).unwrap();
        let projected = OrderedSet::new(vec![2, 0, 1]).unwrap();
        for &c in s.order() {
            assert_eq!(lifted.share(c, &s), base.share(map.original_of(c), &projected));
        }
    }

    #[test]
    fn lift_charges_one_copy() {
        let f = SetFunction::from_fn(2, |s| 1.0 + s.len() as f64).unwrap();
        let map = SplitMap::new(vec![3, 1]).unwrap();
        let lifted = lift_scheme(incremental_scheme(f), map).unwrap();
        let s = OrderedSet::new(vec![3, 2, 0, 1]).unwrap();
        let shares: Vec<f64> = s.order().iter().map(|&c| lifted.share(c, &s)).collect();
        assert_eq!(shares, vec![1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn lift_rejects_wrong_size() {
        let map = SplitMap::new(vec![2, 2]).unwrap();
        assert!(lift_scheme(incremental_scheme(min2(3)), map).is_err());
    }

    #[test]
    fn partial_prefix_needs_labels() {
        let map = SplitMap::new(vec![2, 1]).unwrap();
        let lifted = lift_scheme(incremental_scheme(min2(2)), map).unwrap();
        assert!(certify_partial_prefix(&lifted).is_err());
    }

    #[test]
    fn lifted_threshold_partial_prefix() {
        let f = SetFunction::from_fn(3, |s| (!s.is_empty()) as u8 as f64).unwrap();
        let map = SplitMap::new(vec![2, 2, 1]).unwrap().with_partition(vec![0, 1, 1, 0, 1]).unwrap();
        let lifted = lift_scheme(incremental_scheme(f.clone()), map.clone()).unwrap();
        let check = certify_partial_prefix(&lifted).unwrap();
        assert!(check.holds);
        assert!(check.pairs_checked > 0);
        let split_f = SetFunction::Split { base: Box::new(f), map };
        let c = certify(&lifted, &split_f).unwrap();
        assert_eq!(c.beta_star, Some(1.0));
        assert_eq!(c.eta_star, Some(1.0));
    }

    #[test]
    fn certification_json() {
        let f = min2(2);
        let c = certify(&incremental_scheme(f.clone()), &f).unwrap();
        let v = serde_json::to_value(&c).unwrap();
        assert_eq!(v["beta_star"], 1.0);
        assert_eq!(v["cross_monotone"], true);
        assert!(v["cross_monotone_witness"].is_null());
    }
}
