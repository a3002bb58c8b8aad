//! Reference computations used by the integration tests. None of these call
//! into the library's solvers; they work from raw value tables.

#![allow(dead_code)]

use corrgap::worst_case::WorstCaseResult;

/// Probability of the scenario `mask` under independent marginals `p`.
pub fn product_probability(mask: usize, p: &[f64]) -> f64 {
    p.iter()
        .enumerate()
        .map(|(i, &pi)| if mask >> i & 1 == 1 { pi } else { 1.0 - pi })
        .product()
}

/// `E[f(S)]` with each element present independently, by listing all scenarios.
pub fn product_expectation(table: &[f64], p: &[f64]) -> f64 {
    assert_eq!(table.len(), 1 << p.len());
    table.iter().enumerate().map(|(mask, &v)| v * product_probability(mask, p)).sum()
}

/// Worst-case expectation of a supermodular function: mass `p_(k) - p_(k+1)`
/// on the `k` largest-marginal elements.
pub fn nested_chain_value(table: &[f64], p: &[f64]) -> f64 {
    let n = p.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p[b].partial_cmp(&p[a]).unwrap());
    let sorted: Vec<f64> = order.iter().map(|&i| p[i]).collect();
    let mut value = (1.0 - sorted.first().copied().unwrap_or(0.0)) * table[0];
    let mut mask = 0usize;
    for k in 0..n {
        mask |= 1 << order[k];
        let next = sorted.get(k + 1).copied().unwrap_or(0.0);
        value += (sorted[k] - next) * table[mask];
    }
    value
}

/// Largest violation of primal feasibility, dual feasibility and strong
/// duality for a claimed optimum of `max E[f]` subject to the marginals.
pub fn certificate_violation(table: &[f64], p: &[f64], r: &WorstCaseResult) -> f64 {
    let n = p.len();
    let mut worst: f64 = 0.0;
    let mut total = 0.0;
    let mut marg = vec![0.0; n];
    let mut objective = 0.0;
    for m in &r.distribution.support {
        let mask = m.mask.bits() as usize;
        worst = worst.max(-m.p);
        total += m.p;
        objective += m.p * table[mask];
        for (i, x) in marg.iter_mut().enumerate() {
            if mask >> i & 1 == 1 {
                *x += m.p;
            }
        }
    }
    worst = worst.max((total - 1.0).abs());
    for i in 0..n {
        worst = worst.max((marg[i] - p[i]).abs());
    }
    worst = worst.max((objective - r.value).abs());
    for (mask, &v) in table.iter().enumerate() {
        let lam: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| r.lambda[i]).sum();
        worst = worst.max(v - lam - r.gamma);
    }
    let dual: f64 = r.gamma + (0..n).map(|i| p[i] * r.lambda[i]).sum::<f64>();
    worst.max((dual - r.value).abs())
}

/// Binomial(trials, q) probabilities by Pascal's rule.
pub fn binomial_pmf(trials: usize, q: f64) -> Vec<f64> {
    let mut pmf = vec![1.0];
    for _ in 0..trials {
        let mut next = vec![0.0; pmf.len() + 1];
        for (j, &w) in pmf.iter().enumerate() {
            next[j] += w * (1.0 - q);
            next[j + 1] += w * q;
        }
        pmf = next;
    }
    pmf
}

/// `E[max]` of `count` independent Binomial(trials, q) counts, by listing
/// every tuple of outcomes.
pub fn max_of_binomials_by_tuples(count: usize, trials: usize, q: f64) -> f64 {
    let pmf = binomial_pmf(trials, q);
    let base = trials + 1;
    let tuples = base.pow(count as u32);
    let mut e = 0.0;
    for code in 0..tuples {
        let (mut c, mut prob, mut max) = (code, 1.0, 0);
        for _ in 0..count {
            let v = c % base;
            c /= base;
            prob *= pmf[v];
            max = max.max(v);
        }
        e += prob * max as f64;
    }
    e
}

/// `E[max of m Poisson(1)] = sum_k k (F(k)^m - F(k-1)^m)`.
pub fn poisson_max_by_cdf(m: f64) -> f64 {
    let mut pmf = (-1.0f64).exp();
    let mut cdf = pmf;
    let mut prev_pow = 0.0;
    let mut e = 0.0;
    for k in 0..200 {
        if k > 0 {
            pmf /= k as f64;
            cdf += pmf;
        }
        let pow = cdf.min(1.0).powf(m);
        e += k as f64 * (pow - prev_pow);
        prev_pow = pow;
    }
    e
}

/// Best split of goods `0..n` among `k` players, by depth-first search.
pub fn welfare_by_search(table: &[f64], n: usize, k: usize) -> f64 {
    fn go(table: &[f64], n: usize, good: usize, bundles: &mut Vec<usize>) -> f64 {
        if good == n {
            return bundles.iter().map(|&b| table[b]).sum();
        }
        let mut best = f64::NEG_INFINITY;
        for j in 0..bundles.len() {
            bundles[j] |= 1 << good;
            best = best.max(go(table, n, good + 1, bundles));
            bundles[j] &= !(1 << good);
        }
        best
    }
    go(table, n, 0, &mut vec![0; k])
}

/// Full value table of a function through its public oracle.
pub fn table_of(f: &corrgap::SetFunction) -> Vec<f64> {
    (0..1usize << f.n()).map(|m| f.value(corrgap::SubsetMask(m as u32))).collect()
}
