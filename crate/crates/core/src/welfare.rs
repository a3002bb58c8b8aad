//! Welfare maximization with `K` players sharing one utility function `f`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::independent_expectation_exact;
use crate::error::{Error, Result};
use crate::model::{Instance, SetFunction, SubsetMask, MAX_EXACT_N};
use crate::worst_case::worst_case_lp;

/// Largest `K^n` scanned by [`welfare_ip_bruteforce`].
pub const MAX_ASSIGNMENTS: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub welfare: f64,
    /// Player receiving each good.
    pub owner: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelfareReport {
    pub n: usize,
    pub k: usize,
    pub opt_ip: f64,
    pub best_allocation: Vec<usize>,
    /// `K` times the worst-case expectation at marginals `1/K`.
    pub upper_bound: f64,
    /// Expected welfare of assigning each good to a uniformly random player.
    pub rounding_value: f64,
    pub ratio_rounding_over_opt: Option<f64>,
    pub ratio_opt_over_upper: Option<f64>,
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("need at least one player"));
    }
    Ok(())
}

/// Best assignment of every good to one of `k` players, maximizing the sum of
/// the players' values. Ties go to the assignment with the smallest base-`k`
/// index (good 0 least significant).
pub fn welfare_ip_bruteforce(f: &SetFunction, k: usize) -> Result<Allocation> {
    check_k(k)?;
    f.validate()?;
    let n = f.n();
    let total = (k as u64).checked_pow(n as u32).filter(|&t| t <= MAX_ASSIGNMENTS).ok_or(Error::TooLarge {
        what: "welfare enumeration (K^n)",
        n,
        cap: MAX_ASSIGNMENTS as usize,
    })?;
    let table = if n <= MAX_EXACT_N { Some(f.table()?) } else { None };
    let value = |s: SubsetMask| match &table {
        Some(t) => t[s.index()],
        None => f.value(s),
    };

    let (welfare, index) = (0..total)
        .into_par_iter()
        .map(|code| {
            let mut blocks = vec![SubsetMask::EMPTY; k];
            let mut c = code;
            for good in 0..n {
                let owner = (c % k as u64) as usize;
                c /= k as u64;
                blocks[owner] = blocks[owner].with(good);
            }
            (blocks.iter().map(|&b| value(b)).sum::<f64>(), code)
        })
        .reduce(
            || (f64::NEG_INFINITY, u64::MAX),
            |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );

    let mut owner = Vec::with_capacity(n);
    let mut c = index;
    for _ in 0..n {
        owner.push((c % k as u64) as usize);
        c /= k as u64;
    }
    Ok(Allocation { welfare, owner })
}

fn uniform_instance(f: &SetFunction, k: usize) -> Result<Instance> {
    check_k(k)?;
    Instance::uniform(f.clone(), 1.0 / k as f64)
}

/// `K * L` at marginals `1/K`; bounds the integer optimum from above.
pub fn welfare_upper_bound(f: &SetFunction, k: usize) -> Result<f64> {
    Ok(k as f64 * worst_case_lp(&uniform_instance(f, k)?)?.value)
}

/// `K * I` at marginals `1/K`.
pub fn rounding_value(f: &SetFunction, k: usize) -> Result<f64> {
    let inst = uniform_instance(f, k)?;
    Ok(k as f64 * independent_expectation_exact(&inst.function, &inst.marginals)?)
}

pub fn welfare_report(f: &SetFunction, k: usize) -> Result<WelfareReport> {
    let best = welfare_ip_bruteforce(f, k)?;
    let upper_bound = welfare_upper_bound(f, k)?;
    let rounding = rounding_value(f, k)?;
    let ratio = |a: f64, b: f64| (b.abs() > 1e-12).then(|| a / b);
    Ok(WelfareReport {
        n: f.n(),
        k,
        opt_ip: best.welfare,
        best_allocation: best.owner,
        upper_bound,
        rounding_value: rounding,
        ratio_rounding_over_opt: ratio(rounding, best.welfare),
        ratio_opt_over_upper: ratio(best.welfare, upper_bound),
    })
}
