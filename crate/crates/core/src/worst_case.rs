//! Worst-case expectation over all joint distributions with given marginals.

use serde::{Deserialize, Serialize};

use crate::distributions::{expectation_under, marginals_of, ScenarioDistribution, ScenarioMass, MASS_EPS};
use crate::error::{ensure_cap, Result};
use crate::model::{Instance, SubsetMask, MAX_EXACT_N};
use crate::simplex::{self, descending_order, LpOptions};

/// Tolerance used by [`verify_certificate`].
pub const CERTIFICATE_TOL: f64 = 1e-6;

/// Optimal primal distribution together with a dual certificate `(gamma, lambda)`
/// satisfying `f(S) - lambda(S) <= gamma` for every `S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseResult {
    pub value: f64,
    pub distribution: ScenarioDistribution,
    pub gamma: f64,
    pub lambda: Vec<f64>,
}

pub fn worst_case_lp(inst: &Instance) -> Result<WorstCaseResult> {
    worst_case_lp_with(inst, &LpOptions::default())
}

/// Solves the scenario LP exactly over all `2^n` subsets.
pub fn worst_case_lp_with(inst: &Instance, options: &LpOptions) -> Result<WorstCaseResult> {
    inst.validate()?;
    let n = inst.n();
    ensure_cap("worst-case LP", n, MAX_EXACT_N)?;
    let table = inst.function.table()?;
    let sol = simplex::solve(&table, &inst.marginals, options)?;

    let mut support: Vec<ScenarioMass> = sol
        .basis
        .iter()
        .zip(&sol.primal)
        .filter(|(_, &x)| x >= MASS_EPS)
        .map(|(&s, &x)| ScenarioMass { mask: SubsetMask(s), p: x })
        .collect();
    support.sort_by_key(|s| s.mask);
    let distribution = ScenarioDistribution { support };
    let value = expectation_under(&distribution, &inst.function);
    Ok(WorstCaseResult { value, distribution, gamma: sol.duals[n], lambda: sol.duals[..n].to_vec() })
}

/// Closed-form worst case for supermodular `f`: mass on the nested prefixes of
/// the elements sorted by decreasing marginal (ties by ascending index), with
/// the greedy dual `gamma = f(∅)`, `lambda_{(k)} = f(S_k) - f(S_{k-1})`.
///
/// The result is only optimal when `f` is supermodular; this function does not
/// check that.
pub fn supermodular_worst_case(inst: &Instance) -> Result<WorstCaseResult> {
    inst.validate()?;
    let n = inst.n();
    let p = &inst.marginals;
    let f = &inst.function;
    let order = descending_order(p);

    let mut support = Vec::with_capacity(n + 1);
    let mut lambda = vec![0.0; n];
    let gamma = f.value(SubsetMask::EMPTY);
    let mut prefix = SubsetMask::EMPTY;
    let mut prev = gamma;
    let mut value = (1.0 - p[order[0]]) * gamma;
    push_mass(&mut support, SubsetMask::EMPTY, 1.0 - p[order[0]]);
    for (k, &i) in order.iter().enumerate() {
        prefix = prefix.with(i);
        let fk = f.value(prefix);
        lambda[i] = fk - prev;
        prev = fk;
        let mass = match order.get(k + 1) {
            Some(&next) => p[i] - p[next],
            None => p[i],
        };
        value += mass * fk;
        push_mass(&mut support, prefix, mass);
    }
    Ok(WorstCaseResult { value, distribution: ScenarioDistribution { support }, gamma, lambda })
}

fn push_mass(support: &mut Vec<ScenarioMass>, mask: SubsetMask, p: f64) {
    if p >= MASS_EPS {
        support.push(ScenarioMass { mask, p });
    }
}

/// Largest violations of each optimality condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateCheck {
    /// Most negative mass (as a positive number), or 0.
    pub negative_mass: f64,
    pub normalization_residual: f64,
    pub marginal_residual: f64,
    /// `max_S f(S) - lambda(S) - gamma`, clamped below at 0.
    pub dual_violation: f64,
    /// `|E_alpha[f] - value|`.
    pub primal_objective_gap: f64,
    /// `|gamma + p . lambda - value|`.
    pub dual_objective_gap: f64,
}

impl CertificateCheck {
    pub fn holds(&self, tol: f64) -> bool {
        [
            self.negative_mass,
            self.normalization_residual,
            self.marginal_residual,
            self.dual_violation,
            self.primal_objective_gap,
            self.dual_objective_gap,
        ]
        .iter()
        .all(|&v| v <= tol)
    }
}

pub fn check_certificate(inst: &Instance, r: &WorstCaseResult) -> Result<CertificateCheck> {
    inst.validate()?;
    let n = inst.n();
    ensure_cap("certificate check", n, MAX_EXACT_N)?;
    let table = inst.function.table()?;
    let p = &inst.marginals;

    let negative_mass = r.distribution.support.iter().map(|s| (-s.p).max(0.0)).fold(0.0, f64::max);
    let out_of_range = r.distribution.support.iter().any(|s| s.mask.index() >= table.len());
    let normalization_residual = (r.distribution.total_mass() - 1.0).abs();
    let marginal_residual = if out_of_range || r.lambda.len() != n {
        f64::INFINITY
    } else {
        marginals_of(&r.distribution, n).iter().zip(p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    if marginal_residual.is_infinite() {
        return Ok(CertificateCheck {
            negative_mass,
            normalization_residual,
            marginal_residual,
            dual_violation: f64::INFINITY,
            primal_objective_gap: f64::INFINITY,
            dual_objective_gap: f64::INFINITY,
        });
    }

    let mut sums = vec![0.0f64; table.len()];
    let mut dual_violation = 0.0f64;
    for s in 0..table.len() {
        if s > 0 {
            sums[s] = sums[s & (s - 1)] + r.lambda[s.trailing_zeros() as usize];
        }
        dual_violation = dual_violation.max(table[s] - sums[s] - r.gamma);
    }
    let expectation: f64 = r.distribution.support.iter().map(|s| s.p * table[s.mask.index()]).sum();
    let dual_objective = r.gamma + p.iter().zip(&r.lambda).map(|(a, b)| a * b).sum::<f64>();
    Ok(CertificateCheck {
        negative_mass,
        normalization_residual,
        marginal_residual,
        dual_violation,
        primal_objective_gap: (expectation - r.value).abs(),
        dual_objective_gap: (dual_objective - r.value).abs(),
    })
}

/// Primal feasibility, dual feasibility and equal objectives, within `1e-6`.
pub fn verify_certificate(inst: &Instance, r: &WorstCaseResult) -> Result<bool> {
    Ok(check_certificate(inst, r)?.holds(CERTIFICATE_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SetFunction;

    fn threshold(n: usize) -> SetFunction {
        SetFunction::from_fn(n, |s| (!s.is_empty()) as u8 as f64).unwrap()
    }

    fn squares() -> Instance {
        let f = SetFunction::from_fn(3, |s| (s.len() * s.len()) as f64).unwrap();
        Instance::new(f, vec![0.8, 0.5, 0.3]).unwrap()
    }

    #[test]
    fn threshold_worst_case_is_singletons() {
        let inst = Instance::uniform(threshold(3), 1.0 / 3.0).unwrap();
        let r = worst_case_lp(&inst).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert_eq!(r.distribution.support.len(), 3);
        for s in &r.distribution.support {
            assert_eq!(s.mask.len(), 1);
            assert!((s.p - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(verify_certificate(&inst, &r).unwrap());
    }

    #[test]
    fn supermodular_closed_form_matches_hand_value() {
        let inst = squares();
        let r = supermodular_worst_case(&inst).unwrap();
        assert!((r.value - 3.8).abs() < 1e-12);
        assert!(verify_certificate(&inst, &r).unwrap());
        let lp = worst_case_lp(&inst).unwrap();
        assert!((lp.value - 3.8).abs() < 1e-9);
    }

    #[test]
    fn closed_form_point_mass_on_full_set() {
        let f = SetFunction::TwoStageFlow { n: 5, x: 2 };
        let inst = Instance::uniform(f.clone(), 1.0).unwrap();
        let r = supermodular_worst_case(&inst).unwrap();
        assert_eq!(r.value, f.value(SubsetMask::full(5)));
        assert_eq!(r.distribution.support, vec![ScenarioMass { mask: SubsetMask::full(5), p: 1.0 }]);
    }

    #[test]
    fn two_stage_flow_extreme_distribution() {
        let inst = Instance::uniform(SetFunction::TwoStageFlow { n: 4, x: 3 }, 0.5).unwrap();
        let r = supermodular_worst_case(&inst).unwrap();
        assert_eq!(r.value, 11.0);
        assert_eq!(r.distribution.support.len(), 2);
        assert_eq!(r.distribution.mass_of(SubsetMask::full(4)), 0.5);
        assert_eq!(r.distribution.mass_of(SubsetMask::EMPTY), 0.5);
        let lp = worst_case_lp(&inst).unwrap();
        assert!((lp.value - 11.0).abs() < 1e-9);
    }

    #[test]
    fn perturbed_dual_fails_verification() {
        let inst = squares();
        let mut r = worst_case_lp(&inst).unwrap();
        assert!(verify_certificate(&inst, &r).unwrap());
        r.lambda[0] += 1.0;
        assert!(!verify_certificate(&inst, &r).unwrap());
    }

    #[test]
    fn degenerate_marginals() {
        let f = SetFunction::from_fn(4, |s| (s.bits() as f64).sqrt()).unwrap();
        let inst = Instance::new(f, vec![0.0, 1.0, 0.5, 1.0]).unwrap();
        let r = worst_case_lp(&inst).unwrap();
        assert!(verify_certificate(&inst, &r).unwrap());
        // elements 1 and 3 always present, element 0 never
        for s in &r.distribution.support {
            assert!(s.mask.contains(1) && s.mask.contains(3) && !s.mask.contains(0));
        }
    }

    #[test]
    fn support_is_basic() {
        let f = SetFunction::from_fn(6, |s| (s.bits().wrapping_mul(2654435761u32) % 97) as f64).unwrap();
        let inst = Instance::new(f, vec![0.1, 0.9, 0.35, 0.5, 0.77, 0.2]).unwrap();
        let r = worst_case_lp(&inst).unwrap();
        assert!(r.distribution.support.len() <= 7);
        assert!(verify_certificate(&inst, &r).unwrap());
    }

    #[test]
    fn result_json_has_expected_fields() {
        let r = worst_case_lp(&squares()).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in ["value", "distribution", "gamma", "lambda"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(v["distribution"]["support"][0].get("mask").is_some());
    }
}
