//! Regression suite: the expected facts of the built-in instances plus seeded
//! property suites. Everything here is deterministic, so two runs produce the
//! same report.

use serde::{Deserialize, Serialize};

use crate::correlation_gap::{correlation_gap, e_over_e_minus_one};
use crate::cost_sharing::{certify, certify_partial_prefix, incremental_scheme, lift_scheme};
use crate::distributions::{independent_expectation_exact, independent_expectation_mc};
use crate::error::{Error, Result};
use crate::instances::{
    builtin, poisson_max_expectation, random_coverage_submodular, random_marginals, random_monotone,
    random_supermodular, random_ufl_instance, BuiltinParams, ExpectedFact, NamedInstance, Payload, Quantity,
};
use crate::model::{is_monotone, is_submodular, is_supermodular, Instance, SetFunction};
use crate::robust::{approximation_ratio, evaluate_g, evaluate_independent, DecisionSpace};
use crate::split::{verify_split_properties, SplitMap};
use crate::welfare::{rounding_value, welfare_ip_bruteforce, welfare_upper_bound};
use crate::worst_case::{supermodular_worst_case, verify_certificate, worst_case_lp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactOutcome {
    pub instance: String,
    pub quantity: Quantity,
    pub expected: f64,
    /// `None` if the quantity could not be computed.
    pub actual: Option<f64>,
    pub tol: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteOutcome {
    pub name: String,
    pub cases: usize,
    pub failures: Vec<String>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub facts: Vec<FactOutcome>,
    pub suites: Vec<SuiteOutcome>,
    pub passed: usize,
    pub failed: usize,
    pub all_pass: bool,
}

impl VerifyReport {
    fn new(facts: Vec<FactOutcome>, suites: Vec<SuiteOutcome>) -> Self {
        let passed = facts.iter().filter(|f| f.pass).count() + suites.iter().filter(|s| s.pass).count();
        let failed = facts.len() + suites.len() - passed;
        VerifyReport { facts, suites, passed, failed, all_pass: failed == 0 }
    }
}

fn instance_of(named: &NamedInstance) -> Result<&Instance> {
    match &named.payload {
        Payload::Instance(inst) => Ok(inst),
        Payload::Space(_) => Err(Error::invalid(format!("{} is a decision space", named.name))),
    }
}

fn space_of(named: &NamedInstance) -> Result<&DecisionSpace> {
    match &named.payload {
        Payload::Space(space) => Ok(space),
        Payload::Instance(_) => Err(Error::invalid(format!("{} is a single instance", named.name))),
    }
}

fn flag(b: bool) -> f64 {
    b as u8 as f64
}

/// Recomputes the quantity named by a fact.
pub fn evaluate_quantity(named: &NamedInstance, q: &Quantity) -> Result<f64> {
    let kappa = |w: f64, i: f64| {
        crate::correlation_gap::kappa_of(w, i).ok_or_else(|| Error::invalid("correlation gap undefined"))
    };
    match q {
        Quantity::WorstCase => Ok(worst_case_lp(instance_of(named)?)?.value),
        Quantity::Independent => {
            let inst = instance_of(named)?;
            independent_expectation_exact(&inst.function, &inst.marginals)
        }
        Quantity::Kappa => correlation_gap(instance_of(named)?)?
            .kappa
            .ok_or_else(|| Error::invalid("correlation gap undefined")),
        Quantity::Monotone => Ok(flag(is_monotone(&instance_of(named)?.function)?)),
        Quantity::Submodular => Ok(flag(is_submodular(&instance_of(named)?.function)?)),
        Quantity::Supermodular => Ok(flag(is_supermodular(&instance_of(named)?.function)?)),
        Quantity::WelfareOpt { k } => Ok(welfare_ip_bruteforce(&instance_of(named)?.function, *k)?.welfare),
        Quantity::WelfareUpperBound { k } => welfare_upper_bound(&instance_of(named)?.function, *k),
        Quantity::RobustValue { x } => evaluate_g(space_of(named)?, *x),
        Quantity::IndependentValue { x } => evaluate_independent(space_of(named)?, *x),
        Quantity::KappaAt { x } => {
            let space = space_of(named)?;
            kappa(evaluate_g(space, *x)?, evaluate_independent(space, *x)?)
        }
        Quantity::RobustChoice => Ok(approximation_ratio(space_of(named)?)?.x_robust.index as f64),
        Quantity::IndependentChoice => Ok(approximation_ratio(space_of(named)?)?.x_independent.index as f64),
        Quantity::RobustRatio => {
            approximation_ratio(space_of(named)?)?.ratio.ok_or_else(|| Error::invalid("ratio undefined"))
        }
    }
}

pub fn check_fact(named: &NamedInstance, fact: &ExpectedFact) -> FactOutcome {
    let (actual, error) = match evaluate_quantity(named, &fact.quantity) {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let pass = actual.is_some_and(|v| (v - fact.expected).abs() <= fact.tol);
    FactOutcome {
        instance: named.name.clone(),
        quantity: fact.quantity.clone(),
        expected: fact.expected,
        actual,
        tol: fact.tol,
        pass,
        error,
    }
}

pub fn check_named(named: &NamedInstance) -> Vec<FactOutcome> {
    named.facts.iter().map(|f| check_fact(named, f)).collect()
}

/// The built-in configurations exercised by [`verify_all`].
pub fn regression_instances() -> Result<Vec<NamedInstance>> {
    let p = |n: Option<usize>, k: Option<usize>| BuiltinParams { n, k, seed: None };
    let mut out = Vec::new();
    for n in [4, 6, 8] {
        out.push(builtin("example1", p(Some(n), None))?);
    }
    for k in [2, 3, 4] {
        out.push(builtin("example2", p(None, Some(k)))?);
    }
    for k in [2, 3] {
        out.push(builtin("example2_two_stage", p(None, Some(k)))?);
    }
    for n in [2, 3, 4, 8, 12] {
        out.push(builtin("example3", p(Some(n), None))?);
    }
    out.push(builtin("integrality_gap", p(None, None))?);
    out.push(builtin("ufl", p(None, None))?);
    out.push(builtin("coverage", p(None, None))?);
    for named in &mut out {
        named.name = format!("{} ({})", named.name, named.description);
    }
    Ok(out)
}

struct Suite {
    name: &'static str,
    cases: usize,
    failures: Vec<String>,
}

impl Suite {
    fn new(name: &'static str) -> Self {
        Suite { name, cases: 0, failures: Vec::new() }
    }

    fn case(&mut self, label: impl FnOnce() -> String, outcome: Result<bool>) {
        self.cases += 1;
        match outcome {
            Ok(true) => {}
            Ok(false) => self.failures.push(label()),
            Err(e) => self.failures.push(format!("{}: {e}", label())),
        }
    }

    fn finish(self) -> SuiteOutcome {
        let pass = self.failures.is_empty();
        SuiteOutcome { name: self.name.to_string(), cases: self.cases, failures: self.failures, pass }
    }
}

const SUITE_SEED: u64 = 20_240_601;

fn submodular_gap_suite() -> SuiteOutcome {
    let mut suite = Suite::new("submodular gap within e/(e-1)");
    for t in 0..40u64 {
        let n = 3 + (t % 6) as usize;
        let seed = SUITE_SEED + t;
        let outcome = (|| {
            let f = random_coverage_submodular(seed, n)?;
            let inst = Instance::new(f, random_marginals(seed + 1_000, n))?;
            let r = correlation_gap(&inst)?;
            Ok(r.kappa.is_none_or(|k| k <= e_over_e_minus_one() + 1e-6))
        })();
        suite.case(|| format!("coverage seed {seed} n {n}"), outcome);
    }
    suite.finish()
}

fn supermodular_suite() -> SuiteOutcome {
    let mut suite = Suite::new("supermodular closed form equals LP");
    for t in 0..30u64 {
        let n = 2 + (t % 7) as usize;
        let seed = SUITE_SEED + 100 + t;
        let outcome = (|| {
            let inst = Instance::new(random_supermodular(seed, n)?, random_marginals(seed + 1_000, n))?;
            let closed = supermodular_worst_case(&inst)?;
            let lp = worst_case_lp(&inst)?;
            Ok((closed.value - lp.value).abs() <= 1e-6 && verify_certificate(&inst, &closed)?)
        })();
        suite.case(|| format!("supermodular seed {seed} n {n}"), outcome);
    }
    suite.finish()
}

fn split_suite() -> SuiteOutcome {
    let mut suite = Suite::new("split preserves worst case, lowers independent value");
    for t in 0..30u64 {
        let n = 2 + (t % 3) as usize;
        let seed = SUITE_SEED + 200 + t;
        let counts: Vec<usize> = (0..n).map(|i| 1 + ((seed as usize >> i) + i) % 3).collect();
        let outcome = (|| {
            let inst = Instance::new(random_monotone(seed, n)?, random_marginals(seed + 1_000, n))?;
            Ok(verify_split_properties(&inst, counts.clone())?.all_hold())
        })();
        suite.case(|| format!("monotone seed {seed} counts {counts:?}"), outcome);
    }
    suite.finish()
}

fn cost_sharing_suite() -> SuiteOutcome {
    let mut suite = Suite::new("incremental scheme certifies (1, 1) and lifts");
    for t in 0..12u64 {
        let n = 2 + (t % 4) as usize;
        let seed = SUITE_SEED + 300 + t;
        let outcome = (|| {
            let f = random_coverage_submodular(seed, n)?;
            let c = certify(&incremental_scheme(f.clone()), &f)?;
            let base_ok = c.beta_star.is_some_and(|b| b <= 1.0 + 1e-9)
                && c.eta_star.is_some_and(|e| e <= 1.0 + 1e-9)
                && c.cross_monotone;

            let small = random_coverage_submodular(seed, 3)?;
            let map = SplitMap::new(vec![2, 1, 2])?.with_partition(vec![0, 1, 1, 1, 0])?;
            let lifted = lift_scheme(incremental_scheme(small.clone()), map.clone())?;
            let split_f = SetFunction::Split { base: Box::new(small), map };
            let lc = certify(&lifted, &split_f)?;
            let lift_ok = lc.beta_star.is_some_and(|b| b <= 1.0 + 1e-9)
                && lc.eta_star.is_some_and(|e| e <= 1.0 + 1e-9)
                && certify_partial_prefix(&lifted)?.holds;
            Ok(base_ok && lift_ok)
        })();
        suite.case(|| format!("coverage seed {seed} n {n}"), outcome);
    }
    suite.finish()
}

fn welfare_suite() -> SuiteOutcome {
    let mut suite = Suite::new("welfare sandwich and rounding guarantee");
    let factor = 1.0 - (-1.0f64).exp();
    for t in 0..16u64 {
        let n = 3 + (t % 4) as usize;
        let k = 2 + (t % 2) as usize;
        let seed = SUITE_SEED + 400 + t;
        let outcome = (|| {
            let f = random_coverage_submodular(seed, n)?;
            let opt = welfare_ip_bruteforce(&f, k)?.welfare;
            let upper = welfare_upper_bound(&f, k)?;
            let rounding = rounding_value(&f, k)?;
            Ok(opt <= upper + 1e-6 && rounding <= upper + 1e-6 && rounding >= (factor - 1e-6) * opt)
        })();
        suite.case(|| format!("coverage seed {seed} n {n} K {k}"), outcome);
    }
    suite.finish()
}

fn robust_chain_suite() -> SuiteOutcome {
    let mut suite = Suite::new("robust versus independent decision chain");
    for n in 2..=7 {
        let outcome = (|| Ok(approximation_ratio(&crate::instances::example1_minflow(n)?)?.chain_holds))();
        suite.case(|| format!("capacity purchase n {n}"), outcome);
    }
    for t in 0..6u64 {
        let seed = SUITE_SEED + 500 + t;
        let outcome = (|| Ok(approximation_ratio(&random_ufl_instance(seed, 4, 2, None)?)?.chain_holds))();
        suite.case(|| format!("facility location seed {seed}"), outcome);
    }
    suite.finish()
}

fn poisson_suite() -> SuiteOutcome {
    let mut suite = Suite::new("Poisson maximum stays within a constant of ln M / ln ln M");
    for m in [100u64, 1_000, 10_000, 100_000, 1_000_000] {
        let outcome = poisson_max_expectation(m).map(|r| r.ratio.is_some_and(|x| (0.5..=3.0).contains(&x)));
        suite.case(|| format!("M = {m}"), outcome);
    }
    suite.finish()
}

fn monte_carlo_suite() -> SuiteOutcome {
    let mut suite = Suite::new("Monte Carlo agrees with exact enumeration");
    for t in 0..4u64 {
        let seed = SUITE_SEED + 600 + t;
        let outcome = (|| {
            let f = random_coverage_submodular(seed, 10)?;
            let p = random_marginals(seed + 1_000, 10);
            let exact = independent_expectation_exact(&f, &p)?;
            let mc = independent_expectation_mc(&f, &p, 50_000, seed)?;
            Ok((mc.estimate - exact).abs() <= 5.0 * mc.stderr + 1e-12)
        })();
        suite.case(|| format!("coverage seed {seed}"), outcome);
    }
    suite.finish()
}

/// Every regression fact and every property suite.
pub fn verify_all() -> Result<VerifyReport> {
    let facts = regression_instances()?.iter().flat_map(check_named).collect();
    let suites = vec![
        submodular_gap_suite(),
        supermodular_suite(),
        split_suite(),
        cost_sharing_suite(),
        welfare_suite(),
        robust_chain_suite(),
        poisson_suite(),
        monte_carlo_suite(),
    ];
    Ok(VerifyReport::new(facts, suites))
}

/// Facts of a single named instance.
pub fn verify_named(named: &NamedInstance) -> VerifyReport {
    VerifyReport::new(check_named(named), Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrong_fact_fails() {
        let mut named = builtin("example3", BuiltinParams { n: Some(3), ..Default::default() }).unwrap();
        named.facts[0].expected = 2.0;
        let report = verify_named(&named);
        assert!(!report.all_pass);
        assert_eq!(report.failed, 1);
    }

    #[test]
    fn mismatched_quantity_reports_error() {
        let named = builtin("example3", BuiltinParams::default()).unwrap();
        let out = check_fact(
            &named,
            &ExpectedFact { quantity: Quantity::RobustChoice, expected: 0.0, tol: 0.0, basis: String::new() },
        );
        assert!(!out.pass);
        assert!(out.error.is_some());
    }

    #[test]
    fn small_builtins_pass() {
        for (name, params) in [
            ("example1", BuiltinParams { n: Some(4), ..Default::default() }),
            ("example2", BuiltinParams { k: Some(2), ..Default::default() }),
            ("integrality_gap", BuiltinParams::default()),
            ("coverage", BuiltinParams::default()),
        ] {
            let report = verify_named(&builtin(name, params).unwrap());
            assert!(report.all_pass, "{name}: {report:?}");
        }
    }
}
