//! Robust versus independent two-stage decisions over a finite decision list.
//!
//! Each decision `x` induces a set function `f(x, ·)`. The robust objective is
//! `g(x) = max_{alpha} E_alpha[f(x, S)]` over distributions with the shared
//! marginals; the independent objective is the product-distribution
//! expectation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation_gap::kappa_of;
use crate::distributions::independent_expectation_exact;
use crate::error::{Error, Result};
use crate::model::{validate_marginals, Instance, SetFunction};
use crate::simplex::LpOptions;
use crate::worst_case::{supermodular_worst_case, worst_case_lp_with};

/// Agreement required between the supermodular closed form and the LP.
pub const CLOSED_FORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub label: String,
    pub function: SetFunction,
    /// Evaluate `g` by the nested-chain closed form and cross-check with the LP.
    #[serde(default)]
    pub supermodular: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSpace {
    pub decisions: Vec<Decision>,
    pub marginals: Vec<f64>,
}

impl DecisionSpace {
    pub fn new(decisions: Vec<Decision>, marginals: Vec<f64>) -> Result<Self> {
        let space = DecisionSpace { decisions, marginals };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.decisions.first().ok_or_else(|| Error::invalid("decision space is empty"))?;
        let n = first.function.n();
        validate_marginals(&self.marginals, n)?;
        for d in &self.decisions {
            d.function.validate()?;
            if d.function.n() != n {
                return Err(Error::invalid(format!(
                    "decision {:?} is on {} elements, expected {n}",
                    d.label,
                    d.function.n()
                )));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.decisions.first().map_or(0, |d| d.function.n())
    }

    fn instance(&self, x: usize) -> Instance {
        Instance { function: self.decisions[x].function.clone(), marginals: self.marginals.clone() }
    }
}

/// Worst-case expected cost of decision `x`.
pub fn evaluate_g(space: &DecisionSpace, x: usize) -> Result<f64> {
    evaluate_g_with(space, x, &LpOptions::default())
}

pub fn evaluate_g_with(space: &DecisionSpace, x: usize, options: &LpOptions) -> Result<f64> {
    space.validate()?;
    let d = space
        .decisions
        .get(x)
        .ok_or_else(|| Error::invalid(format!("decision index {x} out of range")))?;
    let inst = space.instance(x);
    let lp = worst_case_lp_with(&inst, options)?.value;
    if !d.supermodular {
        return Ok(lp);
    }
    let closed = supermodular_worst_case(&inst)?.value;
    if (closed - lp).abs() > CLOSED_FORM_TOL * closed.abs().max(1.0) {
        return Err(Error::ClosedFormMismatch { label: d.label.clone(), closed, lp });
    }
    Ok(closed)
}

/// Independent-Bernoulli expected cost of decision `x`.
pub fn evaluate_independent(space: &DecisionSpace, x: usize) -> Result<f64> {
    space.validate()?;
    let d = space
        .decisions
        .get(x)
        .ok_or_else(|| Error::invalid(format!("decision index {x} out of range")))?;
    independent_expectation_exact(&d.function, &space.marginals)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Choice {
    pub index: usize,
    pub label: String,
    pub value: f64,
}

pub fn solve_robust(space: &DecisionSpace) -> Result<Choice> {
    let values = scan(space, |x| evaluate_g(space, x))?;
    Ok(argmin(space, &values))
}

pub fn solve_independent(space: &DecisionSpace) -> Result<Choice> {
    let values = scan(space, |x| evaluate_independent(space, x))?;
    Ok(argmin(space, &values))
}

fn scan(space: &DecisionSpace, eval: impl Fn(usize) -> Result<f64> + Sync + Send) -> Result<Vec<f64>> {
    space.validate()?;
    (0..space.decisions.len()).into_par_iter().map(eval).collect()
}

fn argmin(space: &DecisionSpace, values: &[f64]) -> Choice {
    let mut best = 0;
    for (x, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = x;
        }
    }
    Choice { index: best, label: space.decisions[best].label.clone(), value: values[best] }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionValues {
    pub label: String,
    pub worst_case: f64,
    pub independent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustSolveReport {
    pub x_robust: Choice,
    pub x_independent: Choice,
    /// `g(x_I)`.
    pub g_at_independent: f64,
    /// Independent expectation at `x_R`.
    pub independent_at_robust: f64,
    /// `g(x_I) / g(x_R)`, `None` when `g(x_R) = 0 < g(x_I)`.
    pub ratio: Option<f64>,
    /// Correlation gap of `f(x_I, ·)`.
    pub kappa_at_independent: Option<f64>,
    /// `g(x_R) >= E_I(x_R) >= E_I(x_I)` and `g(x_I) <= kappa(x_I) g(x_R)`.
    pub chain_holds: bool,
    pub decisions: Vec<DecisionValues>,
}

/// Scans every decision under both objectives.
pub fn approximation_ratio(space: &DecisionSpace) -> Result<RobustSolveReport> {
    space.validate()?;
    let pairs: Vec<(f64, f64)> = (0..space.decisions.len())
        .into_par_iter()
        .map(|x| Ok((evaluate_g(space, x)?, evaluate_independent(space, x)?)))
        .collect::<Result<_>>()?;
    let g: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let e: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let x_robust = argmin(space, &g);
    let x_independent = argmin(space, &e);
    let g_at_independent = g[x_independent.index];
    let independent_at_robust = e[x_robust.index];
    let ratio = kappa_of(g_at_independent, x_robust.value);
    let kappa_at_independent = kappa_of(g_at_independent, x_independent.value);

    let tol = |v: f64| 1e-9 * v.abs().max(1.0);
    let kappa_step = match kappa_at_independent {
        Some(k) => g_at_independent <= k * x_robust.value + tol(g_at_independent),
        None => false,
    };
    let chain_holds = x_robust.value + tol(x_robust.value) >= independent_at_robust
        && independent_at_robust + tol(independent_at_robust) >= x_independent.value
        && kappa_step;
    let decisions = space
        .decisions
        .iter()
        .zip(&pairs)
        .map(|(d, &(worst_case, independent))| DecisionValues { label: d.label.clone(), worst_case, independent })
        .collect();
    Ok(RobustSolveReport {
        x_robust,
        x_independent,
        g_at_independent,
        independent_at_robust,
        ratio,
        kappa_at_independent,
        chain_holds,
        decisions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example1(n: usize) -> DecisionSpace {
        let decisions = (0..=n)
            .map(|x| Decision { label: format!("x={x}"), function: SetFunction::TwoStageFlow { n, x }, supermodular: true })
            .collect();
        DecisionSpace::new(decisions, vec![0.5; n]).unwrap()
    }

    #[test]
    fn flow_values_at_n4() {
        let space = example1(4);
        assert!((evaluate_g(&space, 3).unwrap() - 11.0).abs() < 1e-9);
        assert!((evaluate_g(&space, 4).unwrap() - 6.0).abs() < 1e-9);
        assert!((evaluate_independent(&space, 3).unwrap() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn flow_choices_at_n4() {
        let space = example1(4);
        assert_eq!(solve_robust(&space).unwrap().index, 4);
        let xi = solve_independent(&space).unwrap();
        assert_eq!(xi.index, 3);
        assert!((xi.value - 4.0).abs() < 1e-9);
        let r = approximation_ratio(&space).unwrap();
        assert!((r.ratio.unwrap() - 11.0 / 6.0).abs() < 1e-9);
        assert!(r.chain_holds);
    }

    #[test]
    fn constant_decision() {
        let f = SetFunction::from_fn(3, |_| 2.5).unwrap();
        let space = DecisionSpace::new(vec![Decision { label: "c".into(), function: f, supermodular: true }], vec![0.3, 0.2, 0.9])
            .unwrap();
        assert!((evaluate_g(&space, 0).unwrap() - 2.5).abs() < 1e-12);
        let r = approximation_ratio(&space).unwrap();
        assert_eq!(r.x_robust.index, 0);
        assert_eq!(r.x_independent.index, 0);
        assert!((r.ratio.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ties_go_to_first_decision() {
        let f = SetFunction::from_fn(2, |s| s.len() as f64).unwrap();
        let d = |label: &str| Decision { label: label.into(), function: f.clone(), supermodular: false };
        let space = DecisionSpace::new(vec![d("a"), d("b"), d("c")], vec![0.5, 0.5]).unwrap();
        let r = approximation_ratio(&space).unwrap();
        assert_eq!(r.x_robust.label, "a");
        assert_eq!(r.x_independent.label, "a");
        assert_eq!(r.ratio, Some(1.0));
    }

    #[test]
    fn mislabelled_supermodular_is_caught() {
        let f = SetFunction::from_fn(3, |s| (!s.is_empty()) as u8 as f64).unwrap();
        let space = DecisionSpace::new(vec![Decision { label: "thr".into(), function: f, supermodular: true }], vec![0.3; 3])
            .unwrap();
        assert!(matches!(evaluate_g(&space, 0), Err(Error::ClosedFormMismatch { .. })));
    }

    #[test]
    fn space_validation() {
        assert!(DecisionSpace::new(vec![], vec![]).is_err());
        let a = Decision { label: "a".into(), function: SetFunction::TwoStageFlow { n: 3, x: 0 }, supermodular: false };
        let b = Decision { label: "b".into(), function: SetFunction::TwoStageFlow { n: 4, x: 0 }, supermodular: false };
        assert!(DecisionSpace::new(vec![a.clone(), b], vec![0.5; 3]).is_err());
        assert!(DecisionSpace::new(vec![a], vec![0.5; 4]).is_err());
    }

    #[test]
    fn space_json_round_trip() {
        let space = example1(2);
        let text = serde_json::to_string(&space).unwrap();
        let back: DecisionSpace = serde_json::from_str(&text).unwrap();
        assert_eq!(back, space);
        let minimal = r#"{"decisions":[{"label":"only","function":{"type":"two_stage_flow","n":2,"x":1}}],"marginals":[0.5,0.5]}"#;
        let parsed: DecisionSpace = serde_json::from_str(minimal).unwrap();
        assert!(!parsed.decisions[0].supermodular);
    }
}
