//! Correlation gap `kappa = L / I`: worst-case expectation over independent
//! expectation at the same marginals.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::distributions::independent_expectation_exact;
use crate::error::{Error, Result};
use crate::model::Instance;
use crate::simplex::LpOptions;
use crate::worst_case::worst_case_lp_with;

/// Magnitude below which an expectation counts as zero when forming the ratio.
const ZERO_EXPECTATION: f64 = 1e-12;

/// `e / (e - 1)`.
pub fn e_over_e_minus_one() -> f64 {
    E / (E - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub worst_value: f64,
    pub independent_value: f64,
    /// `None` when the independent expectation vanishes but the worst case
    /// does not. Both vanishing yields `1`.
    pub kappa: Option<f64>,
    pub bound: Option<f64>,
    pub bound_satisfied: Option<bool>,
}

/// `L / I` with the zero conventions of [`GapReport::kappa`].
pub fn kappa_of(worst: f64, independent: f64) -> Option<f64> {
    if independent > ZERO_EXPECTATION {
        Some(worst / independent)
    } else if independent.abs() <= ZERO_EXPECTATION && worst.abs() <= ZERO_EXPECTATION {
        Some(1.0)
    } else {
        None
    }
}

pub fn correlation_gap(inst: &Instance) -> Result<GapReport> {
    correlation_gap_with(inst, None, &LpOptions::default())
}

/// Gap together with the bound `eta * beta * e/(e-1)` for a declared
/// `(eta, beta)` cost-sharing scheme.
pub fn correlation_gap_with_scheme(inst: &Instance, eta: f64, beta: f64) -> Result<GapReport> {
    correlation_gap_with(inst, Some((eta, beta)), &LpOptions::default())
}

pub fn correlation_gap_with(inst: &Instance, scheme: Option<(f64, f64)>, options: &LpOptions) -> Result<GapReport> {
    let bound = scheme.map(|(eta, beta)| theoretical_bound(eta, beta)).transpose()?;
    let worst_value = worst_case_lp_with(inst, options)?.value;
    let independent_value = independent_expectation_exact(&inst.function, &inst.marginals)?;
    let kappa = kappa_of(worst_value, independent_value);
    let bound_satisfied = match (bound, kappa) {
        (Some(b), Some(k)) => Some(k <= b + 1e-9),
        _ => None,
    };
    Ok(GapReport { worst_value, independent_value, kappa, bound, bound_satisfied })
}

/// `eta * beta * e / (e - 1)`.
pub fn theoretical_bound(eta: f64, beta: f64) -> Result<f64> {
    if !(eta >= 1.0 && beta >= 1.0) || !eta.is_finite() || !beta.is_finite() {
        return Err(Error::invalid(format!("eta and beta must be finite and >= 1, got ({eta}, {beta})")));
    }
    Ok(eta * beta * e_over_e_minus_one())
}

/// Writes one CSV row per report, with a header.
pub fn write_gap_csv<W: std::io::Write>(out: W, rows: &[(String, GapReport)]) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        name: &'a str,
        worst_value: f64,
        independent_value: f64,
        kappa: Option<f64>,
        bound: Option<f64>,
        bound_satisfied: Option<bool>,
    }
    let mut w = csv::Writer::from_writer(out);
    for (name, r) in rows {
        w.serialize(Row {
            name,
            worst_value: r.worst_value,
            independent_value: r.independent_value,
            kappa: r.kappa,
            bound: r.bound,
            bound_satisfied: r.bound_satisfied,
        })?;
    }
    w.flush()?;
    Ok(())
}
