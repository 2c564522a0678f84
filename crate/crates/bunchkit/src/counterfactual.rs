//! Estimators for the counterfactual bunching mass: the share of units that
//! would sit at the kink even without it.

use crate::data::PaycheckTable;
use crate::empirical::bunching_mass;
use crate::{Error, Result, GRID_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PMethod {
    /// Externally supplied value.
    Fixed,
    /// Paid-time-off strategy: total bunching minus the at-kink share among
    /// positive-PTO paychecks.
    Pto,
    /// Upper bound from hours non-changers at the kink.
    NonchangerUpper,
}

impl PMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            PMethod::Fixed => "fixed",
            PMethod::Pto => "pto",
            PMethod::NonchangerUpper => "nonchanger_upper",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PEstimate {
    pub method: PMethod,
    pub value: f64,
    pub is_upper_bound: bool,
    /// Set when a negative raw PTO estimate was clipped to zero.
    pub clipped: bool,
}

/// PTO strategy: p = B - P(h = k | pto > 0). Identified when units still at
/// the kink despite positive non-work hours are all active bunchers and the
/// conditional active share is representative.
pub fn p_from_pto(table: &PaycheckTable, k: f64) -> Result<PEstimate> {
    let total = bunching_mass(table, k);
    let mut n_pto = 0usize;
    let mut n_pto_at_k = 0usize;
    for r in table.rows() {
        if r.pto_hours > 0.0 {
            n_pto += 1;
            if (r.hours_worked - k).abs() < GRID_TOL {
                n_pto_at_k += 1;
            }
        }
    }
    if n_pto == 0 {
        return Err(Error::InvalidArgument(
            "PTO strategy needs at least one row with positive pto_hours".into(),
        ));
    }
    let conditional = n_pto_at_k as f64 / n_pto as f64;
    let raw = total.mass - conditional;
    let clipped = raw < 0.0;
    Ok(PEstimate {
        method: PMethod::Pto,
        value: raw.max(0.0),
        is_upper_bound: false,
        clipped,
    })
}

/// Non-changer upper bound: the share of all rows whose hours and lagged
/// hours both sit at the kink. Requires a lag join.
pub fn p_upper_nonchangers(table: &PaycheckTable, k: f64) -> Result<PEstimate> {
    let mut any_lag = false;
    let mut hits = 0usize;
    for r in table.rows() {
        if let Some(lag) = r.lag_hours_worked {
            any_lag = true;
            if (r.hours_worked - k).abs() < GRID_TOL && (lag - k).abs() < GRID_TOL {
                hits += 1;
            }
        }
    }
    if !any_lag {
        return Err(Error::InvalidArgument(
            "non-changer bound needs lagged hours; run lag_join first".into(),
        ));
    }
    Ok(PEstimate {
        method: PMethod::NonchangerUpper,
        value: hits as f64 / table.len() as f64,
        is_upper_bound: true,
        clipped: false,
    })
}

/// Pass through an externally chosen value.
pub fn p_fixed(value: f64) -> Result<PEstimate> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::InvalidArgument(format!(
            "p must be in [0,1], got {value}"
        )));
    }
    Ok(PEstimate {
        method: PMethod::Fixed,
        value,
        is_upper_bound: false,
        clipped: false,
    })
}
