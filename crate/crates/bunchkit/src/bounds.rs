//! Sharp bounds on the buncher average treatment effect under
//! bi-log-concavity of the two latent outcome distributions, the small-kink
//! refinement, and elasticity conversions.
//!
//! The workhorse is the scalar function
//!
//!   g(a, b, x) = (a / (b x)) (a + x) ln(1 + x/a) - a/b,
//!
//! the mean of the log-envelope quantile bound over a mass-x band starting
//! at CDF level a with density b. It is homogeneous of degree zero, which is
//! what lets the bounds be written directly in unconditional CDF levels.

use crate::boundary::{kink_estimates_scaled, KinkEstimates};
use crate::{Error, Result, GRID_TOL};

const LN_PREMIUM: f64 = 0.405_465_108_108_164_4; // ln 1.5

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Units {
    Hours,
    LogHours,
    Elasticity,
    Probability,
}

/// Lower/upper pair for a partially identified parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInterval {
    pub lower: f64,
    pub upper: f64,
    pub units: Units,
}

impl BoundInterval {
    pub fn new(lower: f64, upper: f64, units: Units) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "interval endpoints must be finite, got [{lower}, {upper}]"
            )));
        }
        if lower > upper {
            return Err(Error::InvalidArgument(format!(
                "interval lower bound {lower} exceeds upper bound {upper}"
            )));
        }
        Ok(BoundInterval {
            lower,
            upper,
            units,
        })
    }

    pub fn point(value: f64, units: Units) -> Self {
        BoundInterval {
            lower: value,
            upper: value,
            units,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    /// Endpoint-wise sum; units follow `self`.
    pub fn add(&self, other: &BoundInterval) -> BoundInterval {
        BoundInterval {
            lower: self.lower + other.lower,
            upper: self.upper + other.upper,
            units: self.units,
        }
    }

    /// Scale both endpoints by a positive factor, relabeling units.
    pub fn scale(&self, factor: f64, units: Units) -> BoundInterval {
        debug_assert!(factor > 0.0);
        BoundInterval {
            lower: self.lower * factor,
            upper: self.upper * factor,
            units,
        }
    }
}

/// Everything the bounds need: unconditional CDF levels and densities of the
/// two latent outcomes at the kink, total bunching mass, and the
/// counterfactual mass.
#[derive(Debug, Clone, Copy)]
pub struct AteInputs {
    /// F0(k): left CDF limit plus the counterfactual mass.
    pub cdf0: f64,
    /// f0(k): left density limit.
    pub dens0: f64,
    /// F1(k): CDF at the kink including the point mass.
    pub cdf1: f64,
    /// f1(k): right density limit.
    pub dens1: f64,
    /// Total bunching mass B.
    pub bunching: f64,
    /// Counterfactual bunching mass p.
    pub p: f64,
}

impl AteInputs {
    pub fn new(
        cdf0: f64,
        dens0: f64,
        cdf1: f64,
        dens1: f64,
        bunching: f64,
        p: f64,
    ) -> Result<Self> {
        let inp = AteInputs {
            cdf0,
            dens0,
            cdf1,
            dens1,
            bunching,
            p,
        };
        inp.validate()?;
        Ok(inp)
    }

    /// Map kink estimates and a counterfactual mass into bound inputs:
    /// F0(k) = F_minus + p and F1(k) = F_plus.
    pub fn from_estimates(est: &KinkEstimates, p: f64) -> Result<Self> {
        AteInputs::new(
            est.cdf_minus + p,
            est.dens_minus,
            est.cdf_plus,
            est.dens_plus,
            est.cdf_plus - est.cdf_minus,
            p,
        )
    }

    fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidArgument(msg));
        if !(0.0..=1.0).contains(&self.bunching) {
            return fail(format!(
                "bunching mass must be in [0,1], got {}",
                self.bunching
            ));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return fail(format!("p must be in [0,1], got {}", self.p));
        }
        if self.p > self.bunching + 1e-12 {
            return fail(format!(
                "p = {} exceeds the bunching mass {}",
                self.p, self.bunching
            ));
        }
        if !(self.cdf0 > self.p && self.cdf0 <= 1.0) {
            return fail(format!("F0(k) = {} must lie in (p, 1]", self.cdf0));
        }
        if !(self.cdf1 > self.p && self.cdf1 <= 1.0) {
            return fail(format!("F1(k) = {} must lie in (p, 1]", self.cdf1));
        }
        if self.cdf1 < self.cdf0 - 1e-12 {
            return fail(format!(
                "F1(k) = {} is below F0(k) = {}",
                self.cdf1, self.cdf0
            ));
        }
        if !(self.dens0 > 0.0 && self.dens0.is_finite()) {
            return fail(format!("f0(k) must be positive, got {}", self.dens0));
        }
        if !(self.dens1 > 0.0 && self.dens1.is_finite()) {
            return fail(format!("f1(k) must be positive, got {}", self.dens1));
        }
        Ok(())
    }

    /// Net bunching B - p.
    pub fn net_bunching(&self) -> f64 {
        self.bunching - self.p
    }
}

/// The envelope-mean function g(a,b,x).
///
/// Closed form everywhere except |x| < 1e-6 a, where the second-order series
/// x/(2b) - x^2/(6ab) takes over to dodge the cancellation in
/// (1 + x/a) ln(1 + x/a) - x/a; the two branches agree to ~1e-12 at the
/// switch. g(a,b,0) = 0.
pub fn g_fn(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "g(a,b,x) needs a > 0, got a = {a}"
        )));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "g(a,b,x) needs b > 0, got b = {b}"
        )));
    }
    if !(a + x > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "g(a,b,x) needs a + x > 0, got a = {a}, x = {x}"
        )));
    }
    if x.abs() < 1e-6 * a {
        return Ok(x / (2.0 * b) - x * x / (6.0 * a * b));
    }
    Ok(a / (b * x) * (a + x) * (x / a).ln_1p() - a / b)
}

/// Sharp bounds [lower, upper] on the buncher ATE in the units of the
/// running variable.
///
/// lower = g(F0-p, f0, B-p) + g(1-F1, f1, B-p)
/// upper = -g(1-F0, f0, p-B) - g(F1-p, f1, p-B)
///
/// Feasibility of every g argument is checked up front so a violation names
/// the offending quantity instead of surfacing as a bare log-domain error.
pub fn buncher_ate_bounds(inp: &AteInputs) -> Result<BoundInterval> {
    inp.validate()?;
    let x = inp.net_bunching().max(0.0);
    let checks: [(&str, f64); 4] = [
        ("F0(k) - p", inp.cdf0 - inp.p),
        ("1 - F1(k)", 1.0 - inp.cdf1),
        ("1 - F0(k) - (B - p)", 1.0 - inp.cdf0 - x),
        ("F1(k) - p - (B - p)", inp.cdf1 - inp.p - x),
    ];
    for (name, v) in checks {
        if !(v > 0.0) {
            return Err(Error::Infeasible(format!(
                "{name} must be positive for the envelope bounds, got {v}"
            )));
        }
    }
    let lower = g_fn(inp.cdf0 - inp.p, inp.dens0, x)? + g_fn(1.0 - inp.cdf1, inp.dens1, x)?;
    let upper = -g_fn(1.0 - inp.cdf0, inp.dens0, -x)? - g_fn(inp.cdf1 - inp.p, inp.dens1, -x)?;
    BoundInterval::new(lower, upper, Units::Hours)
}

/// Bounds on the average excess of the lower latent outcome over the kink
/// among active bunchers: the h0-side half of the ATE decomposition. Used by
/// the ex-post policy decomposition.
pub fn buncher_h0_half_bounds(inp: &AteInputs) -> Result<(f64, f64)> {
    inp.validate()?;
    let x = inp.net_bunching().max(0.0);
    if !(1.0 - inp.cdf0 - x > 0.0) {
        return Err(Error::Infeasible(format!(
            "1 - F0(k) - (B - p) must be positive, got {}",
            1.0 - inp.cdf0 - x
        )));
    }
    let lower = g_fn(inp.cdf0 - inp.p, inp.dens0, x)?;
    let upper = -g_fn(1.0 - inp.cdf0, inp.dens0, -x)?;
    Ok((lower, upper))
}

/// Two-term small-kink value (B-p)/(2 f0) + (B-p)/(2 f1), the common limit
/// of both bounds as the net bunching mass shrinks.
pub fn small_kink_approx(inp: &AteInputs) -> f64 {
    let x = inp.net_bunching();
    x / (2.0 * inp.dens0) + x / (2.0 * inp.dens1)
}

/// Treatment effect in hours at kink `k` to a demand-elasticity magnitude:
/// delta / (k ln 1.5). Sign conventions (reporting the value as negative)
/// are a presentation concern and live in the front end.
pub fn ate_to_elasticity(delta: f64, k: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "kink must be positive, got {k}"
        )));
    }
    Ok(delta / (k * LN_PREMIUM))
}

/// Buncher-ATE bounds computed on log hours with the kink at ln k, divided
/// by ln 1.5: an elasticity-magnitude interval under bi-log-concavity of
/// both latent log-hour distributions.
pub fn isoelastic_blc_bounds(
    hours: &[f64],
    k: f64,
    p: f64,
    bandwidth_override: Option<f64>,
    degree: usize,
) -> Result<BoundInterval> {
    isoelastic_blc_bounds_tol(hours, k, p, bandwidth_override, degree, GRID_TOL)
}

/// [`isoelastic_blc_bounds`] with an explicit at-kink tolerance on the
/// hours scale (unsnapped data with an exact atom wants a tiny one).
pub fn isoelastic_blc_bounds_tol(
    hours: &[f64],
    k: f64,
    p: f64,
    bandwidth_override: Option<f64>,
    degree: usize,
    hours_tol: f64,
) -> Result<BoundInterval> {
    let (est, _) = log_scale_estimates(hours, k, p, bandwidth_override, degree, hours_tol)?;
    let inp = AteInputs::from_estimates(&est, p)?;
    let log_bounds = buncher_ate_bounds(&inp)?;
    Ok(log_bounds.scale(1.0 / LN_PREMIUM, Units::Elasticity))
}

/// Elasticity magnitude under the linear-interpolation benchmark: the
/// density of the lower latent outcome is taken linear (in logs) across the
/// missing region, so the net bunching mass is a trapezoid of width delta,
///
///   (B - p) = delta * (f0 + f1) / 2,
///
/// and the elasticity is delta / ln 1.5.
pub fn saez_linear_epsilon(
    hours: &[f64],
    k: f64,
    p: f64,
    bandwidth_override: Option<f64>,
    degree: usize,
) -> Result<f64> {
    saez_linear_epsilon_tol(hours, k, p, bandwidth_override, degree, GRID_TOL)
}

/// [`saez_linear_epsilon`] with an explicit at-kink tolerance on the hours
/// scale.
pub fn saez_linear_epsilon_tol(
    hours: &[f64],
    k: f64,
    p: f64,
    bandwidth_override: Option<f64>,
    degree: usize,
    hours_tol: f64,
) -> Result<f64> {
    let (est, mass) = log_scale_estimates(hours, k, p, bandwidth_override, degree, hours_tol)?;
    let net = mass - p;
    if net < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "no nonnegative interpolation width: net bunching {net} is negative"
        )));
    }
    let delta = 2.0 * net / (est.dens_minus + est.dens_plus);
    Ok(delta / LN_PREMIUM)
}

fn log_scale_estimates(
    hours: &[f64],
    k: f64,
    p: f64,
    bandwidth_override: Option<f64>,
    degree: usize,
    hours_tol: f64,
) -> Result<(KinkEstimates, f64)> {
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "kink must be positive, got {k}"
        )));
    }
    if let Some(bad) = hours.iter().find(|h| !(**h > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "log-scale estimation needs strictly positive hours, got {bad}"
        )));
    }
    let logs: Vec<f64> = hours.iter().map(|h| h.ln()).collect();
    // the hours-scale at-kink tolerance, mapped to the log scale at k
    let tol = hours_tol / k;
    let est = kink_estimates_scaled(
        &logs,
        k.ln(),
        p,
        bandwidth_override.map(|b| b / k),
        degree,
        tol,
    )?;
    let mass = est.cdf_plus - est.cdf_minus;
    Ok((est, mass))
}
