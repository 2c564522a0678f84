//! Policy counterfactuals: bi-log-concave CDF envelopes, kink relocation,
//! marginal comparative statics, the ex-post decomposition of the overtime
//! rule's hours effect, and the move to a higher premium.
//!
//! Everything here is interval-valued. Envelope extensions are anchored at
//! the estimated kink statistics; where the counterfactual mass p is
//! positive, the envelope is applied to the active-buncher (mass 1-p)
//! component so that the point mass at the kink never has to satisfy the
//! shape constraint itself.

use std::io::Write;

use crate::boundary::KinkEstimates;
use crate::bounds::{buncher_ate_bounds, buncher_h0_half_bounds, AteInputs, BoundInterval, Units};
use crate::empirical::EmpiricalCdf;
use crate::{Error, Result, GRID_TOL, HOURS_GRID};

/// An overtime regime: premium factor `rho1` above `k`, base factor 1 below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyScenario {
    pub k: f64,
    pub rho1: f64,
}

impl PolicyScenario {
    pub fn new(k: f64, rho1: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "k must be positive, got {k}"
            )));
        }
        if !(rho1 > 1.0 && rho1.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "rho1 must exceed 1, got {rho1}"
            )));
        }
        Ok(PolicyScenario { k, rho1 })
    }
}

/// Which unobserved CDF an envelope extends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeSide {
    ExtendRightOfF0,
    ExtendLeftOfF1,
}

/// A bi-log-concavity envelope anchored at a known (CDF, density) point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlcEnvelope {
    pub anchor_cdf: f64,
    pub anchor_dens: f64,
    pub side: EnvelopeSide,
}

/// Exponential CDF bounds implied by bi-log-concavity at offset `t` from the
/// anchor:
///
///   1 - (1-F) exp(-f t / (1-F))  <=  F(k+t)  <=  F exp(f t / F),
///
/// clipped to [0,1]. Valid for t of either sign; at t = 0 both sides equal
/// the anchor.
pub fn blc_envelope_eval(env: &BlcEnvelope, t: f64) -> BoundInterval {
    let f = env.anchor_cdf;
    let d = env.anchor_dens;
    let lower = if 1.0 - f <= 0.0 {
        1.0
    } else {
        1.0 - (1.0 - f) * (-d * t / (1.0 - f)).exp()
    };
    let upper = if f <= 0.0 { 0.0 } else { f * (d * t / f).exp() };
    let lower = lower.clamp(0.0, 1.0);
    let upper = upper.clamp(0.0, 1.0);
    BoundInterval {
        lower: lower.min(upper),
        upper: upper.max(lower),
        units: Units::Probability,
    }
}

/// Envelope bounds on the mass-(1-p) active component (1-p) F*(k+t), where
/// F* is the latent CDF conditional on not being a counterfactual buncher
/// and the anchor is the unconditional F(k) (which includes p). Reduces to
/// the plain envelope scaled by (1-p) when p = 0.
fn active_component_envelope(anchor_cdf: f64, anchor_dens: f64, p: f64, t: f64) -> (f64, f64) {
    let lower = if 1.0 - anchor_cdf <= 0.0 {
        1.0 - p
    } else {
        1.0 - p - (1.0 - anchor_cdf) * (-anchor_dens * t / (1.0 - anchor_cdf)).exp()
    };
    let a = anchor_cdf - p;
    let upper = if a <= 0.0 {
        0.0
    } else {
        a * (anchor_dens * t / a).exp()
    };
    let lower = lower.clamp(0.0, 1.0 - p);
    let upper = upper.clamp(0.0, 1.0 - p);
    (lower.min(upper), upper.max(lower))
}

/// Identified interval for the net bunching mass that a kink at `k_prime`
/// would attract, holding the latent outcome distributions fixed.
///
/// The observed side of `k_prime` is read straight from the ECDF; the
/// unobserved side is bounded by the envelope extension of the matching
/// kink anchor. Counterfactual bunchers stay at the original kink, so their
/// mass is netted out only at `k_prime = k`.
pub fn kink_shift_bunching(
    hours: &[f64],
    est: &KinkEstimates,
    p: f64,
    k_prime: f64,
) -> Result<BoundInterval> {
    let ecdf = EmpiricalCdf::from_values(hours)?;
    shifted_bunching(&ecdf, est, p, k_prime)
}

fn shifted_bunching(
    ecdf: &EmpiricalCdf,
    est: &KinkEstimates,
    p: f64,
    k_prime: f64,
) -> Result<BoundInterval> {
    if k_prime < ecdf.min() || k_prime > ecdf.max() {
        return Err(Error::InvalidArgument(format!(
            "k' = {k_prime} lies outside the data support [{}, {}]",
            ecdf.min(),
            ecdf.max()
        )));
    }
    let mass = est.cdf_plus - est.cdf_minus;
    let net = mass - p;
    let t = k_prime - est.k;
    if t == 0.0 {
        return BoundInterval::new(net, net, Units::Probability);
    }
    let (lower, upper) = if t > 0.0 {
        // F1(k') is observed; (1-p) F0*(k') comes from the envelope anchored
        // at F0(k) = cdf_minus + p
        let f1_obs = ecdf.eval(k_prime);
        let (lo0, hi0) = active_component_envelope(est.cdf_minus + p, est.dens_minus, p, t);
        (f1_obs - p - hi0, f1_obs - p - lo0)
    } else {
        // F0(k') is observed; (1-p) F1*(k') comes from the envelope anchored
        // at F1(k) = cdf_plus
        let f0_obs = ecdf.eval(k_prime);
        let (lo1, hi1) = active_component_envelope(est.cdf_plus, est.dens_plus, p, t);
        (lo1 - f0_obs, hi1 - f0_obs)
    };
    let lower = lower.clamp(0.0, 1.0);
    let upper = upper.clamp(0.0, 1.0);
    BoundInterval::new(lower.min(upper), upper.max(lower), Units::Probability)
}

/// Interval for the change in mean hours from relocating the kink to
/// `k_prime`: the bunching interval integrated over the traversed range on
/// an eighth-hour grid (endpoint-wise trapezoids, sign-flipped for moves
/// down).
pub fn kink_shift_hours(
    hours: &[f64],
    est: &KinkEstimates,
    p: f64,
    k_prime: f64,
) -> Result<BoundInterval> {
    let ecdf = EmpiricalCdf::from_values(hours)?;
    let (a, b) = if k_prime >= est.k {
        (est.k, k_prime)
    } else {
        (k_prime, est.k)
    };
    let mut grid = Vec::new();
    let mut s = a;
    while s < b - 1e-12 {
        grid.push(s);
        s += HOURS_GRID;
    }
    grid.push(b);
    let mut lo_sum = 0.0;
    let mut hi_sum = 0.0;
    let mut prev: Option<(f64, BoundInterval)> = None;
    for &g in &grid {
        let cur = shifted_bunching(&ecdf, est, p, g)?;
        if let Some((g0, prev_int)) = prev {
            let w = (g - g0) / 2.0;
            lo_sum += w * (prev_int.lower + cur.lower);
            hi_sum += w * (prev_int.upper + cur.upper);
        }
        prev = Some((g, cur));
    }
    if k_prime >= est.k {
        BoundInterval::new(lo_sum, hi_sum, Units::Hours)
    } else {
        BoundInterval::new(-hi_sum, -lo_sum, Units::Hours)
    }
}

/// Point values and intervals for the marginal comparative statics at the
/// observed regime.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalStatics {
    /// d(net bunching)/dk = f1(k) - f0(k).
    pub d_bunching_d_k: f64,
    /// d E[hours]/dk = net bunching.
    pub d_mean_hours_d_k: f64,
    /// d(bunching)/d rho1 under a constant-elasticity reading of the
    /// conditional response at the kink (positive: a higher premium sweeps
    /// mass into the kink).
    pub d_bunching_d_rho: BoundInterval,
    /// d E[hours]/d rho1 (negative: a higher premium shortens overtime
    /// hours), from the sample analogue of the above-kink response integral.
    pub d_mean_hours_d_rho: BoundInterval,
}

/// Compute the statics record. `elasticity` is a magnitude interval; the
/// conditional derivative readings are dh/d rho = -|e| h / rho1.
pub fn marginal_statics(
    hours: &[f64],
    est: &KinkEstimates,
    p: f64,
    elasticity: &BoundInterval,
    rho1: f64,
) -> Result<MarginalStatics> {
    if !(rho1 > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "rho1 must exceed 1, got {rho1}"
        )));
    }
    let net = est.cdf_plus - est.cdf_minus - p;
    let k = est.k;
    let (e_lo, e_hi) = (elasticity.lower.max(0.0), elasticity.upper.max(0.0));
    let d_bunching_d_rho = BoundInterval::new(
        k * est.dens_plus * (k * e_lo / rho1),
        k * est.dens_plus * (k * e_hi / rho1),
        Units::Probability,
    )?;
    let above: Vec<f64> = hours
        .iter()
        .copied()
        .filter(|&h| h >= k + GRID_TOL)
        .collect();
    let share_above = above.len() as f64 / hours.len() as f64;
    let mean_h_above = if above.is_empty() {
        0.0
    } else {
        above.iter().sum::<f64>() / above.len() as f64
    };
    let d_mean_hours_d_rho = BoundInterval::new(
        -share_above * mean_h_above * e_hi / rho1,
        -share_above * mean_h_above * e_lo / rho1,
        Units::Hours,
    )?;
    Ok(MarginalStatics {
        d_bunching_d_k: est.dens_plus - est.dens_minus,
        d_mean_hours_d_k: net,
        d_bunching_d_rho,
        d_mean_hours_d_rho,
    })
}

/// Interval for the average ex-post hours effect of the kink,
/// E[h - h0] = B E[k - h0 | h = k] - P(h > k) E[h0 - h1 | h > k].
///
/// The buncher term uses the h0-side halves of the ATE decomposition; the
/// overtime term is bounded below by the buncher-ATE lower bound in levels
/// and above by the constant-elasticity per-paycheck extrapolation
/// h (1.5^e - 1) at the elasticity interval's upper end.
pub fn expost_kink_effect(
    hours: &[f64],
    est: &KinkEstimates,
    p: f64,
    elasticity: &BoundInterval,
) -> Result<BoundInterval> {
    let inp = AteInputs::from_estimates(est, p)?;
    let net = inp.net_bunching().max(0.0);
    let k = est.k;

    let (buncher_lo, buncher_hi) = if net > 0.0 {
        let (half_lo, half_hi) = buncher_h0_half_bounds(&inp)?;
        (-net * half_hi, -net * half_lo)
    } else {
        (0.0, 0.0)
    };

    let above: Vec<f64> = hours
        .iter()
        .copied()
        .filter(|&h| h >= k + GRID_TOL)
        .collect();
    let (ot_lo, ot_hi) = if above.is_empty() {
        (0.0, 0.0)
    } else {
        let share = above.len() as f64 / hours.len() as f64;
        let e_hi = elasticity.upper.max(0.0);
        let mean_extrap = above
            .iter()
            .map(|&h| h * ((1.5f64).powf(e_hi) - 1.0))
            .sum::<f64>()
            / above.len() as f64;
        let delta_lower = if net > 0.0 {
            buncher_ate_bounds(&inp)?.lower
        } else {
            0.0
        };
        let hi_mag = mean_extrap.max(delta_lower);
        let lo_mag = mean_extrap.min(delta_lower);
        (-share * hi_mag, -share * lo_mag)
    };
    BoundInterval::new(buncher_lo + ot_lo, buncher_hi + ot_hi, Units::Hours)
}

/// Upper bound on the hours effect of straight-wage adjustment: zero below,
/// and above the average over overtime paychecks of e ln(w*/w) h with
/// w*/w = (h + 0.5 (h - k))/h, the no-kink straight wage that keeps pay at
/// h anticipated hours unchanged.
pub fn wage_effect_upper(hours: &[f64], elasticity_upper: f64, k: f64) -> Result<BoundInterval> {
    if hours.is_empty() {
        return Err(Error::EmptyInput);
    }
    let e = elasticity_upper.max(0.0);
    let total: f64 = hours
        .iter()
        .filter(|&&h| h >= k + GRID_TOL)
        .map(|&h| e * ((h + 0.5 * (h - k)) / h).ln() * h)
        .sum();
    BoundInterval::new(0.0, total / hours.len() as f64, Units::Hours)
}

/// Full policy evaluation bundle.
#[derive(Debug, Clone)]
pub struct PolicyReport {
    pub effect_of_kink: BoundInterval,
    pub wage_effect: BoundInterval,
    /// Kink effect plus wage effect; the interdependency term is set to
    /// zero.
    pub total_theta: BoundInterval,
    pub statics: MarginalStatics,
    pub double_time: BoundInterval,
    /// How new bunchers are valued in the double-time upper bound.
    pub new_buncher_valuation: &'static str,
}

/// Combine the decomposition terms; the interdependency term is zero.
pub fn flsa_total_effect(
    effect_of_kink: &BoundInterval,
    wage_effect: &BoundInterval,
) -> BoundInterval {
    effect_of_kink.add(wage_effect)
}

/// Run the whole policy evaluation at the observed regime: the ex-post
/// decomposition, the marginal statics, and the premium counterfactual.
pub fn evaluate_policy(
    hours: &[f64],
    est: &KinkEstimates,
    p: f64,
    elasticity: &BoundInterval,
    rho1: f64,
    rho_bar: f64,
) -> Result<PolicyReport> {
    let effect_of_kink = expost_kink_effect(hours, est, p, elasticity)?;
    let wage_effect = wage_effect_upper(hours, elasticity.upper, est.k)?;
    let total_theta = flsa_total_effect(&effect_of_kink, &wage_effect);
    let statics = marginal_statics(hours, est, p, elasticity, rho1)?;
    let double_time = double_time_effect(hours, est, p, elasticity, rho1, rho_bar)?;
    Ok(PolicyReport {
        effect_of_kink,
        wage_effect,
        total_theta,
        statics,
        double_time,
        new_buncher_valuation: "k_hours",
    })
}

/// Interval for the change in mean hours from raising the premium to
/// `rho_bar` (default double time).
///
/// Magnitude lower bound: constant-elasticity shrinkage of every overtime
/// paycheck, h (1 - (rho_bar/rho1)^(-e_lo)), censored at the unit's
/// distance to the kink (a unit swept into the point mass stops there).
/// Magnitude upper bound: the overtime response bound from the ex-post
/// machinery plus k hours for each of the (B - p) new bunchers the premium
/// increase is allowed to create.
pub fn double_time_effect(
    hours: &[f64],
    est: &KinkEstimates,
    p: f64,
    elasticity: &BoundInterval,
    rho1: f64,
    rho_bar: f64,
) -> Result<BoundInterval> {
    if !(rho_bar >= rho1 && rho1 > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need rho_bar >= rho1 > 1, got rho_bar = {rho_bar}, rho1 = {rho1}"
        )));
    }
    if rho_bar == rho1 {
        return BoundInterval::new(0.0, 0.0, Units::Hours);
    }
    let k = est.k;
    let net = (est.cdf_plus - est.cdf_minus - p).max(0.0);
    let n = hours.len() as f64;
    let e_lo = elasticity.lower.max(0.0);
    let e_hi = elasticity.upper.max(0.0);
    let ratio = rho_bar / rho1;

    // constant-elasticity shrinkage, censored at the kink: a unit swept
    // into the point mass cannot drop further than the distance to k
    let mag_lower: f64 = hours
        .iter()
        .filter(|&&h| h >= k + GRID_TOL)
        .map(|&h| (h * (1.0 - ratio.powf(-e_lo))).min(h - k))
        .sum::<f64>()
        / n;

    let above: Vec<f64> = hours
        .iter()
        .copied()
        .filter(|&h| h >= k + GRID_TOL)
        .collect();
    let share = above.len() as f64 / n;
    let mean_extrap = if above.is_empty() {
        0.0
    } else {
        above
            .iter()
            .map(|&h| h * ((1.5f64).powf(e_hi) - 1.0))
            .sum::<f64>()
            / above.len() as f64
    };
    let mag_upper = share * mean_extrap + k * net;

    let lo = -mag_upper.max(mag_lower);
    let hi = -mag_upper.min(mag_lower);
    BoundInterval::new(lo, hi, Units::Hours)
}

/// Kink-shift curve rows for export.
#[derive(Debug, Clone, Copy)]
pub struct KinkShiftPoint {
    pub k_prime: f64,
    pub bunch: BoundInterval,
    pub hours_effect: BoundInterval,
}

/// Evaluate the bunching and mean-hours intervals over a grid of candidate
/// kink locations.
pub fn kink_shift_curve(
    hours: &[f64],
    est: &KinkEstimates,
    p: f64,
    k_lo: f64,
    k_hi: f64,
    step: f64,
) -> Result<Vec<KinkShiftPoint>> {
    if !(step > 0.0 && k_lo <= k_hi) {
        return Err(Error::InvalidArgument(format!(
            "bad kink-shift grid: [{k_lo}, {k_hi}] step {step}"
        )));
    }
    let mut out = Vec::new();
    let mut kp = k_lo;
    while kp <= k_hi + 1e-9 {
        let bunch = kink_shift_bunching(hours, est, p, kp)?;
        let hours_effect = kink_shift_hours(hours, est, p, kp)?;
        out.push(KinkShiftPoint {
            k_prime: kp,
            bunch,
            hours_effect,
        });
        kp += step;
    }
    Ok(out)
}

/// CSV export: `k_prime,bunch_lo,bunch_hi,hours_lo,hours_hi`.
pub fn write_kink_shift_csv<W: Write>(points: &[KinkShiftPoint], mut w: W) -> Result<()> {
    writeln!(w, "k_prime,bunch_lo,bunch_hi,hours_lo,hours_hi")?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{},{}",
            p.k_prime, p.bunch.lower, p.bunch.upper, p.hours_effect.lower, p.hours_effect.upper
        )?;
    }
    Ok(())
}
