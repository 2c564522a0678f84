//! Firm-clustered nonparametric bootstrap and Imbens-Manski/Stoye
//! confidence intervals for partially identified parameters.

use std::collections::BTreeMap;

use rand::RngCore;

use crate::data::PaycheckTable;
use crate::normal::{std_normal_cdf, std_normal_quantile};
use crate::{par, rng, Error, Result};

/// Named statistics computed on one (re)sample. BTreeMap keeps field order
/// deterministic.
pub type StatRecord = BTreeMap<String, f64>;

#[derive(Debug, Clone)]
pub struct BootstrapResult {
    /// Successful replicate records, in replicate order.
    pub replicates: Vec<StatRecord>,
    pub n_reps: usize,
    pub seed: u64,
    /// Replicates where the statistic errored (e.g. envelope feasibility
    /// failed in a resample); excluded from `replicates`.
    pub failed_reps: usize,
}

/// Draw firms with replacement (as many as the table has), concatenate their
/// rows, and evaluate `statistic` on each replicate. Replicate r's
/// randomness depends only on (seed, r), and results are assembled in
/// replicate order, so parallel and serial runs are bit-identical.
pub fn cluster_bootstrap<F>(
    table: &PaycheckTable,
    statistic: &F,
    n_reps: usize,
    seed: u64,
) -> Result<BootstrapResult>
where
    F: Fn(&PaycheckTable) -> Result<StatRecord> + Sync,
{
    let n_firms = table.n_firms();
    if n_firms < 2 {
        return Err(Error::InvalidArgument(format!(
            "clustered bootstrap needs at least 2 firms, table has {n_firms}"
        )));
    }
    if n_reps == 0 {
        return Err(Error::InvalidArgument("n_reps must be at least 1".into()));
    }
    let raw = par::map_indexed(n_reps, |r| {
        let mut stream = rng::substream(seed, r as u64);
        let draws: Vec<usize> = (0..n_firms)
            .map(|_| (stream.next_u64() % n_firms as u64) as usize)
            .collect();
        let resampled = table.resample_firms(&draws);
        statistic(&resampled)
    });
    let mut replicates = Vec::with_capacity(n_reps);
    let mut failed_reps = 0usize;
    for r in raw {
        match r {
            Ok(rec) => replicates.push(rec),
            Err(_) => failed_reps += 1,
        }
    }
    Ok(BootstrapResult {
        replicates,
        n_reps,
        seed,
        failed_reps,
    })
}

/// Bootstrap standard error of one field: the sample standard deviation
/// across successful replicates.
pub fn se_from_replicates(result: &BootstrapResult, field: &str) -> Result<f64> {
    let xs: Vec<f64> = result
        .replicates
        .iter()
        .filter_map(|rec| rec.get(field).copied())
        .filter(|x| x.is_finite())
        .collect();
    if xs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "standard error of {field:?} needs at least 2 successful replicates, have {}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Ok(var.sqrt())
}

/// A confidence interval for a partially identified parameter with the
/// adaptive critical value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImCi {
    pub alpha: f64,
    pub lower: f64,
    pub upper: f64,
    /// The adaptive critical value, between the one-sided and two-sided
    /// normal quantiles.
    pub critical_value: f64,
    /// Set when the bound estimates arrived inverted and were swapped.
    pub inputs_swapped: bool,
}

/// Interval [lower_hat - c se_lower, upper_hat + c se_upper] where c solves
///
///   Phi(c + (upper_hat - lower_hat)/max(se)) - Phi(-c) = 1 - alpha
///
/// by bisection on [z_{1-alpha}, z_{1-alpha/2}]. With both standard errors
/// zero, the estimated identified set itself is returned.
pub fn im_confidence_interval(
    lower_hat: f64,
    upper_hat: f64,
    se_lower: f64,
    se_upper: f64,
    alpha: f64,
) -> Result<ImCi> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must be in (0,1), got {alpha}"
        )));
    }
    if se_lower < 0.0 || se_upper < 0.0 || !se_lower.is_finite() || !se_upper.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "standard errors must be nonnegative, got ({se_lower}, {se_upper})"
        )));
    }
    let (lo, hi, swapped) = if lower_hat <= upper_hat {
        (lower_hat, upper_hat, false)
    } else {
        (upper_hat, lower_hat, true)
    };

    let z_one = std_normal_quantile(1.0 - alpha);
    let z_two = std_normal_quantile(1.0 - alpha / 2.0);
    let max_se = se_lower.max(se_upper);
    if max_se == 0.0 {
        return Ok(ImCi {
            alpha,
            lower: lo,
            upper: hi,
            critical_value: z_one,
            inputs_swapped: swapped,
        });
    }
    let w = (hi - lo) / max_se;
    let gap = |c: f64| std_normal_cdf(c + w) - std_normal_cdf(-c) - (1.0 - alpha);
    let mut a = z_one;
    let mut b = z_two;
    // root is bracketed: gap(z_one) <= 0 <= gap(z_two)
    let mut c = 0.5 * (a + b);
    for _ in 0..200 {
        c = 0.5 * (a + b);
        if b - a < 1e-6 {
            break;
        }
        if gap(c) < 0.0 {
            a = c;
        } else {
            b = c;
        }
    }
    Ok(ImCi {
        alpha,
        lower: lo - c * se_lower,
        upper: hi + c * se_upper,
        critical_value: c,
        inputs_swapped: swapped,
    })
}
