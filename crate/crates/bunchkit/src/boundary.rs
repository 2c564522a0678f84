//! One-sided local polynomial estimation of the CDF level and density at the
//! kink, with a plug-in bandwidth selector and a bi-log-concavity diagnostic.
//!
//! The estimator regresses empirical-CDF values on a polynomial in (h - k)
//! over one side of the kink with triangular kernel weights; the intercept
//! estimates the one-sided CDF limit and the slope the one-sided density.
//! Everything is written against distinct-value/multiplicity pairs so that
//! grid-snapped hours cost a few hundred design rows instead of hundreds of
//! thousands.

use crate::{Error, Result, GRID_TOL, HOURS_GRID};

/// Which side of the kink to estimate from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// Sufficient statistics at the kink: one-sided CDF limits, one-sided
/// densities, and the bandwidth/counts behind them.
///
/// `cdf_minus` is the left limit of the observed CDF at `k` and `cdf_plus`
/// the value at `k` including the point mass, so `cdf_plus - cdf_minus` is
/// exactly the bunching mass when both come from the same sample.
#[derive(Debug, Clone)]
pub struct KinkEstimates {
    pub k: f64,
    pub cdf_minus: f64,
    pub cdf_plus: f64,
    pub dens_minus: f64,
    pub dens_plus: f64,
    pub bandwidth: f64,
    pub n_left: usize,
    pub n_right: usize,
    /// Non-fatal conditions detected during estimation, e.g. another point
    /// mass inside the bandwidth window.
    pub warnings: Vec<String>,
}

/// Distinct sorted values with multiplicities and full-sample ECDF levels.
struct DistinctEcdf {
    values: Vec<f64>,
    counts: Vec<f64>,
    cdf: Vec<f64>,
    n: usize,
}

fn distinct_ecdf(hours: &[f64]) -> Result<DistinctEcdf> {
    if hours.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(bad) = hours.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-finite hours value {bad}"
        )));
    }
    let mut sorted = hours.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let mut values = Vec::new();
    let mut counts = Vec::new();
    let mut cdf = Vec::new();
    let mut i = 0usize;
    while i < n {
        let v = sorted[i];
        let mut j = i + 1;
        while j < n && sorted[j] == v {
            j += 1;
        }
        values.push(v);
        counts.push((j - i) as f64);
        cdf.push(j as f64 / n as f64);
        i = j;
    }
    Ok(DistinctEcdf {
        values,
        counts,
        cdf,
        n,
    })
}

impl DistinctEcdf {
    /// Indices of distinct values strictly on one side of `k` (values within
    /// `tol` of `k` belong to neither side).
    fn side_indices(&self, k: f64, side: Side, tol: f64) -> Vec<usize> {
        (0..self.values.len())
            .filter(|&i| match side {
                Side::Left => self.values[i] <= k - tol,
                Side::Right => self.values[i] >= k + tol,
            })
            .collect()
    }

    fn multiplicity(&self, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.counts[i]).sum()
    }
}

/// Triangular kernel.
fn tri_kernel(u: f64) -> f64 {
    (1.0 - u.abs()).max(0.0)
}

/// Weighted least-squares polynomial fit by Householder QR on the
/// sqrt-weight-scaled design. `xs` are already scaled to O(1); returns the
/// coefficients in the scaled variable.
fn wls_polyfit(xs: &[f64], ys: &[f64], ws: &[f64], degree: usize) -> Result<Vec<f64>> {
    let m = xs.len();
    let p = degree + 1;
    debug_assert!(m >= p);
    // column-major design, scaled by sqrt(w)
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(p);
    for j in 0..p {
        let col = (0..m)
            .map(|i| ws[i].sqrt() * xs[i].powi(j as i32))
            .collect::<Vec<f64>>();
        cols.push(col);
    }
    let mut rhs: Vec<f64> = (0..m).map(|i| ws[i].sqrt() * ys[i]).collect();

    let norm_scale = cols
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0f64, f64::max);
    let mut rdiag = vec![0.0f64; p];
    for j in 0..p {
        // Householder reflector for column j below row j
        let (head, tail) = cols.split_at_mut(j + 1);
        let col = &mut head[j];
        let norm = col[j..m].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-13 * norm_scale.max(1e-300) {
            return Err(Error::SingularDesign(format!(
                "column {j} of the design is numerically rank deficient"
            )));
        }
        let alpha = if col[j] >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = col[j..m].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        col[j] = alpha;
        rdiag[j] = alpha;
        for x in col[j + 1..].iter_mut() {
            *x = 0.0;
        }
        if vnorm2 > 0.0 {
            for c in tail.iter_mut() {
                let dot: f64 = (j..m).map(|i| v[i - j] * c[i]).sum();
                let scale = 2.0 * dot / vnorm2;
                for i in j..m {
                    c[i] -= scale * v[i - j];
                }
            }
            let dot: f64 = (j..m).map(|i| v[i - j] * rhs[i]).sum();
            let scale = 2.0 * dot / vnorm2;
            for i in j..m {
                rhs[i] -= scale * v[i - j];
            }
        }
    }
    // back substitution on the triangular system
    let mut beta = vec![0.0f64; p];
    for j in (0..p).rev() {
        let mut s = rhs[j];
        for l in j + 1..p {
            s -= cols[l][j] * beta[l];
        }
        if rdiag[j].abs() < 1e-13 * norm_scale.max(1e-300) {
            return Err(Error::SingularDesign(format!("zero pivot at column {j}")));
        }
        beta[j] = s / rdiag[j];
    }
    Ok(beta)
}

/// Local polynomial fit of the empirical CDF on one side of `k`.
///
/// Returns `(cdf_limit, density_limit)`: the fitted value and first
/// derivative of the ECDF extrapolated to `k`, using only observations
/// strictly on `side` within `bandwidth` and triangular kernel weights.
/// Observations exactly at the kink never enter either side.
pub fn local_poly_boundary(
    hours: &[f64],
    k: f64,
    side: Side,
    bandwidth: f64,
    degree: usize,
) -> Result<(f64, f64)> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "bandwidth must be > 0, got {bandwidth}"
        )));
    }
    if degree == 0 {
        return Err(Error::InvalidArgument("degree must be >= 1".into()));
    }
    let ecdf = distinct_ecdf(hours)?;
    fit_at(&ecdf, k, side, bandwidth, degree, GRID_TOL)
}

fn fit_at(
    ecdf: &DistinctEcdf,
    k: f64,
    side: Side,
    bandwidth: f64,
    degree: usize,
    tol: f64,
) -> Result<(f64, f64)> {
    let idx = ecdf.side_indices(k, side, tol);
    let in_window: Vec<usize> = idx
        .into_iter()
        .filter(|&i| ((ecdf.values[i] - k) / bandwidth).abs() < 1.0)
        .collect();
    let with_mult = ecdf.multiplicity(&in_window) as usize;
    if with_mult < degree + 2 {
        return Err(Error::InsufficientSupport {
            side: side.as_str(),
            have: with_mult,
            need: degree + 2,
        });
    }
    if in_window.len() < degree + 2 {
        return Err(Error::SingularDesign(format!(
            "only {} distinct abscissae on the {} side within the window, need {}",
            in_window.len(),
            side.as_str(),
            degree + 2
        )));
    }
    let xs: Vec<f64> = in_window
        .iter()
        .map(|&i| (ecdf.values[i] - k) / bandwidth)
        .collect();
    let ys: Vec<f64> = in_window.iter().map(|&i| ecdf.cdf[i]).collect();
    let ws: Vec<f64> = in_window
        .iter()
        .zip(&xs)
        .map(|(&i, &u)| ecdf.counts[i] * tri_kernel(u))
        .collect();
    let beta = wls_polyfit(&xs, &ys, &ws, degree)?;
    Ok((beta[0], beta[1] / bandwidth))
}

/// Plug-in bandwidth for one side.
///
/// A global quartic fit of the ECDF on the side supplies pilot estimates of
/// the density `f` and its derivative `f'` at the kink; the bandwidth then
/// follows the usual n^(-1/5) rule for a local-linear derivative estimate
/// with a triangular kernel,
///
///   alpha = ((30/7) * f / (f'^2 * n))^(1/5),
///
/// where the 30/7 collects the kernel's bias and variance constants. The
/// result is floored at two grid steps and capped at the side's span.
pub fn side_bandwidth(hours: &[f64], k: f64, side: Side) -> Result<f64> {
    let ecdf = distinct_ecdf(hours)?;
    side_bandwidth_inner(&ecdf, k, side, GRID_TOL)
}

fn side_bandwidth_inner(ecdf: &DistinctEcdf, k: f64, side: Side, tol: f64) -> Result<f64> {
    let idx = ecdf.side_indices(k, side, tol);
    let n_side = ecdf.multiplicity(&idx) as usize;
    if n_side < 30 {
        return Err(Error::InsufficientSupport {
            side: side.as_str(),
            have: n_side,
            need: 30,
        });
    }
    let span = idx
        .iter()
        .map(|&i| (ecdf.values[i] - k).abs())
        .fold(0.0f64, f64::max)
        .max(2.0 * tol);
    if idx.len() < 6 {
        return Err(Error::SingularDesign(format!(
            "only {} distinct abscissae on the {} side, need 6 for the pilot fit",
            idx.len(),
            side.as_str()
        )));
    }
    let xs: Vec<f64> = idx.iter().map(|&i| (ecdf.values[i] - k) / span).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| ecdf.cdf[i]).collect();
    let ws: Vec<f64> = idx.iter().map(|&i| ecdf.counts[i]).collect();
    let beta = wls_polyfit(&xs, &ys, &ws, 4)?;
    let dens = beta[1] / span;
    let curv = 2.0 * beta[2] / (span * span);
    let dens = if dens > 0.0 {
        dens
    } else {
        n_side as f64 / ecdf.n as f64 / span
    };
    let n = ecdf.n as f64;
    let alpha = if curv.abs() < 1e-12 {
        span
    } else {
        ((30.0 / 7.0) * dens / (curv * curv * n)).powf(0.2)
    };
    Ok(alpha.clamp(4.0 * tol, span))
}

/// MSE-oriented bandwidth: the per-side plug-in bandwidths averaged across
/// the two sides.
pub fn select_bandwidth(hours: &[f64], k: f64) -> Result<f64> {
    let ecdf = distinct_ecdf(hours)?;
    let left = side_bandwidth_inner(&ecdf, k, Side::Left, GRID_TOL)?;
    let right = side_bandwidth_inner(&ecdf, k, Side::Right, GRID_TOL)?;
    Ok(0.5 * (left + right))
}

/// Concavity diagnostic for ln F and ln(1-F) on the observed side.
#[derive(Debug, Clone)]
pub struct BlcDiagnostic {
    pub side: Side,
    pub bandwidth: f64,
    /// (grid point, smoothed CDF) where the fit was possible.
    pub smoothed: Vec<(f64, f64)>,
    /// Largest positive second difference of ln F (per hour^2); zero means
    /// no violation detected.
    pub max_violation_log_cdf: f64,
    /// Largest positive second difference of ln(1-F).
    pub max_violation_log_survival: f64,
}

impl BlcDiagnostic {
    pub fn max_violation(&self) -> f64 {
        self.max_violation_log_cdf
            .max(self.max_violation_log_survival)
    }
}

/// Evaluate the smoothed ECDF at grid points on one side and report the
/// worst convexity violation of ln F and ln(1-F). Diagnostic only: fit
/// failures at individual grid points are skipped rather than raised.
pub fn blc_diagnostic(
    hours: &[f64],
    k: f64,
    side: Side,
    grid: &[f64],
    bandwidth: Option<f64>,
) -> Result<BlcDiagnostic> {
    let ecdf = distinct_ecdf(hours)?;
    let idx = ecdf.side_indices(k, side, GRID_TOL);
    if idx.is_empty() {
        return Err(Error::InsufficientSupport {
            side: side.as_str(),
            have: 0,
            need: 2,
        });
    }
    let span = ecdf.values[*idx.last().unwrap()] - ecdf.values[idx[0]];
    let bw = bandwidth
        .or_else(|| side_bandwidth_inner(&ecdf, k, side, GRID_TOL).ok())
        .unwrap_or((span / 2.0).max(2.0 * HOURS_GRID));

    let mut smoothed = Vec::with_capacity(grid.len());
    for &g in grid {
        // interior smoothing: local linear fit centered at g over side points
        let in_window: Vec<usize> = idx
            .iter()
            .copied()
            .filter(|&i| ((ecdf.values[i] - g) / bw).abs() < 1.0)
            .collect();
        if in_window.len() < 2 {
            continue;
        }
        let xs: Vec<f64> = in_window
            .iter()
            .map(|&i| (ecdf.values[i] - g) / bw)
            .collect();
        let ys: Vec<f64> = in_window.iter().map(|&i| ecdf.cdf[i]).collect();
        let ws: Vec<f64> = in_window
            .iter()
            .zip(&xs)
            .map(|(&i, &u)| ecdf.counts[i] * tri_kernel(u))
            .collect();
        if let Ok(beta) = wls_polyfit(&xs, &ys, &ws, 1) {
            let f_hat = beta[0];
            if f_hat > 0.0 && f_hat < 1.0 {
                smoothed.push((g, f_hat));
            }
        }
    }

    let viol = |vals: &[(f64, f64)], transform: &dyn Fn(f64) -> f64| -> f64 {
        let mut worst = 0.0f64;
        for w in vals.windows(3) {
            let (x0, y0) = (w[0].0, transform(w[0].1));
            let (x1, y1) = (w[1].0, transform(w[1].1));
            let (x2, y2) = (w[2].0, transform(w[2].1));
            // divided-difference second derivative, robust to uneven grids
            let d2 = 2.0
                * (y0 / ((x0 - x1) * (x0 - x2))
                    + y1 / ((x1 - x0) * (x1 - x2))
                    + y2 / ((x2 - x0) * (x2 - x1)));
            worst = worst.max(d2);
        }
        worst
    };
    Ok(BlcDiagnostic {
        side,
        bandwidth: bw,
        max_violation_log_cdf: viol(&smoothed, &|f| f.ln()),
        max_violation_log_survival: viol(&smoothed, &|f| (1.0 - f).ln()),
        smoothed,
    })
}

/// Assemble the kink sufficient statistics: CDF limits straight from the
/// ECDF (so the bunching identity is exact) and density limits from the
/// local polynomial fit at a common bandwidth.
pub fn kink_estimates(
    hours: &[f64],
    k: f64,
    p: f64,
    bandwidth_override: Option<f64>,
    degree: usize,
) -> Result<KinkEstimates> {
    kink_estimates_scaled(hours, k, p, bandwidth_override, degree, GRID_TOL)
}

/// [`kink_estimates`] with an explicit at-kink tolerance, for running the
/// machinery on transformed scales (log-hours use `GRID_TOL / k`).
pub fn kink_estimates_scaled(
    hours: &[f64],
    k: f64,
    p: f64,
    bandwidth_override: Option<f64>,
    degree: usize,
    tol: f64,
) -> Result<KinkEstimates> {
    let ecdf = distinct_ecdf(hours)?;
    let n = ecdf.n as f64;

    let mut below = 0.0f64;
    let mut at_k = 0.0f64;
    for (i, &v) in ecdf.values.iter().enumerate() {
        if v <= k - tol {
            below += ecdf.counts[i];
        } else if (v - k).abs() < tol {
            at_k += ecdf.counts[i];
        }
    }
    let cdf_minus = below / n;
    let mass = at_k / n;
    let cdf_plus = cdf_minus + mass;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!(
            "p must be a probability, got {p}"
        )));
    }
    if p > mass + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "counterfactual mass p={p} exceeds the bunching mass {mass}"
        )));
    }

    let bandwidth = match bandwidth_override {
        Some(b) if b > 0.0 && b.is_finite() => b,
        Some(b) => {
            return Err(Error::InvalidArgument(format!(
                "bandwidth must be > 0, got {b}"
            )))
        }
        None => {
            let l = side_bandwidth_inner(&ecdf, k, Side::Left, tol)?;
            let r = side_bandwidth_inner(&ecdf, k, Side::Right, tol)?;
            0.5 * (l + r)
        }
    };

    let (_, dens_minus) = fit_at(&ecdf, k, Side::Left, bandwidth, degree, tol)?;
    let (_, dens_plus) = fit_at(&ecdf, k, Side::Right, bandwidth, degree, tol)?;
    if dens_minus <= 0.0 {
        return Err(Error::Infeasible(format!(
            "estimated left density at the kink is nonpositive ({dens_minus})"
        )));
    }
    if dens_plus <= 0.0 {
        return Err(Error::Infeasible(format!(
            "estimated right density at the kink is nonpositive ({dens_plus})"
        )));
    }

    let window_count = |side: Side| -> usize {
        let idx = ecdf.side_indices(k, side, tol);
        idx.iter()
            .filter(|&&i| ((ecdf.values[i] - k) / bandwidth).abs() < 1.0)
            .map(|&i| ecdf.counts[i] as usize)
            .sum()
    };
    let n_left = window_count(Side::Left);
    let n_right = window_count(Side::Right);

    // another detected point mass inside the window undermines the local
    // fit; on grid-snapped data every distinct value holds a little mass,
    // so flag only values that stand well above their window's median share
    let mut warnings = Vec::new();
    let window: Vec<usize> = (0..ecdf.values.len())
        .filter(|&i| {
            (ecdf.values[i] - k).abs() >= tol && ((ecdf.values[i] - k) / bandwidth).abs() < 1.0
        })
        .collect();
    if window.len() >= 3 {
        let mut shares: Vec<f64> = window.iter().map(|&i| ecdf.counts[i] / n).collect();
        shares.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        let median = shares[shares.len() / 2];
        for &i in &window {
            let share = ecdf.counts[i] / n;
            if share >= 0.01 && share >= 5.0 * median {
                warnings.push(format!(
                    "point mass at {} (share {:.4}) lies inside the bandwidth window",
                    ecdf.values[i], share
                ));
            }
        }
    }

    Ok(KinkEstimates {
        k,
        cdf_minus,
        cdf_plus,
        dens_minus,
        dens_plus,
        bandwidth,
        n_left,
        n_right,
        warnings,
    })
}
