//! Synthetic paycheck panels from explicit latent choice models, plus exact
//! oracles for every identification claim the estimators make.
//!
//! Each worker draws from an independent substream of the master seed, and
//! draw order within a worker is fixed (every variable is drawn whether or
//! not it ends up used), so output is bit-identical across thread counts and
//! across nested configuration changes: turning the counterfactual-buncher
//! mass on does not disturb any other row's latent draws.

use std::io::Write;

use crate::data::{PayBasis, PayFrequency, PaycheckTable, RawPaycheck, TableBuilder};
use crate::normal::{std_normal_cdf, std_normal_pdf, std_normal_quantile};
use crate::{par, rng, Error, Result, HOURS_GRID};

/// Distribution of the latent heterogeneity index ln(eta).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LatentDist {
    /// ln(eta) ~ Normal(location, scale^2).
    NormalLog { location: f64, scale: f64 },
    /// ln(eta) ~ Logistic(location, scale).
    LogisticLog { location: f64, scale: f64 },
    /// ln(eta) ~ Uniform[location - scale, location + scale].
    UniformLog { location: f64, scale: f64 },
}

impl LatentDist {
    fn location(&self) -> f64 {
        match *self {
            LatentDist::NormalLog { location, .. }
            | LatentDist::LogisticLog { location, .. }
            | LatentDist::UniformLog { location, .. } => location,
        }
    }

    fn scale(&self) -> f64 {
        match *self {
            LatentDist::NormalLog { scale, .. }
            | LatentDist::LogisticLog { scale, .. }
            | LatentDist::UniformLog { scale, .. } => scale,
        }
    }

    /// Standardized draw of the family's base form (location 0, scale 1).
    fn standard_draw(&self, u: f64) -> f64 {
        match self {
            LatentDist::NormalLog { .. } => std_normal_quantile(u),
            LatentDist::LogisticLog { .. } => (u / (1.0 - u)).ln(),
            LatentDist::UniformLog { .. } => 2.0 * u - 1.0,
        }
    }
}

/// The choice model generating the latent hours pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimFamily {
    /// Isoelastic hours demand: h(rho) = eta^(-epsilon) rho^epsilon with
    /// epsilon < 0; proportional treatment effects.
    Isoelastic { epsilon: f64 },
    /// Exponential production f(h) = gamma (1 - e^(-h/gamma)): h(rho) =
    /// gamma ln(eta / rho); constant level treatment effect gamma ln 1.5.
    Exponential { gamma: f64 },
}

impl SimFamily {
    /// Latent hours under linear pay at factor rho.
    fn hours_at(&self, ln_eta: f64, rho: f64) -> f64 {
        match *self {
            SimFamily::Isoelastic { epsilon } => ((-epsilon) * ln_eta + epsilon * rho.ln()).exp(),
            SimFamily::Exponential { gamma } => gamma * (ln_eta - rho.ln()),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            SimFamily::Isoelastic { epsilon } => {
                if !(epsilon < 0.0 && epsilon.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "isoelastic epsilon must be negative, got {epsilon}"
                    )));
                }
            }
            SimFamily::Exponential { gamma } => {
                if !(gamma > 0.0 && gamma.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "exponential gamma must be positive, got {gamma}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Simulation configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Hours-demand elasticity for the isoelastic benchmark (< 0).
    pub epsilon: f64,
    pub latent: LatentDist,
    pub n_workers: usize,
    pub n_weeks: usize,
    pub n_firms: usize,
    /// Probability of being a counterfactual buncher.
    pub p_mass: f64,
    /// Probability a paycheck carries paid time off.
    pub pto_prob: f64,
    /// PTO hours menu as (hours, weight) pairs.
    pub pto_hours: Vec<(f64, f64)>,
    pub k: f64,
    pub seed: u64,
    pub snap_to_grid: bool,
    /// Share of the latent variance at the worker level (0 = fully
    /// idiosyncratic by week). The latent marginal is unchanged for the
    /// normal family; other families keep their overall spread but mix.
    pub worker_effect: f64,
    /// Redraw the counterfactual-buncher flag each week instead of fixing
    /// it per worker.
    pub cf_weekly: bool,
}

impl SimConfig {
    /// A calibrated weekly-hours baseline: elasticity -0.17, normal latent
    /// log-hours centered so the straddle band sits on the mode.
    pub fn baseline(seed: u64) -> SimConfig {
        let epsilon: f64 = -0.17;
        let delta = -epsilon * 1.5f64.ln();
        let lnh_loc = 40.0f64.ln() + delta / 2.0;
        let lnh_scale = 0.2;
        SimConfig {
            epsilon,
            latent: LatentDist::NormalLog {
                location: lnh_loc / -epsilon,
                scale: lnh_scale / -epsilon,
            },
            n_workers: 10_000,
            n_weeks: 20,
            n_firms: 500,
            p_mass: 0.0,
            pto_prob: 0.0,
            pto_hours: vec![(8.0, 1.0)],
            k: 40.0,
            seed,
            snap_to_grid: false,
            worker_effect: 0.0,
            cf_weekly: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.p_mass) {
            return Err(Error::InvalidArgument(format!(
                "p_mass must be in [0,1), got {}",
                self.p_mass
            )));
        }
        if !(0.0..=1.0).contains(&self.pto_prob) {
            return Err(Error::InvalidArgument(format!(
                "pto_prob must be in [0,1], got {}",
                self.pto_prob
            )));
        }
        if !(0.0..=1.0).contains(&self.worker_effect) {
            return Err(Error::InvalidArgument(format!(
                "worker_effect must be in [0,1], got {}",
                self.worker_effect
            )));
        }
        if self.latent.scale() <= 0.0 {
            return Err(Error::InvalidArgument(
                "latent scale must be positive".into(),
            ));
        }
        if self.n_workers == 0 || self.n_weeks == 0 || self.n_firms == 0 {
            return Err(Error::InvalidArgument(
                "n_workers, n_weeks, n_firms must be positive".into(),
            ));
        }
        if self.pto_prob > 0.0 {
            if self.pto_hours.is_empty() || self.pto_hours.iter().any(|&(h, w)| h <= 0.0 || w < 0.0)
            {
                return Err(Error::InvalidArgument(
                    "pto_hours menu must be positive".into(),
                ));
            }
            if self.pto_hours.iter().map(|&(_, w)| w).sum::<f64>() <= 0.0 {
                return Err(Error::InvalidArgument(
                    "pto_hours weights must not all be zero".into(),
                ));
            }
        }
        if !(self.k > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "k must be positive, got {}",
                self.k
            )));
        }
        Ok(())
    }
}

/// Ground truth for one simulated paycheck.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentRecord {
    pub worker: u32,
    pub firm: u32,
    pub week_index: i64,
    /// Hours under linear pay at the straight rate.
    pub h0: f64,
    /// Hours under linear pay at the premium rate.
    pub h1: f64,
    /// Counterfactual buncher: sits at the kink regardless of the schedule.
    pub kstar: bool,
    pub eta: f64,
}

/// A simulated panel: the observable table plus its latent ground truth,
/// row-aligned.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub table: PaycheckTable,
    pub latent: Vec<LatentRecord>,
}

impl SimOutput {
    /// Latent CSV export: `worker_id,firm_id,week_index,h0,h1,kstar,eta`.
    pub fn write_latent_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "worker_id,firm_id,week_index,h0,h1,kstar,eta")?;
        for r in &self.latent {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                self.table.worker_name(r.worker),
                self.table.firm_name(r.firm),
                r.week_index,
                r.h0,
                r.h1,
                r.kstar,
                r.eta
            )?;
        }
        Ok(())
    }
}

/// Realized hours implied by a latent pair at kink `k`: the lower outcome
/// below the kink, the upper above, the kink itself when they straddle it.
pub fn observed_from_latent(h0: f64, h1: f64, k: f64) -> Result<f64> {
    if h1 > h0 {
        return Err(Error::InvalidArgument(format!(
            "latent ordering violated: h1 = {h1} exceeds h0 = {h0}"
        )));
    }
    Ok(if h0 < k {
        h0
    } else if h1 > k {
        h1
    } else {
        k
    })
}

fn snap(x: f64) -> f64 {
    (x / HOURS_GRID).round() * HOURS_GRID
}

struct WorkerRows {
    paychecks: Vec<(String, String, i64, f64, f64, f64, f64)>, // worker, firm, week, wage, hours, pto, overtime
    latent: Vec<(i64, f64, f64, bool, f64)>,                   // week, h0, h1, kstar, eta
}

/// Simulate from the isoelastic benchmark.
pub fn simulate_isoelastic(config: &SimConfig) -> Result<SimOutput> {
    simulate_family(
        &SimFamily::Isoelastic {
            epsilon: config.epsilon,
        },
        config,
    )
}

/// Simulate from a general decreasing-marginal-product family under the
/// same panel scaffolding.
pub fn simulate_family(family: &SimFamily, config: &SimConfig) -> Result<SimOutput> {
    family.validate()?;
    config.validate()?;
    let lambda = config.worker_effect;
    let (w_mix, t_mix) = (lambda.sqrt(), (1.0 - lambda).sqrt());
    let pto_total: f64 = config.pto_hours.iter().map(|&(_, w)| w).sum();

    let per_worker = par::map_indexed(config.n_workers, |w| -> Result<WorkerRows> {
        let mut r = rng::substream(config.seed, w as u64);
        let firm = w % config.n_firms;
        let worker_id = format!("w{w}");
        let firm_id = format!("f{firm}");
        let wage = 10.0 + (rng::unit_open(&mut r) * 60.0).round() * 0.25;
        let xi_worker = config.latent.standard_draw(rng::unit_open(&mut r));
        let cf_worker = rng::unit_open(&mut r) < config.p_mass;

        let mut rows = WorkerRows {
            paychecks: Vec::new(),
            latent: Vec::new(),
        };
        for t in 0..config.n_weeks {
            // fixed draw schedule: every variable drawn every week
            let u_eta = rng::unit_open(&mut r);
            let u_cf = rng::unit_open(&mut r);
            let u_pto = rng::unit_open(&mut r);
            let u_pto_h = rng::unit_open(&mut r);

            let xi_week = config.latent.standard_draw(u_eta);
            let ln_eta = config.latent.location()
                + config.latent.scale() * (w_mix * xi_worker + t_mix * xi_week);
            let h0_active = family.hours_at(ln_eta, 1.0);
            let h1_active = family.hours_at(ln_eta, 1.5);
            if !(h1_active > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "latent draw ln_eta = {ln_eta} puts hours outside the family's range"
                )));
            }

            let cf = if config.cf_weekly {
                u_cf < config.p_mass
            } else {
                cf_worker
            };
            let pto = if u_pto < config.pto_prob {
                let mut target = u_pto_h * pto_total;
                let mut chosen = config.pto_hours[0].0;
                for &(h, wt) in &config.pto_hours {
                    if target < wt {
                        chosen = h;
                        break;
                    }
                    target -= wt;
                }
                chosen
            } else {
                0.0
            };

            // counterfactual bunchers target k paid hours: with PTO they work
            // k - pto, without it they sit at the kink with a zero effect
            let (h0, h1, kstar) = if cf {
                if pto > 0.0 {
                    let target = (config.k - pto).max(0.0);
                    (target, target, false)
                } else {
                    (config.k, config.k, true)
                }
            } else {
                (h0_active, h1_active, false)
            };

            let observed = observed_from_latent(h0, h1, config.k)?;
            let hours = if config.snap_to_grid {
                snap(observed)
            } else {
                observed
            };
            let overtime = if hours > config.k {
                hours - config.k
            } else {
                0.0
            };

            rows.paychecks.push((
                worker_id.clone(),
                firm_id.clone(),
                t as i64 + 1,
                wage,
                hours,
                pto,
                overtime,
            ));
            rows.latent
                .push((t as i64 + 1, h0, h1, kstar, ln_eta.exp()));
        }
        Ok(rows)
    });

    let mut builder = TableBuilder::new_unsnapped();
    let mut latent = Vec::with_capacity(config.n_workers * config.n_weeks);
    let mut row_no = 0usize;
    for (w, worker_rows) in per_worker.into_iter().enumerate() {
        let worker_rows = worker_rows?;
        for ((worker_id, firm_id, week, wage, hours, pto, overtime), (lweek, h0, h1, kstar, eta)) in
            worker_rows.paychecks.into_iter().zip(worker_rows.latent)
        {
            row_no += 1;
            builder.push(
                row_no,
                RawPaycheck {
                    worker_id: &worker_id,
                    firm_id: &firm_id,
                    week_index: week,
                    straight_wage: wage,
                    hours_worked: hours,
                    pto_hours: pto,
                    sick_hours: 0.0,
                    holiday_hours: 0.0,
                    overtime_hours: overtime,
                    pay_frequency: PayFrequency::Weekly,
                    pay_basis: PayBasis::Hourly,
                },
            )?;
            latent.push(LatentRecord {
                worker: w as u32,
                firm: (w % config.n_firms) as u32,
                week_index: lweek,
                h0,
                h1,
                kstar,
                eta,
            });
        }
    }
    let table = builder.finish()?;
    Ok(SimOutput { table, latent })
}

/// Exact buncher ATE from the latent table: the mean treatment effect over
/// straddling rows that are not counterfactual bunchers.
pub fn oracle_buncher_ate(latent: &[LatentRecord], k: f64) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for r in latent {
        if !r.kstar && r.h1 <= k && k <= r.h0 {
            sum += r.h0 - r.h1;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::InvalidArgument(
            "no active bunchers in the latent table".into(),
        ));
    }
    Ok(sum / n as f64)
}

/// Row-level and distributional checks of the observables mapping.
#[derive(Debug, Clone)]
pub struct IdentityReport {
    /// Point-mass count at the kink equals the straddle count.
    pub count_identity_holds: bool,
    pub n_at_kink: usize,
    pub n_straddling: usize,
    /// Observed hours below the kink match the lower latent outcome as a
    /// multiset (and symmetrically above).
    pub truncation_below_holds: bool,
    pub truncation_above_holds: bool,
    /// Rows whose observed value is inconsistent with their latent pair.
    pub violating_rows: Vec<usize>,
}

impl IdentityReport {
    pub fn all_pass(&self) -> bool {
        self.count_identity_holds
            && self.truncation_below_holds
            && self.truncation_above_holds
            && self.violating_rows.is_empty()
    }
}

/// Verify the bunching count identity and the truncated-distribution
/// equalities on a row-aligned (latent, observed-hours) pair. Exact
/// comparisons; meant for unsnapped output.
pub fn oracle_identities(latent: &[LatentRecord], hours: &[f64], k: f64) -> IdentityReport {
    let mut n_at_kink = 0usize;
    let mut n_straddling = 0usize;
    let mut violating_rows = Vec::new();
    let mut obs_below = Vec::new();
    let mut lat_below = Vec::new();
    let mut obs_above = Vec::new();
    let mut lat_above = Vec::new();

    for (i, (r, &h)) in latent.iter().zip(hours).enumerate() {
        if h == k {
            n_at_kink += 1;
        }
        if r.h1 <= k && k <= r.h0 {
            n_straddling += 1;
        }
        let expected = if r.h0 < k {
            r.h0
        } else if r.h1 > k {
            r.h1
        } else {
            k
        };
        if h != expected {
            violating_rows.push(i);
        }
        if h < k {
            obs_below.push(h);
        }
        if r.h0 < k {
            lat_below.push(r.h0);
        }
        if h > k {
            obs_above.push(h);
        }
        if r.h1 > k {
            lat_above.push(r.h1);
        }
    }
    let sorted = |mut v: Vec<f64>| {
        v.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        v
    };
    IdentityReport {
        count_identity_holds: n_at_kink == n_straddling,
        n_at_kink,
        n_straddling,
        truncation_below_holds: sorted(obs_below) == sorted(lat_below),
        truncation_above_holds: sorted(obs_above) == sorted(lat_above),
        violating_rows,
    }
}

/// Exact outcomes under a counterfactual overtime regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyOracle {
    pub bunching: f64,
    pub mean_hours: f64,
}

/// Recompute observed hours under premium `rho1` and threshold `k_new`,
/// holding latent heterogeneity fixed. Counterfactual bunchers stay at the
/// original kink `k_orig`; zero-effect rows stay put.
pub fn resimulate(
    latent: &[LatentRecord],
    family: &SimFamily,
    k_orig: f64,
    k_new: f64,
    rho1: f64,
) -> Result<Vec<f64>> {
    family.validate()?;
    if !(rho1 > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "rho1 must exceed 1, got {rho1}"
        )));
    }
    latent
        .iter()
        .map(|r| {
            if r.kstar {
                return Ok(k_orig);
            }
            if r.h0 == r.h1 {
                return Ok(r.h0);
            }
            let h_rho = family.hours_at(r.eta.ln(), rho1);
            observed_from_latent(r.h0, h_rho, k_new)
        })
        .collect()
}

/// Bunching and mean hours under a counterfactual regime.
pub fn oracle_policy(
    latent: &[LatentRecord],
    family: &SimFamily,
    k_orig: f64,
    k_new: f64,
    rho1: f64,
) -> Result<PolicyOracle> {
    let hours = resimulate(latent, family, k_orig, k_new, rho1)?;
    let n = hours.len() as f64;
    let at = hours.iter().filter(|&&h| h == k_new).count() as f64;
    let mean = hours.iter().sum::<f64>() / n;
    Ok(PolicyOracle {
        bunching: at / n,
        mean_hours: mean,
    })
}

/// Closed-form distribution of latent log hours for the isoelastic family,
/// for analytic finite-difference and small-kink checks.
#[derive(Debug, Clone, Copy)]
pub struct AnalyticIsoelastic {
    pub epsilon: f64,
    /// Location and scale of ln h0 (= |epsilon| ln eta).
    pub lnh0_location: f64,
    pub lnh0_scale: f64,
    kind: AnalyticKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum AnalyticKind {
    Normal,
    Logistic,
    Uniform,
}

impl AnalyticIsoelastic {
    /// Derive the closed form from a simulation configuration. Families
    /// other than the normal keep their shape only without a worker effect.
    pub fn from_config(config: &SimConfig) -> Result<Self> {
        let a = -config.epsilon;
        if !(a > 0.0) {
            return Err(Error::InvalidArgument("epsilon must be negative".into()));
        }
        let kind = match config.latent {
            LatentDist::NormalLog { .. } => AnalyticKind::Normal,
            LatentDist::LogisticLog { .. } => AnalyticKind::Logistic,
            LatentDist::UniformLog { .. } => AnalyticKind::Uniform,
        };
        if kind != AnalyticKind::Normal && config.worker_effect != 0.0 {
            return Err(Error::InvalidArgument(
                "closed forms with a worker effect exist only for the normal family".into(),
            ));
        }
        Ok(AnalyticIsoelastic {
            epsilon: config.epsilon,
            lnh0_location: a * config.latent.location(),
            lnh0_scale: a * config.latent.scale(),
            kind,
        })
    }

    fn std_cdf(&self, z: f64) -> f64 {
        match self.kind {
            AnalyticKind::Normal => std_normal_cdf(z),
            AnalyticKind::Logistic => 1.0 / (1.0 + (-z).exp()),
            AnalyticKind::Uniform => ((z + 1.0) / 2.0).clamp(0.0, 1.0),
        }
    }

    fn std_pdf(&self, z: f64) -> f64 {
        match self.kind {
            AnalyticKind::Normal => std_normal_pdf(z),
            AnalyticKind::Logistic => {
                let e = (-z).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
            AnalyticKind::Uniform => {
                if (-1.0..=1.0).contains(&z) {
                    0.5
                } else {
                    0.0
                }
            }
        }
    }

    /// CDF of ln h0.
    pub fn cdf_lnh0(&self, y: f64) -> f64 {
        self.std_cdf((y - self.lnh0_location) / self.lnh0_scale)
    }

    /// Density of h(rho) at x: latent hours under linear pay at factor rho.
    pub fn dens_h_at_rho(&self, x: f64, rho: f64) -> f64 {
        let loc = self.lnh0_location + self.epsilon * rho.ln();
        let z = (x.ln() - loc) / self.lnh0_scale;
        self.std_pdf(z) / (self.lnh0_scale * x)
    }

    /// P(h(rho') <= k <= h(rho)) for rho' > rho: the mass swept into the
    /// kink by moving the premium from rho to rho'.
    pub fn straddle_prob(&self, k: f64, rho: f64, rho_prime: f64) -> f64 {
        let a = -self.epsilon;
        let lo = k.ln() + a * rho.ln();
        let hi = k.ln() + a * rho_prime.ln();
        self.cdf_lnh0(hi) - self.cdf_lnh0(lo)
    }

    /// The small-kink ratio at step d_rho: the straddle mass per unit of
    /// premium over its analytic limit f_rho(k) |epsilon| k / rho. Converges
    /// to 1 as d_rho shrinks.
    pub fn small_kink_ratio(&self, k: f64, rho: f64, d_rho: f64) -> f64 {
        let lhs = self.straddle_prob(k, rho, rho + d_rho) / d_rho;
        let rhs = self.dens_h_at_rho(k, rho) * (-self.epsilon) * k / rho;
        lhs / rhs
    }
}
