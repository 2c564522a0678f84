//! Acceptance suite: every identification claim is checked against an
//! independent oracle (quadrature of defining integrals, analytic DGP
//! densities, or exact latent ground truth), with one pass/fail line per
//! criterion. All randomness is seeded, so results are reproducible.
//!
//! Estimation on unsnapped simulator output uses an exact-atom kink
//! tolerance (the 1/16-hour tolerance belongs to grid-snapped data); the
//! oracles are exact, so the estimators must be too.

mod common;

use common::*;

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bunchkit::boundary::{kink_estimates_scaled, local_poly_boundary, side_bandwidth, Side};
use bunchkit::bounds::{
    buncher_ate_bounds, g_fn, isoelastic_blc_bounds_tol, saez_linear_epsilon_tol,
    small_kink_approx, AteInputs,
};
use bunchkit::counterfactual::{p_from_pto, p_upper_nonchangers};
use bunchkit::data::PaycheckTable;
use bunchkit::inference::{
    cluster_bootstrap, im_confidence_interval, se_from_replicates, StatRecord,
};
use bunchkit::normal::{std_normal_cdf, std_normal_pdf, std_normal_quantile};
use bunchkit::par;
use bunchkit::simulate::{
    oracle_buncher_ate, oracle_identities, resimulate, simulate_family, simulate_isoelastic,
    AnalyticIsoelastic, LatentDist, SimConfig, SimFamily,
};

/// Exact-atom kink tolerance for unsnapped simulator data.
const ATOM_TOL: f64 = 1e-9;

fn unit_open(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_01_g_function_against_quadrature() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_rel = 0.0f64;
    let mut worst_hom = 0.0f64;
    for i in 0..1000 {
        let a = 0.05 + 1.45 * unit_open(&mut rng);
        let b = 0.02 + 1.98 * unit_open(&mut rng);
        // mix of moderate and tiny |x|, both signs, keeping a + x > 0
        let x = match i % 4 {
            0 => a * (0.01 + 1.99 * unit_open(&mut rng)),
            1 => -a * (0.01 + 0.89 * unit_open(&mut rng)),
            2 => a * 1e-8 * (0.5 + unit_open(&mut rng)),
            _ => -a * 1e-8 * (0.5 + unit_open(&mut rng)),
        };
        let closed = g_fn(a, b, x).unwrap();
        let quad = g_by_quadrature(a, b, x);
        let rel = (closed - quad).abs() / quad.abs().max(1e-300);
        worst_rel = worst_rel.max(rel);

        let lambda = 10f64.powf(-3.0 + 6.0 * unit_open(&mut rng));
        let hom = (g_fn(lambda * a, lambda * b, lambda * x).unwrap() - closed).abs();
        worst_hom = worst_hom.max(hom);
    }
    let elapsed = start.elapsed();
    conclude(
        1,
        &format!(
            "g closed form vs quadrature (worst rel {worst_rel:.2e} <= 1e-8), \
             homogeneity (worst {worst_hom:.2e} <= 1e-12), runtime {elapsed:.0?} < 1s"
        ),
        worst_rel <= 1e-8 && worst_hom <= 1e-12 && elapsed.as_secs_f64() < 1.0,
    );
}

#[test]
fn criterion_02_bounds_equal_quantile_integrals() {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for i in 0..100 {
        // draw feasible inputs in the counterfactual-free parameterization
        let f0s = 0.10 + 0.70 * unit_open(&mut rng);
        let max_b = (0.93 - f0s).min(0.15);
        let bs = 0.005 + (max_b - 0.005) * unit_open(&mut rng);
        let f1s = f0s + bs;
        let d0s = 0.02 + 1.48 * unit_open(&mut rng);
        let d1s = 0.02 + 1.48 * unit_open(&mut rng);
        let p = if i % 2 == 0 {
            0.0
        } else {
            0.10 * unit_open(&mut rng)
        };

        // map to unconditional levels
        let cdf0 = f0s * (1.0 - p) + p;
        let cdf1 = f1s * (1.0 - p) + p;
        let bunching = bs * (1.0 - p) + p;
        let dens0 = d0s * (1.0 - p);
        let dens1 = d1s * (1.0 - p);

        let inp = AteInputs::new(cdf0, dens0, cdf1, dens1, bunching, p).unwrap();
        let bounds = buncher_ate_bounds(&inp).unwrap();
        let (ql, qu) = ate_bounds_by_quadrature(f0s, d0s, f1s, d1s, bs);
        let rel_l = (bounds.lower - ql).abs() / ql.abs().max(1e-12);
        let rel_u = (bounds.upper - qu).abs() / qu.abs().max(1e-12);
        worst = worst.max(rel_l).max(rel_u);
    }
    let elapsed = start.elapsed();
    conclude(
        2,
        &format!(
            "bounds vs envelope quantile integrals on 100 feasible inputs \
             (worst rel {worst:.2e} <= 1e-8), runtime {elapsed:.0?} < 5s"
        ),
        worst <= 1e-8 && elapsed.as_secs_f64() < 5.0,
    );
}

#[test]
fn criterion_03_small_kink_refinement() {
    let (cdf0_base, dens0, dens1, p) = (0.5f64, 0.04f64, 0.05f64, 0.0f64);
    let mut rel_gaps = Vec::new();
    let mut sk_gaps = Vec::new();
    for &x in &[1e-2, 1e-3, 1e-4] {
        let inp = AteInputs::new(cdf0_base, dens0, cdf0_base + x, dens1, x, p).unwrap();
        let b = buncher_ate_bounds(&inp).unwrap();
        let sk = small_kink_approx(&inp);
        rel_gaps.push((b.upper - b.lower) / sk);
        sk_gaps.push(((b.lower - sk).abs().max((b.upper - sk).abs())) / sk);
        assert!(
            b.lower <= sk && sk <= b.upper,
            "bounds fail to bracket the small-kink value"
        );
    }
    let slope1 = (rel_gaps[0] / rel_gaps[1]).ln() / 10f64.ln();
    let slope2 = (rel_gaps[1] / rel_gaps[2]).ln() / 10f64.ln();
    let converging = sk_gaps[0] > sk_gaps[1] && sk_gaps[1] > sk_gaps[2];
    conclude(
        3,
        &format!(
            "relative gap shrinks linearly in B-p (log-log slopes {slope1:.3}, {slope2:.3} in 1 +/- 0.1), \
             bounds converge to the two-term value"
        ),
        (slope1 - 1.0).abs() <= 0.1 && (slope2 - 1.0).abs() <= 0.1 && converging,
    );
}

// ---------------------------------------------------------------------------

fn containment_config(seed: u64, p_mass: f64) -> SimConfig {
    let mut c = SimConfig::baseline(seed);
    c.p_mass = p_mass;
    c.worker_effect = 0.3;
    c
}

struct ContainmentRep {
    contains: bool,
    im_covers: bool,
}

fn containment_rep(seed: u64, p_mass: f64) -> ContainmentRep {
    let cfg = containment_config(seed, p_mass);
    let out = simulate_isoelastic(&cfg).expect("simulate");
    let hours = out.table.hours_vec();
    let oracle = oracle_buncher_ate(&out.latent, cfg.k).expect("oracle");
    let p_real = out.latent.iter().filter(|r| r.kstar).count() as f64 / out.latent.len() as f64;

    let est = kink_estimates_scaled(&hours, cfg.k, p_real, None, 1, ATOM_TOL).expect("estimates");
    let inp = AteInputs::from_estimates(&est, p_real).expect("inputs");
    let bounds = buncher_ate_bounds(&inp).expect("bounds");
    let contains = bounds.contains(oracle);

    let frozen_bw = est.bandwidth;
    let k = cfg.k;
    let stat = move |t: &PaycheckTable| -> bunchkit::Result<StatRecord> {
        let h = t.hours_vec();
        let e = kink_estimates_scaled(&h, k, p_real, Some(frozen_bw), 1, ATOM_TOL)?;
        let i = AteInputs::from_estimates(&e, p_real)?;
        let b = buncher_ate_bounds(&i)?;
        let mut rec = StatRecord::new();
        rec.insert("lo".into(), b.lower);
        rec.insert("hi".into(), b.upper);
        Ok(rec)
    };
    let boot = cluster_bootstrap(&out.table, &stat, 60, seed ^ 0x5eed_b00f).expect("bootstrap");
    let se_lo = se_from_replicates(&boot, "lo").expect("se");
    let se_hi = se_from_replicates(&boot, "hi").expect("se");
    let ci = im_confidence_interval(bounds.lower, bounds.upper, se_lo, se_hi, 0.05).expect("ci");
    let im_covers = ci.lower <= oracle && oracle <= ci.upper;
    ContainmentRep {
        contains,
        im_covers,
    }
}

#[test]
fn criterion_04_oracle_containment_and_im_coverage() {
    let start = std::time::Instant::now();
    let reps_per_case = 100usize;
    let results: Vec<ContainmentRep> = par::map_indexed(2 * reps_per_case, |i| {
        let (case, rep) = (i / reps_per_case, i % reps_per_case);
        let p_mass = if case == 0 { 0.0 } else { 0.08 };
        containment_rep(40_000 + rep as u64, p_mass)
    });
    let n = results.len() as f64;
    let contain_rate = results.iter().filter(|r| r.contains).count() as f64 / n;
    let cover_rate = results.iter().filter(|r| r.im_covers).count() as f64 / n;
    let elapsed = start.elapsed();
    conclude(
        4,
        &format!(
            "oracle ATE inside estimated bounds in {:.1}% (>= 95%), 95% IM intervals \
             cover in {:.1}% (>= 93%) of 200 reps at 200k paychecks, runtime {elapsed:.0?}",
            100.0 * contain_rate,
            100.0 * cover_rate
        ),
        contain_rate >= 0.95 && cover_rate >= 0.93,
    );
}

// ---------------------------------------------------------------------------

/// Normal truncated above at `cut`: inverse-CDF draws and the boundary
/// density.
fn truncated_normal_sample(
    rng: &mut ChaCha8Rng,
    n: usize,
    mu: f64,
    sigma: f64,
    cut: f64,
) -> Vec<f64> {
    let pcut = std_normal_cdf((cut - mu) / sigma);
    (0..n)
        .map(|_| {
            let u = unit_open(rng) * pcut;
            mu + sigma * std_normal_quantile(u)
        })
        .collect()
}

#[test]
fn criterion_05_boundary_estimator_accuracy_and_rate() {
    let (mu, sigma, cut) = (45.0, 5.0, 40.0);
    let true_f = std_normal_pdf((cut - mu) / sigma) / (sigma * std_normal_cdf((cut - mu) / sigma));

    // (a) 5% relative accuracy at n = 100k, median over 50 reps
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut rel_errs = Vec::new();
    for _ in 0..50 {
        let xs = truncated_normal_sample(&mut rng, 100_000, mu, sigma, cut);
        let bw = side_bandwidth(&xs, cut, Side::Left).unwrap();
        let (_, f_hat) = local_poly_boundary(&xs, cut, Side::Left, bw, 1).unwrap();
        rel_errs.push((f_hat / true_f - 1.0).abs());
    }
    let med = median(&rel_errs);

    // (b) machine-precision recovery on an exactly linear ECDF
    let linear: Vec<f64> = (1..=4000)
        .map(|i| 30.0 + 10.0 * i as f64 / 4000.0)
        .collect();
    let (cdf_hat, dens_hat) = local_poly_boundary(&linear, 40.0, Side::Left, 3.0, 1).unwrap();
    let exact = (dens_hat - 0.1).abs() < 1e-12 && (cdf_hat - 1.0).abs() < 1e-12;

    // (c) n^(-1/5) rate: shrinking n by 32x should double the bandwidth
    let mut ratios = Vec::new();
    for rep in 0..5 {
        let mut r1 = ChaCha8Rng::seed_from_u64(707 + rep);
        let big = truncated_normal_sample(&mut r1, 96_000, mu, sigma, cut);
        let small = &big[..3_000];
        let bw_big = side_bandwidth(&big, cut, Side::Left).unwrap();
        let bw_small = side_bandwidth(small, cut, Side::Left).unwrap();
        ratios.push(bw_small / bw_big);
    }
    let ratio = mean(&ratios);
    let expected = 32f64.powf(0.2);
    let rate_ok = (ratio / expected - 1.0).abs() <= 0.2;

    conclude(
        5,
        &format!(
            "truncated-normal boundary density median rel err {med:.3} (<= 0.05), \
             exact linear recovery {exact}, bandwidth ratio {ratio:.2} vs 32^(1/5) = {expected:.2} within 20%"
        ),
        med <= 0.05 && exact && rate_ok,
    );
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_06_counterfactual_mass_recovery() {
    let reps = 50usize;
    let rows: Vec<(f64, f64, bool)> = par::map_indexed(reps, |rep| {
        let mut cfg = SimConfig::baseline(60_000 + rep as u64);
        cfg.p_mass = 0.08 / 0.95; // targets an at-kink counterfactual share of 0.08
        cfg.pto_prob = 0.05;
        cfg.worker_effect = 0.9;
        let out = simulate_isoelastic(&cfg).expect("simulate");
        let truth = out.latent.iter().filter(|r| r.kstar).count() as f64 / out.latent.len() as f64;
        let p_hat = p_from_pto(&out.table, cfg.k).expect("pto").value;
        let lagged = out.table.lag_join();
        let p_upper = p_upper_nonchangers(&lagged, cfg.k)
            .expect("nonchanger")
            .value;
        (p_hat - truth, truth, p_upper >= truth)
    });
    let diffs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let se = mc_se(&diffs);
    let bias = mean(&diffs);
    let upper_ok = rows.iter().filter(|r| r.2).count();
    let mean_truth = mean(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
    conclude(
        6,
        &format!(
            "PTO estimate of p within 2 MC SEs of truth ~{mean_truth:.3} (bias {bias:.2e}, 2se {:.2e}); \
             non-changer bound >= truth in {upper_ok}/{reps} reps (>= 99%)",
            2.0 * se
        ),
        bias.abs() <= 2.0 * se && upper_ok * 100 >= reps * 99,
    );
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_07_comparative_statics_finite_differences() {
    let mut cfg = SimConfig::baseline(777);
    // shift the latent mode off the kink so the density gap is nonzero
    let delta = 0.17 * 1.5f64.ln();
    cfg.latent = LatentDist::NormalLog {
        location: (40f64.ln() + delta / 2.0 - 0.08) / 0.17,
        scale: 0.2 / 0.17,
    };
    let out = simulate_isoelastic(&cfg).expect("simulate");
    let analytic = AnalyticIsoelastic::from_config(&cfg).expect("analytic");
    let fam = SimFamily::Isoelastic {
        epsilon: cfg.epsilon,
    };
    let k = cfg.k;
    let step = 0.25;
    let n = out.latent.len() as f64;

    let up = resimulate(&out.latent, &fam, k, k + step, 1.5).unwrap();
    let down = resimulate(&out.latent, &fam, k, k - step, 1.5).unwrap();

    // item 1: d(bunching)/dk vs f1(k) - f0(k)
    let d_bunch: Vec<f64> = up
        .iter()
        .zip(&down)
        .map(|(&hu, &hd)| {
            let a = if hu == k + step { 1.0 } else { 0.0 };
            let b = if hd == k - step { 1.0 } else { 0.0 };
            (a - b) / (2.0 * step)
        })
        .collect();
    let fd1 = mean(&d_bunch);
    let se1 = sample_sd(&d_bunch) / n.sqrt();
    let target1 = analytic.dens_h_at_rho(k, 1.5) - analytic.dens_h_at_rho(k, 1.0);
    let item1_ok = (fd1 - target1).abs() <= 2.0 * se1;

    // item 2: d(mean hours)/dk vs net bunching, same draws
    let base = out.table.hours_vec();
    let t_stat: Vec<f64> = up
        .iter()
        .zip(&down)
        .zip(&base)
        .map(|((&hu, &hd), &h0)| (hu - hd) / (2.0 * step) - if h0 == k { 1.0 } else { 0.0 })
        .collect();
    let fd2_gap = mean(&t_stat);
    let se2 = sample_sd(&t_stat) / n.sqrt();
    let item2_ok = fd2_gap.abs() <= 2.0 * se2;

    // the small-kink limit: straddle mass per unit premium converges to the
    // density-weighted conditional response
    let r1 = analytic.small_kink_ratio(k, 1.5, 0.1);
    let r2 = analytic.small_kink_ratio(k, 1.5, 0.01);
    let r3 = analytic.small_kink_ratio(k, 1.5, 0.001);
    let small_ok = (r3 - 1.0).abs() <= 0.01
        && (r3 - 1.0).abs() <= (r2 - 1.0).abs()
        && (r2 - 1.0).abs() <= (r1 - 1.0).abs();

    conclude(
        7,
        &format!(
            "dB/dk finite difference {fd1:.5} vs analytic {target1:.5} (2se {:.1e}); \
             dE[h]/dk matches net bunching (gap {fd2_gap:.2e}, 2se {:.1e}); \
             small-kink ratio at 1e-3 is {r3:.4} (within 1%)",
            2.0 * se1,
            2.0 * se2
        ),
        item1_ok && item2_ok && small_ok,
    );
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_08_identity_suite_exact() {
    let mut all_ok = true;
    let mut checked = 0usize;
    for (fi, family) in [
        SimFamily::Isoelastic { epsilon: -0.17 },
        SimFamily::Exponential { gamma: 4.0 },
    ]
    .iter()
    .enumerate()
    {
        for (li, latent) in [
            LatentDist::NormalLog {
                location: 21.73,
                scale: 1.18,
            },
            LatentDist::LogisticLog {
                location: 21.73,
                scale: 0.65,
            },
            LatentDist::UniformLog {
                location: 21.73,
                scale: 2.0,
            },
        ]
        .iter()
        .enumerate()
        {
            for (pi, &(p_mass, pto_prob)) in
                [(0.0, 0.0), (0.08, 0.0), (0.08, 0.2)].iter().enumerate()
            {
                let mut cfg = SimConfig::baseline(800 + (fi * 100 + li * 10 + pi) as u64);
                cfg.n_workers = 1000;
                cfg.n_weeks = 10;
                cfg.n_firms = 50;
                cfg.p_mass = p_mass;
                cfg.pto_prob = pto_prob;
                cfg.worker_effect = if pi == 2 { 0.5 } else { 0.0 };
                cfg.latent = match family {
                    // exponential production needs ln(eta) comfortably above
                    // ln(1.5) so both latent hours stay positive
                    SimFamily::Exponential { .. } => LatentDist::NormalLog {
                        location: 10.1,
                        scale: 0.35,
                    },
                    SimFamily::Isoelastic { .. } => *latent,
                };
                let out = simulate_family(family, &cfg).expect("simulate");
                let hours = out.table.hours_vec();
                let report = oracle_identities(&out.latent, &hours, cfg.k);
                if !report.all_pass() {
                    all_ok = false;
                }
                checked += 1;
            }
        }
    }
    conclude(
        8,
        &format!("bunching-count and truncation identities exact on {checked} simulated tables"),
        all_ok && checked == 18,
    );
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_09_saez_exactness_under_uniform_logs() {
    let reps = 30usize;
    let eps_true = 0.17f64;
    let rows: Vec<(f64, bool, bool)> = par::map_indexed(reps, |rep| {
        let mut cfg = SimConfig::baseline(90_000 + rep as u64);
        cfg.latent = LatentDist::UniformLog {
            location: (40f64.ln() + 0.05) / 0.17,
            scale: 0.4 / 0.17,
        };
        let out = simulate_isoelastic(&cfg).expect("simulate");
        let hours = out.table.hours_vec();
        let eps_hat = saez_linear_epsilon_tol(&hours, cfg.k, 0.0, None, 1, ATOM_TOL).expect("saez");
        let el = isoelastic_blc_bounds_tol(&hours, cfg.k, 0.0, None, 1, ATOM_TOL).expect("blc");
        let el_contains = el.lower <= eps_true && eps_true <= el.upper;
        let oracle = oracle_buncher_ate(&out.latent, cfg.k).expect("oracle");
        let est = kink_estimates_scaled(&hours, cfg.k, 0.0, None, 1, ATOM_TOL).expect("est");
        let inp = AteInputs::from_estimates(&est, 0.0).expect("inputs");
        let levels = buncher_ate_bounds(&inp).expect("bounds");
        (eps_hat, el_contains, levels.contains(oracle))
    });
    let eps_hats: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let bias = mean(&eps_hats) - eps_true;
    let se = mc_se(&eps_hats);
    let el_hits = rows.iter().filter(|r| r.1).count();
    let lv_hits = rows.iter().filter(|r| r.2).count();
    conclude(
        9,
        &format!(
            "linear-interpolation elasticity recovers |eps| (bias {bias:.2e}, 2se {:.2e}); \
             BLC elasticity interval contains truth in {el_hits}/{reps}, \
             levels interval contains the oracle ATE in {lv_hits}/{reps}",
            2.0 * se
        ),
        bias.abs() <= 2.0 * se && el_hits * 10 >= reps * 9 && lv_hits * 10 >= reps * 9,
    );
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_10_determinism_and_golden_bytes() {
    let mut cfg = SimConfig::baseline(1010);
    cfg.n_workers = 800;
    cfg.n_weeks = 8;
    cfg.n_firms = 40;
    cfg.p_mass = 0.05;
    cfg.pto_prob = 0.1;
    cfg.snap_to_grid = true;

    let render = |cfg: &SimConfig| -> (Vec<u8>, Vec<u8>) {
        let out = simulate_isoelastic(cfg).expect("simulate");
        let mut pay = Vec::new();
        out.table.write_csv(&mut pay).expect("csv");
        let mut lat = Vec::new();
        out.write_latent_csv(&mut lat).expect("latent csv");
        (pay, lat)
    };
    let (pay_a, lat_a) = render(&cfg);
    let (pay_b, lat_b) = render(&cfg);
    let rerun_identical = pay_a == pay_b && lat_a == lat_b;

    // bootstrap replicates across explicit pool sizes
    let out = simulate_isoelastic(&cfg).expect("simulate");
    let stat = |t: &PaycheckTable| -> bunchkit::Result<StatRecord> {
        let mut rec = StatRecord::new();
        rec.insert("n".into(), t.len() as f64);
        rec.insert(
            "mass".into(),
            bunchkit::empirical::bunching_mass(t, 40.0).mass,
        );
        Ok(rec)
    };
    #[cfg(feature = "parallel")]
    let pools_identical = {
        let run_in_pool = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| cluster_bootstrap(&out.table, &stat, 64, 99).expect("bootstrap"))
        };
        let (one, four) = (run_in_pool(1), run_in_pool(4));
        let (pay_c, lat_c) = {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(3)
                .build()
                .unwrap();
            pool.install(|| render(&cfg))
        };
        one.replicates == four.replicates && pay_c == pay_a && lat_c == lat_a
    };
    #[cfg(not(feature = "parallel"))]
    let pools_identical = {
        let a = cluster_bootstrap(&out.table, &stat, 64, 99).expect("bootstrap");
        let b = cluster_bootstrap(&out.table, &stat, 64, 99).expect("bootstrap");
        a.replicates == b.replicates
    };

    conclude(
        10,
        &format!(
            "fixed seeds reproduce byte-identical CSVs across runs ({rerun_identical}) \
             and across thread counts ({pools_identical})"
        ),
        rerun_identical && pools_identical,
    );
}
