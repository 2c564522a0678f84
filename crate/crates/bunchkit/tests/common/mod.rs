//! Shared test oracles: quadrature routines independent of the library's
//! closed forms, and small Monte-Carlo helpers.

#![allow(dead_code)]
// node tables transcribed verbatim; extra digits round to the intended f64
#![allow(clippy::excessive_precision)]

/// Composite 20-node Gauss-Legendre quadrature of `f` over [a, b].
/// Exact to machine precision for the smooth integrands used here.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    // 20-point Gauss-Legendre nodes/weights on [-1, 1] (positive half;
    // symmetric counterparts mirrored at evaluation time)
    const NODES: [f64; 10] = [
        0.076_526_521_133_497_32,
        0.227_785_851_141_645_08,
        0.373_706_088_715_419_56,
        0.510_867_001_950_827_1,
        0.636_053_680_726_515_1,
        0.746_331_906_460_150_8,
        0.839_116_971_822_218_8,
        0.912_234_428_251_325_9,
        0.963_971_927_277_913_8,
        0.993_128_599_185_094_9,
    ];
    const WEIGHTS: [f64; 10] = [
        0.152_753_387_130_725_85,
        0.149_172_986_472_603_75,
        0.142_096_109_318_382_05,
        0.131_688_638_449_176_63,
        0.118_194_531_961_518_42,
        0.101_930_119_817_240_44,
        0.083_276_741_576_704_75,
        0.062_672_048_334_109_06,
        0.040_601_429_800_386_94,
        0.017_614_007_139_152_118,
    ];
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + h / 2.0;
        let half = h / 2.0;
        let mut s = 0.0;
        for i in 0..10 {
            s += WEIGHTS[i] * f(mid + half * NODES[i]);
            s += WEIGHTS[i] * f(mid - half * NODES[i]);
        }
        total += s * half;
    }
    total
}

/// The defining integral of the envelope-mean function:
/// (a/(bx)) * Int_a^{a+x} ln(u/a) du, computed by quadrature. Substituting
/// u = a + t keeps the integrand accurate when |x| is far below a.
pub fn g_by_quadrature(a: f64, b: f64, x: f64) -> f64 {
    a / (b * x) * integrate(|t| (t / a).ln_1p(), 0.0, x, 8)
}

/// Quadrature version of the buncher-ATE bounds from the envelope quantile
/// integrals, in the counterfactual-buncher-free (starred) parameterization:
/// `f0s`, `f1s` are conditional CDF levels at the kink, `d0s`, `d1s` the
/// conditional densities, and `bs` the conditional bunching mass.
pub fn ate_bounds_by_quadrature(f0s: f64, d0s: f64, f1s: f64, d1s: f64, bs: f64) -> (f64, f64) {
    let lower_h0 = (f0s / d0s) * integrate(|u| (u / f0s).ln(), f0s, f0s + bs, 8) / bs;
    let lower_h1 =
        ((1.0 - f1s) / d1s) * integrate(|v| ((1.0 - v) / (1.0 - f1s)).ln(), f1s - bs, f1s, 8) / bs;
    let upper_h0 =
        -((1.0 - f0s) / d0s) * integrate(|u| ((1.0 - u) / (1.0 - f0s)).ln(), f0s, f0s + bs, 8) / bs;
    let upper_h1 = -(f1s / d1s) * integrate(|v| (v / f1s).ln(), f1s - bs, f1s, 8) / bs;
    (lower_h0 + lower_h1, upper_h0 + upper_h1)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

/// Standard error of the mean across replicates.
pub fn mc_se(xs: &[f64]) -> f64 {
    sample_sd(xs) / (xs.len() as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// One pass/fail line per acceptance criterion.
pub fn conclude(criterion: u32, description: &str, pass: bool) {
    println!(
        "ACCEPTANCE {criterion}: {} - {description}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(
        pass,
        "acceptance criterion {criterion} failed: {description}"
    );
}
