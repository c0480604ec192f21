//! Independent numerical oracles shared by the integration and acceptance tests.
//!
//! Nothing here calls into `rvdk_core`: quadrature, binomial pmf recurrences and
//! order-statistic closed forms are all computed from scratch.

#![allow(dead_code)]

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) quadrature on a finite interval.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let (whole, _) = gk15(&f, a, b);
    integrate_abs(f, a, b, rel_tol, whole.abs() * rel_tol * 1e-3)
}

/// Adaptive Gauss-Kronrod with an absolute error budget `abs_tol` spread
/// over `[a, b]` in proportion to subinterval width.
pub fn integrate_abs<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> f64 {
    let mut stack = vec![(a, b, 0usize)];
    let mut total = 0.0;
    let mut comp = 0.0;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (val, err) = gk15(&f, lo, hi);
        assert!(val.is_finite() && err.is_finite(), "integrand not finite on [{lo}, {hi}]");
        let width_frac = (hi - lo) / (b - a);
        if err <= (rel_tol * val.abs()).max(abs_tol * width_frac) || depth > 40 {
            // Neumaier summation keeps the pieces from drowning each other
            let t = total + val;
            if total.abs() >= val.abs() {
                comp += (total - t) + val;
            } else {
                comp += (val - t) + total;
            }
            total = t;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    total + comp
}

/// `∫_a^∞ f` via the substitution `x = a + t/(1-t)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, rel_tol: f64) -> f64 {
    integrate(
        |t: f64| {
            if t >= 1.0 {
                return 0.0;
            }
            let om = 1.0 - t;
            let x = a + t / om;
            let v = f(x) / (om * om);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        rel_tol,
    )
}

/// `∫_0^y t^{p-1} (1-t)^{q-1} dt` by quadrature after `t = v^{1/p}`,
/// which removes the `t^{p-1}` endpoint singularity.
fn lower_beta_integral(y: f64, p: f64, q: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let top = y.powf(p);
    integrate(
        |v: f64| (1.0 - v.powf(1.0 / p)).powf(q - 1.0) / p,
        0.0,
        top,
        1e-14,
    )
}

/// Complete beta function by quadrature, splitting at 1/2 so that each half
/// only sees a singularity at its lower end.
pub fn beta_by_quadrature(p: f64, q: f64) -> f64 {
    lower_beta_integral(0.5, p, q) + lower_beta_integral(0.5, q, p)
}

/// `I(y; p, q)` by quadrature.
pub fn reg_inc_beta_by_quadrature(y: f64, p: f64, q: f64) -> f64 {
    let b = beta_by_quadrature(p, q);
    if y <= 0.5 {
        lower_beta_integral(y, p, q) / b
    } else {
        1.0 - lower_beta_integral(1.0 - y, q, p) / b
    }
}

/// Binomial pmf for all k, by the multiplicative recurrence anchored at the
/// mode and normalized at the end. Independent of any gamma function.
pub fn binomial_pmf(n: u64, s: f64) -> Vec<f64> {
    let n_us = n as usize;
    let mut pmf = vec![0.0; n_us + 1];
    if s == 0.0 {
        pmf[0] = 1.0;
        return pmf;
    }
    if s == 1.0 {
        pmf[n_us] = 1.0;
        return pmf;
    }
    let mode = (((n + 1) as f64) * s).floor().min(n as f64) as usize;
    let odds = s / (1.0 - s);
    pmf[mode] = 1.0;
    for k in mode..n_us {
        pmf[k + 1] = pmf[k] * ((n_us - k) as f64) / ((k + 1) as f64) * odds;
    }
    for k in (0..mode).rev() {
        pmf[k] = pmf[k + 1] * ((k + 1) as f64) / ((n_us - k) as f64) / odds;
    }
    let total: f64 = pmf.iter().sum();
    pmf.iter_mut().for_each(|v| *v /= total);
    pmf
}

/// Kolmogorov distribution critical value `c(α) = sqrt(-ln(α/2) / 2)`;
/// the asymptotic one-sample KS rejection threshold is `c(α)/sqrt(n)`.
pub fn ks_critical(alpha: f64, n: usize) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// One-sample KS distance of `values` against Uniform(0, 1), brute force.
pub fn ks_uniform(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max)
}
