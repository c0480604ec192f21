//! Maximum-likelihood fits of mGB and GB2, KS diagnostics, and straight-line
//! fits of the log-log CCDF tail.
//!
//! The likelihood is maximized with multi-start Nelder-Mead in an
//! unconstrained log parameterization:
//!
//! | coordinate | meaning                      | start box (log-uniform) |
//! |------------|------------------------------|-------------------------|
//! | `ln α`     | shape                        | `α ∈ [0.5, 5]`          |
//! | `ln(β₂/m)` | scale relative to the median | `β₂/m ∈ [0.3, 3]`       |
//! | `ln p`     | shape                        | `p ∈ [0.3, 5]`          |
//! | `ln q`     | shape                        | `q ∈ [0.3, 5]`          |
//! | `ln(β₁/max − 1)` | mGB only               | `β₁ = 1.05·max` (see below) |
//!
//! Working relative to the sample median makes the problem scale-free: data
//! multiplied by `c` produce the same search up to rounding, with `β₂` (and
//! `β₁`) multiplied by `c`.
//!
//! The mGB endpoint is bounded below by `max + (max − x')`, `x'` being the
//! largest value below the maximum. For `q < 1` the density diverges at `β₁`
//! and the likelihood grows without limit as `β₁` approaches the maximum;
//! for `q = 1` it peaks on that boundary. Either way the fitted CDF at the
//! top observation would be 1 and the U-test would flag it as a Dragon King
//! by construction. One top spacing is the resolution at which the sample
//! can locate the endpoint, and it leaves the top order statistic with a
//! typical p-value. The start is `1.05·max` or just above this bound.
//!
//! Samples are collapsed to distinct values with multiplicities and the
//! objective is the mean negative log-likelihood, so a sample concatenated
//! with itself yields a bit-identical objective and therefore identical
//! fitted parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{tail_exponent, CdfModel, Family, Gb2, GbParams, Mgb};
use crate::error::{Error, Result};
use crate::optim::{nelder_mead, SimplexOptions};
use crate::specfun::ln_beta_unchecked;

pub const MIN_FIT_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub family: Family,
    pub params: GbParams,
    pub ks: f64,
    pub log_likelihood: f64,
    pub converged: bool,
    pub n_samples: usize,
}

impl FitResult {
    pub fn model(&self) -> Result<Box<dyn CdfModel>> {
        Ok(match self.family {
            Family::Mgb => Box::new(Mgb::new(self.params)?),
            Family::Gb2 => Box::new(Gb2::new(self.params)?),
            Family::Gb => {
                return Err(Error::InvalidInput("GB fits are not supported".into()));
            }
        })
    }

    pub fn tail_exponent(&self) -> f64 {
        tail_exponent(&self.params, self.family)
    }
}

fn sorted_finite(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    if let Some(bad) = samples.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite sample value {bad}")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted)
}

/// Distinct values in ascending order with their empirical CCDF
/// `(N - k + 1)/N`, `k` being the 1-based rank of the first occurrence.
/// Tied values therefore share the largest CCDF of their group, and the
/// maximum has CCDF `m/N > 0` (`m` its multiplicity).
pub fn empirical_ccdf(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    let sorted = sorted_finite(samples)?;
    let n = sorted.len() as f64;
    let mut out = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        if i == 0 || v != sorted[i - 1] {
            out.push((v, (n - i as f64) / n));
        }
    }
    Ok(out)
}

/// Kolmogorov-Smirnov distance `sup |F_N(x) - F(x)|`, checking both the
/// left and right limits of the empirical CDF at every jump.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], model_cdf: F) -> Result<f64> {
    let sorted = sorted_finite(samples)?;
    let n = sorted.len() as f64;
    let mut d = 0.0_f64;
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == v {
            j += 1;
        }
        let f = model_cdf(v);
        d = d.max((f - i as f64 / n).abs()).max((j as f64 / n - f).abs());
        i = j;
    }
    Ok(d)
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub starts: usize,
    pub seed: u64,
    pub simplex: SimplexOptions,
    /// Extra simplex restarts from each start's optimum.
    pub restarts: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { starts: 8, seed: 0, simplex: SimplexOptions::default(), restarts: 3 }
    }
}

/// Distinct samples in log space relative to the median.
struct Prepared {
    ln_x: Vec<f64>,
    weight: Vec<f64>,
    total: f64,
    ln_median: f64,
    /// `ln(max / median)`
    ln_max: f64,
    max: f64,
    /// Lower bound of the mGB gap coordinate `ln(β₁/max − 1)`.
    ln_gap_floor: f64,
}

impl Prepared {
    fn new(sorted: &[f64]) -> Self {
        let median = sorted[(sorted.len() - 1) / 2];
        let max = sorted[sorted.len() - 1];
        let ln_median = median.ln();
        let mut ln_x = Vec::new();
        let mut weight = Vec::new();
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i + 1;
            while j < sorted.len() && sorted[j] == sorted[i] {
                j += 1;
            }
            ln_x.push((sorted[i] / median).ln());
            weight.push((j - i) as f64);
            i = j;
        }
        let second = sorted.iter().rev().find(|&&v| v < max).copied().unwrap_or(0.0);
        Self {
            ln_x,
            weight,
            total: sorted.len() as f64,
            ln_median,
            ln_max: (max / median).ln(),
            max,
            ln_gap_floor: ((max - second) / max).ln().max(LN_GAP_RANGE.0),
        }
    }
}

fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

const LN_ALPHA_RANGE: (f64, f64) = (-4.0, 4.6);
const LN_SCALE_RANGE: (f64, f64) = (-15.0, 15.0);
const LN_SHAPE_RANGE: (f64, f64) = (-7.0, 7.0);
const LN_GAP_RANGE: (f64, f64) = (-16.0, 8.0);

fn within(v: f64, range: (f64, f64)) -> bool {
    v >= range.0 && v <= range.1
}

/// Mean negative log-likelihood of GB2, in median-relative units.
fn gb2_objective(data: &Prepared, theta: &[f64]) -> f64 {
    let (la, lb2, lp, lq) = (theta[0], theta[1], theta[2], theta[3]);
    if !(within(la, LN_ALPHA_RANGE) && within(lb2, LN_SCALE_RANGE) && within(lp, LN_SHAPE_RANGE) && within(lq, LN_SHAPE_RANGE)) {
        return f64::INFINITY;
    }
    let (alpha, p, q) = (la.exp(), lp.exp(), lq.exp());
    let a = alpha * p - 1.0;
    let b = p + q;
    let mut acc = 0.0;
    for (&lx, &w) in data.ln_x.iter().zip(&data.weight) {
        let z = lx - lb2;
        acc += w * (a * z - b * softplus(alpha * z));
    }
    -(acc / data.total + la - lb2 - ln_beta_unchecked(p, q))
}

/// Mean negative log-likelihood of mGB, in median-relative units.
fn mgb_objective(data: &Prepared, theta: &[f64]) -> f64 {
    let (la, lb2, lp, lq, lgap) = (theta[0], theta[1], theta[2], theta[3], theta[4]);
    if !(within(la, LN_ALPHA_RANGE)
        && within(lb2, LN_SCALE_RANGE)
        && within(lp, LN_SHAPE_RANGE)
        && within(lq, LN_SHAPE_RANGE)
        && within(lgap, (data.ln_gap_floor, LN_GAP_RANGE.1)))
    {
        return f64::INFINITY;
    }
    let (alpha, p, q) = (la.exp(), lp.exp(), lq.exp());
    let lb1 = data.ln_max + lgap.exp().ln_1p();
    if lb2 >= lb1 {
        return f64::INFINITY;
    }
    let ln_r = alpha * (lb2 - lb1);
    let r = ln_r.exp();
    let a = alpha * p - 1.0;
    let b = p + q + 1.0;
    let c = q - 1.0;
    let mut acc = 0.0;
    for (&lx, &w) in data.ln_x.iter().zip(&data.weight) {
        let z = lx - lb2;
        let s = (alpha * (lx - lb1)).exp();
        acc += w * (a * z - b * softplus(alpha * z) + c * (-s).ln_1p());
    }
    let constant = la + (p + q).ln() + (p + 1.0) * r.ln_1p() - lb2 - ln_beta_unchecked(p, q)
        - (q + r * (p + q)).ln();
    -(acc / data.total + constant)
}

fn draw_start(rng: &mut ChaCha8Rng, family: Family, data: &Prepared) -> Vec<f64> {
    let mut log_uniform = |lo: f64, hi: f64| {
        let u: f64 = rng.random();
        lo.ln() + u * (hi.ln() - lo.ln())
    };
    let mut theta = vec![
        log_uniform(0.5, 5.0),
        log_uniform(0.3, 3.0),
        log_uniform(0.3, 5.0),
        log_uniform(0.3, 5.0),
    ];
    if family == Family::Mgb {
        theta.push(0.05_f64.ln().max(data.ln_gap_floor + 0.5));
    }
    theta
}

struct StartOutcome {
    theta: Vec<f64>,
    f: f64,
    converged: bool,
}

fn run_start<F: Fn(&[f64]) -> f64>(objective: &F, x0: &[f64], opts: &FitOptions) -> StartOutcome {
    let mut best = nelder_mead(objective, x0, &opts.simplex);
    let mut converged = best.converged;
    let restart_opts = SimplexOptions { initial_step: 0.05, ..opts.simplex };
    for _ in 0..opts.restarts {
        let next = nelder_mead(objective, &best.x, &restart_opts);
        let gain = best.f - next.f;
        converged = next.converged;
        if next.f <= best.f {
            best = next;
        }
        if gain.abs() <= 10.0 * opts.simplex.f_tol {
            break;
        }
    }
    StartOutcome { theta: best.x, f: best.f, converged }
}

/// Fits `family` (mGB or GB2) by maximum likelihood with `starts` random
/// initializations drawn from a generator seeded by `seed`.
pub fn fit_mle(samples: &[f64], family: Family, starts: usize, seed: u64) -> Result<FitResult> {
    fit_mle_with(samples, family, &FitOptions { starts, seed, ..FitOptions::default() })
}

pub fn fit_mle_with(samples: &[f64], family: Family, opts: &FitOptions) -> Result<FitResult> {
    if family == Family::Gb {
        return Err(Error::InvalidInput("only mGB and GB2 can be fitted".into()));
    }
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooFewPoints { needed: MIN_FIT_SAMPLES, got: samples.len() });
    }
    if opts.starts == 0 {
        return Err(Error::InvalidInput("at least one start is required".into()));
    }
    let sorted = sorted_finite(samples)?;
    if let Some(bad) = sorted.first().filter(|v| **v <= 0.0) {
        return Err(Error::InvalidInput(format!("samples must be positive (found {bad})")));
    }
    let data = Prepared::new(&sorted);
    if data.ln_max <= 0.0 {
        return Err(Error::InvalidInput("samples have no spread above the median".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let inits: Vec<Vec<f64>> = (0..opts.starts).map(|_| draw_start(&mut rng, family, &data)).collect();
    let objective = |theta: &[f64]| match family {
        Family::Mgb => mgb_objective(&data, theta),
        _ => gb2_objective(&data, theta),
    };
    let outcomes: Vec<StartOutcome> = inits
        .par_iter()
        .map(|x0| run_start(&objective, x0, opts))
        .collect();

    let any_converged = outcomes.iter().any(|o| o.converged);
    let best = outcomes
        .into_iter()
        .min_by(|a, b| a.f.total_cmp(&b.f))
        .expect("at least one start");
    if !best.f.is_finite() {
        return Err(Error::Convergence(format!(
            "no start reached a finite {family} likelihood"
        )));
    }

    let t = &best.theta;
    let beta2 = (t[1] + data.ln_median).exp();
    let params = match family {
        Family::Mgb => GbParams::new(t[0].exp(), data.max * (1.0 + t[4].exp()), beta2, t[2].exp(), t[3].exp()),
        _ => GbParams::gb2(t[0].exp(), beta2, t[2].exp(), t[3].exp()),
    };
    summarize(&sorted, family, params, any_converged)
}

fn summarize(sorted: &[f64], family: Family, params: GbParams, converged: bool) -> Result<FitResult> {
    let (log_likelihood, ks) = match family {
        Family::Mgb => {
            let m = Mgb::new(params)?;
            (sorted.iter().map(|&x| m.ln_pdf(x)).sum(), ks_statistic(sorted, |x| m.cdf(x))?)
        }
        _ => {
            let m = Gb2::new(params)?;
            (sorted.iter().map(|&x| m.ln_pdf(x)).sum(), ks_statistic(sorted, |x| m.cdf(x))?)
        }
    };
    Ok(FitResult { family, params, ks, log_likelihood, converged, n_samples: sorted.len() })
}

/// Which upper tail points are left out of a straight-line fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailExclusion {
    /// Keep everything up to the maximum.
    None,
    /// Drop values greater than this fraction of the maximum value.
    FractionOfMax(f64),
}

impl TailExclusion {
    pub fn bound(&self, max: f64) -> Result<f64> {
        match *self {
            TailExclusion::None => Ok(max),
            TailExclusion::FractionOfMax(f) if f > 0.0 && f < 1.0 => Ok(f * max),
            TailExclusion::FractionOfMax(f) => Err(Error::InvalidInput(format!(
                "exclusion fraction must lie in (0, 1) (got {f})"
            ))),
        }
    }
}

/// Ordinary least squares of `log10 CCDF` on `log10 x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearTailFit {
    pub slope: f64,
    pub intercept: f64,
    pub xmin: f64,
    pub excluded_above: f64,
    pub n_points: usize,
    pub slope_stderr: f64,
}

impl LinearTailFit {
    /// The fitted line's CCDF, `10^(intercept + slope·log10 x)`, clamped to `[0, 1]`.
    pub fn line_ccdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        10f64.powf(self.intercept + self.slope * x.log10()).clamp(0.0, 1.0)
    }
}

impl CdfModel for LinearTailFit {
    fn cdf(&self, x: f64) -> f64 {
        1.0 - self.line_ccdf(x)
    }

    fn ccdf(&self, x: f64) -> f64 {
        self.line_ccdf(x)
    }
}

/// Fits a line to the CCDF points with `xmin < x <= bound` on log-log axes.
/// Points with zero CCDF are dropped before taking logs.
pub fn linear_tail_fit(points: &[(f64, f64)], xmin: f64, exclusion: TailExclusion) -> Result<LinearTailFit> {
    if !(xmin > 0.0) {
        return Err(Error::InvalidInput(format!("xmin must be positive (got {xmin})")));
    }
    let max = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if points.is_empty() {
        return Err(Error::TooFewPoints { needed: 3, got: 0 });
    }
    let bound = exclusion.bound(max)?;
    if bound <= xmin {
        return Err(Error::InvalidInput(format!(
            "exclusion bound {bound} does not exceed xmin {xmin}"
        )));
    }
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, s)| *x > xmin && *x <= bound && *s > 0.0)
        .map(|(x, s)| (x.log10(), s.log10()))
        .collect();
    if xy.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: xy.len() });
    }
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidInput("tail points share a single value".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xy.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let slope_stderr = (ssr / (n - 2.0) / sxx).sqrt();
    Ok(LinearTailFit { slope, intercept, xmin, excluded_above: bound, n_points: xy.len(), slope_stderr })
}
