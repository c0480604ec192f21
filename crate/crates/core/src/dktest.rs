//! Dragon King / Black Swan / negative Dragon King classification of tail
//! points with the order-statistics U-test, and binomial-inversion
//! confidence bands for the empirical CCDF.

use serde::{Deserialize, Serialize};

use crate::dist::{CdfModel, Family};
use crate::error::{domain, Error, Result};
use crate::fit::{FitResult, LinearTailFit};
use crate::specfun::{binom_quantile, reg_inc_beta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "DK")]
    Dk,
    #[serde(rename = "BS")]
    Bs,
    #[serde(rename = "nDK")]
    NDk,
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Label::Dk => "DK",
            Label::Bs => "BS",
            Label::NDk => "nDK",
        })
    }
}

/// p-value cutoffs: DK below `dk`, nDK above `ndk`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub dk: f64,
    pub ndk: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { dk: 0.05, ndk: 0.95 }
    }
}

impl Thresholds {
    pub fn new(dk: f64, ndk: f64) -> Result<Self> {
        let t = Self { dk, ndk };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.dk) || !(0.0..=1.0).contains(&self.ndk) || self.dk >= self.ndk {
            return Err(domain(format!(
                "thresholds must satisfy 0 <= dk < ndk <= 1 (got dk={}, ndk={})",
                self.dk, self.ndk
            )));
        }
        Ok(())
    }
}

pub fn classify(p: f64, thresholds: &Thresholds) -> Label {
    if p < thresholds.dk {
        Label::Dk
    } else if p > thresholds.ndk {
        Label::NDk
    } else {
        Label::Bs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointTest {
    /// 1-based ascending rank within the full sample.
    pub rank_k: usize,
    pub value: f64,
    pub model_cdf: f64,
    pub p_value: f64,
    pub label: Label,
}

/// Adapts a plain CDF closure to [`CdfModel`].
pub struct FromCdf<F>(pub F);

impl<F: Fn(f64) -> f64 + Send + Sync> CdfModel for FromCdf<F> {
    fn cdf(&self, x: f64) -> f64 {
        (self.0)(x)
    }

    fn ccdf(&self, x: f64) -> f64 {
        1.0 - (self.0)(x)
    }
}

fn check_sorted(sorted: &[f64]) -> Result<()> {
    if sorted.is_empty() {
        return Err(Error::TooFewPoints { needed: 1, got: 0 });
    }
    if let Some(i) = sorted.iter().position(|v| v.is_nan()) {
        return Err(Error::InvalidInput(format!("sample {i} is NaN")));
    }
    match sorted.windows(2).position(|w| w[1] < w[0]) {
        Some(i) => Err(Error::Unsorted { index: i + 1 }),
        None => Ok(()),
    }
}

/// p-value of the `k`-th smallest of `n` order statistics whose model CCDF
/// is `s`: `1 - I(1 - s; k, n-k+1) = I(s; n-k+1, k)`.
fn order_stat_p(s: f64, k: usize, n: usize) -> Result<f64> {
    reg_inc_beta(s.clamp(0.0, 1.0), (n - k + 1) as f64, k as f64)
}

fn test_from<M: CdfModel + ?Sized>(
    sorted: &[f64],
    model: &M,
    first: usize,
    thresholds: &Thresholds,
) -> Result<Vec<PointTest>> {
    let n = sorted.len();
    sorted[first..]
        .iter()
        .enumerate()
        .map(|(i, &value)| {
            let k = first + i + 1;
            let p_value = order_stat_p(model.ccdf(value), k, n)?;
            Ok(PointTest {
                rank_k: k,
                value,
                model_cdf: model.cdf(value).clamp(0.0, 1.0),
                p_value,
                label: classify(p_value, thresholds),
            })
        })
        .collect()
}

/// U-test of every order statistic of `sorted` (ascending) against `model`.
pub fn u_test<M: CdfModel + ?Sized>(sorted: &[f64], model: &M, thresholds: &Thresholds) -> Result<Vec<PointTest>> {
    check_sorted(sorted)?;
    thresholds.validate()?;
    test_from(sorted, model, 0, thresholds)
}

/// U-test restricted to values above `xmin`, keeping ranks relative to the
/// whole sample.
pub fn u_test_above<M: CdfModel + ?Sized>(
    sorted: &[f64],
    model: &M,
    xmin: f64,
    thresholds: &Thresholds,
) -> Result<Vec<PointTest>> {
    check_sorted(sorted)?;
    thresholds.validate()?;
    let first = sorted.partition_point(|&v| v <= xmin);
    test_from(sorted, model, first, thresholds)
}

/// Binomial-inversion band `(lower, upper)` for an empirical CCDF over `n`
/// samples when the model CCDF is `s`.
pub fn ci_band(s: f64, n: u64, confidence: f64) -> Result<(f64, f64)> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(domain(format!("confidence must lie in (0, 1) (got {confidence})")));
    }
    let s = s.clamp(0.0, 1.0);
    let lo = binom_quantile((1.0 - confidence) / 2.0, n, s)?;
    let hi = binom_quantile((1.0 + confidence) / 2.0, n, s)?;
    Ok((lo as f64 / n as f64, hi as f64 / n as f64))
}

/// Where the empirical CCDF sits relative to its band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandPosition {
    Above,
    Inside,
    Below,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiBand {
    pub x: f64,
    pub empirical_ccdf: f64,
    pub model_ccdf: f64,
    pub lower: f64,
    pub upper: f64,
    pub confidence: f64,
    pub position: BandPosition,
}

/// Which model a report was computed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelTag {
    #[serde(rename = "mGB")]
    Mgb,
    #[serde(rename = "GB2")]
    Gb2,
    #[serde(rename = "LF")]
    Lf,
}

impl ModelTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelTag::Mgb => "mGB",
            ModelTag::Gb2 => "GB2",
            ModelTag::Lf => "LF",
        }
    }
}

impl std::fmt::Display for ModelTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportFit {
    Mle(FitResult),
    Linear(LinearTailFit),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DkReport {
    pub window_n: usize,
    pub model: ModelTag,
    pub points: Vec<PointTest>,
    pub bands: Vec<CiBand>,
    pub fit: ReportFit,
}

impl DkReport {
    pub fn count(&self, label: Label) -> usize {
        self.points.iter().filter(|p| p.label == label).count()
    }
}

/// The three fits a set of reports is built from.
#[derive(Debug, Clone, Copy)]
pub struct ReportFits<'a> {
    pub mgb: &'a FitResult,
    pub gb2: &'a FitResult,
    pub lf: &'a LinearTailFit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub window_n: usize,
    pub xmin: f64,
    pub thresholds: Thresholds,
    pub confidence: f64,
}

fn bands_above<M: CdfModel + ?Sized>(sorted: &[f64], model: &M, xmin: f64, confidence: f64) -> Result<Vec<CiBand>> {
    let n = sorted.len();
    let mut bands = Vec::new();
    let mut i = sorted.partition_point(|&v| v <= xmin);
    while i < n {
        let x = sorted[i];
        let empirical_ccdf = (n - i) as f64 / n as f64;
        let model_ccdf = model.ccdf(x).clamp(0.0, 1.0);
        let (lower, upper) = ci_band(model_ccdf, n as u64, confidence)?;
        let position = if empirical_ccdf > upper {
            BandPosition::Above
        } else if empirical_ccdf < lower {
            BandPosition::Below
        } else {
            BandPosition::Inside
        };
        bands.push(CiBand { x, empirical_ccdf, model_ccdf, lower, upper, confidence, position });
        while i < n && sorted[i] == x {
            i += 1;
        }
    }
    Ok(bands)
}

/// Builds one report per fit (mGB, GB2, LF) for the tail `value > xmin`.
pub fn dk_report(samples: &[f64], fits: ReportFits<'_>, opts: &ReportOptions) -> Result<Vec<DkReport>> {
    if let Some(bad) = samples.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput(format!("samples must be positive (found {bad})")));
    }
    opts.thresholds.validate()?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);

    let mut reports = Vec::with_capacity(3);
    for (tag, fit) in [(ModelTag::Mgb, fits.mgb), (ModelTag::Gb2, fits.gb2)] {
        let expected = if tag == ModelTag::Mgb { Family::Mgb } else { Family::Gb2 };
        if fit.family != expected {
            return Err(Error::InvalidInput(format!("{tag} report given a {} fit", fit.family)));
        }
        let model = fit.model()?;
        reports.push(DkReport {
            window_n: opts.window_n,
            model: tag,
            points: u_test_above(&sorted, model.as_ref(), opts.xmin, &opts.thresholds)?,
            bands: bands_above(&sorted, model.as_ref(), opts.xmin, opts.confidence)?,
            fit: ReportFit::Mle(fit.clone()),
        });
    }
    reports.push(DkReport {
        window_n: opts.window_n,
        model: ModelTag::Lf,
        points: u_test_above(&sorted, fits.lf, opts.xmin, &opts.thresholds)?,
        bands: bands_above(&sorted, fits.lf, opts.xmin, opts.confidence)?,
        fit: ReportFit::Linear(*fits.lf),
    });
    Ok(reports)
}
