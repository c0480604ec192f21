//! The per-window analysis and the batch run over all window lengths.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDate;
use log::{info, warn};
use rvdk_core::dist::Family;
use rvdk_core::dktest::{dk_report, DkReport, Label, ModelTag, ReportFits, ReportOptions};
use rvdk_core::fit::{empirical_ccdf, fit_mle, linear_tail_fit, FitResult, LinearTailFit, TailExclusion};
use rvdk_core::rvcalc::{log_returns, realized_volatility, PriceSeries, ReturnSeries, RvSeries, WindowStride};
use serde::Serialize;

use crate::config::RunConfig;
use crate::ingest::ingest_csv;
use crate::plotdata;

pub const SCHEMA_VERSION: u32 = 1;

/// Everything computed for one window length.
#[derive(Debug, Clone)]
pub struct WindowAnalysis {
    pub window_n: usize,
    pub rv: RvSeries,
    /// Positive RV values, in series order.
    pub samples: Vec<f64>,
    pub zero_dropped: usize,
    pub gb2_fit_bound: f64,
    pub gb2_fit_samples: usize,
    pub mgb: FitResult,
    pub gb2: FitResult,
    pub lf: LinearTailFit,
    pub reports: Vec<DkReport>,
}

impl WindowAnalysis {
    pub fn report(&self, model: ModelTag) -> &DkReport {
        self.reports.iter().find(|r| r.model == model).expect("one report per model")
    }
}

/// Fits the RV distribution for window length `n` and tests its tail.
pub fn analyze_window(returns: &ReturnSeries, n: usize, cfg: &RunConfig) -> Result<WindowAnalysis> {
    let rv = realized_volatility(returns, n, cfg.stride)?;
    let samples: Vec<f64> = rv.values.iter().copied().filter(|&v| v > 0.0).collect();
    let zero_dropped = rv.len() - samples.len();
    if samples.is_empty() {
        bail!("zero variance: every {n}-day realized volatility is 0 (constant prices?)");
    }
    if zero_dropped > 0 {
        warn!("n={n}: dropped {zero_dropped} zero RV values before fitting");
    }

    let fits = fit_models(&samples, cfg.starts, cfg.seed, cfg.xmin, cfg.exclusion_fraction)?;
    for fit in [&fits.mgb, &fits.gb2] {
        if !fit.converged {
            warn!("n={n}: {} fit did not meet the simplex tolerance from any start", fit.family);
        }
    }

    let opts = ReportOptions { window_n: n, xmin: cfg.xmin, thresholds: cfg.thresholds(), confidence: cfg.confidence };
    let reports = dk_report(&samples, fits.as_report_fits(), &opts)?;
    Ok(WindowAnalysis {
        window_n: n,
        rv,
        samples,
        zero_dropped,
        gb2_fit_bound: fits.gb2_fit_bound,
        gb2_fit_samples: fits.gb2_fit_samples,
        mgb: fits.mgb,
        gb2: fits.gb2,
        lf: fits.lf,
        reports,
    })
}

/// The three tail models fitted to one sample.
#[derive(Debug, Clone)]
pub struct ModelFits {
    pub mgb: FitResult,
    pub gb2: FitResult,
    pub lf: LinearTailFit,
    /// GB2 and LF see only values at or below this bound.
    pub gb2_fit_bound: f64,
    pub gb2_fit_samples: usize,
}

impl ModelFits {
    pub fn as_report_fits(&self) -> ReportFits<'_> {
        ReportFits { mgb: &self.mgb, gb2: &self.gb2, lf: &self.lf }
    }
}

/// mGB on all samples; GB2 and the tail line without the values above
/// `exclusion_fraction` of the maximum.
pub fn fit_models(samples: &[f64], starts: usize, seed: u64, xmin: f64, exclusion_fraction: f64) -> Result<ModelFits> {
    let mgb = fit_mle(samples, Family::Mgb, starts, seed).context("mGB fit")?;
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exclusion = TailExclusion::FractionOfMax(exclusion_fraction);
    let gb2_fit_bound = exclusion.bound(max)?;
    let gb2_input: Vec<f64> = samples.iter().copied().filter(|&v| v <= gb2_fit_bound).collect();
    let gb2 = fit_mle(&gb2_input, Family::Gb2, starts, seed).context("GB2 fit")?;
    let lf = linear_tail_fit(&empirical_ccdf(samples)?, xmin, exclusion).context("tail line fit")?;
    Ok(ModelFits { mgb, gb2, lf, gb2_fit_bound, gb2_fit_samples: gb2_input.len() })
}

#[derive(Debug, Clone, Serialize)]
pub struct InputMeta {
    pub path: String,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
    pub n_prices: usize,
}

impl InputMeta {
    pub fn new(path: &Path, prices: &PriceSeries) -> Self {
        let (first_date, last_date) = prices.span();
        Self { path: path.display().to_string(), first_date, last_date, n_prices: prices.len() }
    }
}

#[derive(Serialize)]
struct Settings {
    stride: WindowStride,
    xmin: f64,
    exclusion_fraction: f64,
    confidence: f64,
    dk_threshold: f64,
    ndk_threshold: f64,
    seed: u64,
    starts: usize,
}

#[derive(Serialize)]
struct LabelCounts {
    model: ModelTag,
    tested: usize,
    dk: usize,
    bs: usize,
    ndk: usize,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    schema_version: u32,
    window_n: usize,
    input: &'a InputMeta,
    settings: Settings,
    n_rv: usize,
    n_zero_dropped: usize,
    gb2_fit_bound: f64,
    gb2_fit_samples: usize,
    counts: Vec<LabelCounts>,
    reports: &'a [DkReport],
}

/// Serializes one window's report as pretty-printed JSON.
pub fn report_json(a: &WindowAnalysis, input: &InputMeta, cfg: &RunConfig) -> Result<String> {
    let file = ReportFile {
        schema_version: SCHEMA_VERSION,
        window_n: a.window_n,
        input,
        settings: Settings {
            stride: cfg.stride,
            xmin: cfg.xmin,
            exclusion_fraction: cfg.exclusion_fraction,
            confidence: cfg.confidence,
            dk_threshold: cfg.dk_threshold,
            ndk_threshold: cfg.ndk_threshold,
            seed: cfg.seed,
            starts: cfg.starts,
        },
        n_rv: a.rv.len(),
        n_zero_dropped: a.zero_dropped,
        gb2_fit_bound: a.gb2_fit_bound,
        gb2_fit_samples: a.gb2_fit_samples,
        counts: a
            .reports
            .iter()
            .map(|r| LabelCounts {
                model: r.model,
                tested: r.points.len(),
                dk: r.count(Label::Dk),
                bs: r.count(Label::Bs),
                ndk: r.count(Label::NDk),
            })
            .collect(),
        reports: &a.reports,
    };
    let mut s = serde_json::to_string_pretty(&file)?;
    s.push('\n');
    Ok(s)
}

/// Outcome of a batch run: analyses that succeeded and errors for the rest.
pub struct RunOutcome {
    pub input: InputMeta,
    pub results: Vec<(usize, std::result::Result<WindowAnalysis, String>)>,
}

impl RunOutcome {
    pub fn succeeded(&self) -> usize {
        self.results.iter().filter(|(_, r)| r.is_ok()).count()
    }
}

/// Runs every window length in `cfg.n_list` and writes the report bundle.
/// Fails only when the input cannot be read, the output cannot be written,
/// or no window length succeeds.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunOutcome> {
    let prices = ingest_csv(&cfg.input_path).with_context(|| format!("reading {}", cfg.input_path.display()))?;
    let input = InputMeta::new(&cfg.input_path, &prices);
    info!(
        "{} prices from {} to {}",
        input.n_prices, input.first_date, input.last_date
    );
    let returns = log_returns(&prices);
    std::fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("creating output directory {}", cfg.output_dir.display()))?;

    let mut results = Vec::with_capacity(cfg.n_list.len());
    for &n in &cfg.n_list {
        info!("n={n}: fitting");
        match analyze_window(&returns, n, cfg) {
            Ok(a) => {
                plotdata::write_window(&a, &input, cfg)?;
                info!(
                    "n={n}: {} RV values; KS mGB {:.4}, GB2 {:.4}; LF slope {:.3}",
                    a.samples.len(),
                    a.mgb.ks,
                    a.gb2.ks,
                    a.lf.slope
                );
                results.push((n, Ok(a)));
            }
            Err(e) => {
                let msg = format!("{e:#}");
                log::error!("n={n}: {msg}");
                results.push((n, Err(msg)));
            }
        }
    }
    let outcome = RunOutcome { input, results };
    plotdata::write_summary(&outcome, cfg)?;
    if outcome.succeeded() == 0 {
        return Err(anyhow!("analysis failed for every window length"));
    }
    Ok(outcome)
}
