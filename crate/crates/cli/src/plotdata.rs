//! Tab-separated plot data and the per-window JSON report.
//!
//! Files written to the output directory, `{n}` being the window length:
//!
//! - `report_n{n}.json`: fits, U-test points and CI bands for all three models
//! - `timeseries_n{n}.tsv`: `date  rv  marked`, only rows with RV above the
//!   time-series threshold; `marked` is 1 above the marker level
//! - `tail_n{n}.tsv`: `log10_rv  log10_ccdf_emp  log10_ccdf_mgb  log10_ccdf_gb2
//!   log10_ccdf_lf` at every distinct RV value
//! - `pvalues_n{n}.tsv`: U-test p-values and labels of each model for RV > xmin
//! - `ci_{lf,gb2,mgb}_n{n}.tsv`: empirical CCDF with each model's band
//! - `summary.tsv`: slopes, KS statistics and label counts, one row per n

use std::path::Path;

use anyhow::{Context, Result};
use rvdk_core::dist::{CdfModel, Family};
use rvdk_core::dktest::{DkReport, Label, ModelTag};
use rvdk_core::fit::empirical_ccdf;
use rvdk_core::rvcalc::threshold_filter;

use crate::config::RunConfig;
use crate::pipeline::{report_json, InputMeta, RunOutcome, WindowAnalysis};

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
}

fn tsv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join("\t");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out
}

fn num(v: f64) -> String {
    v.to_string()
}

pub fn timeseries_tsv(a: &WindowAnalysis, cfg: &RunConfig) -> String {
    let rows = threshold_filter(&a.rv, cfg.ts_threshold, cfg.ts_marker)
        .into_iter()
        .map(|p| vec![p.date.to_string(), num(p.value), (p.marked as u8).to_string()]);
    tsv(&["date", "rv", "marked"], rows)
}

pub fn tail_tsv(a: &WindowAnalysis) -> Result<String> {
    let mgb = a.mgb.model()?;
    let gb2 = a.gb2.model()?;
    let rows = empirical_ccdf(&a.samples)?.into_iter().map(|(x, s)| {
        vec![
            num(x.log10()),
            num(s.log10()),
            num(mgb.ccdf(x).log10()),
            num(gb2.ccdf(x).log10()),
            num(a.lf.ccdf(x).log10()),
        ]
    });
    Ok(tsv(&["log10_rv", "log10_ccdf_emp", "log10_ccdf_mgb", "log10_ccdf_gb2", "log10_ccdf_lf"], rows))
}

pub fn pvalues_tsv(a: &WindowAnalysis) -> String {
    let (m, g, l) = (a.report(ModelTag::Mgb), a.report(ModelTag::Gb2), a.report(ModelTag::Lf));
    let rows = m.points.iter().zip(&g.points).zip(&l.points).map(|((pm, pg), pl)| {
        vec![
            num(pm.value),
            pm.rank_k.to_string(),
            num(pm.p_value),
            pm.label.to_string(),
            num(pg.p_value),
            pg.label.to_string(),
            num(pl.p_value),
            pl.label.to_string(),
        ]
    });
    tsv(&["rv", "rank_k", "p_mgb", "label_mgb", "p_gb2", "label_gb2", "p_lf", "label_lf"], rows)
}

pub fn ci_tsv(report: &DkReport) -> String {
    let rows = report.bands.iter().map(|b| {
        let position = match b.position {
            rvdk_core::dktest::BandPosition::Above => "above",
            rvdk_core::dktest::BandPosition::Inside => "inside",
            rvdk_core::dktest::BandPosition::Below => "below",
        };
        vec![num(b.x), num(b.empirical_ccdf), num(b.model_ccdf), num(b.lower), num(b.upper), position.to_string()]
    });
    tsv(&["rv", "ccdf_emp", "ccdf_model", "lower", "upper", "position"], rows)
}

/// Writes all per-window files for `a`.
pub fn write_window(a: &WindowAnalysis, input: &InputMeta, cfg: &RunConfig) -> Result<()> {
    let dir = &cfg.output_dir;
    let n = a.window_n;
    write(dir, &format!("report_n{n}.json"), &report_json(a, input, cfg)?)?;
    write(dir, &format!("timeseries_n{n}.tsv"), &timeseries_tsv(a, cfg))?;
    write(dir, &format!("tail_n{n}.tsv"), &tail_tsv(a)?)?;
    write(dir, &format!("pvalues_n{n}.tsv"), &pvalues_tsv(a))?;
    for (tag, name) in [(ModelTag::Lf, "lf"), (ModelTag::Gb2, "gb2"), (ModelTag::Mgb, "mgb")] {
        write(dir, &format!("ci_{name}_n{n}.tsv"), &ci_tsv(a.report(tag)))?;
    }
    Ok(())
}

pub const SUMMARY_COLUMNS: [&str; 16] = [
    "n",
    "status",
    "n_samples",
    "lf_slope",
    "lf_slope_stderr",
    "gb2_slope",
    "mgb_slope",
    "ks_mgb",
    "ks_gb2",
    "dk_lf",
    "ndk_lf",
    "dk_gb2",
    "ndk_gb2",
    "dk_mgb",
    "ndk_mgb",
    "error",
];

pub fn summary_tsv(outcome: &RunOutcome) -> String {
    let rows = outcome.results.iter().map(|(n, r)| match r {
        Ok(a) => {
            let mut row = vec![
                n.to_string(),
                "ok".to_string(),
                a.samples.len().to_string(),
                num(a.lf.slope),
                num(a.lf.slope_stderr),
                num(-rvdk_core::dist::tail_exponent(&a.gb2.params, Family::Gb2)),
                num(-rvdk_core::dist::tail_exponent(&a.mgb.params, Family::Mgb)),
                num(a.mgb.ks),
                num(a.gb2.ks),
            ];
            for tag in [ModelTag::Lf, ModelTag::Gb2, ModelTag::Mgb] {
                let rep = a.report(tag);
                row.push(rep.count(Label::Dk).to_string());
                row.push(rep.count(Label::NDk).to_string());
            }
            row.push(String::new());
            row
        }
        Err(e) => {
            let mut row = vec![n.to_string(), "failed".to_string()];
            row.extend(std::iter::repeat_n(String::new(), SUMMARY_COLUMNS.len() - 3));
            row.push(e.replace(['\t', '\n'], " "));
            row
        }
    });
    tsv(&SUMMARY_COLUMNS, rows)
}

pub fn write_summary(outcome: &RunOutcome, cfg: &RunConfig) -> Result<()> {
    write(&cfg.output_dir, "summary.tsv", &summary_tsv(outcome))
}
