use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rvdk_core::dist::{gb2_sample, mgb_sample, Family, GbParams};
use rvdk_core::dktest::{dk_report, Label, ReportOptions, Thresholds};
use rvdk_core::fit::fit_mle;
use rvdk_core::rvcalc::WindowStride;
use rvdk_cli::config::{Overrides, RunConfig};
use rvdk_cli::ingest::read_values;
use rvdk_cli::pipeline::{fit_models, run_pipeline};

#[derive(Parser)]
#[command(name = "rvdk", version, about = "Realized-volatility tail analysis: GB-family fits and Dragon King tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline on a date,close CSV for several window lengths.
    Analyze(AnalyzeArgs),
    /// Draw synthetic samples from GB2 or mGB, one value per line.
    Synth(SynthArgs),
    /// Fit mGB or GB2 to a file of sample values and print the result as JSON.
    Fit(FitArgs),
    /// Fit all three models to a file of sample values and print their tail tests as JSON.
    Dktest(DktestArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum StrideArg {
    Overlapping,
    NonOverlapping,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// TOML file with run settings; flags given here take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// Comma-separated window lengths in trading days.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    stride: Option<StrideArg>,
    #[arg(long)]
    xmin: Option<f64>,
    /// Values above this fraction of the maximum are left out of the LF and GB2 fits.
    #[arg(long)]
    exclude_frac: Option<f64>,
    #[arg(long)]
    confidence: Option<f64>,
    #[arg(long)]
    dk: Option<f64>,
    #[arg(long)]
    ndk: Option<f64>,
    #[arg(long)]
    ts_threshold: Option<f64>,
    #[arg(long)]
    ts_marker: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Gb2,
    Mgb,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Gb2 => Family::Gb2,
            FamilyArg::Mgb => Family::Mgb,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long)]
    alpha: f64,
    /// Upper support bound; required for mGB.
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: f64,
    #[arg(long)]
    p: f64,
    #[arg(long)]
    q: f64,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// File of positive values, one per line.
    #[arg(long)]
    values: PathBuf,
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long, default_value_t = 8)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DktestArgs {
    /// File of positive values, one per line.
    #[arg(long)]
    values: PathBuf,
    #[arg(long, default_value_t = 40.0)]
    xmin: f64,
    #[arg(long, default_value_t = 0.9)]
    exclude_frac: f64,
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
    #[arg(long, default_value_t = 0.05)]
    dk: f64,
    #[arg(long, default_value_t = 0.95)]
    ndk: f64,
    #[arg(long, default_value_t = 8)]
    starts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Window length recorded in the report.
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(out: Option<&Path>, body: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, body).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let flags = Overrides {
        input_path: args.input,
        n_list: args.n,
        stride: args.stride.map(|s| match s {
            StrideArg::Overlapping => WindowStride::Overlapping,
            StrideArg::NonOverlapping => WindowStride::NonOverlapping,
        }),
        xmin: args.xmin,
        exclusion_fraction: args.exclude_frac,
        confidence: args.confidence,
        dk_threshold: args.dk,
        ndk_threshold: args.ndk,
        ts_threshold: args.ts_threshold,
        ts_marker: args.ts_marker,
        seed: args.seed,
        starts: args.starts,
        output_dir: args.out,
    };
    let cfg = RunConfig::resolve(args.config.as_deref(), flags)?;
    let outcome = run_pipeline(&cfg)?;
    info!(
        "{} of {} window lengths succeeded; output in {}",
        outcome.succeeded(),
        cfg.n_list.len(),
        cfg.output_dir.display()
    );
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let samples = match args.family {
        FamilyArg::Gb2 => gb2_sample(&GbParams::gb2(args.alpha, args.beta2, args.p, args.q), args.count, args.seed)?,
        FamilyArg::Mgb => {
            let Some(beta1) = args.beta1 else { bail!("--beta1 is required for mGB") };
            mgb_sample(&GbParams::new(args.alpha, beta1, args.beta2, args.p, args.q), args.count, args.seed)?
        }
    };
    let mut body = String::with_capacity(samples.len() * 20);
    for v in samples {
        body.push_str(&v.to_string());
        body.push('\n');
    }
    emit(args.out.as_deref(), &body)
}

fn fit(args: FitArgs) -> Result<()> {
    let values = read_values(&args.values)?;
    let result = fit_mle(&values, args.family.into(), args.starts, args.seed)?;
    emit(args.out.as_deref(), &(serde_json::to_string_pretty(&result)? + "\n"))
}

fn dktest(args: DktestArgs) -> Result<()> {
    let values = read_values(&args.values)?;
    let thresholds = Thresholds::new(args.dk, args.ndk)?;
    let fits = fit_models(&values, args.starts, args.seed, args.xmin, args.exclude_frac)?;
    let opts = ReportOptions { window_n: args.n, xmin: args.xmin, thresholds, confidence: args.confidence };
    let reports = dk_report(&values, fits.as_report_fits(), &opts)?;
    for r in &reports {
        info!(
            "{}: {} points tested, {} DK, {} nDK",
            r.model,
            r.points.len(),
            r.count(Label::Dk),
            r.count(Label::NDk)
        );
    }
    emit(args.out.as_deref(), &(serde_json::to_string_pretty(&reports)? + "\n"))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    match Cli::parse().command {
        Command::Analyze(args) => analyze(args),
        Command::Synth(args) => synth(args),
        Command::Fit(args) => fit(args),
        Command::Dktest(args) => dktest(args),
    }
}
