//! Run configuration. Values come from built-in defaults, optionally
//! overridden by a TOML file, in turn overridden by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rvdk_core::dktest::Thresholds;
use rvdk_core::rvcalc::WindowStride;
use serde::{Deserialize, Serialize};

pub const DEFAULT_N_LIST: [usize; 9] = [1, 2, 3, 5, 7, 9, 13, 17, 21];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input_path: PathBuf,
    pub n_list: Vec<usize>,
    pub stride: WindowStride,
    pub xmin: f64,
    pub exclusion_fraction: f64,
    pub confidence: f64,
    pub dk_threshold: f64,
    pub ndk_threshold: f64,
    pub ts_threshold: f64,
    pub ts_marker: f64,
    pub seed: u64,
    pub starts: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input_path: PathBuf::new(),
            n_list: DEFAULT_N_LIST.to_vec(),
            stride: WindowStride::Overlapping,
            xmin: 40.0,
            exclusion_fraction: 0.9,
            confidence: 0.95,
            dk_threshold: 0.05,
            ndk_threshold: 0.95,
            ts_threshold: 17.0,
            ts_marker: 10f64.powf(1.75),
            seed: 0,
            starts: 8,
            output_dir: PathBuf::from("rvdk-out"),
        }
    }
}

/// Flag values that, when present, take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub input_path: Option<PathBuf>,
    pub n_list: Option<Vec<usize>>,
    pub stride: Option<WindowStride>,
    pub xmin: Option<f64>,
    pub exclusion_fraction: Option<f64>,
    pub confidence: Option<f64>,
    pub dk_threshold: Option<f64>,
    pub ndk_threshold: Option<f64>,
    pub ts_threshold: Option<f64>,
    pub ts_marker: Option<f64>,
    pub seed: Option<u64>,
    pub starts: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config file {}", path.display()))
    }

    /// Defaults, then `file` if given, then `flags`; validated.
    pub fn resolve(file: Option<&Path>, flags: Overrides) -> Result<Self> {
        let mut cfg = match file {
            Some(path) => Self::from_toml_file(path)?,
            None => Self::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = flags.$field { cfg.$field = v; })*
            };
        }
        apply!(
            input_path, n_list, stride, xmin, exclusion_fraction, confidence, dk_threshold,
            ndk_threshold, ts_threshold, ts_marker, seed, starts, output_dir
        );
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds { dk: self.dk_threshold, ndk: self.ndk_threshold }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_path.as_os_str().is_empty() {
            bail!("no input file given (use --input or input_path in the config file)");
        }
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            bail!("window lengths must be a non-empty list of positive integers");
        }
        let mut seen = self.n_list.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.n_list.len() {
            bail!("window lengths must not repeat");
        }
        if !(self.xmin > 0.0) {
            bail!("xmin must be positive (got {})", self.xmin);
        }
        if !(self.exclusion_fraction > 0.0 && self.exclusion_fraction < 1.0) {
            bail!("exclusion fraction must lie in (0, 1) (got {})", self.exclusion_fraction);
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            bail!("confidence must lie in (0, 1) (got {})", self.confidence);
        }
        self.thresholds().validate()?;
        if !(self.ts_threshold >= 0.0 && self.ts_marker >= self.ts_threshold) {
            bail!(
                "time-series thresholds must satisfy 0 <= threshold <= marker (got {} and {})",
                self.ts_threshold,
                self.ts_marker
            );
        }
        if self.starts == 0 {
            bail!("at least one optimizer start is required");
        }
        Ok(())
    }
}
