//! Daily log returns and n-day annualized realized volatility.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Trading days per year used for annualization.
pub const TRADING_DAYS: f64 = 252.0;

/// Dated closing prices, strictly increasing in date, all positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    dates: Vec<NaiveDate>,
    closes: Vec<f64>,
}

impl PriceSeries {
    pub fn new(dates: Vec<NaiveDate>, closes: Vec<f64>) -> Result<Self> {
        if dates.len() != closes.len() {
            return Err(Error::InvalidInput(format!(
                "{} dates but {} closes",
                dates.len(),
                closes.len()
            )));
        }
        if closes.len() < 2 {
            return Err(Error::TooFewPoints { needed: 2, got: closes.len() });
        }
        if let Some(i) = closes.iter().position(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "close on {} is not a positive number: {}",
                dates[i], closes[i]
            )));
        }
        if let Some(w) = dates.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(format!(
                "dates must be strictly increasing: {} is followed by {}",
                w[0], w[1]
            )));
        }
        Ok(Self { dates, closes })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn closes(&self) -> &[f64] {
        &self.closes
    }

    pub fn len(&self) -> usize {
        self.closes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closes.is_empty()
    }

    pub fn span(&self) -> (NaiveDate, NaiveDate) {
        (self.dates[0], self.dates[self.dates.len() - 1])
    }
}

/// Daily log returns, each dated by the later of its two closes.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub dates: Vec<NaiveDate>,
    pub returns: Vec<f64>,
}

impl ReturnSeries {
    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }
}

/// How consecutive n-day windows are laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowStride {
    /// One window ending on every trading day.
    #[default]
    Overlapping,
    /// Disjoint blocks of n days.
    NonOverlapping,
}

/// Annualized realized volatility in percent, one value per window,
/// dated by the window's last day.
#[derive(Debug, Clone, PartialEq)]
pub struct RvSeries {
    pub window_n: usize,
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl RvSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn log_returns(prices: &PriceSeries) -> ReturnSeries {
    let returns = prices
        .closes
        .windows(2)
        .map(|w| (w[1] / w[0]).ln())
        .collect();
    ReturnSeries { dates: prices.dates[1..].to_vec(), returns }
}

/// `RV = 100 * sqrt(252 / n * Σ r_i²)` over each window of `n` returns.
pub fn realized_volatility(returns: &ReturnSeries, n: usize, stride: WindowStride) -> Result<RvSeries> {
    if n == 0 {
        return Err(Error::InvalidInput("window length must be at least 1".into()));
    }
    if returns.len() < n {
        return Err(Error::TooFewPoints { needed: n, got: returns.len() });
    }
    let scale = 100.0 * TRADING_DAYS.sqrt();
    let step = match stride {
        WindowStride::Overlapping => 1,
        WindowStride::NonOverlapping => n,
    };
    let squares: Vec<f64> = returns.returns.iter().map(|r| r * r).collect();
    let (dates, values) = (0..=squares.len() - n)
        .step_by(step)
        .map(|start| {
            // Summed per window rather than as a running difference so that a
            // zero-variance window is exactly zero.
            let mean_sq = squares[start..start + n].iter().sum::<f64>() / n as f64;
            (returns.dates[start + n - 1], scale * mean_sq.sqrt())
        })
        .unzip();
    Ok(RvSeries { window_n: n, dates, values })
}

/// One point of a threshold-filtered RV series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlaggedPoint {
    pub date: NaiveDate,
    pub value: f64,
    pub marked: bool,
}

/// Keeps points with `value > lo` and marks those with `value > marker`.
pub fn threshold_filter(rv: &RvSeries, lo: f64, marker: f64) -> Vec<FlaggedPoint> {
    rv.dates
        .iter()
        .zip(&rv.values)
        .filter(|(_, &v)| v > lo)
        .map(|(&date, &value)| FlaggedPoint { date, value, marked: value > marker })
        .collect()
}
