//! Synthetic inputs shared by the CLI tests.

#![allow(dead_code)]

use std::path::Path;

use chrono::{Days, NaiveDate};
use rvdk_core::dist::{gb2_sample, GbParams};

/// Writes a `date,close` CSV whose daily RV values (n = 1) are draws from
/// `params`: `|r| = x / (100·sqrt(252))`, signs alternating irregularly.
pub fn write_gb2_prices(path: &Path, params: &GbParams, days: usize, seed: u64) {
    let draws = gb2_sample(params, days, seed).unwrap();
    let start = NaiveDate::from_ymd_opt(1990, 1, 2).unwrap();
    let mut body = String::from("date,close\n");
    let mut price = 1000.0f64;
    body.push_str(&format!("{start},{price}\n"));
    for (i, x) in draws.iter().enumerate() {
        let sign = if (i * 7919) % 13 < 6 { -1.0 } else { 1.0 };
        price *= (sign * x / (100.0 * 252f64.sqrt())).exp();
        body.push_str(&format!("{},{price}\n", start + Days::new(i as u64 + 1)));
    }
    std::fs::write(path, body).unwrap();
}

/// RV-like marginal: mode near 10, power-law tail with exponent 3.
pub fn rv_like() -> GbParams {
    GbParams::gb2(2.0, 12.0, 2.0, 1.5)
}
