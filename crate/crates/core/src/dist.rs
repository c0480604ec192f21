//! The generalized beta family used for realized-volatility distributions.
//!
//! Three members share one parameter record ([`GbParams`]):
//!
//! * **GB**: support `[0, β₁]`, CCDF `I(y; q, p)` with
//!   `y = (1 - (x/β₁)^α) / (1 + (x/β₂)^α)`.
//! * **mGB**: same support, density carrying an extra `(1 + (x/β₂)^α)^{-1}`
//!   factor; its tail in the `β₂ ≪ x ≪ β₁` stretch falls as `x^{-α(q+1)}`
//!   before dropping to zero at `β₁`.
//! * **GB2** (generalized beta prime): the `β₁ → ∞` limit with an unbounded
//!   power-law tail `x^{-αq}`. `β₁` is ignored.
//!
//! Throughout, `t = (x/β₂)^α`, `s = (x/β₁)^α = r·t` with `r = (β₂/β₁)^α`,
//! `y = (1 - s)/(1 + t)` and `w = 1 - y = t(1 + r)/(1 + t)`. All of these are
//! formed from logarithms so that fitted parameters with `α ln(x/β₂)` in the
//! hundreds neither overflow nor lose the small side of `y + w = 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::optim::brent_root;
use crate::specfun::{inc_beta_inv_pair, inc_beta_tails, ln_beta_unchecked, BetaTails};

/// Shape `α, p, q` and scale `β₁, β₂` parameters. For GB2, `β₁` is unused
/// and conventionally stored as `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbParams {
    pub alpha: f64,
    #[serde(with = "infinite_as_null")]
    pub beta1: f64,
    pub beta2: f64,
    pub p: f64,
    pub q: f64,
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl GbParams {
    pub fn new(alpha: f64, beta1: f64, beta2: f64, p: f64, q: f64) -> Self {
        Self { alpha, beta1, beta2, p, q }
    }

    /// Parameters for GB2, which has no upper support bound.
    pub fn gb2(alpha: f64, beta2: f64, p: f64, q: f64) -> Self {
        Self { alpha, beta1: f64::INFINITY, beta2, p, q }
    }

    pub fn validate(&self, family: Family) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(domain(format!("{name} must be positive and finite (got {v})")))
            }
        };
        positive("alpha", self.alpha)?;
        positive("beta2", self.beta2)?;
        positive("p", self.p)?;
        positive("q", self.q)?;
        if family != Family::Gb2 {
            positive("beta1", self.beta1)?;
            if self.beta2 >= self.beta1 {
                return Err(domain(format!(
                    "{family} requires beta2 < beta1 (got beta2={}, beta1={})",
                    self.beta2, self.beta1
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "GB")]
    Gb,
    #[serde(rename = "mGB")]
    Mgb,
    #[serde(rename = "GB2")]
    Gb2,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Gb => "GB",
            Family::Mgb => "mGB",
            Family::Gb2 => "GB2",
        })
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gb" => Ok(Family::Gb),
            "mgb" => Ok(Family::Mgb),
            "gb2" => Ok(Family::Gb2),
            other => Err(Error::InvalidInput(format!("unknown family '{other}'"))),
        }
    }
}

/// A fitted or reference model that can report its CDF and CCDF.
///
/// Both are exposed because deep in a tail the CCDF carries the information
/// and `1 - cdf` would round it away.
pub trait CdfModel: Send + Sync {
    fn cdf(&self, x: f64) -> f64;
    fn ccdf(&self, x: f64) -> f64;
}

/// `ln(1 + e^v)` without overflow.
fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

/// `a * ln_v` with the convention `0 * ln 0 = 0`.
fn xlog(a: f64, ln_v: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * ln_v
    }
}

fn tails_or_nan(t: Option<BetaTails>) -> BetaTails {
    t.unwrap_or(BetaTails { lower: f64::NAN, upper: f64::NAN })
}

/// Logarithms of the bounded-support auxiliaries at `x`.
#[derive(Debug, Clone, Copy)]
struct Aux {
    /// `ln t = α ln(x/β₂)`
    ln_t: f64,
    /// `ln y`
    ln_y: f64,
    /// `ln w`
    ln_w: f64,
    /// `ln(1 - s)`
    ln_1ms: f64,
}

fn bounded_aux(x: f64, params: &GbParams, ln_r: f64) -> Aux {
    let ln_t = params.alpha * (x / params.beta2).ln();
    let ln_s = params.alpha * (x / params.beta1).ln();
    let ln_1ms = (-ln_s.exp()).ln_1p();
    let sp = softplus(ln_t);
    Aux { ln_t, ln_y: ln_1ms - sp, ln_w: ln_t + ln_r.exp().ln_1p() - sp, ln_1ms }
}

/// GB density, CDF and CCDF. Only used for the endpoint diagnostic and as
/// the first term of the mGB CDF.
#[derive(Debug, Clone, Copy)]
pub struct Gb {
    params: GbParams,
    ln_b: f64,
    ln_r: f64,
}

impl Gb {
    pub fn new(params: GbParams) -> Result<Self> {
        params.validate(Family::Gb)?;
        Ok(Self {
            params,
            ln_b: ln_beta_unchecked(params.p, params.q),
            ln_r: params.alpha * (params.beta2 / params.beta1).ln(),
        })
    }

    pub fn params(&self) -> &GbParams {
        &self.params
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let GbParams { alpha, beta1, beta2, p, q } = self.params;
        if x < 0.0 || x > beta1 {
            return f64::NEG_INFINITY;
        }
        let a = bounded_aux(x, &self.params, self.ln_r);
        alpha.ln() + p * self.ln_r.exp().ln_1p() + xlog(alpha * p - 1.0, (x / beta2).ln())
            - (p + q) * softplus(a.ln_t)
            + xlog(q - 1.0, a.ln_1ms)
            - beta2.ln()
            - self.ln_b
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    fn tails(&self, x: f64) -> BetaTails {
        if x <= 0.0 {
            return BetaTails { lower: 0.0, upper: 1.0 };
        }
        if x >= self.params.beta1 {
            return BetaTails { lower: 1.0, upper: 0.0 };
        }
        let a = bounded_aux(x, &self.params, self.ln_r);
        // CDF = I(w; p, q)
        tails_or_nan(inc_beta_tails(a.ln_w.exp(), a.ln_y.exp(), self.params.p, self.params.q, self.ln_b))
    }
}

impl CdfModel for Gb {
    fn cdf(&self, x: f64) -> f64 {
        self.tails(x).lower
    }

    fn ccdf(&self, x: f64) -> f64 {
        self.tails(x).upper
    }
}

/// The modified generalized beta distribution.
#[derive(Debug, Clone, Copy)]
pub struct Mgb {
    params: GbParams,
    ln_b: f64,
    /// `ln B(q + 1, p)`
    ln_b_shifted: f64,
    /// `ln r = α ln(β₂/β₁)`
    ln_r: f64,
    /// `ln(q + r(p + q))`
    ln_norm: f64,
}

impl Mgb {
    pub fn new(params: GbParams) -> Result<Self> {
        params.validate(Family::Mgb)?;
        let GbParams { alpha, beta1, beta2, p, q } = params;
        let ln_r = alpha * (beta2 / beta1).ln();
        Ok(Self {
            params,
            ln_b: ln_beta_unchecked(p, q),
            ln_b_shifted: ln_beta_unchecked(q + 1.0, p),
            ln_r,
            ln_norm: (q + ln_r.exp() * (p + q)).ln(),
        })
    }

    pub fn params(&self) -> &GbParams {
        &self.params
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let GbParams { alpha, beta1, beta2, p, q } = self.params;
        if x < 0.0 || x > beta1 {
            return f64::NEG_INFINITY;
        }
        let a = bounded_aux(x, &self.params, self.ln_r);
        alpha.ln() + (p + q).ln() + (p + 1.0) * self.ln_r.exp().ln_1p()
            + xlog(alpha * p - 1.0, (x / beta2).ln())
            - (p + q + 1.0) * softplus(a.ln_t)
            + xlog(q - 1.0, a.ln_1ms)
            - beta2.ln()
            - self.ln_b
            - self.ln_norm
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// CCDF written as the GB CCDF minus a correction term, i.e.
    /// `I(y; q, p) - y^q w^p / (B(p,q) (q + r(p+q)))`.
    ///
    /// The two terms nearly cancel when `r = (β₂/β₁)^α` is small, so this
    /// form loses about `-log10 r` digits. [`CdfModel::ccdf`] uses the
    /// cancellation-free rearrangement instead; this one is kept for
    /// cross-checking.
    pub fn ccdf_two_term(&self, x: f64) -> f64 {
        let GbParams { beta1, p, q, .. } = self.params;
        if x <= 0.0 {
            return 1.0;
        }
        if x >= beta1 {
            return 0.0;
        }
        let a = bounded_aux(x, &self.params, self.ln_r);
        let gb = tails_or_nan(inc_beta_tails(a.ln_y.exp(), a.ln_w.exp(), q, p, self.ln_b)).lower;
        gb - (q * a.ln_y + p * a.ln_w - self.ln_b - self.ln_norm).exp()
    }
}

impl CdfModel for Mgb {
    /// `I(w; p, q) + y^q w^p / (B(p,q) (q + r(p+q)))`; both terms are
    /// nonnegative.
    fn cdf(&self, x: f64) -> f64 {
        let GbParams { beta1, p, q, .. } = self.params;
        if x <= 0.0 {
            return 0.0;
        }
        if x >= beta1 {
            return 1.0;
        }
        let a = bounded_aux(x, &self.params, self.ln_r);
        let gb = tails_or_nan(inc_beta_tails(a.ln_w.exp(), a.ln_y.exp(), p, q, self.ln_b)).lower;
        let corr = (q * a.ln_y + p * a.ln_w - self.ln_b - self.ln_norm).exp();
        (gb + corr).min(1.0)
    }

    /// Using `I(y; q, p) = I(y; q+1, p) + y^q w^p / (q B(p,q))`, the mGB CCDF
    /// becomes `I(y; q+1, p) + y^q w^p r (p+q) / (q B(p,q) (q + r(p+q)))`.
    fn ccdf(&self, x: f64) -> f64 {
        let GbParams { beta1, p, q, .. } = self.params;
        if x <= 0.0 {
            return 1.0;
        }
        if x >= beta1 {
            return 0.0;
        }
        let a = bounded_aux(x, &self.params, self.ln_r);
        let shifted =
            tails_or_nan(inc_beta_tails(a.ln_y.exp(), a.ln_w.exp(), q + 1.0, p, self.ln_b_shifted)).lower;
        let ln_corr = q * a.ln_y + p * a.ln_w + self.ln_r + (p + q).ln()
            - q.ln()
            - self.ln_b
            - self.ln_norm;
        (shifted + ln_corr.exp()).min(1.0)
    }
}

/// The generalized beta prime distribution.
#[derive(Debug, Clone, Copy)]
pub struct Gb2 {
    params: GbParams,
    ln_b: f64,
}

impl Gb2 {
    pub fn new(params: GbParams) -> Result<Self> {
        params.validate(Family::Gb2)?;
        Ok(Self { params, ln_b: ln_beta_unchecked(params.p, params.q) })
    }

    pub fn params(&self) -> &GbParams {
        &self.params
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let GbParams { alpha, beta2, p, q, .. } = self.params;
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let z = (x / beta2).ln();
        alpha.ln() + xlog(alpha * p - 1.0, z) - (p + q) * softplus(alpha * z) - beta2.ln() - self.ln_b
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    fn tails(&self, x: f64) -> BetaTails {
        if x <= 0.0 {
            return BetaTails { lower: 1.0, upper: 0.0 };
        }
        let ln_t = self.params.alpha * (x / self.params.beta2).ln();
        let sp = softplus(ln_t);
        let y = (-sp).exp();
        let w = (ln_t - sp).exp();
        // CCDF = I(1/(1+t); q, p)
        tails_or_nan(inc_beta_tails(y, w, self.params.q, self.params.p, self.ln_b))
    }

    /// Inverse-transform draws: `u ~ U(0,1)`, `y = I⁻¹(u; q, p)`,
    /// `x = β₂ ((1 - y)/y)^{1/α}`.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<f64>> {
        let GbParams { alpha, beta2, p, q, .. } = self.params;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let u = open_unit(&mut rng);
                let (y, w) = inc_beta_inv_pair(u, q, p)?;
                Ok(beta2 * ((w.ln() - y.ln()) / alpha).exp())
            })
            .collect()
    }
}

impl CdfModel for Gb2 {
    fn cdf(&self, x: f64) -> f64 {
        self.tails(x).upper
    }

    fn ccdf(&self, x: f64) -> f64 {
        self.tails(x).lower
    }
}

/// Uniform draw from the open interval `(0, 1)`.
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

impl Mgb {
    /// Inverse-transform draws by Brent root finding on the CCDF over `[0, β₁]`.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<f64>> {
        let beta1 = self.params.beta1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let u = open_unit(&mut rng);
                brent_root(|x| self.ccdf(x) - u, 0.0, beta1, 1e-13 * beta1, 300)
            })
            .collect()
    }
}

fn check_support(x: f64, params: &GbParams) -> Result<()> {
    if !(0.0..=params.beta1).contains(&x) {
        return Err(domain(format!("x={x} outside support [0, {}]", params.beta1)));
    }
    Ok(())
}

fn check_positive(x: f64) -> Result<()> {
    if !(x > 0.0) {
        return Err(domain(format!("x must be positive (got {x})")));
    }
    Ok(())
}

pub fn gb_pdf(x: f64, params: &GbParams) -> Result<f64> {
    let d = Gb::new(*params)?;
    check_support(x, params)?;
    Ok(d.pdf(x))
}

pub fn mgb_pdf(x: f64, params: &GbParams) -> Result<f64> {
    let d = Mgb::new(*params)?;
    check_support(x, params)?;
    Ok(d.pdf(x))
}

pub fn mgb_ccdf(x: f64, params: &GbParams) -> Result<f64> {
    let d = Mgb::new(*params)?;
    check_support(x, params)?;
    Ok(d.ccdf(x))
}

pub fn gb2_pdf(x: f64, params: &GbParams) -> Result<f64> {
    let d = Gb2::new(*params)?;
    check_positive(x)?;
    Ok(d.pdf(x))
}

pub fn gb2_ccdf(x: f64, params: &GbParams) -> Result<f64> {
    let d = Gb2::new(*params)?;
    check_positive(x)?;
    Ok(d.ccdf(x))
}

/// Magnitude of the log-log CCDF slope in the power-law stretch:
/// `αq` for GB and GB2, `α(q + 1)` for mGB.
pub fn tail_exponent(params: &GbParams, family: Family) -> f64 {
    match family {
        Family::Gb | Family::Gb2 => params.alpha * params.q,
        Family::Mgb => params.alpha * (params.q + 1.0),
    }
}

/// Leading behaviour of the CCDF as `x → β₁⁻` when `β₂ ≪ β₁`:
///
/// * GB: `y^q / (q B(p,q))`
/// * mGB: `(1 + p/q) y^q (β₂/β₁)^α / (q B(p,q))`
///
/// with `y = (1 - (x/β₁)^α) / (1 + (x/β₂)^α)`. GB2 has no finite endpoint.
pub fn endpoint_asymptote(x: f64, params: &GbParams, family: Family) -> Result<f64> {
    if family == Family::Gb2 {
        return Err(Error::InvalidInput("GB2 has no finite upper endpoint".into()));
    }
    params.validate(family)?;
    check_support(x, params)?;
    let GbParams { alpha, beta1, p, q, .. } = *params;
    let ln_r = alpha * (params.beta2 / beta1).ln();
    let a = bounded_aux(x, params, ln_r);
    let ln_b = ln_beta_unchecked(p, q);
    let ln_gb = xlog(q, a.ln_y) - q.ln() - ln_b;
    Ok(match family {
        Family::Gb => ln_gb.exp(),
        _ => (ln_gb + (p / q).ln_1p() + ln_r).exp(),
    })
}

pub fn gb2_sample(params: &GbParams, count: usize, seed: u64) -> Result<Vec<f64>> {
    Gb2::new(*params)?.sample(count, seed)
}

pub fn mgb_sample(params: &GbParams, count: usize, seed: u64) -> Result<Vec<f64>> {
    Mgb::new(*params)?.sample(count, seed)
}
