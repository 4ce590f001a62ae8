//! Closed-form density and error envelopes, and the fitting machinery that
//! sandwiches a computed density between them.
//!
//! The envelope constants are not explicit, so every check fits them from
//! data and only asks that the fitted values be finite and not absurdly far
//! apart.

use std::fmt::Write as _;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_alpha, check_beta, check_positive, Error, Result};
use crate::solver::DensityGrid;
use crate::stats::log_log_slope;

/// Default sanity ceiling on `ĉ_up / ĉ_low`.
pub const DEFAULT_CEILING: f64 = 1e6;

/// Shape parameters shared by all envelopes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeParams {
    /// Generic constant `c ≥ 1` in prefactors and exponents.
    pub c: f64,
    pub beta: f64,
    pub alpha: f64,
    pub dim: usize,
    /// Polynomial decay order of Markov-chain innovations.
    pub m: u32,
    /// Moment order of the innovations.
    pub big_m: u32,
    /// Slack in the short-time cutoff `h^{1/5-ε}`.
    pub epsilon: f64,
}

impl EnvelopeParams {
    pub fn new(c: f64, beta: f64, alpha: f64, dim: usize) -> Result<Self> {
        let p = Self {
            c,
            beta,
            alpha,
            dim,
            m: 4 * (dim as u32 + 1),
            big_m: 0,
            epsilon: 0.01,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_orders(mut self, m: u32, big_m: u32) -> Self {
        self.m = m;
        self.big_m = big_m;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 1.0) || !self.c.is_finite() {
            return Err(Error::param("c", format!("{} must be a finite constant >= 1", self.c)));
        }
        check_beta(self.beta)?;
        check_alpha(self.alpha)?;
        if self.dim == 0 {
            return Err(Error::param("dim", "dimension must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.2) {
            return Err(Error::param("epsilon", format!("{} not in (0, 1/5)", self.epsilon)));
        }
        Ok(())
    }

    /// `ω = min(1/α, 1)`.
    pub fn omega(&self) -> f64 {
        (1.0 / self.alpha).min(1.0)
    }

    fn diffusive(&self) -> Result<()> {
        self.validate()?;
        if self.alpha != 2.0 {
            return Err(Error::param("alpha", "diffusive envelopes need alpha = 2"));
        }
        Ok(())
    }

    fn stable(&self) -> Result<()> {
        self.validate()?;
        if self.alpha >= 2.0 {
            return Err(Error::param("alpha", "stable envelopes need alpha < 2"));
        }
        Ok(())
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn check_point(horizon: f64, r: f64, singular: bool) -> Result<()> {
    check_positive("T", horizon)?;
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::param("r", format!("{r} must be finite and nonnegative")));
    }
    if singular && r == 0.0 {
        return Err(Error::Singularity("envelope is singular on the diagonal r = 0".into()));
    }
    Ok(())
}

/// Diagonal prefactor shared by `hat_p` and `hat_q`.
fn hat_prefactor(p: &EnvelopeParams, horizon: f64, r: f64) -> f64 {
    let d = p.dim;
    let tb = horizon.powf(p.beta);
    let low = if d <= 2 { 1.0 / (tb.sqrt() * r.powf(indicator(d == 2))) } else { 0.0 };
    let high = if d >= 3 { 1.0 / (tb * r.powi(d as i32 - 2)) } else { 0.0 };
    (low + high) * (p.c * tb.sqrt()).exp()
}

fn tilde_prefactor(p: &EnvelopeParams, horizon: f64) -> f64 {
    (p.c * horizon.powf(p.beta / (1.0 + p.beta))).exp() / horizon.powf(p.beta * p.dim as f64 / 2.0)
}

/// `(r²/T^β)^{1/(2-β)}`.
fn stretched(p: &EnvelopeParams, horizon: f64, r: f64) -> f64 {
    (r * r / horizon.powf(p.beta)).powf(1.0 / (2.0 - p.beta))
}

/// Diagonal part of the diffusive density envelope.
pub fn hat_p_beta_diffusive(p: &EnvelopeParams, horizon: f64, r: f64) -> Result<f64> {
    p.diffusive()?;
    check_point(horizon, r, p.dim >= 2)?;
    Ok(hat_prefactor(p, horizon, r) * (-r * r / (p.c * horizon.powf(p.beta))).exp())
}

/// Stretched-exponential part of the diffusive density envelope.
pub fn tilde_p_beta_diffusive(p: &EnvelopeParams, horizon: f64, r: f64) -> Result<f64> {
    p.diffusive()?;
    check_point(horizon, r, false)?;
    Ok(tilde_prefactor(p, horizon) * (-stretched(p, horizon, r) / p.c).exp())
}

fn polynomial(p: &EnvelopeParams, horizon: f64, r: f64, order: f64) -> f64 {
    (1.0 + r / horizon.powf(p.beta / 2.0)).powf(-order)
}

/// Polynomial-tail analogue of `hat_p` with decay order `l ≥ 1`.
pub fn hat_q_l_beta(p: &EnvelopeParams, l: i64, horizon: f64, r: f64) -> Result<f64> {
    p.diffusive()?;
    if l < 1 {
        return Err(Error::param("l", format!("decay order {l} must be at least 1")));
    }
    check_point(horizon, r, p.dim >= 2)?;
    Ok(hat_prefactor(p, horizon, r) * polynomial(p, horizon, r, l as f64))
}

/// `⌊m/(2-β)⌋`.
pub fn tilde_q_order(p: &EnvelopeParams) -> f64 {
    (p.m as f64 / (2.0 - p.beta)).floor()
}

/// Polynomial-tail analogue of `tilde_p`, decay order `⌊m/(2-β)⌋`.
pub fn tilde_q_m_beta(p: &EnvelopeParams, horizon: f64, r: f64) -> Result<f64> {
    p.diffusive()?;
    check_point(horizon, r, false)?;
    Ok(tilde_prefactor(p, horizon) * polynomial(p, horizon, r, tilde_q_order(p)))
}

/// `(hat, tilde)` for a strictly stable driver, split at `r = T^{β/α}`.
pub fn stable_envelopes(p: &EnvelopeParams, horizon: f64, r: f64) -> Result<(f64, f64)> {
    p.stable()?;
    let d = p.dim as f64;
    check_point(horizon, r, d > p.alpha)?;
    let tb = horizon.powf(p.beta);
    let scale = horizon.powf(p.beta / p.alpha);
    let w = p.omega();
    let branch = if r <= scale {
        1.0 / (tb * r.powf(d - p.alpha))
    } else {
        tb / r.powf(d + p.alpha)
    };
    let hat = (p.c * tb.powf(w)).exp() * branch;
    let tilde = (p.c * horizon.powf(p.beta * w / (1.0 - w * (1.0 - p.beta)))).exp()
        / (horizon.powf(p.beta * d / p.alpha) * (1.0 + r / scale).powf(d + p.alpha));
    Ok((hat, tilde))
}

/// Error envelopes at one `(T, r, h)`. Diffusive entries are `None` for
/// stable drivers and vice versa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorEnvelopes {
    pub time: Option<f64>,
    pub space: Option<f64>,
    pub space_llt: Option<f64>,
    pub space_nollt: Option<f64>,
    pub stable: Option<f64>,
}

impl ErrorEnvelopes {
    /// `h (E_time + E_space)` for the diffusive Euler scheme, `h E_stable`
    /// for the stable one.
    pub fn euler_bound(&self, h: f64) -> f64 {
        match self.stable {
            Some(s) => h * s,
            None => h * (self.time.unwrap_or(0.0) + self.space.unwrap_or(0.0)),
        }
    }

    /// `h E_time + h^{1/2} E_LLT + E_NoLLT` for a general Markov chain.
    pub fn markov_bound(&self, h: f64) -> f64 {
        h * self.time.unwrap_or(0.0) + h.sqrt() * self.space_llt.unwrap_or(0.0) + self.space_nollt.unwrap_or(0.0)
    }
}

/// Decay order `m - [(d-1) + I_{d=1}]` of the `hat_q` term in `E_LLT`.
pub fn llt_order(p: &EnvelopeParams) -> i64 {
    p.m as i64 - ((p.dim as i64 - 1) + indicator(p.dim == 1) as i64)
}

/// Evaluates every error envelope at `(T, r, h)` with unit outer constants.
pub fn error_envelopes(p: &EnvelopeParams, horizon: f64, r: f64, h: f64) -> Result<ErrorEnvelopes> {
    check_positive("h", h)?;
    check_point(horizon, r, true)?;
    let tb = horizon.powf(p.beta);
    if p.alpha < 2.0 {
        let (hat, tilde) = stable_envelopes(p, horizon, r)?;
        let near = r <= horizon.powf(p.beta / p.alpha);
        let lead = if near { r.powf(-p.alpha) } else { 1.0 / tb };
        return Ok(ErrorEnvelopes {
            time: None,
            space: None,
            space_llt: None,
            space_nollt: None,
            stable: Some(lead * hat + tilde / tb),
        });
    }
    let d = p.dim;
    let hat = hat_p_beta_diffusive(p, horizon, r)?;
    let tilde = tilde_p_beta_diffusive(p, horizon, r)?;
    let time = (indicator(d <= 2) / (tb.sqrt() * r) + indicator(d >= 3) / (r * r)) * hat + tilde / tb;
    let lead = (indicator(d == 1) + indicator(d >= 3)) / r + indicator(d == 2) / tb.sqrt();
    let space = lead * hat + tilde / tb.sqrt();
    let l = llt_order(p);
    let space_llt = if l >= 1 {
        Some(lead * hat_q_l_beta(p, l, horizon, r)? + tilde_q_m_beta(p, horizon, r)? / tb.sqrt())
    } else {
        None
    };
    let delta = h.powf(0.2 - p.epsilon);
    let small = indicator(d <= 2);
    let exponent = -2.0 * (p.m as f64 - 1.0) + (d as f64 - 2.0) + small;
    let nollt = delta.powf(0.5 * small) / (tb * r.powf(d as f64 - 2.0 + small))
        * (p.c * tb.sqrt()).exp()
        * ((-p.c * r * r / delta).exp() + (1.0 + r / delta.sqrt()).powf(exponent));
    Ok(ErrorEnvelopes {
        time: Some(time),
        space: Some(space),
        space_llt,
        space_nollt: Some(nollt),
        stable: None,
    })
}

/// Level-`a` first-passage density of standard Brownian motion,
/// `a (2π u³)^{-1/2} exp(-a²/(2u))`.
pub fn brownian_hitting_density(a: f64, u: f64) -> Result<f64> {
    check_positive("a", a)?;
    if u <= 0.0 {
        return Ok(0.0);
    }
    Ok(a / (2.0 * PI * u * u * u).sqrt() * (-a * a / (2.0 * u)).exp())
}

/// Whether the spatial motion is Brownian or strictly stable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Diffusive,
    Stable,
}

impl Regime {
    pub fn of(alpha: f64) -> Self {
        if alpha < 2.0 {
            Self::Stable
        } else {
            Self::Diffusive
        }
    }

    fn singular(self, p: &EnvelopeParams) -> bool {
        match self {
            Self::Diffusive => p.dim >= 2,
            Self::Stable => p.dim as f64 > p.alpha,
        }
    }
}

fn check_regime(p: &EnvelopeParams, regime: Regime) -> Result<()> {
    match regime {
        Regime::Diffusive => p.diffusive(),
        Regime::Stable => p.stable(),
    }
}

/// Two-sided bound shape, upper side, with unit outer constant.
pub fn two_sided_upper(p: &EnvelopeParams, regime: Regime, horizon: f64, r: f64) -> Result<f64> {
    check_regime(p, regime)?;
    check_point(horizon, r, regime.singular(p))?;
    let (c, d) = (p.c, p.dim);
    let tb = horizon.powf(p.beta);
    match regime {
        Regime::Diffusive => {
            let gauss = (c * tb.sqrt()).exp() * (-r * r / (c * tb)).exp();
            let tail = (c * horizon.powf(p.beta / (1.0 + p.beta))).exp() * (-stretched(p, horizon, r) / c).exp();
            Ok(match d {
                1 => (gauss + tail) / tb.sqrt(),
                2 => {
                    // the log factor vanishes at the seam, so both branches agree there
                    let inside = r <= c.sqrt() * tb.sqrt();
                    let log = if inside { (r / (c.sqrt() * tb.sqrt())).ln().abs() } else { 0.0 };
                    (gauss * (log + 1.0) + tail) / tb
                }
                _ => gauss / (tb * r.powi(d as i32 - 2)) + tail / horizon.powf(p.beta * d as f64 / 2.0),
            })
        }
        Regime::Stable => {
            let w = p.omega();
            let scale = horizon.powf(p.beta / p.alpha);
            let dd = d as f64;
            let tail = (c * horizon.powf(p.beta * w / (1.0 - w * (1.0 - p.beta)))).exp()
                / (horizon.powf(p.beta * dd / p.alpha) * (1.0 + r / scale).powf(dd + p.alpha));
            if d == 1 && p.alpha > 1.0 {
                Ok(tail)
            } else {
                let near = if r <= scale { (c * tb.powf(w)).exp() / (tb * r.powf(dd - p.alpha)) } else { 0.0 };
                Ok(near + tail)
            }
        }
    }
}

/// Two-sided bound shape, lower side, with unit outer constant.
pub fn two_sided_lower(p: &EnvelopeParams, regime: Regime, horizon: f64, r: f64) -> Result<f64> {
    check_regime(p, regime)?;
    check_point(horizon, r, regime.singular(p))?;
    let (c, d) = (p.c, p.dim);
    let tb = horizon.powf(p.beta);
    match regime {
        Regime::Diffusive => {
            let gauss = (-c * tb).exp() * (-c * r * r / tb).exp();
            let tail = (-c * horizon).exp() * (-c * stretched(p, horizon, r)).exp();
            Ok(match d {
                1 => (gauss + tail) / tb.sqrt(),
                2 => {
                    let inside = r <= tb.sqrt() / c.sqrt();
                    let log = if inside { (c.sqrt() * r / tb.sqrt()).ln().abs() } else { 0.0 };
                    (gauss * (log + 1.0) + tail) / tb
                }
                _ => gauss / (tb * r.powi(d as i32 - 2)) + tail / horizon.powf(p.beta * d as f64 / 2.0),
            })
        }
        Regime::Stable => {
            let scale = horizon.powf(p.beta / p.alpha);
            let dd = d as f64;
            let tail = (-c * tb).exp() / (horizon.powf(p.beta * dd / p.alpha) * (1.0 + r / scale).powf(dd + p.alpha));
            if d == 1 && p.alpha > 1.0 {
                Ok(tail)
            } else {
                let near = if r <= scale { (-c * tb).exp() / (tb * r.powf(dd - p.alpha)) } else { 0.0 };
                Ok(near + tail)
            }
        }
    }
}

/// One grid point of a sandwich check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub r: f64,
    pub density: f64,
    pub lower_env: f64,
    pub upper_env: f64,
    /// `density - ĉ_low lower_env ≥ 0`.
    pub slack_low: f64,
    /// `ĉ_up upper_env - density ≥ 0`.
    pub slack_up: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSidedReport {
    pub rows: Vec<SandwichRow>,
    pub c_up: f64,
    pub c_low: f64,
    pub ceiling: f64,
    pub pass: bool,
}

impl TwoSidedReport {
    pub fn ratio(&self) -> f64 {
        self.c_up / self.c_low
    }

    /// `r,density,lower_env,upper_env,slack_low,slack_up` rows and a final
    /// `# summary:` comment line with the fitted constants.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,density,lower_env,upper_env,slack_low,slack_up\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.r, r.density, r.lower_env, r.upper_env, r.slack_low, r.slack_up
            );
        }
        let _ = writeln!(
            s,
            "# summary: c_up={},c_low={},ratio={},ceiling={},pass={}",
            self.c_up,
            self.c_low,
            self.ratio(),
            self.ceiling,
            self.pass
        );
        s
    }
}

/// Fits `ĉ_up = max density/upper` and `ĉ_low = min density/lower` over the
/// grid (`r = |point|`) and passes iff both are finite and positive with
/// `ĉ_up/ĉ_low ≤ ceiling`.
pub fn two_sided_check(
    density: &DensityGrid,
    regime: Regime,
    horizon: f64,
    upper: &EnvelopeParams,
    lower: &EnvelopeParams,
    ceiling: f64,
) -> Result<TwoSidedReport> {
    check_positive("ceiling", ceiling)?;
    if upper.dim != lower.dim || upper.beta != lower.beta || upper.alpha != lower.alpha {
        return Err(Error::param("params", "upper and lower envelopes disagree on (beta, alpha, d)"));
    }
    if regime.singular(upper) && density.points.contains(&0.0) {
        return Err(Error::param("density", "grid touches the singular point r = 0"));
    }
    let mut rows = Vec::with_capacity(density.points.len());
    let (mut c_up, mut c_low) = (0.0f64, f64::INFINITY);
    for (&x, &q) in density.points.iter().zip(&density.values) {
        let r = x.abs();
        let up = two_sided_upper(upper, regime, horizon, r)?;
        let low = two_sided_lower(lower, regime, horizon, r)?;
        c_up = c_up.max(q / up);
        c_low = c_low.min(q / low);
        rows.push(SandwichRow {
            r,
            density: q,
            lower_env: low,
            upper_env: up,
            slack_low: 0.0,
            slack_up: 0.0,
        });
    }
    for row in &mut rows {
        row.slack_low = row.density - c_low * row.lower_env;
        row.slack_up = c_up * row.upper_env - row.density;
    }
    let pass = c_up.is_finite() && c_low.is_finite() && c_up > 0.0 && c_low > 0.0 && c_up / c_low <= ceiling;
    Ok(TwoSidedReport {
        rows,
        c_up,
        c_low,
        ceiling,
        pass,
    })
}

/// Log–log slope of `density` against `r`; the tail exponent with its sign.
pub fn tail_exponent(r: &[f64], density: &[f64]) -> Result<f64> {
    log_log_slope(r, density).ok_or_else(|| Error::numerical("tail exponent", "need two or more positive points"))
}
