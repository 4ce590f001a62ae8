//! The inverse stable subordinator `Z_T = inf{u : S_u > T}`: discrete
//! inversion of sampled paths, its analytic density and bounds, and exact
//! samplers.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::gamma;

use crate::error::{check_beta, check_positive, Error, Result};
use crate::subord::{OneSidedStable, PositiveStable, SubordinatorPath, MAX_PATH_STEPS};

/// A realization of the (possibly discretized) inverse subordinator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseTimeSample {
    pub value: f64,
    /// `i` with `value = i h` for grid samples.
    pub grid_index: Option<u64>,
    pub horizon: f64,
}

/// Smallest grid time `t_i` with `S_{t_i} > T`.
pub fn discrete_inverse(path: &SubordinatorPath, horizon: f64) -> Result<InverseTimeSample> {
    check_positive("T", horizon)?;
    let values = path.values();
    let i = values.partition_point(|&s| s <= horizon);
    if i == values.len() {
        return Err(Error::InsufficientPath {
            level: horizon,
            last: path.last(),
        });
    }
    Ok(InverseTimeSample {
        value: i as f64 * path.step(),
        grid_index: Some(i as u64),
        horizon,
    })
}

/// Draws `Z_T^{β,h}` by simulating subordinator increments on the grid until
/// the level `T` is crossed, without storing the path.
pub fn sample_discrete_inverse<R: Rng + ?Sized>(
    beta: f64,
    step: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<InverseTimeSample> {
    check_positive("h", step)?;
    check_positive("T", horizon)?;
    let sampler = PositiveStable::new(beta)?;
    let scale = step.powf(1.0 / beta);
    // Compare in units of the increment scale so the loop does one multiply-free add.
    let level = horizon / scale;
    let mut s = 0.0;
    let mut i: u64 = 0;
    while s <= level {
        s += sampler.sample(rng);
        i += 1;
        if i as usize >= MAX_PATH_STEPS {
            return Err(Error::Resource(format!(
                "more than {MAX_PATH_STEPS} steps to cross T = {horizon} with h = {step}"
            )));
        }
    }
    Ok(InverseTimeSample {
        value: i as f64 * step,
        grid_index: Some(i),
        horizon,
    })
}

/// Exact draw of `Z_T` for any β using `Z_T = (T / S_1)^β` in law.
pub fn sample_inverse_time<R: Rng + ?Sized>(beta: f64, horizon: f64, rng: &mut R) -> Result<f64> {
    check_positive("T", horizon)?;
    let s = PositiveStable::new(beta)?.sample(rng);
    Ok((horizon / s).powf(beta))
}

/// Exact draw of `Z_T` for `β = 2^{-n}` as the nested Brownian composition
/// `√2|B¹(√2|B²(… √2|Bⁿ(T)| …)|)|`.
pub fn sample_inverse_dyadic<R: Rng + ?Sized>(n: u32, horizon: f64, rng: &mut R) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("n", "dyadic level must be at least 1"));
    }
    check_positive("T", horizon)?;
    let mut t = horizon;
    for _ in 0..n {
        let g: f64 = rng.sample(StandardNormal);
        t = std::f64::consts::SQRT_2 * g.abs() * t.sqrt();
    }
    Ok(t)
}

/// Density and distribution function of `Z_T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseStableLaw {
    stable: OneSidedStable,
}

impl InverseStableLaw {
    pub fn new(beta: f64) -> Result<Self> {
        Ok(Self {
            stable: OneSidedStable::new(beta)?,
        })
    }

    pub fn beta(&self) -> f64 {
        self.stable.beta()
    }

    /// `p_Z(T,u) = T / (β u^{1+1/β}) p_S(1, T u^{-1/β})`.
    pub fn density(&self, horizon: f64, u: f64) -> Result<f64> {
        check_positive("T", horizon)?;
        let b = self.beta();
        if u < 0.0 {
            return Ok(0.0);
        }
        if u < 1e-12 * horizon.powf(b) {
            return Ok(horizon.powf(-b) / gamma(1.0 - b));
        }
        let v = horizon * u.powf(-1.0 / b);
        let p = self.stable.density(v)?;
        if p == 0.0 {
            return Ok(0.0);
        }
        Ok((horizon.ln() - b.ln() - (1.0 + 1.0 / b) * u.ln() + p.ln()).exp())
    }

    /// `P[Z_T ≤ u] = P[S_1 ≥ T u^{-1/β}]`.
    pub fn cdf(&self, horizon: f64, u: f64) -> Result<f64> {
        check_positive("T", horizon)?;
        if u <= 0.0 {
            return Ok(0.0);
        }
        self.stable.survival(horizon * u.powf(-1.0 / self.beta()))
    }

    /// `P[Z_T > u]`, accurate in the upper tail.
    pub fn survival(&self, horizon: f64, u: f64) -> Result<f64> {
        check_positive("T", horizon)?;
        if u <= 0.0 {
            return Ok(1.0);
        }
        self.stable.cdf(horizon * u.powf(-1.0 / self.beta()))
    }

    /// `P[Z_T^{β,h} = i h]` for `i ≥ 1`.
    pub fn discrete_mass(&self, step: f64, horizon: f64, i: u64) -> Result<f64> {
        if i == 0 {
            return Ok(0.0);
        }
        let hi = i as f64 * step;
        let lo = hi - step;
        // difference of survival functions keeps precision in the upper tail
        Ok((self.survival(horizon, lo)? - self.survival(horizon, hi)?).max(0.0))
    }
}

pub fn inverse_density(beta: f64, horizon: f64, u: f64) -> Result<f64> {
    InverseStableLaw::new(beta)?.density(horizon, u)
}

pub fn inverse_cdf(beta: f64, horizon: f64, u: f64) -> Result<f64> {
    InverseStableLaw::new(beta)?.cdf(horizon, u)
}

/// Upper envelope `θ(T,u) = (c/T^β) exp(-c^{-1} (u/T^β)^{1/(1-β)})`.
pub fn theta_bound(beta: f64, horizon: f64, u: f64, c: f64) -> Result<f64> {
    check_beta(beta)?;
    check_positive("T", horizon)?;
    if c < 1.0 {
        return Err(Error::param("c_beta", format!("{c} must be at least 1")));
    }
    let tb = horizon.powf(beta);
    let w = (u.max(0.0) / tb).powf(1.0 / (1.0 - beta));
    Ok(c / tb * (-w / c).exp())
}

/// Matching lower envelope `(c^{-1}/T^β) exp(-c (u/T^β)^{1/(1-β)})`.
pub fn theta_lower_bound(beta: f64, horizon: f64, u: f64, c: f64) -> Result<f64> {
    check_beta(beta)?;
    check_positive("T", horizon)?;
    if c < 1.0 {
        return Err(Error::param("c_beta", format!("{c} must be at least 1")));
    }
    let tb = horizon.powf(beta);
    let w = (u.max(0.0) / tb).powf(1.0 / (1.0 - beta));
    Ok((-w * c).exp() / (c * tb))
}

/// Smallest `c ≥ 1` (to relative precision 1e-10) for which `holds(c)` is
/// true, assuming monotonicity in `c`. `None` if even `c = 1e12` fails.
pub(crate) fn minimal_constant<F: FnMut(f64) -> bool>(mut holds: F) -> Option<f64> {
    if holds(1.0) {
        return Some(1.0);
    }
    let mut hi = 2.0;
    while !holds(hi) {
        hi *= 2.0;
        if hi > 1e12 {
            return None;
        }
    }
    let mut lo = hi / 2.0;
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Fitted constants `(c_upper, c_lower)` for which
/// `theta_lower(c_lower) ≤ p_Z(T,u) ≤ theta(c_upper)` on every grid point.
pub fn fit_theta_constants(beta: f64, horizon: f64, grid: &[f64]) -> Result<(f64, f64)> {
    let law = InverseStableLaw::new(beta)?;
    let dens = grid
        .iter()
        .map(|&u| law.density(horizon, u))
        .collect::<Result<Vec<_>>>()?;
    let check = |upper: bool, c: f64| {
        grid.iter().zip(&dens).all(|(&u, &p)| {
            if upper {
                p <= theta_bound(beta, horizon, u, c).unwrap_or(0.0)
            } else {
                theta_lower_bound(beta, horizon, u, c).unwrap_or(f64::INFINITY) <= p
            }
        })
    };
    let up = minimal_constant(|c| check(true, c))
        .ok_or_else(|| Error::numerical("theta fit", "no finite upper constant"))?;
    let low = minimal_constant(|c| check(false, c))
        .ok_or_else(|| Error::numerical("theta fit", "no finite lower constant"))?;
    Ok((up, low))
}
