//! One-sided β-stable subordinators and symmetric α-stable spatial drivers:
//! exact samplers and density evaluation.
//!
//! Normalizations used throughout the crate:
//!
//! * the subordinator has Laplace transform `E[exp(-λ S_u)] = exp(-u λ^β)`;
//! * the α-stable driver (α < 2) has characteristic function
//!   `E[exp(i<ξ, Y_t>)] = exp(-t |ξ|^α)` and is isotropic;
//! * the α = 2 driver is standard Brownian motion.

mod density;
mod symmetric;

pub use density::OneSidedStable;
pub use symmetric::SymmetricStableDensity;

use std::f64::consts::PI;

use rand::Rng;
use rand::distr::Open01;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_alpha, check_beta, check_positive, Error, Result};

/// Largest subordinator path we agree to allocate.
pub const MAX_PATH_STEPS: usize = 1 << 31;

/// Exact sampler of `S_1` for the standard β-stable subordinator
/// (Kanter / Chambers–Mallows–Stuck transform of a uniform angle and an
/// exponential variate).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositiveStable {
    beta: f64,
    inv_beta: f64,
    ratio: f64,
}

impl PositiveStable {
    pub fn new(beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(Self {
            beta,
            inv_beta: 1.0 / beta,
            ratio: (1.0 - beta) / beta,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl Distribution<f64> for PositiveStable {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = PI * rng.sample::<f64, _>(Open01);
        let w: f64 = rng.sample(Exp1);
        // log form: sin(βU) / sin(U)^{1/β} * (sin((1-β)U) / W)^{(1-β)/β}
        let ln_s = (self.beta * u).sin().ln() - self.inv_beta * u.sin().ln()
            + self.ratio * (((1.0 - self.beta) * u).sin().ln() - w.max(f64::MIN_POSITIVE).ln());
        let s = ln_s.exp();
        // Extreme angles near π can overflow for small β; S is a.s. finite.
        if s.is_finite() {
            s.max(f64::MIN_POSITIVE)
        } else {
            f64::MAX
        }
    }
}

/// One draw of `S_1^{β,+}`.
pub fn sample_positive_stable<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> Result<f64> {
    Ok(PositiveStable::new(beta)?.sample(rng))
}

/// A subordinator sampled on the grid `t_i = i h`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubordinatorPath {
    step: f64,
    beta: f64,
    values: Vec<f64>,
}

impl SubordinatorPath {
    /// Build a path from explicit values. `values[0]` must be zero and the
    /// sequence nondecreasing.
    pub fn from_values(beta: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        check_beta(beta)?;
        check_positive("step", step)?;
        if values.first() != Some(&0.0) {
            return Err(Error::param("values", "path must start at 0"));
        }
        if values.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(Error::param("values", "path must be nondecreasing"));
        }
        Ok(Self { step, beta, values })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of increments.
    pub fn n_steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("path is never empty")
    }

    /// Append `n_more` exact increments.
    pub fn extend<R: Rng + ?Sized>(&mut self, n_more: usize, rng: &mut R) -> Result<()> {
        let total = self
            .values
            .len()
            .checked_add(n_more)
            .filter(|&n| n <= MAX_PATH_STEPS)
            .ok_or_else(|| Error::Resource(format!("path of {} + {n_more} points", self.values.len())))?;
        let sampler = PositiveStable::new(self.beta)?;
        let scale = self.step.powf(1.0 / self.beta);
        self.values.reserve(total - self.values.len());
        let mut level = self.last();
        for _ in 0..n_more {
            level += scale * sampler.sample(rng);
            self.values.push(level);
        }
        Ok(())
    }
}

/// Exact grid sample `(S_{t_0}, ..., S_{t_n})`: increments are i.i.d.
/// copies of `h^{1/β} S_1`.
pub fn sample_subordinator_path<R: Rng + ?Sized>(
    beta: f64,
    step: f64,
    n_steps: usize,
    rng: &mut R,
) -> Result<SubordinatorPath> {
    let mut path = SubordinatorPath::from_values(beta, step, vec![0.0])?;
    path.extend(n_steps, rng)?;
    Ok(path)
}

/// Spherical part of the Lévy measure. Only the uniform measure is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectralMeasure {
    #[default]
    Isotropic,
}

/// Symmetric α-stable driver in `R^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableDriverSpec {
    pub alpha: f64,
    pub dim: usize,
    #[serde(default)]
    pub spectral: SpectralMeasure,
}

impl StableDriverSpec {
    pub fn new(alpha: f64, dim: usize) -> Result<Self> {
        let spec = Self {
            alpha,
            dim,
            spectral: SpectralMeasure::Isotropic,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn brownian(dim: usize) -> Self {
        Self {
            alpha: 2.0,
            dim,
            spectral: SpectralMeasure::Isotropic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.dim == 0 {
            return Err(Error::param("dim", "dimension must be at least 1"));
        }
        Ok(())
    }

    pub fn is_brownian(&self) -> bool {
        self.alpha == 2.0
    }
}

/// Writes one draw of the time-1 driver into `out` (length `spec.dim`).
///
/// For α < 2 this is the sub-Gaussian construction `sqrt(2A) N` with `A`
/// positive (α/2)-stable, which gives `E exp(i<ξ,X>) = exp(-|ξ|^α)`.
pub fn fill_symmetric_stable<R: Rng + ?Sized>(alpha: f64, out: &mut [f64], rng: &mut R) {
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    if alpha < 2.0 {
        let a = PositiveStable {
            beta: 0.5 * alpha,
            inv_beta: 2.0 / alpha,
            ratio: (1.0 - 0.5 * alpha) / (0.5 * alpha),
        }
        .sample(rng);
        let scale = (2.0 * a).sqrt();
        for v in out.iter_mut() {
            *v *= scale;
        }
    }
}

pub fn sample_symmetric_stable_vector<R: Rng + ?Sized>(spec: &StableDriverSpec, rng: &mut R) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut out = vec![0.0; spec.dim];
    fill_symmetric_stable(spec.alpha, &mut out, rng);
    Ok(out)
}

/// `p_{S^{β,+}}(1, v)`.
pub fn stable_subordinator_density(beta: f64, v: f64) -> Result<f64> {
    OneSidedStable::new(beta)?.density(v)
}
