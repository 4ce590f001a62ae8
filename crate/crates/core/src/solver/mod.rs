//! Monte Carlo solution of `∂_t^β u = L u` through `u(T,x) = E[f(X_{Z_T})]`,
//! density estimation, quadrature reference densities and fractional
//! derivatives.

mod converge;
mod density;
mod fractional;
mod reference;

pub use converge::{
    convergence_rows, scheme_vs_finest, time_change_error, time_change_error_exact, ConvergenceRow, LadderPoint,
};
pub use density::{estimate_density, kde_at, silverman_bandwidth, DensityGrid, DensityMethod, GridSpec};
pub use fractional::{
    caputo_derivative, pde_residual_check, riemann_liouville_derivative, ResidualPoint, ResidualReport, TimeDerivative,
};
pub use reference::{reference_density, ReferenceDensity};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inverse_time::{sample_discrete_inverse, sample_inverse_dyadic, sample_inverse_time};
use crate::rng::{PathRng, StreamFactory};
use crate::spatial::Scheme;
use crate::stats::RunningStats;

/// Paths per reduction chunk. Fixed so the reduction tree does not depend on
/// the number of worker threads.
pub const CHUNK: u64 = 4096;

/// Monte Carlo estimate of a scalar expectation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
}

impl McEstimate {
    pub fn from_stats(stats: &RunningStats, seed: u64) -> Self {
        Self {
            mean: stats.mean(),
            stderr: stats.std_error(),
            n_samples: stats.count(),
            seed,
        }
    }

    /// True when every sample was identical.
    pub fn is_degenerate(&self) -> bool {
        self.stderr == 0.0
    }
}

/// How the discrete inverse clock `Z_T^{β,h}` is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClockMode {
    /// Simulate the subordinator on the grid until it crosses `T`.
    #[default]
    Path,
    /// Round an exact draw of `Z_T = (T/S_1)^β` up to the grid; same law as
    /// `Path` since `{Z^h ≤ t_i} = {S_{t_i} ≥ T} = {Z_T ≤ t_i}`.
    ExactLaw,
    /// As `ExactLaw` with the nested-Brownian sampler; needs `β = 2^{-n}`.
    Dyadic,
}

/// Number of grid steps `Z_T^{β,h}/h`.
pub fn sample_clock_steps<R: Rng + ?Sized>(mode: ClockMode, beta: f64, h: f64, horizon: f64, rng: &mut R) -> Result<u64> {
    let z = match mode {
        ClockMode::Path => return Ok(sample_discrete_inverse(beta, h, horizon, rng)?.grid_index.unwrap_or(0)),
        ClockMode::ExactLaw => sample_inverse_time(beta, horizon, rng)?,
        ClockMode::Dyadic => sample_inverse_dyadic(dyadic_level(beta)?, horizon, rng)?,
    };
    Ok(((z / h).ceil() as u64).max(1))
}

/// `n` with `β = 2^{-n}`.
pub fn dyadic_level(beta: f64) -> Result<u32> {
    (1..=30)
        .find(|&n| beta == 0.5f64.powi(n as i32))
        .ok_or_else(|| Error::param("beta", format!("{beta} is not of the form 2^-n")))
}

/// Runs `f(path index, stream)` over `n` paths in fixed chunks and merges the
/// chunk statistics in index order.
pub fn parallel_stats<F>(factory: StreamFactory, n: u64, f: F) -> Result<RunningStats>
where
    F: Fn(u64, &mut PathRng) -> Result<f64> + Sync,
{
    let n_chunks = n.div_ceil(CHUNK);
    let parts: Vec<Result<RunningStats>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut st = RunningStats::new();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                st.push(f(i, &mut factory.stream(i))?);
            }
            Ok(st)
        })
        .collect();
    let mut total = RunningStats::new();
    for p in parts {
        total.merge(&p?);
    }
    Ok(total)
}

/// Collects `f(path index, stream)` for every path, in index order.
pub fn parallel_map<T, F>(factory: StreamFactory, n: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &mut PathRng) -> Result<T> + Sync,
{
    (0..n).into_par_iter().map(|i| f(i, &mut factory.stream(i))).collect()
}

/// One endpoint `X^h_{Z_T^{β,h}}` started at `x`.
pub fn sample_endpoint<R: Rng + ?Sized>(scheme: &Scheme, clock: ClockMode, x: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let cfg = scheme.config();
    let steps = sample_clock_steps(clock, cfg.beta, cfg.h, cfg.horizon, rng)?;
    let mut y = x.to_vec();
    scheme.advance(&mut y, steps, &mut scheme.workspace(), rng)?;
    Ok(y)
}

/// Monte Carlo estimate of `E[f(X^h_{Z_T^{β,h}})]` from `x`, with
/// `cfg.n_paths` paths and streams keyed by `cfg.seed`.
pub fn solve_fractional_cauchy<F>(f: F, x: &[f64], scheme: &Scheme, clock: ClockMode) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let cfg = scheme.config();
    if x.len() != cfg.dim {
        return Err(Error::param("x", format!("length {} != d = {}", x.len(), cfg.dim)));
    }
    let factory = StreamFactory::new(cfg.seed);
    let stats = parallel_stats(factory, cfg.n_paths, |_, rng| {
        let y = sample_endpoint(scheme, clock, x, rng)?;
        let v = f(&y);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::numerical("payoff", format!("non-finite payoff at {y:?}")))
        }
    })?;
    Ok(McEstimate::from_stats(&stats, cfg.seed))
}

/// All endpoints of a configuration, flattened row-major (`n_paths × d`).
pub fn sample_endpoints(scheme: &Scheme, clock: ClockMode) -> Result<Vec<f64>> {
    let cfg = scheme.config();
    let x = cfg.start_point();
    let rows = parallel_map(StreamFactory::new(cfg.seed), cfg.n_paths, |_, rng| sample_endpoint(scheme, clock, &x, rng))?;
    Ok(rows.into_iter().flatten().collect())
}
