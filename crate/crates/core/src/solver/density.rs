use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{quantile_sorted, sort_floats, RunningStats};

/// Evaluation grid `lo, lo + Δ, …, hi` with `n` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        let d = (self.hi - self.lo) / (self.n - 1) as f64;
        (0..self.n).map(|i| self.lo + i as f64 * d).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || !(self.hi >= self.lo) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::param("grid", format!("empty or invalid grid {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityMethod {
    /// Gaussian kernel; Silverman's bandwidth unless given.
    Kde { bandwidth: Option<f64> },
    /// Equal-width bins over the grid range; Freedman–Diaconis count unless given.
    Histogram { bins: Option<usize> },
    /// Values computed by quadrature.
    Quadrature,
}

/// One-dimensional density estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    /// Evaluation points (bin centres for histograms).
    pub points: Vec<f64>,
    pub values: Vec<f64>,
    /// Standard error of each value (zero for quadrature).
    pub band: Vec<f64>,
    pub method: DensityMethod,
    /// Kernel bandwidth or bin width actually used.
    pub bandwidth: f64,
    /// Probability mass outside the grid range (histograms).
    pub tail_mass: f64,
}

impl DensityGrid {
    pub fn from_values(points: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() || points.is_empty() {
            return Err(Error::param("values", "grid and values differ in length"));
        }
        if values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::param("values", "densities must be nonnegative"));
        }
        let n = points.len();
        Ok(Self {
            points,
            values,
            band: vec![0.0; n],
            method: DensityMethod::Quadrature,
            bandwidth: 0.0,
            tail_mass: 0.0,
        })
    }
}

/// `0.9 min(sd, IQR/1.34) n^{-1/5}`.
pub fn silverman_bandwidth(sorted: &[f64]) -> f64 {
    let st: RunningStats = sorted.iter().copied().collect();
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    let mut spread = st.variance().sqrt();
    if iqr > 0.0 {
        spread = spread.min(iqr / 1.34);
    }
    0.9 * spread * (sorted.len() as f64).powf(-0.2)
}

/// Gaussian KDE value and its standard error at `z`, from sorted samples.
pub fn kde_at(sorted: &[f64], z: f64, bw: f64) -> (f64, f64) {
    let reach = 9.0 * bw;
    let lo = sorted.partition_point(|&x| x < z - reach);
    let hi = sorted.partition_point(|&x| x <= z + reach);
    let norm = 1.0 / (bw * (2.0 * PI).sqrt());
    let (mut s1, mut s2) = (0.0, 0.0);
    for &x in &sorted[lo..hi] {
        let u = (z - x) / bw;
        let k = norm * (-0.5 * u * u).exp();
        s1 += k;
        s2 += k * k;
    }
    let n = sorted.len() as f64;
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Density estimate of one-dimensional `samples` on `grid`.
pub fn estimate_density(samples: &[f64], grid: GridSpec, method: DensityMethod) -> Result<DensityGrid> {
    grid.validate()?;
    if samples.len() < 1000 {
        return Err(Error::param("samples", format!("need at least 1000 samples, got {}", samples.len())));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::param("samples", "non-finite sample"));
    }
    let mut sorted = samples.to_vec();
    sort_floats(&mut sorted);
    let n = sorted.len() as f64;
    match method {
        DensityMethod::Kde { bandwidth } => {
            let bw = bandwidth.unwrap_or_else(|| silverman_bandwidth(&sorted));
            if !(bw > 0.0) {
                return Err(Error::param("samples", "degenerate samples: zero bandwidth"));
            }
            let points = grid.points();
            let (values, band) = points.iter().map(|&z| kde_at(&sorted, z, bw)).unzip();
            Ok(DensityGrid {
                points,
                values,
                band,
                method,
                bandwidth: bw,
                tail_mass: 0.0,
            })
        }
        DensityMethod::Histogram { bins } => {
            let width_range = grid.hi - grid.lo;
            let bins = bins.unwrap_or_else(|| {
                let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
                let fd = 2.0 * iqr * n.powf(-1.0 / 3.0);
                if fd > 0.0 && width_range > 0.0 {
                    ((width_range / fd).ceil() as usize).clamp(1, 100_000)
                } else {
                    1
                }
            });
            if bins == 0 {
                return Err(Error::param("bins", "need at least one bin"));
            }
            // A zero-width range still holds a point mass in one bin.
            let w = if width_range > 0.0 { width_range / bins as f64 } else { 1.0 };
            let mut counts = vec![0u64; bins];
            let mut outside = 0u64;
            for &x in &sorted {
                if x < grid.lo || x > grid.hi {
                    outside += 1;
                } else {
                    let b = (((x - grid.lo) / w) as usize).min(bins - 1);
                    counts[b] += 1;
                }
            }
            let points = (0..bins).map(|b| grid.lo + (b as f64 + 0.5) * w).collect();
            let values = counts.iter().map(|&c| c as f64 / (n * w)).collect();
            let band = counts
                .iter()
                .map(|&c| {
                    let p = c as f64 / n;
                    (p * (1.0 - p) / n).sqrt() / w
                })
                .collect();
            Ok(DensityGrid {
                points,
                values,
                band,
                method,
                bandwidth: w,
                tail_mass: outside as f64 / n,
            })
        }
        DensityMethod::Quadrature => Err(Error::param("method", "quadrature grids are built from a reference density")),
    }
}
