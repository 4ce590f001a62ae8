use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{check_alpha, check_positive, Error, Result};
use crate::inverse_time::InverseStableLaw;
use crate::quad::{gauss_legendre, integrate_with_breaks, Tolerance};
use crate::subord::SymmetricStableDensity;

const TOL: Tolerance = Tolerance::new(1e-300, 1e-12).with_max_intervals(4000);
const GL_NODES: usize = 16;

/// Constant-coefficient density of `X_{Z_T}` started at the origin,
/// `q(T,z) = ∫ p_Z(T,u) g(u,z) du` where `g(u,·)` is the law of
/// `b u + σ Y_u` for the driver `Y`.
///
/// With `u = T^β w` and `w = s^k` this becomes
/// `∫ k s^{k-1} P(s^k) g(T^β s^k, z) ds`, `P = p_Z(1,·)`, which removes the
/// `u → 0` singularity of `g(u,0)` in one dimension.
#[derive(Debug)]
pub struct ReferenceDensity {
    beta: f64,
    alpha: f64,
    dim: usize,
    drift: Vec<f64>,
    sigma: f64,
    law: InverseStableLaw,
    stable: Option<SymmetricStableDensity>,
    power: i32,
    s_max: f64,
    table: OnceLock<Vec<(f64, f64)>>,
}

impl ReferenceDensity {
    /// `drift` has length `dim` (or 1, broadcast); `sigma` multiplies the identity.
    pub fn new(beta: f64, alpha: f64, dim: usize, drift: &[f64], sigma: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_positive("sigma", sigma)?;
        let law = InverseStableLaw::new(beta)?;
        if dim == 0 || (alpha < 2.0 && dim != 1) {
            return Err(Error::param("dim", "reference densities cover d >= 1 for alpha = 2 and d = 1 otherwise"));
        }
        let drift = match drift.len() {
            0 => vec![0.0; dim],
            1 => vec![drift[0]; dim],
            n if n == dim => drift.to_vec(),
            n => return Err(Error::param("drift", format!("length {n} for d = {dim}"))),
        };
        if alpha <= 1.0 && drift.iter().any(|&b| b != 0.0) {
            return Err(Error::Config("drift must vanish when alpha <= 1".into()));
        }
        let stable = if alpha < 2.0 {
            Some(SymmetricStableDensity::new(alpha)?)
        } else {
            None
        };
        let power = if alpha < 2.0 { 3 } else { 2 };
        // P(w) decays like exp(-A0 w^{1/(1-β)}), A0 = β^{β/(1-β)}(1-β).
        let a0 = beta.powf(beta / (1.0 - beta)) * (1.0 - beta);
        let w_max = (80.0 / a0).powf(1.0 - beta) * 1.05;
        Ok(Self {
            beta,
            alpha,
            dim,
            drift,
            sigma,
            law,
            stable,
            power,
            s_max: w_max.powf(1.0 / power as f64),
            table: OnceLock::new(),
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `(b_1, σ)`: first drift component and the volatility scale.
    pub fn coefficients_1d(&self) -> (f64, f64) {
        (self.drift[0], self.sigma)
    }

    /// Spatial transition density `g(u, z)` of the driven motion.
    pub fn spatial_density(&self, u: f64, z: &[f64]) -> f64 {
        self.spatial_density_smoothed(u, z, 0.0)
    }

    /// `g(u,·)` convolved with a Gaussian kernel of standard deviation `bw`
    /// (α = 2 only; other α ignore `bw`).
    fn spatial_density_smoothed(&self, u: f64, z: &[f64], bw: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        match &self.stable {
            None => {
                let var = self.sigma * self.sigma * u + bw * bw;
                let r2: f64 = z.iter().zip(&self.drift).map(|(zi, b)| (zi - b * u).powi(2)).sum();
                (-0.5 * r2 / var).exp() / (2.0 * PI * var).powf(0.5 * self.dim as f64)
            }
            Some(p) => {
                let scale = self.sigma * u.powf(1.0 / self.alpha);
                p.density((z[0] - self.drift[0] * u) / scale) / scale
            }
        }
    }

    fn integrand(&self, horizon: f64, z: &[f64], bw: f64, s: f64) -> Result<f64> {
        if s <= 0.0 {
            return Ok(if self.stable.is_none() && self.dim == 1 && bw == 0.0 {
                // limit of k s^{k-1} g(T^β s^k, z) at s = 0 for k = 2, d = 1
                if z[0] == 0.0 {
                    2.0 * self.law.density(1.0, 0.0)? / (self.sigma * (2.0 * PI * horizon.powf(self.beta)).sqrt())
                } else {
                    0.0
                }
            } else {
                0.0
            });
        }
        let k = self.power;
        let w = s.powi(k);
        let p = self.law.density(1.0, w)?;
        if p == 0.0 {
            return Ok(0.0);
        }
        let g = self.spatial_density_smoothed(horizon.powf(self.beta) * w, z, bw);
        Ok(k as f64 * s.powi(k - 1) * p * g)
    }

    fn breakpoints(&self, horizon: f64, z: &[f64]) -> Vec<f64> {
        let r: f64 = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let tb = horizon.powf(self.beta);
        let u_peak = if self.stable.is_some() {
            (r / self.sigma).powf(self.alpha)
        } else {
            r * r / (self.dim as f64 * self.sigma * self.sigma)
        };
        let mut pts = vec![0.0, self.s_max, 1.0f64.min(self.s_max)];
        let s_peak = (u_peak / tb).powf(1.0 / self.power as f64);
        if s_peak > 0.0 && s_peak < self.s_max {
            pts.push(s_peak);
            for j in 1..12 {
                let f = 2f64.powi(j);
                for p in [s_peak * (1.0 - 1.0 / f), s_peak * (1.0 + 1.0 / f)] {
                    if p > 0.0 && p < self.s_max {
                        pts.push(p);
                    }
                }
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    fn check_point(&self, horizon: f64, z: &[f64]) -> Result<()> {
        check_positive("T", horizon)?;
        if z.len() != self.dim {
            return Err(Error::param("z", format!("length {} != d = {}", z.len(), self.dim)));
        }
        Ok(())
    }

    /// `q(T, z)` by adaptive quadrature.
    pub fn density(&self, horizon: f64, z: &[f64]) -> Result<f64> {
        self.density_smoothed(horizon, z, 0.0)
    }

    /// `q(T,·)` convolved with the Gaussian KDE kernel of bandwidth `bw`;
    /// the exact expectation of a KDE built from samples of `X_{Z_T}` (α = 2).
    pub fn density_smoothed(&self, horizon: f64, z: &[f64], bw: f64) -> Result<f64> {
        self.check_point(horizon, z)?;
        let mut err = None;
        let q = integrate_with_breaks(
            |s| match self.integrand(horizon, z, bw, s) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            },
            &self.breakpoints(horizon, z),
            TOL,
        )
        .map_err(|e| Error::numerical("reference density", format!("T {horizon}, z {z:?}: {e}")))?;
        if let Some(e) = err {
            return Err(e);
        }
        Ok(q.value.max(0.0))
    }

    /// `q(T, z)` from a fixed composite Gauss–Legendre rule in `s` whose
    /// panels resolve `P`. The nodes do not depend on `(T, z)`, so the result
    /// is smooth in both, which finite differences need.
    pub fn density_tabulated(&self, horizon: f64, z: &[f64]) -> Result<f64> {
        self.check_point(horizon, z)?;
        let tb = horizon.powf(self.beta);
        Ok(self
            .clock_table()?
            .iter()
            .map(|&(w, weight)| weight * self.spatial_density(tb * w, z))
            .sum())
    }

    fn clock_table(&self) -> Result<&[(f64, f64)]> {
        if let Some(t) = self.table.get() {
            return Ok(t);
        }
        let built = self.build_table()?;
        Ok(self.table.get_or_init(|| built))
    }

    fn build_table(&self) -> Result<Vec<(f64, f64)>> {
        let (x, wts) = gauss_legendre(GL_NODES);
        let k = self.power;
        let phi = |s: f64| -> Result<f64> {
            let p = self.law.density(1.0, s.powi(k))?;
            Ok(k as f64 * s.powi(k - 1) * p)
        };
        let rule = |a: f64, b: f64| -> Result<(f64, Vec<(f64, f64)>)> {
            let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
            let mut total = 0.0;
            let mut nodes = Vec::with_capacity(GL_NODES);
            for (xi, wi) in x.iter().zip(&wts) {
                let s = c + r * xi;
                let v = phi(s)? * wi * r;
                total += v;
                nodes.push((s.powi(k), v));
            }
            Ok((total, nodes))
        };
        let n0 = 256;
        let mut stack: Vec<(f64, f64, u32)> = (0..n0)
            .rev()
            .map(|i| (self.s_max * i as f64 / n0 as f64, self.s_max * (i + 1) as f64 / n0 as f64, 0))
            .collect();
        let mut table = Vec::new();
        while let Some((a, b, depth)) = stack.pop() {
            let (whole, nodes) = rule(a, b)?;
            let m = 0.5 * (a + b);
            let (left, _) = rule(a, m)?;
            let (right, _) = rule(m, b)?;
            if depth < 20 && (whole - left - right).abs() > 1e-16 {
                stack.push((m, b, depth + 1));
                stack.push((a, m, depth + 1));
            } else {
                table.extend(nodes);
            }
        }
        Ok(table)
    }
}

/// `q(T, z)` for constant coefficients; see [`ReferenceDensity`].
pub fn reference_density(beta: f64, alpha: f64, horizon: f64, z: &[f64], drift: &[f64], sigma: f64) -> Result<f64> {
    ReferenceDensity::new(beta, alpha, z.len(), drift, sigma)?.density(horizon, z)
}
