use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{check_beta, check_positive, Error, Result};
use crate::solver::reference::ReferenceDensity;

fn check_grid(values: &[f64], dt: f64, beta: f64) -> Result<()> {
    check_beta(beta)?;
    check_positive("dt", dt)?;
    if values.len() < 4 {
        return Err(Error::param("values", format!("grid too coarse: {} points, need at least 4", values.len())));
    }
    Ok(())
}

/// L1 discretization of the Caputo derivative on the uniform grid
/// `t_n = n dt`: exact for piecewise-linear `g`. Entry 0 is 0.
pub fn caputo_derivative(values: &[f64], dt: f64, beta: f64) -> Result<Vec<f64>> {
    check_grid(values, dt, beta)?;
    let n = values.len();
    let e = 1.0 - beta;
    // b_k = (k+1)^{1-β} - k^{1-β}
    let b: Vec<f64> = (0..n).map(|k| ((k + 1) as f64).powf(e) - (k as f64).powf(e)).collect();
    let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let c = 1.0 / (gamma(2.0 - beta) * dt.powf(beta));
    Ok((0..n)
        .map(|m| c * (0..m).map(|j| b[m - 1 - j] * diffs[j]).sum::<f64>())
        .collect())
}

/// Riemann–Liouville derivative of the piecewise-linear interpolant of
/// `values`, written as `g_0 H(t) + Σ_j (s_j - s_{j-1}) (t - t_j)_+` and
/// differentiated term by term. Entry 0 is `±∞` unless `g_0 = 0`.
pub fn riemann_liouville_derivative(values: &[f64], dt: f64, beta: f64) -> Result<Vec<f64>> {
    check_grid(values, dt, beta)?;
    let n = values.len();
    let e = 1.0 - beta;
    let pow: Vec<f64> = (0..n).map(|k| (k as f64).powf(e)).collect();
    let slopes: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]) / dt).collect();
    let kinks: Vec<f64> = (0..slopes.len())
        .map(|j| slopes[j] - if j == 0 { 0.0 } else { slopes[j - 1] })
        .collect();
    let g0 = values[0];
    let g_1mb = gamma(1.0 - beta);
    let g_2mb = gamma(2.0 - beta);
    let scale = dt.powf(e) / g_2mb;
    Ok((0..n)
        .map(|m| {
            if m == 0 {
                return if g0 == 0.0 { 0.0 } else { f64::INFINITY.copysign(g0) };
            }
            let t = m as f64 * dt;
            g0 * t.powf(-beta) / g_1mb + scale * (0..m).map(|j| kinks[j] * pow[m - j]).sum::<f64>()
        })
        .collect())
}

/// Time operator used by [`pde_residual_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeDerivative {
    #[default]
    RiemannLiouville,
    /// Ordinary `∂_t` by central differences, for the β → 1 limit.
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualPoint {
    pub t: f64,
    pub x: f64,
    pub rl_derivative: f64,
    pub generator: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub points: Vec<ResidualPoint>,
    pub max_abs_residual: f64,
    pub max_abs_derivative: f64,
    /// `Σ|residual|` over the grid.
    pub l1_residual: f64,
}

impl ResidualReport {
    pub fn relative(&self) -> f64 {
        self.max_abs_residual / self.max_abs_derivative
    }
}

/// Evaluates `D_t^β q(t,x) - L q(t,x)` for the one-dimensional Brownian
/// reference density, `L = b ∂_x + ½σ² ∂_x²` by central differences.
/// Every `t` must be a multiple of `dt` and every `x` nonzero.
pub fn pde_residual_check(
    reference: &ReferenceDensity,
    t_points: &[f64],
    x_points: &[f64],
    dt: f64,
    dx: f64,
    op: TimeDerivative,
) -> Result<ResidualReport> {
    if reference.alpha() != 2.0 || reference.dim() != 1 {
        return Err(Error::param("reference", "residual check needs alpha = 2 and d = 1"));
    }
    check_positive("dt", dt)?;
    check_positive("dx", dx)?;
    if x_points.iter().any(|x| x.abs() <= dx) {
        return Err(Error::Singularity("residual points must stay away from x = 0".into()));
    }
    let t_max = t_points.iter().copied().fold(0.0, f64::max);
    let steps: Vec<usize> = t_points
        .iter()
        .map(|&t| {
            let n = (t / dt).round();
            if n < 1.0 || (n * dt - t).abs() > 1e-9 * t {
                Err(Error::param("t_points", format!("{t} is not a positive multiple of dt = {dt}")))
            } else {
                Ok(n as usize)
            }
        })
        .collect::<Result<_>>()?;
    let n_max = (t_max / dt).round() as usize + 1;
    let beta = reference.beta();
    let (b, sigma) = reference.coefficients_1d();
    let series = |x: f64| -> Result<Vec<f64>> {
        (0..=n_max)
            .map(|j| if j == 0 { Ok(0.0) } else { reference.density_tabulated(j as f64 * dt, &[x]) })
            .collect()
    };
    let mut points = Vec::new();
    for &x in x_points {
        let q = series(x)?;
        let qp = series(x + dx)?;
        let qm = series(x - dx)?;
        let time = match op {
            TimeDerivative::RiemannLiouville => riemann_liouville_derivative(&q, dt, beta)?,
            TimeDerivative::Classical => {
                let mut d = vec![0.0; q.len()];
                for j in 1..q.len() - 1 {
                    d[j] = (q[j + 1] - q[j - 1]) / (2.0 * dt);
                }
                d
            }
        };
        for (&t, &j) in t_points.iter().zip(&steps) {
            let generator =
                b * (qp[j] - qm[j]) / (2.0 * dx) + 0.5 * sigma * sigma * (qp[j] - 2.0 * q[j] + qm[j]) / (dx * dx);
            points.push(ResidualPoint {
                t,
                x,
                rl_derivative: time[j],
                generator,
                residual: time[j] - generator,
            });
        }
    }
    let max_abs_residual = points.iter().map(|p| p.residual.abs()).fold(0.0, f64::max);
    let max_abs_derivative = points.iter().map(|p| p.rl_derivative.abs()).fold(0.0, f64::max);
    let l1_residual = points.iter().map(|p| p.residual.abs()).sum();
    Ok(ResidualReport {
        points,
        max_abs_residual,
        max_abs_derivative,
        l1_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_has_zero_caputo() {
        let d = caputo_derivative(&[3.0; 50], 0.01, 0.4).unwrap();
        assert!(d.iter().all(|&v| v == 0.0));
        assert!(caputo_derivative(&[1.0, 2.0, 3.0], 0.1, 0.5).is_err());
    }

    #[test]
    fn caputo_of_identity() {
        let dt = 1e-4;
        let g: Vec<f64> = (0..=10_000).map(|i| i as f64 * dt).collect();
        let d = caputo_derivative(&g, dt, 0.5).unwrap();
        assert!((d[10_000] - 2.0 / PI.sqrt()).abs() < 1e-3);
        // linear functions are reproduced exactly
        assert!((d[10_000] - 2.0 / PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn caputo_of_square_converges() {
        // ∂^β t² = 2 t^{2-β} / Γ(3-β)
        let beta = 0.3;
        let exact = 2.0 / gamma(3.0 - beta);
        let err = |n: usize| {
            let dt = 1.0 / n as f64;
            let g: Vec<f64> = (0..=n).map(|i| (i as f64 * dt).powi(2)).collect();
            (caputo_derivative(&g, dt, beta).unwrap()[n] - exact).abs()
        };
        let (e1, e2) = (err(500), err(1000));
        assert!(e2 < e1 && e1 / e2 > 2.0, "{e1} {e2}");
    }

    #[test]
    fn rl_closed_forms() {
        let dt = 1e-3;
        let beta = 0.5;
        let ones = vec![1.0; 1001];
        let d = riemann_liouville_derivative(&ones, dt, beta).unwrap();
        assert!((d[1000] - 1.0 / gamma(0.5)).abs() < 1e-12);
        assert!(d[0].is_infinite());
    }

    proptest! {
        #[test]
        fn rl_caputo_identity(c0 in -3.0f64..3.0, c1 in -3.0f64..3.0, c2 in -3.0f64..3.0, c3 in -1.0f64..1.0, beta in 0.05f64..0.95) {
            let dt = 1e-3;
            let g: Vec<f64> = (0..=400).map(|i| {
                let t = i as f64 * dt;
                c0 + c1 * t + c2 * t * t + c3 * t * t * t
            }).collect();
            let cap = caputo_derivative(&g, dt, beta).unwrap();
            let rl = riemann_liouville_derivative(&g, dt, beta).unwrap();
            for n in 1..g.len() {
                let t = n as f64 * dt;
                let lhs = rl[n] - t.powf(-beta) * g[0] / gamma(1.0 - beta);
                prop_assert!((lhs - cap[n]).abs() < 1e-10, "n {} {} {}", n, lhs, cap[n]);
            }
        }
    }

    #[test]
    fn residual_vanishes_and_refines() {
        let r = ReferenceDensity::new(0.5, 2.0, 1, &[0.0], 1.0).unwrap();
        let ts = [0.5, 1.0];
        let xs = [-1.0, 0.5, 1.5];
        let coarse = pde_residual_check(&r, &ts, &xs, 4e-3, 4e-3, TimeDerivative::RiemannLiouville).unwrap();
        let fine = pde_residual_check(&r, &ts, &xs, 2e-3, 2e-3, TimeDerivative::RiemannLiouville).unwrap();
        assert!(fine.relative() < 1e-2, "{}", fine.relative());
        assert!(fine.max_abs_residual < coarse.max_abs_residual);
        assert!(pde_residual_check(&r, &[0.5], &[0.0], 1e-2, 1e-2, TimeDerivative::RiemannLiouville).is_err());
        assert!(pde_residual_check(&r, &[0.505], &[1.0], 1e-2, 1e-2, TimeDerivative::RiemannLiouville).is_err());
    }
}
