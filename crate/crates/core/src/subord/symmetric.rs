use std::f64::consts::PI;
use std::sync::OnceLock;

use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{check_alpha, Error, Result};
use crate::quad::{integrate_with_breaks, Tolerance};

const FOURIER_TOL: Tolerance = Tolerance::new(1e-17, 1e-13).with_max_intervals(20_000);
const TABLE_STEP: f64 = 0.005;
// exp(-42) is far below the accuracy we ask for.
const CUTOFF_EXPONENT: f64 = 42.0;

/// Density of the one-dimensional time-1 driver marginal: standard normal for
/// α = 2, otherwise the symmetric α-stable law with characteristic function
/// `exp(-|ξ|^α)`.
///
/// Evaluation is by Fourier inversion near the origin and by the tail series
/// `1/π Σ (-1)^{k+1} Γ(kα+1)/k! sin(kπα/2) |x|^{-kα-1}` further out. A cubic
/// Hermite table over the Fourier window is built on first use of
/// [`density`](Self::density).
#[derive(Debug)]
pub struct SymmetricStableDensity {
    alpha: f64,
    switch: f64,
    table: OnceLock<Vec<(f64, f64)>>,
}

impl Clone for SymmetricStableDensity {
    fn clone(&self) -> Self {
        Self {
            alpha: self.alpha,
            switch: self.switch,
            table: self.table.clone(),
        }
    }
}

impl SymmetricStableDensity {
    pub fn new(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let mut out = Self {
            alpha,
            switch: f64::INFINITY,
            table: OnceLock::new(),
        };
        if alpha < 2.0 && alpha != 1.0 {
            out.switch = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
                .into_iter()
                .find(|&x| out.series(x, false).is_some() && out.series(1.5 * x, false).is_some())
                .unwrap_or(64.0);
        }
        Ok(out)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `|x|` beyond which the tail series is used.
    pub fn series_threshold(&self) -> f64 {
        self.switch
    }

    /// Density at `x`, interpolated from the cached table inside the Fourier
    /// window. Interpolation error is of order 1e-12 relative to `p(0)`.
    pub fn density(&self, x: f64) -> f64 {
        let ax = x.abs();
        match self.closed_form(ax) {
            Some(p) => p,
            None if ax >= self.switch => self.series(ax, false).unwrap_or_else(|| self.fourier(ax, false)),
            None => self.interpolate(ax),
        }
    }

    /// Density at `x` without the interpolation table.
    pub fn density_exact(&self, x: f64) -> f64 {
        let ax = x.abs();
        match self.closed_form(ax) {
            Some(p) => p,
            None if ax >= self.switch => self.series(ax, false).unwrap_or_else(|| self.fourier(ax, false)),
            None => self.fourier(ax, false),
        }
    }

    /// `d/dx p(x)`, computed without the table.
    pub fn derivative(&self, x: f64) -> f64 {
        let ax = x.abs();
        let d = if self.alpha == 2.0 {
            -ax * gauss(ax)
        } else if self.alpha == 1.0 {
            -2.0 * ax / (PI * (1.0 + ax * ax).powi(2))
        } else if ax >= self.switch {
            self.series(ax, true).unwrap_or_else(|| self.fourier(ax, true))
        } else {
            self.fourier(ax, true)
        };
        if x < 0.0 {
            -d
        } else {
            d
        }
    }

    /// `p(0) = Γ(1 + 1/α)/π` for α < 2.
    pub fn at_origin(&self) -> f64 {
        if self.alpha == 2.0 {
            gauss(0.0)
        } else {
            gamma(1.0 + 1.0 / self.alpha) / PI
        }
    }

    fn closed_form(&self, ax: f64) -> Option<f64> {
        if self.alpha == 2.0 {
            Some(gauss(ax))
        } else if self.alpha == 1.0 {
            Some(1.0 / (PI * (1.0 + ax * ax)))
        } else {
            None
        }
    }

    fn fourier(&self, ax: f64, derivative: bool) -> f64 {
        let a = self.alpha;
        let cutoff = CUTOFF_EXPONENT.powf(1.0 / a);
        let mut pts = vec![0.0, 1.0f64.min(cutoff)];
        if ax > 0.0 {
            let half_period = PI / ax;
            let n = (cutoff / half_period).ceil() as usize;
            pts.extend((1..n).map(|j| j as f64 * half_period));
        }
        pts.push(cutoff);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let q = if derivative {
            integrate_with_breaks(|xi| -xi * (ax * xi).sin() * (-xi.powf(a)).exp(), &pts, FOURIER_TOL)
        } else {
            integrate_with_breaks(|xi| (ax * xi).cos() * (-xi.powf(a)).exp(), &pts, FOURIER_TOL)
        };
        match q {
            Ok(q) => q.value / PI,
            Err(e) => panic!("{}", Error::numerical("stable Fourier inversion", e.to_string())),
        }
    }

    /// Tail series for `p` or `p'` at `ax > 0`. `None` when it does not settle
    /// to double precision without heavy cancellation.
    fn series(&self, ax: f64, derivative: bool) -> Option<f64> {
        let a = self.alpha;
        let lx = ax.ln();
        let mut sum = 0.0;
        let mut largest: f64 = 0.0;
        let mut prev_mag = f64::INFINITY;
        for k in 1..300 {
            let kf = k as f64;
            let mut ln_mag = ln_gamma(kf * a + 1.0) - ln_gamma(kf + 1.0) - (kf * a + 1.0) * lx;
            if derivative {
                ln_mag += (kf * a + 1.0).ln() - lx;
            }
            let mag = ln_mag.exp();
            if mag > prev_mag && a > 1.0 {
                // asymptotic series started to diverge before converging
                return None;
            }
            prev_mag = mag;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            let term = sign * (kf * PI * a / 2.0).sin() * mag / PI;
            sum += if derivative { -term } else { term };
            largest = largest.max(mag / PI);
            if k > 2 && mag < 1e-17 * sum.abs() {
                return (largest < 10.0 * sum.abs()).then_some(sum);
            }
        }
        None
    }

    fn table(&self) -> &[(f64, f64)] {
        self.table.get_or_init(|| {
            let n = (self.switch / TABLE_STEP).ceil() as usize + 1;
            (0..=n)
                .map(|i| {
                    let x = i as f64 * TABLE_STEP;
                    (self.fourier(x, false), self.fourier(x, true))
                })
                .collect()
        })
    }

    fn interpolate(&self, ax: f64) -> f64 {
        let table = self.table();
        let pos = ax / TABLE_STEP;
        let i = (pos.floor() as usize).min(table.len() - 2);
        let t = pos - i as f64;
        let (p0, d0) = table[i];
        let (p1, d1) = table[i + 1];
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * p0
            + (t3 - 2.0 * t2 + t) * TABLE_STEP * d0
            + (-2.0 * t3 + 3.0 * t2) * p1
            + (t3 - t2) * TABLE_STEP * d1
    }
}

fn gauss(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_value() {
        for a in [0.7, 1.2, 1.5, 1.8] {
            let d = SymmetricStableDensity::new(a).unwrap();
            let want = gamma(1.0 + 1.0 / a) / PI;
            assert!((d.density_exact(0.0) - want).abs() < 1e-13, "alpha {a}");
            assert!((d.density(0.0) - want).abs() < 1e-13, "alpha {a}");
        }
    }

    #[test]
    fn fourier_reproduces_cauchy_and_gaussian_shapes() {
        // the generic inversion path with α = 1 and α = 2 hit closed forms
        let d = SymmetricStableDensity::new(1.0).unwrap();
        for x in [0.0, 0.5, 3.0, 10.0] {
            let f = d.fourier(x, false);
            assert!((f - 1.0 / (PI * (1.0 + x * x))).abs() < 1e-13, "{x}");
        }
        let g = SymmetricStableDensity::new(2.0).unwrap();
        for x in [0.0f64, 1.0, 4.0] {
            // cf exp(-ξ^2) is N(0, 2)
            let want = (-x * x / 4.0).exp() / (2.0 * PI.sqrt());
            assert!((g.fourier(x, false) - want).abs() < 1e-14, "{x}");
        }
    }

    #[test]
    fn series_meets_fourier() {
        for a in [0.6, 1.3, 1.5, 1.9] {
            let d = SymmetricStableDensity::new(a).unwrap();
            let x = d.series_threshold() * 1.1;
            let s = d.series(x, false).unwrap();
            let f = d.fourier(x, false);
            assert!((s - f).abs() < 1e-11 * f + 1e-16, "alpha {a} x {x}: {s} vs {f}");
            let s = d.series(x, true).unwrap();
            let f = d.fourier(x, true);
            assert!((s - f).abs() < 1e-10 * f.abs() + 1e-16, "alpha {a} x {x}: {s} vs {f}");
        }
    }

    #[test]
    fn table_matches_direct_inversion() {
        let d = SymmetricStableDensity::new(1.5).unwrap();
        for x in [0.0012, 0.3337, 1.7771, 5.55, 9.999] {
            let t = d.density(x);
            let f = d.density_exact(x);
            assert!((t - f).abs() < 1e-11, "{x}: {t} vs {f}");
        }
        assert_eq!(d.density(-2.0), d.density(2.0));
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let d = SymmetricStableDensity::new(1.5).unwrap();
        for x in [0.4, 2.0, -3.0] {
            let h = 1e-5;
            let fd = (d.density_exact(x + h) - d.density_exact(x - h)) / (2.0 * h);
            assert!((fd - d.derivative(x)).abs() < 1e-8, "{x}");
        }
    }
}
