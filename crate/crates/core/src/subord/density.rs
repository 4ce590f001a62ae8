use std::f64::consts::PI;

use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{check_beta, Error, Result};
use crate::quad::{integrate_with_breaks, Tolerance};

const QUAD_TOL: Tolerance = Tolerance::new(1e-300, 1e-13).with_max_intervals(2000);

/// Density, CDF and survival function of `S_1` for the standard one-sided
/// β-stable law (`E exp(-λ S_1) = exp(-λ^β)`).
///
/// Inside a core window the Zolotarev integral
/// `p(v) = k/π · v^{-1/(1-β)} ∫_0^π A(u) exp(-A(u) v^{-k}) du`, `k = β/(1-β)`,
/// is integrated adaptively; beyond it the convergent tail series
/// `p(v) = 1/π Σ (-1)^{n+1} Γ(nβ+1)/n! sin(nπβ) v^{-nβ-1}` is summed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneSidedStable {
    beta: f64,
    k: f64,
    a0: f64,
    series_from: f64,
}

impl OneSidedStable {
    pub fn new(beta: f64) -> Result<Self> {
        check_beta(beta)?;
        let k = beta / (1.0 - beta);
        Ok(Self {
            beta,
            k,
            a0: beta.powf(k) * (1.0 - beta),
            // first series term ratio ~ v^{-β} <= 0.1
            series_from: 10f64.powf(1.0 / beta),
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Start of the tail-series window.
    pub fn series_threshold(&self) -> f64 {
        self.series_from
    }

    /// Kanter's function `A(u) = sin(βu)^{β/(1-β)} sin((1-β)u) / sin(u)^{1/(1-β)}`,
    /// increasing from `A(0+) = β^{β/(1-β)}(1-β)` to `+∞` on `(0, π)`.
    fn ln_kanter(&self, u: f64) -> f64 {
        let b = self.beta;
        self.k * (b * u).sin().ln() + ((1.0 - b) * u).sin().ln() - u.sin().ln() / (1.0 - b)
    }

    /// Angle where `A(u) = target`, or 0 when `target <= A(0+)`.
    fn kanter_inverse(&self, target: f64) -> f64 {
        if target <= self.a0 {
            return 0.0;
        }
        let lt = target.ln();
        let (mut lo, mut hi) = (0.0, PI);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.ln_kanter(mid) < lt {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Breakpoints clustered geometrically around the integrand's peak.
    fn breakpoints(&self, s: f64) -> Vec<f64> {
        let peak = self.kanter_inverse(1.0 / s);
        let mut pts = vec![0.0, PI];
        let mut d = PI;
        for _ in 0..18 {
            d *= 0.5;
            for p in [peak - d, peak + d] {
                if p > 0.0 && p < PI {
                    pts.push(p);
                }
            }
        }
        if peak > 0.0 {
            pts.push(peak);
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    pub fn density(&self, v: f64) -> Result<f64> {
        if v <= 0.0 {
            return Ok(0.0);
        }
        if !v.is_finite() {
            return Ok(0.0);
        }
        if v >= self.series_from {
            if let Some(p) = self.tail_series(v, false) {
                return Ok(p);
            }
        }
        let s = v.powf(-self.k);
        let ln_prefactor = (self.k / PI).ln() - v.ln() / (1.0 - self.beta) - self.a0 * s;
        if ln_prefactor < -760.0 {
            return Ok(0.0);
        }
        let a0 = self.a0;
        let q = integrate_with_breaks(
            |u| {
                let la = self.ln_kanter(u);
                (la - (la.exp() - a0) * s).exp()
            },
            &self.breakpoints(s),
            QUAD_TOL,
        )
        .map_err(|e| Error::numerical("one-sided stable density", format!("beta {}, v {v}: {e}", self.beta)))?;
        Ok((ln_prefactor + q.value.ln()).exp())
    }

    pub fn cdf(&self, v: f64) -> Result<f64> {
        if v <= 0.0 {
            return Ok(0.0);
        }
        if v >= self.series_from {
            if let Some(sf) = self.tail_series(v, true) {
                return Ok(1.0 - sf);
            }
        }
        let s = v.powf(-self.k);
        if self.a0 * s > 760.0 {
            return Ok(0.0);
        }
        let a0 = self.a0;
        let q = integrate_with_breaks(
            |u| (-(self.ln_kanter(u).exp() - a0) * s).exp(),
            &self.breakpoints(s),
            QUAD_TOL,
        )
        .map_err(|e| Error::numerical("one-sided stable cdf", format!("beta {}, v {v}: {e}", self.beta)))?;
        Ok(((-a0 * s).exp() * q.value / PI).min(1.0))
    }

    /// `P[S_1 > v]`, accurate in the far tail.
    pub fn survival(&self, v: f64) -> Result<f64> {
        if v <= 0.0 {
            return Ok(1.0);
        }
        if v >= self.series_from {
            if let Some(sf) = self.tail_series(v, true) {
                return Ok(sf);
            }
        }
        let s = v.powf(-self.k);
        let q = integrate_with_breaks(
            |u| -(-(self.ln_kanter(u).exp()) * s).exp_m1(),
            &self.breakpoints(s),
            QUAD_TOL,
        )
        .map_err(|e| Error::numerical("one-sided stable survival", format!("beta {}, v {v}: {e}", self.beta)))?;
        Ok((q.value / PI).clamp(0.0, 1.0))
    }

    /// Tail series for the density (`survival = false`) or for `P[S_1 > v]`.
    /// Returns `None` if it fails to converge cleanly.
    fn tail_series(&self, v: f64, survival: bool) -> Option<f64> {
        let b = self.beta;
        let lv = v.ln();
        let mut sum = 0.0;
        let mut largest: f64 = 0.0;
        for n in 1..400 {
            let nf = n as f64;
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            let ln_mag = if survival {
                ln_gamma(nf * b) - ln_gamma(nf + 1.0) - nf * b * lv
            } else {
                ln_gamma(nf * b + 1.0) - ln_gamma(nf + 1.0) - (nf * b + 1.0) * lv
            };
            let term = sign * (nf * PI * b).sin() * ln_mag.exp() / PI;
            sum += term;
            largest = largest.max(term.abs());
            if ln_mag.exp() < 1e-18 * sum.abs() && n > 2 {
                return (largest < 1e3 * sum.abs()).then_some(sum);
            }
        }
        None
    }

    /// Leading small-`v` asymptotic
    /// `K (β/v)^{(1-β/2)/(1-β)} exp(-(1-β)(v/β)^{β/(β-1)})`.
    pub fn small_v_asymptotic(&self, v: f64) -> f64 {
        let b = self.beta;
        let k = 1.0 / (2.0 * PI * b * (1.0 - b)).sqrt();
        k * (b / v).powf((1.0 - b / 2.0) / (1.0 - b)) * (-(1.0 - b) * (v / b).powf(b / (b - 1.0))).exp()
    }

    /// Leading large-`v` asymptotic `β/Γ(1-β) v^{-β-1}`.
    pub fn large_v_asymptotic(&self, v: f64) -> f64 {
        self.beta / gamma(1.0 - self.beta) * v.powf(-self.beta - 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    
    fn levy_half(v: f64) -> f64 {
        // Lévy law with Laplace transform exp(-sqrt(λ)): a = 1/sqrt(2)
        let a = std::f64::consts::FRAC_1_SQRT_2;
        a / (2.0 * PI * v.powi(3)).sqrt() * (-a * a / (2.0 * v)).exp()
    }

    #[test]
    fn half_matches_levy_closed_form() {
        let s = OneSidedStable::new(0.5).unwrap();
        let p = s.density(1.0).unwrap();
        let exact = 1.0 / (2.0 * PI.sqrt()) * (-0.25f64).exp();
        assert!((p - exact).abs() < 1e-8, "{p} vs {exact}");
        assert!((exact - 0.219_696).abs() < 1e-6);
        for &v in &[1e-3, 0.01, 0.1, 0.5, 2.0, 10.0, 99.0, 101.0, 1e4, 1e7] {
            let p = s.density(v).unwrap();
            let e = levy_half(v);
            assert!((p - e).abs() <= 1e-11 * e + 1e-300, "v {v}: {p} vs {e}");
        }
    }

    #[test]
    fn support_and_tail() {
        let s = OneSidedStable::new(0.5).unwrap();
        assert_eq!(s.density(-1.0).unwrap(), 0.0);
        assert_eq!(s.cdf(-1.0).unwrap(), 0.0);
        let p = s.density(100.0).unwrap();
        assert!((p / 2.8209e-4 - 1.0).abs() < 0.05);
    }

    #[test]
    fn normalization() {
        for beta in [0.3, 0.5, 0.7] {
            let s = OneSidedStable::new(beta).unwrap();
            let mut pts = vec![0.0];
            pts.extend((0..12).map(|j| 0.01 * 2f64.powi(j)));
            let q = integrate_with_breaks(|v| s.density(v).unwrap(), &pts, Tolerance::new(1e-14, 1e-13)).unwrap();
            let total = q.value + s.survival(*pts.last().unwrap()).unwrap();
            assert!((total - 1.0).abs() < 1e-11, "beta {beta}: {total}");
        }
    }

    #[test]
    fn asymptotic_consistency() {
        let s = OneSidedStable::new(0.5).unwrap();
        let r_small = s.density(1e-3).unwrap() / s.small_v_asymptotic(1e-3);
        let r_large = s.density(1e3).unwrap() / s.large_v_asymptotic(1e3);
        assert!((r_small - 1.0).abs() < 0.02, "{r_small}");
        assert!((r_large - 1.0).abs() < 0.02, "{r_large}");
    }

    #[test]
    fn series_and_quadrature_agree_at_window_edge() {
        for beta in [0.25, 0.5, 0.8] {
            let s = OneSidedStable::new(beta).unwrap();
            let v = s.series_threshold();
            let series = s.tail_series(v, false).unwrap();
            let mut quad = s;
            quad.series_from = f64::INFINITY;
            let q = quad.density(v).unwrap();
            assert!((series - q).abs() < 1e-10 * q, "beta {beta}: {series} vs {q}");
            let ss = s.tail_series(v, true).unwrap();
            let qs = quad.survival(v).unwrap();
            assert!((ss - qs).abs() < 1e-10 * qs, "beta {beta}: {ss} vs {qs}");
        }
    }

    #[test]
    fn cdf_is_integrated_density() {
        let s = OneSidedStable::new(0.7).unwrap();
        for &v in &[0.3, 1.0, 3.0] {
            let q = crate::quad::integrate(|x| s.density(x).unwrap(), 0.0, v, Tolerance::new(1e-13, 1e-12)).unwrap();
            let c = s.cdf(v).unwrap();
            assert!((q.value - c).abs() < 1e-10, "{v}: {} vs {c}", q.value);
            assert!((c + s.survival(v).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
