use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::inverse_time::{sample_discrete_inverse, sample_inverse_time, InverseStableLaw};
use crate::rng::{PathRng, StreamFactory};
use crate::solver::reference::ReferenceDensity;
use crate::solver::CHUNK;
use crate::spatial::{InnovationSpec, Scheme};
use crate::stats::{log_log_slope, RunningStats};

/// Estimated error at one step size and evaluation point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderPoint {
    pub h: f64,
    /// Evaluation point (its norm when `d > 1`).
    pub z: f64,
    pub err: f64,
    /// Monte Carlo standard error of `err`; zero for deterministic values.
    pub stderr: f64,
}

/// One line of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub h: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub z: f64,
    pub err: f64,
    /// 95% half-width.
    pub err_ci: f64,
    pub envelope: f64,
    /// Log-log slope of `|err|` against `h` over this and all coarser rows at
    /// the same `z`.
    pub slope_running: Option<f64>,
}

/// Attaches envelopes and running slopes to ladder points.
pub fn convergence_rows(points: &[LadderPoint], horizon: f64, envelope: impl Fn(f64, f64) -> f64) -> Vec<ConvergenceRow> {
    let mut rows = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let mut same: Vec<&LadderPoint> = points[..=i].iter().filter(|q| q.z == p.z).collect();
        same.sort_by(|a, b| b.h.total_cmp(&a.h));
        let hs: Vec<f64> = same.iter().map(|q| q.h).collect();
        let es: Vec<f64> = same.iter().map(|q| q.err.abs()).collect();
        let slope = log_log_slope(&hs, &es);
        rows.push(ConvergenceRow {
            h: p.h,
            horizon,
            z: p.z,
            err: p.err,
            err_ci: 1.96 * p.stderr,
            envelope: envelope(p.h, p.z),
            slope_running: slope,
        });
    }
    rows
}

/// Per-path vectors of `k` values, reduced in fixed chunks in index order.
fn parallel_vec_stats<F>(factory: StreamFactory, n: u64, k: usize, f: F) -> Result<Vec<RunningStats>>
where
    F: Fn(u64, &mut PathRng, &mut [f64]) -> Result<()> + Sync,
{
    let parts: Vec<Result<Vec<RunningStats>>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut st = vec![RunningStats::new(); k];
            let mut buf = vec![0.0; k];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                f(i, &mut factory.stream(i), &mut buf)?;
                for (s, &v) in st.iter_mut().zip(&buf) {
                    s.push(v);
                }
            }
            Ok(st)
        })
        .collect();
    let mut total = vec![RunningStats::new(); k];
    for p in parts {
        for (t, s) in total.iter_mut().zip(&p?) {
            t.merge(s);
        }
    }
    Ok(total)
}

fn norm(z: &[f64]) -> f64 {
    if z.len() == 1 {
        z[0]
    } else {
        z.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn check_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.is_empty() {
        return Err(Error::param("ladder", "empty step-size ladder"));
    }
    for &h in ladder {
        check_positive("h", h)?;
    }
    Ok(())
}

/// Monte Carlo estimate of `E g(Z_T^{β,h}, z) - E g(Z_T, z) = q^h(T,z) - q(T,z)`
/// for each `h`, with `Z^h = h⌈Z_T/h⌉` coupled to an exact draw of `Z_T` so
/// the variance shrinks with `h`.
pub fn time_change_error(
    reference: &ReferenceDensity,
    ladder: &[f64],
    horizon: f64,
    z: &[f64],
    n_paths: u64,
    seed: u64,
) -> Result<Vec<LadderPoint>> {
    check_ladder(ladder)?;
    check_positive("T", horizon)?;
    if z.len() != reference.dim() {
        return Err(Error::param("z", format!("length {} != d = {}", z.len(), reference.dim())));
    }
    let beta = reference.beta();
    let stats = parallel_vec_stats(StreamFactory::new(seed), n_paths, ladder.len(), |_, rng, out| {
        let zt = sample_inverse_time(beta, horizon, rng)?;
        let exact = reference.spatial_density(zt, z);
        for (o, &h) in out.iter_mut().zip(ladder) {
            *o = reference.spatial_density(h * (zt / h).ceil().max(1.0), z) - exact;
        }
        Ok(())
    })?;
    Ok(ladder
        .iter()
        .zip(&stats)
        .map(|(&h, s)| LadderPoint {
            h,
            z: norm(z),
            err: s.mean(),
            stderr: s.std_error(),
        })
        .collect())
}

/// `Σ_i P[Z^h = ih] g(ih, z) - q(T, z)` by summing the lattice law.
pub fn time_change_error_exact(reference: &ReferenceDensity, h: f64, horizon: f64, z: &[f64]) -> Result<f64> {
    check_positive("h", h)?;
    let law = InverseStableLaw::new(reference.beta())?;
    let q = reference.density(horizon, z)?;
    let mut sum = 0.0;
    let mut prev_survival = 1.0;
    for i in 1u64.. {
        let t = i as f64 * h;
        let survival = law.survival(horizon, t)?;
        let mass = (prev_survival - survival).max(0.0);
        sum += mass * reference.spatial_density(t, z);
        prev_survival = survival;
        if survival < 1e-17 {
            break;
        }
        if i > 50_000_000 {
            return Err(Error::Resource(format!("lattice sum did not terminate for h = {h}")));
        }
    }
    Ok(sum - q)
}

/// Gaussian kernel of bandwidth `bw`.
fn kernel(u: f64, bw: f64) -> f64 {
    let v = u / bw;
    (-0.5 * v * v).exp() / (bw * (2.0 * PI).sqrt())
}

/// Weak error of the coarse schemes `h_k = 2^k h`, `k = 1..=levels`, against
/// the finest scheme `h = cfg.h`, measured on the first coordinate through
/// `E K_bw(z - X^{h_k}) - E K_bw(z - X^h)`.
///
/// Levels share one subordinator path, so the coarse crossing index is
/// `⌈i/2^k⌉`. Gaussian and stable innovations are block sums of the fine ones
/// rescaled by `2^{-k/α}`, which keeps each level's law exact; other
/// innovations are drawn independently per level.
pub fn scheme_vs_finest(scheme: &Scheme, levels: u32, z_points: &[f64], bw: f64) -> Result<Vec<LadderPoint>> {
    check_positive("bandwidth", bw)?;
    if levels == 0 || levels > 20 {
        return Err(Error::param("levels", format!("{levels} not in 1..=20")));
    }
    if z_points.is_empty() {
        return Err(Error::param("z", "no evaluation points"));
    }
    let cfg = scheme.config();
    let d = cfg.dim;
    let nz = z_points.len();
    let coupled = cfg.alpha < 2.0 || cfg.innovation == InnovationSpec::Gaussian;
    let x0 = cfg.start_point();
    let top = 1u64 << levels;
    let stats = parallel_vec_stats(StreamFactory::new(cfg.seed), cfg.n_paths, levels as usize * nz, |_, rng, out| {
        let steps = sample_discrete_inverse(cfg.beta, cfg.h, cfg.horizon, rng)?
            .grid_index
            .unwrap_or(1)
            .max(1);
        let n_max = steps.div_ceil(top) * top;
        let mut eta = vec![0.0; n_max as usize * d];
        for chunk in eta.chunks_mut(d) {
            scheme.draw_innovation(chunk, rng);
        }
        let mut work = scheme.workspace();
        let mut x = x0.clone();
        for j in 0..steps as usize {
            scheme.step_with(&mut x, cfg.h, &eta[j * d..(j + 1) * d], &mut work)?;
        }
        let fine: Vec<f64> = z_points.iter().map(|&z| kernel(z - x[0], bw)).collect();
        let mut block = vec![0.0; d];
        for k in 1..=levels {
            let m = 1usize << k;
            let hk = cfg.h * m as f64;
            let scale = (m as f64).powf(-1.0 / cfg.alpha);
            let mut y = x0.clone();
            for j in 0..steps.div_ceil(m as u64) as usize {
                if coupled {
                    block.iter_mut().for_each(|b| *b = 0.0);
                    for e in eta[j * m * d..(j + 1) * m * d].chunks(d) {
                        for (b, v) in block.iter_mut().zip(e) {
                            *b += v;
                        }
                    }
                    block.iter_mut().for_each(|b| *b *= scale);
                } else {
                    scheme.draw_innovation(&mut block, rng);
                }
                scheme.step_with(&mut y, hk, &block, &mut work)?;
            }
            let base = (k as usize - 1) * nz;
            for (i, &z) in z_points.iter().enumerate() {
                out[base + i] = kernel(z - y[0], bw) - fine[i];
            }
        }
        Ok(())
    })?;
    let mut points = Vec::with_capacity(stats.len());
    for k in 1..=levels {
        for (i, &z) in z_points.iter().enumerate() {
            let s = &stats[(k as usize - 1) * nz + i];
            points.push(LadderPoint {
                h: cfg.h * (1u64 << k) as f64,
                z,
                err: s.mean(),
                stderr: s.std_error(),
            });
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::{CoefficientSpec, SchemeConfig};

    fn brownian_reference() -> ReferenceDensity {
        ReferenceDensity::new(0.5, 2.0, 1, &[0.0], 1.0).unwrap()
    }

    #[test]
    fn coupled_and_lattice_errors_agree() {
        let r = brownian_reference();
        let ladder = [1.0 / 16.0, 1.0 / 64.0];
        let mc = time_change_error(&r, &ladder, 1.0, &[1.5], 200_000, 3).unwrap();
        for p in &mc {
            let exact = time_change_error_exact(&r, p.h, 1.0, &[1.5]).unwrap();
            assert!((p.err - exact).abs() < 4.0 * p.stderr + 1e-6, "h {}: {} vs {exact} ± {}", p.h, p.err, p.stderr);
        }
        // O(h): quartering h roughly quarters the error
        let e1 = time_change_error_exact(&r, 1.0 / 16.0, 1.0, &[1.5]).unwrap();
        let e2 = time_change_error_exact(&r, 1.0 / 64.0, 1.0, &[1.5]).unwrap();
        assert!((e1 / e2 - 4.0).abs() < 0.5, "{e1} {e2}");
    }

    #[test]
    fn running_slope_and_rows() {
        let pts: Vec<LadderPoint> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&h| LadderPoint { h, z: 1.0, err: 3.0 * h, stderr: 0.0 })
            .collect();
        let rows = convergence_rows(&pts, 1.0, |h, _| 10.0 * h);
        assert!(rows[0].slope_running.is_none());
        assert!((rows[2].slope_running.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(rows[1].envelope, 0.5);
    }

    #[test]
    fn constant_field_levels_agree_in_law() {
        // Brownian constant coefficients: every level has the law of X_{Z^h},
        // which differs from the finest only through the clock lattice.
        let cfg = SchemeConfig {
            n_paths: 40_000,
            seed: 11,
            ..SchemeConfig::brownian(0.5, 1.0 / 256.0, 1.0, 1)
        };
        let s = Scheme::new(cfg).unwrap();
        let pts = scheme_vs_finest(&s, 2, &[0.0, 1.0], 0.1).unwrap();
        assert_eq!(pts.len(), 4);
        for p in &pts {
            assert!(p.err.abs() < 4.0 * p.stderr + 0.02, "{p:?}");
        }
    }

    #[test]
    fn variable_field_error_shrinks() {
        let cfg = SchemeConfig {
            coefficients: CoefficientSpec::SineDrift { amplitude: 1.0 },
            n_paths: 20_000,
            seed: 5,
            ..SchemeConfig::brownian(0.5, 1.0 / 512.0, 1.0, 1)
        };
        let s = Scheme::new(cfg).unwrap();
        let pts = scheme_vs_finest(&s, 4, &[0.5], 0.1).unwrap();
        assert!(pts[3].err.abs() > pts[0].err.abs() - 2.0 * (pts[0].stderr + pts[3].stderr));
        assert!(scheme_vs_finest(&s, 0, &[0.5], 0.1).is_err());
        assert!(time_change_error(&brownian_reference(), &[], 1.0, &[0.0], 10, 0).is_err());
    }
}
