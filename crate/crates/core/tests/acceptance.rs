//! End-to-end acceptance gate. Runs without the libtest harness so that the
//! one-line verdicts always reach stdout; exits nonzero if any check fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use statrs::function::gamma::gamma;

use fracsub::bounds::{two_sided_check, EnvelopeParams, Regime, DEFAULT_CEILING};
use fracsub::harness::{ctrw_samples, reference_grid, reference_tail_exponent, ExperimentConfig, ExperimentKind};
use fracsub::inverse_time::{inverse_density, sample_inverse_dyadic, InverseStableLaw};
use fracsub::quad::{gauss_legendre, integrate_to_infinity, Tolerance};
use fracsub::solver::{
    caputo_derivative, estimate_density, parallel_map, pde_residual_check, sample_endpoints, time_change_error,
    time_change_error_exact, ClockMode, DensityMethod, GridSpec, ReferenceDensity, TimeDerivative,
};
use fracsub::spatial::{Scheme, SchemeConfig};
use fracsub::stats::{ks_one_sample, ks_two_sample, log_log_slope, sort_floats};
use fracsub::subord::sample_positive_stable;
use fracsub::{Result, StreamFactory};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

fn laplace_law() -> Result<Verdict> {
    const N: u64 = 1_000_000;
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for (k, beta) in [0.3, 0.5, 0.7, 0.9].into_iter().enumerate() {
        let s = parallel_map(StreamFactory::new(100 + k as u64), N, |_, rng| sample_positive_stable(beta, rng))?;
        for lambda in [0.5, 1.0, 2.0] {
            let v: Vec<f64> = s.iter().map(|x| (-lambda * x).exp()).collect();
            let mean = v.iter().sum::<f64>() / N as f64;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (N - 1) as f64;
            let z = (mean - (-f64::powf(lambda, beta)).exp()).abs() / (var / N as f64).sqrt();
            worst = worst.max(z);
            pass &= z <= 3.0;
        }
    }
    verdict(pass, format!("max |mean - exp(-λ^β)| / stderr = {worst:.3} (limit 3)"))
}

fn half_normal_inverse_density() -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    for t in [0.25, 1.0, 4.0] {
        for i in 0..=5000 {
            let u = i as f64 * 1e-3;
            let want = (PI * t).powf(-0.5) * (-u * u / (4.0 * t)).exp();
            worst = worst.max((inverse_density(0.5, t, u)? - want).abs());
        }
    }
    verdict(worst <= 1e-8, format!("max abs error = {worst:.3e} (limit 1e-8)"))
}

/// CDF of `Z_1` for β = 1/4 by integrating the density on cells of width
/// `CELL` with an 8-point Gauss–Legendre rule, linearly interpolated.
fn tabulated_inverse_cdf(beta: f64) -> Result<(f64, Vec<f64>)> {
    const CELL: f64 = 2.5e-3;
    const U_MAX: f64 = 40.0;
    let (x, w) = gauss_legendre(8);
    let n = (U_MAX / CELL) as usize;
    let mut cdf = Vec::with_capacity(n + 1);
    cdf.push(0.0);
    let mut acc = 0.0;
    for k in 0..n {
        let mid = (k as f64 + 0.5) * CELL;
        for (xi, wi) in x.iter().zip(&w) {
            acc += 0.5 * CELL * wi * inverse_density(beta, 1.0, mid + 0.5 * CELL * xi)?;
        }
        cdf.push(acc);
    }
    Ok((CELL, cdf))
}

fn dyadic_sampler_ks() -> Result<Verdict> {
    const N: u64 = 1_000_000;
    let (cell, table) = tabulated_inverse_cdf(0.25)?;
    let law = InverseStableLaw::new(0.25)?;
    let mut table_gap: f64 = 0.0;
    for u in [0.1, 0.5, 1.0, 2.0, 4.0] {
        let k = (u / cell).round() as usize;
        table_gap = table_gap.max((table[k] - law.cdf(1.0, u)?).abs());
    }
    let mut s = parallel_map(StreamFactory::new(3), N, |_, rng| sample_inverse_dyadic(2, 1.0, rng))?;
    sort_floats(&mut s);
    let cdf = |u: f64| {
        let p = u / cell;
        let k = p.floor() as usize;
        if k + 1 >= table.len() {
            return 1.0;
        }
        let f = p - k as f64;
        table[k] * (1.0 - f) + table[k + 1] * f
    };
    let ks = ks_one_sample(&s, cdf);
    verdict(
        ks <= 0.002 && table_gap < 1e-6,
        format!("KS = {ks:.5} (limit 0.002); quadrature vs closed-form CDF gap {table_gap:.1e}"),
    )
}

fn origin_value_and_mass() -> Result<Verdict> {
    let r = ReferenceDensity::new(0.5, 2.0, 1, &[0.0], 1.0)?;
    let q0 = r.density(1.0, &[0.0])?;
    let want = gamma(0.25) / (2.0 * PI);
    let mut err = None;
    let half = integrate_to_infinity(
        |z| {
            r.density(1.0, &[z]).unwrap_or_else(|e| {
                err.get_or_insert(e);
                0.0
            })
        },
        0.0,
        Tolerance::new(1e-12, 1e-11),
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    let mass = 2.0 * half.value;
    let (e0, e1) = ((q0 - want).abs(), (mass - 1.0).abs());
    verdict(
        e0 <= 1e-6 && e1 <= 1e-6,
        format!("q(1,0) = {q0:.10} vs Γ(1/4)/(2π) = {want:.10} (err {e0:.1e}); |∫q - 1| = {e1:.1e}"),
    )
}

fn monte_carlo_density() -> Result<Verdict> {
    const BW: f64 = 0.05;
    let scheme = Scheme::new(SchemeConfig {
        n_paths: 1_000_000,
        seed: 5,
        ..SchemeConfig::brownian(0.5, 1e-3, 1.0, 1)
    })?;
    let x = sample_endpoints(&scheme, ClockMode::Path)?;
    let grid = estimate_density(&x, GridSpec { lo: -3.0, hi: 3.0, n: 61 }, DensityMethod::Kde { bandwidth: Some(BW) })?;
    let r = ReferenceDensity::new(0.5, 2.0, 1, &[0.0], 1.0)?;
    let (mut worst_ratio, mut worst_abs): (f64, f64) = (0.0, 0.0);
    for ((&z, &v), &band) in grid.points.iter().zip(&grid.values).zip(&grid.band) {
        let diff = (v - r.density_smoothed(1.0, &[z], BW)?).abs();
        worst_ratio = worst_ratio.max(diff / band);
        worst_abs = worst_abs.max(diff);
    }
    verdict(
        worst_ratio <= 3.0,
        format!("max |KDE - reference| / band = {worst_ratio:.3} (limit 3), sup error {worst_abs:.2e}, bandwidth {BW}"),
    )
}

fn time_change_rate() -> Result<Verdict> {
    let r = ReferenceDensity::new(0.5, 2.0, 1, &[0.0], 1.0)?;
    let ladder: Vec<f64> = (6..=10).map(|k| 0.5f64.powi(k)).collect();
    let pts = time_change_error(&r, &ladder, 1.0, &[1.5], 1_000_000, 6)?;
    let mut monotone = true;
    for w in pts.windows(2) {
        let noise = 3.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
        monotone &= w[0].err.abs() - w[1].err.abs() > noise;
    }
    let errs: Vec<f64> = pts.iter().map(|p| p.err.abs()).collect();
    let slope = log_log_slope(&ladder, &errs).unwrap_or(f64::NAN);
    let exact: Vec<f64> = ladder
        .iter()
        .map(|&h| time_change_error_exact(&r, h, 1.0, &[1.5]).map(f64::abs))
        .collect::<Result<_>>()?;
    let exact_slope = log_log_slope(&ladder, &exact).unwrap_or(f64::NAN);
    verdict(
        monotone && slope >= 0.7,
        format!(
            "MC slope {slope:.3} (limit 0.7), monotone beyond 3σ: {monotone}; lattice-sum slope {exact_slope:.3}; errors {}",
            errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(" ")
        ),
    )
}

fn pde_residual() -> Result<Verdict> {
    let r = ReferenceDensity::new(0.5, 2.0, 1, &[0.0], 1.0)?;
    let t = [0.5, 1.0, 1.5, 2.0];
    let x = [-2.0, -1.5, -1.0, -0.5, 0.5, 1.0, 1.5, 2.0];
    let coarse = pde_residual_check(&r, &t, &x, 1e-3, 1e-3, TimeDerivative::RiemannLiouville)?.relative();
    let fine = pde_residual_check(&r, &t, &x, 5e-4, 5e-4, TimeDerivative::RiemannLiouville)?.relative();
    let ratio = coarse / fine;
    verdict(
        coarse <= 1e-2 && ratio >= 2.0,
        format!("relative residual {coarse:.3e} (limit 1e-2), refined {fine:.3e}, ratio {ratio:.2} (need ≥ 2)"),
    )
}

fn sandwich_and_tail() -> Result<Verdict> {
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [2.0, 1.5] {
        let r = ReferenceDensity::new(0.5, alpha, 1, &[0.0], 1.0)?;
        let grid = reference_grid(&r, 1.0, GridSpec { lo: 0.0, hi: 4.0, n: 41 })?;
        let p = EnvelopeParams::new(2.0, 0.5, alpha, 1)?;
        let rep = two_sided_check(&grid, Regime::of(alpha), 1.0, &p, &p, DEFAULT_CEILING)?;
        pass &= rep.pass && rep.c_up.is_finite() && rep.c_low.is_finite();
        parts.push(format!("α={alpha}: ĉ_up/ĉ_low = {:.3e}", rep.ratio()));
    }
    let stable = ReferenceDensity::new(0.5, 1.5, 1, &[0.0], 1.0)?;
    let slope = reference_tail_exponent(&stable, 1.0, 10.0, 100.0)?;
    let rel = (-slope - 2.5).abs() / 2.5;
    pass &= rel <= 0.05;
    parts.push(format!("tail exponent {:.4} vs 2.5 ({:.2}% off, limit 5%)", -slope, 100.0 * rel));
    verdict(pass, parts.join("; "))
}

fn ctrw_limit() -> Result<Verdict> {
    let mut cfg = ExperimentConfig::new(
        ExperimentKind::CtrwDemo,
        SchemeConfig {
            n_paths: 100_000,
            seed: 9,
            ..SchemeConfig::brownian(0.5, 1e-3, 1.0, 1)
        },
    );
    cfg.ctrw.n = 1e4;
    let (walk, limit) = ctrw_samples(&cfg)?;
    let ks = ks_two_sample(&walk, &limit);
    verdict(ks <= 0.02, format!("two-sample KS = {ks:.4} (limit 0.02)"))
}

fn fractional_operators() -> Result<Verdict> {
    let beta = 0.5;
    let dt = 1e-4;
    let ramp: Vec<f64> = (0..=10_000).map(|i| i as f64 * dt).collect();
    let cap = caputo_derivative(&ramp, dt, beta)?;
    let caputo_err = ramp
        .iter()
        .zip(&cap)
        .map(|(&t, &c)| (c - t.powf(1.0 - beta) / gamma(2.0 - beta)).abs())
        .fold(0.0, f64::max);
    let mut identity_err: f64 = 0.0;
    let polys: [&[f64]; 4] = [&[1.0], &[0.5, -1.0], &[1.0, -2.0, 3.0], &[-0.3, 0.2, 1.5, -0.7]];
    for b in [0.3, 0.5, 0.8] {
        for coeffs in polys {
            let dt = 1e-3;
            let f: Vec<f64> = (0..=1000)
                .map(|i| {
                    let t = i as f64 * dt;
                    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
                })
                .collect();
            let rl = fracsub::solver::riemann_liouville_derivative(&f, dt, b)?;
            let cap = caputo_derivative(&f, dt, b)?;
            for n in 1..f.len() {
                let t = n as f64 * dt;
                let gap = rl[n] - f[0] * t.powf(-b) / gamma(1.0 - b) - cap[n];
                identity_err = identity_err.max(gap.abs());
            }
        }
    }
    verdict(
        caputo_err <= 1e-3 && identity_err <= 1e-10,
        format!("Caputo of t error {caputo_err:.2e} (limit 1e-3); RL-Caputo identity gap {identity_err:.2e} (limit 1e-10)"),
    )
}

type Check = fn() -> Result<Verdict>;

fn main() -> ExitCode {
    let checks: [(&str, Check, u64); 10] = [
        ("subordinator Laplace law", laplace_law, 30),
        ("inverse density closed form at β = 1/2", half_normal_inverse_density, 5),
        ("dyadic inverse-time sampler", dyadic_sampler_ks, 60),
        ("reference density at the origin and total mass", origin_value_and_mass, 10),
        ("Monte Carlo density vs reference", monte_carlo_density, 300),
        ("time-change error rate", time_change_rate, 1200),
        ("fractional PDE residual", pde_residual, 300),
        ("two-sided bounds and stable tail", sandwich_and_tail, 300),
        ("CTRW scaling limit", ctrw_limit, 300),
        ("Caputo and Riemann-Liouville operators", fractional_operators, 60),
    ];
    let mut failed = 0;
    for (i, (name, check, budget)) in checks.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let (pass, detail) = match outcome {
            Ok(v) => (v.pass && in_time, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "[{:>2}] {} {name}: {detail} [{:.1}s of {budget}s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of 10 passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
