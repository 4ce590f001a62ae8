use std::collections::BTreeMap;
use std::f64::consts::{E, PI};
use std::fmt::Write as _;
use std::path::PathBuf;

use statrs::function::gamma::gamma;

use super::{fmt_value, reference_grid, reference_tail_exponent, CsvTable, ExperimentKind};
use crate::bounds::{
    error_envelopes, hat_p_beta_diffusive, tilde_p_beta_diffusive, two_sided_check, EnvelopeParams, Regime,
    DEFAULT_CEILING,
};
use crate::error::{Error, Result};
use crate::inverse_time::{fit_theta_constants, inverse_density};
use crate::solver::{
    caputo_derivative, riemann_liouville_derivative, solve_fractional_cauchy, time_change_error_exact, ClockMode,
    GridSpec, ReferenceDensity,
};
use crate::spatial::{Scheme, SchemeConfig};
use crate::subord::{stable_subordinator_density, SymmetricStableDensity};

/// Golden values shipped with the library.
pub const GOLDEN: &str = include_str!("../../golden.toml");

/// Where `--regen-golden` writes by default.
pub fn default_golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("golden.toml")
}

/// Relative tolerance for deterministic golden values.
const GOLDEN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub name: String,
    pub expected: f64,
    pub got: f64,
    pub tol: f64,
    pub pass: bool,
}

impl CaseResult {
    fn compare(name: &str, expected: f64, got: f64, tol: f64) -> Self {
        let pass = (got - expected).abs() <= tol * expected.abs().max(1e-14) || got == expected;
        Self {
            name: name.to_string(),
            expected,
            got,
            tol,
            pass,
        }
    }

    fn absolute(name: &str, expected: f64, got: f64, tol: f64) -> Self {
        Self {
            name: name.to_string(),
            expected,
            got,
            tol,
            pass: (got - expected).abs() <= tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestReport {
    pub cases: Vec<CaseResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.cases.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
    }

    pub fn to_table(&self, config_hash: String, seed: u64) -> CsvTable {
        CsvTable {
            experiment: ExperimentKind::Selftest,
            config_hash,
            seed,
            columns: ExperimentKind::Selftest.columns().iter().map(|c| c.to_string()).collect(),
            rows: self
                .cases
                .iter()
                .map(|c| {
                    vec![
                        c.name.clone(),
                        fmt_value(Some(c.expected)),
                        fmt_value(Some(c.got)),
                        fmt_value(Some(c.tol)),
                        c.pass.to_string(),
                    ]
                })
                .collect(),
            footer: vec![format!("result: {}", if self.passed() { "PASS" } else { "FAIL" })],
        }
    }
}

fn bounds_case(alpha: f64, c: f64) -> Result<(f64, f64)> {
    let reference = ReferenceDensity::new(0.5, alpha, 1, &[0.0], 1.0)?;
    let grid = reference_grid(&reference, 1.0, GridSpec { lo: 0.0, hi: 4.0, n: 41 })?;
    let p = EnvelopeParams::new(c, 0.5, alpha, 1)?;
    let report = two_sided_check(&grid, Regime::of(alpha), 1.0, &p, &p, DEFAULT_CEILING)?;
    Ok((report.c_up, report.c_low))
}

fn mc_second_moment() -> Result<f64> {
    let scheme = Scheme::new(SchemeConfig {
        n_paths: 4096,
        seed: 1,
        ..SchemeConfig::brownian(0.5, 0.01, 1.0, 1)
    })?;
    Ok(solve_fractional_cauchy(|x| x[0] * x[0], &[0.0], &scheme, ClockMode::Path)?.mean)
}

/// Current values of every golden quantity.
fn golden_values() -> Result<Vec<(&'static str, f64)>> {
    let brownian = ReferenceDensity::new(0.5, 2.0, 1, &[0.0], 1.0)?;
    let stable = ReferenceDensity::new(0.5, 1.5, 1, &[0.0], 1.0)?;
    let theta_grid: Vec<f64> = (0..=100).map(|i| i as f64 * 0.05).collect();
    let (theta_up, theta_low) = fit_theta_constants(0.5, 1.0, &theta_grid)?;
    let (diff_up, diff_low) = bounds_case(2.0, 2.0)?;
    let (stab_up, stab_low) = bounds_case(1.5, 2.0)?;
    let dt = 1e-3;
    let ramp: Vec<f64> = (0..=1000).map(|i| i as f64 * dt).collect();
    Ok(vec![
        ("reference_q_origin", brownian.density(1.0, &[0.0])?),
        ("reference_q_z1", brownian.density(1.0, &[1.0])?),
        ("reference_stable_z1", stable.density(1.0, &[1.0])?),
        ("inverse_density_beta05_u1", inverse_density(0.5, 1.0, 1.0)?),
        ("inverse_density_beta03_u1", inverse_density(0.3, 1.0, 1.0)?),
        ("one_sided_density_beta03_v1", stable_subordinator_density(0.3, 1.0)?),
        ("symmetric_stable_alpha15_x1", SymmetricStableDensity::new(1.5)?.density_exact(1.0)),
        ("theta_c_up_beta05", theta_up),
        ("theta_c_low_beta05", theta_low),
        ("sandwich_diffusive_c_up", diff_up),
        ("sandwich_diffusive_c_low", diff_low),
        ("sandwich_stable_c_up", stab_up),
        ("sandwich_stable_c_low", stab_low),
        ("stable_tail_exponent", reference_tail_exponent(&stable, 1.0, 10.0, 100.0)?),
        ("lattice_error_h64", time_change_error_exact(&brownian, 1.0 / 64.0, 1.0, &[1.5])?),
        ("caputo_ramp_t1", caputo_derivative(&ramp, dt, 0.5)?[1000]),
        ("mc_second_moment_seed1", mc_second_moment()?),
    ])
}

/// Checks that hold by closed form and need no golden file.
fn invariant_cases() -> Result<Vec<CaseResult>> {
    let mut out = Vec::new();
    let q = ReferenceDensity::new(0.5, 2.0, 1, &[0.0], 1.0)?.density(1.0, &[0.0])?;
    out.push(CaseResult::compare("invariant_origin_closed_form", gamma(0.25) / (2.0 * PI), q, 1e-9));
    for t in [0.25, 1.0, 4.0] {
        let got = inverse_density(0.5, t, 1.0)?;
        let want = (PI * t).powf(-0.5) * (-1.0 / (4.0 * t)).exp();
        out.push(CaseResult::absolute(&format!("invariant_half_normal_T{t}"), want, got, 1e-10));
    }
    let d3 = EnvelopeParams::new(1.0, 0.5, 2.0, 3)?;
    let d1 = EnvelopeParams::new(1.0, 0.5, 2.0, 1)?;
    out.push(CaseResult::absolute("invariant_hat_p_d3", 1.0, hat_p_beta_diffusive(&d3, 1.0, 1.0)?, 1e-14));
    out.push(CaseResult::absolute("invariant_tilde_p_d1", E, tilde_p_beta_diffusive(&d1, 1.0, 0.0)?, 1e-14));
    let time = error_envelopes(&d3, 1.0, 1.0, 0.01)?.time.unwrap_or(f64::NAN);
    out.push(CaseResult::absolute("invariant_time_envelope_d3", 2.0, time, 1e-13));
    let dt = 1e-3;
    let poly: Vec<f64> = (0..=300)
        .map(|i| {
            let t = i as f64 * dt;
            1.0 - 2.0 * t + 3.0 * t * t
        })
        .collect();
    let cap = caputo_derivative(&poly, dt, 0.4)?;
    let rl = riemann_liouville_derivative(&poly, dt, 0.4)?;
    let gap = (1..poly.len())
        .map(|n| (rl[n] - (n as f64 * dt).powf(-0.4) / gamma(0.6) - cap[n]).abs())
        .fold(0.0, f64::max);
    out.push(CaseResult::absolute("invariant_rl_caputo_identity", 0.0, gap, 1e-10));
    let a = mc_second_moment()?;
    let b = mc_second_moment()?;
    out.push(CaseResult::absolute("invariant_mc_bitwise_repeat", 0.0, (a - b).abs(), 0.0));
    Ok(out)
}

/// Runs the invariant suite and compares against `golden` (`key = value`).
pub fn run_selftest(golden: &str) -> Result<SelftestReport> {
    let expected: BTreeMap<String, f64> =
        toml::from_str(golden).map_err(|e| Error::Config(format!("malformed golden file: {e}")))?;
    let mut cases = invariant_cases()?;
    for (name, got) in golden_values()? {
        match expected.get(name) {
            Some(&want) => cases.push(CaseResult::compare(name, want, got, GOLDEN_TOL)),
            None => cases.push(CaseResult {
                name: format!("{name} (missing from golden file)"),
                expected: f64::NAN,
                got,
                tol: GOLDEN_TOL,
                pass: false,
            }),
        }
    }
    Ok(SelftestReport { cases })
}

/// Recomputes all golden values and renders a fresh golden file.
pub fn regenerate_golden() -> Result<String> {
    let mut s = String::from("# fracsub golden values; regenerate with `fracsub selftest --regen-golden`\n");
    for (name, v) in golden_values()? {
        // Debug keeps a decimal point or exponent, so every value stays a TOML float
        let _ = writeln!(s, "{name} = {v:?}");
    }
    Ok(s)
}
