//! Experiment orchestration behind the command-line verbs: configuration
//! files, runners and CSV emission.
//!
//! Precedence for every setting is: command-line flag, then config file,
//! then the defaults below.

mod selftest;

pub use selftest::{default_golden_path, regenerate_golden, run_selftest, CaseResult, SelftestReport, GOLDEN};

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{error_envelopes, tail_exponent, two_sided_check, EnvelopeParams, Regime};
use crate::error::{Error, Result};
use crate::rng::StreamFactory;
use crate::solver::{
    convergence_rows, estimate_density, parallel_map, pde_residual_check, sample_endpoints, scheme_vs_finest,
    solve_fractional_cauchy, time_change_error, ClockMode, ConvergenceRow, DensityGrid, DensityMethod, GridSpec,
    ReferenceDensity, TimeDerivative,
};
use crate::spatial::{sample_subordinated, simulate_ctrw, CoefficientSpec, InnovationSpec, Scheme, SchemeConfig};
use crate::stats::{ks_two_sample, ks_two_sample_critical, sort_floats};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Solve,
    Density,
    Converge,
    BoundsCheck,
    CtrwDemo,
    Residual,
    Selftest,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Solve => "solve",
            Self::Density => "density",
            Self::Converge => "converge",
            Self::BoundsCheck => "bounds-check",
            Self::CtrwDemo => "ctrw-demo",
            Self::Residual => "residual",
            Self::Selftest => "selftest",
        }
    }

    /// CSV column names, in order.
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Self::Solve => &["mean", "stderr", "n_samples", "seed"],
            Self::Density => &["z", "density", "band", "reference"],
            Self::Converge => &["h", "T", "z", "err", "err_ci", "envelope", "slope_running"],
            Self::BoundsCheck => &["r", "density", "lower_env", "upper_env", "slack_low", "slack_up"],
            Self::CtrwDemo => &["x", "ecdf_ctrw", "ecdf_limit"],
            Self::Residual => &["t", "x", "rl_derivative", "generator", "residual"],
            Self::Selftest => &["case", "expected", "got", "tol", "pass"],
        }
    }
}

/// Test function applied to the first coordinate of the endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Payoff {
    Moment { order: u32 },
    Indicator { lo: f64, hi: f64 },
    Cosine { frequency: f64 },
}

impl Payoff {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let v = x[0];
        match *self {
            Payoff::Moment { order } => v.powi(order as i32),
            Payoff::Indicator { lo, hi } => f64::from(u8::from(v >= lo && v <= hi)),
            Payoff::Cosine { frequency } => (frequency * v).cos(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSpec {
    pub payoff: Payoff,
    /// Starting point; empty means `scheme.start`.
    pub x: Vec<f64>,
}

impl Default for SolveSpec {
    fn default() -> Self {
        Self {
            payoff: Payoff::Moment { order: 2 },
            x: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensitySpec {
    pub grid: GridSpec,
    pub method: DensityMethod,
}

impl Default for DensitySpec {
    fn default() -> Self {
        Self {
            grid: GridSpec { lo: -3.0, hi: 3.0, n: 61 },
            method: DensityMethod::Kde { bandwidth: None },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvergeMode {
    /// Constant coefficients against the quadrature reference density.
    #[default]
    ExactReference,
    /// Any coefficients against the finest step of a dyadic ladder.
    SchemeVsFinest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeSpec {
    pub mode: ConvergeMode,
    /// Step sizes for the exact-reference mode; empty means `2^k scheme.h`, `k = 0..=levels`.
    pub ladder: Vec<f64>,
    /// Coarse levels `2^k h`, `k = 1..=levels`.
    pub levels: u32,
    /// Evaluation points on the first axis.
    pub z: Vec<f64>,
    /// Kernel bandwidth for scheme-vs-finest.
    pub bandwidth: f64,
    /// Envelope constant.
    pub c: f64,
}

impl Default for ConvergeSpec {
    fn default() -> Self {
        Self {
            mode: ConvergeMode::ExactReference,
            ladder: Vec::new(),
            levels: 4,
            z: vec![1.5],
            bandwidth: 0.1,
            c: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsSpec {
    /// Radii `r = |z|` at which the reference density is sandwiched.
    pub grid: GridSpec,
    /// Shape constant of the upper envelope.
    pub c_up: f64,
    /// Shape constant of the lower envelope.
    pub c_low: f64,
    pub ceiling: f64,
    /// `[lo, hi]` in units of `T^{β/α}` for a tail-exponent fit.
    pub tail: Option<[f64; 2]>,
}

impl Default for BoundsSpec {
    fn default() -> Self {
        Self {
            grid: GridSpec { lo: 0.0, hi: 4.0, n: 41 },
            c_up: 2.0,
            c_low: 2.0,
            ceiling: crate::bounds::DEFAULT_CEILING,
            tail: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CtrwSpec {
    /// Scaling parameter of the walk.
    pub n: f64,
    pub grid: GridSpec,
}

impl Default for CtrwSpec {
    fn default() -> Self {
        Self {
            n: 1e4,
            grid: GridSpec { lo: -3.0, hi: 3.0, n: 61 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResidualSpec {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub dt: f64,
    pub dx: f64,
    pub operator: TimeDerivative,
}

impl Default for ResidualSpec {
    fn default() -> Self {
        Self {
            t: vec![0.5, 1.0, 1.5, 2.0],
            x: vec![-2.0, -1.0, -0.5, 0.5, 1.0, 2.0],
            dt: 1e-3,
            dx: 1e-3,
            operator: TimeDerivative::RiemannLiouville,
        }
    }
}

fn default_scheme() -> SchemeConfig {
    SchemeConfig::brownian(0.5, 1e-3, 1.0, 1)
}

/// One experiment, as read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_scheme")]
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub clock: ClockMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default)]
    pub solve: SolveSpec,
    #[serde(default)]
    pub density: DensitySpec,
    #[serde(default)]
    pub converge: ConvergeSpec,
    #[serde(default)]
    pub bounds: BoundsSpec,
    #[serde(default)]
    pub ctrw: CtrwSpec,
    #[serde(default)]
    pub residual: ResidualSpec,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, scheme: SchemeConfig) -> Self {
        Self {
            experiment,
            scheme,
            clock: ClockMode::default(),
            output: None,
            threads: None,
            solve: SolveSpec::default(),
            density: DensitySpec::default(),
            converge: ConvergeSpec::default(),
            bounds: BoundsSpec::default(),
            ctrw: CtrwSpec::default(),
            residual: ResidualSpec::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    /// SHA-256 of the canonical serialization of the effective config.
    /// Thread count and output path do not affect results and are excluded.
    pub fn hash(&self) -> Result<String> {
        let canonical = Self {
            threads: None,
            output: None,
            ..self.clone()
        };
        let digest = Sha256::digest(canonical.to_toml()?.as_bytes());
        Ok(digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        }))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.scheme.seed = seed;
        }
        if let Some(t) = o.threads {
            self.threads = Some(t);
        }
        if let Some(p) = &o.output {
            self.output = Some(p.clone());
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if self.experiment == ExperimentKind::Selftest {
            return Ok(());
        }
        self.scheme.validate()
    }
}

/// A CSV table with the provenance header block.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub experiment: ExperimentKind,
    pub config_hash: String,
    pub seed: u64,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Trailing `# key: value` lines.
    pub footer: Vec<String>,
}

/// Shortest round-trip formatting; empty for missing values.
pub fn fmt_value(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

impl CsvTable {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        Ok(Self {
            experiment: cfg.experiment,
            config_hash: cfg.hash()?,
            seed: cfg.scheme.seed,
            columns: cfg.experiment.columns().iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            footer: Vec::new(),
        })
    }

    fn push(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|&v| fmt_value(Some(v))).collect());
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# fracsub {VERSION}");
        let _ = writeln!(s, "# experiment: {}", self.experiment.name());
        let _ = writeln!(s, "# config_hash: sha256:{}", self.config_hash);
        let _ = writeln!(s, "# seed: {}", self.seed);
        let _ = writeln!(s, "{}", self.columns.join(","));
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        for f in &self.footer {
            let _ = writeln!(s, "# {f}");
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    /// Values of the named column.
    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }
}

/// Runs one experiment, on a dedicated pool when `threads` is set.
pub fn run(cfg: &ExperimentConfig) -> Result<CsvTable> {
    cfg.validate()?;
    let go = || match cfg.experiment {
        ExperimentKind::Solve => run_solve(cfg),
        ExperimentKind::Density => run_density(cfg),
        ExperimentKind::Converge => run_converge(cfg),
        ExperimentKind::BoundsCheck => run_bounds_check(cfg),
        ExperimentKind::CtrwDemo => run_ctrw_demo(cfg),
        ExperimentKind::Residual => run_residual(cfg),
        ExperimentKind::Selftest => {
            let report = run_selftest(GOLDEN)?;
            Ok(report.to_table(cfg.hash()?, cfg.scheme.seed))
        }
    };
    with_threads(cfg.threads, go)
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Resource(format!("thread pool: {e}")))?
            .install(f),
        None => f(),
    }
}

/// The constant-coefficient reference density of a scheme, when one exists:
/// constant drift, `σ = s·I`, exact driver increments.
pub fn reference_for(scheme: &SchemeConfig) -> Result<Option<ReferenceDensity>> {
    let CoefficientSpec::Constant { drift, sigma } = &scheme.coefficients else {
        return Ok(None);
    };
    if scheme.innovation != InnovationSpec::Gaussian {
        return Ok(None);
    }
    let d = scheme.dim;
    let s = match sigma.len() {
        1 => sigma[0],
        n if n == d * d => {
            let s0 = sigma[0];
            let isotropic = (0..d).all(|i| (0..d).all(|j| sigma[i * d + j] == if i == j { s0 } else { 0.0 }));
            if !isotropic {
                return Ok(None);
            }
            s0
        }
        _ => return Ok(None),
    };
    if s <= 0.0 || (scheme.alpha < 2.0 && d != 1) {
        return Ok(None);
    }
    ReferenceDensity::new(scheme.beta, scheme.alpha, d, drift, s).map(Some)
}

fn require_reference(cfg: &ExperimentConfig, what: &str) -> Result<ReferenceDensity> {
    reference_for(&cfg.scheme)?.ok_or_else(|| {
        Error::Config(format!(
            "{what} needs constant coefficients with sigma = s*I and Gaussian innovations"
        ))
    })
}

pub fn run_solve(cfg: &ExperimentConfig) -> Result<CsvTable> {
    let scheme = Scheme::new(cfg.scheme.clone())?;
    let x = if cfg.solve.x.is_empty() { cfg.scheme.start_point() } else { cfg.solve.x.clone() };
    let payoff = cfg.solve.payoff;
    let est = solve_fractional_cauchy(|y| payoff.eval(y), &x, &scheme, cfg.clock)?;
    let mut t = CsvTable::new(cfg)?;
    t.rows.push(vec![
        fmt_value(Some(est.mean)),
        fmt_value(Some(est.stderr)),
        est.n_samples.to_string(),
        est.seed.to_string(),
    ]);
    Ok(t)
}

/// Endpoints' first coordinates.
pub fn first_coordinates(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    let scheme = Scheme::new(cfg.scheme.clone())?;
    let all = sample_endpoints(&scheme, cfg.clock)?;
    Ok(all.chunks(cfg.scheme.dim).map(|c| c[0]).collect())
}

pub fn run_density(cfg: &ExperimentConfig) -> Result<CsvTable> {
    let samples = first_coordinates(cfg)?;
    let est = estimate_density(&samples, cfg.density.grid, cfg.density.method)?;
    let reference = if cfg.scheme.dim == 1 { reference_for(&cfg.scheme)? } else { None };
    let x0 = cfg.scheme.start_point()[0];
    let mut t = CsvTable::new(cfg)?;
    for i in 0..est.points.len() {
        let z = est.points[i];
        let q = match &reference {
            Some(r) => Some(match est.method {
                // expected value of the estimator, so smoothing bias is not error
                DensityMethod::Kde { .. } if cfg.scheme.alpha == 2.0 => {
                    r.density_smoothed(cfg.scheme.horizon, &[z - x0], est.bandwidth)?
                }
                _ => r.density(cfg.scheme.horizon, &[z - x0])?,
            }),
            None => None,
        };
        t.rows.push(vec![
            fmt_value(Some(z)),
            fmt_value(Some(est.values[i])),
            fmt_value(Some(est.band[i])),
            fmt_value(q),
        ]);
    }
    t.footer.push(format!("bandwidth: {}", est.bandwidth));
    if est.tail_mass > 0.0 {
        t.footer.push(format!("tail_mass: {}", est.tail_mass));
    }
    Ok(t)
}

fn envelope_params(cfg: &ExperimentConfig, c: f64) -> Result<EnvelopeParams> {
    let s = &cfg.scheme;
    let mut p = EnvelopeParams::new(c, s.beta, s.alpha, s.dim)?;
    p.epsilon = s.epsilon;
    if let InnovationSpec::PolynomialTail { m, .. } = s.innovation {
        p.m = m;
    }
    Ok(p)
}

/// Convergence rows with envelopes `c h (E_time + E_space)` (Euler, stable)
/// or the Markov-chain bound.
pub fn converge_rows(cfg: &ExperimentConfig) -> Result<Vec<ConvergenceRow>> {
    let spec = &cfg.converge;
    if spec.z.is_empty() {
        return Err(Error::Config("converge needs at least one z point".into()));
    }
    let s = &cfg.scheme;
    let params = envelope_params(cfg, spec.c)?;
    let markov = s.innovation != InnovationSpec::Gaussian;
    let envelope = |h: f64, z: f64| {
        error_envelopes(&params, s.horizon, z.abs(), h)
            .map(|e| if markov { e.markov_bound(h) } else { e.euler_bound(h) })
            .unwrap_or(f64::NAN)
    };
    let point = |z: f64| {
        let mut v = vec![0.0; s.dim];
        v[0] = z;
        v
    };
    let points = match spec.mode {
        ConvergeMode::ExactReference => {
            let reference = require_reference(cfg, "exact-reference mode")?;
            let mut ladder = if spec.ladder.is_empty() {
                (0..=spec.levels).map(|k| s.h * 2f64.powi(k as i32)).collect()
            } else {
                spec.ladder.clone()
            };
            ladder.sort_by(|a, b| b.total_cmp(a));
            for &h in &ladder {
                SchemeConfig { h, ..s.clone() }
                    .validate()
                    .map_err(|e| Error::Config(format!("ladder infeasible at h = {h}: {e}")))?;
            }
            let x0 = s.start_point();
            let mut pts = Vec::new();
            for &z in &spec.z {
                let mut zz = point(z);
                zz.iter_mut().zip(&x0).for_each(|(a, b)| *a -= b);
                let mut got = time_change_error(&reference, &ladder, s.horizon, &zz, s.n_paths, s.seed)?;
                got.iter_mut().for_each(|p| p.z = z);
                pts.extend(got);
            }
            pts
        }
        ConvergeMode::SchemeVsFinest => {
            for k in 1..=spec.levels {
                let h = s.h * 2f64.powi(k as i32);
                SchemeConfig { h, ..s.clone() }
                    .validate()
                    .map_err(|e| Error::Config(format!("ladder infeasible at h = {h}: {e}")))?;
            }
            let scheme = Scheme::new(s.clone())?;
            let mut pts = scheme_vs_finest(&scheme, spec.levels, &spec.z, spec.bandwidth)?;
            pts.reverse();
            pts
        }
    };
    Ok(convergence_rows(&points, s.horizon, envelope))
}

pub fn run_converge(cfg: &ExperimentConfig) -> Result<CsvTable> {
    let rows = converge_rows(cfg)?;
    let mut t = CsvTable::new(cfg)?;
    for r in &rows {
        t.rows.push(vec![
            fmt_value(Some(r.h)),
            fmt_value(Some(r.horizon)),
            fmt_value(Some(r.z)),
            fmt_value(Some(r.err)),
            fmt_value(Some(r.err_ci)),
            fmt_value(Some(r.envelope)),
            fmt_value(r.slope_running),
        ]);
    }
    t.footer.push(format!(
        "mode: {}",
        match cfg.converge.mode {
            ConvergeMode::ExactReference => "exact-reference",
            ConvergeMode::SchemeVsFinest => "scheme-vs-finest",
        }
    ));
    Ok(t)
}

/// Reference density on the `r` grid along the first axis.
pub fn reference_grid(reference: &ReferenceDensity, horizon: f64, grid: GridSpec) -> Result<DensityGrid> {
    let pts = grid.points();
    let vals = pts
        .iter()
        .map(|&r| {
            let mut z = vec![0.0; reference.dim()];
            z[0] = r;
            reference.density(horizon, &z)
        })
        .collect::<Result<Vec<f64>>>()?;
    DensityGrid::from_values(pts, vals)
}

/// Log-log tail slope of the reference density on `[lo, hi] T^{β/α}`, from
/// 25 log-spaced radii.
pub fn reference_tail_exponent(reference: &ReferenceDensity, horizon: f64, lo: f64, hi: f64) -> Result<f64> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Config(format!("tail range [{lo}, {hi}] must satisfy 0 < lo < hi")));
    }
    let scale = horizon.powf(reference.beta() / reference.alpha());
    let n = 25;
    let rs: Vec<f64> = (0..n)
        .map(|i| scale * lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect();
    let qs = rs
        .iter()
        .map(|&r| {
            let mut z = vec![0.0; reference.dim()];
            z[0] = r;
            reference.density(horizon, &z)
        })
        .collect::<Result<Vec<f64>>>()?;
    tail_exponent(&rs, &qs)
}

pub fn run_bounds_check(cfg: &ExperimentConfig) -> Result<CsvTable> {
    let s = &cfg.scheme;
    let reference = require_reference(cfg, "bounds-check")?;
    let spec = &cfg.bounds;
    let density = reference_grid(&reference, s.horizon, spec.grid)?;
    let upper = envelope_params(cfg, spec.c_up)?;
    let lower = envelope_params(cfg, spec.c_low)?;
    let report = two_sided_check(&density, Regime::of(s.alpha), s.horizon, &upper, &lower, spec.ceiling)?;
    let mut t = CsvTable::new(cfg)?;
    for r in &report.rows {
        t.push(&[r.r, r.density, r.lower_env, r.upper_env, r.slack_low, r.slack_up]);
    }
    t.footer.push(format!(
        "summary: c_up={},c_low={},ratio={},ceiling={},pass={}",
        report.c_up,
        report.c_low,
        report.ratio(),
        report.ceiling,
        report.pass
    ));
    if let Some([lo, hi]) = spec.tail {
        let slope = reference_tail_exponent(&reference, s.horizon, lo, hi)?;
        t.footer.push(format!("tail_exponent: {slope}"));
    }
    Ok(t)
}

/// First coordinates of rescaled-CTRW and direct-limit samples, each sorted.
pub fn ctrw_samples(cfg: &ExperimentConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let s = &cfg.scheme;
    let factory = StreamFactory::new(s.seed);
    let limit_factory = factory.derive(1);
    let pairs = parallel_map(factory, s.n_paths, |i, rng| {
        let walk = simulate_ctrw(s.beta, s.alpha, s.dim, cfg.ctrw.n, s.horizon, rng)?[0];
        let limit = sample_subordinated(s.beta, s.alpha, s.dim, s.horizon, &mut limit_factory.stream(i))?[0];
        Ok((walk, limit))
    })?;
    let (mut a, mut b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    sort_floats(&mut a);
    sort_floats(&mut b);
    Ok((a, b))
}

pub fn run_ctrw_demo(cfg: &ExperimentConfig) -> Result<CsvTable> {
    let (walk, limit) = ctrw_samples(cfg)?;
    let ecdf = |v: &[f64], x: f64| v.partition_point(|&y| y <= x) as f64 / v.len() as f64;
    let mut t = CsvTable::new(cfg)?;
    for x in cfg.ctrw.grid.points() {
        t.push(&[x, ecdf(&walk, x), ecdf(&limit, x)]);
    }
    t.footer.push(format!("ks: {}", ks_two_sample(&walk, &limit)));
    t.footer.push(format!("ks_critical_0.01: {}", ks_two_sample_critical(walk.len(), limit.len(), 0.01)));
    Ok(t)
}

pub fn run_residual(cfg: &ExperimentConfig) -> Result<CsvTable> {
    let reference = require_reference(cfg, "residual")?;
    let spec = &cfg.residual;
    let report = pde_residual_check(&reference, &spec.t, &spec.x, spec.dt, spec.dx, spec.operator)?;
    let mut t = CsvTable::new(cfg)?;
    for p in &report.points {
        t.push(&[p.t, p.x, p.rl_derivative, p.generator, p.residual]);
    }
    t.footer.push(format!("max_abs_residual: {}", report.max_abs_residual));
    t.footer.push(format!("relative_residual: {}", report.relative()));
    Ok(t)
}
