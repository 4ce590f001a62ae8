//! Spatial schemes `X_{t+h} = X_t + b(X_t) h + σ(X_t) h^{1/α} η`, innovation
//! families, coefficient fields, and the continuous-time random walk whose
//! scaling limit is the subordinated process.

use std::fmt::Debug;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{check_alpha, check_beta, check_positive, Error, Result};
use crate::inverse_time::sample_inverse_time;
use crate::subord::fill_symmetric_stable;

/// Drift and diffusion coefficients of the spatial SDE.
///
/// Implementations must be reentrant: the solver calls them concurrently
/// from several threads.
pub trait CoefficientField: Send + Sync + Debug {
    fn dim(&self) -> usize;

    fn drift(&self, x: &[f64], out: &mut [f64]);

    /// Row-major `d × d` matrix.
    fn diffusion(&self, x: &[f64], out: &mut [f64]);

    /// Declared ellipticity constant `Λ ≥ 1`.
    fn ellipticity(&self) -> f64;

    /// True when `b ≡ 0`.
    fn drift_vanishes(&self) -> bool;

    /// True when neither coefficient depends on `x`.
    fn is_constant(&self) -> bool {
        false
    }

    fn name(&self) -> &str;
}

/// Constant drift and diffusion.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantField {
    drift: Vec<f64>,
    sigma: Vec<f64>,
}

impl ConstantField {
    pub fn new(drift: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        let d = drift.len();
        if d == 0 || sigma.len() != d * d {
            return Err(Error::param("sigma", format!("expected {0}x{0} matrix for drift of length {0}", d)));
        }
        Ok(Self { drift, sigma })
    }

    /// `b = drift·1`, `σ = sigma·I`.
    pub fn isotropic(dim: usize, drift: f64, sigma: f64) -> Self {
        let mut s = vec![0.0; dim * dim];
        for i in 0..dim {
            s[i * dim + i] = sigma;
        }
        Self {
            drift: vec![drift; dim],
            sigma: s,
        }
    }

    pub fn drift_vector(&self) -> &[f64] {
        &self.drift
    }

    pub fn sigma_matrix(&self) -> &[f64] {
        &self.sigma
    }
}

impl CoefficientField for ConstantField {
    fn dim(&self) -> usize {
        self.drift.len()
    }
    fn drift(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.drift);
    }
    fn diffusion(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.sigma);
    }
    fn ellipticity(&self) -> f64 {
        let d = self.dim();
        // Gershgorin bounds on σσ*.
        let a = sigma_sigma_t(&self.sigma, d);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..d {
            let off: f64 = (0..d).filter(|&j| j != i).map(|j| a[i * d + j].abs()).sum();
            lo = lo.min(a[i * d + i] - off);
            hi = hi.max(a[i * d + i] + off);
        }
        if lo <= 0.0 {
            f64::INFINITY
        } else {
            hi.max(1.0 / lo).max(1.0)
        }
    }
    fn drift_vanishes(&self) -> bool {
        self.drift.iter().all(|&b| b == 0.0)
    }
    fn is_constant(&self) -> bool {
        true
    }
    fn name(&self) -> &str {
        "constant"
    }
}

/// Ornstein–Uhlenbeck field `b(x) = -rate·x`, `σ = sigma·I`. The drift is
/// unbounded; it serves as an oracle for the scheme bias, not for the
/// bounded-coefficient theory.
#[derive(Debug, Clone, PartialEq)]
pub struct OuField {
    pub dim: usize,
    pub rate: f64,
    pub sigma: f64,
}

impl CoefficientField for OuField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = -self.rate * xi;
        }
    }
    fn diffusion(&self, _x: &[f64], out: &mut [f64]) {
        diagonal(out, self.dim, |_| self.sigma);
    }
    fn ellipticity(&self) -> f64 {
        (self.sigma * self.sigma).max(1.0 / (self.sigma * self.sigma))
    }
    fn drift_vanishes(&self) -> bool {
        self.rate == 0.0
    }
    fn name(&self) -> &str {
        "ou"
    }
}

/// `b(x)_i = amplitude·sin(x_i)`, `σ = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct SineDrift {
    pub dim: usize,
    pub amplitude: f64,
}

impl CoefficientField for SineDrift {
    fn dim(&self) -> usize {
        self.dim
    }
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        for (o, xi) in out.iter_mut().zip(x) {
            *o = self.amplitude * xi.sin();
        }
    }
    fn diffusion(&self, _x: &[f64], out: &mut [f64]) {
        diagonal(out, self.dim, |_| 1.0);
    }
    fn ellipticity(&self) -> f64 {
        1.0
    }
    fn drift_vanishes(&self) -> bool {
        self.amplitude == 0.0
    }
    fn name(&self) -> &str {
        "sine-drift"
    }
}

/// `b = 0`, `σ(x) = diag(1 + amplitude·sin(x_i))` with `|amplitude| < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SineVol {
    pub dim: usize,
    pub amplitude: f64,
}

impl CoefficientField for SineVol {
    fn dim(&self) -> usize {
        self.dim
    }
    fn drift(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn diffusion(&self, x: &[f64], out: &mut [f64]) {
        diagonal(out, self.dim, |i| 1.0 + self.amplitude * x[i].sin());
    }
    fn ellipticity(&self) -> f64 {
        let lo = (1.0 - self.amplitude.abs()).powi(2);
        let hi = (1.0 + self.amplitude.abs()).powi(2);
        hi.max(1.0 / lo)
    }
    fn drift_vanishes(&self) -> bool {
        true
    }
    fn name(&self) -> &str {
        "sine-vol"
    }
}

fn diagonal(out: &mut [f64], d: usize, f: impl Fn(usize) -> f64) {
    out.fill(0.0);
    for i in 0..d {
        out[i * d + i] = f(i);
    }
}

fn sigma_sigma_t(s: &[f64], d: usize) -> Vec<f64> {
    let mut a = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            a[i * d + j] = (0..d).map(|k| s[i * d + k] * s[j * d + k]).sum();
        }
    }
    a
}

/// Random spot-check of `Λ^{-1}|ξ|² ≤ <σσ*(x)ξ, ξ> ≤ Λ|ξ|²`.
pub fn spot_check_ellipticity<R: Rng + ?Sized>(field: &dyn CoefficientField, trials: usize, rng: &mut R) -> bool {
    let d = field.dim();
    let lambda = field.ellipticity();
    let mut sigma = vec![0.0; d * d];
    (0..trials).all(|_| {
        let x: Vec<f64> = (0..d).map(|_| 10.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let xi: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        field.diffusion(&x, &mut sigma);
        let a = sigma_sigma_t(&sigma, d);
        let q: f64 = (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .map(|(i, j)| a[i * d + j] * xi[i] * xi[j])
            .sum();
        let n2: f64 = xi.iter().map(|v| v * v).sum();
        q >= n2 / lambda * (1.0 - 1e-12) && q <= lambda * n2 * (1.0 + 1e-12)
    })
}

/// Named coefficient fields selectable from configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CoefficientSpec {
    /// `drift` has length 1 (broadcast) or `d`; `sigma` has length 1
    /// (`sigma·I`) or `d²` (row-major).
    Constant {
        #[serde(default = "zero_vec")]
        drift: Vec<f64>,
        #[serde(default = "one_vec")]
        sigma: Vec<f64>,
    },
    Ou {
        #[serde(default = "one")]
        rate: f64,
        #[serde(default = "one")]
        sigma: f64,
    },
    SineDrift {
        #[serde(default = "half")]
        amplitude: f64,
    },
    SineVol {
        #[serde(default = "half")]
        amplitude: f64,
    },
}

fn zero_vec() -> Vec<f64> {
    vec![0.0]
}
fn one_vec() -> Vec<f64> {
    vec![1.0]
}
fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}

impl Default for CoefficientSpec {
    fn default() -> Self {
        CoefficientSpec::Constant {
            drift: zero_vec(),
            sigma: one_vec(),
        }
    }
}

impl CoefficientSpec {
    pub const NAMES: [&'static str; 4] = ["constant", "ou", "sine-drift", "sine-vol"];

    pub fn build(&self, dim: usize) -> Result<Arc<dyn CoefficientField>> {
        Ok(match self {
            CoefficientSpec::Constant { drift, sigma } => {
                let drift = match drift.len() {
                    1 => vec![drift[0]; dim],
                    n if n == dim => drift.clone(),
                    n => return Err(Error::Config(format!("constant drift has length {n}, expected 1 or {dim}"))),
                };
                let sigma = match sigma.len() {
                    1 => ConstantField::isotropic(dim, 0.0, sigma[0]).sigma,
                    n if n == dim * dim => sigma.clone(),
                    n => {
                        return Err(Error::Config(format!(
                            "constant sigma has length {n}, expected 1 or {}",
                            dim * dim
                        )))
                    }
                };
                Arc::new(ConstantField::new(drift, sigma)?)
            }
            CoefficientSpec::Ou { rate, sigma } => Arc::new(OuField {
                dim,
                rate: *rate,
                sigma: *sigma,
            }),
            CoefficientSpec::SineDrift { amplitude } => Arc::new(SineDrift {
                dim,
                amplitude: *amplitude,
            }),
            CoefficientSpec::SineVol { amplitude } => {
                if amplitude.abs() >= 1.0 {
                    return Err(Error::Config("sine-vol amplitude must be below 1 for ellipticity".into()));
                }
                Arc::new(SineVol {
                    dim,
                    amplitude: *amplitude,
                })
            }
        })
    }
}

/// Innovation law of the Markov-chain scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InnovationSpec {
    /// Standard normal innovations (the Euler scheme). For α < 2 this selects
    /// exact stable driver increments.
    #[default]
    Gaussian,
    /// Multivariate Student-t scaled to identity covariance. Its density
    /// decays with order `M = df + d`; `m` is the Markov-chain moment order.
    PolynomialTail {
        m: u32,
        #[serde(default)]
        df: Option<f64>,
    },
}

impl InnovationSpec {
    /// Student-t innovations with the smallest default df for which
    /// `M > d(2m+1)+4`.
    pub fn polynomial_tail(m: u32) -> Self {
        InnovationSpec::PolynomialTail { m, df: None }
    }

    /// Degrees of freedom actually used in dimension `d`.
    pub fn degrees_of_freedom(&self, dim: usize) -> Option<f64> {
        match *self {
            InnovationSpec::Gaussian => None,
            InnovationSpec::PolynomialTail { m, df } => Some(df.unwrap_or((2 * dim as u32 * m + 5) as f64)),
        }
    }

    /// Decay order `M` of the density.
    pub fn decay_order(&self, dim: usize) -> Option<f64> {
        self.degrees_of_freedom(dim).map(|df| df + dim as f64)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if let InnovationSpec::PolynomialTail { m, .. } = *self {
            let df = self.degrees_of_freedom(dim).expect("polynomial tail");
            if !(df > 2.0) {
                return Err(Error::Config(format!("Student-t df = {df} must exceed 2 for unit covariance")));
            }
            let need = (dim * (2 * m as usize + 1) + 4) as f64;
            let big_m = df + dim as f64;
            if big_m <= need {
                return Err(Error::Config(format!(
                    "M > d(2m+1)+4 violated: M = {big_m}, d = {dim}, m = {m} requires M > {need}"
                )));
            }
        }
        Ok(())
    }
}

/// One innovation draw into `out`.
pub fn fill_innovation<R: Rng + ?Sized>(spec: &InnovationSpec, out: &mut [f64], rng: &mut R) {
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    if let Some(df) = spec.degrees_of_freedom(out.len()) {
        let chi = ChiSquared::new(df).expect("validated df").sample(rng);
        let scale = ((df - 2.0) / chi).sqrt();
        for v in out.iter_mut() {
            *v *= scale;
        }
    }
}

pub fn sample_innovation<R: Rng + ?Sized>(spec: &InnovationSpec, dim: usize, rng: &mut R) -> Result<Vec<f64>> {
    spec.validate(dim)?;
    let mut out = vec![0.0; dim];
    fill_innovation(spec, &mut out, rng);
    Ok(out)
}

pub fn innovation_density(spec: &InnovationSpec, z: &[f64]) -> Result<f64> {
    let d = z.len();
    spec.validate(d)?;
    let r2: f64 = z.iter().map(|v| v * v).sum();
    let df = match spec.degrees_of_freedom(d) {
        None => return Ok((-0.5 * r2).exp() / (2.0 * std::f64::consts::PI).powf(d as f64 / 2.0)),
        Some(df) => df,
    };
    let df_d = d as f64;
    let s = df - 2.0;
    let ln = ln_gamma((df + df_d) / 2.0)
        - ln_gamma(df / 2.0)
        - df_d / 2.0 * (std::f64::consts::PI * s).ln()
        - (df + df_d) / 2.0 * (r2 / s).ln_1p();
    Ok(ln.exp())
}

fn default_epsilon() -> f64 {
    0.01
}

/// Full parameterization of one experiment's scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub beta: f64,
    pub alpha: f64,
    pub h: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dim: usize,
    #[serde(default)]
    pub coefficients: CoefficientSpec,
    #[serde(default)]
    pub innovation: InnovationSpec,
    pub n_paths: u64,
    #[serde(default)]
    pub seed: u64,
    /// Starting point; empty means the origin.
    #[serde(default)]
    pub start: Vec<f64>,
    /// Slack in the Markov-chain rate `h^{1/5-ε}`.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

impl SchemeConfig {
    /// Brownian, constant-coefficient configuration in dimension `dim`.
    pub fn brownian(beta: f64, h: f64, horizon: f64, dim: usize) -> Self {
        Self {
            beta,
            alpha: 2.0,
            h,
            horizon,
            dim,
            coefficients: CoefficientSpec::default(),
            innovation: InnovationSpec::Gaussian,
            n_paths: 1000,
            seed: 0,
            start: Vec::new(),
            epsilon: default_epsilon(),
        }
    }

    pub fn start_point(&self) -> Vec<f64> {
        if self.start.is_empty() {
            vec![0.0; self.dim]
        } else {
            self.start.clone()
        }
    }

    /// Parameter ranges plus the horizon preconditions of the convergence
    /// results.
    pub fn validate(&self) -> Result<()> {
        check_beta(self.beta)?;
        check_alpha(self.alpha)?;
        check_positive("h", self.h)?;
        check_positive("T", self.horizon)?;
        if self.dim == 0 {
            return Err(Error::param("dim", "dimension must be at least 1"));
        }
        if !self.start.is_empty() && self.start.len() != self.dim {
            return Err(Error::Config(format!("start has length {}, expected {}", self.start.len(), self.dim)));
        }
        if self.n_paths == 0 {
            return Err(Error::param("n_paths", "need at least one path"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.2) {
            return Err(Error::param("epsilon", format!("{} not in (0, 1/5)", self.epsilon)));
        }
        self.innovation.validate(self.dim)?;
        let (h, t) = (self.h, self.horizon);
        match (self.alpha == 2.0, self.innovation) {
            (true, InnovationSpec::Gaussian) => {
                if t <= h.sqrt() {
                    return Err(Error::Config(format!("T > h^{{1/2}} violated (T = {t}, h = {h})")));
                }
            }
            (true, InnovationSpec::PolynomialTail { m, .. }) => {
                if m < 2 * (self.dim as u32 + 1) {
                    return Err(Error::Config(format!("m >= 2(d+1) violated (m = {m}, d = {})", self.dim)));
                }
                let rate = h.powf(0.2 - self.epsilon);
                if t.powf(self.beta) < rate {
                    return Err(Error::Config(format!(
                        "T^beta >= h^{{1/5-eps}} violated (T^beta = {}, h^{{1/5-eps}} = {rate})",
                        t.powf(self.beta)
                    )));
                }
            }
            (false, InnovationSpec::PolynomialTail { .. }) => {
                return Err(Error::Config("polynomial-tail innovations require alpha = 2".into()));
            }
            (false, InnovationSpec::Gaussian) => {
                if t <= h.powf(1.0 / self.beta) {
                    return Err(Error::Config(format!("T > h^{{1/beta}} violated (T = {t}, h = {h})")));
                }
            }
        }
        Ok(())
    }
}

/// A validated configuration bound to its coefficient field.
#[derive(Debug, Clone)]
pub struct Scheme {
    cfg: SchemeConfig,
    field: Arc<dyn CoefficientField>,
    step_scale: f64,
}

impl Scheme {
    pub fn new(cfg: SchemeConfig) -> Result<Self> {
        let field = cfg.coefficients.build(cfg.dim)?;
        Self::with_field(cfg, field)
    }

    /// Use a user-registered field instead of the config's named one.
    pub fn with_field(cfg: SchemeConfig, field: Arc<dyn CoefficientField>) -> Result<Self> {
        cfg.validate()?;
        if field.dim() != cfg.dim {
            return Err(Error::Config(format!("field dimension {} != d = {}", field.dim(), cfg.dim)));
        }
        if cfg.alpha <= 1.0 && !field.drift_vanishes() {
            return Err(Error::Config(format!(
                "drift must vanish when alpha <= 1 (alpha = {}, field `{}`)",
                cfg.alpha,
                field.name()
            )));
        }
        let step_scale = cfg.h.powf(1.0 / cfg.alpha);
        Ok(Self { cfg, field, step_scale })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    pub fn field(&self) -> &Arc<dyn CoefficientField> {
        &self.field
    }

    /// Whether `n` steps can be aggregated into one exact draw.
    pub fn is_exact(&self) -> bool {
        self.field.is_constant() && self.cfg.innovation == InnovationSpec::Gaussian
    }

    fn draw(&self, out: &mut [f64], rng: &mut (impl Rng + ?Sized)) {
        if self.cfg.alpha < 2.0 {
            fill_symmetric_stable(self.cfg.alpha, out, rng);
        } else {
            fill_innovation(&self.cfg.innovation, out, rng);
        }
    }

    /// One recursion step, in place.
    pub fn step<R: Rng + ?Sized>(&self, x: &mut [f64], work: &mut Workspace, rng: &mut R) -> Result<()> {
        let mut eta = std::mem::take(&mut work.eta);
        self.draw(&mut eta, rng);
        let out = self.step_with(x, self.cfg.h, &eta, work);
        work.eta = eta;
        out
    }

    /// Draws one driver innovation (unit step) into `out`.
    pub fn draw_innovation<R: Rng + ?Sized>(&self, out: &mut [f64], rng: &mut R) {
        self.draw(out, rng);
    }

    /// One step of size `h` with the given innovation `eta`,
    /// `x += b(x) h + h^{1/α} σ(x) η`.
    pub fn step_with(&self, x: &mut [f64], h: f64, eta: &[f64], work: &mut Workspace) -> Result<()> {
        let d = self.cfg.dim;
        self.field.drift(x, &mut work.b);
        self.field.diffusion(x, &mut work.s);
        if work.b.iter().chain(&work.s).any(|v| !v.is_finite()) {
            return Err(Error::numerical(
                "scheme step",
                format!("non-finite coefficients at x = {x:?}: b = {:?}, sigma = {:?}", work.b, work.s),
            ));
        }
        let scale = if h == self.cfg.h { self.step_scale } else { h.powf(1.0 / self.cfg.alpha) };
        for i in 0..d {
            let noise: f64 = (0..d).map(|k| work.s[i * d + k] * eta[k]).sum();
            x[i] += work.b[i] * h + scale * noise;
        }
        Ok(())
    }

    /// Advances `x` by `n` steps. Constant coefficients with exact driver
    /// increments are aggregated into a single draw, which has the same law.
    pub fn advance<R: Rng + ?Sized>(&self, x: &mut [f64], n: u64, work: &mut Workspace, rng: &mut R) -> Result<()> {
        if n == 0 {
            return Ok(());
        }
        if self.is_exact() {
            let d = self.cfg.dim;
            let t = n as f64 * self.cfg.h;
            self.field.drift(x, &mut work.b);
            self.field.diffusion(x, &mut work.s);
            self.draw(&mut work.eta, rng);
            let scale = t.powf(1.0 / self.cfg.alpha);
            for i in 0..d {
                let noise: f64 = (0..d).map(|k| work.s[i * d + k] * work.eta[k]).sum();
                x[i] += work.b[i] * t + scale * noise;
            }
            return Ok(());
        }
        for _ in 0..n {
            self.step(x, work, rng)?;
        }
        Ok(())
    }

    pub fn workspace(&self) -> Workspace {
        Workspace::new(self.cfg.dim)
    }
}

/// Scratch buffers for [`Scheme::step`].
#[derive(Debug, Clone)]
pub struct Workspace {
    b: Vec<f64>,
    s: Vec<f64>,
    eta: Vec<f64>,
}

impl Workspace {
    pub fn new(dim: usize) -> Self {
        Self {
            b: vec![0.0; dim],
            s: vec![0.0; dim * dim],
            eta: vec![0.0; dim],
        }
    }
}

pub fn scheme_step<R: Rng + ?Sized>(x: &[f64], scheme: &Scheme, rng: &mut R) -> Result<Vec<f64>> {
    let mut y = x.to_vec();
    scheme.step(&mut y, &mut scheme.workspace(), rng)?;
    Ok(y)
}

/// `X^h_{stop}` from `x`, always stepping one grid interval at a time.
pub fn scheme_path_to_time<R: Rng + ?Sized>(x: &[f64], scheme: &Scheme, stop_time: f64, rng: &mut R) -> Result<Vec<f64>> {
    let n = grid_steps(stop_time, scheme.config().h)?;
    let mut y = x.to_vec();
    let mut work = scheme.workspace();
    for _ in 0..n {
        scheme.step(&mut y, &mut work, rng)?;
    }
    Ok(y)
}

/// Number of grid steps `stop/h`, rejecting off-grid times.
pub fn grid_steps(stop_time: f64, h: f64) -> Result<u64> {
    if stop_time < 0.0 {
        return Err(Error::param("stop_time", "must be nonnegative"));
    }
    let n = (stop_time / h).round();
    if (n * h - stop_time).abs() > 1e-9 * stop_time.max(h) {
        return Err(Error::param("stop_time", format!("{stop_time} is not a multiple of h = {h}")));
    }
    Ok(n as u64)
}

/// One draw of `n^{-β/α} Γ_{nt}` for the walk with Pareto waiting times
/// `P[W > w] = w^{-β}/Γ(1-β)` and exact α-stable jumps.
pub fn simulate_ctrw<R: Rng + ?Sized>(beta: f64, alpha: f64, dim: usize, n: f64, t: f64, rng: &mut R) -> Result<Vec<f64>> {
    check_beta(beta)?;
    check_alpha(alpha)?;
    check_positive("n", n)?;
    if t < 0.0 {
        return Err(Error::param("t", "must be nonnegative"));
    }
    let mut pos = vec![0.0; dim];
    let mut jump = vec![0.0; dim];
    let w0 = gamma(1.0 - beta).powf(-1.0 / beta);
    let budget = n * t;
    let mut clock = 0.0;
    loop {
        let u: f64 = rng.sample(rand::distr::Open01);
        clock += w0 * u.powf(-1.0 / beta);
        if clock > budget {
            break;
        }
        fill_symmetric_stable(alpha, &mut jump, rng);
        for (p, j) in pos.iter_mut().zip(&jump) {
            *p += j;
        }
    }
    let scale = n.powf(-beta / alpha);
    pos.iter_mut().for_each(|p| *p *= scale);
    Ok(pos)
}

/// Direct draw of the CTRW limit `S^α_{Z_t}`.
pub fn sample_subordinated<R: Rng + ?Sized>(beta: f64, alpha: f64, dim: usize, t: f64, rng: &mut R) -> Result<Vec<f64>> {
    let mut out = vec![0.0; dim];
    if t == 0.0 {
        return Ok(out);
    }
    let z = sample_inverse_time(beta, t, rng)?;
    fill_symmetric_stable(alpha, &mut out, rng);
    let s = z.powf(1.0 / alpha);
    out.iter_mut().for_each(|v| *v *= s);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamFactory;
    use crate::stats::{ks_two_sample, ks_two_sample_critical, log_log_slope, sort_floats, RunningStats};
    use proptest::prelude::*;

    fn cfg(alpha: f64, coefficients: CoefficientSpec, h: f64) -> SchemeConfig {
        SchemeConfig {
            alpha,
            coefficients,
            ..SchemeConfig::brownian(0.5, h, 1.0, 1)
        }
    }

    fn constant(drift: f64, sigma: f64) -> CoefficientSpec {
        CoefficientSpec::Constant {
            drift: vec![drift],
            sigma: vec![sigma],
        }
    }

    #[test]
    fn frozen_and_pure_drift_steps() {
        let mut rng = StreamFactory::new(1).stream(0);
        let s = Scheme::new(SchemeConfig {
            dim: 3,
            ..cfg(2.0, constant(0.0, 0.0), 0.25)
        })
        .unwrap();
        assert_eq!(scheme_step(&[1.0, 2.0, 3.0], &s, &mut rng).unwrap(), vec![1.0, 2.0, 3.0]);
        let s = Scheme::new(SchemeConfig {
            dim: 3,
            ..cfg(2.0, constant(1.0, 0.0), 0.25)
        })
        .unwrap();
        assert_eq!(scheme_step(&[0.0; 3], &s, &mut rng).unwrap(), vec![0.25; 3]);
    }

    #[test]
    fn validity_predicates() {
        let err = cfg(2.0, constant(0.0, 1.0), 1.0).validate().unwrap_err();
        assert!(err.to_string().contains("T > h^{1/2} violated"), "{err}");
        let mc = SchemeConfig {
            innovation: InnovationSpec::polynomial_tail(4),
            horizon: 0.1,
            ..cfg(2.0, constant(0.0, 1.0), 0.05)
        };
        assert!(mc.validate().unwrap_err().to_string().contains("h^{1/5-eps}"));
        let mc = SchemeConfig {
            innovation: InnovationSpec::polynomial_tail(2),
            ..cfg(2.0, constant(0.0, 1.0), 1e-6)
        };
        assert!(mc.validate().unwrap_err().to_string().contains("m >= 2(d+1)"));
        let bad_m = SchemeConfig {
            innovation: InnovationSpec::PolynomialTail { m: 4, df: Some(8.0) },
            ..cfg(2.0, constant(0.0, 1.0), 1e-6)
        };
        assert!(bad_m.validate().unwrap_err().to_string().contains("M > d(2m+1)+4"));
        let stable = SchemeConfig {
            horizon: 0.3,
            ..cfg(1.5, constant(0.0, 1.0), 0.6)
        };
        assert!(stable.validate().unwrap_err().to_string().contains("h^{1/beta}"));
        let drift = Scheme::new(cfg(1.0, constant(0.3, 1.0), 0.01)).unwrap_err();
        assert!(drift.to_string().contains("drift must vanish"));
        assert!(Scheme::new(cfg(0.8, CoefficientSpec::SineDrift { amplitude: 0.5 }, 0.01)).is_err());
        assert!(Scheme::new(cfg(0.8, CoefficientSpec::SineVol { amplitude: 0.5 }, 0.01)).is_ok());
    }

    #[test]
    fn exact_gaussian_law_of_summed_steps() {
        let s = Scheme::new(SchemeConfig {
            dim: 2,
            coefficients: CoefficientSpec::Constant {
                drift: vec![0.5, -1.0],
                sigma: vec![1.0, 0.0, 0.5, 2.0],
            },
            ..SchemeConfig::brownian(0.5, 0.1, 1.0, 2)
        })
        .unwrap();
        let f = StreamFactory::new(2);
        let n = 100_000;
        let (mut m0, mut m1, mut c00, mut c01, mut c11) =
            (RunningStats::new(), RunningStats::new(), RunningStats::new(), RunningStats::new(), RunningStats::new());
        for i in 0..n {
            let y = scheme_path_to_time(&[0.0, 0.0], &s, 1.0, &mut f.stream(i)).unwrap();
            m0.push(y[0]);
            m1.push(y[1]);
            let (a, b) = (y[0] - 0.5, y[1] + 1.0);
            c00.push(a * a);
            c01.push(a * b);
            c11.push(b * b);
        }
        // σσ* = [[1, 0.5], [0.5, 4.25]]
        for (st, want) in [(m0, 0.5), (m1, -1.0), (c00, 1.0), (c01, 0.5), (c11, 4.25)] {
            assert!((st.mean() - want).abs() < 4.0 * st.std_error(), "{} vs {want}", st.mean());
        }
    }

    #[test]
    fn aggregated_advance_matches_stepping_in_law() {
        let s = Scheme::new(cfg(2.0, constant(0.7, 1.3), 0.05)).unwrap();
        let n = 40_000;
        let f = StreamFactory::new(3);
        let mut a: Vec<f64> = (0..n)
            .map(|i| scheme_path_to_time(&[0.0], &s, 1.5, &mut f.stream(i)).unwrap()[0])
            .collect();
        let g = f.derive(1);
        let mut work = s.workspace();
        let mut b: Vec<f64> = (0..n)
            .map(|i| {
                let mut x = [0.0];
                s.advance(&mut x, 30, &mut work, &mut g.stream(i)).unwrap();
                x[0]
            })
            .collect();
        sort_floats(&mut a);
        sort_floats(&mut b);
        assert!(ks_two_sample(&a, &b) < ks_two_sample_critical(n as usize, n as usize, 0.01));
    }

    #[test]
    fn off_grid_stop_time_rejected() {
        let s = Scheme::new(cfg(2.0, constant(0.0, 1.0), 0.1)).unwrap();
        let mut rng = StreamFactory::new(4).stream(0);
        assert!(scheme_path_to_time(&[0.0], &s, 0.25, &mut rng).is_err());
        assert_eq!(scheme_path_to_time(&[1.5], &s, 0.0, &mut rng).unwrap(), vec![1.5]);
    }

    #[test]
    fn ou_bias_is_first_order() {
        let f = StreamFactory::new(5);
        let n = 20_000;
        let mut biases = Vec::new();
        let hs = [0.25, 0.125, 0.0625];
        for &h in &hs {
            let s = Scheme::new(cfg(2.0, CoefficientSpec::Ou { rate: 1.0, sigma: 1.0 }, h)).unwrap();
            // common random numbers cancel the noise in the mean; E[X_T] for the
            // Euler chain is x(1-h)^{T/h}
            let st: RunningStats = (0..n)
                .map(|i| scheme_path_to_time(&[1.0], &s, 1.0, &mut f.stream(i)).unwrap()[0])
                .collect();
            let exact_chain = (1.0 - h).powf(1.0 / h);
            assert!((st.mean() - exact_chain).abs() < 4.0 * st.std_error());
            biases.push((exact_chain - (-1.0f64).exp()).abs());
        }
        let slope = log_log_slope(&hs, &biases).unwrap();
        assert!((slope - 1.0).abs() < 0.3, "slope {slope}");
        for w in biases.windows(2) {
            let r = w[0] / w[1];
            assert!((r - 2.0).abs() < 0.6, "ratio {r}");
        }
    }

    #[test]
    fn pure_jump_characteristic_function() {
        let s = Scheme::new(cfg(1.5, constant(0.0, 1.0), 0.1)).unwrap();
        let f = StreamFactory::new(6);
        let st: RunningStats = (0..200_000)
            .map(|i| scheme_path_to_time(&[0.0], &s, 1.0, &mut f.stream(i)).unwrap()[0].cos())
            .collect();
        let want = (-1.0f64).exp();
        assert!((st.mean() - want).abs() < 3.0 * st.std_error(), "{}", st.mean());
    }

    #[test]
    fn scaling_exponent_single_step() {
        let h = 0.01;
        let s = Scheme::new(cfg(1.5, constant(0.0, 1.0), h)).unwrap();
        let n = 50_000;
        let f = StreamFactory::new(7);
        let mut a: Vec<f64> = (0..n).map(|i| scheme_step(&[0.0], &s, &mut f.stream(i)).unwrap()[0]).collect();
        let g = f.derive(2);
        let mut b: Vec<f64> = (0..n)
            .map(|i| {
                let mut e = [0.0];
                fill_symmetric_stable(1.5, &mut e, &mut g.stream(i));
                h.powf(1.0 / 1.5) * e[0]
            })
            .collect();
        sort_floats(&mut a);
        sort_floats(&mut b);
        assert!(ks_two_sample(&a, &b) < ks_two_sample_critical(n as usize, n as usize, 0.01));
    }

    #[test]
    fn innovation_densities_and_moments() {
        let g = InnovationSpec::Gaussian;
        assert!((innovation_density(&g, &[0.0, 0.0]).unwrap() - 0.159_155).abs() < 1e-6);
        let t = InnovationSpec::polynomial_tail(4);
        assert_eq!(t.degrees_of_freedom(1), Some(13.0));
        let mut rng = StreamFactory::new(8).stream(0);
        let mut m1 = RunningStats::new();
        let mut m2 = RunningStats::new();
        for _ in 0..400_000 {
            let z = sample_innovation(&t, 1, &mut rng).unwrap()[0];
            m1.push(z);
            m2.push(z * z);
        }
        assert!(m1.mean().abs() < 3.0 * m1.std_error());
        assert!((m2.mean() - 1.0).abs() < 3.0 * m2.std_error(), "{}", m2.mean());
        // tail slope -(df + d)
        let rs = [1e2, 1e3, 1e4];
        let ds: Vec<f64> = rs.iter().map(|&r| innovation_density(&t, &[r]).unwrap()).collect();
        let slope = log_log_slope(&rs, &ds).unwrap();
        assert!((slope + 14.0).abs() < 0.02 * 14.0, "{slope}");
    }

    #[test]
    fn student_density_normalizes_and_fits_samples() {
        let t = InnovationSpec::PolynomialTail { m: 2, df: Some(9.0) };
        let q = crate::quad::integrate_to_infinity(
            |z| 2.0 * innovation_density(&t, &[z]).unwrap(),
            0.0,
            crate::quad::Tolerance::default(),
        )
        .unwrap();
        assert!((q.value - 1.0).abs() < 1e-10);
        let mut rng = StreamFactory::new(9).stream(0);
        let n = 100_000;
        let inside = (0..n)
            .filter(|_| sample_innovation(&t, 1, &mut rng).unwrap()[0].abs() < 1.0)
            .count() as f64
            / n as f64;
        let p = crate::quad::integrate(
            |z| innovation_density(&t, &[z]).unwrap(),
            -1.0,
            1.0,
            crate::quad::Tolerance::default(),
        )
        .unwrap()
        .value;
        assert!((inside - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt());
    }

    #[test]
    fn registry_and_ellipticity() {
        let mut rng = StreamFactory::new(10).stream(0);
        for name in CoefficientSpec::NAMES {
            let spec: CoefficientSpec = toml::from_str(&format!("kind = \"{name}\"")).unwrap();
            let field = spec.build(2).unwrap();
            assert_eq!(field.name(), name);
            assert!(spot_check_ellipticity(field.as_ref(), 200, &mut rng), "{name}");
        }
        assert!(CoefficientSpec::SineVol { amplitude: 1.0 }.build(1).is_err());
        assert!(constant(0.0, 1.0).build(3).unwrap().is_constant());
    }

    #[test]
    fn ctrw_trivial_and_variance() {
        let mut rng = StreamFactory::new(11).stream(0);
        assert_eq!(simulate_ctrw(0.5, 2.0, 2, 1e4, 0.0, &mut rng).unwrap(), vec![0.0, 0.0]);
        let f = StreamFactory::new(12);
        let st: RunningStats = (0..20_000)
            .map(|i| simulate_ctrw(0.5, 2.0, 1, 1e4, 1.0, &mut f.stream(i)).unwrap()[0].powi(2))
            .collect();
        let want = 2.0 / std::f64::consts::PI.sqrt();
        assert!((st.mean() - want).abs() < 0.1 * want, "{}", st.mean());
    }

    proptest! {
        #[test]
        fn grid_steps_roundtrip(n in 0u64..100_000, k in 1u32..20) {
            let h = 2f64.powi(-(k as i32));
            prop_assert_eq!(grid_steps(n as f64 * h, h).unwrap(), n);
        }

        #[test]
        fn default_df_satisfies_decay_condition(d in 1usize..5, extra in 0u32..4) {
            let m = 2 * (d as u32 + 1) + extra;
            prop_assert!(InnovationSpec::polynomial_tail(m).validate(d).is_ok());
        }
    }
}
