//! Radial kernels k(s), s = |x - y|, and the constants attached to them.
//!
//! Every potential in the crate is built on the functions in this module; nothing
//! downstream re-derives a kernel formula. The exact evaluators (`eval_*`) are the
//! reference implementations, [`PreparedKernel`] is the fast path used inside
//! volume integrals.

use crate::quadrature::{integrate_1d, IntegralEstimate, QuadratureConfig};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("gamma function pole at z = {0}")]
    Pole(f64),
    #[error("branch selection error: {0}")]
    Branch(String),
    #[error("kernel is singular at s = 0 for alpha = {alpha}, dim = {dim}")]
    Singularity { alpha: f64, dim: usize },
    #[error("integral did not converge (best estimate {best}, error bound {error_bound})")]
    Convergence { best: f64, error_bound: f64 },
    #[error("invalid kernel spec `{spec}`: {reason}")]
    Parse { spec: String, reason: String },
}

pub type Result<T, E = KernelError> = std::result::Result<T, E>;

// Lanczos approximation, g = 7, 9 coefficients.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const POLE_TOL: f64 = 1e-12;

/// Returns `Some(n)` when `z` is within the pole tolerance of the integer `n`.
fn near_integer(z: f64) -> Option<i64> {
    let r = z.round();
    ((z - r).abs() <= POLE_TOL * r.abs().max(1.0)).then_some(r as i64)
}

/// Gamma function. Reflection is used below 1/2.
pub fn gamma<T: Real>(z: T) -> Result<T> {
    let zf = z.as_f64();
    if !zf.is_finite() {
        return Err(KernelError::Domain(format!("gamma of non-finite {zf}")));
    }
    if let Some(n) = near_integer(zf) {
        if n <= 0 {
            return Err(KernelError::Pole(zf));
        }
    }
    Ok(T::lit(gamma_f64(zf)))
}

fn gamma_f64(z: f64) -> f64 {
    use std::f64::consts::PI;
    if z < 0.5 {
        PI / ((PI * z).sin() * gamma_f64(1.0 - z))
    } else {
        let z = z - 1.0;
        let mut x = LANCZOS_COEF[0];
        for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            x += c / (z + i as f64);
        }
        let t = z + LANCZOS_G + 0.5;
        (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * x
    }
}

/// Surface measure of the unit sphere in R^dim, `2 pi^(N/2) / Gamma(N/2)`.
pub fn sphere_surface_measure<T: Real>(dim: usize) -> Result<T> {
    if dim < 1 {
        return Err(KernelError::Domain("dimension must be at least 1".into()));
    }
    let half = T::lit(dim as f64 / 2.0);
    Ok(T::lit(2.0) * T::PI().powf(half) / gamma(half)?)
}

fn require_positive<T: Real>(s: T) -> Result<()> {
    if s > T::zero() && s.is_finite() {
        Ok(())
    } else {
        Err(KernelError::Domain(format!("separation must be positive, got {s}")))
    }
}

/// `s^(alpha - dim)`.
pub fn eval_riesz<T: Real>(s: T, alpha: T, dim: usize) -> Result<T> {
    require_positive(s)?;
    Ok(s.powf(alpha - T::from_usize_lossy(dim)))
}

/// `log(1/s)`.
pub fn eval_log<T: Real>(s: T) -> Result<T> {
    require_positive(s)?;
    Ok(-s.ln())
}

/// `s^(alpha - dim) log(1/s)`, defined for `alpha > dim`.
pub fn eval_log_riesz<T: Real>(s: T, alpha: T, dim: usize) -> Result<T> {
    require_positive(s)?;
    let p = alpha - T::from_usize_lossy(dim);
    if p <= T::zero() {
        return Err(KernelError::Domain(format!(
            "log-Riesz kernel needs alpha > dim (alpha = {alpha}, dim = {dim})"
        )));
    }
    Ok(-s.powf(p) * s.ln())
}

/// Separation `e^(1/(dim - alpha))` below which the log-Riesz kernel is strictly
/// increasing; its maximum `1/((alpha - dim) e)` sits exactly there.
pub fn monotonicity_threshold<T: Real>(alpha: T, dim: usize) -> Result<T> {
    let p = alpha - T::from_usize_lossy(dim);
    if p <= T::zero() {
        return Err(KernelError::Domain(format!(
            "threshold needs alpha > dim (alpha = {alpha}, dim = {dim})"
        )));
    }
    Ok((-T::one() / p).exp())
}

/// Which representation of the fractional-Laplacian fundamental solution applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FundamentalBranch {
    /// `(alpha - dim)/2` is not a nonnegative integer: pure power law.
    Power,
    /// `(alpha - dim)/2 = k` is a nonnegative integer: power times logarithm.
    Logarithmic { k: u32 },
}

pub fn fundamental_branch<T: Real>(alpha: T, dim: usize) -> FundamentalBranch {
    let half = (alpha.as_f64() - dim as f64) / 2.0;
    match near_integer(half) {
        Some(k) if k >= 0 => FundamentalBranch::Logarithmic { k: k as u32 },
        _ => FundamentalBranch::Power,
    }
}

/// Multiplicative constant of the fundamental solution and its branch.
pub fn fundamental_coefficient<T: Real>(alpha: T, dim: usize) -> Result<(T, FundamentalBranch)> {
    let n = T::from_usize_lossy(dim);
    let two = T::lit(2.0);
    let pi_half_n = T::PI().powf(n / two);
    let gamma_half_alpha = gamma(alpha / two)?;
    let branch = fundamental_branch(alpha, dim);
    let c = match branch {
        FundamentalBranch::Power => {
            let g = gamma((n - alpha) / two).map_err(|e| {
                KernelError::Branch(format!("power branch hit a gamma pole ({e})"))
            })?;
            g / (two.powf(alpha) * pi_half_n * gamma_half_alpha)
        }
        FundamentalBranch::Logarithmic { k } => {
            let sign = if k % 2 == 0 { T::one() } else { -T::one() };
            sign / (two.powf(alpha - T::one()) * pi_half_n * gamma_half_alpha)
        }
    };
    Ok((c, branch))
}

/// Fundamental solution of `(-Laplace)^(alpha/2)` in R^dim as a function of separation.
pub fn fundamental_solution<T: Real>(s: T, alpha: T, dim: usize) -> Result<T> {
    require_positive(s)?;
    if alpha < T::lit(2.0) {
        return Err(KernelError::Domain(format!("alpha must be >= 2, got {alpha}")));
    }
    let (c, branch) = fundamental_coefficient(alpha, dim)?;
    let p = alpha - T::from_usize_lossy(dim);
    Ok(match branch {
        FundamentalBranch::Power => c * s.powf(p),
        FundamentalBranch::Logarithmic { .. } => -c * s.powf(p) * s.ln(),
    })
}

/// `r(alpha) = (4 pi)^(alpha/2) Gamma(alpha/2)`.
fn bessel_normalization<T: Real>(alpha: T) -> Result<T> {
    let two = T::lit(2.0);
    Ok((T::lit(4.0) * T::PI()).powf(alpha / two) * gamma(alpha / two)?)
}

/// `∫_R exp(-pi s^2 e^-t - e^t/(4 pi) + p t) dt`, the subordination integral after
/// the substitution `delta = e^t`.
fn bessel_log_integral(s: f64, p: f64, rel_tol: f64, max_intervals: usize) -> IntegralEstimate<f64> {
    use std::f64::consts::PI;
    let s2 = s * s;
    let f = move |t: f64| (-PI * s2 * (-t).exp() - t.exp() / (4.0 * PI) + p * t).exp();
    let (mut lo, hi) = (-40.0_f64, 40.0_f64);
    let mut est = integrate_1d(&f, lo, hi, rel_tol / 10.0, 0.0, max_intervals);
    // Left tail is only algebraic-exponential when s = 0; extend until it is negligible.
    for _ in 0..64 {
        let tail = f(lo) / p.max(1e-300);
        if tail <= rel_tol / 10.0 * est.value.abs() {
            break;
        }
        let ext = integrate_1d(&f, lo - 40.0, lo, rel_tol / 10.0, 0.0, max_intervals);
        est = IntegralEstimate {
            value: est.value + ext.value,
            error_bound: est.error_bound + ext.error_bound,
            cells_used: est.cells_used + ext.cells_used,
            converged: est.converged && ext.converged,
        };
        lo -= 40.0;
    }
    let tail = f(lo) / p.max(1e-300);
    if tail.is_finite() {
        est.error_bound += tail;
    } else {
        est.converged = false;
    }
    est
}

/// Bessel kernel `g_alpha(s)` via its subordination integral.
pub fn eval_bessel<T: Real>(
    s: T,
    alpha: T,
    dim: usize,
    cfg: &QuadratureConfig<T>,
) -> Result<IntegralEstimate<T>> {
    if !(s >= T::zero()) || !s.is_finite() {
        return Err(KernelError::Domain(format!("separation must be >= 0, got {s}")));
    }
    if alpha < T::lit(2.0) {
        return Err(KernelError::Domain(format!("alpha must be >= 2, got {alpha}")));
    }
    let p = (alpha.as_f64() - dim as f64) / 2.0;
    if s == T::zero() && p <= 0.0 {
        return Err(KernelError::Singularity {
            alpha: alpha.as_f64(),
            dim,
        });
    }
    let r = bessel_normalization(alpha)?.as_f64();
    let est = bessel_log_integral(s.as_f64(), p, cfg.rel_tol.as_f64(), 4096);
    let value = est.value / r;
    let error_bound = est.error_bound / r;
    let converged = est.converged && error_bound <= (cfg.rel_tol.as_f64() * value.abs()).max(cfg.abs_tol.as_f64());
    if !converged {
        return Err(KernelError::Convergence {
            best: value,
            error_bound,
        });
    }
    Ok(IntegralEstimate {
        value: T::lit(value),
        error_bound: T::lit(error_bound),
        cells_used: est.cells_used,
        converged,
    })
}

/// `d g_alpha / ds` at `s > 0`, differentiating the subordination integral under the sign.
pub fn eval_bessel_derivative<T: Real>(s: T, alpha: T, dim: usize, rel_tol: f64) -> Result<T> {
    require_positive(s)?;
    let sf = s.as_f64();
    let p = (alpha.as_f64() - dim as f64) / 2.0 - 1.0;
    let r = bessel_normalization(alpha)?.as_f64();
    let est = bessel_log_integral(sf, p, rel_tol, 4096);
    Ok(T::lit(-2.0 * std::f64::consts::PI * sf * est.value / r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelKind {
    Riesz,
    Log,
    LogRiesz,
    FundamentalSolution,
    Bessel,
}

impl KernelKind {
    fn tag(self) -> &'static str {
        match self {
            KernelKind::Riesz => "riesz",
            KernelKind::Log => "log",
            KernelKind::LogRiesz => "logriesz",
            KernelKind::FundamentalSolution => "fundsol",
            KernelKind::Bessel => "bessel",
        }
    }
}

/// Kernel value and, when requested, its derivative in `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue<T> {
    pub value: T,
    pub derivative: Option<T>,
}

/// Strict monotonicity of a kernel on an interval `(0, s_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Monotonicity {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec<T> {
    pub kind: KernelKind,
    pub alpha: T,
    pub dim: usize,
    pub scale: T,
}

impl<T: Real> KernelSpec<T> {
    pub fn new(kind: KernelKind, alpha: T, dim: usize) -> Result<Self> {
        Self::with_scale(kind, alpha, dim, T::one())
    }

    pub fn with_scale(kind: KernelKind, alpha: T, dim: usize, scale: T) -> Result<Self> {
        let spec = KernelSpec {
            kind,
            alpha,
            dim,
            scale,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn riesz(alpha: T, dim: usize) -> Result<Self> {
        Self::new(KernelKind::Riesz, alpha, dim)
    }

    pub fn log(dim: usize) -> Result<Self> {
        Self::new(KernelKind::Log, T::from_usize_lossy(dim), dim)
    }

    pub fn log_riesz(alpha: T, dim: usize) -> Result<Self> {
        Self::new(KernelKind::LogRiesz, alpha, dim)
    }

    pub fn fundamental_solution(alpha: T, dim: usize) -> Result<Self> {
        Self::new(KernelKind::FundamentalSolution, alpha, dim)
    }

    pub fn bessel(alpha: T, dim: usize) -> Result<Self> {
        Self::new(KernelKind::Bessel, alpha, dim)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(KernelError::Domain(msg));
        if self.dim < 1 {
            return bad("dim must be >= 1".into());
        }
        if !self.alpha.is_finite() || self.alpha < T::lit(2.0) {
            return bad(format!("alpha must be >= 2, got {}", self.alpha));
        }
        if !(self.scale > T::zero()) || !self.scale.is_finite() {
            return bad(format!("scale must be positive, got {}", self.scale));
        }
        let n = T::from_usize_lossy(self.dim);
        match self.kind {
            KernelKind::Riesz if self.alpha == n => {
                bad("riesz kernel with alpha = dim is constant; use the log kernel".into())
            }
            KernelKind::Log if self.alpha != n => {
                bad(format!("log kernel requires alpha = dim, got alpha = {}", self.alpha))
            }
            KernelKind::LogRiesz if self.alpha <= n => {
                bad(format!("log-Riesz kernel requires alpha > dim, got alpha = {}", self.alpha))
            }
            _ => Ok(()),
        }
    }

    /// `alpha - dim`.
    pub fn exponent(&self) -> T {
        self.alpha - T::from_usize_lossy(self.dim)
    }

    /// `alpha = 2` sits on the edge of the standing assumption `alpha >= 2`.
    pub fn at_assumption_boundary(&self) -> bool {
        self.alpha == T::lit(2.0)
    }

    /// Whether `k(s)` is unbounded as `s -> 0`.
    pub fn is_singular_at_zero(&self) -> bool {
        let p = self.exponent();
        match self.kind {
            KernelKind::Riesz => p < T::zero(),
            KernelKind::Log => true,
            KernelKind::LogRiesz => false,
            KernelKind::FundamentalSolution => p <= T::zero(),
            KernelKind::Bessel => p <= T::zero(),
        }
    }

    /// Exact kernel value (scaled). Bessel goes through the full subordination integral.
    pub fn eval(&self, s: T) -> Result<T> {
        let raw = match self.kind {
            KernelKind::Riesz => eval_riesz(s, self.alpha, self.dim)?,
            KernelKind::Log => eval_log(s)?,
            KernelKind::LogRiesz => eval_log_riesz(s, self.alpha, self.dim)?,
            KernelKind::FundamentalSolution => fundamental_solution(s, self.alpha, self.dim)?,
            KernelKind::Bessel => {
                require_positive(s)?;
                eval_bessel(s, self.alpha, self.dim, &QuadratureConfig::default().with_rel_tol(T::tol_floor(1e-10)))?.value
            }
        };
        Ok(self.scale * raw)
    }

    /// Exact kernel value plus derivative `dk/ds` when `with_derivative` is set.
    pub fn eval_value(&self, s: T, with_derivative: bool) -> Result<KernelValue<T>> {
        let value = self.eval(s)?;
        let derivative = if with_derivative {
            Some(self.scale * self.raw_derivative(s)?)
        } else {
            None
        };
        Ok(KernelValue { value, derivative })
    }

    fn raw_derivative(&self, s: T) -> Result<T> {
        require_positive(s)?;
        let p = self.exponent();
        Ok(match self.kind {
            KernelKind::Riesz => p * s.powf(p - T::one()),
            KernelKind::Log => -T::one() / s,
            KernelKind::LogRiesz => -s.powf(p - T::one()) * (p * s.ln() + T::one()),
            KernelKind::FundamentalSolution => {
                let (c, branch) = fundamental_coefficient(self.alpha, self.dim)?;
                match branch {
                    FundamentalBranch::Power => c * p * s.powf(p - T::one()),
                    FundamentalBranch::Logarithmic { .. } => {
                        -c * s.powf(p - T::one()) * (p * s.ln() + T::one())
                    }
                }
            }
            KernelKind::Bessel => eval_bessel_derivative(s, self.alpha, self.dim, 1e-10)?,
        })
    }

    /// Strict monotonicity on `(0, s_max]`, if the kernel has one there.
    pub fn monotonicity_on(&self, s_max: T) -> Option<Monotonicity> {
        use Monotonicity::*;
        let p = self.exponent();
        let flip = |m: Monotonicity| match m {
            Increasing => Decreasing,
            Decreasing => Increasing,
        };
        // s^p log(1/s): decreasing everywhere for p = 0, increasing below the threshold for p > 0.
        let log_power = |p: T| -> Option<Monotonicity> {
            if p == T::zero() {
                Some(Decreasing)
            } else if p > T::zero() && s_max < (-T::one() / p).exp() {
                Some(Increasing)
            } else {
                None
            }
        };
        match self.kind {
            KernelKind::Riesz => Some(if p < T::zero() { Decreasing } else { Increasing }),
            KernelKind::Log => Some(Decreasing),
            KernelKind::LogRiesz => log_power(p),
            KernelKind::FundamentalSolution => {
                let (c, branch) = fundamental_coefficient(self.alpha, self.dim).ok()?;
                let base = match branch {
                    FundamentalBranch::Power => {
                        if p < T::zero() {
                            Decreasing
                        } else {
                            Increasing
                        }
                    }
                    FundamentalBranch::Logarithmic { .. } => log_power(p)?,
                };
                Some(if c < T::zero() { flip(base) } else { base })
            }
            KernelKind::Bessel => Some(Decreasing),
        }
    }

    /// Parses the `kind:key=value,...` grammar, e.g. `riesz:alpha=2,dim=3,scale=0.5`.
    pub fn parse(spec: &str) -> Result<Self> {
        let err = |reason: &str| KernelError::Parse {
            spec: spec.to_string(),
            reason: reason.to_string(),
        };
        let (tag, rest) = spec.trim().split_once(':').ok_or_else(|| err("missing `:`"))?;
        let kind = match tag.trim().to_ascii_lowercase().as_str() {
            "riesz" => KernelKind::Riesz,
            "log" => KernelKind::Log,
            "logriesz" => KernelKind::LogRiesz,
            "fundsol" => KernelKind::FundamentalSolution,
            "bessel" => KernelKind::Bessel,
            _ => return Err(err("unknown kernel kind")),
        };
        let (mut alpha, mut dim, mut scale) = (None, None, None);
        for kv in rest.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| err("expected key=value"))?;
            let v = v.trim();
            match k.trim() {
                "alpha" => alpha = Some(v.parse::<f64>().map_err(|_| err("bad alpha"))?),
                "dim" => dim = Some(v.parse::<usize>().map_err(|_| err("bad dim"))?),
                "scale" => scale = Some(v.parse::<f64>().map_err(|_| err("bad scale"))?),
                _ => return Err(err("unknown key")),
            }
        }
        let dim = dim.ok_or_else(|| err("dim is required"))?;
        let alpha = match (kind, alpha) {
            (KernelKind::Log, None) => dim as f64,
            (_, Some(a)) => a,
            (_, None) => return Err(err("alpha is required")),
        };
        Self::with_scale(kind, T::lit(alpha), dim, T::lit(scale.unwrap_or(1.0)))
    }
}

impl<T: Real> fmt::Display for KernelSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            KernelKind::Log => write!(f, "log:dim={}", self.dim)?,
            k => write!(f, "{}:alpha={},dim={}", k.tag(), self.alpha, self.dim)?,
        }
        if self.scale != T::one() {
            write!(f, ",scale={}", self.scale)?;
        }
        Ok(())
    }
}

impl<T: Real> FromStr for KernelSpec<T> {
    type Err = KernelError;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// Cubic-Hermite table of `ln g` against `ln s` for the Bessel kernel.
#[derive(Debug, Clone)]
pub struct BesselTable<T> {
    u0: T,
    du: T,
    ln_g: Vec<T>,
    slope: Vec<T>,
}

impl<T: Real> BesselTable<T> {
    const NODES: usize = 1536;

    /// Tabulates `g_alpha` on `[s_max * 1e-10, s_max]`; outside it the table extrapolates
    /// linearly in log-log coordinates.
    pub fn build(alpha: T, dim: usize, s_max: T) -> Result<Self> {
        let s_max = s_max.as_f64().max(1e-12);
        let u_hi = s_max.ln() + 1e-3;
        let u_lo = u_hi - 10.0 * std::f64::consts::LN_10;
        let du = (u_hi - u_lo) / (Self::NODES - 1) as f64;
        let mut ln_g = Vec::with_capacity(Self::NODES);
        let mut slope = Vec::with_capacity(Self::NODES);
        let cfg = QuadratureConfig::<f64>::default().with_rel_tol(1e-12);
        for i in 0..Self::NODES {
            let s = (u_lo + du * i as f64).exp();
            let g = eval_bessel(s, alpha.as_f64(), dim, &cfg)
                .or_else(|e| match e {
                    KernelError::Convergence { best, error_bound } => Ok(IntegralEstimate {
                        value: best,
                        error_bound,
                        cells_used: 0,
                        converged: false,
                    }),
                    e => Err(e),
                })?
                .value;
            let dg = eval_bessel_derivative(s, alpha.as_f64(), dim, 1e-12)?;
            ln_g.push(T::lit(g.ln()));
            slope.push(T::lit(s * dg / g));
        }
        Ok(BesselTable {
            u0: T::lit(u_lo),
            du: T::lit(du),
            ln_g,
            slope,
        })
    }

    /// `(g(s), g'(s))`.
    #[inline]
    pub fn eval(&self, s: T) -> (T, T) {
        let u = s.ln();
        let x = (u - self.u0) / self.du;
        let last = self.ln_g.len() - 1;
        let (lg, dlg) = if x <= T::zero() {
            (self.ln_g[0] + self.slope[0] * (u - self.u0), self.slope[0])
        } else if x >= T::from_usize_lossy(last) {
            let ul = self.u0 + self.du * T::from_usize_lossy(last);
            (self.ln_g[last] + self.slope[last] * (u - ul), self.slope[last])
        } else {
            let i = x.floor().to_usize().unwrap_or(0).min(last - 1);
            let t = x - T::from_usize_lossy(i);
            let (y0, y1) = (self.ln_g[i], self.ln_g[i + 1]);
            let (m0, m1) = (self.slope[i] * self.du, self.slope[i + 1] * self.du);
            let t2 = t * t;
            let t3 = t2 * t;
            let two = T::lit(2.0);
            let three = T::lit(3.0);
            let h00 = two * t3 - three * t2 + T::one();
            let h10 = t3 - two * t2 + t;
            let h01 = -two * t3 + three * t2;
            let h11 = t3 - t2;
            let y = h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1;
            let six = T::lit(6.0);
            let dy = (six * t2 - six * t) * y0
                + (three * t2 - T::lit(4.0) * t + T::one()) * m0
                + (-six * t2 + six * t) * y1
                + (three * t2 - two * t) * m1;
            (y, dy / self.du)
        };
        let g = lg.exp();
        (g, g * dlg / s)
    }
}

#[derive(Debug, Clone)]
enum Prepared<T> {
    Power { p: T, coef: T },
    PowerLog { p: T, coef: T },
    Bessel { coef: T, table: BesselTable<T> },
}

/// Kernel with constants folded in, for evaluation inside volume integrals.
///
/// Separations are assumed positive; callers skip `s = 0` (a null set).
#[derive(Debug, Clone)]
pub struct PreparedKernel<T> {
    spec: KernelSpec<T>,
    inner: Prepared<T>,
}

impl<T: Real> PreparedKernel<T> {
    /// `s_max` bounds the separations that will be queried (used only by the Bessel table).
    pub fn new(spec: &KernelSpec<T>, s_max: T) -> Result<Self> {
        spec.validate()?;
        let p = spec.exponent();
        let inner = match spec.kind {
            KernelKind::Riesz => Prepared::Power {
                p,
                coef: spec.scale,
            },
            KernelKind::Log => Prepared::PowerLog {
                p: T::zero(),
                coef: spec.scale,
            },
            KernelKind::LogRiesz => Prepared::PowerLog {
                p,
                coef: spec.scale,
            },
            KernelKind::FundamentalSolution => {
                let (c, branch) = fundamental_coefficient(spec.alpha, spec.dim)?;
                match branch {
                    FundamentalBranch::Power => Prepared::Power {
                        p,
                        coef: spec.scale * c,
                    },
                    FundamentalBranch::Logarithmic { .. } => Prepared::PowerLog {
                        p,
                        coef: spec.scale * c,
                    },
                }
            }
            KernelKind::Bessel => Prepared::Bessel {
                coef: spec.scale,
                table: BesselTable::build(spec.alpha, spec.dim, s_max)?,
            },
        };
        Ok(PreparedKernel {
            spec: spec.clone(),
            inner,
        })
    }

    pub fn spec(&self) -> &KernelSpec<T> {
        &self.spec
    }

    #[inline]
    fn pow(s: T, p: T) -> T {
        if p == T::zero() {
            T::one()
        } else if p == -T::one() {
            s.recip()
        } else if p == T::one() {
            s
        } else if p == T::lit(2.0) {
            s * s
        } else if p == -T::lit(2.0) {
            (s * s).recip()
        } else {
            s.powf(p)
        }
    }

    #[inline]
    pub fn value(&self, s: T) -> T {
        match &self.inner {
            Prepared::Power { p, coef } => *coef * Self::pow(s, *p),
            Prepared::PowerLog { p, coef } => -*coef * Self::pow(s, *p) * s.ln(),
            Prepared::Bessel { coef, table } => *coef * table.eval(s).0,
        }
    }

    #[inline]
    pub fn derivative(&self, s: T) -> T {
        match &self.inner {
            Prepared::Power { p, coef } => *coef * *p * Self::pow(s, *p - T::one()),
            Prepared::PowerLog { p, coef } => {
                -*coef * Self::pow(s, *p - T::one()) * (*p * s.ln() + T::one())
            }
            Prepared::Bessel { coef, table } => *coef * table.eval(s).1,
        }
    }
}
