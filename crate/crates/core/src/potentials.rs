//! Volume potentials `u(x) = ∫_Ω k(|x - y|) dy`, their gradients and boundary profiles.

use crate::error::{Error, Result};
use crate::geometry::{boundary_sample, Domain};
use crate::kernels::{monotonicity_threshold, KernelKind, KernelSpec, PreparedKernel};
use crate::quadrature::{integrate, integrate_vec, mc_integrate, IntegralEstimate, QuadratureConfig};
use crate::scalar::{dist, Real};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Kernel, domain and quadrature settings for one potential.
#[derive(Debug, Clone)]
pub struct PotentialSpec<T> {
    kernel: KernelSpec<T>,
    domain: Domain<T>,
    quad: QuadratureConfig<T>,
    prepared: PreparedKernel<T>,
    reach: T,
}

impl<T: Real> PotentialSpec<T> {
    pub fn new(kernel: KernelSpec<T>, domain: Domain<T>, quad: QuadratureConfig<T>) -> Result<Self> {
        kernel.validate()?;
        quad.validate()?;
        if kernel.dim != domain.dim() {
            return Err(Error::Dimension(format!(
                "kernel dimension {} vs domain dimension {}",
                kernel.dim,
                domain.dim()
            )));
        }
        // Separations up to a few diameters away use the prepared fast path.
        let reach = T::lit(4.0) * domain.bbox().diagonal();
        let prepared = PreparedKernel::new(&unit_scale(&kernel), reach)?;
        Ok(PotentialSpec {
            kernel,
            domain,
            quad,
            prepared,
            reach,
        })
    }

    pub fn kernel(&self) -> &KernelSpec<T> {
        &self.kernel
    }

    pub fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    pub fn quad(&self) -> &QuadratureConfig<T> {
        &self.quad
    }

    /// The kernel at unit scale. Integrals are computed with it and multiplied by
    /// [`Self::scale`] afterwards, so refinement does not depend on the scale.
    pub fn prepared(&self) -> &PreparedKernel<T> {
        &self.prepared
    }

    pub fn scale(&self) -> T {
        self.kernel.scale
    }

    /// Same potential with another quadrature configuration.
    pub fn with_quad(&self, quad: QuadratureConfig<T>) -> Result<Self> {
        quad.validate()?;
        Ok(PotentialSpec {
            quad,
            ..self.clone()
        })
    }

    /// Same potential with the kernel scale multiplied by `factor`.
    pub fn rescaled(&self, factor: T) -> Result<Self> {
        let mut kernel = self.kernel.clone();
        kernel.scale = kernel.scale * factor;
        Self::new(kernel, self.domain.clone(), self.quad.clone())
    }

    /// For log-Riesz kernels: whether the diameter upper bound is below the monotonicity
    /// threshold. `None` for other kernels.
    pub fn theorem2_hypothesis(&self) -> Option<bool> {
        if self.kernel.kind != KernelKind::LogRiesz {
            return None;
        }
        let t = monotonicity_threshold(self.kernel.alpha, self.kernel.dim).ok()?;
        Some(self.domain.diameter_upper() < t)
    }

    /// Human-readable notes on hypotheses this run sits outside of.
    pub fn hypothesis_notes(&self) -> Vec<String> {
        let mut notes = Vec::new();
        if self.kernel.at_assumption_boundary() {
            notes.push("alpha = 2: boundary of stated assumption".to_string());
        }
        if self.theorem2_hypothesis() == Some(false) {
            notes.push("outside log-Riesz diameter hypothesis".to_string());
        }
        if !self.domain.is_smooth() {
            notes.push("domain is not C1".to_string());
        }
        notes
    }

    fn kernel_for(&self, x: &[T]) -> Result<std::borrow::Cow<'_, PreparedKernel<T>>> {
        let bb = self.domain.bbox();
        let far = dist(x, &bb.center()) + bb.diagonal();
        if self.kernel.kind == KernelKind::Bessel && far > self.reach {
            return Ok(std::borrow::Cow::Owned(PreparedKernel::new(&unit_scale(&self.kernel), T::lit(2.0) * far)?));
        }
        Ok(std::borrow::Cow::Borrowed(&self.prepared))
    }

    fn check_point(&self, x: &[T]) -> Result<()> {
        if x.len() != self.domain.dim() {
            return Err(Error::Dimension(format!(
                "point has {} coordinates, domain has dimension {}",
                x.len(),
                self.domain.dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("point must be finite".into()));
        }
        Ok(())
    }

    /// Whether `k'` is unbounded at 0.
    fn derivative_singular(&self) -> bool {
        self.kernel.kind == KernelKind::Log || self.kernel.exponent() < T::one()
    }
}

fn unit_scale<T: Real>(k: &KernelSpec<T>) -> KernelSpec<T> {
    KernelSpec { scale: T::one(), ..k.clone() }
}

/// `u(x)` with an error bound.
pub fn eval_potential<T: Real>(p: &PotentialSpec<T>, x: &[T]) -> Result<IntegralEstimate<T>> {
    p.check_point(x)?;
    let k = p.kernel_for(x)?;
    let f = |y: &[T]| {
        let s = dist(x, y);
        if s > T::zero() {
            k.value(s)
        } else {
            T::zero()
        }
    };
    let singular = p.kernel.is_singular_at_zero().then_some(x);
    Ok(integrate(&f, &p.domain, &p.quad, singular)?.scaled(p.scale()))
}

/// Monte-Carlo estimate of `u(x)`, independent of the adaptive rule.
pub fn eval_potential_mc<T: Real>(p: &PotentialSpec<T>, x: &[T]) -> Result<IntegralEstimate<T>> {
    p.check_point(x)?;
    let k = p.kernel_for(x)?;
    let f = |y: &[T]| {
        let s = dist(x, y);
        if s > T::zero() {
            k.value(s)
        } else {
            T::zero()
        }
    };
    Ok(mc_integrate(&f, &p.domain, &p.quad, Some(x))?.scaled(p.scale()))
}

/// `∇u(x) = ∫ k'(|x - y|) (x - y) / |x - y| dy`, one estimate per component.
pub fn eval_gradient<T: Real>(p: &PotentialSpec<T>, x: &[T]) -> Result<Vec<IntegralEstimate<T>>> {
    p.check_point(x)?;
    let k = p.kernel_for(x)?;
    let dim = x.len();
    let f = |y: &[T], out: &mut [T]| {
        let s = dist(x, y);
        if s > T::zero() {
            let c = k.derivative(s) / s;
            for i in 0..dim {
                out[i] = c * (x[i] - y[i]);
            }
        } else {
            out.iter_mut().for_each(|v| *v = T::zero());
        }
    };
    let singular = p.derivative_singular().then_some(x);
    Ok(integrate_vec(&f, dim, &p.domain, &p.quad, singular)?
        .into_iter()
        .map(|e| e.scaled(p.scale()))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample<T> {
    pub point: Vec<T>,
    pub value: T,
    pub error_bound: T,
    pub converged: bool,
}

/// Potential values on boundary samples with summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryProfile<T> {
    pub samples: Vec<ProfileSample<T>>,
    pub mean: T,
    pub min: T,
    pub max: T,
    pub abs_spread: T,
    pub rel_spread: T,
    pub spread_floor: T,
}

impl<T: Real> BoundaryProfile<T> {
    pub const DEFAULT_SPREAD_FLOOR: f64 = 1e-8;

    /// Aggregates samples; needs at least two.
    pub fn from_samples(samples: Vec<ProfileSample<T>>, spread_floor: T) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Precondition("a profile needs at least two samples".into()));
        }
        let values: Vec<T> = samples.iter().map(|s| s.value).collect();
        let mean = crate::scalar::pairwise_sum(&values) / T::from_usize_lossy(values.len());
        let min = values.iter().copied().fold(T::infinity(), T::min);
        let max = values.iter().copied().fold(-T::infinity(), T::max);
        let abs_spread = max - min;
        Ok(BoundaryProfile {
            samples,
            mean,
            min,
            max,
            abs_spread,
            rel_spread: abs_spread / mean.abs().max(spread_floor),
            spread_floor,
        })
    }

    pub fn max_error(&self) -> T {
        self.samples.iter().map(|s| s.error_bound).fold(T::zero(), T::max)
    }

    pub fn all_converged(&self) -> bool {
        self.samples.iter().all(|s| s.converged)
    }
}

/// Evaluates `u` at `n` seeded boundary samples in parallel.
pub fn boundary_profile<T: Real>(p: &PotentialSpec<T>, n: usize, seed: u64) -> Result<BoundaryProfile<T>> {
    if n < 2 {
        return Err(Error::Precondition("a profile needs at least two samples".into()));
    }
    let pts = boundary_sample(&p.domain, n, seed)?;
    let samples = pts
        .par_iter()
        .map(|b| {
            let e = eval_potential(p, &b.point)?;
            Ok(ProfileSample {
                point: b.point.clone(),
                value: e.value,
                error_bound: e.error_bound,
                converged: e.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    BoundaryProfile::from_samples(samples, T::lit(BoundaryProfile::<T>::DEFAULT_SPREAD_FLOOR))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constancy {
    Constant,
    NonConstant,
    Inconclusive,
}

/// Spread against the error budget `3 max(sample error) + 3 quad_error`: within it is
/// constant, beyond ten times it is not.
pub fn constancy_verdict<T: Real>(profile: &BoundaryProfile<T>, quad_error: T) -> Constancy {
    let budget = error_budget(profile, quad_error);
    if profile.abs_spread <= budget {
        Constancy::Constant
    } else if profile.abs_spread > T::lit(10.0) * budget {
        Constancy::NonConstant
    } else {
        Constancy::Inconclusive
    }
}

pub fn error_budget<T: Real>(profile: &BoundaryProfile<T>, quad_error: T) -> T {
    T::lit(3.0) * profile.max_error() + T::lit(3.0) * quad_error
}
