//! The moving-plane sweep: critical plane positions, reflected-cap difference integrals,
//! comparison sign checks, difference-quotient probes and the ball characterization.

use crate::error::{Error, Result};
use crate::geometry::{
    boundary_sample, lambda_max, lambda_min, random_unit, region_membership, rng_from_seed, CapRegion,
    CapZone, Domain, Hyperplane, Region, MAX_DIM,
};
use crate::kernels::Monotonicity;
use crate::potentials::{
    boundary_profile, constancy_verdict, error_budget, eval_gradient, BoundaryProfile, Constancy,
    PotentialSpec,
};
use crate::quadrature::{integrate, IntegralEstimate, QuadratureConfig};
use crate::scalar::{dist, dot, norm, Real};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Which stopping condition ends the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    /// The reflected cap touches the boundary from inside away from the plane.
    InternalTangency,
    /// The plane meets the boundary at a point whose normal lies in the plane.
    Orthogonality,
    Both,
}

impl EventKind {
    pub fn has_orthogonality(self) -> bool {
        matches!(self, EventKind::Orthogonality | EventKind::Both)
    }

    pub fn has_tangency(self) -> bool {
        matches!(self, EventKind::InternalTangency | EventKind::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalEvent<T> {
    pub kind: EventKind,
    pub lambda_bar: T,
    /// Tangency point when tangency fired, else the orthogonality point.
    pub witness: Vec<T>,
    /// First plane position with a reflected boundary point leaving the domain through a
    /// chord of length at least `min_chord`; infinite when none does before orthogonality.
    pub lambda_tangency: T,
    pub tangency_witness: Option<Vec<T>>,
    /// Lowest boundary point whose outward normal is orthogonal to the direction.
    pub lambda_orthogonality: T,
    pub orthogonality_witness: Option<Vec<T>>,
    /// Tangency and orthogonality residuals evaluated at `lambda_bar`.
    pub residuals: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult<T> {
    pub direction: Vec<T>,
    pub lambda0: T,
    pub lambda_max: T,
    pub event: CriticalEvent<T>,
    /// Largest `|sdf(reflect(x))|` over boundary samples at `lambda_bar`.
    pub symmetry_residual: T,
    pub symmetry_tol: T,
    pub omega_cap_volume: IntegralEstimate<T>,
    /// Volume a slab of width `tol * diam` can hold: `tol * diam^N`.
    pub cap_floor: T,
}

impl<T: Real> SweepResult<T> {
    /// `Omega_lambda_bar` counts as empty when its volume is within its error bound plus
    /// the slab volume left by the uncertainty in `lambda_bar`.
    pub fn cap_is_empty(&self) -> bool {
        self.omega_cap_volume.value <= self.omega_cap_volume.error_bound + self.cap_floor
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetry_residual <= self.symmetry_tol
    }

    pub fn plane(&self) -> Hyperplane<T> {
        Hyperplane {
            direction: self.direction.clone(),
            offset: self.event.lambda_bar,
        }
    }
}

/// Sweep controls. Lengths are relative to the domain's diameter bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct SweepConfig<T> {
    /// Resolution of the critical position.
    pub tol: T,
    /// Events closer than this are reported as `Both`.
    pub both_tol: T,
    pub symmetry_tol: T,
    /// Chords shorter than this belong to the orthogonality regime.
    pub min_chord: T,
    /// Boundary samples for residuals.
    pub samples: usize,
    pub seed: u64,
    pub cap_quad: QuadratureConfig<T>,
}

impl<T: Real> Default for SweepConfig<T> {
    fn default() -> Self {
        SweepConfig {
            tol: T::tol_floor(1e-6),
            both_tol: T::tol_floor(1e-5),
            symmetry_tol: T::tol_floor(1e-4),
            min_chord: T::lit(0.05),
            samples: 2000,
            seed: 0,
            cap_quad: QuadratureConfig::default().with_rel_tol(T::tol_floor(1e-4)),
        }
    }
}

/// Orthonormal basis of the complement of the unit vector `e`.
pub(crate) fn complement_basis<T: Real>(e: &[T]) -> Vec<Vec<T>> {
    let n = e.len();
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| e[a].abs().partial_cmp(&e[b].abs()).unwrap_or(std::cmp::Ordering::Equal));
    for &axis in &order {
        if basis.len() == n - 1 {
            break;
        }
        let mut v = vec![T::zero(); n];
        v[axis] = T::one();
        for b in std::iter::once(e).chain(basis.iter().map(|b| b.as_slice())) {
            let c = dot(&v, b);
            for i in 0..n {
                v[i] -= c * b[i];
            }
        }
        let l = norm(&v);
        if l > T::lit(1e-6) {
            basis.push(v.into_iter().map(|x| x / l).collect());
        }
    }
    basis
}

fn unit<T: Real>(e: &[T]) -> Result<Vec<T>> {
    let l = norm(e);
    if !(l > T::zero()) || !l.is_finite() {
        return Err(Error::Precondition("direction must be a nonzero finite vector".into()));
    }
    Ok(e.iter().map(|&v| v / l).collect())
}

/// `sup` of `sdf(reflect(x)) / (lambda - x.e)` over boundary samples at least `min_depth`
/// below the plane. Nonnegative exactly when some reflected boundary point has left the
/// domain; nondecreasing in `lambda` for convex domains.
pub fn tangency_residual<T: Real>(
    d: &Domain<T>,
    plane: &Hyperplane<T>,
    boundary: &[Vec<T>],
    min_depth: T,
) -> Option<T> {
    let mut best: Option<T> = None;
    let dim = d.dim();
    let mut r = [T::zero(); MAX_DIM];
    for x in boundary {
        let depth = -plane.signed_offset(x);
        if depth < min_depth {
            continue;
        }
        plane.reflect_into(x, &mut r[..dim]);
        let v = d.sdf(&r[..dim]) / depth;
        best = Some(best.map_or(v, |b: T| b.max(v)));
    }
    best
}

/// Points of `boundary ∩ T_lambda` from line scans inside the plane.
pub fn slice_points<T: Real>(d: &Domain<T>, plane: &Hyperplane<T>, lines: usize) -> Vec<Vec<T>> {
    let dim = d.dim();
    let e = &plane.direction;
    let basis = complement_basis(e);
    let c = d.bbox().center();
    let shift = plane.offset - dot(&c, e);
    let base: Vec<T> = c.iter().zip(e).map(|(&ci, &ei)| ci + shift * ei).collect();
    let reach = d.bbox().diagonal();
    let mut out = Vec::new();
    let mut scan_line = |origin: &[T], dir: &[T]| {
        let mut t = -reach;
        while let Some(root) = d.first_crossing(origin, dir, t, reach, 512) {
            out.push(origin.iter().zip(dir).map(|(&o, &v)| o + root * v).collect::<Vec<T>>());
            t = root + reach * T::lit(1e-9);
            if t >= reach {
                break;
            }
        }
    };
    if dim == 2 {
        scan_line(&base, &basis[0]);
    } else {
        for (a, b) in [(0, 1), (1, 0)].into_iter().take(dim - 1) {
            for j in 0..lines {
                let s = -reach / T::lit(2.0)
                    + reach * (T::from_usize_lossy(j) + T::lit(0.5)) / T::from_usize_lossy(lines);
                let origin: Vec<T> = (0..dim).map(|i| base[i] + s * basis[b][i]).collect();
                scan_line(&origin, &basis[a]);
            }
        }
    }
    out
}

/// `max n.e` over slice points; nonnegative once the plane has reached a boundary point with
/// normal orthogonal to `e`.
pub fn orthogonality_residual<T: Real>(d: &Domain<T>, plane: &Hyperplane<T>) -> Option<T> {
    slice_points(d, plane, 48)
        .iter()
        .map(|p| dot(&d.normal(p), &plane.direction))
        .fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |a| a.max(v))))
}

/// First chord of the line `origin + t e`: entry and exit parameters.
fn first_chord<T: Real>(d: &Domain<T>, origin: &[T], e: &[T], reach: T) -> Option<(T, T)> {
    let a = d.first_crossing(origin, e, -reach, reach, 256)?;
    let b = d.first_crossing(origin, e, a + reach * T::lit(1e-12), reach, 256)?;
    Some((a, b))
}

struct ChordField<'a, T> {
    d: &'a Domain<T>,
    e: &'a [T],
    basis: Vec<Vec<T>>,
    center: Vec<T>,
    reach: T,
    min_chord: T,
}

impl<T: Real> ChordField<'_, T> {
    fn origin(&self, w: &[T]) -> Vec<T> {
        let mut o = self.center.clone();
        for (wi, b) in w.iter().zip(&self.basis) {
            for i in 0..o.len() {
                o[i] += *wi * b[i];
            }
        }
        o
    }

    /// `(midpoint height, chord length, exit point)` of the first chord through `w`.
    fn chord(&self, w: &[T]) -> Option<(T, T, Vec<T>)> {
        let o = self.origin(w);
        let (a, b) = first_chord(self.d, &o, self.e, self.reach)?;
        let base = dot(&o, self.e);
        let exit = o.iter().zip(self.e).map(|(&oi, &ei)| oi + b * ei).collect();
        Some((base + (a + b) / T::lit(2.0), b - a, exit))
    }

    fn admissible(&self, w: &[T]) -> Option<(T, T, Vec<T>)> {
        self.chord(w).filter(|c| c.1 >= self.min_chord)
    }
}

/// Minimal chord-midpoint height over chords of length at least `min_chord`, the plane
/// position at which a reflected boundary point first reaches the boundary again.
fn tangency_event<T: Real>(d: &Domain<T>, e: &[T], cfg: &SweepConfig<T>) -> Option<(T, T, Vec<T>)> {
    let diam = d.diameter_upper();
    let field = ChordField {
        d,
        e,
        basis: complement_basis(e),
        center: d.bbox().center(),
        reach: d.bbox().diagonal(),
        min_chord: cfg.min_chord * diam,
    };
    let m = field.basis.len();
    let per_axis = if m == 1 { 401 } else { 41 };
    let half = field.reach / T::lit(2.0);
    let h = T::lit(2.0) * half / T::from_usize_lossy(per_axis - 1);
    let mut grid: Vec<(Vec<T>, T, T)> = Vec::new();
    let total = per_axis.pow(m as u32);
    for k in 0..total {
        let mut w = Vec::with_capacity(m);
        let mut r = k;
        for _ in 0..m {
            w.push(-half + h * T::from_usize_lossy(r % per_axis));
            r /= per_axis;
        }
        if let Some((mid, len, _)) = field.admissible(&w) {
            grid.push((w, mid, len));
        }
    }
    let best_mid = grid.iter().map(|g| g.1).fold(T::infinity(), T::min);
    if !best_mid.is_finite() {
        return None;
    }
    // Among ties prefer the longest chord.
    let tie = cfg.both_tol * diam;
    let start = grid
        .iter()
        .filter(|g| g.1 <= best_mid + tie)
        .max_by(|a, b| a.2.partial_cmp(&b.2).unwrap_or(std::cmp::Ordering::Equal))?;
    let mut w = start.0.clone();
    let (mut val, mut len, mut exit) = field.admissible(&w)?;
    let mut step = h;
    let floor = cfg.tol * diam * T::lit(1e-3);
    let mut trial = w.clone();
    while step > floor {
        let mut improved = false;
        for axis in 0..m {
            for sgn in [T::one(), -T::one()] {
                trial.copy_from_slice(&w);
                trial[axis] += sgn * step;
                if let Some((v, l, x)) = field.admissible(&trial) {
                    if v < val {
                        w.copy_from_slice(&trial);
                        val = v;
                        len = l;
                        exit = x;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step /= T::lit(2.0);
        }
    }
    // A minimum pinned against the length constraint is the orthogonality regime.
    if len < T::lit(2.0) * field.min_chord {
        return None;
    }
    Some((val, len, exit))
}

/// Lowest boundary point whose outward normal makes `n.e >= 0`, by scanning meridians from
/// each chart anchor for sign changes of `n.e`.
fn orthogonality_event<T: Real>(d: &Domain<T>, e: &[T]) -> Option<(T, Vec<T>)> {
    let dim = d.dim();
    let basis = complement_basis(e);
    let tol = d.boundary_tol() * T::lit(10.0);
    let mut best: Option<(T, Vec<T>)> = None;
    for chart in d.charts() {
        let meridian = |perp: &[T]| -> Option<(T, Vec<T>)> {
            const STEPS: usize = 256;
            let dir = |theta: T| -> Vec<T> {
                (0..dim).map(|i| -theta.cos() * e[i] + theta.sin() * perp[i]).collect()
            };
            let probe = |theta: T| -> Option<(Vec<T>, T)> {
                let p = d.ray_boundary_point(&chart, &dir(theta))?;
                let h = dot(&d.normal(&p), e);
                Some((p, h))
            };
            let mut found: Option<(T, Vec<T>)> = None;
            let mut prev: Option<(T, T)> = None;
            for j in 0..=STEPS {
                let th = T::PI() * T::from_usize_lossy(j) / T::from_usize_lossy(STEPS);
                let Some((p, h)) = probe(th) else {
                    prev = None;
                    continue;
                };
                if let Some((th0, h0)) = prev {
                    if h0 < T::zero() && h >= T::zero() {
                        let (mut lo, mut hi) = (th0, th);
                        for _ in 0..60 {
                            let mid = (lo + hi) / T::lit(2.0);
                            match probe(mid) {
                                Some((_, hm)) if hm < T::zero() => lo = mid,
                                _ => hi = mid,
                            }
                        }
                        if let Some((q, _)) = probe(hi) {
                            if d.sdf(&q).abs() <= tol {
                                let v = dot(&q, e);
                                if found.as_ref().is_none_or(|f| v < f.0) {
                                    found = Some((v, q));
                                }
                            }
                        }
                    }
                } else if j == 0 && h >= T::zero() && d.sdf(&p).abs() <= tol {
                    found = Some((dot(&p, e), p.clone()));
                }
                prev = Some((th, h));
            }
            found
        };
        let candidate = if dim == 2 {
            let plus = meridian(&basis[0]);
            let minus = meridian(&basis[0].iter().map(|&v| -v).collect::<Vec<_>>());
            [plus, minus].into_iter().flatten().min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        } else {
            let (a, b) = (&basis[0], &basis[1]);
            let perp = |phi: T| -> Vec<T> {
                (0..dim).map(|i| phi.cos() * a[i] + phi.sin() * b[i]).collect()
            };
            const K: usize = 64;
            let step = T::lit(2.0) * T::PI() / T::from_usize_lossy(K);
            let scan: Vec<(T, Option<(T, Vec<T>)>)> = (0..K)
                .map(|k| {
                    let phi = step * T::from_usize_lossy(k);
                    (phi, meridian(&perp(phi)))
                })
                .collect();
            let k_best = scan
                .iter()
                .enumerate()
                .filter_map(|(k, s)| s.1.as_ref().map(|v| (k, v.0)))
                .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
                .map(|x| x.0);
            k_best.and_then(|k| {
                // Golden-section refinement in the azimuth.
                let mut lo = scan[k].0 - step;
                let mut hi = scan[k].0 + step;
                let g = T::lit(0.618_033_988_749_894_9);
                let f = |phi: T| meridian(&perp(phi));
                let val = |r: &Option<(T, Vec<T>)>| r.as_ref().map_or(T::infinity(), |v| v.0);
                let mut best = scan[k].1.clone();
                let mut x1 = hi - g * (hi - lo);
                let mut x2 = lo + g * (hi - lo);
                let mut f1 = f(x1);
                let mut f2 = f(x2);
                for _ in 0..48 {
                    if val(&f1) < val(&best) {
                        best = f1.clone();
                    }
                    if val(&f2) < val(&best) {
                        best = f2.clone();
                    }
                    if val(&f1) <= val(&f2) {
                        hi = x2;
                        x2 = x1;
                        f2 = f1;
                        x1 = hi - g * (hi - lo);
                        f1 = f(x1);
                    } else {
                        lo = x1;
                        x1 = x2;
                        f1 = f2;
                        x2 = lo + g * (hi - lo);
                        f2 = f(x2);
                    }
                }
                best
            })
        };
        if let Some(c) = candidate {
            if best.as_ref().is_none_or(|b| c.0 < b.0) {
                best = Some(c);
            }
        }
    }
    best
}

/// Moves `T_lambda` from `lambda0` in direction `e` to the first critical position.
pub fn sweep<T: Real>(d: &Domain<T>, e: &[T], cfg: &SweepConfig<T>) -> Result<SweepResult<T>> {
    if e.len() != d.dim() {
        return Err(Error::Dimension(format!("direction has {} components, domain dimension is {}", e.len(), d.dim())));
    }
    if !(2..=3).contains(&d.dim()) {
        return Err(Error::Precondition("sweeps are implemented for dimensions 2 and 3".into()));
    }
    let e = unit(e)?;
    let diam = d.diameter_upper();
    let lambda0 = lambda_min(d, &e)?;
    let lmax = lambda_max(d, &e)?;
    let tangency = tangency_event(d, &e, cfg);
    let ortho = orthogonality_event(d, &e);
    let lt = tangency.as_ref().map_or(T::infinity(), |t| t.0);
    let lo = ortho.as_ref().map_or(T::infinity(), |o| o.0);
    let lambda_bar = lt.min(lo);
    if !lambda_bar.is_finite() || lambda_bar > lmax {
        return Err(Error::NoEvent {
            direction: e.iter().map(|v| v.as_f64()).collect(),
            lambda_max: lmax.as_f64(),
        });
    }
    let close = cfg.both_tol * diam;
    let t_fired = lt <= lambda_bar + close;
    let o_fired = lo <= lambda_bar + close;
    let kind = match (t_fired, o_fired) {
        (true, true) => EventKind::Both,
        (true, false) => EventKind::InternalTangency,
        _ => EventKind::Orthogonality,
    };
    let witness = if t_fired {
        tangency.as_ref().map(|t| t.2.clone())
    } else {
        ortho.as_ref().map(|o| o.1.clone())
    }
    .unwrap_or_default();

    let plane = Hyperplane {
        direction: e.clone(),
        offset: lambda_bar,
    };
    let boundary: Vec<Vec<T>> = boundary_sample(d, cfg.samples, cfg.seed)?
        .into_iter()
        .map(|s| s.point)
        .collect();
    let dim = d.dim();
    let mut r = [T::zero(); MAX_DIM];
    let symmetry_residual = boundary.iter().fold(T::zero(), |acc, x| {
        plane.reflect_into(x, &mut r[..dim]);
        acc.max(d.sdf(&r[..dim]).abs())
    });
    let residuals = vec![
        tangency_residual(d, &plane, &boundary, cfg.min_chord * diam / T::lit(2.0)).unwrap_or(T::nan()),
        orthogonality_residual(d, &plane).unwrap_or(T::nan()),
    ];
    let omega_cap_volume = cap_volume(d, &plane, &cfg.cap_quad)?;
    Ok(SweepResult {
        direction: e,
        lambda0,
        lambda_max: lmax,
        event: CriticalEvent {
            kind,
            lambda_bar,
            witness,
            lambda_tangency: lt,
            tangency_witness: tangency.map(|t| t.2),
            lambda_orthogonality: lo,
            orthogonality_witness: ortho.map(|o| o.1),
            residuals,
        },
        symmetry_residual,
        symmetry_tol: cfg.symmetry_tol * diam,
        omega_cap_volume,
        cap_floor: cfg.tol * diam.powi(d.dim() as i32),
    })
}

/// Volume of `Omega_lambda`.
pub fn cap_volume<T: Real>(d: &Domain<T>, plane: &Hyperplane<T>, quad: &QuadratureConfig<T>) -> Result<IntegralEstimate<T>> {
    let cap = CapRegion::new(d, plane.clone());
    Ok(integrate(&|_: &[T]| T::one(), &cap, quad, None)?)
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow<T> {
    pub lambda: T,
    pub tangency_residual: T,
    pub orthogonality_residual: T,
    pub cap_volume: T,
    pub cap_err: T,
}

/// Residuals and cap volume on `steps` plane positions strictly between `lambda0` and
/// `lambda_max`. Missing residuals (no admissible points) are NaN.
pub fn sweep_table<T: Real>(d: &Domain<T>, e: &[T], steps: usize, cfg: &SweepConfig<T>) -> Result<Vec<SweepRow<T>>> {
    let e = unit(e)?;
    let l0 = lambda_min(d, &e)?;
    let l1 = lambda_max(d, &e)?;
    let diam = d.diameter_upper();
    let boundary: Vec<Vec<T>> = boundary_sample(d, cfg.samples, cfg.seed)?
        .into_iter()
        .map(|s| s.point)
        .collect();
    (1..=steps)
        .into_par_iter()
        .map(|i| {
            let lambda = l0 + (l1 - l0) * T::from_usize_lossy(i) / T::from_usize_lossy(steps + 1);
            let plane = Hyperplane {
                direction: e.clone(),
                offset: lambda,
            };
            let vol = cap_volume(d, &plane, &cfg.cap_quad)?;
            Ok(SweepRow {
                lambda,
                tangency_residual: tangency_residual(d, &plane, &boundary, cfg.min_chord * diam / T::lit(2.0))
                    .unwrap_or(T::nan()),
                orthogonality_residual: orthogonality_residual(d, &plane).unwrap_or(T::nan()),
                cap_volume: vol.value,
                cap_err: vol.error_bound,
            })
        })
        .collect()
}

/// `u(x_lambda) - u(x) = ∫_{Omega_lambda} [k(|x_lambda - y|) - k(|x - y|)] dy` for
/// `x` in the cap `Sigma_lambda`.
pub fn reflection_difference<T: Real>(p: &PotentialSpec<T>, plane: &Hyperplane<T>, x: &[T]) -> Result<IntegralEstimate<T>> {
    let d = p.domain();
    if x.len() != d.dim() || plane.dim() != d.dim() {
        return Err(Error::Dimension("point, plane and domain must share a dimension".into()));
    }
    if region_membership(d, plane, x) != CapZone::SigmaLambda {
        return Err(Error::Precondition(format!("{x:?} is not in the cap below the plane")));
    }
    let xl = plane.reflect(x);
    let k = p.prepared();
    let f = |y: &[T]| {
        let a = dist(&xl, y);
        let b = dist(x, y);
        let ka = if a > T::zero() { k.value(a) } else { T::zero() };
        let kb = if b > T::zero() { k.value(b) } else { T::zero() };
        ka - kb
    };
    let cap = CapRegion::new(d, plane.clone());
    let singular = p.kernel().is_singular_at_zero().then_some(xl.as_slice());
    Ok(integrate(&f, &cap, p.quad(), singular)?.scaled(p.scale()))
}

/// Sign the comparison lemmas predict for `u_lambda - u` on the cap, from the kernel's
/// monotonicity on `(0, diam]`.
pub fn predicted_sign<T: Real>(p: &PotentialSpec<T>) -> Option<T> {
    match p.kernel().monotonicity_on(p.domain().diameter_upper())? {
        Monotonicity::Decreasing => Some(T::one()),
        Monotonicity::Increasing => Some(-T::one()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CheckOutcome {
    Pass,
    Fail,
    /// Sign agrees or not, but `|value| <= error_bound`.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignSample<T> {
    pub lambda: T,
    pub point: Vec<T>,
    pub difference: IntegralEstimate<T>,
    pub outcome: CheckOutcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReportStatus {
    Pass,
    Fail,
    Inconclusive,
    /// The kernel has no definite monotonicity on the domain's diameter range.
    OutOfHypothesis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignReport<T> {
    pub direction: Vec<T>,
    pub lambda0: T,
    pub lambda_bar: T,
    /// `+1` or `-1`; `None` when out of hypothesis.
    pub predicted_sign: Option<T>,
    pub samples: Vec<SignSample<T>>,
    pub status: ReportStatus,
    pub notes: Vec<String>,
}

impl<T: Real> SignReport<T> {
    pub fn passed(&self) -> bool {
        self.status == ReportStatus::Pass
    }

    pub fn count(&self, o: CheckOutcome) -> usize {
        self.samples.iter().filter(|s| s.outcome == o).count()
    }
}

/// Seeded `(lambda, x)` pairs with `lambda` in `(lambda0, lambda_bar)` and `x` in the cap,
/// at least a tenth of the cap depth below the plane.
pub fn sample_cap_pairs<T: Real>(
    d: &Domain<T>,
    e: &[T],
    lambda0: T,
    lambda_bar: T,
    n_lambda: usize,
    n_points: usize,
    seed: u64,
) -> Vec<(Hyperplane<T>, Vec<T>)> {
    let mut rng = rng_from_seed(seed);
    let span = lambda_bar - lambda0;
    let bb = d.bbox();
    let mut out = Vec::with_capacity(n_lambda * n_points);
    for _ in 0..n_lambda {
        let u: f64 = rng.random_range(0.05..0.95);
        let lambda = lambda0 + span * T::lit(u);
        let plane = Hyperplane {
            direction: e.to_vec(),
            offset: lambda,
        };
        let depth = (lambda - lambda0) / T::lit(10.0);
        let mut got = 0;
        for _ in 0..200_000 {
            if got == n_points {
                break;
            }
            let x: Vec<T> = (0..d.dim())
                .map(|i| T::lit(rng.random_range(bb.lo[i].as_f64()..bb.hi[i].as_f64())))
                .collect();
            if -plane.signed_offset(&x) >= depth && region_membership(d, &plane, &x) == CapZone::SigmaLambda {
                out.push((plane.clone(), x));
                got += 1;
            }
        }
    }
    out
}

/// Checks the sign of `u_lambda - u` on seeded cap points against the kernel's monotonicity.
pub fn verify_comparison_sign<T: Real>(
    p: &PotentialSpec<T>,
    e: &[T],
    n_lambda: usize,
    n_points: usize,
    seed: u64,
    sweep_cfg: &SweepConfig<T>,
) -> Result<SignReport<T>> {
    let e = unit(e)?;
    let d = p.domain();
    let sw = sweep(d, &e, sweep_cfg)?;
    let predicted = predicted_sign(p);
    let mut notes = p.hypothesis_notes();
    let pairs = sample_cap_pairs(d, &e, sw.lambda0, sw.event.lambda_bar, n_lambda, n_points, seed);
    let samples = pairs
        .par_iter()
        .map(|(plane, x)| {
            let diff = reflection_difference(p, plane, x)?;
            let outcome = if diff.value.abs() <= diff.error_bound {
                CheckOutcome::Inconclusive
            } else {
                match predicted {
                    Some(s) if diff.value * s > T::zero() => CheckOutcome::Pass,
                    Some(_) => CheckOutcome::Fail,
                    None => CheckOutcome::Inconclusive,
                }
            };
            Ok(SignSample {
                lambda: plane.offset,
                point: x.clone(),
                difference: diff,
                outcome,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let status = if predicted.is_none() {
        notes.push("kernel is not monotone on the diameter range".into());
        ReportStatus::OutOfHypothesis
    } else if samples.iter().any(|s| s.outcome == CheckOutcome::Fail) {
        ReportStatus::Fail
    } else if samples.is_empty() || samples.iter().any(|s| s.outcome == CheckOutcome::Inconclusive) {
        ReportStatus::Inconclusive
    } else {
        ReportStatus::Pass
    };
    Ok(SignReport {
        direction: e,
        lambda0: sw.lambda0,
        lambda_bar: sw.event.lambda_bar,
        predicted_sign: predicted,
        samples,
        status,
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotientSample<T> {
    pub distance: T,
    pub point: Vec<T>,
    /// `(u(x_lambda) - u(x)) / ((x_lambda - x) . e)`.
    pub quotient: T,
    pub error_bound: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport<T> {
    pub applicable: bool,
    pub reason: Option<String>,
    pub predicted_sign: Option<T>,
    /// Orthogonality point the sequence approaches.
    pub target: Vec<T>,
    pub samples: Vec<QuotientSample<T>>,
    pub min_abs_quotient: T,
    /// `∇u . e` at the target, the limit of the quotients.
    pub gradient_along_e: Option<IntegralEstimate<T>>,
    /// Radius of a ball inside `Omega_lambda_bar`.
    pub inscribed_radius: T,
    pub signs_ok: bool,
}

/// Largest ball inside `Omega_lambda` (lower bound from the cap's signed distance).
pub fn inscribed_ball<T: Real>(d: &Domain<T>, plane: &Hyperplane<T>) -> (Vec<T>, T) {
    let cap = CapRegion::new(d, plane.clone());
    let bb = cap.bbox().clone();
    let dim = d.dim();
    let per_axis: usize = if dim == 2 { 96 } else { 32 };
    let mut best = (bb.center(), -cap.sdf(&bb.center()));
    let total = per_axis.pow(dim as u32);
    for k in 0..total {
        let mut r = k;
        let x: Vec<T> = (0..dim)
            .map(|i| {
                let j = r % per_axis;
                r /= per_axis;
                bb.lo[i] + (bb.hi[i] - bb.lo[i]) * (T::from_usize_lossy(j) + T::lit(0.5)) / T::from_usize_lossy(per_axis)
            })
            .collect();
        let v = -cap.sdf(&x);
        if v > best.1 {
            best = (x, v);
        }
    }
    let mut step = bb.diagonal() / T::from_usize_lossy(per_axis);
    let floor = bb.diagonal() * T::lit(1e-9);
    while step > floor {
        let mut improved = false;
        for axis in 0..dim {
            for sgn in [T::one(), -T::one()] {
                let mut x = best.0.clone();
                x[axis] += sgn * step;
                let v = -cap.sdf(&x);
                if v > best.1 {
                    best = (x, v);
                    improved = true;
                }
            }
        }
        if !improved {
            step /= T::lit(2.0);
        }
    }
    let r = best.1.max(T::zero());
    (best.0, r)
}

/// Difference quotients along `x^i = Q - d_i (e + n)`, `d_i = 0.1 diam 2^-i`, approaching the
/// orthogonality point `Q` from inside the cap.
pub fn difference_quotient_probe<T: Real>(p: &PotentialSpec<T>, sw: &SweepResult<T>, n_approach: usize) -> Result<ProbeReport<T>> {
    let d = p.domain();
    let e = &sw.direction;
    let plane = sw.plane();
    let predicted = predicted_sign(p);
    let not_applicable = |reason: String| ProbeReport {
        applicable: false,
        reason: Some(reason),
        predicted_sign: predicted,
        target: sw.event.witness.clone(),
        samples: Vec::new(),
        min_abs_quotient: T::zero(),
        gradient_along_e: None,
        inscribed_radius: T::zero(),
        signs_ok: false,
    };
    if !sw.event.kind.has_orthogonality() {
        return Ok(not_applicable("event has no orthogonality point".into()));
    }
    if sw.cap_is_empty() {
        return Ok(not_applicable("cap beyond the critical plane is empty".into()));
    }
    let Some(q) = sw.event.orthogonality_witness.clone() else {
        return Ok(not_applicable("no orthogonality witness".into()));
    };
    let (_, radius) = inscribed_ball(d, &plane);
    if radius <= T::lit(10.0) * d.boundary_tol() {
        return Ok(not_applicable("cap contains no ball above the boundary tolerance".into()));
    }
    let n = d.normal(&q);
    let diam = d.diameter_upper();
    let mut samples = Vec::with_capacity(n_approach);
    for i in 1..=n_approach {
        let di = T::lit(0.1) * diam * T::lit(2f64.powi(-(i as i32)));
        let x: Vec<T> = (0..d.dim()).map(|k| q[k] - di * (e[k] + n[k])).collect();
        if region_membership(d, &plane, &x) != CapZone::SigmaLambda {
            continue;
        }
        let diff = reflection_difference(p, &plane, &x)?;
        let denom = T::lit(2.0) * (-plane.signed_offset(&x));
        samples.push(QuotientSample {
            distance: di,
            point: x,
            quotient: diff.value / denom,
            error_bound: diff.error_bound / denom,
        });
    }
    let grad = eval_gradient(p, &q)?;
    let along = grad
        .iter()
        .zip(e)
        .fold(IntegralEstimate::exact(T::zero()), |acc, (g, &ei)| acc.combine(T::one(), g, ei));
    let min_abs = samples.iter().map(|s| s.quotient.abs()).fold(T::infinity(), T::min);
    let signs_ok = !samples.is_empty()
        && predicted.is_some_and(|s| samples.iter().all(|q| q.quotient * s > T::zero() && q.quotient.abs() > q.error_bound));
    Ok(ProbeReport {
        applicable: true,
        reason: None,
        predicted_sign: predicted,
        target: q,
        samples,
        min_abs_quotient: if min_abs.is_finite() { min_abs } else { T::zero() },
        gradient_along_e: Some(along),
        inscribed_radius: radius,
        signs_ok,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum VerdictKind<T> {
    IsBall { center: Vec<T>, radius: T },
    NotBall { witness_direction: Option<Vec<T>>, reason: String },
    /// Sweeps pass but the boundary profile cannot be resolved at this precision.
    Inconclusive { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure<T> {
    pub direction: Option<Vec<T>>,
    pub check: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict<T> {
    pub kind: VerdictKind<T>,
    pub directions_tested: usize,
    pub sweeps: Vec<SweepResult<T>>,
    pub profile_verdict: Constancy,
    pub profile_spread: T,
    pub profile_budget: T,
    pub failures: Vec<Failure<T>>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real + Deserialize<'de>"))]
pub struct CharacterizeConfig<T> {
    pub sweep: SweepConfig<T>,
    pub profile_samples: usize,
}

impl<T: Real> Default for CharacterizeConfig<T> {
    fn default() -> Self {
        CharacterizeConfig {
            sweep: SweepConfig::default(),
            profile_samples: 64,
        }
    }
}

/// Coordinate axes followed by seeded random unit directions.
pub fn test_directions<T: Real>(dim: usize, n: usize, seed: u64) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = (0..dim.min(n))
        .map(|i| (0..dim).map(|j| if i == j { T::one() } else { T::zero() }).collect())
        .collect();
    let mut rng = rng_from_seed(seed);
    while out.len() < n {
        out.push(random_unit(&mut rng, dim));
    }
    out
}

/// Ball characterization: every sweep must end on a symmetry plane with an empty cap, and
/// the boundary profile must be constant.
pub fn characterize<T: Real>(
    p: &PotentialSpec<T>,
    n_directions: usize,
    seed: u64,
    cfg: &CharacterizeConfig<T>,
) -> Result<Verdict<T>> {
    let d = p.domain();
    let dim = d.dim();
    if n_directions < dim + 1 {
        return Err(Error::Precondition(format!("need at least {} directions", dim + 1)));
    }
    let dirs = test_directions::<T>(dim, n_directions, seed);
    let sweeps = dirs
        .par_iter()
        .map(|e| sweep(d, e, &cfg.sweep))
        .collect::<Result<Vec<_>>>()?;
    let profile: BoundaryProfile<T> = boundary_profile(p, cfg.profile_samples, seed)?;
    let quad_err = T::zero();
    let constancy = constancy_verdict(&profile, quad_err);
    let mut failures = Vec::new();
    for s in &sweeps {
        if !s.cap_is_empty() {
            failures.push(Failure {
                direction: Some(s.direction.clone()),
                check: "cap_nonempty".into(),
                detail: format!(
                    "cap volume {} exceeds its error bound {} plus floor {} at lambda {}",
                    s.omega_cap_volume.value, s.omega_cap_volume.error_bound, s.cap_floor, s.event.lambda_bar
                ),
            });
        }
        if !s.is_symmetric() {
            failures.push(Failure {
                direction: Some(s.direction.clone()),
                check: "symmetry".into(),
                detail: format!("symmetry residual {} exceeds {}", s.symmetry_residual, s.symmetry_tol),
            });
        }
    }
    match constancy {
        Constancy::Constant => {}
        Constancy::NonConstant => failures.push(Failure {
            direction: None,
            check: "profile".into(),
            detail: format!("boundary spread {} exceeds ten times the error budget", profile.abs_spread),
        }),
        Constancy::Inconclusive => failures.push(Failure {
            direction: None,
            check: "profile".into(),
            detail: "insufficient precision".into(),
        }),
    }
    let kind = if let Some(f) = failures.iter().find(|f| f.check != "profile") {
        VerdictKind::NotBall {
            witness_direction: f.direction.clone(),
            reason: f.check.clone(),
        }
    } else {
        match constancy {
            Constancy::Constant => {
                let center = least_squares_center(&sweeps)?;
                let pts = boundary_sample(d, 400, seed)?;
                let radius = pts.iter().map(|b| dist(&b.point, &center)).sum::<T>() / T::from_usize_lossy(pts.len());
                VerdictKind::IsBall { center, radius }
            }
            Constancy::NonConstant => VerdictKind::NotBall {
                witness_direction: None,
                reason: "profile".into(),
            },
            Constancy::Inconclusive => VerdictKind::Inconclusive {
                reason: "insufficient precision".into(),
            },
        }
    };
    Ok(Verdict {
        kind,
        directions_tested: sweeps.len(),
        profile_verdict: constancy,
        profile_spread: profile.abs_spread,
        profile_budget: error_budget(&profile, quad_err),
        sweeps,
        failures,
        notes: p.hypothesis_notes(),
    })
}

/// Least-squares point on the planes `e_i . c = lambda_i`.
pub fn least_squares_center<T: Real>(sweeps: &[SweepResult<T>]) -> Result<Vec<T>> {
    let n = sweeps.first().map(|s| s.direction.len()).unwrap_or(0);
    let mut a = vec![vec![T::zero(); n]; n];
    let mut b = vec![T::zero(); n];
    for s in sweeps {
        let e = &s.direction;
        for i in 0..n {
            for j in 0..n {
                a[i][j] += e[i] * e[j];
            }
            b[i] += e[i] * s.event.lambda_bar;
        }
    }
    solve(a, b).ok_or_else(|| Error::Precondition("sweep directions do not span the space".into()))
}

/// Gaussian elimination with partial pivoting.
fn solve<T: Real>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() <= T::epsilon() * T::lit(1e3) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                let v = a[col][c];
                a[r][c] -= f * v;
            }
            let v = b[col];
            b[r] -= f * v;
        }
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= a[i][j] * x[j];
        }
        x[i] = s / a[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use approx::assert_relative_eq;

    fn dom(s: &str) -> Domain<f64> {
        Domain::parse(s).unwrap()
    }

    #[test]
    fn complement_is_orthonormal() {
        for e in [vec![1.0f64, 0.0], vec![0.6, 0.8], vec![0.0, 0.0, 1.0], vec![0.48, 0.6, 0.64]] {
            let b = complement_basis(&e);
            assert_eq!(b.len(), e.len() - 1);
            for (i, u) in b.iter().enumerate() {
                assert!((norm(u) - 1.0).abs() < 1e-14);
                assert!(dot(u, &e).abs() < 1e-14);
                for v in &b[i + 1..] {
                    assert!(dot(u, v).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn disk_sweep_hits_both_events_at_center() {
        let s = sweep(&dom("ball:0,0:1"), &[1.0, 0.0], &SweepConfig::default()).unwrap();
        assert_relative_eq!(s.lambda0, -1.0, epsilon = 1e-6);
        assert!(s.event.lambda_bar.abs() < 1e-9, "{:?}", s.event);
        assert_eq!(s.event.kind, EventKind::Both);
        assert!(s.cap_is_empty() && s.is_symmetric());
    }

    #[test]
    fn ellipse_axis_and_diagonal() {
        let d = dom("ellipsoid:0,0:1,0.5");
        let cfg = SweepConfig::default();
        for e in [[1.0, 0.0], [0.0, 1.0]] {
            let s = sweep(&d, &e, &cfg).unwrap();
            assert!(s.event.lambda_bar.abs() < 1e-6, "{:?}", s.event);
            assert!(s.is_symmetric() && s.cap_is_empty(), "{s:?}");
        }
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let s = sweep(&d, &[r, r], &cfg).unwrap();
        assert_eq!(s.event.kind, EventKind::Orthogonality);
        assert_relative_eq!(s.event.lambda_bar, -3.0 / 40f64.sqrt(), epsilon = 1e-6);
        assert!(!s.cap_is_empty());
    }

    #[test]
    fn union_stops_at_left_disk_center() {
        let s = sweep(&dom("union:ball:-1.2,0:1;ball:1.2,0:1"), &[1.0, 0.0], &SweepConfig::default()).unwrap();
        assert_relative_eq!(s.event.lambda_bar, -1.2, epsilon = 1e-6);
        assert_eq!(s.event.kind, EventKind::Both);
        assert!(!s.cap_is_empty());
    }

    #[test]
    fn ball_3d_sweeps_through_center() {
        let d = dom("ball:0.1,-0.2,0.3:1");
        let cfg = SweepConfig::default();
        for e in test_directions::<f64>(3, 5, 3) {
            let s = sweep(&d, &e, &cfg).unwrap();
            let want = dot(&[0.1, -0.2, 0.3], &s.direction);
            assert!((s.event.lambda_bar - want).abs() <= 2e-6, "{:?}", s.event);
            assert_eq!(s.event.kind, EventKind::Both);
        }
    }

    #[test]
    fn empty_cap_difference_vanishes() {
        let p = PotentialSpec::new(KernelSpec::parse("log:dim=2").unwrap(), dom("ball:0,0:1"), QuadratureConfig::default()).unwrap();
        let plane = Hyperplane::new(&[1.0, 0.0], 0.0).unwrap();
        let v = reflection_difference(&p, &plane, &[-0.5, 0.1]).unwrap();
        assert!(v.value.abs() <= 1e-9, "{v:?}");
        assert!(reflection_difference(&p, &plane, &[0.5, 0.1]).is_err());
    }

    #[test]
    fn center_from_planes() {
        let mk = |e: Vec<f64>, l: f64| SweepResult {
            direction: e,
            lambda0: 0.0,
            lambda_max: 0.0,
            event: CriticalEvent {
                kind: EventKind::Both,
                lambda_bar: l,
                witness: vec![],
                lambda_tangency: l,
                tangency_witness: None,
                lambda_orthogonality: l,
                orthogonality_witness: None,
                residuals: vec![],
            },
            symmetry_residual: 0.0,
            symmetry_tol: 0.0,
            omega_cap_volume: IntegralEstimate::exact(0.0),
            cap_floor: 0.0,
        };
        let c = least_squares_center(&[mk(vec![1.0, 0.0], 0.5), mk(vec![0.0, 1.0], -1.0), mk(vec![0.6, 0.8], 0.3 - 0.8)]).unwrap();
        assert_relative_eq!(c[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(c[1], -1.0, epsilon = 1e-12);
    }
}
